use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde_json::json;
use toxspan::corpus::{
    balance_binary, compute_stats, ingest_hatexplain, ingest_semeval, read_canonical, read_divisions, write_canonical,
    Dataset, Split,
};
use toxspan::errsample::{
    categorize, read_category_counts, read_sheet, reweight_prevalence, sample_sheet, select_errors,
    write_category_counts, write_prevalence_csv, write_sheet, AnnotatedSheet, PrevalenceTable,
};
use toxspan::harness::{
    grid_search, load_experiment, render_results_text, run_experiment, write_report_csv, write_results_csv,
    write_retention_csv, write_trace_csv, GridPoint, GridSpec, Predictor, Setting, TuneOptions, TuningRecord,
};
use toxspan::inferred::{gate, load_binary, read_span_predictions, write_span_predictions, BinaryMap};
use toxspan::lexicon::{build_lexicon, load_wordlist, write_lexicon, LexiconBuildConfig};
use toxspan::metrics::evaluate;
use toxspan::rationale::load_scores_for;
use toxspan::Predictions;

use crate::manifest::{manifest_path_for, Run};
use crate::{
    BalanceArgs, BuildLexiconArgs, Cli, Command, EvaluateArgs, ExperimentArgs, Format, IngestArgs, PredictArgs,
    PrevalenceArgs, SampleErrorsArgs, StatsArgs, TuneArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        init_pool(n)?;
    }
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let name = match &cli.command {
        Command::Ingest(_) => "ingest",
        Command::Stats(_) => "stats",
        Command::Balance(_) => "balance",
        Command::BuildLexicon(_) => "build-lexicon",
        Command::Predict(_) => "predict",
        Command::Evaluate(_) => "evaluate",
        Command::Tune(_) => "tune",
        Command::Experiment(_) => "experiment",
        Command::SampleErrors(_) => "sample-errors",
        Command::Prevalence(_) => "prevalence",
    };
    let mut run = Run::new(name, argv, cli.data_root.clone());
    match cli.command {
        Command::Ingest(a) => ingest(&mut run, a),
        Command::Stats(a) => stats(&mut run, a),
        Command::Balance(a) => balance(&mut run, a),
        Command::BuildLexicon(a) => build(&mut run, a),
        Command::Predict(a) => predict(&mut run, a),
        Command::Evaluate(a) => evaluate_cmd(&mut run, a),
        Command::Tune(a) => tune(&mut run, a),
        Command::Experiment(a) => experiment(&mut run, a, cli.jobs.is_none()),
        Command::SampleErrors(a) => sample_errors(&mut run, a),
        Command::Prevalence(a) => prevalence(&mut run, a),
    }
    .map(|manifest| (manifest, run))
    .and_then(|(manifest, run)| match manifest {
        Some(path) => run.finish(&path),
        None => Ok(()),
    })
}

fn init_pool(n: usize) -> Result<()> {
    if n == 0 {
        bail!("--jobs must be at least 1");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("cannot configure worker threads")
}

fn load_dataset(run: &mut Run, path: &Path) -> Result<Dataset> {
    let (r, name) = run.open(path)?;
    Ok(read_canonical(r, &name)?)
}

/// The given split when the dataset has samples in it, else everything.
fn split_or_all(ds: &Dataset, split: Split) -> Dataset {
    if ds.iter().any(|s| s.split == split) {
        ds.split(split)
    } else {
        ds.clone()
    }
}

fn select(ds: Dataset, split: Option<Split>) -> Result<Dataset> {
    match split {
        None => Ok(ds),
        Some(s) => {
            let part = ds.split(s);
            if part.is_empty() {
                bail!("{} has no {s} samples", ds.name);
            }
            Ok(part)
        }
    }
}

fn load_binary_file(run: &mut Run, path: &Path) -> Result<BinaryMap> {
    let (r, name) = run.open(path)?;
    Ok(load_binary(r, &name)?)
}

fn load_predictions(run: &mut Run, path: &Path) -> Result<Predictions> {
    let (r, name) = run.open(path)?;
    Ok(read_span_predictions(r, &name)?)
}

fn ingest(run: &mut Run, a: IngestArgs) -> Result<Option<PathBuf>> {
    let dataset = match a.format {
        Format::Semeval => {
            let name = a.name.as_deref().unwrap_or("semeval");
            let mut parts = Vec::new();
            for (split, path) in [(Split::Train, &a.train), (Split::Dev, &a.dev), (Split::Test, &a.test)] {
                if let Some(p) = path {
                    let (r, _) = run.open(p)?;
                    parts.push(ingest_semeval(r, split, name).with_context(|| p.display().to_string())?);
                }
            }
            if parts.is_empty() {
                bail!("semeval ingest needs at least one of --train, --dev, --test");
            }
            Dataset::concat(name, parts)?
        }
        Format::Hatexplain => {
            let name = a.name.as_deref().unwrap_or("hatexplain");
            let data = a.dataset.as_ref().ok_or_else(|| anyhow!("hatexplain ingest needs --dataset"))?;
            let div = a.divisions.as_ref().ok_or_else(|| anyhow!("hatexplain ingest needs --divisions"))?;
            let (r, _) = run.open(div)?;
            let divisions = read_divisions(r)?;
            let (r, _) = run.open(data)?;
            let out = ingest_hatexplain(r, |id| divisions.get(id).copied(), name)?;
            if !out.dropped.is_empty() {
                log::warn!("dropped {} posts without a majority label", out.dropped.len());
            }
            run.note("dropped", json!(out.dropped));
            out.dataset
        }
        Format::Canonical => {
            let data = a.dataset.as_ref().ok_or_else(|| anyhow!("canonical ingest needs --dataset"))?;
            let mut ds = load_dataset(run, data)?;
            if let Some(n) = &a.name {
                ds.name.clone_from(n);
            }
            ds
        }
    };
    let mut w = run.create(&a.out)?;
    write_canonical(&dataset, &mut w)?;
    w.flush()?;
    Ok(Some(manifest_path_for(&a.out)))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn stats(run: &mut Run, a: StatsArgs) -> Result<Option<PathBuf>> {
    let ds = load_dataset(run, &a.dataset)?;
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record([
            "split",
            "count",
            "toxic_with_span",
            "toxic_without_span",
            "nontoxic",
            "span_pct",
            "span_pct_spanned",
        ])?;
        let all = compute_stats(&ds);
        for (split, st) in &all.splits {
            let Some(st) = st else { continue };
            let part = compute_stats(&ds.split(*split));
            w.write_record([
                split.as_str().to_string(),
                st.count.to_string(),
                format!("{:.6}", st.toxic_with_span),
                format!("{:.6}", st.toxic_without_span),
                format!("{:.6}", st.nontoxic),
                fmt_opt(part.span_pct),
                fmt_opt(part.span_pct_spanned),
            ])?;
        }
        w.write_record([
            "all".to_string(),
            ds.len().to_string(),
            String::new(),
            String::new(),
            String::new(),
            fmt_opt(all.span_pct),
            fmt_opt(all.span_pct_spanned),
        ])?;
        w.flush()?;
    }
    match &a.out {
        Some(out) => {
            let mut w = run.create(out)?;
            w.write_all(&buf)?;
            w.flush()?;
            Ok(Some(manifest_path_for(out)))
        }
        None => {
            std::io::stdout().write_all(&buf)?;
            Ok(None)
        }
    }
}

fn balance(run: &mut Run, a: BalanceArgs) -> Result<Option<PathBuf>> {
    run.seed = Some(a.seed);
    let ds = load_dataset(run, &a.dataset)?;
    let pool = load_dataset(run, &a.pool)?;
    let out = balance_binary(&ds, &pool, a.seed)?;
    let mut w = run.create(&a.out)?;
    write_canonical(&out, &mut w)?;
    w.flush()?;
    Ok(Some(manifest_path_for(&a.out)))
}

fn build(run: &mut Run, a: BuildLexiconArgs) -> Result<Option<PathBuf>> {
    let ds = load_dataset(run, &a.train)?;
    let train = split_or_all(&ds, Split::Train);
    let mut cfg = LexiconBuildConfig::new(a.theta, a.min_occ)?;
    cfg.in_span_rule = a.in_span_rule;
    let lex = build_lexicon(&train, &cfg)?;
    if lex.is_empty() {
        log::warn!("the lexicon is empty at theta={} min_occ={}", a.theta, a.min_occ);
    }
    let mut w = run.create(&a.out)?;
    write_lexicon(&lex, &mut w)?;
    w.flush()?;
    Ok(Some(manifest_path_for(&a.out)))
}

fn predict(run: &mut Run, a: PredictArgs) -> Result<Option<PathBuf>> {
    let eval = select(load_dataset(run, &a.dataset)?, a.split)?;
    let (predictor, point) = if let Some(p) = &a.lexicon {
        let (r, name) = run.open(p)?;
        let lexicon = load_wordlist(r, &name)?;
        (Predictor::Wordlist { lexicon, mode: a.match_mode }, GridPoint { fill_chars: a.fill_chars, threshold: None, min_occ: None })
    } else if let Some(p) = &a.train {
        let train = split_or_all(&load_dataset(run, p)?, Split::Train);
        let (theta, min_occ) = (a.theta.expect("required by clap"), a.min_occ.expect("required by clap"));
        LexiconBuildConfig::new(theta, min_occ)?;
        (
            Predictor::constructed(&train, a.in_span_rule, a.match_mode),
            GridPoint { fill_chars: a.fill_chars, threshold: Some(theta), min_occ: Some(min_occ) },
        )
    } else {
        let p = a.scores.as_ref().expect("one source required by clap");
        let (r, name) = run.open(p)?;
        let scores = load_scores_for(r, &name, &eval)?;
        (
            Predictor::rationale(&scores),
            GridPoint { fill_chars: a.fill_chars, threshold: a.tau, min_occ: None },
        )
    };
    let binary = a.binary.as_ref().map(|p| load_binary_file(run, p)).transpose()?;
    let preds = predictor.predict(&point, &eval, binary.as_ref())?;
    let mut w = run.create(&a.out)?;
    write_span_predictions(&preds, &mut w)?;
    w.flush()?;
    Ok(Some(manifest_path_for(&a.out)))
}

fn evaluate_cmd(run: &mut Run, a: EvaluateArgs) -> Result<Option<PathBuf>> {
    let eval = select(load_dataset(run, &a.dataset)?, a.split)?;
    let mut preds = load_predictions(run, &a.pred)?;
    if let Some(b) = &a.binary {
        preds = gate(&preds, &load_binary_file(run, b)?)?;
    }
    let report = evaluate(&eval, &preds)?;
    if report.missing_predictions > 0 {
        log::warn!("{} samples have no prediction and count as empty", report.missing_predictions);
    }
    let mut w = run.create(&a.out)?;
    write_report_csv(&report, &mut w)?;
    w.flush()?;
    Ok(Some(manifest_path_for(&a.out)))
}

fn tune(run: &mut Run, a: TuneArgs) -> Result<Option<PathBuf>> {
    let dev_path = a
        .dev
        .as_ref()
        .or(a.train.as_ref())
        .ok_or_else(|| anyhow!("tune needs --dev or --train"))?;
    let dev = split_or_all(&load_dataset(run, dev_path)?, Split::Dev);
    let (method, predictor) = if let Some(p) = &a.lexicon {
        let (r, name) = run.open(p)?;
        ("wordlist", Predictor::Wordlist { lexicon: load_wordlist(r, &name)?, mode: a.match_mode })
    } else if let Some(p) = &a.scores {
        let (r, name) = run.open(p)?;
        ("rationale", Predictor::rationale(&load_scores_for(r, &name, &dev)?))
    } else if let Some(p) = &a.pred {
        ("spans", Predictor::Spans { spans: load_predictions(run, p)? })
    } else {
        let p = a.train.as_ref().ok_or_else(|| anyhow!("a constructed lexicon needs --train"))?;
        let train = split_or_all(&load_dataset(run, p)?, Split::Train);
        ("constructed", Predictor::constructed(&train, a.in_span_rule, a.match_mode))
    };
    let binary = match (a.setting, &a.binary) {
        (Setting::ToxicInferred, None) => bail!("the inferred setting needs --binary"),
        (Setting::ToxicInferred, Some(p)) => Some(load_binary_file(run, p)?),
        (Setting::ToxicOracle, Some(_)) => bail!("--binary only applies to --setting inferred"),
        (Setting::ToxicOracle, None) => None,
    };
    let mut grid = GridSpec::default();
    if let Some(v) = a.fill_chars {
        grid.fill_chars = v;
    }
    if let Some(v) = a.theta {
        grid.theta = v;
    }
    if let Some(v) = a.min_occ {
        grid.min_occ = v;
    }
    if let Some(v) = a.tau {
        grid.tau = v;
    }
    let objective = a.objective.unwrap_or_else(|| a.setting.default_objective());
    let tuned = grid_search(&predictor, &dev, &grid, &TuneOptions { objective, binary: binary.as_ref() })?;

    let record = TuningRecord { method: method.to_string(), train: dev.name.clone(), tuned };
    let mut w = run.create(&a.out.join("trace.csv"))?;
    write_trace_csv(std::slice::from_ref(&record), &mut w)?;
    w.flush()?;
    let summary = json!({
        "method": record.method,
        "dev": record.train,
        "setting": a.setting.as_str(),
        "objective": objective.as_str(),
        "point": record.tuned.point,
        "dev_value": record.tuned.dev_value,
        "dev_report": record.tuned.dev_report,
    });
    let mut w = run.create(&a.out.join("tuned.json"))?;
    serde_json::to_writer_pretty(&mut w, &summary)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(Some(a.out.join("manifest.json")))
}

fn experiment(run: &mut Run, a: ExperimentArgs, use_config_jobs: bool) -> Result<Option<PathBuf>> {
    let config = run.resolve(&a.config);
    let loaded = load_experiment(&config, run.data_root())?;
    if use_config_jobs {
        if let Some(n) = loaded.jobs {
            init_pool(n)?;
        }
    }
    run.record_inputs(loaded.inputs.iter().cloned());
    run.seed = Some(loaded.config.seed);
    let result = run_experiment(&loaded.config, &loaded.methods)?;

    let mut w = run.create(&a.out.join("results.csv"))?;
    write_results_csv(&result.rows, &mut w)?;
    w.flush()?;
    let mut w = run.create(&a.out.join("results.txt"))?;
    w.write_all(render_results_text(&result.rows).as_bytes())?;
    w.flush()?;
    let mut w = run.create(&a.out.join("retention.csv"))?;
    write_retention_csv(&result.retention, &mut w)?;
    w.flush()?;
    let mut w = run.create(&a.out.join("trace.csv"))?;
    write_trace_csv(&result.tuning, &mut w)?;
    w.flush()?;
    Ok(Some(a.out.join("manifest.json")))
}

fn parse_pred_spec(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(spec);
            let name = path.file_stem().map_or_else(|| spec.to_string(), |s| s.to_string_lossy().into_owned());
            (name, path)
        }
    }
}

fn sample_errors(run: &mut Run, a: SampleErrorsArgs) -> Result<Option<PathBuf>> {
    run.seed = Some(a.seed);
    let eval = select(load_dataset(run, &a.dataset)?, a.split)?;
    let mut rows = Vec::new();
    let mut counts = BTreeMap::new();
    let mut notes = serde_json::Map::new();
    for spec in &a.pred {
        let (method, path) = parse_pred_spec(spec);
        if counts.contains_key(&method) {
            bail!("method {method:?} given twice");
        }
        let preds = load_predictions(run, &path)?;
        let errors = select_errors(&eval, &preds, &method)?;
        let categorized = categorize(errors);
        let sheet = sample_sheet(&categorized, a.per_category, a.seed)?;
        notes.insert(
            method.clone(),
            json!({
                "errors": categorized.records.len(),
                "precision_median": categorized.precision_median,
                "recall_median": categorized.recall_median,
                "sampled": sheet.rows.len(),
            }),
        );
        rows.extend(sheet.rows);
        counts.insert(method, categorized.counts);
    }
    run.note("methods", serde_json::Value::Object(notes));
    let sheet = AnnotatedSheet { method: String::new(), rows, category_counts: BTreeMap::new() };
    let mut w = run.create(&a.out.join("sheet.csv"))?;
    write_sheet(&sheet, &mut w)?;
    w.flush()?;
    let mut w = run.create(&a.out.join("category_counts.csv"))?;
    write_category_counts(&counts, &mut w)?;
    w.flush()?;
    Ok(Some(a.out.join("manifest.json")))
}

fn prevalence(run: &mut Run, a: PrevalenceArgs) -> Result<Option<PathBuf>> {
    let (r, name) = run.open(&a.sheet)?;
    let rows = read_sheet(r, &name)?;
    let (r, name) = run.open(&a.counts)?;
    let counts = read_category_counts(r, &name)?;
    if let Some(row) = rows.iter().find(|r| !counts.contains_key(&r.record.method)) {
        bail!("sheet method {:?} has no category counts", row.record.method);
    }
    let mut table = PrevalenceTable::default();
    for (method, per) in &counts {
        let mine: Vec<_> = rows.iter().filter(|r| &r.record.method == method).cloned().collect();
        let values = reweight_prevalence(&mine, per).with_context(|| format!("method {method}"))?;
        table.columns.push((method.clone(), values));
    }
    let mut w = run.create(&a.out)?;
    write_prevalence_csv(&table, &mut w)?;
    w.flush()?;
    Ok(Some(manifest_path_for(&a.out)))
}
