use std::path::{Path, PathBuf};

use toxspan::corpus::{balance_binary, compute_stats, read_canonical, write_canonical, Dataset, Sample, Split};
use toxspan::harness::{
    evaluate_point, load_experiment, parse_experiment, retention, run_experiment, GridPoint, Predictor, Relation,
};
use toxspan::inferred::{load_binary, write_binary, write_span_predictions, BinaryPrediction};
use toxspan::lexicon::{InSpanRule, MatchMode};
use toxspan::rationale::{load_scores, write_scores, ScoredToken, TokenScores};
use toxspan::spanops::{tokenize, SpanSet};
use toxspan::synthetic::{mini_domain, ALPHA};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/mini")
}

fn config_error(extra: &str) -> String {
    let base = std::fs::read_to_string(fixtures().join("oracle.toml")).unwrap();
    parse_experiment(&format!("{base}\n{extra}"), &fixtures(), None)
        .unwrap_err()
        .to_string()
}

#[test]
fn config_rejects_unknown_fields() {
    let text = "setting = \"oracle\"\nsede = 3\n";
    let err = parse_experiment(text, &fixtures(), None).unwrap_err().to_string();
    assert!(err.contains("sede"), "{err}");
}

#[test]
fn config_rejects_duplicate_methods() {
    let err = config_error("[[method]]\nname = \"constructed\"\nkind = \"constructed_lexicon\"\n");
    assert!(err.contains("unique"), "{err}");
}

#[test]
fn config_reports_missing_files() {
    let err = config_error("[[method]]\nname = \"other\"\nkind = \"wordlist_lexicon\"\nlexicon = \"absent.txt\"\n");
    assert!(err.contains("absent.txt"), "{err}");
}

#[test]
fn config_reports_missing_score_inputs() {
    let text = std::fs::read_to_string(fixtures().join("oracle.toml")).unwrap();
    let cut = text.find("[[method.input]]\ntrain = \"beta\"\neval = \"alpha\"").unwrap();
    let err = parse_experiment(&text[..cut], &fixtures(), None).unwrap_err().to_string();
    assert!(err.contains("no input for beta->alpha"), "{err}");
}

#[test]
fn inferred_setting_requires_binary_predictions() {
    let text = std::fs::read_to_string(fixtures().join("oracle.toml"))
        .unwrap()
        .replace("setting = \"oracle\"", "setting = \"inferred\"");
    let err = parse_experiment(&text, &fixtures(), None).unwrap_err().to_string();
    assert!(err.contains("binary"), "{err}");

    let text = std::fs::read_to_string(fixtures().join("inferred.toml")).unwrap();
    let cut = text.find("[[binary.file]]").unwrap();
    let end = text[cut + 1..].find("[[binary.file]]").unwrap() + cut + 1;
    let err = parse_experiment(&format!("{}{}", &text[..cut], &text[end..]), &fixtures(), None)
        .unwrap_err()
        .to_string();
    assert!(err.contains("missing binary predictions"), "{err}");
}

#[test]
fn rows_match_direct_evaluation() {
    let loaded = load_experiment(&fixtures().join("oracle.toml"), None).unwrap();
    let result = run_experiment(&loaded.config, &loaded.methods).unwrap();
    let domain = |n: &str| &loaded.config.domains.iter().find(|d| d.name == n).unwrap().dataset;
    let mut checked = 0;
    for row in result.rows.iter().filter(|r| r.method == "constructed") {
        let train = domain(&row.train).split(Split::Train);
        let test = domain(&row.eval).split(Split::Test);
        let p = Predictor::constructed(&train, InSpanRule::MajorityChars, MatchMode::substring());
        assert_eq!(evaluate_point(&p, &row.point, &test, None).unwrap(), row.report);
        checked += 1;
    }
    assert_eq!(checked, 4);
}

#[test]
fn cross_domain_reads_only_the_test_split() {
    let mut loaded = load_experiment(&fixtures().join("oracle.toml"), None).unwrap();
    loaded.config.train_domains = vec!["alpha".into()];
    loaded.methods.retain(|m| m.name != "attribution");
    let before = run_experiment(&loaded.config, &loaded.methods).unwrap();

    let beta = &mut loaded.config.domains[1];
    assert_eq!(beta.name, "beta");
    let scrambled: Vec<Sample> = beta
        .dataset
        .iter()
        .cloned()
        .map(|mut s| {
            if s.split != Split::Test {
                s.text = "zzz ".repeat(5);
                s.toxic = true;
                s.gold_spans = SpanSet::from_ranges([toxspan::Span::new(0, 3)]);
            }
            s
        })
        .collect();
    beta.dataset = Dataset::new("beta", scrambled, "").unwrap();
    let after = run_experiment(&loaded.config, &loaded.methods).unwrap();
    assert_eq!(before, after);
    assert!(after.rows.iter().any(|r| r.relation == Relation::CrossDomain));
}

#[test]
fn fixed_grid_point_is_used_verbatim() {
    let text = std::fs::read_to_string(fixtures().join("oracle.toml")).unwrap().replace(
        "name = \"constructed\"\nkind = \"constructed_lexicon\"\n",
        "name = \"constructed\"\nkind = \"constructed_lexicon\"\n\n[method.grid_by_train.alpha]\nfill_chars = [1]\ntheta = [0.35]\nmin_occ = [3]\n",
    );
    let loaded = parse_experiment(&text, &fixtures(), None).unwrap();
    let result = run_experiment(&loaded.config, &loaded.methods).unwrap();
    let row = result
        .rows
        .iter()
        .find(|r| r.method == "constructed" && r.train == "alpha")
        .unwrap();
    assert_eq!(
        row.point,
        GridPoint { fill_chars: 1, threshold: Some(0.35), min_occ: Some(3) }
    );
}

#[test]
fn retention_averages_reference_cells() {
    // (cross-domain, in-domain) toxic F1+ for four lexicon cells.
    let cells = [(24.6, 64.7), (13.6, 59.8), (23.4, 64.6), (29.3, 74.2)];
    let mean = cells.iter().map(|&(c, i)| retention(i, c).unwrap()).sum::<f64>() / 4.0;
    assert!((mean - 0.341).abs() < 0.0005, "{mean}");
    assert_eq!(retention(0.0, 0.5), None);
}

#[test]
fn stats_survive_a_canonical_round_trip() {
    let d = mini_domain(&ALPHA, 9).unwrap();
    let mut buf = Vec::new();
    write_canonical(&d, &mut buf).unwrap();
    let back = read_canonical(buf.as_slice(), "mem").unwrap();
    let stats = compute_stats(&back);
    assert_eq!(stats, compute_stats(&d));
    let counts: Vec<usize> = Split::ALL.iter().map(|s| stats.splits[s].unwrap().count).collect();
    assert_eq!(counts, [120, 40, 40]);
    for s in Split::ALL {
        let st = stats.splits[&s].unwrap();
        assert!((st.toxic_with_span + st.toxic_without_span + st.nontoxic - 1.0).abs() < 1e-12);
    }
}

fn copy(from: &Path, to: &Path) {
    std::fs::create_dir_all(to.parent().unwrap()).unwrap();
    std::fs::copy(from, to).unwrap();
}

/// Lays the mini corpus out the way the reference configs expect real data.
fn stand_in_data_root(root: &Path) {
    let mini = fixtures();
    let rename = |d: &str| if d == "alpha" { "semeval" } else { "hatexplain" };
    for d in ["alpha", "beta"] {
        copy(&mini.join(format!("{d}.jsonl")), &root.join(format!("{}.jsonl", rename(d))));
    }
    for w in ["hurtlex-c", "hurtlex-i", "wiegand-b", "wiegand-e"] {
        copy(&mini.join("wordlist.txt"), &root.join(format!("wordlists/{w}.txt")));
    }
    let pool: Vec<Sample> = (0..200)
        .map(|i| Sample {
            id: format!("pool-{i:03}"),
            text: format!("an ordinary remark number {i}"),
            toxic: false,
            gold_spans: SpanSet::empty(),
            split: Split::ALL[i % 3],
        })
        .collect();
    let pool = Dataset::new("pool", pool, "").unwrap();
    write_canonical(&pool, std::fs::File::create(root.join("semeval-pool.jsonl")).unwrap()).unwrap();
    let semeval = read_canonical(open(&mini.join("alpha.jsonl")), "mini").unwrap();
    let balanced = balance_binary(&semeval, &pool, 13).unwrap();

    for entry in std::fs::read_dir(mini.join("scores")).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        let parts: Vec<&str> = name.trim_end_matches(".jsonl").split('-').collect();
        let (t, e, split) = (rename(parts[0]), rename(parts[1]), parts[2]);
        let split: Split = split.parse().unwrap();
        let cell = format!("{t}-{e}-{split}.jsonl");
        let eval = read_canonical(open(&mini.join(format!("{}.jsonl", parts[1]))), "mini").unwrap().split(split);
        // Balanced cells also cover the pool samples of the same split.
        let extra: Vec<&Sample> = if e == "semeval" {
            balanced.iter().filter(|s| s.split == split && s.id.starts_with("pool-")).collect()
        } else {
            vec![]
        };

        let mut scores = load_scores(open(&mini.join("scores").join(&name)), "mini").unwrap();
        let mut binary = load_binary(open(&mini.join("binary").join(&name)), "mini").unwrap();
        let mut spans: toxspan::Predictions = eval.iter().map(|s| (s.id.clone(), s.gold_spans.clone())).collect();
        for s in &extra {
            let tokens = tokenize(&s.text).iter().map(|t| ScoredToken { start: t.start, end: t.end, score: 1.0 }).collect();
            scores.insert(s.id.clone(), TokenScores { sample_id: s.id.clone(), method_name: String::new(), tokens });
            binary.insert(s.id.clone(), BinaryPrediction { sample_id: s.id.clone(), toxic: false });
            spans.insert(s.id.clone(), SpanSet::empty());
        }
        for m in ["saliency", "ig", "deeplift", "lime"] {
            write_scores(scores.values(), create(&root.join(format!("scores/{m}/{cell}")))).unwrap();
        }
        write_binary(&binary, create(&root.join(format!("binary/{cell}")))).unwrap();
        write_span_predictions(&spans, create(&root.join(format!("spans/bert/{cell}")))).unwrap();
    }
}

fn open(path: &Path) -> std::io::BufReader<std::fs::File> {
    std::io::BufReader::new(std::fs::File::open(path).unwrap())
}

fn create(path: &Path) -> std::fs::File {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::File::create(path).unwrap()
}

#[test]
fn reference_configs_run_on_stand_in_data() {
    let root = tempfile::tempdir().unwrap();
    stand_in_data_root(root.path());
    let reference = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/reference");
    for name in ["oracle-tuned", "inferred-tuned", "oracle-fixed", "inferred-fixed"] {
        let loaded = load_experiment(&reference.join(format!("{name}.toml")), Some(root.path()))
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(loaded.methods.len(), 10, "{name}");
        if name.ends_with("fixed") {
            let result = run_experiment(&loaded.config, &loaded.methods).unwrap();
            let row = result
                .rows
                .iter()
                .find(|r| r.method == "constructed" && r.train == "semeval")
                .unwrap();
            let expected = if name.starts_with("oracle") { (1, 0.5, 11) } else { (1, 0.35, 11) };
            assert_eq!(
                row.point,
                GridPoint { fill_chars: expected.0, threshold: Some(expected.1), min_occ: Some(expected.2) },
                "{name}"
            );
            let bert = result.rows.iter().find(|r| r.method == "bert" && r.eval == r.train && r.train == "hatexplain").unwrap();
            assert_eq!(bert.point.fill_chars, 0);
        }
    }
}
