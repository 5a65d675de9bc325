//! TOML experiment configuration.
//!
//! ```toml
//! setting = "oracle"            # or "inferred"
//! objective = "toxic"           # or "macro"; defaults follow the setting
//! seed = 13
//! data_root = "."               # relative to this file
//! jobs = 4                      # optional worker cap
//! train_domains = ["alpha"]     # optional; all domains by default
//!
//! [grid]                        # optional, defaults to the full grids
//! fill_chars = [0, 1, 9999]
//!
//! [[domain]]
//! name = "alpha"
//! dataset = "alpha.jsonl"       # canonical dataset with all splits
//! pool = "alpha-pool.jsonl"     # optional non-toxic supplement
//!
//! [binary]                      # required for the inferred setting
//! lexicon = "words.txt"         # stand-in classifier, or:
//! [[binary.file]]
//! train = "alpha"
//! eval = "beta"
//! split = "test"
//! path = "binary/alpha-beta-test.jsonl"
//!
//! [[method]]
//! name = "constructed"
//! kind = "constructed_lexicon"  # wordlist_lexicon, rationale_file, span_file
//! match_mode = "substring"      # or "word"
//! in_span_rule = "majority_chars"
//! lexicon = "words.txt"         # wordlist_lexicon only
//!
//! [method.grid]                 # replaces [grid] for this method
//! fill_chars = [0, 1]
//!
//! [method.grid_by_train.alpha]  # replaces both when tuning on alpha
//! theta = [0.5]
//! min_occ = [7]
//!
//! [[method.input]]              # rationale_file and span_file, per cell
//! train = "alpha"
//! eval = "beta"
//! split = "test"
//! path = "scores/alpha-beta-test.jsonl"
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::corpus::{balance_binary, read_canonical, Dataset, Split};
use crate::error::{Error, Result};
use crate::harness::experiment::{BinarySource, Domain, ExperimentConfig, InputKey, MethodKind, MethodSpec};
use crate::harness::grid::{GridSpec, Objective, Setting};
use crate::inferred::{load_binary, read_span_predictions};
use crate::lexicon::{load_wordlist, InSpanRule, MatchMode};
use crate::rationale::load_scores_for;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    fill_chars: Option<Vec<usize>>,
    theta: Option<Vec<f64>>,
    min_occ: Option<Vec<usize>>,
    tau: Option<Vec<f64>>,
}

impl RawGrid {
    fn over(&self, base: &GridSpec) -> GridSpec {
        GridSpec {
            fill_chars: self.fill_chars.clone().unwrap_or_else(|| base.fill_chars.clone()),
            theta: self.theta.clone().unwrap_or_else(|| base.theta.clone()),
            min_occ: self.min_occ.clone().unwrap_or_else(|| base.min_occ.clone()),
            tau: self.tau.clone().unwrap_or_else(|| base.tau.clone()),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    name: String,
    dataset: String,
    pool: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInput {
    train: String,
    eval: String,
    split: String,
    path: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBinary {
    lexicon: Option<String>,
    match_mode: Option<String>,
    #[serde(default, rename = "file")]
    files: Vec<RawInput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMethod {
    name: String,
    kind: String,
    match_mode: Option<String>,
    in_span_rule: Option<String>,
    lexicon: Option<String>,
    #[serde(default, rename = "input")]
    inputs: Vec<RawInput>,
    grid: Option<RawGrid>,
    #[serde(default)]
    grid_by_train: BTreeMap<String, RawGrid>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    setting: Option<String>,
    objective: Option<String>,
    #[serde(default)]
    seed: u64,
    jobs: Option<usize>,
    data_root: Option<String>,
    #[serde(default)]
    train_domains: Vec<String>,
    grid: Option<RawGrid>,
    #[serde(rename = "domain", default)]
    domains: Vec<RawDomain>,
    binary: Option<RawBinary>,
    #[serde(rename = "method", default)]
    methods: Vec<RawMethod>,
}

/// A parsed experiment with every referenced file loaded.
#[derive(Debug)]
pub struct LoadedExperiment {
    pub config: ExperimentConfig,
    pub methods: Vec<MethodSpec>,
    pub jobs: Option<usize>,
    /// Every file read while loading, in read order.
    pub inputs: Vec<PathBuf>,
}

struct Loader {
    root: PathBuf,
    inputs: Vec<PathBuf>,
}

impl Loader {
    fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    fn open(&mut self, p: &str) -> Result<(BufReader<File>, String)> {
        let path = self.resolve(p);
        let f = File::open(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        self.inputs.push(path.clone());
        Ok((BufReader::new(f), path.display().to_string()))
    }

    fn dataset(&mut self, p: &str) -> Result<Dataset> {
        let (r, name) = self.open(p)?;
        read_canonical(r, &name)
    }
}

fn input_key(raw: &RawInput) -> Result<InputKey> {
    Ok(InputKey {
        train: raw.train.clone(),
        eval: raw.eval.clone(),
        split: raw.split.parse::<Split>()?,
    })
}

fn parse_mode(s: Option<&str>) -> Result<MatchMode> {
    s.map_or(Ok(MatchMode::default()), str::parse)
}

/// Parses and loads an experiment config.
///
/// Relative paths resolve against `data_root` (itself relative to the
/// config file) when set, else against `env_root` when given, else
/// against the config file's directory.
pub fn load_experiment(config_path: &Path, env_root: Option<&Path>) -> Result<LoadedExperiment> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| Error::Config(format!("{}: {e}", config_path.display())))?;
    let dir = config_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    parse_experiment(&text, &dir, env_root).map(|mut l| {
        l.inputs.insert(0, config_path.to_path_buf());
        l
    })
}

pub fn parse_experiment(text: &str, config_dir: &Path, env_root: Option<&Path>) -> Result<LoadedExperiment> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let root = match (&raw.data_root, env_root) {
        (Some(r), _) => config_dir.join(r),
        (None, Some(env)) => env.to_path_buf(),
        (None, None) => config_dir.to_path_buf(),
    };
    let mut loader = Loader {
        root,
        inputs: Vec::new(),
    };

    let setting: Setting = raw.setting.as_deref().map_or(Ok(Setting::default()), str::parse)?;
    let objective: Objective = raw
        .objective
        .as_deref()
        .map_or(Ok(setting.default_objective()), str::parse)?;
    let grid = raw.grid.clone().unwrap_or_default().over(&GridSpec::default());

    let mut domains = Vec::new();
    for d in &raw.domains {
        let mut dataset = loader.dataset(&d.dataset)?;
        if let Some(pool) = &d.pool {
            let pool = loader.dataset(pool)?;
            dataset = balance_binary(&dataset, &pool, raw.seed)?;
        }
        domains.push(Domain {
            name: d.name.clone(),
            dataset,
        });
    }
    let find = |name: &str| -> Result<&Dataset> {
        domains
            .iter()
            .find(|d| d.name == name)
            .map(|d| &d.dataset)
            .ok_or_else(|| Error::Config(format!("unknown domain {name:?}")))
    };

    let binary = match &raw.binary {
        None => BinarySource::None,
        Some(b) if b.lexicon.is_some() && !b.files.is_empty() => {
            return Err(Error::Config("[binary] takes either `lexicon` or `file` entries, not both".into()))
        }
        Some(RawBinary {
            lexicon: Some(lex),
            match_mode,
            ..
        }) => {
            let (r, name) = loader.open(lex)?;
            BinarySource::Lexicon {
                lexicon: load_wordlist(r, &name)?,
                mode: parse_mode(match_mode.as_deref())?,
            }
        }
        Some(b) => {
            let mut files = BTreeMap::new();
            for f in &b.files {
                let key = input_key(f)?;
                find(&key.eval)?;
                let (r, name) = loader.open(&f.path)?;
                files.insert(key, load_binary(r, &name)?);
            }
            BinarySource::Files(files)
        }
    };

    let mut methods = Vec::new();
    for m in &raw.methods {
        let kind = match m.kind.as_str() {
            "constructed_lexicon" => MethodKind::ConstructedLexicon {
                rule: m.in_span_rule.as_deref().map_or(Ok(InSpanRule::default()), str::parse)?,
                mode: parse_mode(m.match_mode.as_deref())?,
            },
            "wordlist_lexicon" => {
                let path = m
                    .lexicon
                    .as_deref()
                    .ok_or_else(|| Error::Config(format!("method {}: `lexicon` path required", m.name)))?;
                let (r, _) = loader.open(path)?;
                MethodKind::WordlistLexicon {
                    lexicon: load_wordlist(r, &m.name)?,
                    mode: parse_mode(m.match_mode.as_deref())?,
                }
            }
            "rationale_file" => {
                let mut scores = BTreeMap::new();
                for i in &m.inputs {
                    let key = input_key(i)?;
                    let eval = find(&key.eval)?.split(key.split);
                    let (r, name) = loader.open(&i.path)?;
                    scores.insert(key, load_scores_for(r, &name, &eval)?);
                }
                MethodKind::RationaleFile { scores }
            }
            "span_file" => {
                let mut spans = BTreeMap::new();
                for i in &m.inputs {
                    let key = input_key(i)?;
                    find(&key.eval)?;
                    let (r, name) = loader.open(&i.path)?;
                    spans.insert(key, read_span_predictions(r, &name)?);
                }
                MethodKind::SpanFile { spans }
            }
            other => return Err(Error::Config(format!("method {}: unknown kind {other:?}", m.name))),
        };
        let mut spec = MethodSpec::new(&m.name, kind);
        let method_grid = m.grid.as_ref().map(|g| g.over(&grid));
        spec.grid_by_train = m
            .grid_by_train
            .iter()
            .map(|(t, g)| (t.clone(), g.over(method_grid.as_ref().unwrap_or(&grid))))
            .collect();
        spec.grid = method_grid;
        methods.push(spec);
    }
    if methods.iter().enumerate().any(|(i, m)| methods[..i].iter().any(|o| o.name == m.name)) {
        return Err(Error::Config("method names must be unique".into()));
    }

    let config = ExperimentConfig {
        domains,
        train_domains: raw.train_domains,
        setting,
        objective,
        grid,
        binary,
        seed: raw.seed,
    };
    config.validate(&methods)?;
    Ok(LoadedExperiment {
        config,
        methods,
        jobs: raw.jobs,
        inputs: loader.inputs,
    })
}
