use std::collections::BTreeMap;

use log::info;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Split};
use crate::error::{Error, Result};
use crate::harness::grid::{evaluate_point, grid_search, retention, GridPoint, GridSpec, Objective, Predictor, Setting, TuneOptions, TunedParams};
use crate::inferred::{lexicon_binary, BinaryMap};
use crate::lexicon::{InSpanRule, Lexicon, MatchMode, Matcher};
use crate::metrics::EvalReport;
use crate::rationale::ScoreMap;
use crate::Predictions;

/// Identifies an externally produced input: predictions of a system
/// trained on `train`, computed for the `split` split of `eval`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InputKey {
    pub train: String,
    pub eval: String,
    pub split: Split,
}

impl InputKey {
    #[must_use]
    pub fn new(train: &str, eval: &str, split: Split) -> Self {
        Self {
            train: train.to_string(),
            eval: eval.to_string(),
            split,
        }
    }
}

impl std::fmt::Display for InputKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}->{}/{}", self.train, self.eval, self.split)
    }
}

#[derive(Clone, Debug)]
pub enum MethodKind {
    ConstructedLexicon { rule: InSpanRule, mode: MatchMode },
    WordlistLexicon { lexicon: Lexicon, mode: MatchMode },
    RationaleFile { scores: BTreeMap<InputKey, ScoreMap> },
    SpanFile { spans: BTreeMap<InputKey, Predictions> },
}

impl MethodKind {
    #[must_use]
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodKind::ConstructedLexicon { .. } => "constructed_lexicon",
            MethodKind::WordlistLexicon { .. } => "wordlist_lexicon",
            MethodKind::RationaleFile { .. } => "rationale_file",
            MethodKind::SpanFile { .. } => "span_file",
        }
    }
}

#[derive(Clone, Debug)]
pub struct MethodSpec {
    pub name: String,
    pub kind: MethodKind,
    /// Replaces the experiment grid for this method.
    pub grid: Option<GridSpec>,
    /// Replaces the grid for this method when tuning on a given train domain.
    pub grid_by_train: BTreeMap<String, GridSpec>,
}

impl MethodSpec {
    #[must_use]
    pub fn new(name: &str, kind: MethodKind) -> Self {
        Self {
            name: name.to_string(),
            kind,
            grid: None,
            grid_by_train: BTreeMap::new(),
        }
    }

    fn grid_for<'a>(&'a self, train: &str, default: &'a GridSpec) -> &'a GridSpec {
        self.grid_by_train
            .get(train)
            .or(self.grid.as_ref())
            .unwrap_or(default)
    }

    fn input_key(&self, key: &InputKey) -> Result<()> {
        let present = match &self.kind {
            MethodKind::RationaleFile { scores } => scores.contains_key(key),
            MethodKind::SpanFile { spans } => spans.contains_key(key),
            _ => true,
        };
        if present {
            Ok(())
        } else {
            Err(Error::Config(format!("method {}: no input for {key}", self.name)))
        }
    }

    /// Builds the predictor for evaluating on `key`. `train` is the
    /// training split of the train domain.
    fn predictor(&self, key: &InputKey, train: &Dataset) -> Result<Predictor> {
        self.input_key(key)?;
        Ok(match &self.kind {
            MethodKind::ConstructedLexicon { rule, mode } => Predictor::constructed(train, *rule, *mode),
            MethodKind::WordlistLexicon { lexicon, mode } => Predictor::Wordlist {
                lexicon: lexicon.clone(),
                mode: *mode,
            },
            MethodKind::RationaleFile { scores } => Predictor::rationale(&scores[key]),
            MethodKind::SpanFile { spans } => Predictor::Spans {
                spans: spans[key].clone(),
            },
        })
    }
}

#[derive(Clone, Debug)]
pub struct Domain {
    pub name: String,
    /// All splits of the domain.
    pub dataset: Dataset,
}

/// Source of message-level predictions for the inferred setting.
#[derive(Clone, Debug, Default)]
pub enum BinarySource {
    #[default]
    None,
    Files(BTreeMap<InputKey, BinaryMap>),
    /// Stand-in classifier: toxic iff the lexicon matches.
    Lexicon { lexicon: Lexicon, mode: MatchMode },
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub domains: Vec<Domain>,
    /// Domains used for training and tuning; all domains when empty.
    pub train_domains: Vec<String>,
    pub setting: Setting,
    pub objective: Objective,
    pub grid: GridSpec,
    pub binary: BinarySource,
    /// Recorded for reproducibility; also seeds non-toxic balancing at
    /// config load time.
    pub seed: u64,
}

impl ExperimentConfig {
    fn domain(&self, name: &str) -> Result<&Domain> {
        self.domains
            .iter()
            .find(|d| d.name == name)
            .ok_or_else(|| Error::Config(format!("unknown domain {name:?}")))
    }

    fn train_domains(&self) -> Vec<&str> {
        if self.train_domains.is_empty() {
            self.domains.iter().map(|d| d.name.as_str()).collect()
        } else {
            self.train_domains.iter().map(String::as_str).collect()
        }
    }

    /// Every (train, eval, split) cell the experiment evaluates on.
    fn cells(&self) -> Vec<InputKey> {
        let mut keys = Vec::new();
        for t in self.train_domains() {
            keys.push(InputKey::new(t, t, Split::Dev));
            keys.push(InputKey::new(t, t, Split::Test));
            for e in self.domains.iter().filter(|d| d.name != t) {
                keys.push(InputKey::new(t, &e.name, Split::Test));
            }
        }
        keys
    }

    fn binary_for(&self, key: &InputKey, eval: &Dataset) -> Result<Option<BinaryMap>> {
        if self.setting == Setting::ToxicOracle {
            return Ok(None);
        }
        match &self.binary {
            BinarySource::None => Err(Error::Config(
                "the inferred setting needs binary predictions ([binary] section)".into(),
            )),
            BinarySource::Files(files) => files
                .get(key)
                .cloned()
                .map(Some)
                .ok_or_else(|| Error::Config(format!("missing binary predictions for {key}"))),
            BinarySource::Lexicon { lexicon, mode } => Ok(Some(lexicon_binary(eval, &Matcher::new(lexicon, *mode)))),
        }
    }

    /// Checks that every input the run will need is present.
    pub fn validate(&self, methods: &[MethodSpec]) -> Result<()> {
        if self.domains.is_empty() {
            return Err(Error::Config("no domains configured".into()));
        }
        for t in self.train_domains() {
            self.domain(t)?;
        }
        self.grid.validate()?;
        let cells = self.cells();
        if self.setting == Setting::ToxicInferred {
            match &self.binary {
                BinarySource::None => {
                    return Err(Error::Config(
                        "the inferred setting needs binary predictions ([binary] section)".into(),
                    ))
                }
                BinarySource::Files(files) => {
                    if let Some(k) = cells.iter().find(|k| !files.contains_key(k)) {
                        return Err(Error::Config(format!("missing binary predictions for {k}")));
                    }
                }
                BinarySource::Lexicon { .. } => {}
            }
        }
        for m in methods {
            for k in &cells {
                m.input_key(k)?;
            }
            for (t, g) in m.grid.iter().map(|g| ("*", g)).chain(m.grid_by_train.iter().map(|(t, g)| (t.as_str(), g))) {
                g.validate()
                    .map_err(|e| Error::Config(format!("method {} grid for {t}: {e}", m.name)))?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    InDomain,
    CrossDomain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub kind: String,
    pub train: String,
    pub eval: String,
    pub relation: Relation,
    pub setting: Setting,
    pub objective: Objective,
    pub point: GridPoint,
    pub dev_value: Option<f64>,
    pub report: EvalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetentionRow {
    pub method: String,
    pub train: String,
    pub eval: String,
    pub in_domain: Option<f64>,
    pub cross_domain: Option<f64>,
    pub retention: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningRecord {
    pub method: String,
    pub train: String,
    pub tuned: TunedParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    pub retention: Vec<RetentionRow>,
    pub tuning: Vec<TuningRecord>,
}

/// Tunes every method on each train domain's dev split and evaluates the
/// chosen point on the test split of every domain.
///
/// Only the test split of a cross-domain dataset is ever read.
pub fn run_experiment(cfg: &ExperimentConfig, methods: &[MethodSpec]) -> Result<ExperimentResult> {
    cfg.validate(methods)?;
    let mut rows = Vec::new();
    let mut tuning = Vec::new();

    for t in cfg.train_domains() {
        let domain = cfg.domain(t)?;
        let train = domain.dataset.split(Split::Train);
        let dev = domain.dataset.split(Split::Dev);
        let dev_key = InputKey::new(t, t, Split::Dev);
        let dev_binary = cfg.binary_for(&dev_key, &dev)?;

        for m in methods {
            info!("tuning {} on {t}", m.name);
            let predictor = m.predictor(&dev_key, &train)?;
            let grid = m.grid_for(t, &cfg.grid);
            let tuned = grid_search(
                &predictor,
                &dev,
                grid,
                &TuneOptions {
                    objective: cfg.objective,
                    binary: dev_binary.as_ref(),
                },
            )?;

            let evals = std::iter::once(domain).chain(cfg.domains.iter().filter(|d| d.name != t));
            for e in evals {
                let key = InputKey::new(t, &e.name, Split::Test);
                let test = e.dataset.split(Split::Test);
                let binary = cfg.binary_for(&key, &test)?;
                let predictor = m.predictor(&key, &train)?;
                let report = evaluate_point(&predictor, &tuned.point, &test, binary.as_ref())?;
                rows.push(ResultRow {
                    method: m.name.clone(),
                    kind: m.kind.as_str().to_string(),
                    train: t.to_string(),
                    eval: e.name.clone(),
                    relation: if e.name == t {
                        Relation::InDomain
                    } else {
                        Relation::CrossDomain
                    },
                    setting: cfg.setting,
                    objective: cfg.objective,
                    point: tuned.point,
                    dev_value: tuned.dev_value,
                    report,
                });
            }
            tuning.push(TuningRecord {
                method: m.name.clone(),
                train: t.to_string(),
                tuned,
            });
        }
    }
    let retention = retention_rows(&rows, cfg.objective);
    Ok(ExperimentResult { rows, retention, tuning })
}

/// Pairs every cross-domain row `A -> B` with the in-domain row `B -> B`
/// of the same method.
#[must_use]
pub fn retention_rows(rows: &[ResultRow], objective: Objective) -> Vec<RetentionRow> {
    rows.iter()
        .filter(|r| r.relation == Relation::CrossDomain)
        .map(|cross| {
            let in_domain = rows
                .iter()
                .find(|r| r.method == cross.method && r.relation == Relation::InDomain && r.train == cross.eval)
                .and_then(|r| objective.value(&r.report));
            let cross_value = objective.value(&cross.report);
            RetentionRow {
                method: cross.method.clone(),
                train: cross.train.clone(),
                eval: cross.eval.clone(),
                in_domain,
                cross_domain: cross_value,
                retention: in_domain.zip(cross_value).and_then(|(i, c)| retention(i, c)),
            }
        })
        .collect()
}

/// Convenience for tuning a single method outside an experiment.
pub fn tune_method(
    method: &MethodSpec,
    train_name: &str,
    train: &Dataset,
    dev: &Dataset,
    grid: &GridSpec,
    objective: Objective,
    binary: Option<&BinaryMap>,
) -> Result<TunedParams> {
    let key = InputKey::new(train_name, train_name, Split::Dev);
    let predictor = method.predictor(&key, train)?;
    grid_search(&predictor, dev, method.grid_for(train_name, grid), &TuneOptions { objective, binary })
}
