use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::inferred::{gate, BinaryMap};
use crate::lexicon::{count_word_stats, lexicon_from_stats, InSpanRule, Lexicon, MatchMode, Matcher, WordStats};
use crate::metrics::{evaluate, EvalReport};
use crate::rationale::{normalize, threshold_to_spans, ScoreMap, ThresholdConfig};
use crate::spanops::{MergeConfig, SpanSet};
use crate::Predictions;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    /// Message-level toxicity is known; spans are scored as predicted.
    #[default]
    ToxicOracle,
    /// A binary classifier gates span output.
    ToxicInferred,
}

impl Setting {
    #[must_use]
    pub fn default_objective(self) -> Objective {
        match self {
            Setting::ToxicOracle => Objective::ToxicF1p,
            Setting::ToxicInferred => Objective::MacroF1p,
        }
    }

    #[must_use]
    pub fn as_str(self) -> &'static str {
        match self {
            Setting::ToxicOracle => "oracle",
            Setting::ToxicInferred => "inferred",
        }
    }
}

impl std::str::FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "oracle" | "toxicoracle" | "toxic_oracle" => Ok(Setting::ToxicOracle),
            "inferred" | "toxicinferred" | "toxic_inferred" => Ok(Setting::ToxicInferred),
            other => Err(Error::Invalid(format!("unknown setting {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    ToxicF1p,
    MacroF1p,
}

impl Objective {
    #[must_use]
    pub fn value(self, report: &EvalReport) -> Option<f64> {
        match self {
            Objective::ToxicF1p => report.toxic_f1p,
            Objective::MacroF1p => report.macro_f1p,
        }
    }

    #[must_use]
    pub fn as_str(self) -> &'static str {
        match self {
            Objective::ToxicF1p => "toxic",
            Objective::MacroF1p => "macro",
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "toxic" | "toxic_f1p" => Ok(Objective::ToxicF1p),
            "macro" | "macro_f1p" => Ok(Objective::MacroF1p),
            other => Err(Error::Invalid(format!("unknown objective {other:?}"))),
        }
    }
}

/// Hyper-parameter values searched per method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub fill_chars: Vec<usize>,
    pub theta: Vec<f64>,
    pub min_occ: Vec<usize>,
    pub tau: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            fill_chars: vec![0, 1, 9999],
            theta: (0..=20).map(|i| f64::from(i) / 20.0).collect(),
            min_occ: vec![1, 3, 5, 7, 11],
            tau: (0..23).map(|i| f64::from(i - 2) / 40.0).collect(),
        }
    }
}

fn sorted_f64(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn sorted_usize(v: &[usize]) -> Vec<usize> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

impl GridSpec {
    /// Sorted, deduplicated copy.
    #[must_use]
    pub fn canonical(&self) -> GridSpec {
        GridSpec {
            fill_chars: sorted_usize(&self.fill_chars),
            theta: sorted_f64(&self.theta),
            min_occ: sorted_usize(&self.min_occ),
            tau: sorted_f64(&self.tau),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fill_chars.is_empty() {
            return Err(Error::Invalid("grid has no fill_chars values".into()));
        }
        if self.theta.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Invalid("theta values must lie in [0, 1]".into()));
        }
        if self.min_occ.contains(&0) {
            return Err(Error::Invalid("min_occ values must be at least 1".into()));
        }
        if self.tau.iter().any(|t| !t.is_finite()) {
            return Err(Error::Invalid("tau values must be finite".into()));
        }
        Ok(())
    }
}

/// Method-specific parameters of a grid point (everything except fill).
#[derive(Clone, Copy, Debug, PartialEq)]
enum BaseParams {
    None,
    Lexicon { theta: f64, min_occ: usize },
    Tau(f64),
}

/// One grid point. `threshold` is θ for constructed lexicons and τ for
/// rationale scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub fill_chars: usize,
    pub threshold: Option<f64>,
    pub min_occ: Option<usize>,
}

impl GridPoint {
    fn base(&self) -> BaseParams {
        match (self.threshold, self.min_occ) {
            (Some(theta), Some(min_occ)) => BaseParams::Lexicon { theta, min_occ },
            (Some(tau), None) => BaseParams::Tau(tau),
            _ => BaseParams::None,
        }
    }

    fn from_base(base: BaseParams, fill_chars: usize) -> Self {
        let (threshold, min_occ) = match base {
            BaseParams::None => (None, None),
            BaseParams::Lexicon { theta, min_occ } => (Some(theta), Some(min_occ)),
            BaseParams::Tau(t) => (Some(t), None),
        };
        Self {
            fill_chars,
            threshold,
            min_occ,
        }
    }

    /// Canonical order: fill, then threshold, then min_occ, ascending.
    #[must_use]
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        let thr = |p: &GridPoint| p.threshold.unwrap_or(f64::NEG_INFINITY);
        self.fill_chars
            .cmp(&other.fill_chars)
            .then_with(|| thr(self).total_cmp(&thr(other)))
            .then_with(|| self.min_occ.cmp(&other.min_occ))
    }
}

impl fmt::Display for GridPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fill={}", self.fill_chars)?;
        if let Some(t) = self.threshold {
            write!(f, " threshold={t}")?;
        }
        if let Some(m) = self.min_occ {
            write!(f, " min_occ={m}")?;
        }
        Ok(())
    }
}

/// A span predictor with its inputs loaded, ready to be evaluated at
/// grid points.
pub enum Predictor {
    /// Lexicon induced from training-split word statistics.
    Constructed {
        name: String,
        stats: BTreeMap<String, WordStats>,
        mode: MatchMode,
    },
    Wordlist {
        lexicon: Lexicon,
        mode: MatchMode,
    },
    /// Normalized attribution scores.
    Rationale { scores: ScoreMap },
    Spans { spans: Predictions },
}

impl Predictor {
    #[must_use]
    pub fn constructed(train: &Dataset, rule: InSpanRule, mode: MatchMode) -> Self {
        Predictor::Constructed {
            name: train.name.clone(),
            stats: count_word_stats(train, rule),
            mode,
        }
    }

    /// Normalizes the scores once up front.
    #[must_use]
    pub fn rationale(scores: &ScoreMap) -> Self {
        let scores = scores
            .iter()
            .map(|(id, s)| (id.clone(), normalize(s).scores))
            .collect();
        Predictor::Rationale { scores }
    }

    fn bases(&self, grid: &GridSpec) -> Vec<BaseParams> {
        match self {
            Predictor::Constructed { .. } => grid
                .theta
                .iter()
                .flat_map(|&theta| grid.min_occ.iter().map(move |&min_occ| BaseParams::Lexicon { theta, min_occ }))
                .collect(),
            Predictor::Rationale { .. } => grid.tau.iter().map(|&t| BaseParams::Tau(t)).collect(),
            Predictor::Wordlist { .. } | Predictor::Spans { .. } => vec![BaseParams::None],
        }
    }

    /// Predictions before merging, restricted to the ids of `eval`.
    fn raw(&self, base: BaseParams, eval: &Dataset) -> Predictions {
        match (self, base) {
            (Predictor::Constructed { name, stats, mode }, BaseParams::Lexicon { theta, min_occ }) => {
                let lex = lexicon_from_stats(name, stats.values(), theta, min_occ);
                Matcher::new(&lex, *mode).predict_dataset(eval)
            }
            (Predictor::Wordlist { lexicon, mode }, _) => Matcher::new(lexicon, *mode).predict_dataset(eval),
            (Predictor::Rationale { scores }, BaseParams::Tau(tau)) => eval
                .iter()
                .filter_map(|s| {
                    scores
                        .get(&s.id)
                        .map(|sc| (s.id.clone(), threshold_to_spans(sc, ThresholdConfig { tau })))
                })
                .collect(),
            (Predictor::Spans { spans }, _) => spans
                .iter()
                .filter(|(id, _)| eval.contains(id))
                .map(|(id, s)| (id.clone(), s.clone()))
                .collect(),
            _ => unreachable!("grid point does not match predictor kind"),
        }
    }

    /// Final predictions at `point`: merged, and gated when `binary` is given.
    pub fn predict(&self, point: &GridPoint, eval: &Dataset, binary: Option<&BinaryMap>) -> Result<Predictions> {
        finish(self.raw(point.base(), eval), point.fill_chars, binary)
    }
}

fn finish(raw: Predictions, fill_chars: usize, binary: Option<&BinaryMap>) -> Result<Predictions> {
    let cfg = MergeConfig::new(fill_chars);
    let merged: Predictions = raw.into_iter().map(|(id, s)| (id, s.merged(cfg))).collect();
    match binary {
        Some(b) => gate(&merged, b),
        None => Ok(merged),
    }
}

/// Scores a predictor at a fixed grid point.
pub fn evaluate_point(
    predictor: &Predictor,
    point: &GridPoint,
    eval: &Dataset,
    binary: Option<&BinaryMap>,
) -> Result<EvalReport> {
    evaluate(eval, &predictor.predict(point, eval, binary)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub point: GridPoint,
    pub objective: Option<f64>,
    pub report: EvalReport,
    /// True when no sample received any predicted span.
    pub all_empty: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TunedParams {
    pub point: GridPoint,
    pub objective: Objective,
    pub dev_value: Option<f64>,
    pub dev_report: EvalReport,
    /// Every grid point in canonical order.
    pub trace: Vec<TraceEntry>,
}

#[derive(Clone, Copy, Debug)]
pub struct TuneOptions<'a> {
    pub objective: Objective,
    /// Binary predictions for the dev set; gating applies when present.
    pub binary: Option<&'a BinaryMap>,
}

fn better(candidate: Option<f64>, best: Option<f64>) -> bool {
    match (candidate, best) {
        (Some(c), Some(b)) => c > b,
        (Some(_), None) => true,
        (None, _) => false,
    }
}

/// Evaluates every grid point on `dev` and returns the best one.
///
/// Ties go to the smallest fill, then threshold, then min_occ. Points are
/// evaluated on the current rayon pool; the trace is in canonical order
/// regardless of how the grid values were listed.
pub fn grid_search(predictor: &Predictor, dev: &Dataset, grid: &GridSpec, opts: &TuneOptions<'_>) -> Result<TunedParams> {
    if dev.is_empty() {
        return Err(Error::Invalid(format!("{}: dev split is empty", dev.name)));
    }
    grid.validate()?;
    let grid = grid.canonical();
    let bases = predictor.bases(&grid);

    let per_base: Vec<Result<Vec<TraceEntry>>> = bases
        .par_iter()
        .map(|&base| {
            let raw = predictor.raw(base, dev);
            let all_empty = raw.values().all(SpanSet::is_empty);
            grid.fill_chars
                .iter()
                .map(|&fill| {
                    let report = evaluate(dev, &finish(raw.clone(), fill, opts.binary)?)?;
                    Ok(TraceEntry {
                        point: GridPoint::from_base(base, fill),
                        objective: opts.objective.value(&report),
                        report,
                        all_empty,
                    })
                })
                .collect()
        })
        .collect();

    let mut trace = Vec::with_capacity(bases.len() * grid.fill_chars.len());
    for entries in per_base {
        trace.extend(entries?);
    }
    trace.sort_by(|a, b| a.point.canonical_cmp(&b.point));

    if trace.iter().all(|t| t.all_empty) {
        warn!("{}: every grid point produced empty predictions", dev.name);
    }
    let mut best = 0;
    for (i, t) in trace.iter().enumerate() {
        if better(t.objective, trace[best].objective) {
            best = i;
        }
    }
    let chosen = &trace[best];
    Ok(TunedParams {
        point: chosen.point,
        objective: opts.objective,
        dev_value: chosen.objective,
        dev_report: chosen.report.clone(),
        trace,
    })
}

/// Cross-domain score as a fraction of the in-domain score of the same
/// evaluation set; `None` when the in-domain score is not positive.
#[must_use]
pub fn retention(in_domain: f64, cross_domain: f64) -> Option<f64> {
    (in_domain > 0.0).then(|| cross_domain / in_domain)
}
