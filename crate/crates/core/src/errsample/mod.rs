//! Error-analysis sampling.
//!
//! Erroneous predictions (F1⁺ < 1) are split into precision/recall
//! quadrants around the medians, plus a bucket for empty predictions.
//! A fixed number of records is drawn from each bucket for human
//! annotation, and class prevalences measured on the sample are
//! re-weighted by the true bucket sizes.

mod sheet;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::metrics::score_dataset;
use crate::spanops::{tokenize, SpanSet};
use crate::Predictions;

pub use sheet::{read_sheet, write_category_counts, read_category_counts, write_prevalence_csv, write_sheet, PrevalenceTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorCategory {
    HighPrecisionHighRecall,
    HighPrecisionLowRecall,
    LowPrecisionHighRecall,
    LowPrecisionLowRecall,
    Empty,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 5] = [
        ErrorCategory::HighPrecisionHighRecall,
        ErrorCategory::HighPrecisionLowRecall,
        ErrorCategory::LowPrecisionHighRecall,
        ErrorCategory::LowPrecisionLowRecall,
        ErrorCategory::Empty,
    ];

    #[must_use]
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::HighPrecisionHighRecall => "P+R+",
            ErrorCategory::HighPrecisionLowRecall => "P+R-",
            ErrorCategory::LowPrecisionHighRecall => "P-R+",
            ErrorCategory::LowPrecisionLowRecall => "P-R-",
            ErrorCategory::Empty => "empty",
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ErrorCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| Error::Invalid(format!("unknown error category {s:?}")))
    }
}

/// Human-assigned error classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorClass {
    DoubtLabelMissing,
    DoubtLabelTooMany,
    FpSubwordToxic,
    FpSubwordNontoxic,
    FnSubwordMorph,
    FnSubword,
    FnExplicit,
    FnExplicitSpelling,
    FnImplicit,
    FnPhrasePart,
    FnWhitespace,
    FpTarget,
    FpPos,
}

impl ErrorClass {
    pub const ALL: [ErrorClass; 13] = [
        ErrorClass::DoubtLabelMissing,
        ErrorClass::DoubtLabelTooMany,
        ErrorClass::FpSubwordToxic,
        ErrorClass::FpSubwordNontoxic,
        ErrorClass::FnSubwordMorph,
        ErrorClass::FnSubword,
        ErrorClass::FnExplicit,
        ErrorClass::FnExplicitSpelling,
        ErrorClass::FnImplicit,
        ErrorClass::FnPhrasePart,
        ErrorClass::FnWhitespace,
        ErrorClass::FpTarget,
        ErrorClass::FpPos,
    ];

    #[must_use]
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::DoubtLabelMissing => "doubt-label-missing",
            ErrorClass::DoubtLabelTooMany => "doubt-label-toomany",
            ErrorClass::FpSubwordToxic => "FP-subword-toxic",
            ErrorClass::FpSubwordNontoxic => "FP-subword-nontoxic",
            ErrorClass::FnSubwordMorph => "FN-subword-morph",
            ErrorClass::FnSubword => "FN-subword",
            ErrorClass::FnExplicit => "FN-explicit",
            ErrorClass::FnExplicitSpelling => "FN-explicit-spelling",
            ErrorClass::FnImplicit => "FN-implicit",
            ErrorClass::FnPhrasePart => "FN-phrase-part",
            ErrorClass::FnWhitespace => "FN-whitespace",
            ErrorClass::FpTarget => "FP-target",
            ErrorClass::FpPos => "FP-pos",
        }
    }
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ErrorClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| Error::Invalid(format!("unknown error class {s:?}")))
    }
}

/// Unions of error classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassAggregate {
    /// Every class about partial-word predictions.
    Subword,
    FalseNegative,
    FalsePositive,
}

impl ClassAggregate {
    pub const ALL: [ClassAggregate; 3] = [ClassAggregate::Subword, ClassAggregate::FalseNegative, ClassAggregate::FalsePositive];

    #[must_use]
    pub fn as_str(self) -> &'static str {
        match self {
            ClassAggregate::Subword => "*-subword-*",
            ClassAggregate::FalseNegative => "FN-*",
            ClassAggregate::FalsePositive => "FP-*",
        }
    }

    #[must_use]
    pub fn contains(self, class: ErrorClass) -> bool {
        let name = class.as_str();
        match self {
            ClassAggregate::Subword => name.contains("-subword"),
            ClassAggregate::FalseNegative => name.starts_with("FN-"),
            ClassAggregate::FalsePositive => name.starts_with("FP-"),
        }
    }

    pub fn members(self) -> impl Iterator<Item = ErrorClass> {
        ErrorClass::ALL.into_iter().filter(move |&c| self.contains(c))
    }
}

/// A row of a prevalence report: a single class or an aggregate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PrevalenceKey {
    Class(ErrorClass),
    Aggregate(ClassAggregate),
}

impl PrevalenceKey {
    pub fn all() -> impl Iterator<Item = PrevalenceKey> {
        ErrorClass::ALL
            .into_iter()
            .map(PrevalenceKey::Class)
            .chain(ClassAggregate::ALL.into_iter().map(PrevalenceKey::Aggregate))
    }

    #[must_use]
    pub fn label(self) -> &'static str {
        match self {
            PrevalenceKey::Class(c) => c.as_str(),
            PrevalenceKey::Aggregate(a) => a.as_str(),
        }
    }

    fn present(self, classes: &BTreeSet<ErrorClass>) -> bool {
        match self {
            PrevalenceKey::Class(c) => classes.contains(&c),
            PrevalenceKey::Aggregate(a) => classes.iter().any(|&c| a.contains(c)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub sample_id: String,
    pub method: String,
    pub text: String,
    pub precision: f64,
    pub recall: f64,
    pub f1_plus: f64,
    pub pred: SpanSet,
    pub gold: SpanSet,
    pub category: Option<ErrorCategory>,
}

impl ErrorRecord {
    /// Gold is empty, so recall is undefined and ranked as 0.
    #[must_use]
    pub fn gold_empty(&self) -> bool {
        self.gold.is_empty()
    }
}

/// Every sample whose prediction scores F1⁺ < 1.
pub fn select_errors(dataset: &Dataset, predictions: &Predictions, method: &str) -> Result<Vec<ErrorRecord>> {
    let (scores, _) = score_dataset(dataset, predictions)?;
    let empty = SpanSet::empty();
    Ok(dataset
        .iter()
        .zip(scores)
        .filter(|(_, sc)| sc.f1_plus < 1.0)
        .map(|(s, sc)| ErrorRecord {
            sample_id: s.id.clone(),
            method: method.to_string(),
            text: s.text.clone(),
            precision: sc.precision,
            recall: sc.recall,
            f1_plus: sc.f1_plus,
            pred: predictions.get(&s.id).unwrap_or(&empty).clone(),
            gold: s.gold_spans.clone(),
            category: None,
        })
        .collect())
}

#[must_use]
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Categorized {
    pub records: Vec<ErrorRecord>,
    /// Size of every category, including empty ones.
    pub counts: BTreeMap<ErrorCategory, usize>,
    pub precision_median: Option<f64>,
    pub recall_median: Option<f64>,
}

/// Assigns each record a category. Values up to and including the median
/// are low; medians are taken over records with non-empty predictions.
#[must_use]
pub fn categorize(errors: Vec<ErrorRecord>) -> Categorized {
    let nonempty: Vec<&ErrorRecord> = errors.iter().filter(|e| !e.pred.is_empty()).collect();
    let pm = median(&nonempty.iter().map(|e| e.precision).collect::<Vec<_>>());
    let rm = median(&nonempty.iter().map(|e| e.recall).collect::<Vec<_>>());
    let mut counts: BTreeMap<ErrorCategory, usize> = ErrorCategory::ALL.iter().map(|&c| (c, 0)).collect();
    let records = errors
        .into_iter()
        .map(|mut e| {
            let cat = match (pm, rm) {
                (Some(pm), Some(rm)) if !e.pred.is_empty() => match (e.precision > pm, e.recall > rm) {
                    (true, true) => ErrorCategory::HighPrecisionHighRecall,
                    (true, false) => ErrorCategory::HighPrecisionLowRecall,
                    (false, true) => ErrorCategory::LowPrecisionHighRecall,
                    (false, false) => ErrorCategory::LowPrecisionLowRecall,
                },
                _ => ErrorCategory::Empty,
            };
            *counts.get_mut(&cat).expect("all categories present") += 1;
            e.category = Some(cat);
            e
        })
        .collect();
    Categorized {
        records,
        counts,
        precision_median: pm,
        recall_median: rm,
    }
}

/// Per-category sample sizes: `per_category` each where possible; the
/// shortfall of small categories is spread evenly over categories that
/// still have records, remainders going to earlier categories first.
#[must_use]
pub fn allocate(counts: &BTreeMap<ErrorCategory, usize>, per_category: usize) -> BTreeMap<ErrorCategory, usize> {
    let count = |c: &ErrorCategory| counts.get(c).copied().unwrap_or(0);
    let mut quota: BTreeMap<ErrorCategory, usize> = ErrorCategory::ALL.iter().map(|c| (*c, per_category.min(count(c)))).collect();
    let target = per_category * ErrorCategory::ALL.len();
    let mut shortfall = target - quota.values().sum::<usize>();
    while shortfall > 0 {
        let open: Vec<ErrorCategory> = ErrorCategory::ALL.into_iter().filter(|c| count(c) > quota[c]).collect();
        if open.is_empty() {
            break;
        }
        let (share, rem) = (shortfall / open.len(), shortfall % open.len());
        for (k, c) in open.iter().enumerate() {
            let want = share + usize::from(k < rem);
            let add = want.min(count(c) - quota[c]);
            *quota.get_mut(c).expect("present") += add;
            shortfall -= add;
        }
    }
    quota
}

/// Pre-annotation flags computed from the text and spans.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hints {
    /// A predicted span starts or ends strictly inside a word.
    pub subword: bool,
    /// A predicted span ends strictly inside a word, leaving its suffix out.
    pub missing_suffix: bool,
}

#[must_use]
pub fn hints(text: &str, pred: &SpanSet) -> Hints {
    let tokens = tokenize(text);
    let inside = |b: usize| tokens.iter().any(|t| t.start < b && b < t.end);
    Hints {
        subword: pred.ranges().iter().any(|r| inside(r.start) || inside(r.end)),
        missing_suffix: pred.ranges().iter().any(|r| inside(r.end)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SheetRow {
    pub record: ErrorRecord,
    pub hints: Hints,
    pub annotated: bool,
    pub classes: BTreeSet<ErrorClass>,
}

/// Sampled records of one method, awaiting or carrying annotations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedSheet {
    pub method: String,
    pub rows: Vec<SheetRow>,
    pub category_counts: BTreeMap<ErrorCategory, usize>,
}

/// Draws a seeded uniform sample of `per_category` records from each
/// category (without replacement), compensating for small categories.
pub fn sample_sheet(categorized: &Categorized, per_category: usize, seed: u64) -> Result<AnnotatedSheet> {
    if per_category == 0 {
        return Err(Error::Invalid("per_category must be at least 1".into()));
    }
    let quota = allocate(&categorized.counts, per_category);
    let wanted = per_category * ErrorCategory::ALL.len();
    if categorized.records.len() < wanted {
        warn!(
            "only {} errors available, fewer than the {wanted} requested; sheet holds all of them",
            categorized.records.len()
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for cat in ErrorCategory::ALL {
        let members: Vec<&ErrorRecord> = categorized.records.iter().filter(|r| r.category == Some(cat)).collect();
        let mut picked = index::sample(&mut rng, members.len(), quota[&cat]).into_vec();
        picked.sort_unstable();
        for i in picked {
            let record = members[i].clone();
            rows.push(SheetRow {
                hints: hints(&record.text, &record.pred),
                record,
                annotated: false,
                classes: BTreeSet::new(),
            });
        }
    }
    let method = categorized.records.first().map(|r| r.method.clone()).unwrap_or_default();
    Ok(AnnotatedSheet {
        method,
        rows,
        category_counts: categorized.counts.clone(),
    })
}

/// Class prevalence over the whole error population: per-category class
/// rates in the sample weighted by each category's share of all errors.
pub fn reweight_prevalence(
    rows: &[SheetRow],
    category_counts: &BTreeMap<ErrorCategory, usize>,
) -> Result<BTreeMap<PrevalenceKey, f64>> {
    let unannotated: Vec<&str> = rows.iter().filter(|r| !r.annotated).map(|r| r.record.sample_id.as_str()).collect();
    if !unannotated.is_empty() {
        return Err(Error::Invalid(format!("unannotated records: {}", unannotated.join(", "))));
    }
    let total: usize = category_counts.values().sum();
    let mut out: BTreeMap<PrevalenceKey, f64> = PrevalenceKey::all().map(|k| (k, 0.0)).collect();
    if total == 0 {
        return Ok(out);
    }
    for (&cat, &count) in category_counts.iter().filter(|(_, &n)| n > 0) {
        let sampled: Vec<&SheetRow> = rows.iter().filter(|r| r.record.category == Some(cat)).collect();
        if sampled.is_empty() {
            return Err(Error::Invalid(format!("category {cat} has {count} errors but no sampled records")));
        }
        let weight = count as f64 / total as f64;
        for (key, value) in out.iter_mut() {
            let hits = sampled.iter().filter(|r| key.present(&r.classes)).count();
            *value += hits as f64 / sampled.len() as f64 * weight;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spanops::Span;

    fn rec(id: &str, p: f64, r: f64, empty_pred: bool) -> ErrorRecord {
        ErrorRecord {
            sample_id: id.into(),
            method: "m".into(),
            text: "some text".into(),
            precision: p,
            recall: r,
            f1_plus: 0.0,
            pred: if empty_pred {
                SpanSet::empty()
            } else {
                SpanSet::from_ranges([Span::new(0, 1)])
            },
            gold: SpanSet::from_ranges([Span::new(0, 4)]),
            category: None,
        }
    }

    #[test]
    fn median_rule_on_odd_list() {
        let c = categorize(vec![rec("a", 0.2, 0.9, false), rec("b", 0.5, 0.1, false), rec("c", 0.8, 0.5, false)]);
        assert_eq!(c.precision_median, Some(0.5));
        let cat = |id: &str| c.records.iter().find(|r| r.sample_id == id).unwrap().category.unwrap();
        assert_eq!(cat("a"), ErrorCategory::LowPrecisionHighRecall);
        assert_eq!(cat("b"), ErrorCategory::LowPrecisionLowRecall);
        assert_eq!(cat("c"), ErrorCategory::HighPrecisionLowRecall);
    }

    #[test]
    fn even_median_averages_middle_values() {
        assert_eq!(median(&[0.1, 0.4, 0.2, 0.3]), Some(0.25));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn empty_predictions_go_to_empty() {
        let c = categorize(vec![rec("a", 0.0, 0.0, true), rec("b", 0.0, 0.0, true)]);
        assert_eq!(c.counts[&ErrorCategory::Empty], 2);
        assert!(c.precision_median.is_none());
    }

    #[test]
    fn compensation_spreads_evenly() {
        let mut counts: BTreeMap<ErrorCategory, usize> = ErrorCategory::ALL.iter().map(|&c| (c, 100)).collect();
        counts.insert(ErrorCategory::LowPrecisionHighRecall, 0);
        let q = allocate(&counts, 15);
        assert_eq!(q[&ErrorCategory::HighPrecisionHighRecall], 19);
        assert_eq!(q[&ErrorCategory::HighPrecisionLowRecall], 19);
        assert_eq!(q[&ErrorCategory::LowPrecisionHighRecall], 0);
        assert_eq!(q[&ErrorCategory::LowPrecisionLowRecall], 19);
        assert_eq!(q[&ErrorCategory::Empty], 18);
        assert_eq!(q.values().sum::<usize>(), 75);
    }

    #[test]
    fn compensation_respects_capacity() {
        let counts: BTreeMap<ErrorCategory, usize> = ErrorCategory::ALL.iter().zip([2, 16, 15, 40, 3]).map(|(&c, n)| (c, n)).collect();
        let q = allocate(&counts, 15);
        assert_eq!(q.values().sum::<usize>(), 75);
        assert!(ErrorCategory::ALL.iter().all(|c| q[c] <= counts[c]));
        assert_eq!(q[&ErrorCategory::HighPrecisionLowRecall], 16);
        assert_eq!(q[&ErrorCategory::LowPrecisionLowRecall], 39);
    }

    #[test]
    fn small_population_is_taken_whole() {
        let counts: BTreeMap<ErrorCategory, usize> = ErrorCategory::ALL.iter().map(|&c| (c, 3)).collect();
        assert_eq!(allocate(&counts, 15).values().sum::<usize>(), 15);
    }

    #[test]
    fn aggregates() {
        let sub: Vec<_> = ClassAggregate::Subword.members().collect();
        assert_eq!(
            sub,
            vec![ErrorClass::FpSubwordToxic, ErrorClass::FpSubwordNontoxic, ErrorClass::FnSubwordMorph, ErrorClass::FnSubword]
        );
        assert_eq!(ClassAggregate::FalseNegative.members().count(), 7);
        assert_eq!(ClassAggregate::FalsePositive.members().count(), 4);
    }

    #[test]
    fn hint_flags() {
        let text = "what stupidity and arrogance";
        let h = hints(text, &SpanSet::from_ranges([Span::new(5, 11)]));
        assert!(h.subword && h.missing_suffix);
        let h = hints(text, &SpanSet::from_ranges([Span::new(5, 14)]));
        assert!(!h.subword && !h.missing_suffix);
        let h = hints("somehow", &SpanSet::from_ranges([Span::new(4, 6)]));
        assert!(h.subword && h.missing_suffix);
    }

    #[test]
    fn reweight_half_weight_category() {
        let mut counts: BTreeMap<ErrorCategory, usize> = ErrorCategory::ALL.iter().map(|&c| (c, 0)).collect();
        counts.insert(ErrorCategory::HighPrecisionHighRecall, 50);
        counts.insert(ErrorCategory::Empty, 50);
        let row = |id: &str, cat, classes: &[ErrorClass]| SheetRow {
            record: ErrorRecord {
                category: Some(cat),
                ..rec(id, 0.0, 0.0, false)
            },
            hints: Hints::default(),
            annotated: true,
            classes: classes.iter().copied().collect(),
        };
        let rows = vec![
            row("a", ErrorCategory::HighPrecisionHighRecall, &[ErrorClass::FpTarget]),
            row("b", ErrorCategory::HighPrecisionHighRecall, &[ErrorClass::FpTarget, ErrorClass::FnExplicit]),
            row("c", ErrorCategory::Empty, &[ErrorClass::FnExplicit]),
        ];
        let p = reweight_prevalence(&rows, &counts).unwrap();
        assert!((p[&PrevalenceKey::Class(ErrorClass::FpTarget)] - 0.5).abs() < 1e-12);
        assert!((p[&PrevalenceKey::Class(ErrorClass::FnExplicit)] - 0.75).abs() < 1e-12);
        assert!((p[&PrevalenceKey::Aggregate(ClassAggregate::FalsePositive)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reweight_rejects_unannotated() {
        let counts: BTreeMap<ErrorCategory, usize> = [(ErrorCategory::Empty, 1)].into_iter().collect();
        let rows = vec![SheetRow {
            record: rec("zz", 0.0, 0.0, true),
            hints: Hints::default(),
            annotated: false,
            classes: BTreeSet::new(),
        }];
        let err = reweight_prevalence(&rows, &counts).unwrap_err();
        assert!(err.to_string().contains("zz"));
    }
}
