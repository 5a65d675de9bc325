//! Per-sample F1⁺ over character offsets and its aggregation into
//! toxic / non-toxic subset means and their harmonic mean.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::spanops::{overlap, SpanSet};
use crate::Predictions;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegenerateCase {
    BothEmpty,
    PredOnly,
    GoldOnly,
    Normal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub f1_plus: f64,
    pub precision: f64,
    pub recall: f64,
    pub case: DegenerateCase,
}

/// Scores one prediction against its gold offsets.
///
/// Both empty scores 1 everywhere; exactly one empty scores 0 everywhere.
/// With both non-empty and no overlap, P = R = F1 = 0.
#[must_use]
pub fn score_sample(pred: &SpanSet, gold: &SpanSet) -> SampleScore {
    let (case, precision, recall) = match (pred.is_empty(), gold.is_empty()) {
        (true, true) => (DegenerateCase::BothEmpty, 1.0, 1.0),
        (false, true) => (DegenerateCase::PredOnly, 0.0, 0.0),
        (true, false) => (DegenerateCase::GoldOnly, 0.0, 0.0),
        (false, false) => {
            let inter = overlap(pred, gold) as f64;
            (
                DegenerateCase::Normal,
                inter / pred.len() as f64,
                inter / gold.len() as f64,
            )
        }
    };
    let f1_plus = match case {
        DegenerateCase::BothEmpty => 1.0,
        DegenerateCase::PredOnly | DegenerateCase::GoldOnly => 0.0,
        DegenerateCase::Normal => f1(precision, recall),
    };
    SampleScore {
        f1_plus,
        precision,
        recall,
        case,
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub f1_plus: f64,
    pub precision: f64,
    pub recall: f64,
    pub count: usize,
}

/// Order-independent mean: values are summed in sorted order.
fn mean(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Arithmetic means of the per-sample scores; `None` for an empty list.
#[must_use]
pub fn aggregate(scores: &[SampleScore]) -> Option<Aggregate> {
    if scores.is_empty() {
        return None;
    }
    Some(Aggregate {
        f1_plus: mean(scores.iter().map(|s| s.f1_plus).collect()),
        precision: mean(scores.iter().map(|s| s.precision).collect()),
        recall: mean(scores.iter().map(|s| s.recall).collect()),
        count: scores.len(),
    })
}

/// Harmonic mean of the toxic and non-toxic F1⁺, 0 when both are 0.
#[must_use]
pub fn macro_f1p(toxic_f1p: f64, nontoxic_f1p: f64) -> f64 {
    let sum = toxic_f1p + nontoxic_f1p;
    if sum == 0.0 {
        0.0
    } else {
        2.0 * toxic_f1p * nontoxic_f1p / sum
    }
}

/// Subset means and their macro average for one evaluation cell.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub toxic_f1p: Option<f64>,
    pub toxic_precision: Option<f64>,
    pub toxic_recall: Option<f64>,
    pub nontoxic_f1p: Option<f64>,
    pub macro_f1p: Option<f64>,
    pub n_toxic: usize,
    pub n_nontoxic: usize,
    /// Dataset samples with no prediction; scored as empty predictions.
    pub missing_predictions: usize,
}

impl EvalReport {
    /// Column names of [`EvalReport::values`].
    pub const COLUMNS: [&'static str; 5] = ["toxic_f1p", "toxic_precision", "toxic_recall", "nontoxic_f1p", "macro_f1p"];

    #[must_use]
    pub fn values(&self) -> [Option<f64>; 5] {
        [
            self.toxic_f1p,
            self.toxic_precision,
            self.toxic_recall,
            self.nontoxic_f1p,
            self.macro_f1p,
        ]
    }
}

/// Per-sample scores for every dataset sample, in dataset order.
///
/// Fails on a prediction whose id is not in the dataset. Returns the
/// number of samples that had no prediction alongside the scores.
pub fn score_dataset(dataset: &Dataset, predictions: &Predictions) -> Result<(Vec<SampleScore>, usize)> {
    if let Some(id) = predictions.keys().find(|id| !dataset.contains(id)) {
        return Err(Error::UnknownId(id.clone()));
    }
    let empty = SpanSet::empty();
    let mut missing = 0;
    let scores = dataset
        .iter()
        .map(|s| {
            let pred = predictions.get(&s.id).unwrap_or_else(|| {
                missing += 1;
                &empty
            });
            score_sample(pred, &s.gold_spans)
        })
        .collect();
    Ok((scores, missing))
}

pub fn evaluate(dataset: &Dataset, predictions: &Predictions) -> Result<EvalReport> {
    let (scores, missing) = score_dataset(dataset, predictions)?;
    if missing > 0 {
        warn!("{}: {missing} samples without prediction, scored as empty", dataset.name);
    }
    let (mut toxic, mut nontoxic) = (Vec::new(), Vec::new());
    for (s, score) in dataset.iter().zip(scores) {
        if s.toxic {
            toxic.push(score);
        } else {
            nontoxic.push(score);
        }
    }
    let t = aggregate(&toxic);
    let n = aggregate(&nontoxic);
    Ok(EvalReport {
        toxic_f1p: t.map(|a| a.f1_plus),
        toxic_precision: t.map(|a| a.precision),
        toxic_recall: t.map(|a| a.recall),
        nontoxic_f1p: n.map(|a| a.f1_plus),
        macro_f1p: t.zip(n).map(|(t, n)| macro_f1p(t.f1_plus, n.f1_plus)),
        n_toxic: toxic.len(),
        n_nontoxic: nontoxic.len(),
        missing_predictions: missing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Sample, Split};
    use crate::spanops::Span;

    fn set(r: &[(usize, usize)]) -> SpanSet {
        SpanSet::from_ranges(r.iter().map(|&(a, b)| Span::new(a, b)))
    }

    #[test]
    fn branches() {
        let e = SpanSet::empty();
        let x = set(&[(0, 5)]);
        assert_eq!(score_sample(&e, &e).f1_plus, 1.0);
        assert_eq!(score_sample(&x, &e).f1_plus, 0.0);
        assert_eq!(score_sample(&e, &x).f1_plus, 0.0);
        assert_eq!(score_sample(&x, &e).case, DegenerateCase::PredOnly);
        let s = score_sample(&x, &set(&[(2, 7)]));
        assert_eq!((s.precision, s.recall, s.f1_plus), (0.6, 0.6, 0.6));
    }

    #[test]
    fn disjoint_nonempty_is_zero_not_nan() {
        let s = score_sample(&set(&[(0, 2)]), &set(&[(4, 6)]));
        assert_eq!((s.precision, s.recall, s.f1_plus), (0.0, 0.0, 0.0));
    }

    #[test]
    fn aggregate_examples() {
        let sc = |f| SampleScore {
            f1_plus: f,
            precision: f,
            recall: f,
            case: DegenerateCase::Normal,
        };
        assert_eq!(aggregate(&[sc(1.0)]).unwrap().f1_plus, 1.0);
        assert_eq!(aggregate(&[sc(1.0), sc(0.0)]).unwrap().f1_plus, 0.5);
        assert!((aggregate(&[sc(0.6), sc(0.6), sc(0.0)]).unwrap().f1_plus - 0.4).abs() < 1e-12);
        assert!(aggregate(&[]).is_none());
    }

    #[test]
    fn macro_examples() {
        assert!((macro_f1p(0.6, 0.3) - 0.4).abs() < 1e-12);
        assert_eq!(macro_f1p(0.7, 0.7), 0.7);
        assert_eq!(macro_f1p(0.7, 0.0), 0.0);
        assert_eq!(macro_f1p(0.0, 0.0), 0.0);
    }

    fn dataset() -> Dataset {
        let s = |id: &str, toxic, spans: &[(usize, usize)]| Sample {
            id: id.into(),
            text: "some text here".into(),
            toxic,
            gold_spans: set(spans),
            split: Split::Test,
        };
        Dataset::new(
            "d",
            vec![
                s("t1", true, &[(0, 4)]),
                s("t2", true, &[]),
                s("t3", true, &[(5, 9)]),
                s("n1", false, &[]),
            ],
            "",
        )
        .unwrap()
    }

    #[test]
    fn perfect_predictions() {
        let d = dataset();
        let preds = d.iter().map(|s| (s.id.clone(), s.gold_spans.clone())).collect();
        let r = evaluate(&d, &preds).unwrap();
        assert_eq!((r.toxic_f1p, r.nontoxic_f1p, r.macro_f1p), (Some(1.0), Some(1.0), Some(1.0)));
    }

    #[test]
    fn empty_predictions_score_empty_gold_fraction() {
        let d = dataset();
        let r = evaluate(&d, &Predictions::new()).unwrap();
        assert_eq!(r.nontoxic_f1p, Some(1.0));
        assert!((r.toxic_f1p.unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.missing_predictions, 4);
    }

    #[test]
    fn unknown_prediction_id() {
        let mut p = Predictions::new();
        p.insert("zzz".into(), SpanSet::empty());
        assert!(matches!(evaluate(&dataset(), &p), Err(Error::UnknownId(id)) if id == "zzz"));
    }

    #[test]
    fn macro_absent_without_nontoxic() {
        let d = dataset();
        let only_toxic = Dataset::new("t", d.iter().filter(|s| s.toxic).cloned().collect(), "").unwrap();
        let r = evaluate(&only_toxic, &Predictions::new()).unwrap();
        assert!(r.nontoxic_f1p.is_none() && r.macro_f1p.is_none());
    }
}
