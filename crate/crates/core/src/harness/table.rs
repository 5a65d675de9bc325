//! CSV and aligned-text renderings of experiment results.

use std::io::Write;

use crate::error::Result;
use crate::harness::experiment::{Relation, ResultRow, RetentionRow, TuningRecord};
use crate::harness::grid::GridPoint;
use crate::metrics::EvalReport;

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{:.1}", 100.0 * x)).unwrap_or_else(|| "-".into())
}

fn point_fields(p: &GridPoint) -> [String; 3] {
    [
        p.fill_chars.to_string(),
        p.threshold.map(|t| t.to_string()).unwrap_or_default(),
        p.min_occ.map(|m| m.to_string()).unwrap_or_default(),
    ]
}

fn report_fields(r: &EvalReport) -> Vec<String> {
    let mut v: Vec<String> = r.values().iter().map(|&x| num(x)).collect();
    v.push(r.n_toxic.to_string());
    v.push(r.n_nontoxic.to_string());
    v.push(r.missing_predictions.to_string());
    v
}

const REPORT_HEADER: [&str; 8] = [
    "toxic_f1p",
    "toxic_precision",
    "toxic_recall",
    "nontoxic_f1p",
    "macro_f1p",
    "n_toxic",
    "n_nontoxic",
    "missing_predictions",
];

/// One evaluation report as a header plus a single CSV row.
pub fn write_report_csv<W: Write>(report: &EvalReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REPORT_HEADER)?;
    w.write_record(report_fields(report))?;
    w.flush()?;
    Ok(())
}

pub fn write_results_csv<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![
        "method",
        "kind",
        "train",
        "eval",
        "relation",
        "setting",
        "objective",
        "fill_chars",
        "threshold",
        "min_occ",
        "dev_objective",
    ];
    header.extend(REPORT_HEADER);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.method.clone(),
            r.kind.clone(),
            r.train.clone(),
            r.eval.clone(),
            match r.relation {
                Relation::InDomain => "in_domain".into(),
                Relation::CrossDomain => "cross_domain".into(),
            },
            r.setting.as_str().into(),
            r.objective.as_str().into(),
        ];
        rec.extend(point_fields(&r.point));
        rec.push(num(r.dev_value));
        rec.extend(report_fields(&r.report));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_retention_csv<W: Write>(rows: &[RetentionRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["method", "train", "eval", "in_domain", "cross_domain", "retention"])?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.train.clone(),
            r.eval.clone(),
            num(r.in_domain),
            num(r.cross_domain),
            num(r.retention),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Every evaluated grid point of every tuning run, in canonical order.
pub fn write_trace_csv<W: Write>(tuning: &[TuningRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["method", "train", "fill_chars", "threshold", "min_occ", "objective", "chosen", "all_empty"];
    header.extend(REPORT_HEADER);
    w.write_record(&header)?;
    for t in tuning {
        for e in &t.tuned.trace {
            let mut rec = vec![t.method.clone(), t.train.clone()];
            rec.extend(point_fields(&e.point));
            rec.push(num(e.objective));
            rec.push(u8::from(e.point == t.tuned.point).to_string());
            rec.push(u8::from(e.all_empty).to_string());
            rec.extend(report_fields(&e.report));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Aligned plain-text table with scores in percent, one block per
/// (train, eval) pair.
#[must_use]
pub fn render_results_text(rows: &[ResultRow]) -> String {
    let mut out = String::new();
    let mut pairs: Vec<(&str, &str)> = Vec::new();
    for r in rows {
        if !pairs.contains(&(r.train.as_str(), r.eval.as_str())) {
            pairs.push((&r.train, &r.eval));
        }
    }
    let width = rows.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
    for (train, eval) in pairs {
        let title = if train == eval {
            format!("{eval} (in-domain)")
        } else {
            format!("{train} -> {eval}")
        };
        out.push_str(&title);
        out.push('\n');
        out.push_str(&format!(
            "{:<width$}  {:>6} {:>6} {:>6}  {:>6}  {:>6}\n",
            "method", "F1+", "Prec.", "Rec.", "~F1+", "Macro"
        ));
        for r in rows.iter().filter(|r| r.train == train && r.eval == eval) {
            let v = r.report.values();
            out.push_str(&format!(
                "{:<width$}  {:>6} {:>6} {:>6}  {:>6}  {:>6}\n",
                r.method,
                pct(v[0]),
                pct(v[1]),
                pct(v[2]),
                pct(v[3]),
                pct(v[4])
            ));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_csv_layout() {
        let r = EvalReport {
            toxic_f1p: Some(0.6),
            toxic_precision: Some(0.5),
            toxic_recall: Some(0.75),
            nontoxic_f1p: None,
            macro_f1p: None,
            n_toxic: 3,
            n_nontoxic: 0,
            missing_predictions: 1,
        };
        let mut buf = Vec::new();
        write_report_csv(&r, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "toxic_f1p,toxic_precision,toxic_recall,nontoxic_f1p,macro_f1p,n_toxic,n_nontoxic,missing_predictions\n\
             0.600000,0.500000,0.750000,,,3,0,1\n"
        );
    }
}
