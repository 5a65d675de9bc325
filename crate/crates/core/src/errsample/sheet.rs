//! CSV forms of annotation sheets, category counts and prevalence tables.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use crate::errsample::{AnnotatedSheet, ErrorCategory, ErrorClass, ErrorRecord, Hints, PrevalenceKey, SheetRow};
use crate::error::{Error, Result};
use crate::spanops::SpanSet;

const FIXED: [&str; 13] = [
    "id",
    "method",
    "text",
    "gold_spans",
    "pred_spans",
    "category",
    "precision",
    "recall",
    "f1_plus",
    "gold_empty",
    "hint_subword",
    "hint_missing_suffix",
    "annotated",
];

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn truthy(s: &str) -> bool {
    matches!(s.trim().to_ascii_lowercase().as_str(), "1" | "x" | "y" | "yes" | "true")
}

/// Writes the sheet with one blank column per error class for annotators
/// to mark.
pub fn write_sheet<W: Write>(sheet: &AnnotatedSheet, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = FIXED.to_vec();
    header.extend(ErrorClass::ALL.iter().map(|c| c.as_str()));
    w.write_record(&header)?;
    for row in &sheet.rows {
        let r = &row.record;
        let mut rec = vec![
            r.sample_id.clone(),
            r.method.clone(),
            r.text.clone(),
            serde_json::to_string(&r.gold)?,
            serde_json::to_string(&r.pred)?,
            r.category.map(|c| c.as_str().to_string()).unwrap_or_default(),
            r.precision.to_string(),
            r.recall.to_string(),
            r.f1_plus.to_string(),
            flag(r.gold_empty()).into(),
            flag(row.hints.subword).into(),
            flag(row.hints.missing_suffix).into(),
            if row.annotated { "1".into() } else { String::new() },
        ];
        rec.extend(ErrorClass::ALL.iter().map(|c| if row.classes.contains(c) { "1".to_string() } else { String::new() }));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an annotated sheet. A row counts as annotated when its
/// `annotated` cell is set or any class is marked.
pub fn read_sheet<R: Read>(reader: R, source_name: &str) -> Result<Vec<SheetRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::record(source_name, 1, format!("missing column {name:?}")))
    };
    let fixed: Vec<usize> = FIXED.iter().map(|n| col(n)).collect::<Result<_>>()?;
    let classes: Vec<(ErrorClass, usize)> =
        ErrorClass::ALL.iter().map(|&c| col(c.as_str()).map(|i| (c, i))).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(n as u64 + 2, |p| p.line());
        let line = usize::try_from(line).unwrap_or(usize::MAX);
        let bad = |msg: String| Error::record(source_name, line, msg);
        let get = |k: usize| rec.get(fixed[k]).unwrap_or("");
        let float = |k: usize| -> Result<f64> {
            get(k).trim().parse::<f64>().map_err(|e| bad(format!("{}: {e}", FIXED[k])))
        };
        let spans = |k: usize| -> Result<SpanSet> {
            serde_json::from_str(get(k)).map_err(|e| bad(format!("{}: {e}", FIXED[k])))
        };
        let id = get(0).to_string();
        if !seen.insert((get(1).to_string(), id.clone())) {
            return Err(bad(format!("duplicate record {id:?}")));
        }
        let category = match get(5).trim() {
            "" => None,
            s => Some(s.parse::<ErrorCategory>().map_err(|e| bad(e.to_string()))?),
        };
        let marked: BTreeSet<ErrorClass> =
            classes.iter().filter(|(_, i)| truthy(rec.get(*i).unwrap_or(""))).map(|(c, _)| *c).collect();
        rows.push(SheetRow {
            record: ErrorRecord {
                sample_id: id,
                method: get(1).to_string(),
                text: get(2).to_string(),
                gold: spans(3)?,
                pred: spans(4)?,
                category,
                precision: float(6)?,
                recall: float(7)?,
                f1_plus: float(8)?,
            },
            hints: Hints {
                subword: truthy(get(10)),
                missing_suffix: truthy(get(11)),
            },
            annotated: truthy(get(12)) || !marked.is_empty(),
            classes: marked,
        });
    }
    Ok(rows)
}

/// Category sizes per method: columns `method,category,count`.
pub fn write_category_counts<W: Write>(counts: &BTreeMap<String, BTreeMap<ErrorCategory, usize>>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["method", "category", "count"])?;
    for (method, per) in counts {
        for cat in ErrorCategory::ALL {
            w.write_record([method.as_str(), cat.as_str(), &per.get(&cat).copied().unwrap_or(0).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_category_counts<R: Read>(reader: R, source_name: &str) -> Result<BTreeMap<String, BTreeMap<ErrorCategory, usize>>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out: BTreeMap<String, BTreeMap<ErrorCategory, usize>> = BTreeMap::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |msg: String| Error::record(source_name, n + 2, msg);
        if rec.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", rec.len())));
        }
        let cat: ErrorCategory = rec[1].parse().map_err(|e: Error| bad(e.to_string()))?;
        let count: usize = rec[2].trim().parse().map_err(|e| bad(format!("count: {e}")))?;
        out.entry(rec[0].to_string()).or_default().insert(cat, count);
    }
    Ok(out)
}

/// Prevalence of every class and aggregate, one column per method.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PrevalenceTable {
    pub columns: Vec<(String, BTreeMap<PrevalenceKey, f64>)>,
}

impl PrevalenceTable {
    #[must_use]
    pub fn get(&self, method: &str, key: PrevalenceKey) -> Option<f64> {
        self.columns.iter().find(|(m, _)| m == method).and_then(|(_, v)| v.get(&key).copied())
    }
}

pub fn write_prevalence_csv<W: Write>(table: &PrevalenceTable, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["class".to_string()];
    header.extend(table.columns.iter().map(|(m, _)| m.clone()));
    w.write_record(&header)?;
    for key in PrevalenceKey::all() {
        let mut rec = vec![key.label().to_string()];
        rec.extend(
            table
                .columns
                .iter()
                .map(|(_, v)| v.get(&key).map(|x| format!("{x:.6}")).unwrap_or_default()),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
