use std::collections::HashMap;
use std::io::Read;

use log::warn;
use serde::Deserialize;
use serde_json::Value;

use crate::corpus::{Dataset, Sample, Split};
use crate::error::{Error, Result};
use crate::spanops::{char_len, Span, SpanSet};

#[derive(Debug, Deserialize)]
struct Annotator {
    label: String,
}

#[derive(Debug, Deserialize)]
struct Record {
    post_id: String,
    annotators: Vec<Annotator>,
    #[serde(default)]
    rationales: Vec<Vec<u8>>,
    post_tokens: Vec<String>,
}

/// Result of a HateXplain ingest: the dataset plus ids of records dropped
/// because their annotators had no majority class.
#[derive(Debug)]
pub struct HateXplainIngest {
    pub dataset: Dataset,
    pub dropped: Vec<String>,
}

fn is_toxic_label(label: &str, post_id: &str, pos: usize, name: &str) -> Result<bool> {
    match label {
        "hatespeech" | "offensive" => Ok(true),
        "normal" => Ok(false),
        other => Err(Error::record(name, pos, format!("{post_id}: unknown class label {other:?}"))),
    }
}

/// Unique most frequent class label, `None` on a tie.
fn majority<'a>(labels: impl Iterator<Item = &'a str>) -> Option<&'a str> {
    let mut counts: Vec<(&str, usize)> = Vec::new();
    for l in labels {
        match counts.iter_mut().find(|(k, _)| *k == l) {
            Some((_, c)) => *c += 1,
            None => counts.push((l, 1)),
        }
    }
    let top = counts.iter().map(|&(_, c)| c).max()?;
    let mut winners = counts.iter().filter(|&&(_, c)| c == top);
    let first = winners.next()?.0;
    winners.next().is_none().then_some(first)
}

/// Reads the published HateXplain JSON layout: an object keyed by post id
/// (an array of records is accepted too).
///
/// Text is rebuilt by joining `post_tokens` with single spaces, and a
/// token is inside the gold span when the mean of the annotators'
/// rationale bits for it is at least 0.5. `split_of` assigns each post id
/// to a split; posts it maps to `None` are skipped.
pub fn ingest_hatexplain<R, F>(reader: R, split_of: F, name: &str) -> Result<HateXplainIngest>
where
    R: Read,
    F: Fn(&str) -> Option<Split>,
{
    let root: Value = serde_json::from_reader(reader)?;
    let values: Vec<Value> = match root {
        Value::Object(map) => map.into_iter().map(|(_, v)| v).collect(),
        Value::Array(items) => items,
        _ => return Err(Error::record(name, 1, "expected a JSON object or array of records")),
    };

    let mut samples = Vec::new();
    let mut dropped = Vec::new();
    for (i, value) in values.into_iter().enumerate() {
        let pos = i + 1;
        let rec: Record = serde_json::from_value(value).map_err(|e| Error::record(name, pos, e.to_string()))?;
        let Some(split) = split_of(&rec.post_id) else {
            continue;
        };
        let n = rec.post_tokens.len();
        if let Some(bad) = rec.rationales.iter().find(|r| r.len() != n) {
            return Err(Error::record(
                name,
                pos,
                format!("{}: rationale length {} != token count {n}", rec.post_id, bad.len()),
            ));
        }
        let Some(label) = majority(rec.annotators.iter().map(|a| a.label.as_str())) else {
            warn!("{name}: dropping {} (no majority class)", rec.post_id);
            dropped.push(rec.post_id);
            continue;
        };
        let toxic = is_toxic_label(label, &rec.post_id, pos, name)?;

        let text = rec.post_tokens.join(" ");
        let mut spans = Vec::new();
        if toxic && !rec.rationales.is_empty() {
            let raters = rec.rationales.len() as f64;
            let mut start = 0;
            for (t, tok) in rec.post_tokens.iter().enumerate() {
                let len = char_len(tok);
                let votes: f64 = rec.rationales.iter().map(|r| f64::from(r[t])).sum();
                if votes / raters >= 0.5 {
                    spans.push(Span::new(start, start + len));
                }
                start += len + 1;
            }
        }
        samples.push(Sample {
            id: rec.post_id,
            text,
            toxic,
            gold_spans: SpanSet::from_ranges(spans),
            split,
        });
    }
    let dataset = Dataset::new(name, samples, "hatexplain json")?;
    Ok(HateXplainIngest { dataset, dropped })
}

/// Reads `post_id_divisions.json` (`{"train": [...], "val": [...], "test": [...]}`).
pub fn read_divisions<R: Read>(reader: R) -> Result<HashMap<String, Split>> {
    let raw: HashMap<String, Vec<String>> = serde_json::from_reader(reader)?;
    let mut out = HashMap::new();
    for (key, ids) in raw {
        let split: Split = key.parse()?;
        for id in ids {
            if out.insert(id.clone(), split).is_some() {
                return Err(Error::DuplicateId(id));
            }
        }
    }
    Ok(out)
}
