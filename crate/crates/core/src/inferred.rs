//! Message-level gating of span predictions, plus the JSON Lines formats
//! for binary predictions (`{"id", "toxic"}`) and span predictions
//! (`{"id", "spans"}`) produced by external systems.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::lexicon::Matcher;
use crate::spanops::SpanSet;
use crate::Predictions;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryPrediction {
    #[serde(rename = "id")]
    pub sample_id: String,
    pub toxic: bool,
}

pub type BinaryMap = BTreeMap<String, BinaryPrediction>;

fn read_jsonl<R, T, F>(reader: R, source_name: &str, id_of: F) -> Result<BTreeMap<String, T>>
where
    R: BufRead,
    T: serde::de::DeserializeOwned,
    F: Fn(&T) -> &str,
{
    let mut out = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: T = serde_json::from_str(&line).map_err(|e| Error::record(source_name, i + 1, e.to_string()))?;
        let id = id_of(&rec).to_string();
        if out.insert(id.clone(), rec).is_some() {
            return Err(Error::DuplicateId(id));
        }
    }
    Ok(out)
}

pub fn load_binary<R: BufRead>(reader: R, source_name: &str) -> Result<BinaryMap> {
    read_jsonl(reader, source_name, |b: &BinaryPrediction| &b.sample_id)
}

pub fn write_binary<W: Write>(binary: &BinaryMap, mut writer: W) -> Result<()> {
    for b in binary.values() {
        serde_json::to_writer(&mut writer, b)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct SpanRecord {
    id: String,
    spans: SpanSet,
}

pub fn read_span_predictions<R: BufRead>(reader: R, source_name: &str) -> Result<Predictions> {
    let recs = read_jsonl(reader, source_name, |r: &SpanRecord| &r.id)?;
    Ok(recs.into_iter().map(|(id, r)| (id, r.spans)).collect())
}

pub fn write_span_predictions<W: Write>(predictions: &Predictions, mut writer: W) -> Result<()> {
    for (id, spans) in predictions {
        let rec = SpanRecord {
            id: id.clone(),
            spans: spans.clone(),
        };
        serde_json::to_writer(&mut writer, &rec)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Empties the spans of every text the binary classifier calls non-toxic.
pub fn gate(spans: &Predictions, binary: &BinaryMap) -> Result<Predictions> {
    spans
        .iter()
        .map(|(id, s)| {
            let b = binary.get(id).ok_or_else(|| Error::Missing {
                what: "binary prediction",
                id: id.clone(),
            })?;
            Ok((id.clone(), if b.toxic { s.clone() } else { SpanSet::empty() }))
        })
        .collect()
}

/// Binary predictions from lexicon matches: toxic iff any span is found.
#[must_use]
pub fn lexicon_binary(dataset: &Dataset, matcher: &Matcher) -> BinaryMap {
    dataset
        .iter()
        .map(|s| {
            let toxic = matcher.is_match(&s.text);
            (
                s.id.clone(),
                BinaryPrediction {
                    sample_id: s.id.clone(),
                    toxic,
                },
            )
        })
        .collect()
}

/// Binary predictions equal to the gold labels.
#[must_use]
pub fn gold_binary(dataset: &Dataset) -> BinaryMap {
    dataset
        .iter()
        .map(|s| {
            (
                s.id.clone(),
                BinaryPrediction {
                    sample_id: s.id.clone(),
                    toxic: s.toxic,
                },
            )
        })
        .collect()
}
