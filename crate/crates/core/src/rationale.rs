//! Span prediction from per-token attribution scores.
//!
//! Scores are produced elsewhere (any input-attribution method over a
//! binary toxicity classifier) and arrive as JSON Lines records:
//! `{"id": str, "method": str, "tokens": [[start, end, score], ...]}`
//! with character offsets into the sample text.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::spanops::{char_len, Span, SpanSet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, f64)", into = "(usize, usize, f64)")]
pub struct ScoredToken {
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

impl From<(usize, usize, f64)> for ScoredToken {
    fn from((start, end, score): (usize, usize, f64)) -> Self {
        Self { start, end, score }
    }
}

impl From<ScoredToken> for (usize, usize, f64) {
    fn from(t: ScoredToken) -> Self {
        (t.start, t.end, t.score)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenScores {
    #[serde(rename = "id")]
    pub sample_id: String,
    #[serde(rename = "method", default)]
    pub method_name: String,
    pub tokens: Vec<ScoredToken>,
}

impl TokenScores {
    /// Token ranges must be non-empty, sorted and non-overlapping.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let mut prev_end = 0;
        for (i, t) in self.tokens.iter().enumerate() {
            if t.start >= t.end {
                return Err(format!("token {i} has empty range [{}, {})", t.start, t.end));
            }
            if i > 0 && t.start < prev_end {
                return Err(format!("token {i} overlaps or precedes the previous token"));
            }
            if !t.score.is_finite() {
                return Err(format!("token {i} has non-finite score"));
            }
            prev_end = t.end;
        }
        Ok(())
    }

    /// Checks the token ranges against the sample text length.
    pub fn validate_text(&self, text: &str) -> Result<()> {
        let len = char_len(text);
        match self.tokens.last() {
            Some(t) if t.end > len => Err(Error::OffsetOutOfRange {
                id: self.sample_id.clone(),
                offset: t.end - 1,
                len,
            }),
            _ => Ok(()),
        }
    }
}

pub type ScoreMap = BTreeMap<String, TokenScores>;

pub fn load_scores<R: BufRead>(reader: R, source_name: &str) -> Result<ScoreMap> {
    let mut out = ScoreMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TokenScores =
            serde_json::from_str(&line).map_err(|e| Error::record(source_name, i + 1, e.to_string()))?;
        rec.validate()
            .map_err(|m| Error::record(source_name, i + 1, format!("{}: {m}", rec.sample_id)))?;
        if out.contains_key(&rec.sample_id) {
            return Err(Error::DuplicateId(rec.sample_id));
        }
        out.insert(rec.sample_id.clone(), rec);
    }
    Ok(out)
}

/// Loads scores and checks every record against the dataset texts.
pub fn load_scores_for<R: BufRead>(reader: R, source_name: &str, dataset: &Dataset) -> Result<ScoreMap> {
    let scores = load_scores(reader, source_name)?;
    for rec in scores.values() {
        let sample = dataset
            .get(&rec.sample_id)
            .ok_or_else(|| Error::UnknownId(rec.sample_id.clone()))?;
        rec.validate_text(&sample.text)?;
    }
    Ok(scores)
}

pub fn write_scores<'a, W: Write>(scores: impl IntoIterator<Item = &'a TokenScores>, mut writer: W) -> Result<()> {
    for rec in scores {
        serde_json::to_writer(&mut writer, rec)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Sums with magnitude at or below this are treated as zero.
pub const DEGENERATE_SUM: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Normalized {
    pub scores: TokenScores,
    /// Set when the raw scores summed to (near) zero and were zeroed out.
    pub degenerate: bool,
}

/// Rescales raw scores to sum to 1. Near-zero sums zero every score.
#[must_use]
pub fn normalize(scores: &TokenScores) -> Normalized {
    let sum: f64 = scores.tokens.iter().map(|t| t.score).sum();
    let degenerate = sum.abs() <= DEGENERATE_SUM;
    let tokens = scores
        .tokens
        .iter()
        .map(|t| ScoredToken {
            score: if degenerate { 0.0 } else { t.score / sum },
            ..*t
        })
        .collect();
    Normalized {
        scores: TokenScores {
            tokens,
            ..scores.clone()
        },
        degenerate,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub tau: f64,
}

/// Union of the ranges of tokens scoring strictly above `tau`.
#[must_use]
pub fn threshold_to_spans(scores: &TokenScores, cfg: ThresholdConfig) -> SpanSet {
    SpanSet::from_ranges(
        scores
            .tokens
            .iter()
            .filter(|t| t.score > cfg.tau)
            .map(|t| Span::new(t.start, t.end))
            .collect::<Vec<_>>(),
    )
}
