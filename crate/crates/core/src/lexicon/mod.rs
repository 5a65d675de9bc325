//! Lexicon induction from span-annotated text, word-list loading, and
//! span prediction by string matching.

mod matcher;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::spanops::{Tokenizer, WordTokenizer};

pub use matcher::{predict, MatchMode, MatchScope, Matcher};

/// When a token occurrence counts as being inside a gold span.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InSpanRule {
    /// Strictly more than half of the token's characters are in a span.
    #[default]
    MajorityChars,
    AnyOverlap,
    FullContainment,
}

impl InSpanRule {
    fn holds(self, covered: usize, len: usize) -> bool {
        match self {
            InSpanRule::MajorityChars => 2 * covered > len,
            InSpanRule::AnyOverlap => covered > 0,
            InSpanRule::FullContainment => covered == len,
        }
    }
}

impl std::str::FromStr for InSpanRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "majority_chars" | "majority" => Ok(InSpanRule::MajorityChars),
            "any_overlap" | "any" => Ok(InSpanRule::AnyOverlap),
            "full_containment" | "full" => Ok(InSpanRule::FullContainment),
            other => Err(Error::Invalid(format!("unknown in-span rule {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordStats {
    pub word: String,
    pub total_count: usize,
    pub in_span_count: usize,
}

/// Fraction of a word's occurrences that fall inside gold spans.
pub fn toxicity_score(stats: &WordStats) -> Result<f64> {
    if stats.total_count == 0 {
        return Err(Error::Invalid(format!("word {:?} has no occurrences", stats.word)));
    }
    Ok(stats.in_span_count as f64 / stats.total_count as f64)
}

/// Lowercased token counts over every sample of `train`.
#[must_use]
pub fn count_word_stats(train: &Dataset, rule: InSpanRule) -> BTreeMap<String, WordStats> {
    count_word_stats_with(train, rule, &WordTokenizer)
}

#[must_use]
pub fn count_word_stats_with(train: &Dataset, rule: InSpanRule, tokenizer: &dyn Tokenizer) -> BTreeMap<String, WordStats> {
    let mut out: BTreeMap<String, WordStats> = BTreeMap::new();
    for sample in train {
        for tok in tokenizer.tokenize(&sample.text) {
            let covered = sample.gold_spans.covered(tok.start, tok.end);
            let word = tok.surface.to_lowercase();
            let entry = out.entry(word.clone()).or_insert(WordStats {
                word,
                total_count: 0,
                in_span_count: 0,
            });
            entry.total_count += 1;
            if rule.holds(covered, tok.end - tok.start) {
                entry.in_span_count += 1;
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LexiconBuildConfig {
    pub theta: f64,
    pub min_occ: usize,
    #[serde(default)]
    pub in_span_rule: InSpanRule,
}

impl LexiconBuildConfig {
    pub fn new(theta: f64, min_occ: usize) -> Result<Self> {
        let cfg = Self {
            theta,
            min_occ,
            in_span_rule: InSpanRule::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Invalid(format!("theta {} outside [0, 1]", self.theta)));
        }
        if self.min_occ == 0 {
            return Err(Error::Invalid("min_occ must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LexiconSource {
    Constructed,
    Wordlist,
}

/// A set of lowercased entries, each with an optional toxicity score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub name: String,
    pub source: LexiconSource,
    entries: BTreeMap<String, Option<f64>>,
}

impl Lexicon {
    /// An unscored word-list lexicon.
    pub fn from_words<'a>(name: &str, words: impl IntoIterator<Item = &'a str>) -> Self {
        let entries = words.into_iter().map(|w| (w.to_lowercase(), None)).collect();
        Self {
            name: name.to_string(),
            source: LexiconSource::Wordlist,
            entries,
        }
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, Option<f64>)> {
        self.entries.iter().map(|(w, s)| (w.as_str(), *s))
    }

    #[must_use]
    pub fn score(&self, word: &str) -> Option<f64> {
        self.entries.get(word).copied().flatten()
    }

    #[must_use]
    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Keeps words seen at least `min_occ` times whose score is strictly
/// above `theta`.
#[must_use]
pub fn lexicon_from_stats<'a>(
    name: &str,
    stats: impl IntoIterator<Item = &'a WordStats>,
    theta: f64,
    min_occ: usize,
) -> Lexicon {
    let entries = stats
        .into_iter()
        .filter(|s| s.total_count >= min_occ && s.total_count > 0)
        .filter_map(|s| {
            let score = s.in_span_count as f64 / s.total_count as f64;
            (score > theta).then(|| (s.word.clone(), Some(score)))
        })
        .collect();
    Lexicon {
        name: name.to_string(),
        source: LexiconSource::Constructed,
        entries,
    }
}

pub fn build_lexicon(train: &Dataset, cfg: &LexiconBuildConfig) -> Result<Lexicon> {
    cfg.validate()?;
    let stats = count_word_stats(train, cfg.in_span_rule);
    Ok(lexicon_from_stats(&train.name, stats.values(), cfg.theta, cfg.min_occ))
}

/// Reads one entry per line with an optional tab-separated score.
/// Entries are lowercased and deduplicated; blank lines are skipped.
pub fn read_lexicon<R: BufRead>(reader: R, name: &str, source: LexiconSource) -> Result<Lexicon> {
    let mut entries: BTreeMap<String, Option<f64>> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let (word, score) = match line.split_once('\t') {
            Some((w, s)) => {
                let score: f64 = s
                    .trim()
                    .parse()
                    .map_err(|_| Error::record(name, i + 1, format!("bad score {:?}", s.trim())))?;
                (w, Some(score))
            }
            None => (line, None),
        };
        let word = word.trim().to_lowercase();
        if word.is_empty() {
            continue;
        }
        let slot = entries.entry(word).or_insert(score);
        if slot.is_none() {
            *slot = score;
        }
    }
    if entries.is_empty() {
        return Err(Error::record(name, 1, "lexicon file has no entries"));
    }
    Ok(Lexicon {
        name: name.to_string(),
        source,
        entries,
    })
}

pub fn load_wordlist<R: BufRead>(reader: R, name: &str) -> Result<Lexicon> {
    read_lexicon(reader, name, LexiconSource::Wordlist)
}

/// Writes `word<TAB>score` lines sorted by descending score, then word.
/// Unscored entries are written as bare words after the scored ones.
pub fn write_lexicon<W: Write>(lexicon: &Lexicon, mut writer: W) -> Result<()> {
    let mut rows: Vec<(&str, Option<f64>)> = lexicon.entries().collect();
    rows.sort_by(|a, b| match (a.1, b.1) {
        (Some(x), Some(y)) => y.total_cmp(&x).then_with(|| a.0.cmp(b.0)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.0.cmp(b.0),
    });
    for (word, score) in rows {
        match score {
            Some(s) => writeln!(writer, "{word}\t{s}")?,
            None => writeln!(writer, "{word}")?,
        }
    }
    writer.flush()?;
    Ok(())
}
