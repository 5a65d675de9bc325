//! Sample and dataset types, ingestion of the supported source formats,
//! dataset statistics and non-toxic supplementation.

mod canonical;
mod hatexplain;
mod semeval;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spanops::{char_len, SpanSet};

pub use canonical::{read_canonical, write_canonical, SCHEMA};
pub use hatexplain::{ingest_hatexplain, read_divisions, HateXplainIngest};
pub use semeval::ingest_semeval;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    #[must_use]
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" | "val" | "validation" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::Invalid(format!("unknown split {other:?}"))),
        }
    }
}

/// One text with its message-level label and gold toxic spans.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub text: String,
    pub toxic: bool,
    #[serde(rename = "spans")]
    pub gold_spans: SpanSet,
    pub split: Split,
}

impl Sample {
    /// Checks that spans lie inside the text and that non-toxic samples
    /// carry no spans.
    pub fn validate(&self) -> Result<()> {
        let len = char_len(&self.text);
        if self.gold_spans.end() > len {
            return Err(Error::OffsetOutOfRange {
                id: self.id.clone(),
                offset: self.gold_spans.end() - 1,
                len,
            });
        }
        if !self.toxic && !self.gold_spans.is_empty() {
            return Err(Error::InvalidSample {
                id: self.id.clone(),
                message: "non-toxic sample carries gold spans".into(),
            });
        }
        Ok(())
    }

    #[must_use]
    pub fn char_len(&self) -> usize {
        char_len(&self.text)
    }
}

/// An ordered collection of samples with unique ids.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub name: String,
    pub provenance: String,
    samples: Vec<Sample>,
    index: HashMap<String, usize>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.provenance == other.provenance && self.samples == other.samples
    }
}

impl Dataset {
    pub fn new(name: impl Into<String>, samples: Vec<Sample>, provenance: impl Into<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            s.validate()?;
            if index.insert(s.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(s.id.clone()));
            }
        }
        Ok(Self {
            name: name.into(),
            provenance: provenance.into(),
            samples,
            index,
        })
    }

    #[must_use]
    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    #[must_use]
    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    #[must_use]
    pub fn get(&self, id: &str) -> Option<&Sample> {
        self.index.get(id).map(|&i| &self.samples[i])
    }

    #[must_use]
    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sample> {
        self.samples.iter()
    }

    /// The samples tagged with `split`, as a dataset of their own.
    #[must_use]
    pub fn split(&self, split: Split) -> Dataset {
        let samples: Vec<Sample> = self.samples.iter().filter(|s| s.split == split).cloned().collect();
        let index = samples.iter().enumerate().map(|(i, s)| (s.id.clone(), i)).collect();
        Dataset {
            name: format!("{}/{}", self.name, split),
            provenance: self.provenance.clone(),
            samples,
            index,
        }
    }

    /// Concatenates datasets; ids must stay unique.
    pub fn concat(name: impl Into<String>, parts: impl IntoIterator<Item = Dataset>) -> Result<Dataset> {
        let mut samples = Vec::new();
        let mut prov = Vec::new();
        for p in parts {
            if !p.provenance.is_empty() && !prov.contains(&p.provenance) {
                prov.push(p.provenance.clone());
            }
            samples.extend(p.samples);
        }
        Dataset::new(name, samples, prov.join("; "))
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Sample;
    type IntoIter = std::slice::Iter<'a, Sample>;

    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}

/// Per-split label/span composition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub count: usize,
    pub toxic_with_span: f64,
    pub toxic_without_span: f64,
    pub nontoxic: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    /// `None` for splits without samples.
    pub splits: BTreeMap<Split, Option<SplitStats>>,
    /// Mean fraction of characters inside gold spans, over toxic samples.
    pub span_pct: Option<f64>,
    /// The same mean restricted to samples that have at least one span.
    pub span_pct_spanned: Option<f64>,
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

#[must_use]
pub fn compute_stats(dataset: &Dataset) -> DatasetStats {
    let mut splits = BTreeMap::new();
    for split in Split::ALL {
        let (mut n, mut with, mut without, mut non) = (0usize, 0usize, 0usize, 0usize);
        for s in dataset.iter().filter(|s| s.split == split) {
            n += 1;
            match (s.toxic, s.gold_spans.is_empty()) {
                (true, false) => with += 1,
                (true, true) => without += 1,
                (false, _) => non += 1,
            }
        }
        let stats = (n > 0).then(|| SplitStats {
            count: n,
            toxic_with_span: with as f64 / n as f64,
            toxic_without_span: without as f64 / n as f64,
            nontoxic: non as f64 / n as f64,
        });
        splits.insert(split, stats);
    }

    let mut all = Vec::new();
    let mut spanned = Vec::new();
    for s in dataset.iter().filter(|s| s.toxic) {
        let len = s.char_len();
        if len == 0 {
            continue;
        }
        let frac = s.gold_spans.len() as f64 / len as f64;
        all.push(frac);
        if !s.gold_spans.is_empty() {
            spanned.push(frac);
        }
    }
    DatasetStats {
        splits,
        span_pct: mean(&all),
        span_pct_spanned: mean(&spanned),
    }
}

/// Adds seeded uniform draws from `pool` until every split has as many
/// non-toxic as toxic samples. Drawn samples are re-tagged with the split
/// they fill; no pool sample is drawn twice. Splits that already have at
/// least as many non-toxic samples are left alone.
pub fn balance_binary(dataset: &Dataset, pool: &Dataset, seed: u64) -> Result<Dataset> {
    for s in pool {
        if s.toxic || !s.gold_spans.is_empty() {
            return Err(Error::InvalidSample {
                id: s.id.clone(),
                message: "pool samples must be non-toxic without spans".into(),
            });
        }
        if dataset.contains(&s.id) {
            return Err(Error::DuplicateId(s.id.clone()));
        }
    }

    let mut needs: Vec<(Split, usize)> = Vec::new();
    for split in Split::ALL {
        let toxic = dataset.iter().filter(|s| s.split == split && s.toxic).count();
        let non = dataset.iter().filter(|s| s.split == split && !s.toxic).count();
        if toxic > non {
            needs.push((split, toxic - non));
        }
    }
    let total: usize = needs.iter().map(|(_, n)| n).sum();
    if total == 0 {
        return Ok(dataset.clone());
    }
    if total > pool.len() {
        let mut remaining = pool.len();
        let report: Vec<String> = needs
            .iter()
            .filter_map(|&(split, need)| {
                let got = need.min(remaining);
                remaining -= got;
                (got < need).then(|| format!("{split}: short by {}", need - got))
            })
            .collect();
        return Err(Error::PoolTooSmall(format!(
            "need {total}, pool has {} ({})",
            pool.len(),
            report.join(", ")
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drawn = index::sample(&mut rng, pool.len(), total).into_vec();
    let mut samples = dataset.samples.clone();
    let mut cursor = drawn.into_iter();
    for (split, need) in needs {
        for i in cursor.by_ref().take(need) {
            let mut s = pool.samples[i].clone();
            s.split = split;
            samples.push(s);
        }
    }
    let provenance = if pool.provenance.is_empty() {
        dataset.provenance.clone()
    } else {
        format!("{}; balanced with {} (seed {seed})", dataset.provenance, pool.provenance)
    };
    Dataset::new(dataset.name.clone(), samples, provenance)
}
