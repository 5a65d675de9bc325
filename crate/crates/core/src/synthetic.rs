//! Seeded synthetic corpora for tests, demos and the bundled fixtures.
//!
//! Two small "domains" share part of their abusive vocabulary so that
//! cross-domain transfer is visibly worse than in-domain. Every text holds
//! at most one entry of [`mini_wordlist`], so wordlist predictions never
//! contain two spans for fill-chars to merge.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{write_canonical, Dataset, Sample, Split};
use crate::error::Result;
use crate::harness::InputKey;
use crate::inferred::{write_binary, BinaryMap, BinaryPrediction};
use crate::lexicon::{write_lexicon, Lexicon};
use crate::rationale::{write_scores, ScoreMap, ScoredToken, TokenScores};
use crate::spanops::{tokenize, Span, SpanSet};

/// Vocabulary of one synthetic domain.
#[derive(Clone, Debug)]
pub struct DomainStyle {
    pub name: &'static str,
    /// Insults that appear in the shared wordlist.
    pub listed: &'static [&'static str],
    /// Domain-specific insults missing from the wordlist.
    pub unlisted: &'static [&'static str],
    pub modifiers: &'static [&'static str],
    pub leads: &'static [&'static str],
    pub tails: &'static [&'static str],
    pub neutral: &'static [&'static str],
}

pub const ALPHA: DomainStyle = DomainStyle {
    name: "alpha",
    listed: &["idiot", "moron", "stupid", "loser"],
    unlisted: &["clown", "pathetic", "braindead"],
    modifiers: &["total", "complete", "absolute"],
    leads: &["honestly the ref is a", "that player is a", "what a", "the coach is such a"],
    tails: &["after that match", "every single week", "in the second half", "lol"],
    neutral: &[
        "great goal in the last minute",
        "the new signing looks sharp",
        "tickets for sunday are sold out",
        "the keeper made two good saves",
        "i think we win the league this year",
        "the pitch was wet after the rain",
        "nice assist from the left back",
        "the manager praised the young squad",
    ],
};

pub const BETA: DomainStyle = DomainStyle {
    name: "beta",
    listed: &["idiot", "scum", "vile", "loser"],
    unlisted: &["filth", "degenerate", "parasite"],
    modifiers: &["utter", "disgusting", "worthless"],
    leads: &["these people are", "you are an", "look at this", "only a"],
    tails: &["and everyone knows it", "go away", "never again", "seriously"],
    neutral: &[
        "thanks for sharing the recipe",
        "my cat slept all afternoon",
        "the bus was late again today",
        "happy birthday to my sister",
        "we planted tomatoes in the garden",
        "the museum opens at nine",
        "this song reminds me of summer",
        "our team finished the project early",
    ],
};

/// The stand-in off-the-shelf wordlist shared by both domains.
#[must_use]
pub fn mini_wordlist() -> Lexicon {
    Lexicon::from_words("mini-wordlist", ["idiot", "moron", "stupid", "loser", "scum", "vile"])
}

#[must_use]
pub fn style(name: &str) -> Option<&'static DomainStyle> {
    [&ALPHA, &BETA].into_iter().find(|s| s.name == name)
}

struct Builder {
    text: String,
    len: usize,
    spans: Vec<Span>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            text: String::new(),
            len: 0,
            spans: Vec::new(),
        }
    }

    fn push(&mut self, piece: &str, toxic: bool) {
        if !self.text.is_empty() {
            self.text.push(' ');
            self.len += 1;
        }
        let start = self.len;
        self.text.push_str(piece);
        self.len += piece.chars().count();
        if toxic {
            self.spans.push(Span::new(start, self.len));
        }
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).copied().expect("non-empty vocabulary")
}

fn toxic_text(style: &DomainStyle, rng: &mut ChaCha8Rng) -> (String, SpanSet) {
    let mut b = Builder::new();
    b.push(pick(rng, style.leads), false);
    let word = if rng.gen_bool(0.7) {
        pick(rng, style.listed)
    } else {
        pick(rng, style.unlisted)
    };
    if rng.gen_bool(0.4) {
        let phrase = format!("{} {}", pick(rng, style.modifiers), word);
        b.push(&phrase, true);
    } else {
        b.push(word, true);
    }
    if rng.gen_bool(0.3) {
        b.push("and", false);
        b.push(pick(rng, style.unlisted), true);
    }
    b.push(pick(rng, style.tails), false);
    (b.text, SpanSet::from_ranges(b.spans))
}

fn neutral_text(style: &DomainStyle, rng: &mut ChaCha8Rng) -> String {
    let mut b = Builder::new();
    b.push(pick(rng, style.neutral), false);
    if rng.gen_bool(0.15) {
        b.push("but that was a", false);
        b.push(pick(rng, style.listed), false);
        b.push("mistake", false);
    }
    if rng.gen_bool(0.3) {
        b.push(pick(rng, style.tails), false);
    }
    b.text
}

/// A 200-sample domain: 120 train, 40 dev, 40 test; about 60% toxic, a
/// few toxic samples without spans.
pub fn mini_domain(style: &DomainStyle, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(200);
    for (split, n) in [(Split::Train, 120), (Split::Dev, 40), (Split::Test, 40)] {
        for i in 0..n {
            let toxic = rng.gen_bool(0.6);
            let (text, gold_spans) = if toxic {
                let (t, s) = toxic_text(style, &mut rng);
                if rng.gen_bool(0.08) {
                    (t, SpanSet::empty())
                } else {
                    (t, s)
                }
            } else {
                (neutral_text(style, &mut rng), SpanSet::empty())
            };
            samples.push(Sample {
                id: format!("{}-{}-{i:03}", style.name, split.as_str()),
                text,
                toxic,
                gold_spans,
                split,
            });
        }
    }
    Dataset::new(style.name, samples, "synthetic")
}

/// Token importance scores imitating a classifier trained on `train`:
/// words from that domain's abusive vocabulary score high, the rest low,
/// both with noise.
#[must_use]
pub fn mini_scores(train: &DomainStyle, eval: &Dataset, seed: u64) -> ScoreMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    eval.iter()
        .map(|s| {
            let tokens = tokenize(&s.text)
                .into_iter()
                .map(|t| {
                    let w = t.surface.to_lowercase();
                    let base = if train.listed.contains(&w.as_str()) || train.unlisted.contains(&w.as_str()) {
                        2.0
                    } else if train.modifiers.contains(&w.as_str()) {
                        0.6
                    } else {
                        0.1
                    };
                    ScoredToken {
                        start: t.start,
                        end: t.end,
                        score: base + rng.gen_range(-0.1..0.4),
                    }
                })
                .collect();
            let scores = TokenScores {
                sample_id: s.id.clone(),
                method_name: "synthetic-attribution".into(),
                tokens,
            };
            (s.id.clone(), scores)
        })
        .collect()
}

/// Message-level predictions agreeing with gold except for a seeded
/// fraction of flips.
#[must_use]
pub fn mini_binary(eval: &Dataset, flip_rate: f64, seed: u64) -> BinaryMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    eval.iter()
        .map(|s| {
            let flip = rng.gen_bool(flip_rate);
            (
                s.id.clone(),
                BinaryPrediction {
                    sample_id: s.id.clone(),
                    toxic: s.toxic != flip,
                },
            )
        })
        .collect()
}

/// Short texts over a tiny vocabulary with random word-aligned spans,
/// for exercising lexicon induction.
pub fn lexicon_fixture(n: usize, seed: u64) -> Result<Dataset> {
    const VOCAB: [&str; 12] = ["you", "are", "a", "dumb", "rat", "nice", "day", "so", "Dumb", "ugly", "cat", "go"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|i| {
            let mut b = Builder::new();
            for _ in 0..rng.gen_range(1..=8) {
                let w = pick(&mut rng, &VOCAB);
                let p = if matches!(w, "dumb" | "Dumb" | "rat" | "ugly") { 0.7 } else { 0.15 };
                b.push(w, rng.gen_bool(p));
            }
            // Occasionally cover only part of a word.
            if rng.gen_bool(0.2) {
                if let Some(last) = b.spans.last_mut() {
                    if last.len() > 1 {
                        last.end -= 1;
                    }
                }
            }
            Sample {
                id: format!("lex-{i:03}"),
                toxic: true,
                gold_spans: SpanSet::from_ranges(b.spans),
                text: b.text,
                split: Split::Train,
            }
        })
        .collect();
    Dataset::new("lexicon-fixture", samples, "synthetic")
}

/// Base seed of each generated artifact.
pub const MINI_SEED: u64 = 20_220_601;

/// Every cell of a two-domain experiment that needs external inputs.
#[must_use]
pub fn mini_cells(names: &[&str]) -> Vec<InputKey> {
    let mut keys = Vec::new();
    for &t in names {
        keys.push(InputKey::new(t, t, Split::Dev));
        keys.push(InputKey::new(t, t, Split::Test));
        for &e in names.iter().filter(|&&e| e != t) {
            keys.push(InputKey::new(t, e, Split::Test));
        }
    }
    keys
}

fn cell_seed(key: &InputKey) -> u64 {
    let tag = format!("{key}");
    tag.bytes().fold(MINI_SEED, |h, b| h.wrapping_mul(1_099_511_628_211).wrapping_add(u64::from(b)))
}

/// The generated mini corpora and their derived inputs.
pub struct MiniCorpus {
    pub domains: Vec<Dataset>,
    pub wordlist: Lexicon,
    pub scores: BTreeMap<InputKey, ScoreMap>,
    pub binary_by_cell: BTreeMap<InputKey, BinaryMap>,
}

pub fn mini_corpus() -> Result<MiniCorpus> {
    let domains = vec![mini_domain(&ALPHA, MINI_SEED)?, mini_domain(&BETA, MINI_SEED + 1)?];
    let names: Vec<&str> = domains.iter().map(|d| d.name.as_str()).collect();
    let mut scores = BTreeMap::new();
    let mut binary_by_cell = BTreeMap::new();
    for key in mini_cells(&names) {
        let eval = domains.iter().find(|d| d.name == key.eval).expect("known domain").split(key.split);
        let train = style(&key.train).expect("known style");
        let seed = cell_seed(&key);
        let flip = if key.train == key.eval { 0.05 } else { 0.2 };
        scores.insert(key.clone(), mini_scores(train, &eval, seed));
        binary_by_cell.insert(key, mini_binary(&eval, flip, seed ^ 1));
    }
    Ok(MiniCorpus {
        domains,
        wordlist: mini_wordlist(),
        scores,
        binary_by_cell,
    })
}

fn file_name(key: &InputKey) -> String {
    format!("{}-{}-{}.jsonl", key.train, key.eval, key.split)
}

/// Writes the mini corpora under `dir`: `<domain>.jsonl`, `wordlist.txt`,
/// `scores/<train>-<eval>-<split>.jsonl` and `binary/...` likewise.
pub fn write_mini_corpus(dir: &Path) -> Result<()> {
    let mini = mini_corpus()?;
    fs::create_dir_all(dir.join("scores"))?;
    fs::create_dir_all(dir.join("binary"))?;
    for d in &mini.domains {
        write_canonical(d, BufWriter::new(fs::File::create(dir.join(format!("{}.jsonl", d.name)))?))?;
    }
    write_lexicon(&mini.wordlist, BufWriter::new(fs::File::create(dir.join("wordlist.txt"))?))?;
    for (key, s) in &mini.scores {
        write_scores(s.values(), BufWriter::new(fs::File::create(dir.join("scores").join(file_name(key)))?))?;
    }
    for (key, b) in &mini.binary_by_cell {
        write_binary(b, BufWriter::new(fs::File::create(dir.join("binary").join(file_name(key)))?))?;
    }
    Ok(())
}
