use std::collections::HashSet;

use aho_corasick::{AhoCorasick, AhoCorasickBuilder, MatchKind};
use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::lexicon::Lexicon;
use crate::spanops::{Span, SpanSet, Tokenizer, WordTokenizer};
use crate::Predictions;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchScope {
    /// Any occurrence, including inside longer words.
    #[default]
    Substring,
    /// Occurrences starting and ending on token boundaries.
    WordBoundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatchMode {
    pub kind: MatchScope,
    pub case_fold: bool,
}

impl Default for MatchMode {
    fn default() -> Self {
        Self {
            kind: MatchScope::Substring,
            case_fold: true,
        }
    }
}

impl MatchMode {
    #[must_use]
    pub fn substring() -> Self {
        Self::default()
    }

    #[must_use]
    pub fn word_boundary() -> Self {
        Self {
            kind: MatchScope::WordBoundary,
            case_fold: true,
        }
    }
}

impl std::str::FromStr for MatchMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        let (kind, case_fold) = match s {
            "substring" => (MatchScope::Substring, true),
            "word" | "word_boundary" | "word-boundary" => (MatchScope::WordBoundary, true),
            "substring-cased" => (MatchScope::Substring, false),
            "word-cased" => (MatchScope::WordBoundary, false),
            other => return Err(crate::Error::Invalid(format!("unknown match mode {other:?}"))),
        };
        Ok(Self { kind, case_fold })
    }
}

/// Text prepared for matching, with a map from each byte of the matched
/// string back to the index of the original character it came from.
struct Prepared {
    haystack: String,
    char_of_byte: Vec<usize>,
}

fn prepare(text: &str, case_fold: bool) -> Prepared {
    let mut haystack = String::with_capacity(text.len());
    let mut char_of_byte = Vec::with_capacity(text.len());
    for (i, c) in text.chars().enumerate() {
        let before = haystack.len();
        if case_fold {
            haystack.extend(c.to_lowercase());
        } else {
            haystack.push(c);
        }
        char_of_byte.resize(char_of_byte.len() + haystack.len() - before, i);
    }
    Prepared { haystack, char_of_byte }
}

/// A lexicon compiled into a multi-pattern automaton.
pub struct Matcher {
    automaton: Option<AhoCorasick>,
    mode: MatchMode,
    tokenizer: Box<dyn Tokenizer>,
}

impl Matcher {
    #[must_use]
    pub fn new(lexicon: &Lexicon, mode: MatchMode) -> Self {
        Self::with_tokenizer(lexicon, mode, Box::new(WordTokenizer))
    }

    #[must_use]
    pub fn with_tokenizer(lexicon: &Lexicon, mode: MatchMode, tokenizer: Box<dyn Tokenizer>) -> Self {
        let patterns: Vec<&str> = lexicon.words().filter(|w| !w.is_empty()).collect();
        let automaton = (!patterns.is_empty()).then(|| {
            AhoCorasickBuilder::new()
                .match_kind(MatchKind::Standard)
                .build(&patterns)
                .expect("lexicon automaton")
        });
        Self {
            automaton,
            mode,
            tokenizer,
        }
    }

    #[must_use]
    pub fn predict(&self, text: &str) -> SpanSet {
        let Some(ac) = &self.automaton else {
            return SpanSet::empty();
        };
        let prep = prepare(text, self.mode.case_fold);
        let boundaries = (self.mode.kind == MatchScope::WordBoundary).then(|| {
            let tokens = self.tokenizer.tokenize(text);
            let starts: HashSet<usize> = tokens.iter().map(|t| t.start).collect();
            let ends: HashSet<usize> = tokens.iter().map(|t| t.end).collect();
            (starts, ends)
        });
        let spans = ac.find_overlapping_iter(&prep.haystack).filter_map(|m| {
            let start = prep.char_of_byte[m.start()];
            let end = prep.char_of_byte[m.end() - 1] + 1;
            match &boundaries {
                Some((starts, ends)) if !(starts.contains(&start) && ends.contains(&end)) => None,
                _ => Some(Span::new(start, end)),
            }
        });
        SpanSet::from_ranges(spans.collect::<Vec<_>>())
    }

    /// True when the text contains at least one accepted match.
    #[must_use]
    pub fn is_match(&self, text: &str) -> bool {
        !self.predict(text).is_empty()
    }

    #[must_use]
    pub fn predict_dataset(&self, dataset: &Dataset) -> Predictions {
        dataset.iter().map(|s| (s.id.clone(), self.predict(&s.text))).collect()
    }
}

/// Predicts spans for a single text. Compiles the lexicon on every call;
/// use [`Matcher`] when predicting many texts.
#[must_use]
pub fn predict(text: &str, lexicon: &Lexicon, mode: MatchMode) -> SpanSet {
    Matcher::new(lexicon, mode).predict(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex(words: &[&str]) -> Lexicon {
        Lexicon::from_words("t", words.iter().copied())
    }

    #[test]
    fn substring_matches_inside_words() {
        let l = lex(&["ho", "lame"]);
        let text = "somehow blame him";
        let spans = predict(text, &l, MatchMode::substring());
        assert_eq!(spans.ranges(), &[Span::new(4, 6), Span::new(9, 13)]);
        assert!(predict(text, &l, MatchMode::word_boundary()).is_empty());
    }

    #[test]
    fn overlapping_entries_union() {
        let l = lex(&["idiot", "idiots", "diot"]);
        let spans = predict("IDIOTS!", &l, MatchMode::substring());
        assert_eq!(spans.ranges(), &[Span::new(0, 6)]);
        let cased = MatchMode {
            kind: MatchScope::Substring,
            case_fold: false,
        };
        assert!(predict("IDIOTS!", &l, cased).is_empty());
    }

    #[test]
    fn word_boundary_accepts_multiword_entries() {
        let l = lex(&["dumb ass", "ass"]);
        let spans = predict("what a dumb ass, class", &l, MatchMode::word_boundary());
        assert_eq!(spans.ranges(), &[Span::new(7, 15)]);
    }

    #[test]
    fn empty_lexicon_predicts_nothing() {
        assert!(predict("anything", &lex(&[]), MatchMode::substring()).is_empty());
    }

    #[test]
    fn case_folding_keeps_original_offsets() {
        // 'İ' lowercases to two chars; offsets must stay in the original text.
        let l = lex(&["jerk"]);
        let spans = predict("İİ JERK", &l, MatchMode::substring());
        assert_eq!(spans.ranges(), &[Span::new(3, 7)]);
    }
}
