//! Span-set algebra over character offsets.
//!
//! All offsets count Unicode scalar values (`char`s), never bytes. A
//! [`SpanSet`] is kept canonical at all times: its ranges are sorted,
//! non-empty, and neither overlap nor touch.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Half-open character range `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    #[must_use]
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

impl From<(usize, usize)> for Span {
    fn from((start, end): (usize, usize)) -> Self {
        Self { start, end }
    }
}

impl From<Span> for (usize, usize) {
    fn from(s: Span) -> Self {
        (s.start, s.end)
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

/// Canonical set of character offsets.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<Span>", into = "Vec<Span>")]
pub struct SpanSet {
    ranges: Vec<Span>,
}

impl From<Vec<Span>> for SpanSet {
    fn from(ranges: Vec<Span>) -> Self {
        SpanSet::from_ranges(ranges)
    }
}

impl From<SpanSet> for Vec<Span> {
    fn from(s: SpanSet) -> Self {
        s.ranges
    }
}

impl FromIterator<usize> for SpanSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        SpanSet::from_offsets(iter)
    }
}

impl SpanSet {
    #[must_use]
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a canonical set from arbitrary ranges. Empty ranges are
    /// dropped; overlapping or adjacent ranges are coalesced.
    pub fn from_ranges<I, S>(ranges: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<Span>,
    {
        let mut v: Vec<Span> = ranges
            .into_iter()
            .map(Into::into)
            .filter(|s: &Span| !s.is_empty())
            .collect();
        v.sort_unstable();
        let mut out: Vec<Span> = Vec::with_capacity(v.len());
        for s in v {
            match out.last_mut() {
                Some(last) if s.start <= last.end => last.end = last.end.max(s.end),
                _ => out.push(s),
            }
        }
        Self { ranges: out }
    }

    pub fn from_offsets<I: IntoIterator<Item = usize>>(offsets: I) -> Self {
        let mut v: Vec<usize> = offsets.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        let mut out: Vec<Span> = Vec::new();
        for o in v {
            match out.last_mut() {
                Some(last) if last.end == o => last.end += 1,
                _ => out.push(Span::new(o, o + 1)),
            }
        }
        Self { ranges: out }
    }

    #[must_use]
    pub fn to_offsets(&self) -> BTreeSet<usize> {
        self.offsets().collect()
    }

    pub fn offsets(&self) -> impl Iterator<Item = usize> + '_ {
        self.ranges.iter().flat_map(|s| s.start..s.end)
    }

    #[must_use]
    pub fn ranges(&self) -> &[Span] {
        &self.ranges
    }

    /// Number of offsets in the set.
    #[must_use]
    pub fn len(&self) -> usize {
        self.ranges.iter().map(Span::len).sum()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// One past the largest offset, or 0 for the empty set.
    #[must_use]
    pub fn end(&self) -> usize {
        self.ranges.last().map_or(0, |s| s.end)
    }

    #[must_use]
    pub fn contains(&self, offset: usize) -> bool {
        let idx = self.ranges.partition_point(|s| s.end <= offset);
        self.ranges.get(idx).is_some_and(|s| s.start <= offset)
    }

    #[must_use]
    pub fn union(&self, other: &SpanSet) -> SpanSet {
        SpanSet::from_ranges(self.ranges.iter().chain(other.ranges.iter()).copied())
    }

    /// True when every offset of `self` is also in `other`.
    #[must_use]
    pub fn is_subset(&self, other: &SpanSet) -> bool {
        overlap(self, other) == self.len()
    }

    /// Number of offsets of `[start, end)` covered by this set.
    #[must_use]
    pub fn covered(&self, start: usize, end: usize) -> usize {
        if start >= end {
            return 0;
        }
        let first = self.ranges.partition_point(|s| s.end <= start);
        self.ranges[first..]
            .iter()
            .take_while(|s| s.start < end)
            .map(|s| s.end.min(end) - s.start.max(start))
            .sum()
    }

    /// Joins consecutive ranges whose gap is at most `fill_chars`.
    #[must_use]
    pub fn merged(&self, cfg: MergeConfig) -> SpanSet {
        merge_spans(self, cfg)
    }
}

impl fmt::Display for SpanSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, s) in self.ranges.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str("}")
    }
}

/// Method-agnostic span post-processing: the maximum gap that is filled
/// when joining two neighbouring spans.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MergeConfig {
    pub fill_chars: usize,
}

impl MergeConfig {
    #[must_use]
    pub fn new(fill_chars: usize) -> Self {
        Self { fill_chars }
    }
}

/// Merges any two consecutive ranges with `next.start - prev.end <= n`;
/// the gap characters become part of the span.
#[must_use]
pub fn merge_spans(s: &SpanSet, cfg: MergeConfig) -> SpanSet {
    let mut out: Vec<Span> = Vec::with_capacity(s.ranges.len());
    for &r in &s.ranges {
        match out.last_mut() {
            Some(last) if r.start - last.end <= cfg.fill_chars => last.end = r.end,
            _ => out.push(r),
        }
    }
    SpanSet { ranges: out }
}

/// Size of the intersection of two offset sets.
#[must_use]
pub fn overlap(a: &SpanSet, b: &SpanSet) -> usize {
    let (mut i, mut j) = (0, 0);
    let mut total = 0;
    while i < a.ranges.len() && j < b.ranges.len() {
        let (x, y) = (a.ranges[i], b.ranges[j]);
        let lo = x.start.max(y.start);
        let hi = x.end.min(y.end);
        if lo < hi {
            total += hi - lo;
        }
        if x.end <= y.end {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

/// A word token with character offsets into its source text.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Token {
    pub surface: String,
    pub start: usize,
    pub end: usize,
}

impl Token {
    #[must_use]
    pub fn span(&self) -> Span {
        Span::new(self.start, self.end)
    }
}

pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<Token>;
}

/// Splits text into maximal runs of alphanumeric characters and
/// apostrophes (`'` and `’`). Everything else separates tokens.
#[derive(Clone, Copy, Debug, Default)]
pub struct WordTokenizer;

impl WordTokenizer {
    fn is_word_char(c: char) -> bool {
        c.is_alphanumeric() || c == '\'' || c == '\u{2019}'
    }
}

impl Tokenizer for WordTokenizer {
    fn tokenize(&self, text: &str) -> Vec<Token> {
        let mut tokens = Vec::new();
        let mut current: Option<(usize, String)> = None;
        let mut n = 0;
        for (i, c) in text.chars().enumerate() {
            n = i + 1;
            if Self::is_word_char(c) {
                current.get_or_insert_with(|| (i, String::new())).1.push(c);
            } else if let Some((start, surface)) = current.take() {
                tokens.push(Token { end: start + surface.chars().count(), surface, start });
            }
        }
        if let Some((start, surface)) = current {
            tokens.push(Token { surface, start, end: n });
        }
        tokens
    }
}

/// Tokenizes with the default [`WordTokenizer`].
#[must_use]
pub fn tokenize(text: &str) -> Vec<Token> {
    WordTokenizer.tokenize(text)
}

/// Length of `text` in characters.
#[must_use]
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Substring of `text` covering characters `[start, end)`.
#[must_use]
pub fn slice_chars(text: &str, start: usize, end: usize) -> &str {
    let mut idx = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let b_start = idx.by_ref().nth(start).unwrap_or(text.len());
    let b_end = if end > start {
        idx.nth(end - start - 1).unwrap_or(text.len())
    } else {
        b_start
    };
    &text[b_start..b_end]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(r: &[(usize, usize)]) -> SpanSet {
        SpanSet::from_ranges(r.iter().copied())
    }

    #[test]
    fn offsets_round_trip_examples() {
        assert_eq!(SpanSet::from_offsets([]), SpanSet::empty());
        assert_eq!(SpanSet::from_offsets([0, 1, 2, 3]), set(&[(0, 4)]));
        assert_eq!(SpanSet::from_offsets([0, 1, 5]), set(&[(0, 2), (5, 6)]));
        assert_eq!(set(&[(0, 2), (5, 6)]).to_offsets(), [0, 1, 5].into_iter().collect());
    }

    #[test]
    fn from_ranges_coalesces_adjacent_and_overlapping() {
        assert_eq!(set(&[(5, 8), (0, 4), (4, 5)]).ranges(), &[Span::new(0, 8)]);
        assert_eq!(set(&[(0, 4), (2, 3), (3, 0)]).ranges(), &[Span::new(0, 4)]);
    }

    #[test]
    fn merge_examples() {
        let s = set(&[(0, 4), (5, 8)]);
        assert_eq!(merge_spans(&s, MergeConfig::new(0)), s);
        assert_eq!(merge_spans(&s, MergeConfig::new(1)), set(&[(0, 8)]));
        let far = set(&[(0, 2), (10, 12)]);
        assert_eq!(merge_spans(&far, MergeConfig::new(9999)), set(&[(0, 12)]));
        assert_eq!(merge_spans(&far, MergeConfig::new(7)), far);
        assert_eq!(merge_spans(&far, MergeConfig::new(8)), set(&[(0, 12)]));
    }

    #[test]
    fn merge_is_transitive() {
        let s = set(&[(0, 1), (2, 3), (4, 5), (9, 10)]);
        assert_eq!(merge_spans(&s, MergeConfig::new(1)), set(&[(0, 5), (9, 10)]));
    }

    #[test]
    fn tokenize_examples() {
        let t = tokenize("jerk face");
        assert_eq!(t.len(), 2);
        assert_eq!((t[0].surface.as_str(), t[0].start, t[0].end), ("jerk", 0, 4));
        assert_eq!((t[1].surface.as_str(), t[1].start, t[1].end), ("face", 5, 9));
        assert!(tokenize("").is_empty());
        let t = tokenize("don't go");
        assert_eq!((t[0].surface.as_str(), t[0].start, t[0].end), ("don't", 0, 5));
        assert_eq!((t[1].surface.as_str(), t[1].start, t[1].end), ("go", 6, 8));
    }

    #[test]
    fn tokenize_counts_chars_not_bytes() {
        let text = "héllo, wörld!";
        for t in tokenize(text) {
            assert_eq!(slice_chars(text, t.start, t.end), t.surface);
        }
        assert_eq!(tokenize(text)[1].start, 7);
    }

    #[test]
    fn overlap_examples() {
        let x = set(&[(0, 3), (6, 9)]);
        assert_eq!(overlap(&x, &x), 6);
        assert_eq!(overlap(&set(&[(0, 5)]), &set(&[(2, 7)])), 3);
        assert_eq!(overlap(&x, &SpanSet::empty()), 0);
    }

    #[test]
    fn covered_and_contains() {
        let x = set(&[(2, 4), (6, 9)]);
        assert_eq!(x.covered(0, 10), 5);
        assert_eq!(x.covered(3, 7), 2);
        assert_eq!(x.covered(4, 6), 0);
        assert!(x.contains(2) && x.contains(8));
        assert!(!x.contains(4) && !x.contains(9) && !x.contains(0));
    }

    #[test]
    fn serde_pairs() {
        let s = set(&[(0, 4), (6, 7)]);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, "[[0,4],[6,7]]");
        let back: SpanSet = serde_json::from_str("[[6,7],[0,2],[2,4]]").unwrap();
        assert_eq!(back, s);
    }
}
