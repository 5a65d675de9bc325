use std::io::Read;

use crate::corpus::{Dataset, Sample, Split};
use crate::error::{Error, Result};
use crate::spanops::{char_len, SpanSet};

/// Parses a bracketed integer list such as `[0, 1, 2]`.
fn parse_offsets(field: &str) -> std::result::Result<Vec<usize>, String> {
    let inner = field
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| format!("malformed span list {field:?}"))?;
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("malformed offset {:?} in span list", t.trim()))
        })
        .collect()
}

/// Reads the SemEval toxic-spans CSV layout (`spans`, `text` columns).
///
/// Every row is a toxic sample. Rows without an `id` column are named
/// `<split>-<row>` with a zero-based row number.
pub fn ingest_semeval<R: Read>(reader: R, split: Split, name: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |n: &str| headers.iter().position(|h| h.trim() == n);
    let spans_col = col("spans").ok_or_else(|| Error::record(name, 1, "missing `spans` column"))?;
    let text_col = col("text").ok_or_else(|| Error::record(name, 1, "missing `text` column"))?;
    let id_col = col("id");

    let mut samples = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(row + 2, |p| p.line() as usize);
        let text = rec.get(text_col).unwrap_or_default().to_string();
        let offsets = parse_offsets(rec.get(spans_col).unwrap_or_default())
            .map_err(|m| Error::record(name, line, m))?;
        let len = char_len(&text);
        if let Some(&bad) = offsets.iter().find(|&&o| o >= len) {
            return Err(Error::record(
                name,
                line,
                format!("offset {bad} out of range for text of length {len}"),
            ));
        }
        let id = match id_col {
            Some(c) => rec.get(c).unwrap_or_default().to_string(),
            None => format!("{split}-{row}"),
        };
        samples.push(Sample {
            id,
            text,
            toxic: true,
            gold_spans: SpanSet::from_offsets(offsets),
            split,
        });
    }
    Dataset::new(name, samples, format!("semeval csv ({split})"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spanops::Span;

    #[test]
    fn parses_rows() {
        let csv = "spans,text\n[],have a nice day\n\"[0, 1, 2, 3]\",jerk face\n";
        let d = ingest_semeval(csv.as_bytes(), Split::Train, "semeval").unwrap();
        assert_eq!(d.len(), 2);
        assert!(d.samples()[0].gold_spans.is_empty());
        assert!(d.samples()[0].toxic);
        assert_eq!(d.samples()[1].gold_spans.ranges(), &[Span::new(0, 4)]);
        assert_eq!(d.samples()[1].id, "train-1");
    }

    #[test]
    fn malformed_list_names_row() {
        let csv = "spans,text\n[],ok\n[0;1],bad row\n";
        let err = ingest_semeval(csv.as_bytes(), Split::Dev, "s").unwrap_err();
        assert!(matches!(err, Error::Record { line: 3, .. }), "{err}");
    }

    #[test]
    fn offset_past_end_rejected() {
        let csv = "spans,text\n\"[3,4]\",abcd\n";
        let err = ingest_semeval(csv.as_bytes(), Split::Test, "s").unwrap_err();
        assert!(err.to_string().contains("offset 4 out of range"), "{err}");
    }

    #[test]
    fn uses_id_column_when_present() {
        let csv = "id,spans,text\nx9,[0],a\n";
        let d = ingest_semeval(csv.as_bytes(), Split::Test, "s").unwrap();
        assert_eq!(d.samples()[0].id, "x9");
    }
}
