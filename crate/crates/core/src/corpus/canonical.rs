use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Sample};
use crate::error::{Error, Result};

pub const SCHEMA: &str = "toxspan/1";

#[derive(Serialize, Deserialize)]
struct Header {
    schema: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    provenance: String,
}

/// Writes a dataset as JSON Lines: a schema header followed by one sample
/// per line.
pub fn write_canonical<W: Write>(dataset: &Dataset, mut writer: W) -> Result<()> {
    let header = Header {
        schema: SCHEMA.to_string(),
        name: dataset.name.clone(),
        provenance: dataset.provenance.clone(),
    };
    serde_json::to_writer(&mut writer, &header)?;
    writer.write_all(b"\n")?;
    for s in dataset {
        serde_json::to_writer(&mut writer, s)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_canonical<R: BufRead>(reader: R, source_name: &str) -> Result<Dataset> {
    let mut lines = reader.lines().enumerate();
    let header: Header = loop {
        match lines.next() {
            Some((_, line)) if line.as_ref().is_ok_and(|l| l.trim().is_empty()) => continue,
            Some((i, line)) => {
                break serde_json::from_str(&line?).map_err(|e| Error::record(source_name, i + 1, e.to_string()))?
            }
            None => return Err(Error::record(source_name, 1, "missing schema header")),
        }
    };
    if header.schema != SCHEMA {
        return Err(Error::Schema {
            expected: SCHEMA.to_string(),
            found: header.schema,
        });
    }
    let mut samples = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: Sample = serde_json::from_str(&line).map_err(|e| Error::record(source_name, i + 1, e.to_string()))?;
        samples.push(s);
    }
    let name = if header.name.is_empty() {
        source_name.to_string()
    } else {
        header.name
    };
    Dataset::new(name, samples, header.provenance)
}
