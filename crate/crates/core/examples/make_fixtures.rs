//! Regenerates the bundled mini corpora.
//!
//! ```text
//! cargo run -p toxspan --example make_fixtures -- fixtures/mini
//! ```

use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args_os().nth(1).map_or_else(|| PathBuf::from("fixtures/mini"), PathBuf::from);
    toxspan::synthetic::write_mini_corpus(&dir)?;
    println!("wrote {}", dir.display());
    Ok(())
}
