//! Regenerates the bundled bilingual archive.
//!
//! ```text
//! cargo run -p tweetmem --example generate_corpus -- crates/core/data/corpus.jsonl
//! ```

use std::path::PathBuf;

use tweetmem::synth::bundled_archive_text;

fn main() -> std::io::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("crates/core/data/corpus.jsonl"));
    std::fs::write(&out, bundled_archive_text())?;
    eprintln!("wrote {}", out.display());
    Ok(())
}
