//! JSON-lines corpus files: one scene per line.

use std::fs;
use std::path::Path;

use super::{CorpusError, Scene};

pub fn parse_scenes(text: &str) -> Result<Vec<Scene>, CorpusError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| CorpusError::Parse {
                line: i + 1,
                source,
            })
        })
        .collect()
}

pub fn scenes_to_jsonl(scenes: &[Scene]) -> Result<String, CorpusError> {
    let mut out = String::new();
    for s in scenes {
        out.push_str(&serde_json::to_string(s)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_scenes(path: impl AsRef<Path>) -> Result<Vec<Scene>, CorpusError> {
    parse_scenes(&fs::read_to_string(path)?)
}

pub fn write_scenes(path: impl AsRef<Path>, scenes: &[Scene]) -> Result<(), CorpusError> {
    fs::write(path, scenes_to_jsonl(scenes)?)?;
    Ok(())
}
