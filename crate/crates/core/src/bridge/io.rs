use std::io::{BufRead, Write};

use super::BridgePath;
use crate::error::{Error, Result};

/// One JSON object per line.
pub fn write_jsonl<W: Write>(paths: &[BridgePath], mut out: W) -> Result<()> {
    for p in paths {
        serde_json::to_writer(&mut out, p).map_err(|e| Error::Serialization(e.to_string()))?;
        out.write_all(b"\n").map_err(|e| Error::Serialization(e.to_string()))?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<BridgePath>> {
    let mut paths = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::Serialization(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let p = serde_json::from_str(&line).map_err(|e| Error::Serialization(format!("line {}: {e}", n + 1)))?;
        paths.push(p);
    }
    Ok(paths)
}
