use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use olsr_core::data::{read_csv, read_features};
use olsr_core::FeatureSet;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// `model.olsr` → `model.json`.
pub fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

/// Writes through a temporary file and renames, so a failed run leaves no
/// partial output behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn json_bytes<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// Writes to `path` or to stdout.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => write_atomic(p, bytes),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

/// AVF1 by default; `.csv` files go through the CSV importer.
pub fn load_features(path: &Path) -> CliResult<FeatureSet> {
    crate::config::require_file(path, "feature file")?;
    let set = if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        read_csv(path, None)?
    } else {
        read_features(path)?
    };
    Ok(set)
}

/// Reads the `score` column of a score CSV, or a JSON array of rows / numbers.
pub fn read_scores(path: &Path) -> CliResult<Vec<f64>> {
    crate::config::require_file(path, "score file")?;
    let text = fs::read_to_string(path)?;
    let bad =
        |m: String| CliError::Core(olsr_core::Error::Format(format!("{}: {m}", path.display())));
    if text.trim_start().starts_with('[') {
        let values: Vec<serde_json::Value> = serde_json::from_str(&text)?;
        return values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.as_f64()
                    .or_else(|| v.get("score").and_then(serde_json::Value::as_f64))
                    .ok_or_else(|| bad(format!("entry {i} has no numeric score")))
            })
            .collect();
    }
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let col = header
        .split(',')
        .position(|h| h.trim() == "score")
        .ok_or_else(|| bad("no `score` column".into()))?;
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.split(',')
                .nth(col)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| bad(format!("row {} has no numeric score", i + 1)))
        })
        .collect()
}
