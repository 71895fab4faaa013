//! Sequence discovery from `{seq}` path patterns.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

pub const SEQ: &str = "{seq}";

pub fn substitute(pattern: &str, seq: &str) -> String {
    pattern.replace(SEQ, seq)
}

/// Sequence name for a pattern without `{seq}`: the file stem.
fn single_name(pattern: &str) -> String {
    Path::new(pattern)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "seq".into())
}

/// Lists the sequences matched by a detection pattern. `{seq}` may appear
/// only in the file name; a pattern without it names one sequence.
pub fn discover(pattern: &str) -> Result<Vec<String>> {
    if !pattern.contains(SEQ) {
        return Ok(vec![single_name(pattern)]);
    }
    let path = PathBuf::from(pattern);
    let file = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    let Some((prefix, suffix)) = file.split_once(SEQ) else {
        bail!("{SEQ} must be in the file name of {pattern}; pass --seqs instead");
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut seqs: Vec<String> = std::fs::read_dir(&dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            let mid = name.strip_prefix(prefix)?.strip_suffix(suffix)?;
            (!mid.is_empty()).then(|| mid.to_string())
        })
        .collect();
    seqs.sort();
    if seqs.is_empty() {
        bail!("no files match {pattern}");
    }
    Ok(seqs)
}

/// Uses the explicit list when given, else discovers from the pattern.
pub fn resolve(pattern: &str, explicit: &[String]) -> Result<Vec<String>> {
    if explicit.is_empty() {
        return discover(pattern);
    }
    if explicit.len() > 1 && !pattern.contains(SEQ) {
        bail!("several sequences need {SEQ} in {pattern}");
    }
    Ok(explicit.to_vec())
}
