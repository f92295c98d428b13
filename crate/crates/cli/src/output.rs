use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use tempfile::NamedTempFile;

use crate::error::CliError;

/// Bumped whenever a field of any emitted JSON document changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

/// Wraps `body` as `{"schema": ..., "version": ..., <body fields>}`.
pub fn envelope(schema: &str, body: impl Serialize) -> Result<Value, CliError> {
    let mut doc = json!({ "schema": schema, "version": SCHEMA_VERSION });
    match serde_json::to_value(body)? {
        Value::Object(fields) => doc.as_object_mut().expect("object literal").extend(fields),
        other => return Err(CliError::runtime(format!("cannot embed non-object {other}"))),
    }
    Ok(doc)
}

pub fn pretty(doc: &Value) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(doc)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes every file into `dir`. Contents go to temporary files in the same
/// directory first and are renamed into place only once all of them were
/// written, so an IO error never leaves a truncated output file behind.
pub fn write_all_atomic(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let mut tmp = NamedTempFile::new_in(dir)
            .map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        staged.push((tmp, dir.join(name)));
    }
    let mut written = Vec::with_capacity(staged.len());
    for (tmp, path) in staged {
        tmp.persist(&path)
            .map_err(|e| CliError::runtime(format!("{}: {}", path.display(), e.error)))?;
        written.push(path);
    }
    Ok(written)
}
