//! Atomic file output.
//!
//! Every file is written to a temporary sibling and renamed into place, so a
//! reader never sees a partial file even when runs share a directory.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Pretty JSON with a trailing newline. Non-finite floats become `null`.
pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::io(&path, std::io::Error::other(e)))?;
    bytes.push(b'\n');
    write_atomic(&path, &bytes)?;
    Ok(path)
}

/// CSV with a fixed header. Floats use the shortest round-trip form.
pub fn write_csv<R>(dir: &Path, name: &str, header: &[&str], rows: R) -> Result<PathBuf, CliError>
where
    R: IntoIterator<Item = Vec<String>>,
{
    let path = dir.join(name);
    let io_err = |e: csv::Error| CliError::io(&path, std::io::Error::other(e));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(&row).map_err(io_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::io(&path, std::io::Error::other(e.to_string())))?;
    write_atomic(&path, &bytes)?;
    Ok(path)
}

/// Round-trip text for a float; empty for `None` or non-finite values.
pub fn num(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v:?}"),
        _ => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, 0.0, -2.5] {
            assert_eq!(num(Some(x)).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(Some(f64::INFINITY)), "");
        assert_eq!(num(None), "");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        write_csv(dir.path(), "a.csv", &["x"], vec![vec!["1".into()]]).unwrap();
        write_csv(dir.path(), "a.csv", &["x"], vec![vec!["2".into()]]).unwrap();
        let text = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
        assert_eq!(text, "x\n2\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
