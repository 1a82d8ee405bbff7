use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// An output location that cannot be created or written. Maps to exit code 2.
#[derive(Debug)]
pub struct PathError(pub String);

impl fmt::Display for PathError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for PathError {}

/// Creates `dir` (and parents) up front so an unwritable location fails
/// before any work.
pub fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).map_err(|e| PathError(format!("cannot create directory {}: {e}", dir.display())))?;
    let probe = dir.join(".losnet-probe.partial");
    File::create(&probe).map_err(|e| PathError(format!("directory {} is not writable: {e}", dir.display())))?;
    let _ = fs::remove_file(probe);
    Ok(())
}

/// Checks that the parent of `file` exists or can be created.
pub fn ensure_parent(file: &Path) -> anyhow::Result<()> {
    match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => ensure_dir(p),
        _ => ensure_dir(Path::new(".")),
    }
}

fn partial_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

/// Writes through `<path>.partial` and renames on success; a failed write
/// leaves only the `.partial` file behind.
pub fn write_atomic<F>(path: &Path, body: F) -> anyhow::Result<()>
where
    F: FnOnce(&mut dyn Write) -> anyhow::Result<()>,
{
    let tmp = partial_path(path);
    let file = File::create(&tmp).map_err(|e| PathError(format!("cannot write {}: {e}", tmp.display())))?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush().map_err(|e| PathError(format!("cannot write {}: {e}", tmp.display())))?;
    drop(w);
    fs::rename(&tmp, path).map_err(|e| PathError(format!("cannot move {} into place: {e}", tmp.display())))?;
    Ok(())
}

/// JSON document wrapped with the run's seed.
pub fn write_json<T: serde::Serialize>(path: &Path, seed: u64, key: &str, value: &T) -> anyhow::Result<()> {
    let mut doc = serde_json::Map::new();
    doc.insert("seed".into(), seed.into());
    doc.insert(key.into(), serde_json::to_value(value)?);
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, &doc)?;
        writeln!(w)?;
        Ok(())
    })
}
