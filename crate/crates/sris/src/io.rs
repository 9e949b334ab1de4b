use std::io::Write;
use std::path::Path;

use crate::error::{Result, SrisError};

/// Writes `bytes` to a temporary file next to `path` and renames it into place, so readers
/// never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| SrisError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| SrisError::io(path, e))?;
    tmp.persist(path).map_err(|e| SrisError::io(path, e.error))?;
    Ok(())
}
