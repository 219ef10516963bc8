//! File helpers shared by every persisted format.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::matrix::ZoneMatrix;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Write via a sibling temp file and rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Resolve `target` against the directory holding `referrer`.
pub fn resolve(referrer: &Path, target: &Path) -> PathBuf {
    if target.is_absolute() {
        target.to_path_buf()
    } else {
        referrer
            .parent()
            .map(|dir| dir.join(target))
            .unwrap_or_else(|| target.to_path_buf())
    }
}

pub fn read_matrix(path: &Path) -> Result<ZoneMatrix> {
    let text = read_text(path)?;
    ZoneMatrix::from_csv(&text).map_err(|e| e.with_source_name(path.display().to_string()))
}

pub fn write_matrix(path: &Path, m: &ZoneMatrix) -> Result<()> {
    write_atomic(path, &m.to_csv())
}
