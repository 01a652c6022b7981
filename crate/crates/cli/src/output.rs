use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::Failure;

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::data(format!("{}: {e}", path.display()))
}

pub(crate) fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| io_failure(path, e))
}

/// Output files written to temporaries next to their targets and renamed
/// into place only by [`Staged::commit`]. Dropping without committing
/// removes the temporaries.
#[derive(Default)]
pub(crate) struct Staged {
    files: Vec<(NamedTempFile, PathBuf)>,
}

impl Staged {
    pub(crate) fn add(&mut self, path: &Path, bytes: &[u8]) -> Result<(), Failure> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = NamedTempFile::new_in(dir).map_err(|e| io_failure(path, e))?;
        tmp.write_all(bytes).and_then(|_| tmp.as_file().sync_all()).map_err(|e| io_failure(path, e))?;
        self.files.push((tmp, path.to_path_buf()));
        Ok(())
    }

    pub(crate) fn commit(self) -> Result<(), Failure> {
        for (tmp, path) in self.files {
            tmp.persist(&path).map_err(|e| io_failure(&path, e.error))?;
        }
        Ok(())
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let mut s = Staged::default();
    s.add(path, bytes)?;
    s.commit()
}

/// Writes to `path` when given, otherwise appends to the command's stdout.
pub(crate) fn emit(path: Option<&Path>, bytes: &[u8], stdout: &mut Vec<u8>) -> Result<(), Failure> {
    match path {
        Some(p) => write_atomic(p, bytes),
        None => {
            stdout.extend_from_slice(bytes);
            Ok(())
        }
    }
}
