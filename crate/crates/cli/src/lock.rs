use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

pub const LOCK_FILE: &str = ".gaitmag.lock";

/// Exclusive claim on an output directory, released on drop.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    /// Creates `dir` if needed and claims it.
    pub fn acquire(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
        let path = dir.join(LOCK_FILE);
        fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| {
                if e.kind() == std::io::ErrorKind::AlreadyExists {
                    CliError::Runtime(format!(
                        "{} is in use by another gaitmag process (remove {} if it is stale)",
                        dir.display(),
                        path.display()
                    ))
                } else {
                    CliError::Runtime(format!("{}: {e}", path.display()))
                }
            })?;
        Ok(Self { path })
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
