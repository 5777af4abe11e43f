//! All-or-nothing file output. Commands render every artifact in memory and
//! hand them over here; files appear only once every one has been staged.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use twinbeam_core::Result;

pub struct Artifact {
    pub path: PathBuf,
    pub contents: Vec<u8>,
}

impl Artifact {
    pub fn new(path: impl Into<PathBuf>, contents: Vec<u8>) -> Self {
        Self { path: path.into(), contents }
    }
}

fn staging_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    path.with_file_name(name)
}

/// Writes every artifact to a staging file, then renames them into place.
/// If staging fails, the staging files are removed and no target is touched.
pub fn publish(artifacts: &[Artifact]) -> Result<()> {
    let mut staged = Vec::with_capacity(artifacts.len());
    let result = (|| -> Result<()> {
        for a in artifacts {
            if let Some(dir) = a.path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            let tmp = staging_path(&a.path);
            staged.push(tmp.clone());
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&a.contents)?;
            f.sync_all()?;
        }
        for (a, tmp) in artifacts.iter().zip(&staged) {
            fs::rename(tmp, &a.path)?;
        }
        Ok(())
    })();
    if result.is_err() {
        for tmp in &staged {
            let _ = fs::remove_file(tmp);
        }
    }
    result
}
