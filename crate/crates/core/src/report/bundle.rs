use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Read};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::ReportError;

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut f = File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// An output directory assembled in a sibling staging directory and moved
/// into place only on success. Dropping an uncommitted bundle removes the
/// staging directory, so a failed run leaves no partial outputs behind.
#[derive(Debug)]
pub struct Bundle {
    target: PathBuf,
    staging: PathBuf,
    committed: bool,
}

fn is_replaceable(dir: &Path) -> io::Result<bool> {
    if !dir.exists() {
        return Ok(true);
    }
    if !dir.is_dir() {
        return Ok(false);
    }
    Ok(dir.join(MANIFEST).is_file() || fs::read_dir(dir)?.next().is_none())
}

impl Bundle {
    pub fn create(target: &Path) -> Result<Self, ReportError> {
        let usage = |msg: String| ReportError::Usage(msg);
        if !is_replaceable(target).map_err(|e| usage(format!("{}: {e}", target.display())))? {
            return Err(usage(format!(
                "output directory {} exists and does not hold a previous report",
                target.display()
            )));
        }
        let name = target
            .file_name()
            .ok_or_else(|| usage(format!("invalid output directory {}", target.display())))?
            .to_string_lossy()
            .into_owned();
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).map_err(|e| usage(format!("{}: {e}", parent.display())))?;
        let staging = parent.join(format!(".{name}.staging-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| ReportError::stage("output", e))?;
        }
        fs::create_dir_all(&staging).map_err(|e| ReportError::stage("output", e))?;
        Ok(Self {
            target: target.to_path_buf(),
            staging,
            committed: false,
        })
    }

    /// Absolute path of `rel` inside the staging area, creating parents.
    pub fn path(&self, rel: &str) -> Result<PathBuf, ReportError> {
        let p = self.staging.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| ReportError::stage("output", e))?;
        }
        Ok(p)
    }

    pub fn writer(&self, rel: &str) -> Result<BufWriter<File>, ReportError> {
        let p = self.path(rel)?;
        File::create(&p)
            .map(BufWriter::new)
            .map_err(|e| ReportError::stage("output", format!("{}: {e}", p.display())))
    }

    pub fn dir(&self) -> &Path {
        &self.staging
    }

    /// SHA-256 of every file written so far, keyed by `/`-separated
    /// relative path.
    pub fn digests(&self) -> Result<BTreeMap<String, String>, ReportError> {
        let mut out = BTreeMap::new();
        let mut stack = vec![self.staging.clone()];
        while let Some(dir) = stack.pop() {
            for entry in fs::read_dir(&dir).map_err(|e| ReportError::stage("output", e))? {
                let path = entry.map_err(|e| ReportError::stage("output", e))?.path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    let rel = path
                        .strip_prefix(&self.staging)
                        .expect("inside staging")
                        .components()
                        .map(|c| c.as_os_str().to_string_lossy().into_owned())
                        .collect::<Vec<_>>()
                        .join("/");
                    out.insert(rel, sha256_file(&path).map_err(|e| ReportError::stage("output", e))?);
                }
            }
        }
        Ok(out)
    }

    /// Moves the staged bundle to its final location, replacing a previous
    /// report there.
    pub fn commit(mut self) -> Result<PathBuf, ReportError> {
        if self.target.exists() {
            fs::remove_dir_all(&self.target).map_err(|e| ReportError::stage("output", e))?;
        }
        fs::rename(&self.staging, &self.target).map_err(|e| ReportError::stage("output", e))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for Bundle {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}
