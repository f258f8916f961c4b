//! On-disk cache of assembled matrices keyed by a hash of their inputs
//! (metric, attenuation, grid, operator). Writers hold a lock file.

use crate::error::{Error, Result};
use crate::linalg::{from_c64, to_c64};
use crate::C64;
use faer::{c64, Mat};
use sha2::{Digest, Sha256};
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant, SystemTime};

const LOCK_WAIT: Duration = Duration::from_secs(600);
const LOCK_STALE: Duration = Duration::from_secs(3600);

#[derive(Clone, Debug)]
pub struct Cache {
    dir: PathBuf,
}

struct LockGuard(PathBuf);

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

impl Cache {
    pub fn new(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(parts: &[&str]) -> String {
        let mut h = Sha256::new();
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p.as_bytes());
        }
        h.finalize().iter().take(16).map(|b| format!("{b:02x}")).collect()
    }

    fn lock(&self) -> Result<LockGuard> {
        let path = self.dir.join(".lock");
        let start = Instant::now();
        loop {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(_) => return Ok(LockGuard(path)),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    let stale = std::fs::metadata(&path)
                        .and_then(|m| m.modified())
                        .map(|t| SystemTime::now().duration_since(t).unwrap_or_default() > LOCK_STALE)
                        .unwrap_or(false);
                    if stale {
                        let _ = std::fs::remove_file(&path);
                        continue;
                    }
                    if start.elapsed() > LOCK_WAIT {
                        return Err(Error::Io(std::io::Error::new(
                            std::io::ErrorKind::TimedOut,
                            format!("cache lock {} held too long", path.display()),
                        )));
                    }
                    std::thread::sleep(Duration::from_millis(50));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    fn load(&self, base: &Path, tag: &str) -> Option<Mat<c64>> {
        let (h, d) = crate::io::read_array(base).ok()?;
        if h.grid != tag || h.shape.len() != 2 {
            return None;
        }
        let (r, c) = (h.shape[0], h.shape[1]);
        let d = d.into_complex();
        Some(Mat::<c64>::from_fn(r, c, |i, j| to_c64(d[i * c + j])))
    }

    /// Returns the cached matrix for `parts`, computing and storing it on a
    /// miss. Unreadable entries are recomputed.
    pub fn matrix(&self, parts: &[&str], compute: impl FnOnce() -> Result<Mat<c64>>) -> Result<Mat<c64>> {
        let key = Self::key(parts);
        let tag = format!("cache:{key}");
        let base = self.dir.join(&key);
        if let Some(m) = self.load(&base, &tag) {
            return Ok(m);
        }
        let _guard = self.lock()?;
        if let Some(m) = self.load(&base, &tag) {
            return Ok(m);
        }
        let m = compute()?;
        let data: Vec<C64> = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| from_c64(m[(i, j)]))
            .collect();
        crate::io::write_complex(&base, &data, &[m.nrows(), m.ncols()], &tag)?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn miss_then_hit() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path()).unwrap();
        let m = Mat::<c64>::from_fn(2, 3, |i, j| c64::new(i as f64, j as f64 * 0.5));
        let mut calls = 0;
        let a = cache
            .matrix(&["op", "grid"], || {
                calls += 1;
                Ok(m.clone())
            })
            .unwrap();
        let b = cache.matrix(&["op", "grid"], || panic!("should hit")).unwrap();
        assert_eq!(calls, 1);
        assert_eq!(a, b);
        assert!(!dir.path().join(".lock").exists());
        let c = cache.matrix(&["op", "grid2"], || Ok(Mat::<c64>::zeros(1, 1))).unwrap();
        assert_eq!(c.nrows(), 1);
    }

    #[test]
    fn keys_separate_parts() {
        assert_ne!(Cache::key(&["ab", "c"]), Cache::key(&["a", "bc"]));
        assert_eq!(Cache::key(&["x"]).len(), 32);
    }
}
