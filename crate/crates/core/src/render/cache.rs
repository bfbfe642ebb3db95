//! Content-addressed on-disk text cache.
//!
//! Layout: `<root>/<namespace>/<key>.txt` plus `<root>/<namespace>/manifest.json`
//! recording which renderer and prompt version produced the entries. Entries
//! are written once (temp file + rename) and never regenerated.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheManifest {
    pub renderer_id: String,
    pub prompt_version: String,
}

#[derive(Debug)]
pub struct TextCache {
    dir: PathBuf,
    in_flight: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl TextCache {
    pub fn open(root: &Path, namespace: &str, manifest: &CacheManifest) -> Result<Self> {
        let dir = root.join(namespace);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join("manifest.json");
        let current = fs::read(&path)
            .ok()
            .and_then(|b| serde_json::from_slice::<CacheManifest>(&b).ok());
        if current.as_ref() != Some(manifest) {
            if let Some(old) = current {
                log::warn!(
                    "cache {} was written by {} ({}); entries are keyed by prompt version and stay valid",
                    dir.display(),
                    old.renderer_id,
                    old.prompt_version
                );
            }
            write_atomic(&path, &serde_json::to_vec_pretty(manifest)?)?;
        }
        Ok(TextCache {
            dir,
            in_flight: Mutex::new(HashMap::new()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.txt"))
    }

    pub fn get(&self, key: &str) -> Result<Option<String>> {
        let path = self.entry(key);
        match fs::read_to_string(&path) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn put(&self, key: &str, text: &str) -> Result<()> {
        write_atomic(&self.entry(key), text.as_bytes())
    }

    /// Returns the cached text or computes, stores and returns it. Concurrent
    /// callers with the same key wait for a single computation. The flag is
    /// `true` on a cache hit.
    pub fn get_or_compute<F>(&self, key: &str, compute: F) -> Result<(String, bool)>
    where
        F: FnOnce() -> Result<String>,
    {
        if let Some(hit) = self.get(key)? {
            return Ok((hit, true));
        }
        let lock = {
            let mut map = self.in_flight.lock().unwrap();
            map.entry(key.to_string()).or_default().clone()
        };
        let _guard = lock.lock().unwrap();
        if let Some(hit) = self.get(key)? {
            return Ok((hit, true));
        }
        let text = compute()?;
        self.put(key, &text)?;
        self.in_flight.lock().unwrap().remove(key);
        Ok((text, false))
    }
}

/// Writes through a temporary sibling file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = path.with_extension(format!("tmp.{}.{n}", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
