use super::RawResponse;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Content-addressed response store: `<dir>/<first 2 hex chars>/<fingerprint>.json`.
///
/// Writes go to a temporary sibling and are renamed into place, so readers
/// never observe a partial file.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ResponseCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, fingerprint: &str) -> PathBuf {
        let prefix = fingerprint.get(..2).unwrap_or("__");
        self.dir.join(prefix).join(format!("{fingerprint}.json"))
    }

    pub fn get(&self, fingerprint: &str) -> io::Result<Option<RawResponse>> {
        let path = self.path_for(fingerprint);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e),
        };
        // A corrupt entry is treated as a miss and overwritten on the next put.
        Ok(serde_json::from_slice::<RawResponse>(&bytes)
            .ok()
            .filter(|r| r.instruction_fingerprint == fingerprint))
    }

    pub fn put(&self, response: &RawResponse) -> io::Result<()> {
        let path = self.path_for(&response.instruction_fingerprint);
        let parent = path.parent().expect("cache path has a parent");
        std::fs::create_dir_all(parent)?;
        let tmp = parent.join(format!(
            ".{}.{}.{}.tmp",
            response.instruction_fingerprint,
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let body = serde_json::to_vec_pretty(response).map_err(io::Error::other)?;
        std::fs::write(&tmp, body)?;
        std::fs::rename(&tmp, &path)
    }
}

fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Removes cache entries retrieved more than `max_age` ago and returns how many
/// were removed. Entries whose JSON cannot be read are aged by file mtime.
/// Per-file errors are skipped.
pub fn cache_gc(cache_dir: &Path, max_age: Duration) -> usize {
    let now = now_secs();
    let mut removed = 0;
    let Ok(prefixes) = std::fs::read_dir(cache_dir) else {
        return 0;
    };
    for prefix in prefixes.flatten() {
        let Ok(entries) = std::fs::read_dir(prefix.path()) else {
            continue;
        };
        for entry in entries.flatten() {
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let retrieved = std::fs::read(&path)
                .ok()
                .and_then(|b| serde_json::from_slice::<RawResponse>(&b).ok())
                .map(|r| r.retrieved_at)
                .or_else(|| {
                    entry
                        .metadata()
                        .ok()?
                        .modified()
                        .ok()?
                        .duration_since(UNIX_EPOCH)
                        .ok()
                        .map(|d| d.as_secs())
                });
            let Some(retrieved) = retrieved else { continue };
            if now.saturating_sub(retrieved) > max_age.as_secs() && std::fs::remove_file(&path).is_ok() {
                removed += 1;
            }
        }
    }
    removed
}
