//! File-backed keyed store: an append-only JSON-lines log of upserts plus a
//! periodic snapshot. One writer at a time; readers load the latest
//! published map without locking.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use arc_swap::ArcSwap;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::web::write_atomic;

pub trait Keyed {
    fn key(&self) -> &str;
}

struct Writer {
    log: File,
    since_snapshot: usize,
}

pub struct JsonStore<T> {
    log_path: PathBuf,
    snapshot_path: PathBuf,
    current: ArcSwap<BTreeMap<String, T>>,
    writer: Mutex<Writer>,
    snapshot_every: usize,
}

impl<T> JsonStore<T>
where
    T: Keyed + Clone + Serialize + DeserializeOwned,
{
    pub const DEFAULT_SNAPSHOT_EVERY: usize = 64;

    /// Opens `<dir>/<name>.log` and `<dir>/<name>.snapshot.json`, creating
    /// them if needed. A torn final log line is ignored.
    pub fn open(dir: &Path, name: &str) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        let log_path = dir.join(format!("{name}.log"));
        let snapshot_path = dir.join(format!("{name}.snapshot.json"));
        let mut map: BTreeMap<String, T> = match std::fs::read(&snapshot_path) {
            Ok(bytes) => {
                serde_json::from_slice(&bytes).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(e),
        };
        let mut replayed = 0;
        if let Ok(file) = File::open(&log_path) {
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<T>(&line) {
                    Ok(v) => {
                        map.insert(v.key().to_string(), v);
                        replayed += 1;
                    }
                    Err(e) => log::warn!("{}: skipping line {}: {e}", log_path.display(), i + 1),
                }
            }
        }
        let mut log = OpenOptions::new().create(true).append(true).open(&log_path)?;
        let len = log.metadata()?.len();
        if len > 0 && !std::fs::read(&log_path)?.ends_with(b"\n") {
            log.write_all(b"\n")?;
        }
        Ok(JsonStore {
            log_path,
            snapshot_path,
            current: ArcSwap::from_pointee(map),
            writer: Mutex::new(Writer {
                log,
                since_snapshot: replayed,
            }),
            snapshot_every: Self::DEFAULT_SNAPSHOT_EVERY,
        })
    }

    pub fn with_snapshot_every(mut self, n: usize) -> Self {
        self.snapshot_every = n.max(1);
        self
    }

    /// Inserts or replaces the value under its key, durably.
    pub fn upsert(&self, value: T) -> std::io::Result<()> {
        let mut w = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        let mut line = serde_json::to_vec(&value).map_err(std::io::Error::other)?;
        line.push(b'\n');
        w.log.write_all(&line)?;
        w.log.sync_data()?;
        let mut next = BTreeMap::clone(&self.current.load());
        next.insert(value.key().to_string(), value);
        let next = Arc::new(next);
        self.current.store(next.clone());
        w.since_snapshot += 1;
        if w.since_snapshot >= self.snapshot_every {
            self.compact(&mut w, &next)?;
        }
        Ok(())
    }

    fn compact(&self, w: &mut Writer, map: &BTreeMap<String, T>) -> std::io::Result<()> {
        let bytes = serde_json::to_vec(map).map_err(std::io::Error::other)?;
        write_atomic(&self.snapshot_path, &bytes)?;
        w.log.set_len(0)?;
        w.log.sync_data()?;
        w.since_snapshot = 0;
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<T> {
        self.current.load().get(key).cloned()
    }

    /// The latest published map.
    pub fn snapshot(&self) -> Arc<BTreeMap<String, T>> {
        self.current.load_full()
    }

    pub fn len(&self) -> usize {
        self.current.load().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn log_path(&self) -> &Path {
        &self.log_path
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    struct Item {
        id: String,
        v: u32,
    }

    impl Keyed for Item {
        fn key(&self) -> &str {
            &self.id
        }
    }

    fn item(id: &str, v: u32) -> Item {
        Item { id: id.into(), v }
    }

    #[test]
    fn survives_reopen_across_snapshots() {
        let dir = tempfile::tempdir().unwrap();
        {
            let s = JsonStore::<Item>::open(dir.path(), "items")
                .unwrap()
                .with_snapshot_every(3);
            for i in 0..7 {
                s.upsert(item(&format!("k{}", i % 5), i)).unwrap();
            }
            assert_eq!(s.len(), 5);
        }
        let s = JsonStore::<Item>::open(dir.path(), "items").unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.get("k1"), Some(item("k1", 6)));
        assert_eq!(s.get("k4"), Some(item("k4", 4)));
    }

    #[test]
    fn torn_tail_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        {
            let s = JsonStore::<Item>::open(dir.path(), "items").unwrap();
            s.upsert(item("a", 1)).unwrap();
        }
        let log = dir.path().join("items.log");
        let mut f = OpenOptions::new().append(true).open(&log).unwrap();
        f.write_all(b"{\"id\":\"b\",\"v\"").unwrap();
        let s = JsonStore::<Item>::open(dir.path(), "items").unwrap();
        assert_eq!(s.len(), 1);
        s.upsert(item("c", 3)).unwrap();
        drop(s);
        let s = JsonStore::<Item>::open(dir.path(), "items").unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn readers_see_old_snapshot_until_publish() {
        let dir = tempfile::tempdir().unwrap();
        let s = JsonStore::<Item>::open(dir.path(), "items").unwrap();
        s.upsert(item("a", 1)).unwrap();
        let before = s.snapshot();
        s.upsert(item("b", 2)).unwrap();
        assert_eq!(before.len(), 1);
        assert_eq!(s.snapshot().len(), 2);
    }
}
