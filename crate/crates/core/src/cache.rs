//! Persistent cache of directional pairwise judgments.
//!
//! On disk the cache is a JSON-lines file: a header line naming the format
//! version, then one [`PairwiseJudgment`] per line. New judgments are
//! appended; on reload the last record for a key wins. Keys include the
//! template hash, so editing a prompt never reuses stale answers.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::backend::Mode;
use crate::prompt::ParsedChoice;

const FORMAT: &str = "prp-judgment-cache";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

/// Identifies one directional prompt. `(A, B)` and `(B, A)` are distinct keys.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JudgmentKey {
    pub backend: String,
    pub template_hash: String,
    pub mode: Mode,
    pub query_id: String,
    pub first_id: String,
    pub second_id: String,
}

/// Outcome of one directional prompt plus the raw evidence behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseJudgment {
    #[serde(flatten)]
    pub key: JudgmentKey,
    pub choice: ParsedChoice,
    /// Log-likelihoods of ("Passage A", "Passage B") in scoring mode.
    #[serde(default, with = "score_pair", skip_serializing_if = "Option::is_none")]
    pub scores: Option<[f64; 2]>,
    /// Generated text in generation mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
    pub timestamp: u64,
}

impl PairwiseJudgment {
    pub fn new(key: JudgmentKey, choice: ParsedChoice, scores: Option<[f64; 2]>, raw_text: Option<String>) -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            key,
            choice,
            scores,
            raw_text,
            timestamp,
        }
    }

    fn same_outcome(&self, other: &Self) -> bool {
        self.key == other.key
            && self.choice == other.choice
            && self.raw_text == other.raw_text
            && match (self.scores, other.scores) {
                (Some(a), Some(b)) => a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()),
                (None, None) => true,
                _ => false,
            }
    }
}

// Scores can be -inf (oracle sentinels), which JSON numbers cannot carry.
mod score_pair {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<[f64; 2]>, s: S) -> Result<S::Ok, S::Error> {
        v.map(|[a, b]| [a.to_string(), b.to_string()]).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<[f64; 2]>, D::Error> {
        let raw: Option<[String; 2]> = Option::deserialize(d)?;
        raw.map(|[a, b]| {
            let parse = |x: &str| x.parse::<f64>().map_err(serde::de::Error::custom);
            Ok([parse(&a)?, parse(&b)?])
        })
        .transpose()
    }
}

/// Thread-safe judgment store, optionally backed by a file.
#[derive(Debug, Default)]
pub struct JudgmentCache {
    entries: RwLock<HashMap<JudgmentKey, PairwiseJudgment>>,
    file: Option<Mutex<File>>,
    path: Option<PathBuf>,
}

impl JudgmentCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) a cache file and loads its records.
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref();
        let mut entries = HashMap::new();
        let exists = path.exists() && std::fs::metadata(path)?.len() > 0;
        if exists {
            let reader = BufReader::new(File::open(path)?);
            let mut lines = reader.lines();
            let header: Header = match lines.next() {
                Some(line) => serde_json::from_str(&line?).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?,
                None => unreachable!("non-empty file has a first line"),
            };
            if header.format != FORMAT || header.version != VERSION {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("{}: unsupported cache format {} v{}", path.display(), header.format, header.version),
                ));
            }
            for (i, line) in lines.enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<PairwiseJudgment>(&line) {
                    Ok(j) => {
                        entries.insert(j.key.clone(), j);
                    }
                    Err(e) => warn!("{}:{}: unreadable cache record ignored ({e})", path.display(), i + 2),
                }
            }
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        if !exists {
            let header = serde_json::to_string(&Header {
                format: FORMAT.into(),
                version: VERSION,
            })?;
            file.write_all(format!("{header}\n").as_bytes())?;
        }
        Ok(Self {
            entries: RwLock::new(entries),
            file: Some(Mutex::new(file)),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lookup(&self, key: &JudgmentKey) -> Option<PairwiseJudgment> {
        self.entries.read().unwrap_or_else(|e| e.into_inner()).get(key).cloned()
    }

    /// Records a judgment. Re-storing an identical outcome is a no-op.
    /// The in-memory entry is always updated; an error means only the
    /// on-disk append failed.
    pub fn store(&self, judgment: PairwiseJudgment) -> io::Result<()> {
        {
            let mut entries = self.entries.write().unwrap_or_else(|e| e.into_inner());
            if let Some(old) = entries.get(&judgment.key) {
                if old.same_outcome(&judgment) {
                    return Ok(());
                }
            }
            entries.insert(judgment.key.clone(), judgment.clone());
        }
        if let Some(file) = &self.file {
            let mut line = serde_json::to_string(&judgment)?;
            line.push('\n');
            let mut f = file.lock().unwrap_or_else(|e| e.into_inner());
            f.write_all(line.as_bytes())?;
            f.flush()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(first: &str, second: &str) -> JudgmentKey {
        JudgmentKey {
            backend: "oracle".into(),
            template_hash: "abc".into(),
            mode: Mode::Scoring,
            query_id: "q1".into(),
            first_id: first.into(),
            second_id: second.into(),
        }
    }

    fn judgment(first: &str, second: &str) -> PairwiseJudgment {
        PairwiseJudgment::new(
            key(first, second),
            ParsedChoice::ChoseA,
            Some([0.0, f64::NEG_INFINITY]),
            None,
        )
    }

    #[test]
    fn roundtrip_and_directionality() {
        let cache = JudgmentCache::in_memory();
        cache.store(judgment("a", "b")).unwrap();
        assert_eq!(cache.lookup(&key("a", "b")).unwrap().choice, ParsedChoice::ChoseA);
        assert!(cache.lookup(&key("b", "a")).is_none());
    }

    #[test]
    fn survives_restart_and_stays_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let cache = JudgmentCache::open(&path).unwrap();
            cache.store(judgment("a", "b")).unwrap();
            cache.store(judgment("a", "b")).unwrap();
            let mut gen = judgment("b", "a");
            gen.key.mode = Mode::Generation;
            gen.scores = None;
            gen.raw_text = Some("Passage A".into());
            cache.store(gen).unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3, "{text}");
        let cache = JudgmentCache::open(&path).unwrap();
        assert_eq!(cache.len(), 2);
        let j = cache.lookup(&key("a", "b")).unwrap();
        assert_eq!(j.scores, Some([0.0, f64::NEG_INFINITY]));
        let mut gk = key("b", "a");
        gk.mode = Mode::Generation;
        assert_eq!(cache.lookup(&gk).unwrap().raw_text.as_deref(), Some("Passage A"));
    }

    #[test]
    fn template_hash_separates_entries() {
        let cache = JudgmentCache::in_memory();
        cache.store(judgment("a", "b")).unwrap();
        let mut other = key("a", "b");
        other.template_hash = "def".into();
        assert!(cache.lookup(&other).is_none());
    }

    #[test]
    fn corrupt_tail_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        JudgmentCache::open(&path).unwrap().store(judgment("a", "b")).unwrap();
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"backend\": \"or").unwrap();
        drop(f);
        let cache = JudgmentCache::open(&path).unwrap();
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn rejects_foreign_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        std::fs::write(&path, "{\"format\":\"other\",\"version\":1}\n").unwrap();
        assert!(JudgmentCache::open(&path).is_err());
    }

    #[test]
    fn concurrent_writers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let cache = JudgmentCache::open(&path).unwrap();
        std::thread::scope(|s| {
            for t in 0..4 {
                let cache = &cache;
                s.spawn(move || {
                    for i in 0..50 {
                        cache.store(judgment(&format!("d{i}"), &format!("e{}", i % (t + 1)))).unwrap();
                    }
                });
            }
        });
        let reloaded = JudgmentCache::open(&path).unwrap();
        assert_eq!(reloaded.len(), cache.len());
    }
}
