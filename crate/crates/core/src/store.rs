//! Append-only cache of fetched revisions.
//!
//! Entries are keyed by `(title, rev_id)`. Wikipedia revisions never change,
//! so an entry is immutable once written and the only "invalidation" is
//! fetching a newer revision.
//!
//! # On-disk layout
//!
//! A store directory contains a single file, `revisions.log`. Each line is
//!
//! ```text
//! <sha256 of the JSON, lowercase hex>\t<CacheEntry as compact JSON>\n
//! ```
//!
//! Lines are appended and fsynced before [`Store::put`] returns. The checksum
//! is verified on every read; a mismatch surfaces as
//! [`StoreError::CorruptStore`]. A torn final line (no trailing newline) left
//! by a crash is ignored when the store is reopened.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::source::{AssessmentRating, FixtureArticle, FixtureCorpus, FixtureError, FixtureRevision, RevisionStamp};

const LOG_FILE: &str = "revisions.log";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StoreError {
    #[error("corrupt store entry for {title:?} revision {rev_id}: {reason}")]
    CorruptStore { title: String, rev_id: u64, reason: String },
    #[error("corrupt store log at byte {offset}: {reason}")]
    CorruptLog { offset: u64, reason: String },
    #[error("entry for {title:?} revision {rev_id} already exists with different content")]
    Conflict { title: String, rev_id: u64 },
    #[error("store I/O error on {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("fixture export failed: {0}")]
    Export(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionPayload {
    pub page_id: u64,
    pub assessment: AssessmentRating,
    pub revision: RevisionStamp,
    pub wikitext: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub title: String,
    pub rev_id: u64,
    pub fetched_at: DateTime<Utc>,
    pub payload: RevisionPayload,
}

#[derive(Debug, Clone, Copy)]
enum Location {
    Disk { offset: u64, len: usize },
    Memory(usize),
}

enum Backing {
    Disk { path: PathBuf, writer: Mutex<File> },
    Memory(RwLock<Vec<String>>),
}

#[derive(Default)]
struct Index {
    /// title → (revision timestamp, rev_id) → location
    by_title: HashMap<String, BTreeMap<(DateTime<Utc>, u64), Location>>,
    by_key: HashMap<(String, u64), Location>,
}

pub struct Store {
    backing: Backing,
    index: RwLock<Index>,
}

impl Store {
    pub fn in_memory() -> Self {
        Store { backing: Backing::Memory(RwLock::new(Vec::new())), index: RwLock::new(Index::default()) }
    }

    /// Opens (creating if needed) the store in `dir` and indexes its log.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref();
        let io = |path: &Path, e: std::io::Error| StoreError::Io { path: path.to_path_buf(), message: e.to_string() };
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let path = dir.join(LOG_FILE);
        let mut writer = OpenOptions::new().create(true).read(true).append(true).open(&path).map_err(|e| io(&path, e))?;
        let mut contents = Vec::new();
        writer.read_to_end(&mut contents).map_err(|e| io(&path, e))?;

        let mut index = Index::default();
        let mut offset = 0usize;
        while offset < contents.len() {
            let Some(nl) = contents[offset..].iter().position(|&b| b == b'\n') else {
                tracing::warn!(offset, "ignoring torn trailing line in store log");
                break;
            };
            let line = &contents[offset..offset + nl];
            let (title, stamp) = parse_key(line).map_err(|reason| StoreError::CorruptLog { offset: offset as u64, reason })?;
            let loc = Location::Disk { offset: offset as u64, len: nl };
            index.insert(title, stamp, loc);
            offset += nl + 1;
        }
        if offset < contents.len() {
            writer.set_len(offset as u64).map_err(|e| io(&path, e))?;
        }
        Ok(Store { backing: Backing::Disk { path, writer: Mutex::new(writer) }, index: RwLock::new(index) })
    }

    /// Appends `entry`; returns once it is durable. Re-putting an identical
    /// entry is a no-op.
    pub fn put(&self, entry: CacheEntry) -> Result<(), StoreError> {
        let key = (entry.title.clone(), entry.rev_id);
        if let Some(existing) = self.get_revision(&entry.title, entry.rev_id)? {
            return if existing.payload == entry.payload {
                Ok(())
            } else {
                Err(StoreError::Conflict { title: entry.title, rev_id: entry.rev_id })
            };
        }
        let json = serde_json::to_string(&entry).expect("cache entry serializes");
        let line = format!("{}\t{}", checksum(json.as_bytes()), json);
        let loc = match &self.backing {
            Backing::Disk { path, writer } => {
                let mut file = writer.lock().unwrap();
                let io = |e: std::io::Error| StoreError::Io { path: path.clone(), message: e.to_string() };
                let offset = file.seek(SeekFrom::End(0)).map_err(io)?;
                file.write_all(line.as_bytes()).and_then(|_| file.write_all(b"\n")).map_err(io)?;
                file.sync_data().map_err(io)?;
                Location::Disk { offset, len: line.len() }
            }
            Backing::Memory(lines) => {
                let mut lines = lines.write().unwrap();
                lines.push(line);
                Location::Memory(lines.len() - 1)
            }
        };
        let mut index = self.index.write().unwrap();
        if !index.by_key.contains_key(&key) {
            index.insert(key.0, (entry.payload.revision.timestamp, entry.rev_id), loc);
        }
        Ok(())
    }

    /// Newest entry for `title` whose revision timestamp is `<= as_of`.
    pub fn get(&self, title: &str, as_of: DateTime<Utc>) -> Result<Option<CacheEntry>, StoreError> {
        let loc = {
            let index = self.index.read().unwrap();
            index
                .by_title
                .get(title)
                .and_then(|revs| revs.range(..=(as_of, u64::MAX)).next_back().map(|(_, loc)| *loc))
        };
        loc.map(|loc| self.read(title, loc)).transpose()
    }

    pub fn get_revision(&self, title: &str, rev_id: u64) -> Result<Option<CacheEntry>, StoreError> {
        let loc = self.index.read().unwrap().by_key.get(&(title.to_string(), rev_id)).copied();
        loc.map(|loc| self.read(title, loc)).transpose()
    }

    pub fn len(&self) -> usize {
        self.index.read().unwrap().by_key.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every entry, ordered by title then revision.
    pub fn entries(&self) -> Result<Vec<CacheEntry>, StoreError> {
        let mut keys: Vec<(String, u64, Location)> = {
            let index = self.index.read().unwrap();
            index.by_key.iter().map(|((t, r), loc)| (t.clone(), *r, *loc)).collect()
        };
        keys.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
        keys.into_iter().map(|(t, _, loc)| self.read(&t, loc)).collect()
    }

    /// A fixture corpus holding every cached revision.
    pub fn export_fixture(&self) -> Result<FixtureCorpus, StoreError> {
        let mut grouped: BTreeMap<String, FixtureArticle> = BTreeMap::new();
        for entry in self.entries()? {
            let article = grouped.entry(entry.title.clone()).or_insert_with(|| FixtureArticle {
                title: entry.title.clone(),
                page_id: entry.payload.page_id,
                assessment: entry.payload.assessment,
                revisions: Vec::new(),
            });
            article.revisions.push(FixtureRevision {
                rev_id: entry.rev_id,
                timestamp: entry.payload.revision.timestamp,
                wikitext: entry.payload.wikitext,
            });
        }
        FixtureCorpus::from_articles(grouped.into_values()).map_err(|e: FixtureError| StoreError::Export(e.to_string()))
    }

    /// Caches every revision of `corpus`, stamped with `fetched_at`.
    pub fn import_fixture(&self, corpus: &FixtureCorpus, fetched_at: DateTime<Utc>) -> Result<usize, StoreError> {
        let mut count = 0;
        for article in corpus.articles() {
            for rev in &article.revisions {
                self.put(CacheEntry {
                    title: article.title.clone(),
                    rev_id: rev.rev_id,
                    fetched_at,
                    payload: RevisionPayload {
                        page_id: article.page_id,
                        assessment: article.assessment,
                        revision: RevisionStamp {
                            rev_id: rev.rev_id,
                            timestamp: rev.timestamp,
                            size_bytes: rev.wikitext.len() as u64,
                        },
                        wikitext: rev.wikitext.clone(),
                    },
                })?;
                count += 1;
            }
        }
        Ok(count)
    }

    fn read(&self, title: &str, loc: Location) -> Result<CacheEntry, StoreError> {
        let line = match (&self.backing, loc) {
            (Backing::Disk { path, .. }, Location::Disk { offset, len }) => {
                let io = |e: std::io::Error| StoreError::Io { path: path.clone(), message: e.to_string() };
                let mut file = File::open(path).map_err(io)?;
                file.seek(SeekFrom::Start(offset)).map_err(io)?;
                let mut buf = vec![0u8; len];
                file.read_exact(&mut buf).map_err(io)?;
                buf
            }
            (Backing::Memory(lines), Location::Memory(i)) => lines.read().unwrap()[i].clone().into_bytes(),
            _ => unreachable!("location kind always matches backing"),
        };
        let corrupt = |rev_id: u64, reason: &str| StoreError::CorruptStore {
            title: title.to_string(),
            rev_id,
            reason: reason.to_string(),
        };
        let (sum, json) = split_line(&line).ok_or_else(|| corrupt(0, "missing checksum field"))?;
        let entry: CacheEntry = serde_json::from_slice(json).map_err(|e| corrupt(0, &e.to_string()))?;
        if checksum(json) != sum {
            return Err(corrupt(entry.rev_id, "checksum mismatch"));
        }
        Ok(entry)
    }
}

impl Index {
    fn insert(&mut self, title: String, stamp: (DateTime<Utc>, u64), loc: Location) {
        self.by_key.entry((title.clone(), stamp.1)).or_insert(loc);
        self.by_title.entry(title).or_default().entry(stamp).or_insert(loc);
    }
}

fn checksum(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn split_line(line: &[u8]) -> Option<(&str, &[u8])> {
    let tab = line.iter().position(|&b| b == b'\t')?;
    Some((std::str::from_utf8(&line[..tab]).ok()?, &line[tab + 1..]))
}

/// Index key of a log line. Checksums are verified lazily on read.
fn parse_key(line: &[u8]) -> Result<(String, (DateTime<Utc>, u64)), String> {
    #[derive(Deserialize)]
    struct KeyOnly {
        title: String,
        rev_id: u64,
        payload: PayloadStamp,
    }
    #[derive(Deserialize)]
    struct PayloadStamp {
        revision: RevisionStamp,
    }
    let (_, json) = split_line(line).ok_or("missing checksum field")?;
    let key: KeyOnly = serde_json::from_slice(json).map_err(|e| e.to_string())?;
    Ok((key.title, (key.payload.revision.timestamp, key.rev_id)))
}
