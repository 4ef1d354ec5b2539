//! The index catalog: a JSON-lines file with one entry per built index.
//! Writers serialize through a sibling `.lock` file.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::btree::BTreeReader;
use super::colgroup::ColumnGroupFile;
use super::layout::{Codec, Layout};
use crate::detect::OptKind;
use crate::error::StorageError;

/// Identity of a source file: where it is and what it contained.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputId {
    pub path: PathBuf,
    pub sha256: String,
    pub size: u64,
}

impl InputId {
    pub fn of(path: &Path) -> Result<Self, StorageError> {
        let canon = canonical(path)?;
        let mut f = fs::File::open(&canon).map_err(|e| StorageError::io(&canon, e))?;
        let mut h = Sha256::new();
        let mut buf = vec![0u8; 1 << 16];
        let mut size = 0u64;
        loop {
            let n = f.read(&mut buf).map_err(|e| StorageError::io(&canon, e))?;
            if n == 0 {
                break;
            }
            size += n as u64;
            h.update(&buf[..n]);
        }
        Ok(InputId { path: canon, sha256: hex::encode(h.finalize()), size })
    }
}

pub fn canonical(path: &Path) -> Result<PathBuf, StorageError> {
    fs::canonicalize(path).map_err(|e| StorageError::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    BTree,
    ColGroup,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub input: InputId,
    pub kind: IndexKind,
    /// Optimizations this index can serve.
    pub flavors: BTreeSet<OptKind>,
    pub index_field: Option<String>,
    pub retained_fields: Vec<String>,
    pub codecs: BTreeMap<String, Codec>,
    pub index_path: PathBuf,
    pub dictionaries: BTreeMap<String, PathBuf>,
    /// Index file plus its dictionaries.
    pub size_bytes: u64,
    pub created_at: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VerifyStatus {
    Ok,
    HashMismatch { expected: String, actual: String },
    Missing(PathBuf),
    HeaderMismatch(String),
}

impl CatalogEntry {
    /// Recompute the input hash and check the index header against the entry.
    pub fn verify(&self) -> VerifyStatus {
        let actual = match InputId::of(&self.input.path) {
            Ok(id) => id,
            Err(_) => return VerifyStatus::Missing(self.input.path.clone()),
        };
        if actual.sha256 != self.input.sha256 {
            return VerifyStatus::HashMismatch { expected: self.input.sha256.clone(), actual: actual.sha256 };
        }
        if !self.index_path.exists() {
            return VerifyStatus::Missing(self.index_path.clone());
        }
        for p in self.dictionaries.values() {
            if !p.exists() {
                return VerifyStatus::Missing(p.clone());
            }
        }
        let layout = match self.kind {
            IndexKind::BTree => BTreeReader::open(&self.index_path).and_then(|mut r| {
                r.verify_checksum()?;
                let key = r.header.layout.schema.fields[r.header.key_field].name.clone();
                if Some(&key) != self.index_field.as_ref() {
                    return Err(StorageError::InvalidSpec(format!("index field is {key}")));
                }
                Ok(r.header.layout)
            }),
            IndexKind::ColGroup => ColumnGroupFile::open(&self.index_path).map(|f| f.layout),
        };
        match layout {
            Err(e) => VerifyStatus::HeaderMismatch(e.to_string()),
            Ok(l) => match self.check_layout(&l) {
                Ok(()) => VerifyStatus::Ok,
                Err(m) => VerifyStatus::HeaderMismatch(m),
            },
        }
    }

    fn check_layout(&self, l: &Layout) -> Result<(), String> {
        if l.retained_names() != self.retained_fields {
            return Err(format!("retained fields {:?} in file", l.retained_names()));
        }
        for (&i, &c) in l.retained.iter().zip(&l.codecs) {
            let name = &l.schema.fields[i].name;
            if self.codecs.get(name) != Some(&c) {
                return Err(format!("codec of {name} is {c:?} in file"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MalformedLine {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct Catalog {
    pub path: PathBuf,
    pub entries: Vec<CatalogEntry>,
    pub malformed: Vec<MalformedLine>,
}

struct LockGuard(PathBuf);

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn lock(catalog: &Path) -> Result<LockGuard, StorageError> {
    lock_with(catalog, 500)
}

fn lock_with(catalog: &Path, attempts: u32) -> Result<LockGuard, StorageError> {
    let mut name = catalog.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".lock");
    let lock = catalog.with_file_name(name);
    for _ in 0..attempts {
        match fs::OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(_) => return Ok(LockGuard(lock)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => thread::sleep(Duration::from_millis(10)),
            Err(e) => return Err(StorageError::io(&lock, e)),
        }
    }
    Err(StorageError::Lock { path: lock })
}

impl Catalog {
    /// Load the catalog; a missing file is an empty catalog. Lines that do
    /// not parse are skipped and reported in `malformed`.
    pub fn load(path: &Path) -> Result<Self, StorageError> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(StorageError::io(path, e)),
        };
        let mut cat = Catalog { path: path.to_path_buf(), ..Default::default() };
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<CatalogEntry>(line) {
                Ok(e) => cat.entries.push(e),
                Err(e) => cat.malformed.push(MalformedLine { line: i + 1, message: e.to_string() }),
            }
        }
        Ok(cat)
    }

    /// Append one entry as a single line under the catalog lock.
    pub fn append(&mut self, entry: CatalogEntry) -> Result<(), StorageError> {
        let _guard = lock(&self.path)?;
        let mut line = serde_json::to_string(&entry).expect("catalog entries serialize");
        line.push('\n');
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| StorageError::io(&self.path, e))?;
        f.write_all(line.as_bytes()).map_err(|e| StorageError::io(&self.path, e))?;
        f.sync_all().map_err(|e| StorageError::io(&self.path, e))?;
        self.entries.push(entry);
        Ok(())
    }

    /// Entries built from the file at `input` (compared by canonical path).
    pub fn entries_for(&self, input: &Path) -> Vec<&CatalogEntry> {
        let Ok(canon) = canonical(input) else { return Vec::new() };
        self.entries.iter().filter(|e| e.input.path == canon).collect()
    }
}

pub fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}
