//! Content-addressed storage for post bodies.
//!
//! Transactions carry only a [`Cid`]; the bytes live here and are replicated
//! between peers on demand. Anything read back, from disk or from a peer, is
//! re-hashed before it is returned.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::RwLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::crypto::{decode_hex_exact, hash, Hash, HexError};

pub const MAX_CONTENT_BYTES: usize = 256 * 1024;
const CID_PREFIX: &str = "sha256-";

/// Content identifier, rendered `sha256-<64 hex>`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cid(pub Hash);

impl Cid {
    pub fn of(bytes: &[u8]) -> Cid {
        Cid(hash(bytes))
    }

    pub fn verify(&self, bytes: &[u8]) -> bool {
        hash(bytes) == self.0
    }
}

impl fmt::Display for Cid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{CID_PREFIX}{}", self.0)
    }
}

impl fmt::Debug for Cid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cid({self})")
    }
}

impl FromStr for Cid {
    type Err = HexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s.strip_prefix(CID_PREFIX).ok_or(HexError::Prefix)?;
        decode_hex_exact::<32>(body).map(|b| Cid(Hash(b)))
    }
}

impl Serialize for Cid {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Cid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error)]
pub enum ContentError {
    #[error("content is {0} bytes, limit is {MAX_CONTENT_BYTES}")]
    TooLarge(usize),
    #[error("content store io: {0}")]
    Io(#[from] io::Error),
}

enum Backend {
    Memory(RwLock<BTreeMap<Cid, Vec<u8>>>),
    /// One file per cid under `root/ab/cd/sha256-abcd…`.
    Disk(PathBuf),
}

pub struct ContentStore {
    backend: Backend,
}

/// Anything that can be asked for a blob by cid; the answer is untrusted.
pub trait ContentSource {
    fn request(&mut self, cid: &Cid) -> Option<Vec<u8>>;
}

impl ContentStore {
    pub fn in_memory() -> Self {
        ContentStore { backend: Backend::Memory(RwLock::new(BTreeMap::new())) }
    }

    pub fn on_disk(root: impl Into<PathBuf>) -> Result<Self, ContentError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(ContentStore { backend: Backend::Disk(root) })
    }

    pub fn put(&self, bytes: &[u8]) -> Result<Cid, ContentError> {
        if bytes.len() > MAX_CONTENT_BYTES {
            return Err(ContentError::TooLarge(bytes.len()));
        }
        let cid = Cid::of(bytes);
        match &self.backend {
            Backend::Memory(map) => {
                map.write().unwrap().entry(cid).or_insert_with(|| bytes.to_vec());
            }
            Backend::Disk(root) => {
                let path = blob_path(root, &cid);
                if path.exists() && self.get(&cid).is_some() {
                    return Ok(cid);
                }
                let dir = path.parent().expect("fanout dir");
                fs::create_dir_all(dir)?;
                // Write-then-rename keeps concurrent puts of the same blob benign.
                let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
                tmp.write_all(bytes)?;
                tmp.as_file().sync_all()?;
                tmp.persist(&path).map_err(|e| e.error)?;
            }
        }
        Ok(cid)
    }

    /// Returns the blob for `cid` if held locally. Entries that no longer hash
    /// to their cid are evicted and reported absent.
    pub fn get(&self, cid: &Cid) -> Option<Vec<u8>> {
        match &self.backend {
            Backend::Memory(map) => {
                let bytes = map.read().unwrap().get(cid).cloned()?;
                if cid.verify(&bytes) {
                    return Some(bytes);
                }
                map.write().unwrap().remove(cid);
                None
            }
            Backend::Disk(root) => {
                let path = blob_path(root, cid);
                let bytes = fs::read(&path).ok()?;
                if cid.verify(&bytes) {
                    return Some(bytes);
                }
                let _ = fs::remove_file(&path);
                None
            }
        }
    }

    pub fn contains(&self, cid: &Cid) -> bool {
        self.get(cid).is_some()
    }

    pub fn len(&self) -> usize {
        match &self.backend {
            Backend::Memory(map) => map.read().unwrap().len(),
            Backend::Disk(root) => count_blobs(root),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Asks each peer in order; the first response that hashes to `cid` is
    /// stored and returned, everything else is discarded.
    pub fn fetch_from_peers<P: ContentSource>(&self, cid: &Cid, peers: &mut [P]) -> Option<Vec<u8>> {
        if let Some(bytes) = self.get(cid) {
            return Some(bytes);
        }
        for peer in peers.iter_mut() {
            let Some(bytes) = peer.request(cid) else { continue };
            if bytes.len() <= MAX_CONTENT_BYTES && cid.verify(&bytes) {
                self.put(&bytes).ok()?;
                return Some(bytes);
            }
        }
        None
    }

    /// Test hook: overwrite a stored entry without re-keying it.
    #[doc(hidden)]
    pub fn corrupt(&self, cid: &Cid, bytes: &[u8]) {
        match &self.backend {
            Backend::Memory(map) => {
                map.write().unwrap().insert(*cid, bytes.to_vec());
            }
            Backend::Disk(root) => {
                let _ = fs::write(blob_path(root, cid), bytes);
            }
        }
    }
}

impl ContentSource for &ContentStore {
    fn request(&mut self, cid: &Cid) -> Option<Vec<u8>> {
        self.get(cid)
    }
}

fn blob_path(root: &Path, cid: &Cid) -> PathBuf {
    let hex = cid.0.to_string();
    root.join(&hex[0..2]).join(&hex[2..4]).join(cid.to_string())
}

fn count_blobs(root: &Path) -> usize {
    let mut n = 0;
    let Ok(level1) = fs::read_dir(root) else { return 0 };
    for a in level1.flatten() {
        let Ok(level2) = fs::read_dir(a.path()) else { continue };
        for b in level2.flatten() {
            let Ok(files) = fs::read_dir(b.path()) else { continue };
            n += files
                .flatten()
                .filter(|f| f.file_name().to_string_lossy().starts_with(CID_PREFIX))
                .count();
        }
    }
    n
}
