//! In-memory RIC database with version history and the SDL access layer.
//!
//! Puts are linearizable (one writer lock around the map); versions per key
//! strictly increase; readers always observe a complete value written by
//! exactly one put. History depth is bounded per key.

use crate::clock::Clock;
use crate::error::{Error, Result};
use std::collections::HashMap;
use std::sync::{Arc, RwLock};

/// Entries kept per key before old versions are dropped.
pub const HISTORY_DEPTH: usize = 16;

/// One stored value version.
#[derive(Debug, Clone, PartialEq)]
pub struct RicDbEntry {
    pub key: String,
    pub version: u64,
    pub timestamp_ms: f64,
    pub value: Arc<Vec<u8>>,
}

#[derive(Debug, Default)]
struct KeyHistory {
    next_version: u64,
    entries: Vec<RicDbEntry>,
}

/// The shared key-value store.
#[derive(Debug)]
pub struct RicDb {
    map: RwLock<HashMap<String, KeyHistory>>,
    clock: Clock,
}

impl RicDb {
    pub fn new(clock: Clock) -> Arc<RicDb> {
        Arc::new(RicDb { map: RwLock::new(HashMap::new()), clock })
    }

    /// Issue an SDL handle for a client. Handles are the only access path.
    pub fn handle(self: &Arc<RicDb>, client: &str, can_read: bool, can_write: bool) -> SdlHandle {
        SdlHandle { db: Arc::clone(self), client: client.to_string(), can_read, can_write }
    }

    fn put(&self, key: &str, value: Vec<u8>) -> u64 {
        let mut map = self.map.write().expect("db lock poisoned");
        let hist = map.entry(key.to_string()).or_default();
        hist.next_version += 1;
        let version = hist.next_version;
        hist.entries.push(RicDbEntry {
            key: key.to_string(),
            version,
            timestamp_ms: self.clock.now_ms(),
            value: Arc::new(value),
        });
        if hist.entries.len() > HISTORY_DEPTH {
            let drop = hist.entries.len() - HISTORY_DEPTH;
            hist.entries.drain(..drop);
        }
        version
    }

    fn get_latest(&self, key: &str) -> Option<RicDbEntry> {
        let map = self.map.read().expect("db lock poisoned");
        map.get(key).and_then(|h| h.entries.last().cloned())
    }

    fn get_version(&self, key: &str, version: u64) -> Option<RicDbEntry> {
        let map = self.map.read().expect("db lock poisoned");
        map.get(key).and_then(|h| h.entries.iter().find(|e| e.version == version).cloned())
    }

    /// Number of retained versions for a key.
    pub fn history_len(&self, key: &str) -> usize {
        let map = self.map.read().expect("db lock poisoned");
        map.get(key).map(|h| h.entries.len()).unwrap_or(0)
    }
}

/// Per-client capability-checked access to the database.
#[derive(Debug, Clone)]
pub struct SdlHandle {
    db: Arc<RicDb>,
    client: String,
    can_read: bool,
    can_write: bool,
}

impl SdlHandle {
    pub fn client(&self) -> &str {
        &self.client
    }

    /// Store a value; returns the new (strictly increased) version.
    pub fn put(&self, key: &str, value: Vec<u8>) -> Result<u64> {
        if !self.can_write {
            return Err(Error::PermissionDenied(format!(
                "client {} has no write capability",
                self.client
            )));
        }
        Ok(self.db.put(key, value))
    }

    /// Fetch the highest-version entry for a key.
    pub fn get_latest(&self, key: &str) -> Result<RicDbEntry> {
        if !self.can_read {
            return Err(Error::PermissionDenied(format!(
                "client {} has no read capability",
                self.client
            )));
        }
        self.db.get_latest(key).ok_or_else(|| Error::NotFound(format!("key {key}")))
    }

    /// Fetch a specific version, if still retained.
    pub fn get_version(&self, key: &str, version: u64) -> Result<RicDbEntry> {
        if !self.can_read {
            return Err(Error::PermissionDenied(format!(
                "client {} has no read capability",
                self.client
            )));
        }
        self.db
            .get_version(key, version)
            .ok_or_else(|| Error::NotFound(format!("key {key} version {version}")))
    }
}
