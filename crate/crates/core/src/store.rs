//! Ingest-and-dedup store for incoming requests.
//!
//! An incoming request whose (requester, token multiset) matches a stored
//! one is merged into it instead of creating a new record. Ids are
//! decimal strings of a counter starting at 1.
//!
//! Snapshot layout: the magic bytes `RIA1`, then per record a little-endian
//! `u32` payload length followed by the record document (see
//! [`crate::wire::serialize_record`]), in ascending id order.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::RwLock;

use thiserror::Error;

use crate::model::{monotonic_ns, normalize, PriorityHint, ServiceRequest, TokenBag};
use crate::wire;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"RIA1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RequestState {
    New,
    Mapped,
    Filtered,
    Selected,
    Failed,
}

impl RequestState {
    pub fn as_str(self) -> &'static str {
        match self {
            RequestState::New => "new",
            RequestState::Mapped => "mapped",
            RequestState::Filtered => "filtered",
            RequestState::Selected => "selected",
            RequestState::Failed => "failed",
        }
    }

    /// Forward along New, Mapped, Filtered, Selected (skipping allowed), or
    /// into Failed from anywhere.
    pub fn can_advance_to(self, next: RequestState) -> bool {
        next == RequestState::Failed || (self != RequestState::Failed && next > self)
    }
}

impl fmt::Display for RequestState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for RequestState {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "new" => RequestState::New,
            "mapped" => RequestState::Mapped,
            "filtered" => RequestState::Filtered,
            "selected" => RequestState::Selected,
            "failed" => RequestState::Failed,
            _ => return Err(()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredRequest {
    pub request: ServiceRequest,
    pub state: RequestState,
    pub merge_count: u64,
}

/// A request as it arrives, before the store assigns an id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewRequest {
    pub message_id: String,
    pub query: String,
    pub priority_hint: PriorityHint,
    pub requester: String,
}

impl NewRequest {
    pub fn new(requester: impl Into<String>, query: impl Into<String>) -> Self {
        Self {
            message_id: String::new(),
            query: query.into(),
            priority_hint: PriorityHint::NONE,
            requester: requester.into(),
        }
    }

    pub fn message_id(mut self, id: impl Into<String>) -> Self {
        self.message_id = id.into();
        self
    }

    pub fn priority(mut self, hint: PriorityHint) -> Self {
        self.priority_hint = hint;
        self
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("query has no tokens after normalization")]
    EmptyQuery,
    #[error("request `{0}` not found")]
    NotFound(String),
    #[error("illegal transition {from} -> {to}")]
    IllegalTransition {
        from: RequestState,
        to: RequestState,
    },
    #[error("snapshot i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
}

#[derive(Debug, Default)]
struct Inner {
    records: BTreeMap<u64, StoredRequest>,
    by_key: HashMap<(String, TokenBag), u64>,
    next_id: u64,
}

/// Many concurrent readers, one writer at a time.
#[derive(Debug, Default)]
pub struct RequestStore {
    inner: RwLock<Inner>,
}

fn parse_id(id: &str) -> Option<u64> {
    // Only canonical decimal renderings name a record.
    id.parse::<u64>().ok().filter(|n| n.to_string() == id)
}

impl RequestStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, Inner> {
        self.inner.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, Inner> {
        self.inner.write().unwrap_or_else(|e| e.into_inner())
    }

    /// Stores a new request, or merges it into an identical stored one.
    /// Returns the id and whether it was a duplicate.
    pub fn ingest(&self, req: NewRequest) -> Result<(String, bool), StoreError> {
        let tokens = normalize(&req.query);
        if tokens.is_empty() {
            return Err(StoreError::EmptyQuery);
        }
        let key = (req.requester.clone(), tokens);
        let mut inner = self.write();
        if let Some(&id) = inner.by_key.get(&key) {
            let rec = inner.records.get_mut(&id).expect("indexed record exists");
            rec.merge_count += 1;
            return Ok((id.to_string(), true));
        }
        inner.next_id += 1;
        let id = inner.next_id;
        let request = ServiceRequest {
            id: id.to_string(),
            message_id: req.message_id,
            query: req.query,
            tokens: key.1.clone(),
            priority_hint: req.priority_hint,
            requester: req.requester,
            received_at: monotonic_ns(),
        };
        inner.records.insert(
            id,
            StoredRequest {
                request,
                state: RequestState::New,
                merge_count: 1,
            },
        );
        inner.by_key.insert(key, id);
        Ok((id.to_string(), false))
    }

    pub fn get(&self, id: &str) -> Result<StoredRequest, StoreError> {
        parse_id(id)
            .and_then(|n| self.read().records.get(&n).cloned())
            .ok_or_else(|| StoreError::NotFound(id.to_owned()))
    }

    pub fn advance_state(&self, id: &str, next: RequestState) -> Result<StoredRequest, StoreError> {
        let n = parse_id(id).ok_or_else(|| StoreError::NotFound(id.to_owned()))?;
        let mut inner = self.write();
        let rec = inner
            .records
            .get_mut(&n)
            .ok_or_else(|| StoreError::NotFound(id.to_owned()))?;
        if !rec.state.can_advance_to(next) {
            return Err(StoreError::IllegalTransition {
                from: rec.state,
                to: next,
            });
        }
        rec.state = next;
        Ok(rec.clone())
    }

    pub fn len(&self) -> usize {
        self.read().records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All records in id order.
    pub fn records(&self) -> Vec<StoredRequest> {
        self.read().records.values().cloned().collect()
    }

    /// Encodes the whole store in the snapshot layout.
    pub fn snapshot_bytes(&self) -> Vec<u8> {
        let inner = self.read();
        let mut out = SNAPSHOT_MAGIC.to_vec();
        for rec in inner.records.values() {
            let payload = wire::serialize_record(rec);
            out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
            out.extend_from_slice(payload.as_bytes());
        }
        out
    }

    pub fn snapshot_save(&self, path: impl AsRef<Path>) -> Result<usize, StoreError> {
        let bytes = self.snapshot_bytes();
        std::fs::write(path, bytes)?;
        Ok(self.len())
    }

    /// Replaces the store contents with a snapshot. Returns the record count.
    pub fn snapshot_load(&self, path: impl AsRef<Path>) -> Result<usize, StoreError> {
        let bytes = std::fs::read(path)?;
        self.restore(&bytes)
    }

    pub fn restore(&self, bytes: &[u8]) -> Result<usize, StoreError> {
        let corrupt = |msg: String| StoreError::CorruptSnapshot(msg);
        let mut rest = bytes
            .strip_prefix(SNAPSHOT_MAGIC.as_slice())
            .ok_or_else(|| corrupt("missing RIA1 magic".into()))?;
        let mut fresh = Inner::default();
        while !rest.is_empty() {
            if rest.len() < 4 {
                return Err(corrupt("truncated length prefix".into()));
            }
            let (len, tail) = rest.split_at(4);
            let len = u32::from_le_bytes(len.try_into().expect("4 bytes")) as usize;
            if tail.len() < len {
                return Err(corrupt(format!(
                    "record needs {len} bytes, {} left",
                    tail.len()
                )));
            }
            let (payload, tail) = tail.split_at(len);
            rest = tail;
            let rec = wire::parse_record(payload).map_err(|e| corrupt(e.to_string()))?;
            let id = parse_id(&rec.request.id)
                .filter(|n| *n > 0)
                .ok_or_else(|| corrupt(format!("bad record id `{}`", rec.request.id)))?;
            if rec.request.tokens.is_empty() || rec.merge_count == 0 {
                return Err(corrupt(format!("record {id} violates store invariants")));
            }
            let key = (rec.request.requester.clone(), rec.request.tokens.clone());
            if fresh.by_key.insert(key, id).is_some() || fresh.records.insert(id, rec).is_some() {
                return Err(corrupt(format!("duplicate record {id}")));
            }
            fresh.next_id = fresh.next_id.max(id);
        }
        let count = fresh.records.len();
        *self.write() = fresh;
        Ok(count)
    }
}
