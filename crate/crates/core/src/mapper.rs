//! Registry of service descriptors with an inverted keyword index, and the
//! mapping stage that turns a request into candidates.

use std::collections::HashMap;
use std::sync::{Arc, RwLock, RwLockReadGuard};

use thiserror::Error;

use crate::model::{
    Candidate, DeclaredQos, DescriptorId, Endpoint, ModelError, ServiceDescriptor, ServiceRequest,
    TokenSet,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegistryError {
    #[error("descriptor `{0}` is already registered")]
    DuplicateId(DescriptorId),
    #[error("invalid descriptor: {0}")]
    InvalidDescriptor(#[from] ModelError),
}

/// Descriptors plus a token -> descriptor posting index.
///
/// Postings hold dense ordinals into `descriptors`, ascending.
#[derive(Debug, Default, Clone)]
pub struct RegistryIndex {
    descriptors: Vec<Arc<ServiceDescriptor>>,
    by_id: HashMap<DescriptorId, u32>,
    inverted: HashMap<String, Vec<u32>>,
    version: u64,
}

impl RegistryIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_descriptors(
        descriptors: impl IntoIterator<Item = ServiceDescriptor>,
    ) -> Result<Self, RegistryError> {
        let mut index = Self::new();
        for d in descriptors {
            index.register(d)?;
        }
        Ok(index)
    }

    /// Adds a descriptor and returns the new version.
    pub fn register(&mut self, descriptor: ServiceDescriptor) -> Result<u64, RegistryError> {
        if self.by_id.contains_key(descriptor.id()) {
            return Err(RegistryError::DuplicateId(descriptor.id().clone()));
        }
        let ordinal = u32::try_from(self.descriptors.len()).expect("registry fits in u32");
        for token in descriptor.keywords().iter() {
            self.inverted
                .entry(token.to_owned())
                .or_default()
                .push(ordinal);
        }
        self.by_id.insert(descriptor.id().clone(), ordinal);
        self.descriptors.push(Arc::new(descriptor));
        self.version += 1;
        Ok(self.version)
    }

    /// Builds and registers a descriptor from its parts.
    pub fn register_parts(
        &mut self,
        id: &str,
        name: &str,
        keywords: TokenSet,
        endpoint: Endpoint,
        qos: DeclaredQos,
    ) -> Result<u64, RegistryError> {
        self.register(ServiceDescriptor::new(id, name, keywords, endpoint, qos)?)
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn get(&self, id: &DescriptorId) -> Option<&ServiceDescriptor> {
        self.by_id
            .get(id)
            .map(|&i| self.descriptors[i as usize].as_ref())
    }

    /// Descriptors in registration order.
    pub fn descriptors(&self) -> impl ExactSizeIterator<Item = &ServiceDescriptor> {
        self.descriptors.iter().map(Arc::as_ref)
    }

    /// Ids of descriptors advertising `token`, in registration order.
    pub fn postings(&self, token: &str) -> impl Iterator<Item = &DescriptorId> {
        self.inverted
            .get(token)
            .into_iter()
            .flatten()
            .map(|&i| self.descriptors[i as usize].id())
    }

    /// Every indexed token, sorted.
    pub fn vocabulary(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.inverted.keys().map(String::as_str).collect();
        v.sort_unstable();
        v
    }
}

/// Jaccard similarity of two token sets; 0 when either is empty.
pub fn jaccard(a: &TokenSet, b: &TokenSet) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection_len(b);
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Relevance of `descriptor` to `request`: Jaccard over the request's
/// distinct tokens and the descriptor's keywords.
pub fn relevance(request: &ServiceRequest, descriptor: &ServiceDescriptor) -> f64 {
    jaccard(&request.tokens.to_set(), descriptor.keywords())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapOutcome {
    /// Descriptors sharing at least one token with the request, by id.
    pub candidates: Vec<Candidate>,
    pub d_count: u64,
    pub m_removed: u64,
}

/// Maps a request onto the registry through the inverted index.
pub fn map_request(request: &ServiceRequest, index: &RegistryIndex) -> MapOutcome {
    let query = request.tokens.to_set();
    // Each ordinal appears once per distinct shared token, so run lengths
    // are intersection sizes.
    let mut hits: Vec<u32> = query
        .iter()
        .filter_map(|t| index.inverted.get(t))
        .flatten()
        .copied()
        .collect();
    hits.sort_unstable();

    let mut candidates = Vec::new();
    let mut i = 0;
    while i < hits.len() {
        let ordinal = hits[i];
        let run = hits[i..].iter().take_while(|&&o| o == ordinal).count();
        i += run;
        let d = &index.descriptors[ordinal as usize];
        let union = query.len() + d.keywords().len() - run;
        candidates.push(Candidate {
            descriptor_id: d.id().clone(),
            relevance: run as f64 / union as f64,
        });
    }
    candidates.sort_unstable_by(|a, b| a.descriptor_id.cmp(&b.descriptor_id));

    let d_count = index.len() as u64;
    MapOutcome {
        m_removed: d_count - candidates.len() as u64,
        d_count,
        candidates,
    }
}

/// Shared registry: concurrent readers see one consistent version,
/// registrations are serialized.
#[derive(Debug, Default)]
pub struct Registry {
    inner: RwLock<RegistryIndex>,
}

impl Registry {
    pub fn new(index: RegistryIndex) -> Self {
        Self {
            inner: RwLock::new(index),
        }
    }

    /// Holds a read lock: the version cannot change while the guard lives.
    pub fn snapshot(&self) -> RwLockReadGuard<'_, RegistryIndex> {
        self.inner.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn register(&self, descriptor: ServiceDescriptor) -> Result<u64, RegistryError> {
        self.inner
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .register(descriptor)
    }

    pub fn version(&self) -> u64 {
        self.snapshot().version()
    }
}
