//! Domain types shared by every pipeline stage.
//!
//! A request is free text reduced to a token multiset; a descriptor
//! advertises a keyword set. Everything downstream (mapping, filtering,
//! scoring) works on those two normalized forms.

use std::fmt;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use thiserror::Error;

/// Splits `text` on runs of non-alphanumeric characters, lowercases each
/// piece and drops empty pieces. The result is sorted, so two inputs with
/// the same tokens in any order normalize identically.
pub fn normalize(text: &str) -> TokenBag {
    let mut tokens: Vec<String> = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|piece| !piece.is_empty())
        .map(|piece| {
            // Some uppercase letters lowercase into a letter plus a combining
            // mark; keep only the alphanumeric part so normalize stays idempotent.
            piece
                .chars()
                .flat_map(char::to_lowercase)
                .filter(|c| c.is_alphanumeric())
                .collect::<String>()
        })
        .filter(|token| !token.is_empty())
        .collect();
    tokens.sort_unstable();
    TokenBag(tokens)
}

/// Order-insensitive token multiset, stored sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenBag(Vec<String>);

impl TokenBag {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    /// Number of occurrences of `token`.
    pub fn count(&self, token: &str) -> usize {
        let start = self.0.partition_point(|t| t.as_str() < token);
        self.0[start..].iter().take_while(|t| *t == token).count()
    }

    /// The distinct tokens, sorted.
    pub fn to_set(&self) -> TokenSet {
        let mut v = self.0.clone();
        v.dedup();
        TokenSet(v)
    }

    /// Tokens joined by a single space; `normalize(bag.join())` is `bag`.
    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

/// Sorted, deduplicated set of normalized tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenSet(Vec<String>);

impl TokenSet {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.binary_search_by(|t| t.as_str().cmp(token)).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn union(&self, other: &TokenSet) -> TokenSet {
        let mut v: Vec<String> = self.0.iter().chain(other.0.iter()).cloned().collect();
        v.sort_unstable();
        v.dedup();
        TokenSet(v)
    }

    /// Size of the intersection with `other`.
    pub fn intersection_len(&self, other: &TokenSet) -> usize {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.iter().filter(|t| large.contains(t)).count()
    }
}

impl<S: AsRef<str>> FromIterator<S> for TokenSet {
    /// Normalizes each item and collects the distinct tokens.
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut v: Vec<String> = iter
            .into_iter()
            .flat_map(|s| normalize(s.as_ref()).0)
            .collect();
        v.sort_unstable();
        v.dedup();
        TokenSet(v)
    }
}

/// Nanoseconds since the first call in this process, from a monotonic clock.
pub fn monotonic_ns() -> u64 {
    static BASE: OnceLock<Instant> = OnceLock::new();
    let base = BASE.get_or_init(Instant::now);
    base.elapsed().as_nanos() as u64
}

/// A client's query for a service, as held by the request store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceRequest {
    pub id: String,
    pub message_id: String,
    pub query: String,
    pub tokens: TokenBag,
    pub priority_hint: PriorityHint,
    pub requester: String,
    pub received_at: u64,
}

impl ServiceRequest {
    /// Builds a request whose tokens are derived from `query`.
    pub fn new(
        id: impl Into<String>,
        message_id: impl Into<String>,
        query: impl Into<String>,
        priority_hint: PriorityHint,
        requester: impl Into<String>,
        received_at: u64,
    ) -> Self {
        let query = query.into();
        let tokens = normalize(&query);
        Self {
            id: id.into(),
            message_id: message_id.into(),
            query,
            tokens,
            priority_hint,
            requester: requester.into(),
            received_at,
        }
    }

    /// Shorthand for tests and examples: anonymous request, no hint.
    pub fn with_query(id: impl Into<String>, query: impl Into<String>) -> Self {
        Self::new(id, "", query, PriorityHint::NONE, "anonymous", 0)
    }
}

/// Requester-supplied priority, 0 (none) through 9.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PriorityHint(u8);

impl PriorityHint {
    pub const NONE: PriorityHint = PriorityHint(0);
    pub const MAX: PriorityHint = PriorityHint(9);

    pub fn new(value: u8) -> Result<Self, ModelError> {
        if value > 9 {
            return Err(ModelError::PriorityOutOfRange(value));
        }
        Ok(PriorityHint(value))
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

/// Registry-wide identifier of a descriptor. Cheap to clone.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DescriptorId(Arc<str>);

impl DescriptorId {
    pub fn new(id: impl AsRef<str>) -> Self {
        DescriptorId(Arc::from(id.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DescriptorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&self.0)
    }
}

impl From<&str> for DescriptorId {
    fn from(s: &str) -> Self {
        DescriptorId::new(s)
    }
}

/// Endpoint fields a provider publishes alongside its binding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoint {
    pub port_name: String,
    pub ip_address: String,
    pub rec_port: u16,
    pub country: String,
}

impl Default for Endpoint {
    fn default() -> Self {
        Self {
            port_name: String::new(),
            ip_address: "127.0.0.1".to_owned(),
            rec_port: 80,
            country: String::new(),
        }
    }
}

/// Declared quality of service for a provider.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeclaredQos {
    pub latency_ms: f64,
    pub availability: f64,
}

impl DeclaredQos {
    pub const DEFAULT_LATENCY_MS: f64 = 100.0;
    pub const DEFAULT_AVAILABILITY: f64 = 0.99;

    pub fn new(latency_ms: f64, availability: f64) -> Result<Self, ModelError> {
        if !latency_ms.is_finite() || latency_ms < 0.0 {
            return Err(ModelError::InvalidLatency(latency_ms));
        }
        if !(0.0..=1.0).contains(&availability) {
            return Err(ModelError::InvalidAvailability(availability));
        }
        Ok(Self {
            latency_ms,
            availability,
        })
    }
}

impl Default for DeclaredQos {
    fn default() -> Self {
        Self {
            latency_ms: Self::DEFAULT_LATENCY_MS,
            availability: Self::DEFAULT_AVAILABILITY,
        }
    }
}

/// A registered provider.
///
/// The keyword set always contains the tokens of `name`, which is what a
/// parsed WSDL binding yields as well.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceDescriptor {
    id: DescriptorId,
    name: String,
    keywords: TokenSet,
    endpoint: Endpoint,
    qos: DeclaredQos,
}

impl ServiceDescriptor {
    pub fn new(
        id: impl AsRef<str>,
        name: impl Into<String>,
        keywords: TokenSet,
        endpoint: Endpoint,
        qos: DeclaredQos,
    ) -> Result<Self, ModelError> {
        let id = id.as_ref();
        if id.is_empty() {
            return Err(ModelError::EmptyId);
        }
        if endpoint.rec_port == 0 {
            return Err(ModelError::PortOutOfRange(0));
        }
        let name = name.into();
        let keywords = keywords.union(&normalize(&name).to_set());
        if keywords.is_empty() {
            return Err(ModelError::EmptyKeywords);
        }
        // Re-validate in case the caller built the struct literal by hand.
        let qos = DeclaredQos::new(qos.latency_ms, qos.availability)?;
        Ok(Self {
            id: DescriptorId::new(id),
            name,
            keywords,
            endpoint,
            qos,
        })
    }

    pub fn id(&self) -> &DescriptorId {
        &self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn keywords(&self) -> &TokenSet {
        &self.keywords
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    pub fn qos(&self) -> DeclaredQos {
        self.qos
    }
}

/// A mapped descriptor with its match relevance in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub descriptor_id: DescriptorId,
    pub relevance: f64,
}

/// Normalized inputs to the priority score, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreComponents {
    pub relevance: f64,
    pub latency_norm: f64,
    pub availability: f64,
    pub hint_boost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorityScore {
    pub descriptor_id: DescriptorId,
    pub score: f64,
    pub components: ScoreComponents,
}

/// Rating band, ordered `Poor < Average < Good < Excellent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QosBand {
    Poor,
    Average,
    Good,
    Excellent,
}

impl QosBand {
    /// Best first.
    pub const ALL: [QosBand; 4] = [
        QosBand::Excellent,
        QosBand::Good,
        QosBand::Average,
        QosBand::Poor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QosBand::Excellent => "excellent",
            QosBand::Good => "good",
            QosBand::Average => "average",
            QosBand::Poor => "poor",
        }
    }
}

impl fmt::Display for QosBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageLatency {
    pub map_ns: u64,
    pub filter_ns: u64,
    pub select_ns: u64,
}

impl StageLatency {
    pub fn total_ns(&self) -> u64 {
        self.map_ns + self.filter_ns + self.select_ns
    }
}

/// Per-request stage counts: `d_count` fetched from the registry,
/// `m_removed` eliminated by mapping, `f_removed` eliminated by filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTrace {
    pub request_id: String,
    pub d_count: u64,
    pub m_removed: u64,
    pub f_removed: u64,
    pub s_aggregate: f64,
    pub stage_latency: StageLatency,
}

impl StageTrace {
    /// Builds a trace, deriving `s_aggregate` from the counts.
    pub fn new(
        request_id: impl Into<String>,
        d_count: u64,
        m_removed: u64,
        f_removed: u64,
        stage_latency: StageLatency,
    ) -> Result<Self, crate::metrics::MetricsError> {
        let s_aggregate = crate::metrics::stage_aggregate(d_count, m_removed, f_removed)?;
        Ok(Self {
            request_id: request_id.into(),
            d_count,
            m_removed,
            f_removed,
            s_aggregate,
            stage_latency,
        })
    }

    /// Candidates that reached the selector.
    pub fn survivors(&self) -> u64 {
        self.d_count - self.m_removed - self.f_removed
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("priority hint {0} is outside 0..=9")]
    PriorityOutOfRange(u8),
    #[error("descriptor id is empty")]
    EmptyId,
    #[error("descriptor has no keywords")]
    EmptyKeywords,
    #[error("port {0} is outside 1..=65535")]
    PortOutOfRange(u32),
    #[error("latency {0} ms must be finite and non-negative")]
    InvalidLatency(f64),
    #[error("availability {0} must lie in [0, 1]")]
    InvalidAvailability(f64),
}
