//! QoS-aware service request broker.
//!
//! Requests flow through four stages:
//!
//! 1. [`store`] ingests and deduplicates incoming requests,
//! 2. [`mapper`] maps each onto registered descriptors sharing a keyword,
//! 3. [`filter`] thresholds and orders the candidates by relevance,
//! 4. [`selector`] scores survivors on relevance and declared QoS and picks
//!    the highest-priority provider.
//!
//! [`metrics`] keeps the per-request stage aggregate, rating bands and
//! latency statistics; [`wire`] reads and writes the XML formats;
//! [`server`] exposes a [`broker::Broker`] over HTTP; [`bench`] generates
//! seeded workloads and compares the three selection strategies.
//!
//! See the crate's `examples/` directory for one runnable program per
//! capability.

pub mod bench;
pub mod broker;
pub mod filter;
pub mod mapper;
pub mod metrics;
pub mod model;
pub mod selector;
pub mod server;
pub mod store;
pub mod wire;

pub use broker::{Broker, BrokerConfig, BrokerError};
pub use filter::{filter_candidates, FilterCriteria};
pub use mapper::{map_request, relevance, Registry, RegistryIndex};
pub use metrics::{rate, stage_aggregate, Metrics, MetricsReport};
pub use model::{
    normalize, Candidate, DeclaredQos, DescriptorId, Endpoint, PriorityHint, PriorityScore,
    QosBand, ServiceDescriptor, ServiceRequest, StageTrace, TokenBag, TokenSet,
};
pub use selector::{
    score, select_top, select_with_strategy, SelectionResult, SelectionStrategy, Weights,
};
pub use store::{NewRequest, RequestState, RequestStore, StoredRequest};
