//! Priority scoring and the three selection strategies.
//!
//! * `Normal` maps only and ranks by relevance.
//! * `Exited` scores every registered descriptor without the index or the
//!   filter and sorts the whole registry. Slow on purpose.
//! * `Expected` runs map, filter, score and a top-k selection; candidates
//!   the filter dropped are kept as the reserve.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use thiserror::Error;

use crate::filter::{filter_candidates, FilterCriteria};
use crate::mapper::{jaccard, map_request, RegistryIndex};
use crate::model::{
    Candidate, DescriptorId, PriorityScore, ScoreComponents, ServiceDescriptor, ServiceRequest,
    StageLatency, StageTrace,
};

pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectError {
    #[error("weights must be non-negative and sum to 1 (got sum {0})")]
    WeightSumInvalid(f64),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("candidate `{candidate}` scored against descriptor `{descriptor}`")]
    IdMismatch {
        candidate: DescriptorId,
        descriptor: DescriptorId,
    },
    #[error("trace counts inconsistent: {0}")]
    Trace(#[from] crate::metrics::MetricsError),
}

/// Convex weights over the four score components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    relevance: f64,
    latency: f64,
    availability: f64,
    hint: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            relevance: 0.55,
            latency: 0.20,
            availability: 0.20,
            hint: 0.05,
        }
    }
}

impl Weights {
    pub fn new(
        relevance: f64,
        latency: f64,
        availability: f64,
        hint: f64,
    ) -> Result<Self, SelectError> {
        let sum = relevance + latency + availability + hint;
        let parts = [relevance, latency, availability, hint];
        if parts.iter().any(|w| !w.is_finite() || *w < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(SelectError::WeightSumInvalid(sum));
        }
        Ok(Self {
            relevance,
            latency,
            availability,
            hint,
        })
    }

    /// Relevance only; the weighting `Normal` ranks with.
    pub fn relevance_only() -> Self {
        Self {
            relevance: 1.0,
            latency: 0.0,
            availability: 0.0,
            hint: 0.0,
        }
    }

    /// Multiplies every weight by `lambda` and renormalizes.
    pub fn scaled(&self, lambda: f64) -> Result<Self, SelectError> {
        let parts = self.as_array().map(|w| w * lambda);
        let sum: f64 = parts.iter().sum();
        Self::new(
            parts[0] / sum,
            parts[1] / sum,
            parts[2] / sum,
            parts[3] / sum,
        )
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.relevance, self.latency, self.availability, self.hint]
    }

    pub fn combine(&self, c: &ScoreComponents) -> f64 {
        let s = self.relevance * c.relevance
            + self.latency * c.latency_norm
            + self.availability * c.availability
            + self.hint * c.hint_boost;
        s.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SelectionStrategy {
    Normal,
    Exited,
    Expected,
}

impl SelectionStrategy {
    pub const ALL: [SelectionStrategy; 3] = [
        SelectionStrategy::Normal,
        SelectionStrategy::Exited,
        SelectionStrategy::Expected,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SelectionStrategy::Normal => "normal",
            SelectionStrategy::Exited => "exited",
            SelectionStrategy::Expected => "expected",
        }
    }
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown strategy `{0}` (expected normal, exited or expected)")]
pub struct UnknownStrategy(pub String);

impl FromStr for SelectionStrategy {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Ok(SelectionStrategy::Normal),
            "exited" => Ok(SelectionStrategy::Exited),
            "expected" => Ok(SelectionStrategy::Expected),
            _ => Err(UnknownStrategy(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub request_id: String,
    pub strategy: SelectionStrategy,
    /// Score descending, id ascending.
    pub ranked: Vec<PriorityScore>,
    pub chosen: Option<DescriptorId>,
    /// Candidates removed by the filter, kept for fallback.
    pub reserve: Vec<DescriptorId>,
    pub trace: StageTrace,
}

impl SelectionResult {
    /// Score of the chosen descriptor, 0 when nothing was chosen.
    pub fn final_score(&self) -> f64 {
        self.ranked.first().map_or(0.0, |p| p.score)
    }
}

/// Latency normalized into (0, 1]: `1 / (1 + ms / 100)`.
pub fn latency_norm(latency_ms: f64) -> f64 {
    1.0 / (1.0 + latency_ms / 100.0)
}

pub fn components(
    relevance: f64,
    descriptor: &ServiceDescriptor,
    request: &ServiceRequest,
) -> ScoreComponents {
    let qos = descriptor.qos();
    ScoreComponents {
        relevance,
        latency_norm: latency_norm(qos.latency_ms),
        availability: qos.availability,
        hint_boost: f64::from(request.priority_hint.get()) / 9.0,
    }
}

pub fn score(
    candidate: &Candidate,
    descriptor: &ServiceDescriptor,
    request: &ServiceRequest,
    weights: &Weights,
) -> Result<PriorityScore, SelectError> {
    if &candidate.descriptor_id != descriptor.id() {
        return Err(SelectError::IdMismatch {
            candidate: candidate.descriptor_id.clone(),
            descriptor: descriptor.id().clone(),
        });
    }
    Ok(score_unchecked(
        candidate.relevance,
        descriptor,
        request,
        weights,
    ))
}

fn score_unchecked(
    relevance: f64,
    descriptor: &ServiceDescriptor,
    request: &ServiceRequest,
    weights: &Weights,
) -> PriorityScore {
    let components = components(relevance, descriptor, request);
    PriorityScore {
        descriptor_id: descriptor.id().clone(),
        score: weights.combine(&components),
        components,
    }
}

/// Score descending, then id ascending.
pub fn by_score(a: &PriorityScore, b: &PriorityScore) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.descriptor_id.cmp(&b.descriptor_id))
}

/// The `k` best scores in rank order; same as sorting everything and
/// taking a prefix.
pub fn select_top(mut scored: Vec<PriorityScore>, k: usize) -> Vec<PriorityScore> {
    if k == 0 {
        return Vec::new();
    }
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, by_score);
        scored.truncate(k);
    }
    scored.sort_unstable_by(by_score);
    scored
}

fn elapsed_ns(since: Instant) -> u64 {
    since.elapsed().as_nanos() as u64
}

/// Runs one strategy for `request` against a registry snapshot.
pub fn select_with_strategy(
    request: &ServiceRequest,
    index: &RegistryIndex,
    strategy: SelectionStrategy,
    criteria: &FilterCriteria,
    weights: &Weights,
    k: usize,
) -> Result<SelectionResult, SelectError> {
    if k == 0 {
        return Err(SelectError::InvalidK);
    }
    let mut latency = StageLatency::default();
    let d_count = index.len() as u64;

    let lookup = |c: &Candidate| {
        index
            .get(&c.descriptor_id)
            .expect("candidate comes from this registry")
    };

    let (ranked, reserve, m_removed, f_removed) = match strategy {
        SelectionStrategy::Normal => {
            let t = Instant::now();
            let mapped = map_request(request, index);
            latency.map_ns = elapsed_ns(t);

            let t = Instant::now();
            let only_relevance = Weights::relevance_only();
            let scored = mapped
                .candidates
                .iter()
                .map(|c| score_unchecked(c.relevance, lookup(c), request, &only_relevance))
                .collect();
            let ranked = select_top(scored, k);
            latency.select_ns = elapsed_ns(t);
            (ranked, Vec::new(), mapped.m_removed, 0)
        }
        SelectionStrategy::Exited => {
            let t = Instant::now();
            let query = request.tokens.to_set();
            let relevances: Vec<f64> = index
                .descriptors()
                .map(|d| jaccard(&query, d.keywords()))
                .collect();
            latency.map_ns = elapsed_ns(t);

            let t = Instant::now();
            let mut ranked: Vec<PriorityScore> = index
                .descriptors()
                .zip(relevances)
                .map(|(d, r)| score_unchecked(r, d, request, weights))
                .collect();
            ranked.sort_unstable_by(by_score);
            latency.select_ns = elapsed_ns(t);
            (ranked, Vec::new(), 0, 0)
        }
        SelectionStrategy::Expected => {
            let t = Instant::now();
            let mapped = map_request(request, index);
            latency.map_ns = elapsed_ns(t);

            let t = Instant::now();
            let filtered = filter_candidates(mapped.candidates, criteria);
            latency.filter_ns = elapsed_ns(t);

            let t = Instant::now();
            let scored = filtered
                .kept
                .iter()
                .map(|c| score_unchecked(c.relevance, lookup(c), request, weights))
                .collect();
            let ranked = select_top(scored, k);
            latency.select_ns = elapsed_ns(t);
            let f_removed = filtered.f_removed();
            let reserve = filtered
                .removed
                .into_iter()
                .map(|c| c.descriptor_id)
                .collect();
            (ranked, reserve, mapped.m_removed, f_removed)
        }
    };

    let trace = StageTrace::new(request.id.clone(), d_count, m_removed, f_removed, latency)?;
    Ok(SelectionResult {
        request_id: request.id.clone(),
        strategy,
        chosen: ranked.first().map(|p| p.descriptor_id.clone()),
        ranked,
        reserve,
        trace,
    })
}
