//! Threshold-then-order filtering of mapped candidates.

use std::cmp::Ordering;

use thiserror::Error;

use crate::model::Candidate;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriteriaError {
    #[error("min_relevance {0} must lie in [0, 1]")]
    MinRelevance(f64),
    #[error("max_candidates must be at least 1")]
    MaxCandidates,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterCriteria {
    min_relevance: f64,
    max_candidates: Option<usize>,
}

impl Default for FilterCriteria {
    fn default() -> Self {
        Self {
            min_relevance: 0.0,
            max_candidates: None,
        }
    }
}

impl FilterCriteria {
    /// `max_candidates = None` means unlimited.
    pub fn new(min_relevance: f64, max_candidates: Option<usize>) -> Result<Self, CriteriaError> {
        if !(0.0..=1.0).contains(&min_relevance) {
            return Err(CriteriaError::MinRelevance(min_relevance));
        }
        if max_candidates == Some(0) {
            return Err(CriteriaError::MaxCandidates);
        }
        Ok(Self {
            min_relevance,
            max_candidates,
        })
    }

    pub fn min_relevance(&self) -> f64 {
        self.min_relevance
    }

    pub fn max_candidates(&self) -> Option<usize> {
        self.max_candidates
    }
}

/// Relevance descending, then id ascending.
pub fn by_relevance(a: &Candidate, b: &Candidate) -> Ordering {
    b.relevance
        .total_cmp(&a.relevance)
        .then_with(|| a.descriptor_id.cmp(&b.descriptor_id))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<Candidate>,
    /// Candidates dropped by the threshold or the cap, in relevance order.
    pub removed: Vec<Candidate>,
}

impl FilterOutcome {
    pub fn f_removed(&self) -> u64 {
        self.removed.len() as u64
    }
}

pub fn filter_candidates(candidates: Vec<Candidate>, criteria: &FilterCriteria) -> FilterOutcome {
    let (mut kept, mut removed): (Vec<_>, Vec<_>) = candidates
        .into_iter()
        .partition(|c| c.relevance >= criteria.min_relevance);
    kept.sort_unstable_by(by_relevance);
    if let Some(cap) = criteria.max_candidates {
        if kept.len() > cap {
            removed.extend(kept.drain(cap..));
        }
    }
    removed.sort_unstable_by(by_relevance);
    FilterOutcome { kept, removed }
}
