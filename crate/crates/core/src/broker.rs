//! In-process broker: request store, registry and metrics behind one handle.

use std::str::FromStr;

use thiserror::Error;

use crate::filter::{CriteriaError, FilterCriteria};
use crate::mapper::{Registry, RegistryError, RegistryIndex};
use crate::metrics::Metrics;
use crate::model::ServiceDescriptor;
use crate::selector::{
    select_with_strategy, SelectError, SelectionResult, SelectionStrategy, Weights, DEFAULT_K,
};
use crate::store::{NewRequest, RequestState, RequestStore, StoreError, StoredRequest};

/// Environment variable that overrides the listen address.
pub const LISTEN_ENV: &str = "RIA_LISTEN";

#[derive(Debug, Clone, PartialEq)]
pub struct BrokerConfig {
    pub listen: String,
    pub weights: Weights,
    pub criteria: FilterCriteria,
    pub k: usize,
}

impl Default for BrokerConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".to_owned(),
            weights: Weights::default(),
            criteria: FilterCriteria::default(),
            k: DEFAULT_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value `{value}` for `{key}`")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error(transparent)]
    Weights(#[from] SelectError),
    #[error(transparent)]
    Criteria(#[from] CriteriaError),
}

impl BrokerConfig {
    /// Parses `key = value` lines; `#` starts a comment. Keys not present
    /// keep their defaults.
    ///
    /// Keys: `listen`, `w_relevance`, `w_latency`, `w_availability`,
    /// `w_hint`, `min_relevance`, `max_candidates` (integer or `unlimited`),
    /// `k`.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut w = cfg.weights.as_array();
        let mut min_relevance = cfg.criteria.min_relevance();
        let mut max_candidates = cfg.criteria.max_candidates();

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or(ConfigError::Syntax { line })?;
            let bad = || ConfigError::BadValue {
                line,
                key: key.to_owned(),
                value: value.to_owned(),
            };
            fn num<T: FromStr>(v: &str, bad: impl Fn() -> ConfigError) -> Result<T, ConfigError> {
                v.parse().map_err(|_| bad())
            }
            match key {
                "listen" => cfg.listen = value.to_owned(),
                "w_relevance" => w[0] = num(value, bad)?,
                "w_latency" => w[1] = num(value, bad)?,
                "w_availability" => w[2] = num(value, bad)?,
                "w_hint" => w[3] = num(value, bad)?,
                "min_relevance" => min_relevance = num(value, bad)?,
                "max_candidates" => {
                    max_candidates = if value.eq_ignore_ascii_case("unlimited") {
                        None
                    } else {
                        Some(num(value, bad)?)
                    }
                }
                "k" => {
                    cfg.k = num(value, bad)?;
                    if cfg.k == 0 {
                        return Err(bad());
                    }
                }
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.to_owned(),
                    })
                }
            }
        }
        cfg.weights = Weights::new(w[0], w[1], w[2], w[3])?;
        cfg.criteria = FilterCriteria::new(min_relevance, max_candidates)?;
        Ok(cfg)
    }

    /// Applies [`LISTEN_ENV`] when set.
    pub fn with_env(mut self) -> Self {
        if let Ok(addr) = std::env::var(LISTEN_ENV) {
            if !addr.trim().is_empty() {
                self.listen = addr.trim().to_owned();
            }
        }
        self
    }
}

#[derive(Debug, Error)]
pub enum BrokerError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

#[derive(Debug, Default)]
pub struct Broker {
    config: BrokerConfig,
    store: RequestStore,
    registry: Registry,
    metrics: Metrics,
}

impl Broker {
    pub fn new(config: BrokerConfig) -> Self {
        Self::with_registry(config, RegistryIndex::new())
    }

    pub fn with_registry(config: BrokerConfig, index: RegistryIndex) -> Self {
        Self {
            config,
            store: RequestStore::new(),
            registry: Registry::new(index),
            metrics: Metrics::new(),
        }
    }

    pub fn config(&self) -> &BrokerConfig {
        &self.config
    }

    pub fn store(&self) -> &RequestStore {
        &self.store
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    pub fn register(&self, descriptor: ServiceDescriptor) -> Result<u64, BrokerError> {
        Ok(self.registry.register(descriptor)?)
    }

    /// Ingests a request and runs `strategy` for it. A duplicate request is
    /// merged and selected again against the current registry.
    pub fn submit(
        &self,
        request: NewRequest,
        strategy: SelectionStrategy,
    ) -> Result<SelectionResult, BrokerError> {
        let (id, _duplicate) = self.store.ingest(request)?;
        self.select(&id, strategy)
    }

    /// Runs `strategy` for a stored request, advancing its state and
    /// recording the outcome in the metrics.
    pub fn select(
        &self,
        request_id: &str,
        strategy: SelectionStrategy,
    ) -> Result<SelectionResult, BrokerError> {
        let stored = self.store.get(request_id)?;
        let outcome = {
            let index = self.registry.snapshot();
            select_with_strategy(
                &stored.request,
                &index,
                strategy,
                &self.config.criteria,
                &self.config.weights,
                self.config.k,
            )
        };
        match outcome {
            Ok(result) => {
                self.advance(&stored, strategy)?;
                self.metrics
                    .record(&result.trace, result.final_score(), strategy);
                Ok(result)
            }
            Err(e) => {
                self.store.advance_state(request_id, RequestState::Failed)?;
                Err(e.into())
            }
        }
    }

    fn advance(
        &self,
        stored: &StoredRequest,
        strategy: SelectionStrategy,
    ) -> Result<(), BrokerError> {
        let steps: &[RequestState] = match strategy {
            SelectionStrategy::Expected => &[
                RequestState::Mapped,
                RequestState::Filtered,
                RequestState::Selected,
            ],
            SelectionStrategy::Normal => &[RequestState::Mapped, RequestState::Selected],
            SelectionStrategy::Exited => &[RequestState::Selected],
        };
        let id = &stored.request.id;
        for &step in steps {
            // Another thread may have advanced the same merged request.
            let current = self.store.get(id)?.state;
            if current.can_advance_to(step) && step != RequestState::Failed {
                match self.store.advance_state(id, step) {
                    Ok(_) | Err(StoreError::IllegalTransition { .. }) => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
        Ok(())
    }
}
