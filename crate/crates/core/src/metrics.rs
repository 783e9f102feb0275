//! Stage aggregate, rating bands and per-strategy latency statistics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{QosBand, StageTrace};
use crate::selector::SelectionStrategy;

/// Bounded number of latency samples retained per strategy.
pub const RESERVOIR_CAPACITY: usize = 65_536;

pub const EXCELLENT_MIN: f64 = 0.85;
pub const GOOD_MIN: f64 = 0.65;
pub const AVERAGE_MIN: f64 = 0.40;

pub const CSV_HEADER: &str =
    "strategy,count,mean_ns,median_ns,p95_ns,throughput_rps,mean_s,excellent,good,average,poor";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("m + f = {removed} exceeds d = {d}")]
    NegativeSurvivors { d: u64, removed: u64 },
    #[error("score {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("malformed metrics csv: {0}")]
    MalformedCsv(String),
}

/// One third of the surviving candidate count, `(d - m - f) / 3`.
pub fn stage_aggregate(d: u64, m: u64, f: u64) -> Result<f64, MetricsError> {
    let removed = m.checked_add(f).ok_or(MetricsError::NegativeSurvivors {
        d,
        removed: u64::MAX,
    })?;
    if removed > d {
        return Err(MetricsError::NegativeSurvivors { d, removed });
    }
    Ok((d - removed) as f64 / 3.0)
}

pub fn rate(score: f64) -> Result<QosBand, MetricsError> {
    if !(0.0..=1.0).contains(&score) {
        return Err(MetricsError::OutOfRange(score));
    }
    Ok(if score >= EXCELLENT_MIN {
        QosBand::Excellent
    } else if score >= GOOD_MIN {
        QosBand::Good
    } else if score >= AVERAGE_MIN {
        QosBand::Average
    } else {
        QosBand::Poor
    })
}

/// Band counts, best band first.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BandHistogram {
    pub excellent: u64,
    pub good: u64,
    pub average: u64,
    pub poor: u64,
}

impl BandHistogram {
    pub fn add(&mut self, band: QosBand) {
        *self.slot(band) += 1;
    }

    pub fn get(&self, band: QosBand) -> u64 {
        match band {
            QosBand::Excellent => self.excellent,
            QosBand::Good => self.good,
            QosBand::Average => self.average,
            QosBand::Poor => self.poor,
        }
    }

    fn slot(&mut self, band: QosBand) -> &mut u64 {
        match band {
            QosBand::Excellent => &mut self.excellent,
            QosBand::Good => &mut self.good,
            QosBand::Average => &mut self.average,
            QosBand::Poor => &mut self.poor,
        }
    }

    pub fn total(&self) -> u64 {
        self.excellent + self.good + self.average + self.poor
    }

    pub fn merge(&mut self, other: &BandHistogram) {
        for band in QosBand::ALL {
            *self.slot(band) += other.get(band);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyReport {
    pub strategy: SelectionStrategy,
    pub count: u64,
    pub mean_ns: f64,
    pub median_ns: u64,
    pub p95_ns: u64,
    pub throughput_rps: f64,
    pub mean_s: f64,
    pub bands: BandHistogram,
}

/// Snapshot of all counters; one row per strategy that has records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<StrategyReport>,
}

impl MetricsReport {
    pub fn total_count(&self) -> u64 {
        self.rows.iter().map(|r| r.count).sum()
    }

    pub fn row(&self, strategy: SelectionStrategy) -> Option<&StrategyReport> {
        self.rows.iter().find(|r| r.strategy == strategy)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(CSV_HEADER.len() + 1 + 96 * self.rows.len());
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.0},{},{},{:.3},{:.6},{},{},{},{}",
                r.strategy,
                r.count,
                r.mean_ns,
                r.median_ns,
                r.p95_ns,
                r.throughput_rps,
                r.mean_s,
                r.bands.excellent,
                r.bands.good,
                r.bands.average,
                r.bands.poor
            );
        }
        out
    }
}

/// A metrics CSV row as read back from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsCsvRow {
    pub strategy: String,
    pub count: u64,
    pub mean_ns: f64,
    pub median_ns: u64,
    pub p95_ns: u64,
    pub throughput_rps: f64,
    pub mean_s: f64,
    pub excellent: u64,
    pub good: u64,
    pub average: u64,
    pub poor: u64,
}

impl MetricsCsvRow {
    pub fn bands(&self) -> BandHistogram {
        BandHistogram {
            excellent: self.excellent,
            good: self.good,
            average: self.average,
            poor: self.poor,
        }
    }
}

/// Reads a metrics CSV, checking the header and that each row's band
/// counts add up to its request count.
pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsCsvRow>, MetricsError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| MetricsError::MalformedCsv(e.to_string()))?;
    let header_line = header.iter().collect::<Vec<_>>().join(",");
    if header_line != CSV_HEADER {
        return Err(MetricsError::MalformedCsv(format!(
            "unexpected header `{header_line}`"
        )));
    }
    let mut rows = Vec::new();
    for record in reader.deserialize::<MetricsCsvRow>() {
        let row = record.map_err(|e| MetricsError::MalformedCsv(e.to_string()))?;
        if row.bands().total() != row.count {
            return Err(MetricsError::MalformedCsv(format!(
                "band counts for `{}` sum to {}, expected {}",
                row.strategy,
                row.bands().total(),
                row.count
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug)]
struct StrategyAccumulator {
    count: u64,
    latency_sum_ns: u128,
    survivor_sum: u128,
    bands: BandHistogram,
    samples: Vec<u64>,
    rng: ChaCha8Rng,
}

impl StrategyAccumulator {
    fn new(strategy: SelectionStrategy) -> Self {
        Self {
            count: 0,
            latency_sum_ns: 0,
            survivor_sum: 0,
            bands: BandHistogram::default(),
            samples: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(strategy as u64),
        }
    }

    fn push_sample(&mut self, latency_ns: u64) {
        // Algorithm R over the stream of recorded latencies.
        if self.samples.len() < RESERVOIR_CAPACITY {
            self.samples.push(latency_ns);
        } else {
            let j = self.rng.random_range(0..self.count);
            if (j as usize) < RESERVOIR_CAPACITY {
                self.samples[j as usize] = latency_ns;
            }
        }
    }

    fn report(&self, strategy: SelectionStrategy) -> StrategyReport {
        let mut sorted = self.samples.clone();
        sorted.sort_unstable();
        let mean_ns = self.latency_sum_ns as f64 / self.count as f64;
        let throughput_rps = if self.latency_sum_ns == 0 {
            0.0
        } else {
            self.count as f64 * 1e9 / self.latency_sum_ns as f64
        };
        StrategyReport {
            strategy,
            count: self.count,
            mean_ns,
            median_ns: nearest_rank(&sorted, 0.50),
            p95_ns: nearest_rank(&sorted, 0.95),
            throughput_rps,
            mean_s: self.survivor_sum as f64 / 3.0 / self.count as f64,
            bands: self.bands,
        }
    }
}

/// Nearest-rank percentile of an ascending sample.
pub fn nearest_rank(sorted: &[u64], p: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Contention-safe recorder of per-request outcomes.
///
/// Means are exact over every record; percentiles come from a bounded
/// reservoir per strategy. Throughput is requests per second of summed
/// pipeline time.
#[derive(Debug, Default)]
pub struct Metrics {
    inner: Mutex<BTreeMap<SelectionStrategy, StrategyAccumulator>>,
}

impl Metrics {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one pipeline run. A score outside [0, 1] is clamped before
    /// rating.
    pub fn record(&self, trace: &StageTrace, final_score: f64, strategy: SelectionStrategy) {
        let score = if final_score.is_nan() {
            0.0
        } else {
            final_score.clamp(0.0, 1.0)
        };
        let band = rate(score).unwrap_or(QosBand::Poor);
        let latency = trace.stage_latency.total_ns();
        let mut inner = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        let acc = inner
            .entry(strategy)
            .or_insert_with(|| StrategyAccumulator::new(strategy));
        acc.count += 1;
        acc.latency_sum_ns += u128::from(latency);
        acc.survivor_sum += u128::from(trace.survivors());
        acc.bands.add(band);
        acc.push_sample(latency);
    }

    pub fn report(&self) -> MetricsReport {
        let inner = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        MetricsReport {
            rows: inner
                .iter()
                .map(|(strategy, acc)| acc.report(*strategy))
                .collect(),
        }
    }
}
