//! Seeded workloads and the three-strategy comparison.
//!
//! A corpus is a set of synthetic descriptors whose keywords follow a Zipf
//! law over a generated vocabulary. Queries draw 1 to 3 words uniformly
//! from the registry's vocabulary, so every query maps onto at least one
//! descriptor. Everything except the latency columns is a pure function of
//! the seeds.

use std::fmt::Write as _;
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use thiserror::Error;

use crate::filter::FilterCriteria;
use crate::mapper::{RegistryError, RegistryIndex};
use crate::metrics::{
    parse_metrics_csv, rate, BandHistogram, Metrics, MetricsError, MetricsReport,
};
use crate::model::{
    DeclaredQos, Endpoint, PriorityHint, QosBand, ServiceDescriptor, ServiceRequest, StageTrace,
    TokenSet,
};
use crate::selector::{select_with_strategy, SelectError, SelectionStrategy, Weights, DEFAULT_K};
use crate::wire::{self, WireError};

const CONSONANTS: &[u8; 15] = b"bdfgklmnprstvxz";
const VOWELS: &[u8; 5] = b"aeiou";
const SYLLABLES: usize = CONSONANTS.len() * VOWELS.len();
const WORD_SYLLABLES: u32 = 3;

/// Largest vocabulary [`vocabulary`] can produce.
pub const MAX_VOCAB: usize = SYLLABLES * SYLLABLES * SYLLABLES;

/// Zipf exponent of keyword popularity.
pub const ZIPF_EXPONENT: f64 = 1.0;

/// Keywords per generated descriptor, inclusive.
pub const KEYWORDS_PER_DESCRIPTOR: (usize, usize) = (3, 6);

/// Words per generated query, inclusive.
pub const WORDS_PER_QUERY: (usize, usize) = (1, 3);

/// Offset mixed into the seed so queries and corpus use distinct streams.
const QUERY_STREAM: u64 = 0x5157_4552_5953;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0} must be at least 1")]
    Zero(&'static str),
    #[error("vocabulary of {0} exceeds the maximum of {MAX_VOCAB}")]
    VocabTooLarge(usize),
    #[error("corpus: {0}")]
    Corpus(#[from] WireError),
    #[error("registry: {0}")]
    Registry(#[from] RegistryError),
    #[error("selection: {0}")]
    Select(#[from] SelectError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("no strategies requested")]
    NoStrategies,
}

/// The `i`-th vocabulary word: three consonant-vowel syllables, so words
/// are distinct, lowercase and survive normalization unchanged.
pub fn word(i: usize) -> String {
    assert!(i < MAX_VOCAB, "word index {i} out of range");
    let mut out = String::with_capacity(2 * WORD_SYLLABLES as usize);
    let mut rest = i;
    for _ in 0..WORD_SYLLABLES {
        let s = rest % SYLLABLES;
        rest /= SYLLABLES;
        out.push(CONSONANTS[s / VOWELS.len()] as char);
        out.push(VOWELS[s % VOWELS.len()] as char);
    }
    out
}

pub fn vocabulary(size: usize) -> Result<Vec<String>, BenchError> {
    if size == 0 {
        return Err(BenchError::Zero("vocab"));
    }
    if size > MAX_VOCAB {
        return Err(BenchError::VocabTooLarge(size));
    }
    Ok((0..size).map(word).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusSpec {
    pub descriptors: usize,
    pub vocab: usize,
    pub seed: u64,
}

fn round_to(x: f64, places: i32) -> f64 {
    let p = 10f64.powi(places);
    (x * p).round() / p
}

/// Generates `spec.descriptors` descriptors with ids `d000000`, `d000001`, ...
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<ServiceDescriptor>, BenchError> {
    if spec.descriptors == 0 {
        return Err(BenchError::Zero("descriptors"));
    }
    let vocab = vocabulary(spec.vocab)?;
    let zipf = Zipf::new(spec.vocab as f64, ZIPF_EXPONENT).expect("vocab >= 1 and exponent > 0");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (lo, hi) = KEYWORDS_PER_DESCRIPTOR;

    let mut out = Vec::with_capacity(spec.descriptors);
    for i in 0..spec.descriptors {
        let want = rng.random_range(lo..=hi).min(spec.vocab);
        let mut picked: Vec<usize> = Vec::with_capacity(want);
        while picked.len() < want {
            let rank = zipf.sample(&mut rng) as usize - 1;
            if !picked.contains(&rank) {
                picked.push(rank);
            }
        }
        let words: Vec<&str> = picked.iter().map(|&r| vocab[r].as_str()).collect();
        let name = words[..words.len().min(2)].join("_");
        let latency_ms = round_to(rng.random_range(5.0..500.0), 2);
        let availability = round_to(rng.random_range(0.9..=1.0), 4);
        let endpoint = Endpoint {
            port_name: name.clone(),
            rec_port: rng.random_range(1024..=u16::MAX),
            ..Endpoint::default()
        };
        out.push(
            ServiceDescriptor::new(
                format!("d{i:06}"),
                name,
                words.iter().collect::<TokenSet>(),
                endpoint,
                DeclaredQos::new(latency_ms, availability).expect("generated QoS in range"),
            )
            .expect("generated descriptor is valid"),
        );
    }
    Ok(out)
}

/// Corpus file contents: one serialized descriptor per line.
pub fn corpus_to_string(descriptors: &[ServiceDescriptor]) -> String {
    let mut out = String::with_capacity(descriptors.len() * 320);
    for d in descriptors {
        out.push_str(&wire::serialize_descriptor(d));
        out.push('\n');
    }
    out
}

pub fn load_corpus(bytes: &[u8]) -> Result<RegistryIndex, BenchError> {
    Ok(RegistryIndex::from_descriptors(wire::parse_corpus(bytes)?)?)
}

/// `count` requests over the index vocabulary; request `i` has id `i`.
pub fn generate_queries(index: &RegistryIndex, count: usize, seed: u64) -> Vec<ServiceRequest> {
    let vocab = index.vocabulary();
    if vocab.is_empty() {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ QUERY_STREAM);
    let (lo, hi) = WORDS_PER_QUERY;
    (0..count)
        .map(|i| {
            let n = rng.random_range(lo..=hi);
            let words: Vec<&str> = (0..n)
                .map(|_| vocab[rng.random_range(0..vocab.len())])
                .collect();
            let hint = PriorityHint::new(rng.random_range(0..=PriorityHint::MAX.get()))
                .expect("hint drawn in range");
            ServiceRequest::new(
                i.to_string(),
                format!("q{i}"),
                words.join(" "),
                hint,
                "bench",
                0,
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub queries: usize,
    pub strategies: Vec<SelectionStrategy>,
    pub seed: u64,
    pub criteria: FilterCriteria,
    pub weights: Weights,
    pub k: usize,
    /// 1 runs on the calling thread.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            queries: 1000,
            strategies: SelectionStrategy::ALL.to_vec(),
            seed: 0,
            criteria: FilterCriteria::default(),
            weights: Weights::default(),
            k: DEFAULT_K,
            workers: 1,
        }
    }
}

/// One query under one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub query: usize,
    pub strategy: SelectionStrategy,
    pub chosen: Option<String>,
    pub final_score: f64,
    pub band: QosBand,
    /// First descriptor in the ranking with non-zero relevance.
    pub top_relevant: Option<String>,
    pub trace: StageTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub strategy: SelectionStrategy,
    pub mean_latency_ns: f64,
    /// Exited mean latency over this strategy's; `None` without an exited run.
    pub speedup_vs_exited: Option<f64>,
    /// Share of queries whose choice equals the first relevant descriptor
    /// in the exited ranking; `None` without an exited run.
    pub top1_agreement_vs_exited: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: MetricsReport,
    pub comparison: Vec<ComparisonRow>,
    /// Ordered by strategy (as requested), then query index.
    pub traces: Vec<TraceRow>,
}

fn run_one(
    index: &RegistryIndex,
    request: &ServiceRequest,
    query: usize,
    strategy: SelectionStrategy,
    config: &RunConfig,
) -> Result<TraceRow, SelectError> {
    let result = select_with_strategy(
        request,
        index,
        strategy,
        &config.criteria,
        &config.weights,
        config.k,
    )?;
    let final_score = result.final_score();
    Ok(TraceRow {
        query,
        strategy,
        chosen: result.chosen.as_ref().map(ToString::to_string),
        final_score,
        band: rate(final_score.clamp(0.0, 1.0)).unwrap_or(QosBand::Poor),
        top_relevant: result
            .ranked
            .iter()
            .find(|p| p.components.relevance > 0.0)
            .map(|p| p.descriptor_id.to_string()),
        trace: result.trace,
    })
}

fn run_strategy(
    index: &RegistryIndex,
    queries: &[ServiceRequest],
    strategy: SelectionStrategy,
    config: &RunConfig,
) -> Result<Vec<TraceRow>, SelectError> {
    let workers = config.workers.max(1).min(queries.len().max(1));
    if workers == 1 {
        return queries
            .iter()
            .enumerate()
            .map(|(i, q)| run_one(index, q, i, strategy, config))
            .collect();
    }
    let chunk = queries.len().div_ceil(workers);
    thread::scope(|scope| {
        let handles: Vec<_> = queries
            .chunks(chunk)
            .enumerate()
            .map(|(c, part)| {
                scope.spawn(move || {
                    part.iter()
                        .enumerate()
                        .map(|(j, q)| run_one(index, q, c * chunk + j, strategy, config))
                        .collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        // Chunks are contiguous, so joining in spawn order keeps query order.
        let mut rows = Vec::with_capacity(queries.len());
        for h in handles {
            rows.extend(h.join().expect("bench worker panicked")?);
        }
        Ok(rows)
    })
}

/// Runs every requested strategy over the same seeded queries.
pub fn run(index: &RegistryIndex, config: &RunConfig) -> Result<RunOutput, BenchError> {
    if config.queries == 0 {
        return Err(BenchError::Zero("queries"));
    }
    if config.strategies.is_empty() {
        return Err(BenchError::NoStrategies);
    }
    let queries = generate_queries(index, config.queries, config.seed);
    let mut strategies: Vec<SelectionStrategy> = Vec::with_capacity(config.strategies.len());
    for &s in &config.strategies {
        if !strategies.contains(&s) {
            strategies.push(s);
        }
    }

    let metrics = Metrics::new();
    let mut traces = Vec::with_capacity(queries.len() * strategies.len());
    for &strategy in &strategies {
        let rows = run_strategy(index, &queries, strategy, config)?;
        for row in &rows {
            metrics.record(&row.trace, row.final_score, strategy);
        }
        traces.extend(rows);
    }

    let comparison = compare(&strategies, &traces);
    Ok(RunOutput {
        metrics: metrics.report(),
        comparison,
        traces,
    })
}

fn compare(strategies: &[SelectionStrategy], traces: &[TraceRow]) -> Vec<ComparisonRow> {
    let rows_for = |s: SelectionStrategy| traces.iter().filter(move |t| t.strategy == s);
    let mean_latency = |s: SelectionStrategy| {
        let (sum, n) = rows_for(s).fold((0u128, 0u64), |(sum, n), t| {
            (sum + u128::from(t.trace.stage_latency.total_ns()), n + 1)
        });
        if n == 0 {
            0.0
        } else {
            sum as f64 / n as f64
        }
    };
    let reference: Option<Vec<Option<&str>>> =
        strategies.contains(&SelectionStrategy::Exited).then(|| {
            rows_for(SelectionStrategy::Exited)
                .map(|t| t.top_relevant.as_deref())
                .collect()
        });
    let exited_latency = mean_latency(SelectionStrategy::Exited);

    strategies
        .iter()
        .map(|&s| {
            let mean_latency_ns = mean_latency(s);
            let (speedup, agreement) = match &reference {
                None => (None, None),
                Some(_) if s == SelectionStrategy::Exited => (Some(1.0), Some(1.0)),
                Some(reference) => {
                    let rows: Vec<&TraceRow> = rows_for(s).collect();
                    let agree = rows
                        .iter()
                        .filter(|t| t.chosen.as_deref() == reference[t.query])
                        .count();
                    let speedup = if mean_latency_ns > 0.0 {
                        exited_latency / mean_latency_ns
                    } else {
                        f64::INFINITY
                    };
                    (Some(speedup), Some(agree as f64 / rows.len() as f64))
                }
            };
            ComparisonRow {
                strategy: s,
                mean_latency_ns,
                speedup_vs_exited: speedup,
                top1_agreement_vs_exited: agreement,
            }
        })
        .collect()
}

pub const COMPARISON_HEADER: &str =
    "strategy,mean_latency_ns,speedup_vs_exited,top1_agreement_vs_exited";

/// Columns holding wall-clock measurements in [`comparison_csv`].
pub const COMPARISON_LATENCY_COLUMNS: &[&str] = &["mean_latency_ns", "speedup_vs_exited"];

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from(COMPARISON_HEADER);
    out.push('\n');
    for r in rows {
        let speedup = r
            .speedup_vs_exited
            .map_or("NA".to_owned(), |v| format!("{v:.3}"));
        let agreement = r
            .top1_agreement_vs_exited
            .map_or("NA".to_owned(), |v| format!("{v:.6}"));
        let _ = writeln!(
            out,
            "{},{:.0},{speedup},{agreement}",
            r.strategy, r.mean_latency_ns
        );
    }
    out
}

pub const TRACES_HEADER: &str =
    "query,strategy,chosen,final_score,band,d,m,f,s,map_ns,filter_ns,select_ns";

/// Columns holding wall-clock measurements in [`traces_csv`].
pub const TRACES_LATENCY_COLUMNS: &[&str] = &["map_ns", "filter_ns", "select_ns"];

pub fn traces_csv(rows: &[TraceRow]) -> String {
    let mut out = String::with_capacity(TRACES_HEADER.len() + 1 + 80 * rows.len());
    out.push_str(TRACES_HEADER);
    out.push('\n');
    for r in rows {
        let t = &r.trace;
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{},{},{},{},{},{},{},{}",
            r.query,
            r.strategy,
            r.chosen.as_deref().unwrap_or(""),
            r.final_score,
            r.band,
            t.d_count,
            t.m_removed,
            t.f_removed,
            t.s_aggregate,
            t.stage_latency.map_ns,
            t.stage_latency.filter_ns,
            t.stage_latency.select_ns
        );
    }
    out
}

/// Metrics CSV columns holding wall-clock measurements.
pub const METRICS_LATENCY_COLUMNS: &[&str] = &["mean_ns", "median_ns", "p95_ns", "throughput_rps"];

/// Drops the named columns from a CSV document, for comparing runs whose
/// latency columns naturally differ.
pub fn without_columns(csv_text: &str, drop: &[&str]) -> String {
    let mut lines = csv_text.lines();
    let Some(header) = lines.next() else {
        return String::new();
    };
    let keep: Vec<bool> = header.split(',').map(|h| !drop.contains(&h)).collect();
    let project = |line: &str| {
        line.split(',')
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(v, _)| v)
            .collect::<Vec<_>>()
            .join(",")
    };
    let mut out = project(header);
    out.push('\n');
    for line in lines {
        out.push_str(&project(line));
        out.push('\n');
    }
    out
}

pub const HISTOGRAM_HEADER: &str = "strategy,band,count";

/// Band counts per strategy plus an `all` total, best band first.
pub fn rate_histogram(metrics_csv: &str) -> Result<String, BenchError> {
    let rows = parse_metrics_csv(metrics_csv)?;
    let mut out = String::from(HISTOGRAM_HEADER);
    out.push('\n');
    let mut all = BandHistogram::default();
    let mut emit = |label: &str, h: &BandHistogram| {
        for band in QosBand::ALL {
            let _ = writeln!(out, "{label},{band},{}", h.get(band));
        }
    };
    for row in &rows {
        let h = row.bands();
        emit(&row.strategy, &h);
        all.merge(&h);
    }
    emit("all", &all);
    Ok(out)
}
