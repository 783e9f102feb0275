//! Acceptance suite: one pass/fail line per criterion, non-zero exit on any
//! failure. Runs as a plain binary (`harness = false`).

mod common;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ria_core::bench::{
    self, CorpusSpec, RunConfig, COMPARISON_LATENCY_COLUMNS, METRICS_LATENCY_COLUMNS,
    TRACES_LATENCY_COLUMNS,
};
use ria_core::broker::{Broker, BrokerConfig};
use ria_core::filter::{filter_candidates, FilterCriteria};
use ria_core::mapper::{map_request, RegistryIndex};
use ria_core::metrics::{parse_metrics_csv, rate, stage_aggregate, Metrics};
use ria_core::model::{
    DeclaredQos, Endpoint, PriorityHint, QosBand, ServiceDescriptor, ServiceRequest, TokenSet,
};
use ria_core::selector::{
    score, select_top, select_with_strategy, SelectionStrategy, Weights, DEFAULT_K,
};
use ria_core::store::{NewRequest, RequestState, StoredRequest};
use ria_core::wire::{self, Envelope, QueryDocument, SelectionDocument, WireError};

use common::{envelope, TestServer};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// Random instances shared by criteria 1 to 3.

const WORDS: [&str; 15] = [
    "weather", "forecast", "news", "sport", "stock", "quote", "map", "route", "hotel", "flight",
    "rain", "price", "music", "video", "mail",
];

struct Spec {
    id: String,
    keywords: Vec<&'static str>,
    latency_ms: f64,
    availability: f64,
}

struct Instance {
    specs: Vec<Spec>,
    index: RegistryIndex,
    query_words: Vec<&'static str>,
    hint: u8,
    request: ServiceRequest,
}

fn instance(rng: &mut ChaCha8Rng, serial: usize) -> Instance {
    let n = rng.random_range(0..=50usize);
    let mut specs: Vec<Spec> = (0..n)
        .map(|i| {
            let kw = rng.random_range(1..=4usize);
            let mut keywords: Vec<&'static str> = WORDS.choose_multiple(rng, kw).copied().collect();
            keywords.sort_unstable();
            // A shared QoS profile now and then forces exact score ties.
            let (latency_ms, availability) = if rng.random_bool(0.3) {
                [(100.0, 0.99), (40.0, 0.95)][rng.random_range(0..2)]
            } else {
                (rng.random_range(1.0..1000.0), rng.random_range(0.5..=1.0))
            };
            Spec {
                id: format!("s{i:02}"),
                keywords,
                latency_ms,
                availability,
            }
        })
        .collect();
    specs.shuffle(rng);
    let index = RegistryIndex::from_descriptors(specs.iter().map(|s| {
        ServiceDescriptor::new(
            &s.id,
            "",
            s.keywords.iter().collect::<TokenSet>(),
            Endpoint::default(),
            DeclaredQos::new(s.latency_ms, s.availability).unwrap(),
        )
        .unwrap()
    }))
    .unwrap();
    let q = rng.random_range(1..=3usize);
    let query_words: Vec<&'static str> = (0..q)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect();
    let hint = rng.random_range(0..=9u8);
    let request = ServiceRequest::new(
        serial.to_string(),
        "",
        query_words.join(" "),
        PriorityHint::new(hint).unwrap(),
        "acceptance",
        0,
    );
    Instance {
        specs,
        index,
        query_words,
        hint,
        request,
    }
}

/// Relevance by set arithmetic on the raw words.
fn oracle_relevance(query: &[&str], keywords: &[&str]) -> f64 {
    let q: HashSet<&str> = query.iter().copied().collect();
    let k: HashSet<&str> = keywords.iter().copied().collect();
    let inter = q.intersection(&k).count();
    let union = q.union(&k).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn oracle_score(relevance: f64, s: &Spec, hint: u8) -> f64 {
    let latency_norm = 1.0 / (1.0 + s.latency_ms / 100.0);
    (0.55 * relevance
        + 0.20 * latency_norm
        + 0.20 * s.availability
        + 0.05 * (f64::from(hint) / 9.0))
        .clamp(0.0, 1.0)
}

/// Exhaustive argmax over every descriptor sharing a word with the query;
/// ties go to the smaller id.
fn oracle_top1(inst: &Instance) -> Option<String> {
    let mut best: Option<(f64, &str)> = None;
    for s in &inst.specs {
        let r = oracle_relevance(&inst.query_words, &s.keywords);
        if r == 0.0 {
            continue;
        }
        let v = oracle_score(r, s, inst.hint);
        best = match best {
            Some((bv, bid)) if bv > v || (bv == v && bid < s.id.as_str()) => Some((bv, bid)),
            _ => Some((v, s.id.as_str())),
        };
    }
    best.map(|(_, id)| id.to_owned())
}

// ---------------------------------------------------------------------------

fn c1_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let criteria = FilterCriteria::new(0.0, None).unwrap();
    let mut nonempty = 0;
    for i in 0..1000 {
        let inst = instance(&mut rng, i);
        let got = select_with_strategy(
            &inst.request,
            &inst.index,
            SelectionStrategy::Expected,
            &criteria,
            &Weights::default(),
            DEFAULT_K,
        )
        .map_err(|e| format!("instance {i}: {e}"))?;
        let got = got.chosen.map(|d| d.to_string());
        let want = oracle_top1(&inst);
        nonempty += usize::from(want.is_some());
        check(got == want, || {
            format!("instance {i}: chose {got:?}, oracle {want:?}")
        })?;
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(10), || {
        format!("took {elapsed:?}, limit 10s")
    })?;
    Ok(format!(
        "1000/1000 match ({nonempty} with a match), {elapsed:.2?} < 10s"
    ))
}

fn c2_formula_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..10_000 {
        let inst = instance(&mut rng, i);
        let strategy = SelectionStrategy::ALL[i % 3];
        let min = [0.0, 0.1, 0.25, 0.5, 0.75, 1.0][rng.random_range(0..6)];
        let cap = if rng.random_bool(0.5) {
            Some(rng.random_range(1..=10usize))
        } else {
            None
        };
        let criteria = FilterCriteria::new(min, cap).unwrap();
        let result = select_with_strategy(
            &inst.request,
            &inst.index,
            strategy,
            &criteria,
            &Weights::default(),
            usize::MAX,
        )
        .map_err(|e| format!("trace {i}: {e}"))?;
        let t = &result.trace;
        let survivors = t.d_count - t.m_removed - t.f_removed;
        check(t.s_aggregate == survivors as f64 / 3.0, || {
            format!("trace {i}: S = {} for {survivors}", t.s_aggregate)
        })?;
        check(3.0 * t.s_aggregate == survivors as f64, || {
            format!("trace {i}: 3S != {survivors}")
        })?;
        check(
            stage_aggregate(t.d_count, t.m_removed, t.f_removed) == Ok(t.s_aggregate),
            || format!("trace {i}: aggregate mismatch"),
        )?;
        check(result.ranked.len() as u64 == survivors, || {
            format!(
                "trace {i}: selector saw {} candidates, 3S = {survivors}",
                result.ranked.len()
            )
        })?;

        // Independent count of what the selector should receive.
        let relevances: Vec<f64> = inst
            .specs
            .iter()
            .map(|s| oracle_relevance(&inst.query_words, &s.keywords))
            .collect();
        let mapped = relevances.iter().filter(|&&r| r > 0.0).count();
        let expect = match strategy {
            SelectionStrategy::Exited => inst.specs.len(),
            SelectionStrategy::Normal => mapped,
            SelectionStrategy::Expected => {
                let passing = relevances.iter().filter(|&&r| r > 0.0 && r >= min).count();
                cap.map_or(passing, |c| passing.min(c))
            }
        };
        check(survivors == expect as u64, || {
            format!("trace {i} ({strategy}): survivors {survivors}, expected {expect}")
        })?;
    }
    Ok("10000/10000 traces: S = (D-M-F)/3 exactly, 3S = selector input".into())
}

fn c3_pipeline_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = Vec::new();
    let mut checked = 0u64;
    let weights = Weights::default();
    for i in 0..5000 {
        let inst = instance(&mut rng, i);
        let min = rng.random_range(0.0..=1.0);
        let cap = if rng.random_bool(0.5) {
            Some(rng.random_range(1..=8usize))
        } else {
            None
        };
        let criteria = FilterCriteria::new(min, cap).unwrap();
        let k = rng.random_range(1..=12usize);
        let mut v = |ok: bool, what: &str| {
            checked += 1;
            if !ok {
                violations.push(format!("instance {i}: {what}"));
            }
        };

        let registry: HashSet<String> = inst.specs.iter().map(|s| s.id.clone()).collect();
        let mapped = map_request(&inst.request, &inst.index);
        let mapped_ids: HashSet<String> = mapped
            .candidates
            .iter()
            .map(|c| c.descriptor_id.to_string())
            .collect();
        v(
            mapped_ids.is_subset(&registry),
            "mapped not within registry",
        );
        v(
            mapped.candidates.len() as u64 + mapped.m_removed == inst.specs.len() as u64,
            "map counts",
        );

        let filtered = filter_candidates(mapped.candidates.clone(), &criteria);
        let kept_ids: HashSet<String> = filtered
            .kept
            .iter()
            .map(|c| c.descriptor_id.to_string())
            .collect();
        v(
            kept_ids.is_subset(&mapped_ids),
            "filtered not within mapped",
        );
        v(
            filtered.kept.len() + filtered.removed.len() == mapped.candidates.len(),
            "filter counts",
        );

        let scored = filtered
            .kept
            .iter()
            .map(|c| {
                score(
                    c,
                    inst.index.get(&c.descriptor_id).unwrap(),
                    &inst.request,
                    &weights,
                )
                .unwrap()
            })
            .collect::<Vec<_>>();
        let top = select_top(scored, k);
        v(
            top.len() == filtered.kept.len().min(k),
            "select output size",
        );
        v(
            top.iter()
                .all(|p| kept_ids.contains(p.descriptor_id.as_str())),
            "selected not within filtered",
        );

        let result = select_with_strategy(
            &inst.request,
            &inst.index,
            SelectionStrategy::Expected,
            &criteria,
            &weights,
            k,
        )
        .unwrap();
        v(
            result.ranked == top,
            "composed pipeline differs from stages",
        );
        v(
            result
                .chosen
                .as_ref()
                .is_none_or(|c| kept_ids.contains(c.as_str())),
            "chosen not within filtered",
        );
        v(
            result.chosen.is_some() == !kept_ids.is_empty(),
            "chosen missing",
        );
        v(
            result.reserve.len() as u64 == result.trace.f_removed,
            "reserve size",
        );
        v(
            result
                .reserve
                .iter()
                .all(|r| mapped_ids.contains(r.as_str()) && !kept_ids.contains(r.as_str())),
            "reserve not filter-removed",
        );
        v(
            result.trace.m_removed == mapped.m_removed
                && result.trace.f_removed == filtered.f_removed(),
            "trace counts",
        );
    }
    check(violations.is_empty(), || {
        format!("{} violations, first: {}", violations.len(), violations[0])
    })?;
    Ok(format!(
        "0 violations over {checked} checks on 5000 traced runs"
    ))
}

// ---------------------------------------------------------------------------

fn fixture(name: &str) -> Vec<u8> {
    fs::read(
        PathBuf::from(env!("CARGO_MANIFEST_DIR"))
            .join("fixtures")
            .join(name),
    )
    .unwrap()
}

const ALPHABET: &[char] = &[
    'a', 'b', 'z', 'A', 'Q', '0', '7', ' ', '.', '-', '_', ':', '&', '<', '>', '"', '\'', ';', '#',
    'é', 'ß', '中', '🛰',
];

fn text(rng: &mut ChaCha8Rng, max: usize) -> String {
    let n = rng.random_range(0..=max);
    (0..n)
        .map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())])
        .collect()
}

fn trimmed(rng: &mut ChaCha8Rng, max: usize) -> String {
    text(rng, max).trim().to_owned()
}

fn nonempty(rng: &mut ChaCha8Rng, max: usize) -> String {
    loop {
        let s = trimmed(rng, max);
        if !s.is_empty() {
            return s;
        }
    }
}

fn round_trip<T: PartialEq + std::fmt::Debug>(
    what: &str,
    i: usize,
    value: &T,
    ser: impl Fn(&T) -> String,
    parse: impl Fn(&[u8]) -> Result<T, WireError>,
) -> Result<(), String> {
    let bytes = ser(value);
    let back = parse(bytes.as_bytes()).map_err(|e| format!("{what} #{i}: {e} in {bytes}"))?;
    check(&back == value, || {
        format!("{what} #{i}: {back:?} != {value:?}")
    })?;
    check(ser(&back) == bytes, || {
        format!("{what} #{i}: re-serialization differs")
    })
}

fn c4_fixture_conformance() -> Outcome {
    let env = wire::parse_envelope(&fixture("soap_request.xml"))
        .map_err(|e| format!("envelope fixture: {e}"))?;
    check(env.message_id == "TTTTT", || {
        format!("MessageID {:?}", env.message_id)
    })?;
    let query = wire::parse_query(&fixture("query.xml"));
    check(query == Err(WireError::BadPort("45665677".into())), || {
        format!("query fixture gave {query:?}")
    })?;
    let patched = String::from_utf8(fixture("query.xml"))
        .unwrap()
        .replace("45665677", "45665");
    let doc = wire::parse_query(patched.as_bytes()).map_err(|e| format!("patched query: {e}"))?;
    check(doc.requester == "vvvvvvvv", || {
        format!("requester {:?}", doc.requester)
    })?;
    wire::parse_descriptor(&fixture("wsdl_binding.xml"))
        .map_err(|e| format!("binding fixture: {e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..1000 {
        let env = Envelope {
            header: rng.random_bool(0.5).then(|| trimmed(&mut rng, 20)),
            message_id: nonempty(&mut rng, 12),
            body_query: trimmed(&mut rng, 30),
        };
        round_trip(
            "envelope",
            i,
            &env,
            wire::serialize_envelope,
            wire::parse_envelope,
        )?;

        let q = QueryDocument {
            request_id: trimmed(&mut rng, 10),
            requester: trimmed(&mut rng, 10),
            port_name: trimmed(&mut rng, 10),
            ip_address: trimmed(&mut rng, 15),
            rec_port: rng.random_range(1..=u16::MAX),
            country: trimmed(&mut rng, 8),
        };
        round_trip("query", i, &q, wire::serialize_query, wire::parse_query)?;

        let keywords: Vec<String> = (0..rng.random_range(1..=5))
            .map(|_| bench::word(rng.random_range(0..5000)))
            .collect();
        let d = ServiceDescriptor::new(
            nonempty(&mut rng, 12),
            trimmed(&mut rng, 12),
            keywords.iter().collect(),
            Endpoint {
                port_name: text(&mut rng, 8),
                ip_address: format!(
                    "10.{}.{}.{}",
                    rng.random_range(0..256),
                    rng.random_range(0..256),
                    rng.random_range(0..256)
                ),
                rec_port: rng.random_range(1..=u16::MAX),
                country: text(&mut rng, 6),
            },
            DeclaredQos::new(rng.random_range(0.0..10_000.0), rng.random_range(0.0..=1.0)).unwrap(),
        )
        .map_err(|e| format!("descriptor #{i}: {e}"))?;
        round_trip(
            "descriptor",
            i,
            &d,
            wire::serialize_descriptor,
            wire::parse_descriptor,
        )?;

        let rec = StoredRequest {
            request: ServiceRequest::new(
                rng.random_range(0..1_000_000u64).to_string(),
                text(&mut rng, 10),
                text(&mut rng, 30),
                PriorityHint::new(rng.random_range(0..=9)).unwrap(),
                text(&mut rng, 10),
                rng.random(),
            ),
            state: [
                RequestState::New,
                RequestState::Mapped,
                RequestState::Filtered,
                RequestState::Selected,
                RequestState::Failed,
            ][rng.random_range(0..5)],
            merge_count: rng.random_range(1..1000),
        };
        round_trip(
            "record",
            i,
            &rec,
            wire::serialize_record,
            wire::parse_record,
        )?;

        let inst = instance(&mut rng, i);
        let criteria = FilterCriteria::new(rng.random_range(0.0..=0.5), None).unwrap();
        let result = select_with_strategy(
            &inst.request,
            &inst.index,
            SelectionStrategy::ALL[i % 3],
            &criteria,
            &Weights::default(),
            DEFAULT_K,
        )
        .unwrap();
        let doc = SelectionDocument::from(&result);
        round_trip(
            "selection",
            i,
            &doc,
            SelectionDocument::to_xml,
            wire::parse_result,
        )?;
    }
    Ok(
        "fixtures parse to the expected values; 5 serializers x 1000 random values round-trip bit-exactly"
            .into(),
    )
}

// ---------------------------------------------------------------------------

fn c5_strategy_performance() -> Outcome {
    let start = Instant::now();
    let spec = CorpusSpec {
        descriptors: 100_000,
        vocab: 5000,
        seed: 42,
    };
    let corpus =
        bench::corpus_to_string(&bench::generate_corpus(&spec).map_err(|e| e.to_string())?);
    let index = bench::load_corpus(corpus.as_bytes()).map_err(|e| e.to_string())?;
    check(index.len() == 100_000, || {
        format!("corpus has {} descriptors", index.len())
    })?;
    let config = RunConfig {
        queries: 1000,
        seed: 42,
        ..RunConfig::default()
    };
    let out = bench::run(&index, &config).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    let row = |s: SelectionStrategy| out.comparison.iter().find(|r| r.strategy == s).unwrap();
    let expected = row(SelectionStrategy::Expected);
    let exited = row(SelectionStrategy::Exited);
    let ratio = expected.mean_latency_ns / exited.mean_latency_ns;
    let agreement = expected.top1_agreement_vs_exited.unwrap();
    let summary = format!(
        "expected {:.0} ns vs exited {:.0} ns (ratio {ratio:.4} <= 0.2), agreement {agreement:.3}, {elapsed:.1?} < 60s",
        expected.mean_latency_ns, exited.mean_latency_ns
    );
    check(ratio <= 0.2, || summary.clone())?;
    check(agreement == 1.0, || summary.clone())?;
    check(elapsed < Duration::from_secs(60), || summary.clone())?;
    Ok(summary)
}

// ---------------------------------------------------------------------------

fn bench_outputs(seed: u64) -> Result<[String; 4], String> {
    let spec = CorpusSpec {
        descriptors: 20_000,
        vocab: 2000,
        seed,
    };
    let corpus =
        bench::corpus_to_string(&bench::generate_corpus(&spec).map_err(|e| e.to_string())?);
    let index = bench::load_corpus(corpus.as_bytes()).map_err(|e| e.to_string())?;
    let out = bench::run(
        &index,
        &RunConfig {
            queries: 300,
            seed,
            ..RunConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    Ok([
        corpus,
        bench::without_columns(&out.metrics.to_csv(), METRICS_LATENCY_COLUMNS),
        bench::without_columns(
            &bench::comparison_csv(&out.comparison),
            COMPARISON_LATENCY_COLUMNS,
        ),
        bench::without_columns(&bench::traces_csv(&out.traces), TRACES_LATENCY_COLUMNS),
    ])
}

async fn server_transcript(descriptors: &[String], requests: &[(String, String)]) -> Vec<String> {
    let server = TestServer::start(Broker::new(BrokerConfig::default())).await;
    let client = reqwest::Client::new();
    let mut transcript = Vec::new();
    for d in descriptors {
        let resp = client
            .post(server.url("/registry"))
            .body(d.clone())
            .send()
            .await
            .unwrap();
        transcript.push(format!("{} {}", resp.status(), resp.text().await.unwrap()));
    }
    for (path, body) in requests {
        let resp = client
            .post(server.url(path))
            .body(body.clone())
            .send()
            .await
            .unwrap();
        transcript.push(format!("{} {}", resp.status(), resp.text().await.unwrap()));
    }
    server.shutdown().await;
    transcript
}

fn c6_determinism(rt: &tokio::runtime::Runtime) -> Outcome {
    let a = bench_outputs(6)?;
    let b = bench_outputs(6)?;
    let names = ["corpus", "metrics", "comparison", "traces"];
    for (name, (x, y)) in names.iter().zip(a.iter().zip(&b)) {
        check(x == y, || format!("{name} differs between identical runs"))?;
    }

    let corpus = bench::generate_corpus(&CorpusSpec {
        descriptors: 300,
        vocab: 80,
        seed: 6,
    })
    .unwrap();
    let index = RegistryIndex::from_descriptors(corpus.clone()).unwrap();
    let descriptors: Vec<String> = corpus.iter().map(wire::serialize_descriptor).collect();
    let mut requests: Vec<(String, String)> = bench::generate_queries(&index, 300, 6)
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let path = format!(
                "/requests?strategy={}&priority={}",
                SelectionStrategy::ALL[i % 3],
                q.priority_hint.get()
            );
            (path, envelope(&q.message_id, &q.query))
        })
        .collect();
    // Repeats exercise the merge path.
    requests.extend(requests[..30].to_vec());
    let first = rt.block_on(server_transcript(&descriptors, &requests));
    let second = rt.block_on(server_transcript(&descriptors, &requests));
    check(first == second, || {
        let i = first
            .iter()
            .zip(&second)
            .position(|(x, y)| x != y)
            .unwrap_or(0);
        format!("servers diverge at exchange {i}")
    })?;
    check(
        first
            .iter()
            .all(|l| l.starts_with("200") || l.starts_with("201")),
        || "unexpected error status".into(),
    )?;
    Ok(format!(
        "bench outputs byte-identical across runs ({} trace bytes); 2 servers agree on {} exchanges",
        a[3].len(),
        first.len()
    ))
}

// ---------------------------------------------------------------------------

fn c7_rating_and_histograms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut scores: Vec<f64> = (0..10_000).map(|_| rng.random_range(0.0..=1.0)).collect();
    scores.extend([
        0.0,
        0.4,
        0.65,
        0.85,
        1.0,
        0.3999999999,
        0.6499999999,
        0.8499999999,
    ]);
    scores.sort_by(f64::total_cmp);
    let bands: Vec<QosBand> = scores.iter().map(|&s| rate(s).unwrap()).collect();
    check(bands.windows(2).all(|w| w[0] <= w[1]), || {
        "rate is not monotone".into()
    })?;

    let metrics = Metrics::new();
    let index = RegistryIndex::from_descriptors(
        bench::generate_corpus(&CorpusSpec {
            descriptors: 500,
            vocab: 100,
            seed: 7,
        })
        .unwrap(),
    )
    .unwrap();
    let out = bench::run(
        &index,
        &RunConfig {
            queries: 400,
            seed: 7,
            ..RunConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    for t in &out.traces {
        metrics.record(&t.trace, t.final_score, t.strategy);
    }
    let mut histograms = 0;
    for csv_text in [
        out.metrics.to_csv(),
        metrics.report().to_csv(),
        format!("{}\n", ria_core::metrics::CSV_HEADER),
    ] {
        let rows = parse_metrics_csv(&csv_text).map_err(|e| e.to_string())?;
        let total: u64 = rows.iter().map(|r| r.count).sum();
        let hist = bench::rate_histogram(&csv_text).map_err(|e| e.to_string())?;
        let mut sums: BTreeMap<String, u64> = BTreeMap::new();
        for line in hist.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            *sums.entry(cols[0].to_owned()).or_default() += cols[2].parse::<u64>().unwrap();
        }
        for r in &rows {
            check(sums.get(&r.strategy) == Some(&r.count), || {
                format!(
                    "{} histogram sums to {:?}, count {}",
                    r.strategy,
                    sums.get(&r.strategy),
                    r.count
                )
            })?;
        }
        check(sums.get("all") == Some(&total), || {
            format!(
                "all-strategy histogram sums to {:?}, total {total}",
                sums.get("all")
            )
        })?;
        histograms += 1;
    }
    // Bands emitted in traces agree with re-rating the scores.
    for t in &out.traces {
        check(rate(t.final_score).unwrap() == t.band, || {
            format!("trace band mismatch at query {}", t.query)
        })?;
    }
    Ok(format!(
        "rate monotone over {} scores; {histograms} histograms sum to their record counts",
        scores.len()
    ))
}

// ---------------------------------------------------------------------------

const CLIENTS: usize = 16;
const PER_CLIENT: usize = 1000;

fn blank_id(mut doc: SelectionDocument) -> SelectionDocument {
    doc.request_id.clear();
    doc
}

fn c8_concurrency(rt: &tokio::runtime::Runtime) -> Outcome {
    let corpus = bench::generate_corpus(&CorpusSpec {
        descriptors: 1000,
        vocab: 300,
        seed: 8,
    })
    .unwrap();
    let index = RegistryIndex::from_descriptors(corpus).unwrap();
    let queries = bench::generate_queries(&index, CLIENTS * PER_CLIENT, 8);
    let job = |n: usize| {
        let q = &queries[n];
        let strategy = SelectionStrategy::ALL[n % 3];
        let requester = format!("client{}", n / PER_CLIENT);
        (q, strategy, requester)
    };

    // Sequential reference on its own broker.
    let sequential = Broker::with_registry(BrokerConfig::default(), index.clone());
    let mut reference = Vec::with_capacity(queries.len());
    for n in 0..queries.len() {
        let (q, strategy, requester) = job(n);
        let req = NewRequest::new(requester, q.query.clone())
            .message_id(q.message_id.clone())
            .priority(q.priority_hint);
        let result = sequential
            .submit(req, strategy)
            .map_err(|e| e.to_string())?;
        reference.push(blank_id(SelectionDocument::from(&result)));
    }

    let (responses, metrics_total) = rt.block_on(async {
        let server = TestServer::start(Broker::with_registry(
            BrokerConfig::default(),
            index.clone(),
        ))
        .await;
        let client = reqwest::Client::new();
        let base = Arc::new(server.base.clone());
        let mut tasks = Vec::new();
        for c in 0..CLIENTS {
            let client = client.clone();
            let base = base.clone();
            let jobs: Vec<(usize, String, String)> = (c * PER_CLIENT..(c + 1) * PER_CLIENT)
                .map(|n| {
                    let (q, strategy, requester) = job(n);
                    let path = format!(
                        "{base}/requests?strategy={strategy}&requester={requester}&priority={}",
                        q.priority_hint.get()
                    );
                    (n, path, envelope(&q.message_id, &q.query))
                })
                .collect();
            tasks.push(tokio::spawn(async move {
                let mut out = Vec::with_capacity(jobs.len());
                for (n, url, body) in jobs {
                    let resp = client.post(url).body(body).send().await.unwrap();
                    out.push((n, resp.status().as_u16(), resp.bytes().await.unwrap()));
                }
                out
            }));
        }
        let mut responses = Vec::new();
        for t in tasks {
            responses.extend(t.await.unwrap());
        }
        let csv_text = client
            .get(server.url("/metrics"))
            .send()
            .await
            .unwrap()
            .text()
            .await
            .unwrap();
        let total: u64 = parse_metrics_csv(&csv_text)
            .unwrap()
            .iter()
            .map(|r| r.count)
            .sum();
        server.shutdown().await;
        (responses, total)
    });

    let mut ok = 0u64;
    for (n, status, body) in &responses {
        check(*status == 200, || format!("request {n}: status {status}"))?;
        ok += 1;
        let doc = blank_id(wire::parse_result(body).map_err(|e| format!("request {n}: {e}"))?);
        check(doc == reference[*n], || {
            format!("request {n}: concurrent result differs from sequential")
        })?;
    }
    check(ok == (CLIENTS * PER_CLIENT) as u64, || {
        format!("{ok} responses")
    })?;
    check(metrics_total == ok, || {
        format!("metrics count {metrics_total} != {ok} OK responses")
    })?;
    Ok(format!("{CLIENTS}x{PER_CLIENT} concurrent results equal sequential; metrics count {metrics_total} = 200 responses"))
}

// ---------------------------------------------------------------------------

fn main() {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let criteria: Vec<Criterion> = vec![
        ("1 oracle equivalence", Box::new(c1_oracle_equivalence)),
        ("2 formula identity", Box::new(c2_formula_identity)),
        (
            "3 pipeline monotonicity",
            Box::new(c3_pipeline_monotonicity),
        ),
        ("4 fixture conformance", Box::new(c4_fixture_conformance)),
        (
            "5 strategy performance contrast",
            Box::new(c5_strategy_performance),
        ),
        ("6 determinism", Box::new(|| c6_determinism(&rt))),
        (
            "7 rating monotonicity and histograms",
            Box::new(c7_rating_and_histograms),
        ),
        ("8 concurrency safety", Box::new(|| c8_concurrency(&rt))),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
