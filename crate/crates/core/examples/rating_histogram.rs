//! Rate final scores into QoS bands, accumulate metrics and turn the
//! metrics CSV into per-band histogram rows.
//!
//! ```text
//! cargo run --example rating_histogram
//! ```

use ria_core::bench;
use ria_core::metrics::{rate, Metrics};
use ria_core::model::{StageLatency, StageTrace};
use ria_core::selector::SelectionStrategy;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for score in [0.0, 0.39, 0.4, 0.64, 0.65, 0.849, 0.85, 1.0] {
        println!("score {score:<5} -> {}", rate(score)?);
    }

    let metrics = Metrics::new();
    let runs = [
        (SelectionStrategy::Expected, 40, 30, 2, 0.91, 12_000),
        (SelectionStrategy::Expected, 40, 37, 0, 0.70, 9_000),
        (SelectionStrategy::Expected, 40, 40, 0, 0.0, 4_000),
        (SelectionStrategy::Exited, 40, 0, 0, 0.55, 80_000),
        (SelectionStrategy::Normal, 40, 30, 0, 0.30, 7_000),
    ];
    for (i, (strategy, d, m, f, score, ns)) in runs.into_iter().enumerate() {
        let latency = StageLatency {
            map_ns: ns,
            filter_ns: 0,
            select_ns: 0,
        };
        let trace = StageTrace::new(i.to_string(), d, m, f, latency)?;
        println!(
            "{strategy:<8} D={d} M={m} F={f} -> S={:.3}",
            trace.s_aggregate
        );
        metrics.record(&trace, score, strategy);
    }

    let csv = metrics.report().to_csv();
    print!("\n{csv}\n{}", bench::rate_histogram(&csv)?);
    Ok(())
}
