//! Score candidates on relevance and declared QoS, and compare the three
//! selection strategies on one request.
//!
//! ```text
//! cargo run --example priority_selection
//! ```

use ria_core::filter::FilterCriteria;
use ria_core::mapper::RegistryIndex;
use ria_core::model::{DeclaredQos, Endpoint, PriorityHint, ServiceRequest};
use ria_core::selector::{select_with_strategy, SelectionStrategy, Weights};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut index = RegistryIndex::new();
    for (id, keywords, latency_ms, availability) in [
        ("fast-weather", &["weather", "forecast"][..], 20.0, 0.999),
        ("slow-weather", &["weather", "forecast"][..], 450.0, 0.95),
        ("rain-only", &["rain", "forecast"][..], 60.0, 0.99),
        ("quick-quotes", &["stock"][..], 5.0, 1.0),
    ] {
        let qos = DeclaredQos::new(latency_ms, availability)?;
        index.register_parts(id, "", keywords.iter().collect(), Endpoint::default(), qos)?;
    }

    let request = ServiceRequest::new(
        "1",
        "m-1",
        "weather forecast",
        PriorityHint::new(3)?,
        "alice",
        0,
    );
    let criteria = FilterCriteria::new(0.2, None)?;
    for (label, weights) in [
        ("default weights", Weights::default()),
        ("relevance-heavy", Weights::new(0.9, 0.05, 0.05, 0.0)?),
    ] {
        println!("== {label} {:?}", weights.as_array());
        for strategy in SelectionStrategy::ALL {
            let result = select_with_strategy(&request, &index, strategy, &criteria, &weights, 3)?;
            let ranked: Vec<String> = result
                .ranked
                .iter()
                .map(|p| format!("{}={:.3}", p.descriptor_id, p.score))
                .collect();
            let t = &result.trace;
            println!(
                "  {strategy:<8} chosen {:<13} D={} M={} F={} S={:.3}  [{}]",
                result.chosen.as_ref().map_or("-", |d| d.as_str()),
                t.d_count,
                t.m_removed,
                t.f_removed,
                t.s_aggregate,
                ranked.join(", ")
            );
        }
    }
    Ok(())
}
