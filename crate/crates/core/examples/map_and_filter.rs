//! Map a request onto a keyword registry, then threshold and cap the
//! candidates.
//!
//! ```text
//! cargo run --example map_and_filter
//! ```

use ria_core::filter::{filter_candidates, FilterCriteria};
use ria_core::mapper::{map_request, RegistryIndex};
use ria_core::model::{DeclaredQos, Endpoint, ServiceRequest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut index = RegistryIndex::new();
    for (id, keywords) in [
        ("met-office", &["weather", "forecast", "rain"][..]),
        ("sky-watch", &["weather", "satellite"][..]),
        ("rain-alert", &["rain", "alert"][..]),
        ("stock-feed", &["stock", "quote"][..]),
    ] {
        index.register_parts(
            id,
            "",
            keywords.iter().collect(),
            Endpoint::default(),
            DeclaredQos::default(),
        )?;
    }
    println!(
        "registry v{} with {} descriptors",
        index.version(),
        index.len()
    );

    let request = ServiceRequest::with_query("1", "rain forecast");
    let mapped = map_request(&request, &index);
    println!(
        "mapped {} of {} (removed {}):",
        mapped.candidates.len(),
        mapped.d_count,
        mapped.m_removed
    );
    for c in &mapped.candidates {
        println!("  {:<11} relevance {:.3}", c.descriptor_id, c.relevance);
    }

    let criteria = FilterCriteria::new(0.3, Some(2))?;
    let filtered = filter_candidates(mapped.candidates, &criteria);
    println!("kept (min 0.3, cap 2):");
    for c in &filtered.kept {
        println!("  {:<11} relevance {:.3}", c.descriptor_id, c.relevance);
    }
    println!(
        "removed: {:?}",
        filtered
            .removed
            .iter()
            .map(|c| c.descriptor_id.as_str())
            .collect::<Vec<_>>()
    );
    Ok(())
}
