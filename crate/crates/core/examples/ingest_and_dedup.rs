//! Ingest requests, merge duplicates, walk the state machine and snapshot
//! the store to disk.
//!
//! ```text
//! cargo run --example ingest_and_dedup
//! ```

use ria_core::model::PriorityHint;
use ria_core::store::{NewRequest, RequestState, RequestStore};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let store = RequestStore::new();

    let (a, dup) = store.ingest(NewRequest::new("alice", "Weather forecast").message_id("m-1"))?;
    println!("ingested {a} (duplicate: {dup})");

    // Same requester, same tokens in another order and case: merged.
    let (b, dup) = store.ingest(NewRequest::new("alice", "FORECAST, weather!"))?;
    println!(
        "ingested {b} (duplicate: {dup}), merges = {}",
        store.get(&a)?.merge_count
    );

    let (c, _) =
        store.ingest(NewRequest::new("bob", "weather forecast").priority(PriorityHint::new(7)?))?;
    println!("bob's request is separate: {c}");

    match store.ingest(NewRequest::new("carol", "?!")) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!("a query without tokens is never stored"),
    }

    for next in [
        RequestState::Mapped,
        RequestState::Filtered,
        RequestState::Selected,
    ] {
        store.advance_state(&a, next)?;
    }
    if let Err(e) = store.advance_state(&a, RequestState::New) {
        println!("refused: {e}");
    }

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("requests.snapshot");
    let written = store.snapshot_save(&path)?;
    let restored = RequestStore::new();
    let read = restored.snapshot_load(&path)?;
    println!("snapshot: wrote {written} records, restored {read}");
    for rec in restored.records() {
        println!(
            "  #{} {:<8} {:<9} merges={} tokens={:?}",
            rec.request.id,
            rec.request.requester,
            rec.state,
            rec.merge_count,
            rec.request.tokens.iter().collect::<Vec<_>>()
        );
    }
    Ok(())
}
