//! Read the bundled envelope, query document and binding fixtures and show
//! the canonical serializations.
//!
//! ```text
//! cargo run --example parse_fixtures
//! ```

use std::fs;
use std::path::Path;

use ria_core::wire::{self, RequestBody};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");

    let env = wire::parse_envelope(&fs::read(dir.join("soap_request.xml"))?)?;
    println!(
        "envelope: message id {:?}, query {:?}",
        env.message_id, env.body_query
    );
    println!("  canonical: {}", wire::serialize_envelope(&env));

    let query = fs::read(dir.join("query.xml"))?;
    match wire::parse_request_body(&query) {
        Err(e) => println!("query document rejected: {} ({e})", e.kind()),
        Ok(RequestBody::Query(doc)) => println!("query document: {doc:?}"),
        Ok(other) => println!("unexpected body: {other:?}"),
    }
    let fixed = String::from_utf8(query)?.replace("45665677", "4566");
    let doc = wire::parse_query(fixed.as_bytes())?;
    println!(
        "with a valid port: requester {:?}, port {:?}:{}",
        doc.requester, doc.port_name, doc.rec_port
    );
    println!("  canonical: {}", wire::serialize_query(&doc));

    let descriptor = wire::parse_descriptor(&fs::read(dir.join("wsdl_binding.xml"))?)?;
    println!(
        "binding: id {} keywords {:?} qos {:?}",
        descriptor.id(),
        descriptor.keywords().iter().collect::<Vec<_>>(),
        descriptor.qos()
    );
    println!("  canonical: {}", wire::serialize_descriptor(&descriptor));
    Ok(())
}
