//! Serve a broker over HTTP on an ephemeral port, register a descriptor,
//! submit requests under each strategy and read the metrics back.
//!
//! ```text
//! cargo run --example broker_server
//! ```
//!
//! For a long-running server use `ria serve --config broker.conf`.

use std::sync::Arc;

use ria_core::broker::{Broker, BrokerConfig};
use ria_core::model::{DeclaredQos, Endpoint, ServiceDescriptor};
use ria_core::server;
use ria_core::wire::{self, Envelope};
use tokio::net::TcpListener;
use tokio::sync::oneshot;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = BrokerConfig::parse("k = 3\nmin_relevance = 0.1\n")?;
    let broker = Arc::new(Broker::new(config));
    let listener = TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    let (stop, stopped) = oneshot::channel::<()>();
    let server = tokio::spawn(server::serve_until(listener, broker, async {
        let _ = stopped.await;
    }));
    let client = reqwest::Client::new();

    for (id, keywords, latency) in [
        ("met", &["weather", "forecast"][..], 40.0),
        ("sky", &["weather"][..], 15.0),
    ] {
        let d = ServiceDescriptor::new(
            id,
            id,
            keywords.iter().collect(),
            Endpoint::default(),
            DeclaredQos::new(latency, 0.99)?,
        )?;
        let resp = client
            .post(format!("{base}/registry"))
            .body(wire::serialize_descriptor(&d))
            .send()
            .await?;
        println!("POST /registry -> {} {}", resp.status(), resp.text().await?);
    }

    let body = wire::serialize_envelope(&Envelope {
        header: None,
        message_id: "m-1".into(),
        body_query: "weather forecast".into(),
    });
    for strategy in ["normal", "exited", "expected"] {
        let resp = client
            .post(format!(
                "{base}/requests?strategy={strategy}&requester=alice&priority=4"
            ))
            .body(body.clone())
            .send()
            .await?;
        let status = resp.status();
        let doc = wire::parse_result(&resp.bytes().await?)?;
        println!(
            "POST /requests?strategy={strategy} -> {status} chosen {:?} ranked {:?}",
            doc.chosen, doc.ranked
        );
    }

    let resp = client
        .post(format!("{base}/requests"))
        .body("<soap:Envelope>")
        .send()
        .await?;
    println!("malformed body -> {} {}", resp.status(), resp.text().await?);

    let record = client
        .get(format!("{base}/requests/1"))
        .send()
        .await?
        .text()
        .await?;
    println!("GET /requests/1 -> {record}");
    print!(
        "GET /metrics ->\n{}",
        client
            .get(format!("{base}/metrics"))
            .send()
            .await?
            .text()
            .await?
    );

    let _ = stop.send(());
    server.await??;
    Ok(())
}
