#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::Arc;

use ria_core::broker::Broker;
use ria_core::server;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

/// A broker served on an ephemeral local port.
pub struct TestServer {
    pub base: String,
    pub broker: Arc<Broker>,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl TestServer {
    pub async fn start(broker: Broker) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr: SocketAddr = listener.local_addr().unwrap();
        let broker = Arc::new(broker);
        let (stop, stopped) = oneshot::channel::<()>();
        let task = tokio::spawn(server::serve_until(listener, broker.clone(), async {
            let _ = stopped.await;
        }));
        Self {
            base: format!("http://{addr}"),
            broker,
            stop: Some(stop),
            task,
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    pub async fn shutdown(mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        (&mut self.task).await.unwrap().unwrap();
    }
}

/// Minimal envelope with a `Query` element.
pub fn envelope(message_id: &str, query: &str) -> String {
    ria_core::wire::serialize_envelope(&ria_core::wire::Envelope {
        header: None,
        message_id: message_id.to_owned(),
        body_query: query.to_owned(),
    })
}
