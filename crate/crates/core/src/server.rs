//! HTTP front-end for a [`Broker`].
//!
//! | route | body | success |
//! |---|---|---|
//! | `POST /requests?strategy=..&requester=..&priority=..` | envelope or query document | 200 selection document |
//! | `POST /registry` | descriptor binding | 201 `<registered id=".." version=".."/>` |
//! | `GET /metrics` | | 200 CSV |
//! | `GET /requests/{id}` | | 200 stored record, or 404 |
//!
//! Client errors carry `Kind: detail` as a plain-text body.

use std::future::Future;
use std::io;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Deserialize;
use tokio::net::TcpListener;

use crate::broker::{Broker, BrokerError};
use crate::mapper::RegistryError;
use crate::model::PriorityHint;
use crate::selector::{SelectError, SelectionStrategy};
use crate::store::{NewRequest, StoreError};
use crate::wire::{self, RequestBody, WireError};

const XML: &str = "application/xml";
const CSV: &str = "text/csv";

/// Requester recorded for envelopes submitted without `?requester=`.
pub const ANONYMOUS: &str = "anonymous";

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    detail: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, detail: impl ToString) -> Self {
        Self {
            status,
            kind,
            detail: detail.to_string(),
        }
    }

    fn bad_request(kind: &'static str, detail: impl ToString) -> Self {
        Self::new(StatusCode::BAD_REQUEST, kind, detail)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
            format!("{}: {}", self.kind, self.detail),
        )
            .into_response()
    }
}

impl From<WireError> for ApiError {
    fn from(e: WireError) -> Self {
        Self::bad_request(e.kind(), e)
    }
}

impl From<BrokerError> for ApiError {
    fn from(e: BrokerError) -> Self {
        match e {
            BrokerError::Store(StoreError::EmptyQuery) => Self::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "EmptyQuery",
                "query has no tokens",
            ),
            BrokerError::Store(StoreError::NotFound(id)) => {
                Self::new(StatusCode::NOT_FOUND, "NotFound", id)
            }
            BrokerError::Registry(RegistryError::DuplicateId(id)) => {
                Self::new(StatusCode::CONFLICT, "DuplicateId", id)
            }
            BrokerError::Registry(RegistryError::InvalidDescriptor(e)) => {
                Self::bad_request("InvalidDescriptor", e)
            }
            BrokerError::Select(SelectError::InvalidK) => {
                Self::bad_request("InvalidK", "k must be at least 1")
            }
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", other),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
pub struct RequestParams {
    pub strategy: Option<String>,
    pub requester: Option<String>,
    pub priority: Option<String>,
}

impl RequestParams {
    fn strategy(&self) -> Result<SelectionStrategy, ApiError> {
        match &self.strategy {
            None => Ok(SelectionStrategy::Expected),
            Some(s) => s
                .parse()
                .map_err(|_| ApiError::bad_request("UnknownStrategy", s)),
        }
    }

    fn priority(&self) -> Result<PriorityHint, ApiError> {
        let Some(raw) = &self.priority else {
            return Ok(PriorityHint::NONE);
        };
        raw.trim()
            .parse::<u8>()
            .ok()
            .and_then(|v| PriorityHint::new(v).ok())
            .ok_or_else(|| ApiError::bad_request("PriorityOutOfRange", raw))
    }
}

/// Turns a parsed body plus query parameters into a store submission.
pub fn new_request(body: RequestBody, params: &RequestParams) -> Result<NewRequest, ApiError> {
    let priority = params.priority()?;
    let request = match body {
        RequestBody::Envelope(env) => {
            let requester = params.requester.as_deref().unwrap_or(ANONYMOUS);
            NewRequest::new(requester, env.body_query).message_id(env.message_id)
        }
        RequestBody::Query(doc) => {
            NewRequest::new(doc.requester, doc.port_name).message_id(doc.request_id)
        }
    };
    Ok(request.priority(priority))
}

fn xml_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, XML)], body).into_response()
}

async fn post_request(
    State(broker): State<Arc<Broker>>,
    Query(params): Query<RequestParams>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let strategy = params.strategy()?;
    let request = new_request(wire::parse_request_body(&body)?, &params)?;
    let result = tokio::task::spawn_blocking(move || broker.submit(request, strategy))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e))??;
    Ok(xml_response(
        StatusCode::OK,
        wire::serialize_result(&result),
    ))
}

async fn post_registry(
    State(broker): State<Arc<Broker>>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let descriptor = wire::parse_descriptor(&body)?;
    let id = descriptor.id().clone();
    let version = broker.register(descriptor)?;
    let mut out = String::from(wire::XML_DECL);
    out.push_str(r#"<registered id=""#);
    wire::xml::escape_into(&mut out, id.as_str());
    out.push_str(&format!(r#"" version="{version}"/>"#));
    Ok(xml_response(StatusCode::CREATED, out))
}

async fn get_metrics(State(broker): State<Arc<Broker>>) -> Response {
    (
        StatusCode::OK,
        [(header::CONTENT_TYPE, CSV)],
        broker.metrics().report().to_csv(),
    )
        .into_response()
}

async fn get_request(
    State(broker): State<Arc<Broker>>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let record = broker
        .store()
        .get(&id)
        .map_err(|e| ApiError::from(BrokerError::from(e)))?;
    Ok(xml_response(
        StatusCode::OK,
        wire::serialize_record(&record),
    ))
}

pub fn router(broker: Arc<Broker>) -> Router {
    Router::new()
        .route("/requests", post(post_request))
        .route("/requests/{id}", get(get_request))
        .route("/registry", post(post_registry))
        .route("/metrics", get(get_metrics))
        .with_state(broker)
}

/// Serves until `shutdown` resolves.
pub async fn serve_until(
    listener: TcpListener,
    broker: Arc<Broker>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    axum::serve(listener, router(broker))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Binds the configured listen address and serves until Ctrl-C.
pub async fn serve(broker: Arc<Broker>) -> io::Result<()> {
    let listener = TcpListener::bind(&broker.config().listen).await?;
    serve_until(listener, broker, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
