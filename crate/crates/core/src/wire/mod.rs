//! XML wire formats: the SOAP-style request envelope, the structured
//! service-request document, the WSDL-subset binding, the selection result
//! and the stored-request record used by snapshots.
//!
//! Serializers emit a canonical form: fixed element order, UTF-8, no
//! insignificant whitespace. Parsing a canonical document and serializing
//! it again reproduces the same bytes.

mod descriptor;
mod envelope;
mod query;
mod record;
mod result;
pub mod xml;

use thiserror::Error;

pub use descriptor::{parse_corpus, parse_descriptor, serialize_descriptor};
pub use envelope::{parse_envelope, serialize_envelope, Envelope};
pub use query::{parse_query, serialize_query, QueryDocument};
pub use record::{parse_record, serialize_record};
pub use result::{parse_result, serialize_result, SelectionDocument};

use crate::model::ModelError;
use xml::XmlError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WireError {
    #[error("malformed xml: {0}")]
    XmlMalformed(XmlError),
    #[error("expected root element `{expected}`, found `{found}`")]
    UnexpectedRoot {
        expected: &'static str,
        found: String,
    },
    #[error("envelope has no Body element")]
    MissingBody,
    #[error("envelope has no MessageID")]
    MissingMessageId,
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("port `{0}` is not an integer in 1..=65535")]
    BadPort(String),
    #[error("document has no wsdl:binding element")]
    MissingBinding,
    #[error("invalid qos value: {0}")]
    InvalidQos(String),
    #[error("invalid descriptor: {0}")]
    InvalidDescriptor(ModelError),
    #[error("invalid value `{value}` for `{field}`")]
    BadValue { field: &'static str, value: String },
}

impl WireError {
    /// Stable name of the error variant, used in HTTP error bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            WireError::XmlMalformed(_) => "XmlMalformed",
            WireError::UnexpectedRoot { .. } => "UnexpectedRoot",
            WireError::MissingBody => "MissingBody",
            WireError::MissingMessageId => "MissingMessageId",
            WireError::MissingField(_) => "MissingField",
            WireError::BadPort(_) => "BadPort",
            WireError::MissingBinding => "MissingBinding",
            WireError::InvalidQos(_) => "InvalidQos",
            WireError::InvalidDescriptor(_) => "InvalidDescriptor",
            WireError::BadValue { .. } => "BadValue",
        }
    }
}

impl From<XmlError> for WireError {
    fn from(e: XmlError) -> Self {
        WireError::XmlMalformed(e)
    }
}

pub(crate) const XML_DECL: &str = r#"<?xml version="1.0" encoding="UTF-8"?>"#;

fn expect_root(root: &xml::Element, expected: &'static str) -> Result<(), WireError> {
    if root.local_name() == expected {
        Ok(())
    } else {
        Err(WireError::UnexpectedRoot {
            expected,
            found: root.name.clone(),
        })
    }
}

fn parse_port(raw: &str) -> Result<u16, WireError> {
    raw.trim()
        .parse::<u16>()
        .ok()
        .filter(|p| *p != 0)
        .ok_or_else(|| WireError::BadPort(raw.trim().to_owned()))
}

/// Raw concatenated text of an element's direct text children.
fn raw_text(e: &xml::Element) -> String {
    e.children
        .iter()
        .filter_map(|n| match n {
            xml::Node::Text(t) => Some(t.as_str()),
            xml::Node::Element(_) => None,
        })
        .collect()
}

/// What a POST body turned out to be.
#[derive(Debug, Clone, PartialEq)]
pub enum RequestBody {
    Envelope(Envelope),
    Query(QueryDocument),
}

/// Parses either an envelope or a structured query document, dispatching
/// on the root element.
pub fn parse_request_body(bytes: &[u8]) -> Result<RequestBody, WireError> {
    let root = xml::parse_document(bytes)?;
    match root.local_name() {
        "Envelope" => envelope::from_element(&root).map(RequestBody::Envelope),
        "service" => query::from_element(&root).map(RequestBody::Query),
        _ => Err(WireError::UnexpectedRoot {
            expected: "Envelope",
            found: root.name.clone(),
        }),
    }
}
