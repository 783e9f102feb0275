//! Stored-request record: the `service` document extended with store state.
//! Used as the snapshot payload and by `GET /requests/{id}`.

use super::xml::{self, escape_into, Element};
use super::{expect_root, raw_text, WireError};
use crate::model::{PriorityHint, ServiceRequest};
use crate::store::{RequestState, StoredRequest};

pub fn serialize_record(rec: &StoredRequest) -> String {
    let r = &rec.request;
    let mut out = String::with_capacity(192 + r.query.len());
    out.push_str(r#"<service requestid=""#);
    escape_into(&mut out, &r.id);
    out.push_str(r#"" messageid=""#);
    escape_into(&mut out, &r.message_id);
    out.push_str(r#"" state=""#);
    out.push_str(rec.state.as_str());
    out.push_str(r#"" merges=""#);
    out.push_str(&rec.merge_count.to_string());
    out.push_str(r#"" priority=""#);
    out.push_str(&r.priority_hint.get().to_string());
    out.push_str(r#"" received=""#);
    out.push_str(&r.received_at.to_string());
    out.push_str(r#""><requester>"#);
    escape_into(&mut out, &r.requester);
    out.push_str("</requester><query>");
    escape_into(&mut out, &r.query);
    out.push_str("</query></service>");
    out
}

fn attr<'a>(e: &'a Element, name: &'static str) -> Result<&'a str, WireError> {
    e.attr(name).ok_or(WireError::MissingField(name))
}

fn number<T: std::str::FromStr>(e: &Element, name: &'static str) -> Result<T, WireError> {
    let raw = attr(e, name)?;
    raw.parse().map_err(|_| WireError::BadValue {
        field: name,
        value: raw.to_owned(),
    })
}

pub fn parse_record(bytes: &[u8]) -> Result<StoredRequest, WireError> {
    let root = xml::parse_document(bytes)?;
    expect_root(&root, "service")?;
    let state_raw = attr(&root, "state")?;
    let state = state_raw
        .parse::<RequestState>()
        .map_err(|_| WireError::BadValue {
            field: "state",
            value: state_raw.to_owned(),
        })?;
    let priority: u8 = number(&root, "priority")?;
    let priority_hint = PriorityHint::new(priority).map_err(|_| WireError::BadValue {
        field: "priority",
        value: priority.to_string(),
    })?;
    let requester = root
        .child("requester")
        .map(raw_text)
        .ok_or(WireError::MissingField("requester"))?;
    let query = root
        .child("query")
        .map(raw_text)
        .ok_or(WireError::MissingField("query"))?;
    let request = ServiceRequest::new(
        attr(&root, "requestid")?,
        attr(&root, "messageid")?,
        query,
        priority_hint,
        requester,
        number(&root, "received")?,
    );
    Ok(StoredRequest {
        request,
        state,
        merge_count: number(&root, "merges")?,
    })
}
