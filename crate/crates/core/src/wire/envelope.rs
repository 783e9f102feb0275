use super::xml::{self, escape_into, Element};
use super::{expect_root, WireError};

/// The SOAP-style request envelope.
///
/// `body_query` is the text of a `Query` element inside the body when one is
/// present; otherwise every text piece under `Body` joined by spaces (for a
/// bare `MessageNeeded` payload that is the MessageID itself).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub header: Option<String>,
    pub message_id: String,
    pub body_query: String,
}

pub fn parse_envelope(bytes: &[u8]) -> Result<Envelope, WireError> {
    let root = xml::parse_document(bytes)?;
    from_element(&root)
}

pub(super) fn from_element(root: &Element) -> Result<Envelope, WireError> {
    expect_root(root, "Envelope")?;
    let header = root.child("Header").map(Element::text);
    let body = root.child("Body").ok_or(WireError::MissingBody)?;
    let message_id = body
        .find("MessageID")
        .map(Element::text)
        .filter(|id| !id.is_empty())
        .ok_or(WireError::MissingMessageId)?;
    let body_query = match body.find("Query") {
        Some(q) => q.text(),
        None => body.text_pieces().join(" "),
    };
    Ok(Envelope {
        header,
        message_id,
        body_query,
    })
}

pub fn serialize_envelope(env: &Envelope) -> String {
    let mut out = String::with_capacity(320 + env.body_query.len());
    out.push_str(super::XML_DECL);
    out.push_str(r#"<soap:Envelope xmlns:soap="http://www.w3.org/2003/05/soap-envelope">"#);
    if let Some(header) = &env.header {
        out.push_str("<soap:Header>");
        escape_into(&mut out, header);
        out.push_str("</soap:Header>");
    }
    out.push_str(
        r#"<soap:Body><q:MessageNeeded xmlns:q="http://www.example.org/message"><q:MessageID>"#,
    );
    escape_into(&mut out, &env.message_id);
    out.push_str("</q:MessageID><q:Query>");
    escape_into(&mut out, &env.body_query);
    out.push_str("</q:Query></q:MessageNeeded></soap:Body></soap:Envelope>");
    out
}
