use super::xml::{self, escape_into, Element};
use super::{expect_root, parse_port, WireError};

/// Structured service request: who asks, and which endpoint they want.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryDocument {
    pub request_id: String,
    pub requester: String,
    pub port_name: String,
    pub ip_address: String,
    pub rec_port: u16,
    pub country: String,
}

pub fn parse_query(bytes: &[u8]) -> Result<QueryDocument, WireError> {
    let root = xml::parse_document(bytes)?;
    from_element(&root)
}

fn field(root: &Element, name: &'static str) -> Result<String, WireError> {
    root.find(name)
        .map(Element::text)
        .ok_or(WireError::MissingField(name))
}

pub(super) fn from_element(root: &Element) -> Result<QueryDocument, WireError> {
    expect_root(root, "service")?;
    let request_id = root
        .attr("requestid")
        .map(|s| s.trim().to_owned())
        .ok_or(WireError::MissingField("requestid"))?;
    let requester = field(root, "requester")?;
    let port_name = field(root, "portname")?;
    let ip_address = field(root, "ipaddress")?;
    let rec_port = field(root, "recport")?;
    let country = field(root, "country")?;
    let rec_port = parse_port(&rec_port)?;
    Ok(QueryDocument {
        request_id,
        requester,
        port_name,
        ip_address,
        rec_port,
        country,
    })
}

pub fn serialize_query(doc: &QueryDocument) -> String {
    let mut out = String::with_capacity(256);
    out.push_str(super::XML_DECL);
    out.push_str(r#"<service requestid=""#);
    escape_into(&mut out, &doc.request_id);
    out.push_str(r#""><requester>"#);
    escape_into(&mut out, &doc.requester);
    out.push_str("</requester><serviceto><portname>");
    escape_into(&mut out, &doc.port_name);
    out.push_str("</portname><ipaddress>");
    escape_into(&mut out, &doc.ip_address);
    out.push_str("</ipaddress><recport>");
    out.push_str(&doc.rec_port.to_string());
    out.push_str("</recport><country>");
    escape_into(&mut out, &doc.country);
    out.push_str("</country></serviceto></service>");
    out
}
