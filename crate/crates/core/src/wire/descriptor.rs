//! WSDL-subset binding reader.
//!
//! Only `wsdl:binding` is read. The binding name becomes the descriptor
//! name, operation names and documentation text become keywords. Endpoint
//! and QoS data travel in extensibility elements:
//!
//! ```xml
//! <wsdl:binding name="WeatherBinding" type="tns:WeatherPortType" id="w1">
//!   <ria:endpoint portname="weather" ipaddress="10.0.0.1" recport="8080" country="in"/>
//!   <ria:qosLatencyMs>40</ria:qosLatencyMs>
//!   <ria:qosAvailability>0.995</ria:qosAvailability>
//!   <wsdl:operation name="getForecast"/>
//! </wsdl:binding>
//! ```
//!
//! `qosLatencyMs` / `qosAvailability` may also be given as attributes of the
//! binding. Absent QoS defaults to 100 ms / 0.99; absent `id` defaults to the
//! binding name.

use super::xml::{self, escape_into, Element};
use super::{parse_port, WireError};
use crate::model::{normalize, DeclaredQos, Endpoint, ModelError, ServiceDescriptor, TokenSet};

pub fn parse_descriptor(bytes: &[u8]) -> Result<ServiceDescriptor, WireError> {
    let root = xml::parse_document(bytes)?;
    let binding = root.find("binding").ok_or(WireError::MissingBinding)?;
    from_binding(binding)
}

/// Reads a corpus: a concatenation of binding documents.
pub fn parse_corpus(bytes: &[u8]) -> Result<Vec<ServiceDescriptor>, WireError> {
    xml::parse_fragments(bytes)?
        .iter()
        .map(|root| {
            root.find("binding")
                .ok_or(WireError::MissingBinding)
                .and_then(from_binding)
        })
        .collect()
}

fn qos_value(binding: &Element, name: &'static str, default: f64) -> Result<f64, WireError> {
    let raw = binding
        .attr(name)
        .map(str::to_owned)
        .or_else(|| binding.child(name).map(Element::text));
    match raw {
        None => Ok(default),
        Some(raw) => raw
            .trim()
            .parse::<f64>()
            .map_err(|_| WireError::InvalidQos(format!("{name}={raw}"))),
    }
}

fn collect_docs(e: &Element, out: &mut Vec<String>) {
    for child in e.elements() {
        if child.local_name() == "documentation" {
            out.push(child.text());
        } else {
            collect_docs(child, out);
        }
    }
}

fn from_binding(binding: &Element) -> Result<ServiceDescriptor, WireError> {
    let name = binding
        .attr("name")
        .ok_or(WireError::MissingField("name"))?
        .to_owned();
    let id = binding.attr("id").unwrap_or(&name).to_owned();

    let mut words: Vec<String> = binding
        .children_named("operation")
        .filter_map(|op| op.attr("name").map(str::to_owned))
        .collect();
    collect_docs(binding, &mut words);
    let keywords: TokenSet = words.iter().collect();

    let endpoint = match binding.child("endpoint") {
        None => Endpoint::default(),
        Some(ep) => {
            let defaults = Endpoint::default();
            Endpoint {
                port_name: ep.attr("portname").unwrap_or_default().to_owned(),
                ip_address: ep
                    .attr("ipaddress")
                    .map_or(defaults.ip_address, str::to_owned),
                rec_port: ep
                    .attr("recport")
                    .map_or(Ok(defaults.rec_port), parse_port)?,
                country: ep.attr("country").unwrap_or_default().to_owned(),
            }
        }
    };

    let latency = qos_value(binding, "qosLatencyMs", DeclaredQos::DEFAULT_LATENCY_MS)?;
    let availability = qos_value(
        binding,
        "qosAvailability",
        DeclaredQos::DEFAULT_AVAILABILITY,
    )?;
    let qos = DeclaredQos::new(latency, availability)
        .map_err(|e| WireError::InvalidQos(e.to_string()))?;

    ServiceDescriptor::new(&id, name, keywords, endpoint, qos).map_err(|e| match e {
        ModelError::InvalidLatency(_) | ModelError::InvalidAvailability(_) => {
            WireError::InvalidQos(e.to_string())
        }
        other => WireError::InvalidDescriptor(other),
    })
}

/// Canonical binding document for `d`, without an XML declaration so that
/// documents can be concatenated into a corpus. Keywords not already implied
/// by the binding name are written as operations, sorted.
pub fn serialize_descriptor(d: &ServiceDescriptor) -> String {
    let mut out = String::with_capacity(320);
    out.push_str(r#"<wsdl:binding xmlns:wsdl="http://schemas.xmlsoap.org/wsdl/" xmlns:ria="urn:ria:qos" name=""#);
    escape_into(&mut out, d.name());
    out.push_str(r#"" type="ria:Service" id=""#);
    escape_into(&mut out, d.id().as_str());
    let ep = d.endpoint();
    out.push_str(r#""><ria:endpoint portname=""#);
    escape_into(&mut out, &ep.port_name);
    out.push_str(r#"" ipaddress=""#);
    escape_into(&mut out, &ep.ip_address);
    out.push_str(r#"" recport=""#);
    out.push_str(&ep.rec_port.to_string());
    out.push_str(r#"" country=""#);
    escape_into(&mut out, &ep.country);
    let qos = d.qos();
    out.push_str(r#""/><ria:qosLatencyMs>"#);
    out.push_str(&qos.latency_ms.to_string());
    out.push_str("</ria:qosLatencyMs><ria:qosAvailability>");
    out.push_str(&qos.availability.to_string());
    out.push_str("</ria:qosAvailability>");
    let implied = normalize(d.name()).to_set();
    for kw in d.keywords().iter().filter(|k| !implied.contains(k)) {
        out.push_str(r#"<wsdl:operation name=""#);
        escape_into(&mut out, kw);
        out.push_str(r#""/>"#);
    }
    out.push_str("</wsdl:binding>");
    out
}
