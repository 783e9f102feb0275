//! The `<selection>` response document.
//!
//! ```xml
//! <selection request="7" strategy="expected">
//!   <chosen>w1</chosen>
//!   <ranked><service id="w1" score="0.912000"/></ranked>
//!   <reserve><service id="w9"/></reserve>
//!   <trace d="5" m="3" f="1" s="0.3333333333333333"/>
//! </selection>
//! ```
//! (shown indented; the canonical form has no whitespace). `chosen` is
//! omitted when nothing was ranked. Scores carry six decimals; `s` uses the
//! shortest representation that reads back to the same value.

use super::xml::{self, escape_into, Element};
use super::{expect_root, raw_text, WireError};
use crate::metrics::stage_aggregate;
use crate::selector::{SelectionResult, SelectionStrategy};

/// The fields of a [`SelectionResult`] that travel on the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionDocument {
    pub request_id: String,
    pub strategy: SelectionStrategy,
    pub chosen: Option<String>,
    pub ranked: Vec<(String, f64)>,
    pub reserve: Vec<String>,
    pub d: u64,
    pub m: u64,
    pub f: u64,
    pub s: f64,
}

fn six_decimals(x: f64) -> f64 {
    format!("{x:.6}").parse().expect("formatted float parses")
}

impl From<&SelectionResult> for SelectionDocument {
    fn from(r: &SelectionResult) -> Self {
        Self {
            request_id: r.request_id.clone(),
            strategy: r.strategy,
            chosen: r.chosen.as_ref().map(ToString::to_string),
            ranked: r
                .ranked
                .iter()
                .map(|p| (p.descriptor_id.to_string(), six_decimals(p.score)))
                .collect(),
            reserve: r.reserve.iter().map(ToString::to_string).collect(),
            d: r.trace.d_count,
            m: r.trace.m_removed,
            f: r.trace.f_removed,
            s: r.trace.s_aggregate,
        }
    }
}

impl SelectionDocument {
    pub fn to_xml(&self) -> String {
        let mut out = String::with_capacity(160 + 48 * (self.ranked.len() + self.reserve.len()));
        out.push_str(super::XML_DECL);
        out.push_str(r#"<selection request=""#);
        escape_into(&mut out, &self.request_id);
        out.push_str(r#"" strategy=""#);
        out.push_str(self.strategy.as_str());
        out.push_str(r#"">"#);
        if let Some(chosen) = &self.chosen {
            out.push_str("<chosen>");
            escape_into(&mut out, chosen);
            out.push_str("</chosen>");
        }
        out.push_str("<ranked>");
        for (id, score) in &self.ranked {
            out.push_str(r#"<service id=""#);
            escape_into(&mut out, id);
            out.push_str(&format!(r#"" score="{score:.6}"/>"#));
        }
        out.push_str("</ranked><reserve>");
        for id in &self.reserve {
            out.push_str(r#"<service id=""#);
            escape_into(&mut out, id);
            out.push_str(r#""/>"#);
        }
        out.push_str(&format!(
            r#"</reserve><trace d="{}" m="{}" f="{}" s="{}"/></selection>"#,
            self.d, self.m, self.f, self.s
        ));
        out
    }
}

pub fn serialize_result(result: &SelectionResult) -> String {
    SelectionDocument::from(result).to_xml()
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

pub fn parse_result(bytes: &[u8]) -> Result<SelectionDocument, WireError> {
    let root = xml::parse_document(bytes)?;
    expect_root(&root, "selection")?;
    let strategy_raw = attr(&root, "strategy")?;
    let strategy = strategy_raw
        .parse::<SelectionStrategy>()
        .map_err(|_| WireError::BadValue {
            field: "strategy",
            value: strategy_raw.to_owned(),
        })?;
    let ranked = root
        .child("ranked")
        .ok_or(WireError::MissingField("ranked"))?
        .children_named("service")
        .map(|s| {
            let score: f64 = number(s, "score")?;
            if !(0.0..=1.0).contains(&score) {
                return Err(WireError::BadValue {
                    field: "score",
                    value: score.to_string(),
                });
            }
            Ok((attr(s, "id")?.to_owned(), score))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let reserve = root
        .child("reserve")
        .ok_or(WireError::MissingField("reserve"))?
        .children_named("service")
        .map(|s| attr(s, "id").map(str::to_owned))
        .collect::<Result<Vec<_>, _>>()?;
    let trace = root
        .child("trace")
        .ok_or(WireError::MissingField("trace"))?;
    let (d, m, f): (u64, u64, u64) = (
        number(trace, "d")?,
        number(trace, "m")?,
        number(trace, "f")?,
    );
    let s: f64 = number(trace, "s")?;
    let expected_s = stage_aggregate(d, m, f).map_err(|_| WireError::BadValue {
        field: "trace",
        value: format!("d={d} m={m} f={f}"),
    })?;
    if s != expected_s {
        return Err(WireError::BadValue {
            field: "s",
            value: s.to_string(),
        });
    }
    Ok(SelectionDocument {
        request_id: attr(&root, "request")?.to_owned(),
        strategy,
        chosen: root.child("chosen").map(raw_text),
        ranked,
        reserve,
        d,
        m,
        f,
        s,
    })
}
