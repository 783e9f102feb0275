//! Minimal XML tree reader and escaping helpers for the wire subset.
//!
//! Supports elements, attributes, text, CDATA, comments and processing
//! instructions. DTDs are rejected. Attribute values may be unquoted, and an
//! attribute may appear without a value; the bundled query document
//! fixture relies on both.

use std::fmt::Write as _;

/// Documents nested deeper than this are rejected.
pub const MAX_DEPTH: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XmlError {
    pub offset: usize,
    pub reason: &'static str,
}

impl std::fmt::Display for XmlError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} at byte {}", self.reason, self.offset)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Element(Element),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Element {
    /// Qualified name as written, e.g. `soap:Envelope`.
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Node>,
}

fn local(name: &str) -> &str {
    name.rsplit_once(':').map_or(name, |(_, l)| l)
}

impl Element {
    pub fn local_name(&self) -> &str {
        local(&self.name)
    }

    /// First attribute whose local name is `name`.
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| local(k) == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn elements(&self) -> impl Iterator<Item = &Element> {
        self.children.iter().filter_map(|n| match n {
            Node::Element(e) => Some(e),
            Node::Text(_) => None,
        })
    }

    /// First direct child element with local name `name`.
    pub fn child(&self, name: &str) -> Option<&Element> {
        self.elements().find(|e| e.local_name() == name)
    }

    pub fn children_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Element> + 'a {
        self.elements().filter(move |e| e.local_name() == name)
    }

    /// Depth-first search for the first element with local name `name`,
    /// including `self`.
    pub fn find(&self, name: &str) -> Option<&Element> {
        if self.local_name() == name {
            return Some(self);
        }
        self.elements().find_map(|e| e.find(name))
    }

    /// Concatenated descendant text, trimmed.
    pub fn text(&self) -> String {
        fn collect(e: &Element, out: &mut String) {
            for n in &e.children {
                match n {
                    Node::Text(t) => out.push_str(t),
                    Node::Element(c) => collect(c, out),
                }
            }
        }
        let mut out = String::new();
        collect(self, &mut out);
        out.trim().to_owned()
    }

    /// Descendant text pieces, each trimmed, empty pieces dropped.
    pub fn text_pieces(&self) -> Vec<String> {
        fn collect(e: &Element, out: &mut Vec<String>) {
            for n in &e.children {
                match n {
                    Node::Text(t) => {
                        let t = t.trim();
                        if !t.is_empty() {
                            out.push(t.to_owned());
                        }
                    }
                    Node::Element(c) => collect(c, out),
                }
            }
        }
        let mut out = Vec::new();
        collect(self, &mut out);
        out
    }
}

/// Parses a document with exactly one root element.
pub fn parse_document(bytes: &[u8]) -> Result<Element, XmlError> {
    let mut roots = parse_fragments(bytes)?;
    match roots.len() {
        1 => Ok(roots.pop().expect("one root")),
        0 => Err(XmlError {
            offset: bytes.len(),
            reason: "no root element",
        }),
        _ => Err(XmlError {
            offset: 0,
            reason: "more than one root element",
        }),
    }
}

/// Parses a sequence of zero or more top-level elements.
pub fn parse_fragments(bytes: &[u8]) -> Result<Vec<Element>, XmlError> {
    let text = std::str::from_utf8(bytes).map_err(|e| XmlError {
        offset: e.valid_up_to(),
        reason: "invalid utf-8",
    })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    Parser { src: text, pos: 0 }.run()
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, reason: &'static str) -> Result<T, XmlError> {
        Err(XmlError {
            offset: self.pos,
            reason,
        })
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start_matches([' ', '\t', '\r', '\n']);
        self.pos = self.src.len() - trimmed.len();
    }

    /// Advances past `delim`, returning the text before it.
    fn take_until(&mut self, delim: &str, reason: &'static str) -> Result<&'a str, XmlError> {
        match self.rest().find(delim) {
            Some(i) => {
                let s = &self.rest()[..i];
                self.pos += i + delim.len();
                Ok(s)
            }
            None => {
                self.pos = self.src.len();
                self.err(reason)
            }
        }
    }

    fn name(&mut self) -> Result<&'a str, XmlError> {
        let rest = self.rest();
        let mut chars = rest.char_indices();
        match chars.next() {
            Some((_, c)) if c.is_alphabetic() || c == '_' || c == ':' => {}
            _ => return self.err("expected a name"),
        }
        let end = chars
            .find(|(_, c)| !(c.is_alphanumeric() || matches!(c, '_' | ':' | '-' | '.')))
            .map_or(rest.len(), |(i, _)| i);
        self.pos += end;
        Ok(&rest[..end])
    }

    fn run(mut self) -> Result<Vec<Element>, XmlError> {
        let mut roots = Vec::new();
        let mut stack: Vec<Element> = Vec::new();

        while self.pos < self.src.len() {
            let rest = self.rest();
            if let Some(after) = rest.strip_prefix("<") {
                if after.starts_with('?') {
                    self.pos += 2;
                    self.take_until("?>", "unterminated processing instruction")?;
                } else if after.starts_with("!--") {
                    self.pos += 4;
                    self.take_until("-->", "unterminated comment")?;
                } else if after.starts_with("![CDATA[") {
                    self.pos += 9;
                    let data = self.take_until("]]>", "unterminated cdata")?;
                    match stack.last_mut() {
                        Some(parent) => push_text(parent, data),
                        None => return self.err("cdata outside the root element"),
                    }
                } else if after.starts_with('!') {
                    return self.err("document type declarations are not supported");
                } else if after.starts_with('/') {
                    self.pos += 2;
                    let name = self.name()?;
                    self.skip_ws();
                    if self.peek() != Some('>') {
                        return self.err("expected `>` to close end tag");
                    }
                    self.pos += 1;
                    let open = match stack.pop() {
                        Some(open) => open,
                        None => return self.err("end tag without a start tag"),
                    };
                    if open.name != name {
                        return self.err("mismatched end tag");
                    }
                    match stack.last_mut() {
                        Some(parent) => parent.children.push(Node::Element(open)),
                        None => roots.push(open),
                    }
                } else {
                    self.pos += 1;
                    let (element, self_closing) = self.start_tag()?;
                    if self_closing {
                        match stack.last_mut() {
                            Some(parent) => parent.children.push(Node::Element(element)),
                            None => roots.push(element),
                        }
                    } else {
                        if stack.len() >= MAX_DEPTH {
                            return self.err("elements nested too deeply");
                        }
                        stack.push(element);
                    }
                }
            } else {
                let end = rest.find('<').unwrap_or(rest.len());
                let raw = &rest[..end];
                let start = self.pos;
                self.pos += end;
                match stack.last_mut() {
                    Some(parent) => {
                        let text = unescape(raw).map_err(|reason| XmlError {
                            offset: start,
                            reason,
                        })?;
                        push_text(parent, &text);
                    }
                    None if raw.trim().is_empty() => {}
                    None => {
                        return Err(XmlError {
                            offset: start,
                            reason: "text outside the root element",
                        })
                    }
                }
            }
        }
        if !stack.is_empty() {
            return self.err("unexpected end of input inside an element");
        }
        Ok(roots)
    }

    fn start_tag(&mut self) -> Result<(Element, bool), XmlError> {
        let name = self.name()?.to_owned();
        let mut attrs = Vec::new();
        loop {
            let before = self.pos;
            self.skip_ws();
            let had_space = self.pos > before;
            match self.peek() {
                None => return self.err("unexpected end of input inside a tag"),
                Some('>') => {
                    self.pos += 1;
                    return Ok((
                        Element {
                            name,
                            attrs,
                            children: Vec::new(),
                        },
                        false,
                    ));
                }
                Some('/') => {
                    if self.rest().starts_with("/>") {
                        self.pos += 2;
                        return Ok((
                            Element {
                                name,
                                attrs,
                                children: Vec::new(),
                            },
                            true,
                        ));
                    }
                    return self.err("expected `/>`");
                }
                Some(_) if !had_space => return self.err("expected whitespace before attribute"),
                Some(_) => {
                    let key = self.name()?.to_owned();
                    let after_key = self.pos;
                    self.skip_ws();
                    let value = if self.peek() == Some('=') {
                        self.pos += 1;
                        self.skip_ws();
                        self.attr_value()?
                    } else {
                        // Bare attribute; leave the whitespace for the next one.
                        self.pos = after_key;
                        String::new()
                    };
                    attrs.push((key, value));
                }
            }
        }
    }

    fn attr_value(&mut self) -> Result<String, XmlError> {
        let start = self.pos;
        let raw = match self.peek() {
            Some(q @ ('"' | '\'')) => {
                self.pos += 1;
                let delim = if q == '"' { "\"" } else { "'" };
                self.take_until(delim, "unterminated attribute value")?
            }
            Some(_) => {
                let rest = self.rest();
                let mut end = rest
                    .find(|c: char| c.is_whitespace() || c == '>' || c == '<')
                    .unwrap_or(rest.len());
                if rest[..end].ends_with('/') && rest[end..].starts_with('>') {
                    end -= 1;
                }
                if end == 0 {
                    return self.err("empty unquoted attribute value");
                }
                self.pos += end;
                &rest[..end]
            }
            None => return self.err("unexpected end of input in attribute"),
        };
        if raw.contains('<') {
            return Err(XmlError {
                offset: start,
                reason: "`<` in attribute value",
            });
        }
        unescape(raw).map_err(|reason| XmlError {
            offset: start,
            reason,
        })
    }
}

fn push_text(parent: &mut Element, text: &str) {
    if let Some(Node::Text(prev)) = parent.children.last_mut() {
        prev.push_str(text);
    } else {
        parent.children.push(Node::Text(text.to_owned()));
    }
}

fn unescape(raw: &str) -> Result<String, &'static str> {
    if !raw.contains('&') {
        return Ok(raw.to_owned());
    }
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(i) = rest.find('&') {
        out.push_str(&rest[..i]);
        rest = &rest[i + 1..];
        let semi = rest.find(';').ok_or("unterminated entity reference")?;
        let entity = &rest[..semi];
        rest = &rest[semi + 1..];
        let ch = match entity {
            "lt" => '<',
            "gt" => '>',
            "amp" => '&',
            "quot" => '"',
            "apos" => '\'',
            _ => {
                let code = if let Some(hex) = entity.strip_prefix("#x") {
                    u32::from_str_radix(hex, 16).ok()
                } else if let Some(dec) = entity.strip_prefix('#') {
                    dec.parse::<u32>().ok()
                } else {
                    None
                };
                code.and_then(char::from_u32)
                    .ok_or("unknown entity reference")?
            }
        };
        out.push(ch);
    }
    out.push_str(rest);
    Ok(out)
}

/// Escapes the five predefined entities.
pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    escape_into(&mut out, s);
    out
}

pub fn escape_into(out: &mut String, s: &str) {
    for c in s.chars() {
        match c {
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            // Whitespace other than a plain space would be trimmed or
            // normalized by readers; keep it as a character reference.
            '\t' | '\n' | '\r' => {
                let _ = write!(out, "&#{};", c as u32);
            }
            c => out.push(c),
        }
    }
}
