//! The line-oriented text format for diagrams, and the key–value report
//! documents the computations are published in.
//!
//! A document starts with a header line naming its kind — `dual`, `splice`,
//! `finite_fibres` or `family` — followed by one declaration per line.
//! Blank lines are skipped and `#` starts a comment.  Ids are plain tokens
//! without whitespace or `=`; attributes are `key=value` tokens; unknown or
//! duplicate keys are errors, as are references to undeclared ids.
//!
//! ```text
//! splice
//! node A
//! leaf K mark=infinity
//! leaf L4
//! edge A K w=2        # w= puts the weight at the first id, 1 at the other
//! edge A L4 w=3
//! arrow A label=s1
//! ```
//!
//! Parsing canonicalizes: edges and arrows come out in a stable sorted
//! order, so two structurally equal documents parse equal and print
//! identically.  `parse` and `print` are mutually inverse on canonical
//! documents, and `print ∘ parse` is idempotent on arbitrary valid input.

use std::collections::BTreeSet;
use std::fmt;

use num_traits::Signed;

use crate::invariants::{FamilyParams, FiniteFibreData, InvariantSet};
use crate::model::{
    Arrow, DualGraph, DualNode, Error, Mark, Rational, Result, SpliceArrow, SpliceDiagram,
    SpliceEdge, SpliceNode,
};
use crate::reduction::ReductionReport;

/// One parsed diagram or data file.
#[derive(Debug, Clone, PartialEq)]
pub enum Document {
    Dual(DualGraph),
    Splice(SpliceDiagram),
    FiniteFibres(FiniteFibreData),
    Family(FamilyParams),
}

impl Document {
    /// The header keyword of this document kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Dual(_) => "dual",
            Document::Splice(_) => "splice",
            Document::FiniteFibres(_) => "finite_fibres",
            Document::Family(_) => "family",
        }
    }
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// A whitespace-separated token with its 1-based column.
struct Tok<'a> {
    col: usize,
    text: &'a str,
}

fn tokenize(line: &str) -> Vec<Tok<'_>> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Tok { col: s + 1, text: &line[s..i] });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Tok { col: s + 1, text: &line[s..] });
    }
    out
}

/// Attribute list of one line; keys are consumed with `take`/`int` and any
/// left over at `finish` are rejected.
struct Attrs<'a> {
    line: usize,
    pairs: Vec<(Tok<'a>, &'a str)>,
}

impl<'a> Attrs<'a> {
    fn parse(toks: &[Tok<'a>], line: usize) -> Result<Attrs<'a>>
    where
        'a: 'a,
    {
        let mut pairs: Vec<(Tok<'a>, &'a str)> = Vec::new();
        for t in toks {
            let Some(eq) = t.text.find('=') else {
                return Err(perr(
                    line,
                    format!("column {}: expected key=value, got '{}'", t.col, t.text),
                ));
            };
            let key = &t.text[..eq];
            let value = &t.text[eq + 1..];
            if key.is_empty() || value.is_empty() {
                return Err(perr(
                    line,
                    format!("column {}: malformed attribute '{}'", t.col, t.text),
                ));
            }
            if pairs.iter().any(|(k, _)| k.text[..k.text.find('=').unwrap()] == *key) {
                return Err(perr(line, format!("duplicate key '{key}'")));
            }
            pairs.push((Tok { col: t.col, text: t.text }, value));
        }
        Ok(Attrs { line, pairs })
    }

    fn take(&mut self, key: &str) -> Option<&'a str> {
        let pos = self
            .pairs
            .iter()
            .position(|(k, _)| &k.text[..k.text.find('=').unwrap()] == key)?;
        Some(self.pairs.remove(pos).1)
    }

    fn int(&mut self, key: &str) -> Result<Option<i64>> {
        let line = self.line;
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<i64>()
                .map(Some)
                .map_err(|_| perr(line, format!("{key} must be an integer, got '{v}'"))),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some((k, _)) = self.pairs.first() {
            let key = &k.text[..k.text.find('=').unwrap()];
            return Err(perr(
                self.line,
                format!("column {}: unknown key '{key}' on this line", k.col),
            ));
        }
        Ok(())
    }
}

fn id_token<'a>(toks: &[Tok<'a>], idx: usize, line: usize, what: &str) -> Result<&'a str> {
    let t = toks
        .get(idx)
        .ok_or_else(|| perr(line, format!("missing {what}")))?;
    if t.text.contains('=') {
        return Err(perr(
            line,
            format!("column {}: expected {what}, got attribute '{}'", t.col, t.text),
        ));
    }
    Ok(t.text)
}

/// Parse one document.  The result is canonical: edges and arrows are in
/// sorted order regardless of declaration order.
pub fn parse(text: &str) -> Result<Document> {
    // (line number, tokens) of every significant line
    let mut lines: Vec<(usize, Vec<Tok<'_>>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let toks = tokenize(body);
        if !toks.is_empty() {
            lines.push((i + 1, toks));
        }
    }
    let Some((header_line, header)) = lines.first().map(|(n, t)| (*n, &t[..])) else {
        return Err(perr(1, "empty document: expected a header line"));
    };
    if header.len() != 1 {
        return Err(perr(header_line, "the header line holds a single keyword"));
    }
    let body = &lines[1..];
    match header[0].text {
        "dual" => parse_dual(body),
        "splice" => parse_splice(body),
        "finite_fibres" => parse_finite(body),
        "family" => parse_family(body),
        other => Err(perr(
            header_line,
            format!("unknown document kind '{other}' (expected dual, splice, finite_fibres or family)"),
        )),
    }
}

fn parse_dual(body: &[(usize, Vec<Tok<'_>>)]) -> Result<Document> {
    let mut g = DualGraph::default();
    for (line, toks) in body {
        let line = *line;
        match toks[0].text {
            "node" => {
                let id = id_token(toks, 1, line, "node id")?;
                if g.nodes.contains_key(id) {
                    return Err(perr(line, format!("duplicate node id {id}")));
                }
                let mut attrs = Attrs::parse(&toks[2..], line)?;
                let genus = attrs.int("genus")?.unwrap_or(0);
                if genus < 0 {
                    return Err(perr(line, format!("genus of {id} is negative")));
                }
                let self_int = attrs.int("selfint")?.unwrap_or(0);
                let multiplicity = attrs.int("mult")?;
                if matches!(multiplicity, Some(m) if m < 0) {
                    return Err(perr(line, format!("multiplicity of {id} is negative")));
                }
                let mark = match attrs.take("mark") {
                    None => Mark::Interior,
                    Some("interior") => Mark::Interior,
                    Some("infinity") => Mark::LineAtInfinity,
                    Some("section") => Mark::Section,
                    Some(other) => {
                        return Err(perr(
                            line,
                            format!("unknown mark '{other}' (expected interior, infinity or section)"),
                        ))
                    }
                };
                attrs.finish()?;
                g.nodes.insert(id.to_string(), DualNode { genus, self_int, multiplicity, mark });
            }
            "edge" => {
                let a = id_token(toks, 1, line, "edge endpoint")?;
                let b = id_token(toks, 2, line, "edge endpoint")?;
                for id in [a, b] {
                    if !g.nodes.contains_key(id) {
                        return Err(perr(line, format!("unknown id {id}")));
                    }
                }
                Attrs::parse(&toks[3..], line)?.finish()?;
                g.edges.push((a.to_string(), b.to_string()));
            }
            "arrow" => {
                let node = id_token(toks, 1, line, "arrow anchor")?;
                if !g.nodes.contains_key(node) {
                    return Err(perr(line, format!("unknown id {node}")));
                }
                let mut attrs = Attrs::parse(&toks[2..], line)?;
                let multiplicity = attrs.int("mult")?.unwrap_or(1);
                if multiplicity < 0 {
                    return Err(perr(line, "arrow multiplicity is negative"));
                }
                let label = attrs.take("label").map(str::to_string);
                attrs.finish()?;
                if let Some(l) = &label {
                    if g.arrows.iter().any(|x| x.label.as_deref() == Some(l)) {
                        return Err(perr(line, format!("duplicate arrow label {l}")));
                    }
                }
                g.arrows.push(Arrow { node: node.to_string(), multiplicity, label });
            }
            other => {
                return Err(perr(
                    line,
                    format!("unknown declaration '{other}' in a dual document"),
                ))
            }
        }
    }
    Ok(Document::Dual(g.normalized()))
}

fn parse_splice(body: &[(usize, Vec<Tok<'_>>)]) -> Result<Document> {
    let mut s = SpliceDiagram::default();
    for (line, toks) in body {
        let line = *line;
        match toks[0].text {
            "node" | "leaf" => {
                let id = id_token(toks, 1, line, "node id")?;
                if s.nodes.contains_key(id) {
                    return Err(perr(line, format!("duplicate node id {id}")));
                }
                let mut attrs = Attrs::parse(&toks[2..], line)?;
                let genus = attrs.int("genus")?.unwrap_or(0);
                if genus < 0 {
                    return Err(perr(line, format!("genus of {id} is negative")));
                }
                match attrs.take("mark") {
                    None => {}
                    Some("infinity") => {
                        if let Some(prev) = &s.distinguished_leaf {
                            return Err(perr(
                                line,
                                format!("mark=infinity on {id}, but {prev} is already marked"),
                            ));
                        }
                        s.distinguished_leaf = Some(id.to_string());
                    }
                    Some(other) => {
                        return Err(perr(
                            line,
                            format!("unknown mark '{other}' (only infinity applies to splice nodes)"),
                        ))
                    }
                }
                attrs.finish()?;
                s.nodes.insert(id.to_string(), SpliceNode { genus });
            }
            "edge" => {
                let a = id_token(toks, 1, line, "edge endpoint")?;
                let b = id_token(toks, 2, line, "edge endpoint")?;
                for id in [a, b] {
                    if !s.nodes.contains_key(id) {
                        return Err(perr(line, format!("unknown id {id}")));
                    }
                }
                let mut attrs = Attrs::parse(&toks[3..], line)?;
                let w = attrs.int("w")?;
                let wa = attrs.int("wa")?;
                let wb = attrs.int("wb")?;
                attrs.finish()?;
                let (weight_a, weight_b) = match (w, wa, wb) {
                    (Some(w), None, None) => (w, 1),
                    (None, Some(wa), Some(wb)) => (wa, wb),
                    (None, None, None) => (1, 1),
                    _ => {
                        return Err(perr(
                            line,
                            "give either w= (weight at the first id, 1 at the other) or both wa= and wb=",
                        ))
                    }
                };
                if weight_a < 1 || weight_b < 1 {
                    return Err(perr(line, "edge weights must be positive"));
                }
                s.edges.push(SpliceEdge {
                    a: a.to_string(),
                    weight_a,
                    b: b.to_string(),
                    weight_b,
                });
            }
            "arrow" => {
                let node = id_token(toks, 1, line, "arrow anchor")?;
                if !s.nodes.contains_key(node) {
                    return Err(perr(line, format!("unknown id {node}")));
                }
                let mut attrs = Attrs::parse(&toks[2..], line)?;
                let weight = attrs.int("w")?.unwrap_or(1);
                if weight < 1 {
                    return Err(perr(line, "arrow weight must be positive"));
                }
                let multiplicity = attrs.int("mult")?.unwrap_or(1);
                if multiplicity < 0 {
                    return Err(perr(line, "arrow multiplicity is negative"));
                }
                let label = attrs.take("label").map(str::to_string);
                attrs.finish()?;
                if let Some(l) = &label {
                    if s.arrows.iter().any(|x| x.label.as_deref() == Some(l)) {
                        return Err(perr(line, format!("duplicate arrow label {l}")));
                    }
                }
                s.arrows.push(SpliceArrow { node: node.to_string(), weight, multiplicity, label });
            }
            other => {
                return Err(perr(
                    line,
                    format!("unknown declaration '{other}' in a splice document"),
                ))
            }
        }
    }
    Ok(Document::Splice(s.normalized()))
}

fn parse_finite(body: &[(usize, Vec<Tok<'_>>)]) -> Result<Document> {
    let mut fibres: Vec<(String, i64)> = Vec::new();
    let mut seen = BTreeSet::new();
    for (line, toks) in body {
        let line = *line;
        if toks[0].text != "fibre" {
            return Err(perr(
                line,
                format!("unknown declaration '{}' in a finite_fibres document", toks[0].text),
            ));
        }
        let value = id_token(toks, 1, line, "base value label")?;
        if !seen.insert(value.to_string()) {
            return Err(perr(line, format!("duplicate fibre value {value}")));
        }
        let mut attrs = Attrs::parse(&toks[2..], line)?;
        let nodes = attrs
            .int("nodes")?
            .ok_or_else(|| perr(line, format!("fibre {value} needs nodes=")))?;
        attrs.finish()?;
        if nodes < 1 {
            return Err(perr(line, format!("fibre {value} lists {nodes} nodes")));
        }
        fibres.push((value.to_string(), nodes));
    }
    fibres.sort();
    let data = FiniteFibreData::new(fibres).map_err(|e| perr(0, e.to_string()))?;
    Ok(Document::FiniteFibres(data))
}

fn parse_family(body: &[(usize, Vec<Tok<'_>>)]) -> Result<Document> {
    let mut pairs: Option<(usize, Vec<(i64, i64)>)> = None;
    for (line, toks) in body {
        let line = *line;
        let first = toks[0].text;
        let Some(rest) = first.strip_prefix("pairs=") else {
            return Err(perr(
                line,
                format!("unknown declaration '{first}' in a family document (expected pairs=)"),
            ));
        };
        if pairs.is_some() {
            return Err(perr(line, "duplicate pairs= line"));
        }
        let mut list = Vec::new();
        let mut chunks: Vec<(usize, &str)> = vec![(toks[0].col, rest)];
        for t in &toks[1..] {
            chunks.push((t.col, t.text));
        }
        for (col, chunk) in chunks {
            let Some((p, q)) = chunk.split_once(',') else {
                return Err(perr(
                    line,
                    format!("column {col}: expected p,q — got '{chunk}'"),
                ));
            };
            let parse = |s: &str| -> Result<i64> {
                s.parse::<i64>().map_err(|_| {
                    perr(line, format!("column {col}: '{s}' is not an integer"))
                })
            };
            list.push((parse(p)?, parse(q)?));
        }
        pairs = Some((line, list));
    }
    let Some((line, list)) = pairs else {
        return Err(perr(1, "a family document needs a pairs= line"));
    };
    let params = FamilyParams::new(list).map_err(|e| perr(line, e.to_string()))?;
    Ok(Document::Family(params))
}

// ---------------------------------------------------------------------------
// printing

/// Print a document in canonical form: nodes sorted by id, edges and arrows
/// sorted, default values omitted.  `parse(print(d))` equals the
/// canonicalized `d`, and printing is a fixed point of `print ∘ parse`.
pub fn print(doc: &Document) -> String {
    match doc {
        Document::Dual(g) => print_dual(g),
        Document::Splice(s) => print_splice(s),
        Document::FiniteFibres(f) => print_finite(f),
        Document::Family(p) => print_family(p),
    }
}

fn print_dual(g: &DualGraph) -> String {
    let g = g.normalized();
    let mut out = String::from("dual\n");
    for (id, n) in &g.nodes {
        out.push_str(&format!("node {id}"));
        if n.genus != 0 {
            out.push_str(&format!(" genus={}", n.genus));
        }
        out.push_str(&format!(" selfint={}", n.self_int));
        if let Some(m) = n.multiplicity {
            out.push_str(&format!(" mult={m}"));
        }
        if n.mark != Mark::Interior {
            out.push_str(&format!(" mark={}", n.mark));
        }
        out.push('\n');
    }
    for (a, b) in &g.edges {
        out.push_str(&format!("edge {a} {b}\n"));
    }
    for arrow in &g.arrows {
        out.push_str(&format!("arrow {}", arrow.node));
        if arrow.multiplicity != 1 {
            out.push_str(&format!(" mult={}", arrow.multiplicity));
        }
        if let Some(l) = &arrow.label {
            out.push_str(&format!(" label={l}"));
        }
        out.push('\n');
    }
    out
}

fn print_splice(s: &SpliceDiagram) -> String {
    let s = s.normalized();
    let mut out = String::from("splice\n");
    for (id, n) in &s.nodes {
        let keyword = if s.is_leaf(id) { "leaf" } else { "node" };
        out.push_str(&format!("{keyword} {id}"));
        if n.genus != 0 {
            out.push_str(&format!(" genus={}", n.genus));
        }
        if s.distinguished_leaf.as_deref() == Some(id) {
            out.push_str(" mark=infinity");
        }
        out.push('\n');
    }
    for e in &s.edges {
        out.push_str(&format!("edge {} {}", e.a, e.b));
        if e.weight_b == 1 {
            if e.weight_a != 1 {
                out.push_str(&format!(" w={}", e.weight_a));
            }
        } else {
            out.push_str(&format!(" wa={} wb={}", e.weight_a, e.weight_b));
        }
        out.push('\n');
    }
    for arrow in &s.arrows {
        out.push_str(&format!("arrow {}", arrow.node));
        if arrow.weight != 1 {
            out.push_str(&format!(" w={}", arrow.weight));
        }
        if arrow.multiplicity != 1 {
            out.push_str(&format!(" mult={}", arrow.multiplicity));
        }
        if let Some(l) = &arrow.label {
            out.push_str(&format!(" label={l}"));
        }
        out.push('\n');
    }
    out
}

fn print_finite(f: &FiniteFibreData) -> String {
    let mut fibres = f.fibres.clone();
    fibres.sort();
    let mut out = String::from("finite_fibres\n");
    for (value, nodes) in &fibres {
        out.push_str(&format!("fibre {value} nodes={nodes}\n"));
    }
    out
}

fn print_family(p: &FamilyParams) -> String {
    let pairs: Vec<String> = p.pairs.iter().map(|(a, b)| format!("{a},{b}")).collect();
    format!("family\npairs={}\n", pairs.join(" "))
}

// ---------------------------------------------------------------------------
// rationals in text

/// Parse a rational given as `a/b`, a plain integer, or a mixed number
/// `w n/d` (the sign of `w` applies to the whole value).
pub fn parse_rational(s: &str) -> Result<Rational> {
    let bad = || Error::domain(format!("'{s}' is not a rational number"));
    let parts: Vec<&str> = s.split_whitespace().collect();
    let frac = |t: &str| -> Result<Rational> {
        let (n, d) = t.split_once('/').ok_or_else(bad)?;
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(Error::domain(format!("'{s}' has denominator zero")));
        }
        Ok(crate::model::rational(n, d))
    };
    match parts.as_slice() {
        [one] => {
            if one.contains('/') {
                frac(one)
            } else {
                let n: i64 = one.parse().map_err(|_| bad())?;
                Ok(crate::model::rational_int(n))
            }
        }
        [whole, rest] => {
            let w: i64 = whole.parse().map_err(|_| bad())?;
            let f = frac(rest)?;
            if f.is_negative() {
                return Err(bad());
            }
            let total = crate::model::rational_int(w.abs()) + f;
            Ok(if w < 0 { -total } else { total })
        }
        _ => Err(bad()),
    }
}

fn rational_text(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

// ---------------------------------------------------------------------------
// reports

/// A typed value in a report: printed as text on one line, mirrored
/// one-to-one in JSON.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Rat(Rational),
    Text(String),
    List(Vec<Value>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Rat(r) => write!(f, "{}", rational_text(r)),
            Value::Text(s) => write!(f, "{s}"),
            Value::List(items) => {
                write!(f, "[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, "]")
            }
        }
    }
}

impl Value {
    fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Int(n) => serde_json::Value::from(*n),
            Value::Rat(r) => serde_json::Value::from(rational_text(r)),
            Value::Text(s) => serde_json::Value::from(s.as_str()),
            Value::List(items) => {
                serde_json::Value::Array(items.iter().map(Value::to_json).collect())
            }
        }
    }
}

/// An ordered key–value result document.
///
/// `to_text` prints one `key=value` line per entry with lists in brackets
/// and rationals as `a/b`; `to_json` is the same data as a JSON object.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub entries: Vec<(String, Value)>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: Value) {
        self.entries.push((key.into(), value));
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (k, v) in &self.entries {
            map.insert(k.clone(), v.to_json());
        }
        serde_json::Value::Object(map)
    }
}

/// Report of the topology of the generic fibre.
pub fn chi_report(chi: i64, genus: i64, n_points: i64) -> Report {
    let mut r = Report::new();
    r.push("chi", Value::Int(chi));
    r.push("genus", Value::Int(genus));
    r.push("n_points", Value::Int(n_points));
    r
}

/// Report of a stable-reduction computation.
pub fn reduction_report(r: &ReductionReport) -> Report {
    let mut out = Report::new();
    out.push("genus", Value::Int(crate::model::arithmetic_genus(&r.stable_fibre)));
    out.push("cover_degree", Value::Int(r.cover_degree));
    out.push(
        "piece_orders",
        Value::List(r.pieces.iter().map(|p| Value::Int(p.monodromy_order)).collect()),
    );
    out.push(
        "edge_twists",
        Value::List(r.edge_twists.iter().map(|e| Value::Rat(e.twist.clone())).collect()),
    );
    out.push(
        "node_orders",
        Value::List(r.stable_fibre.node_orders().into_iter().map(Value::Int).collect()),
    );
    out
}

/// Report of the moduli invariants.
pub fn invariant_report(inv: &InvariantSet) -> Report {
    let mut out = Report::new();
    out.push("cover_degree", Value::Int(inv.cover_degree));
    out.push("delta", Value::Rat(inv.delta.clone()));
    out.push("kappa1", Value::Rat(inv.kappa1.clone()));
    out.push("lambda1", Value::Rat(inv.lambda1.clone()));
    out.push("psi", Value::List(inv.psi.iter().map(|p| Value::Rat(p.clone())).collect()));
    out.push("sigma_over_d", Value::Rat(inv.sigma_over_d.clone()));
    out
}

/// A diagram document as structured JSON, for machine consumption of the
/// conversion subcommands.
pub fn document_json(doc: &Document) -> serde_json::Value {
    match doc {
        Document::Dual(g) => {
            let g = g.normalized();
            serde_json::json!({
                "kind": "dual",
                "nodes": g.nodes.iter().map(|(id, n)| serde_json::json!({
                    "id": id,
                    "genus": n.genus,
                    "selfint": n.self_int,
                    "mult": n.multiplicity,
                    "mark": n.mark.to_string(),
                })).collect::<Vec<_>>(),
                "edges": g.edges.iter().map(|(a, b)| serde_json::json!([a, b])).collect::<Vec<_>>(),
                "arrows": g.arrows.iter().map(|a| serde_json::json!({
                    "node": a.node,
                    "mult": a.multiplicity,
                    "label": a.label,
                })).collect::<Vec<_>>(),
            })
        }
        Document::Splice(s) => {
            let s = s.normalized();
            serde_json::json!({
                "kind": "splice",
                "nodes": s.nodes.iter().map(|(id, n)| serde_json::json!({
                    "id": id,
                    "genus": n.genus,
                })).collect::<Vec<_>>(),
                "edges": s.edges.iter().map(|e| serde_json::json!({
                    "a": e.a, "wa": e.weight_a, "b": e.b, "wb": e.weight_b,
                })).collect::<Vec<_>>(),
                "arrows": s.arrows.iter().map(|a| serde_json::json!({
                    "node": a.node,
                    "w": a.weight,
                    "mult": a.multiplicity,
                    "label": a.label,
                })).collect::<Vec<_>>(),
                "distinguished_leaf": s.distinguished_leaf,
            })
        }
        Document::FiniteFibres(f) => serde_json::json!({
            "kind": "finite_fibres",
            "fibres": f.fibres.iter().map(|(v, n)| serde_json::json!({
                "value": v, "nodes": n,
            })).collect::<Vec<_>>(),
        }),
        Document::Family(p) => serde_json::json!({
            "kind": "family",
            "pairs": p.pairs.iter().map(|(a, b)| serde_json::json!([a, b])).collect::<Vec<_>>(),
        }),
    }
}
