//! Core domain types shared by every stage of the pipeline.
//!
//! Three pictures of the same geometry live here:
//!
//! * [`DualGraph`] — the full resolution picture: one node per irreducible
//!   curve with genus, self-intersection and multiplicity, edges for
//!   intersections, arrows for transverse horizontal curves.
//! * [`SpliceDiagram`] — the efficient picture: only nodes of valency other
//!   than two (or of positive genus) are kept, and integer weights on half
//!   edges remember the contracted chains.
//! * [`StableFibre`] — the end product of stable reduction: components with
//!   genus, nodes with the order of the quotient singularity sitting at them,
//!   and marked points.
//!
//! All types are plain owned values; nothing here mutates its input.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Exact rational number used for every fractional quantity in the crate
/// (twists, `delta`, `kappa1`, `lambda1`, `psi`).  Backed by arbitrary
/// precision integers, always in lowest terms with positive denominator.
pub type Rational = num_rational::BigRational;

/// Convenience constructor for a `Rational` from machine integers.
pub fn rational(numer: i64, denom: i64) -> Rational {
    Rational::new(numer.into(), denom.into())
}

/// Convenience constructor for an integral `Rational`.
pub fn rational_int(n: i64) -> Rational {
    Rational::from_integer(n.into())
}

/// Errors produced anywhere in the crate.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// The input text could not be parsed; `line` is 1-based.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    /// The input is well-formed but describes an invalid or unsupported
    /// diagram (failed validation, unrealizable weights, bad parameters).
    #[error("{0}")]
    Domain(String),
    /// Two routes that must agree disagreed, or an integrality/consistency
    /// assertion failed.  Always a bug in the input data or in this crate,
    /// never a user error.
    #[error("internal inconsistency: {0}")]
    Internal(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Identifier of a node or component.  Plain tokens without whitespace.
pub type NodeId = String;

/// Role of a curve in a dual graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub enum Mark {
    /// Ordinary exceptional curve.
    #[default]
    Interior,
    /// Strict transform of the line at infinity (at most one per graph).
    LineAtInfinity,
    /// A section / horizontal curve kept as a node rather than an arrow.
    Section,
}

impl fmt::Display for Mark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mark::Interior => write!(f, "interior"),
            Mark::LineAtInfinity => write!(f, "infinity"),
            Mark::Section => write!(f, "section"),
        }
    }
}

/// One irreducible curve of a resolved fibre.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualNode {
    /// Geometric genus of the curve, `>= 0`.
    pub genus: i64,
    /// Self-intersection number in the ambient surface.
    pub self_int: i64,
    /// Multiplicity of the fibre divisor along this curve.  `None` means
    /// "not given"; it can then be solved from the self-intersections (see
    /// `calculus::solve_multiplicities`).
    pub multiplicity: Option<i64>,
    /// Distinguished role, if any.
    pub mark: Mark,
}

impl DualNode {
    /// Plain genus-0 curve with the given self-intersection and multiplicity.
    pub fn rational(self_int: i64, multiplicity: i64) -> Self {
        DualNode {
            genus: 0,
            self_int,
            multiplicity: Some(multiplicity),
            mark: Mark::Interior,
        }
    }
}

/// A horizontal curve crossing one vertical curve transversally.
///
/// `multiplicity` is the multilink multiplicity: the value of the fibration
/// class on a meridian of the curve.  For an honest section it is 1; the
/// value 0 is legal and means a disk can be attached to that boundary
/// component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arrow {
    pub node: NodeId,
    pub multiplicity: i64,
    pub label: Option<String>,
}

/// Dual graph of a (resolved) fibre: the full picture with all chains.
///
/// Edges form a multiset — parallel edges are allowed (cycles of curves) and
/// a self-pair `(v, v)` denotes a curve intersecting itself transversally.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DualGraph {
    pub nodes: BTreeMap<NodeId, DualNode>,
    pub edges: Vec<(NodeId, NodeId)>,
    pub arrows: Vec<Arrow>,
}

impl DualGraph {
    /// Number of incident edges plus arrows with multiplicity at least 1.
    ///
    /// Arrows of multiplicity 0 bound disks and do not count towards the
    /// valency used in Euler-characteristic bookkeeping.  A self-edge counts
    /// twice.
    pub fn valency(&self, id: &str) -> i64 {
        let mut v = 0;
        for (a, b) in &self.edges {
            if a == id {
                v += 1;
            }
            if b == id {
                v += 1;
            }
        }
        for arrow in &self.arrows {
            if arrow.node == id && arrow.multiplicity >= 1 {
                v += 1;
            }
        }
        v
    }

    /// Ids of nodes adjacent to `id` (self excluded), with multiplicity of
    /// parallel edges collapsed.
    pub fn neighbours(&self, id: &str) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        for (a, b) in &self.edges {
            if a == id && b != id {
                out.insert(b.as_str());
            }
            if b == id && a != id {
                out.insert(a.as_str());
            }
        }
        out
    }

    /// Number of edges joining `a` and `b` (for `a == b`: number of
    /// self-pairs).
    pub fn edge_count(&self, a: &str, b: &str) -> i64 {
        self.edges
            .iter()
            .filter(|(x, y)| (x == a && y == b) || (x == b && y == a))
            .count() as i64
    }

    /// Multiplicity of a node, or an error naming it if unset.
    pub fn multiplicity(&self, id: &str) -> Result<i64> {
        self.nodes
            .get(id)
            .ok_or_else(|| Error::domain(format!("unknown node id {id}")))?
            .multiplicity
            .ok_or_else(|| Error::domain(format!("node {id} has no multiplicity")))
    }

    /// True when every node has a multiplicity.
    pub fn fully_weighted(&self) -> bool {
        self.nodes.values().all(|n| n.multiplicity.is_some())
    }

    /// Copy with edges and arrows brought to a canonical order, so that two
    /// structurally equal graphs compare equal with `==`.
    pub fn normalized(&self) -> Self {
        let mut g = self.clone();
        for (a, b) in &mut g.edges {
            if a > b {
                std::mem::swap(a, b);
            }
        }
        g.edges.sort();
        g.arrows
            .sort_by(|x, y| (&x.node, &x.label, x.multiplicity).cmp(&(&y.node, &y.label, y.multiplicity)));
        g
    }
}

/// One retained node of a splice diagram.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SpliceNode {
    pub genus: i64,
}

/// Edge of a splice diagram with its two half-edge weights.
///
/// `weight_a` sits on the half edge at `a`, `weight_b` at `b`.  Weights on
/// half edges at leaves are 1 by normalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpliceEdge {
    pub a: NodeId,
    pub weight_a: i64,
    pub b: NodeId,
    pub weight_b: i64,
}

impl SpliceEdge {
    /// Weight on the half edge at `id`; error if `id` is not an endpoint.
    pub fn weight_at(&self, id: &str) -> Result<i64> {
        if self.a == id {
            Ok(self.weight_a)
        } else if self.b == id {
            Ok(self.weight_b)
        } else {
            Err(Error::internal(format!("node {id} is not an endpoint of edge {}-{}", self.a, self.b)))
        }
    }

    /// The endpoint other than `id`.
    pub fn other(&self, id: &str) -> &str {
        if self.a == id {
            &self.b
        } else {
            &self.a
        }
    }
}

/// Arrow of a splice diagram: a multilink/horizontal component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpliceArrow {
    pub node: NodeId,
    /// Half-edge weight at the anchoring node (1 for honest sections).
    pub weight: i64,
    /// Multilink multiplicity; defaults to 1, value 0 means "attach a disk".
    pub multiplicity: i64,
    pub label: Option<String>,
}

/// Efficient dual graph: a tree of retained nodes with half-edge weights.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SpliceDiagram {
    pub nodes: BTreeMap<NodeId, SpliceNode>,
    pub edges: Vec<SpliceEdge>,
    pub arrows: Vec<SpliceArrow>,
    /// The leaf carrying the strict transform of the line at infinity, when
    /// the diagram comes from a polynomial fibration.
    pub distinguished_leaf: Option<NodeId>,
}

impl SpliceDiagram {
    /// Edges incident to `id`.
    pub fn edges_at<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a SpliceEdge> {
        self.edges.iter().filter(move |e| e.a == id || e.b == id)
    }

    /// Arrows anchored at `id`.
    pub fn arrows_at<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a SpliceArrow> {
        self.arrows.iter().filter(move |a| a.node == id)
    }

    /// Incident edges plus arrows of multiplicity at least 1.
    pub fn valency(&self, id: &str) -> i64 {
        self.edges_at(id).count() as i64
            + self.arrows_at(id).filter(|a| a.multiplicity >= 1).count() as i64
    }

    /// A leaf: genus 0 and exactly one incident edge or arrow (counting
    /// arrows of any multiplicity — a disk boundary still occupies the spot).
    pub fn is_leaf(&self, id: &str) -> bool {
        let node = match self.nodes.get(id) {
            Some(n) => n,
            None => return false,
        };
        node.genus == 0 && self.edges_at(id).count() + self.arrows_at(id).count() == 1
    }

    /// Copy with edges and arrows brought to a canonical order; edge
    /// endpoints are sorted (swapping the half-edge weights along).
    pub fn normalized(&self) -> Self {
        let mut s = self.clone();
        for e in &mut s.edges {
            if e.a > e.b {
                std::mem::swap(&mut e.a, &mut e.b);
                std::mem::swap(&mut e.weight_a, &mut e.weight_b);
            }
        }
        s.edges.sort_by(|x, y| (&x.a, &x.b, x.weight_a, x.weight_b).cmp(&(&y.a, &y.b, y.weight_a, y.weight_b)));
        s.arrows
            .sort_by(|x, y| (&x.node, &x.label, x.multiplicity, x.weight).cmp(&(&y.node, &y.label, y.multiplicity, y.weight)));
        s
    }
}

/// Component of a stable (or semi-stable) fibre.  Components always carry
/// multiplicity 1, so none is stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StableComponent {
    pub id: NodeId,
    pub genus: i64,
}

/// Node (double point) of a stable fibre.  `a == b` for a self-node.  The
/// total space has a cyclic quotient singularity of the given order at the
/// node; order 1 means the total space is smooth there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StableNode {
    pub a: NodeId,
    pub b: NodeId,
    pub order: i64,
}

/// Marked point on a component of a stable fibre.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkedPoint {
    pub component: NodeId,
    pub label: String,
}

/// Stable-curve model of a fibre.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StableFibre {
    pub components: Vec<StableComponent>,
    pub nodes: Vec<StableNode>,
    pub marked_points: Vec<MarkedPoint>,
}

impl StableFibre {
    /// Number of special points (node branches plus marked points) on the
    /// given component.  A self-node counts twice.
    pub fn special_points(&self, id: &str) -> i64 {
        let mut count = 0;
        for n in &self.nodes {
            if n.a == id {
                count += 1;
            }
            if n.b == id {
                count += 1;
            }
        }
        count + self.marked_points.iter().filter(|m| m.component == id).count() as i64
    }

    /// Sorted multiset of node orders, for reports.
    pub fn node_orders(&self) -> Vec<i64> {
        let mut orders: Vec<i64> = self.nodes.iter().map(|n| n.order).collect();
        orders.sort();
        orders
    }
}

/// One violated structural constraint, with enough context to act on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

/// Check a dual graph: ids resolve, the graph is connected, at most one node
/// is marked as the line at infinity, and the zero-intersection relation
///
/// ```text
/// m_i * e_i  +  sum over adjacent j of m_j * (#edges ij)  +  sum of arrow multiplicities at i  =  0
/// ```
///
/// holds at every node whose multiplicity and whose neighbours'
/// multiplicities are all set (a fibre has zero intersection with each of its
/// components).  A self-edge contributes `2 m_i` to the middle sum, one for
/// each local branch.
///
/// Unresolvable ids are structural errors; relation failures are returned as
/// a list of violations naming the node and the residue.  An empty list means
/// the graph is valid.
pub fn validate_dual_graph(g: &DualGraph) -> Result<Vec<Violation>> {
    for (a, b) in &g.edges {
        for id in [a, b] {
            if !g.nodes.contains_key(id) {
                return Err(Error::domain(format!("edge endpoint {id} is not a declared node")));
            }
        }
    }
    for arrow in &g.arrows {
        if !g.nodes.contains_key(&arrow.node) {
            return Err(Error::domain(format!("arrow anchor {} is not a declared node", arrow.node)));
        }
    }

    let mut violations = Vec::new();

    for (id, node) in &g.nodes {
        if node.genus < 0 {
            violations.push(Violation {
                subject: id.clone(),
                message: format!("negative genus {}", node.genus),
            });
        }
        if let Some(m) = node.multiplicity {
            if m < 0 {
                violations.push(Violation {
                    subject: id.clone(),
                    message: format!("negative multiplicity {m}"),
                });
            }
        }
    }

    let infinity_marks: Vec<&NodeId> = g
        .nodes
        .iter()
        .filter(|(_, n)| n.mark == Mark::LineAtInfinity)
        .map(|(id, _)| id)
        .collect();
    if infinity_marks.len() > 1 {
        violations.push(Violation {
            subject: infinity_marks.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(","),
            message: "more than one node marked as the line at infinity".into(),
        });
    }

    if !g.nodes.is_empty() && !is_connected(g) {
        violations.push(Violation {
            subject: "graph".into(),
            message: "not connected".into(),
        });
    }

    for arrow in &g.arrows {
        if arrow.multiplicity < 0 {
            violations.push(Violation {
                subject: arrow.node.clone(),
                message: format!("arrow with negative multiplicity {}", arrow.multiplicity),
            });
        }
    }

    'nodes: for (id, node) in &g.nodes {
        let m = match node.multiplicity {
            Some(m) => m,
            None => continue,
        };
        let mut residue = m
            .checked_mul(node.self_int)
            .ok_or_else(|| Error::internal(format!("overflow in relation at {id}")))?;
        for (a, b) in &g.edges {
            let other = if a == id && b == id {
                // self-edge: both branches meet the curve
                residue += 2 * m;
                continue;
            } else if a == id {
                b
            } else if b == id {
                a
            } else {
                continue;
            };
            match g.nodes[other].multiplicity {
                Some(mj) => residue += mj,
                None => continue 'nodes,
            }
        }
        for arrow in &g.arrows {
            if &arrow.node == id {
                residue += arrow.multiplicity;
            }
        }
        if residue != 0 {
            violations.push(Violation {
                subject: id.clone(),
                message: format!("zero-intersection relation fails with residue {residue}"),
            });
        }
    }

    Ok(violations)
}

fn is_connected(g: &DualGraph) -> bool {
    let start = match g.nodes.keys().next() {
        Some(s) => s,
        None => return true,
    };
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut stack = vec![start.as_str()];
    while let Some(v) = stack.pop() {
        if !seen.insert(v) {
            continue;
        }
        for (a, b) in &g.edges {
            if a == v && !seen.contains(b.as_str()) {
                stack.push(b);
            }
            if b == v && !seen.contains(a.as_str()) {
                stack.push(a);
            }
        }
    }
    seen.len() == g.nodes.len()
}

/// Check a splice diagram: ids resolve, weights are positive, the diagram is
/// connected, and at most the declared distinguished leaf is special.
pub fn validate_splice(s: &SpliceDiagram) -> Result<Vec<Violation>> {
    for e in &s.edges {
        for id in [&e.a, &e.b] {
            if !s.nodes.contains_key(id) {
                return Err(Error::domain(format!("edge endpoint {id} is not a declared node")));
            }
        }
    }
    for a in &s.arrows {
        if !s.nodes.contains_key(&a.node) {
            return Err(Error::domain(format!("arrow anchor {} is not a declared node", a.node)));
        }
    }
    if let Some(leaf) = &s.distinguished_leaf {
        if !s.nodes.contains_key(leaf) {
            return Err(Error::domain(format!("distinguished leaf {leaf} is not a declared node")));
        }
    }

    let mut violations = Vec::new();
    for e in &s.edges {
        if e.weight_a < 1 || e.weight_b < 1 {
            violations.push(Violation {
                subject: format!("{}-{}", e.a, e.b),
                message: format!("non-positive half-edge weight ({}, {})", e.weight_a, e.weight_b),
            });
        }
        if e.a == e.b {
            violations.push(Violation {
                subject: e.a.clone(),
                message: "self-edge in a splice diagram".into(),
            });
        }
    }
    for a in &s.arrows {
        if a.weight < 1 {
            violations.push(Violation {
                subject: a.node.clone(),
                message: format!("non-positive arrow weight {}", a.weight),
            });
        }
        if a.multiplicity < 0 {
            violations.push(Violation {
                subject: a.node.clone(),
                message: format!("negative arrow multiplicity {}", a.multiplicity),
            });
        }
    }
    for (id, n) in &s.nodes {
        if n.genus < 0 {
            violations.push(Violation {
                subject: id.clone(),
                message: format!("negative genus {}", n.genus),
            });
        }
    }

    // connectivity over edges only (arrows hang off nodes)
    if !s.nodes.is_empty() {
        let start = s.nodes.keys().next().unwrap();
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut stack = vec![start.as_str()];
        while let Some(v) = stack.pop() {
            if !seen.insert(v) {
                continue;
            }
            for e in &s.edges {
                if e.a == v && !seen.contains(e.b.as_str()) {
                    stack.push(&e.b);
                }
                if e.b == v && !seen.contains(e.a.as_str()) {
                    stack.push(&e.a);
                }
            }
        }
        if seen.len() != s.nodes.len() {
            violations.push(Violation {
                subject: "diagram".into(),
                message: "not connected".into(),
            });
        }
    }

    Ok(violations)
}

/// Arithmetic genus of a nodal curve:
/// sum of component genera + #nodes − #components + 1.
pub fn arithmetic_genus(f: &StableFibre) -> i64 {
    let genus_sum: i64 = f.components.iter().map(|c| c.genus).sum();
    genus_sum + f.nodes.len() as i64 - f.components.len() as i64 + 1
}

/// Stability check: every genus-0 component must carry at least three
/// special points (node branches plus marked points).  Violations are
/// reported, not raised — semi-stable intermediates are legitimate values.
pub fn validate_stable(f: &StableFibre) -> Vec<Violation> {
    let mut violations = Vec::new();
    let ids: BTreeSet<&str> = f.components.iter().map(|c| c.id.as_str()).collect();
    if ids.len() != f.components.len() {
        violations.push(Violation {
            subject: "fibre".into(),
            message: "duplicate component ids".into(),
        });
    }
    for n in &f.nodes {
        for id in [&n.a, &n.b] {
            if !ids.contains(id.as_str()) {
                violations.push(Violation {
                    subject: id.clone(),
                    message: "node endpoint is not a component".into(),
                });
            }
        }
        if n.order < 1 {
            violations.push(Violation {
                subject: format!("{}-{}", n.a, n.b),
                message: format!("node order {} < 1", n.order),
            });
        }
    }
    for m in &f.marked_points {
        if !ids.contains(m.component.as_str()) {
            violations.push(Violation {
                subject: m.component.clone(),
                message: "marked point on an unknown component".into(),
            });
        }
    }
    for c in &f.components {
        if c.genus == 0 && f.special_points(&c.id) < 3 {
            violations.push(Violation {
                subject: c.id.clone(),
                message: format!(
                    "genus-0 component with only {} special points (needs 3)",
                    f.special_points(&c.id)
                ),
            });
        }
    }
    violations
}

/// Isomorphism of stable fibres up to relabeling of components, nodes and
/// marked-point labels.  Node orders and marked-point counts must match.
///
/// Fibres in this crate are small (a handful of components), so a direct
/// backtracking search over genus/degree-compatible bijections is plenty.
pub fn fibres_isomorphic(a: &StableFibre, b: &StableFibre) -> bool {
    if a.components.len() != b.components.len()
        || a.nodes.len() != b.nodes.len()
        || a.marked_points.len() != b.marked_points.len()
    {
        return false;
    }
    if a.node_orders() != b.node_orders() {
        return false;
    }

    // signature: genus, marked-point count, sorted incident (order, is_self) list
    let signature = |f: &StableFibre, id: &str| {
        let genus = f.components.iter().find(|c| c.id == id).map(|c| c.genus).unwrap_or(0);
        let marked = f.marked_points.iter().filter(|m| m.component == id).count();
        let mut incident: Vec<(i64, bool)> = Vec::new();
        for n in &f.nodes {
            let selfnode = n.a == n.b;
            if n.a == id {
                incident.push((n.order, selfnode));
            }
            if n.b == id && !selfnode {
                incident.push((n.order, selfnode));
            }
        }
        incident.sort();
        (genus, marked, incident)
    };

    let ids_a: Vec<&str> = a.components.iter().map(|c| c.id.as_str()).collect();
    let ids_b: Vec<&str> = b.components.iter().map(|c| c.id.as_str()).collect();
    let sig_a: Vec<_> = ids_a.iter().map(|id| signature(a, id)).collect();
    let sig_b: Vec<_> = ids_b.iter().map(|id| signature(b, id)).collect();

    // multiset of node records under a mapping
    let node_multiset = |f: &StableFibre, map: &BTreeMap<&str, &str>| -> Vec<(String, String, i64)> {
        let mut out: Vec<(String, String, i64)> = f
            .nodes
            .iter()
            .map(|n| {
                let x = map.get(n.a.as_str()).copied().unwrap_or(n.a.as_str()).to_string();
                let y = map.get(n.b.as_str()).copied().unwrap_or(n.b.as_str()).to_string();
                if x <= y {
                    (x, y, n.order)
                } else {
                    (y, x, n.order)
                }
            })
            .collect();
        out.sort();
        out
    };
    let identity: BTreeMap<&str, &str> = BTreeMap::new();
    let target = node_multiset(b, &identity);

    fn search<'a>(
        pos: usize,
        ids_a: &[&'a str],
        ids_b: &[&'a str],
        sig_a: &[(i64, usize, Vec<(i64, bool)>)],
        sig_b: &[(i64, usize, Vec<(i64, bool)>)],
        used: &mut Vec<bool>,
        map: &mut BTreeMap<&'a str, &'a str>,
        done: &mut dyn FnMut(&BTreeMap<&'a str, &'a str>) -> bool,
    ) -> bool {
        if pos == ids_a.len() {
            return done(map);
        }
        for j in 0..ids_b.len() {
            if used[j] || sig_a[pos] != sig_b[j] {
                continue;
            }
            used[j] = true;
            map.insert(ids_a[pos], ids_b[j]);
            if search(pos + 1, ids_a, ids_b, sig_a, sig_b, used, map, done) {
                return true;
            }
            map.remove(ids_a[pos]);
            used[j] = false;
        }
        false
    }

    let mut used = vec![false; ids_b.len()];
    let mut map = BTreeMap::new();
    search(
        0,
        &ids_a,
        &ids_b,
        &sig_a,
        &sig_b,
        &mut used,
        &mut map,
        &mut |map| node_multiset(a, map) == target,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(k: usize) -> DualGraph {
        let mut g = DualGraph::default();
        for i in 0..k {
            g.nodes.insert(format!("n{i}"), DualNode::rational(-2, 1));
        }
        for i in 0..k {
            g.edges.push((format!("n{i}"), format!("n{}", (i + 1) % k)));
        }
        g
    }

    #[test]
    fn cycle_of_minus_two_curves_validates() {
        for k in [2, 3, 5] {
            let g = cycle(k);
            assert_eq!(validate_dual_graph(&g).unwrap(), vec![]);
        }
    }

    #[test]
    fn lone_minus_one_curve_fails_with_residue() {
        let mut g = DualGraph::default();
        g.nodes.insert("n".into(), DualNode::rational(-1, 1));
        let violations = validate_dual_graph(&g).unwrap();
        assert_eq!(violations.len(), 1);
        assert!(violations[0].message.contains("residue -1"), "{}", violations[0]);
    }

    #[test]
    fn dangling_edge_is_a_structural_error() {
        let mut g = DualGraph::default();
        g.nodes.insert("n".into(), DualNode::rational(-1, 1));
        g.edges.push(("n".into(), "ghost".into()));
        assert!(validate_dual_graph(&g).is_err());
    }

    #[test]
    fn nodal_cubic_fibre_validates_with_self_edge() {
        // one rational curve with one self-crossing: m*e + 2m = 0 at e = -2
        let mut g = DualGraph::default();
        g.nodes.insert("c".into(), DualNode::rational(-2, 1));
        g.edges.push(("c".into(), "c".into()));
        assert_eq!(validate_dual_graph(&g).unwrap(), vec![]);
    }

    #[test]
    fn arithmetic_genus_of_chain() {
        // genus 1 - genus 2 - genus 1 joined by two nodes
        let f = StableFibre {
            components: vec![
                StableComponent { id: "a".into(), genus: 1 },
                StableComponent { id: "b".into(), genus: 2 },
                StableComponent { id: "c".into(), genus: 1 },
            ],
            nodes: vec![
                StableNode { a: "a".into(), b: "b".into(), order: 7 },
                StableNode { a: "b".into(), b: "c".into(), order: 7 },
            ],
            marked_points: vec![],
        };
        assert_eq!(arithmetic_genus(&f), 4);
    }

    #[test]
    fn arithmetic_genus_of_smooth_curve() {
        for g in 0..5 {
            let f = StableFibre {
                components: vec![StableComponent { id: "c".into(), genus: g }],
                nodes: vec![],
                marked_points: vec![],
            };
            assert_eq!(arithmetic_genus(&f), g);
        }
    }

    #[test]
    fn self_node_adds_one_to_genus_and_is_unstable_with_one_mark() {
        let f = StableFibre {
            components: vec![StableComponent { id: "c".into(), genus: 0 }],
            nodes: vec![StableNode { a: "c".into(), b: "c".into(), order: 1 }],
            marked_points: vec![MarkedPoint { component: "c".into(), label: "s1".into() }],
        };
        assert_eq!(arithmetic_genus(&f), 1);
        // self node = 2 special points, marked point = 1: total 3 is enough
        assert_eq!(validate_stable(&f), vec![]);
        // without the marked point it is unstable
        let bare = StableFibre { marked_points: vec![], ..f };
        assert_eq!(bare.special_points("c"), 2);
        assert_eq!(validate_stable(&bare).len(), 1);
    }

    #[test]
    fn fibre_isomorphism_ignores_labels() {
        let make = |ids: [&str; 3]| StableFibre {
            components: vec![
                StableComponent { id: ids[0].into(), genus: 1 },
                StableComponent { id: ids[1].into(), genus: 2 },
                StableComponent { id: ids[2].into(), genus: 1 },
            ],
            nodes: vec![
                StableNode { a: ids[0].into(), b: ids[1].into(), order: 7 },
                StableNode { a: ids[1].into(), b: ids[2].into(), order: 7 },
            ],
            marked_points: vec![MarkedPoint { component: ids[1].into(), label: "s".into() }],
        };
        assert!(fibres_isomorphic(&make(["x", "y", "z"]), &make(["p", "q", "r"])));
    }

    #[test]
    fn fibre_isomorphism_sees_node_orders() {
        let make = |order| StableFibre {
            components: vec![
                StableComponent { id: "a".into(), genus: 1 },
                StableComponent { id: "b".into(), genus: 1 },
            ],
            nodes: vec![StableNode { a: "a".into(), b: "b".into(), order }],
            marked_points: vec![],
        };
        assert!(fibres_isomorphic(&make(3), &make(3)));
        assert!(!fibres_isomorphic(&make(3), &make(4)));
    }

    #[test]
    fn fibre_isomorphism_distinguishes_chain_from_star_by_placement() {
        // same component multiset, same order multiset, different incidence
        let chain = StableFibre {
            components: vec![
                StableComponent { id: "a".into(), genus: 1 },
                StableComponent { id: "b".into(), genus: 0 },
                StableComponent { id: "c".into(), genus: 1 },
                StableComponent { id: "d".into(), genus: 0 },
            ],
            nodes: vec![
                StableNode { a: "a".into(), b: "b".into(), order: 2 },
                StableNode { a: "b".into(), b: "c".into(), order: 2 },
                StableNode { a: "c".into(), b: "d".into(), order: 2 },
                StableNode { a: "d".into(), b: "a".into(), order: 2 },
            ],
            marked_points: vec![],
        };
        let mut crossed = chain.clone();
        crossed.nodes[3] = StableNode { a: "b".into(), b: "d".into(), order: 2 };
        assert!(!fibres_isomorphic(&chain, &crossed));
    }

    #[test]
    fn rational_helpers_reduce() {
        assert_eq!(rational(14, 60), rational(7, 30));
        assert_eq!(rational_int(3), rational(6, 2));
    }
}
