//! Moduli invariants of a polynomial family: δ, κ₁, λ₁ and the cotangent
//! weights ψᵢ, together with the canonical-class bookkeeping they rest on.
//!
//! The family of curves cut out by a polynomial map classifies to a curve in
//! the moduli of stable marked curves once the fibres are semi-stably
//! reduced; the invariants here are the degrees of the tautological classes
//! on that curve.  Everything is computed in exact arithmetic from the
//! reduction report of the fibre over infinity plus the node counts of the
//! finite exceptional fibres, which are supplied as data.
//!
//! The canonical class of the reduced total space is pinned down by
//! adjunction alone: it is supported on the fibre over infinity, the
//! sections through the marked points, and `d − 1` copies of a generic
//! fibre contributed by the ramification of the degree-`d` base change.
//! Solving the adjunction relations on that support gives the multiplicity
//! of every component, hence `K²` and κ₁; the same data yields the divisor
//! `D` with multiplicities `−kᵢ − 1`, whose intersection numbers reduce to
//! combinatorics of the dual graph.

use std::collections::BTreeMap;

use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::calculus::{edge_determinant, linalg, splice_from_dual};
use crate::model::{
    arithmetic_genus, rational, rational_int, DualGraph, Error, NodeId, Rational, Result,
    SpliceArrow, SpliceDiagram, SpliceEdge, SpliceNode,
};
use crate::reduction::{stable_reduce, ReductionReport};

// ---------------------------------------------------------------------------
// input data

/// Node counts of the exceptional fibres over finite base values.
///
/// These are data, not something computed here: analyzing the finite
/// singularities of a concrete polynomial is a separate (local) problem, and
/// only the counts enter the invariants.  Each listed fibre is assumed
/// semi-stable, so its nodes are counted directly.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FiniteFibreData {
    /// `(base value label, number of nodes)`, one entry per exceptional fibre.
    pub fibres: Vec<(String, i64)>,
}

impl FiniteFibreData {
    pub fn new(fibres: Vec<(String, i64)>) -> Result<Self> {
        for (label, count) in &fibres {
            if *count < 1 {
                return Err(Error::domain(format!(
                    "finite fibre '{label}' lists {count} nodes; an exceptional fibre has at \
                     least one"
                )));
            }
        }
        Ok(FiniteFibreData { fibres })
    }

    /// The generic finite data for a family with generic-fibre Euler
    /// characteristic `chi`: every finite exceptional fibre is stable, so by
    /// the vanishing-cycle count the nodes total `1 − chi`.  This is the
    /// configuration on which the δ bounds are attained.
    pub fn generic(chi: i64) -> Self {
        if chi >= 1 {
            return FiniteFibreData::default();
        }
        FiniteFibreData { fibres: vec![("generic".to_string(), 1 - chi)] }
    }

    pub fn total_nodes(&self) -> i64 {
        self.fibres.iter().map(|(_, n)| n).sum()
    }
}

// ---------------------------------------------------------------------------
// the canonical class on the semi-stable model

/// Canonical and `D`-divisor multiplicities of one fibre component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentCanonical {
    pub id: NodeId,
    pub genus: i64,
    /// Self-intersection in the expanded semi-stable fibre (each node of
    /// order `r` replaced by a string of `r − 1` rational (−2)-curves).
    pub self_int: i64,
    /// Multiplicity of the canonical class.
    pub k: i64,
    /// Multiplicity of `D`: `−k − 1`.
    pub d_mult: i64,
    /// `D · C` — equals `χ(C) − valency(C)`, which is asserted.
    pub d_dot: i64,
}

/// Canonical data across one node of the stable fibre.  Along the string of
/// (−2)-curves that resolves the node's quotient singularity the canonical
/// multiplicity moves in equal integer steps from `k(a)` to `k(b)`; only the
/// step is recorded, the individual curves carry no further information.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeCanonical {
    pub a: NodeId,
    pub b: NodeId,
    pub order: i64,
    /// `(k(b) − k(a)) / order`, an integer — integrality is exactly the
    /// statement that the quotient singularity admits the resolution.
    pub step: i64,
}

/// Canonical data of one section through a marked point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionCanonical {
    pub label: String,
    /// Component of the stable fibre the section passes through.
    pub component: NodeId,
    /// Self-intersection: `−d` times the boundary twist of the monodromy
    /// around the marked point.
    pub self_int: i64,
    pub k: i64,
    pub d_mult: i64,
}

/// The canonical class of the semi-stably reduced family, component by
/// component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalData {
    pub components: Vec<ComponentCanonical>,
    pub nodes: Vec<NodeCanonical>,
    pub sections: Vec<SectionCanonical>,
    /// Copies of the generic fibre in the canonical class: `d − 1`, from the
    /// ramification of the base change.
    pub fibre_copies: i64,
    /// Arithmetic genus of the fibres.
    pub fibre_genus: i64,
    /// Degree of the base change.
    pub degree: i64,
}

struct Layout {
    /// component index → (id, genus, edge incidences counting self-nodes twice)
    comps: Vec<(NodeId, i64, i64)>,
    index: BTreeMap<NodeId, usize>,
    /// (comp a, comp b, order) with a ≠ b possible or not
    nodes: Vec<(usize, usize, i64)>,
    /// (label, anchor comp, section self-intersection)
    sections: Vec<(String, usize, i64)>,
}

fn layout(r: &ReductionReport) -> Result<Layout> {
    let fibre = &r.stable_fibre;
    let d = r.cover_degree;
    let mut comps: Vec<(NodeId, i64, i64)> = Vec::new();
    let mut index: BTreeMap<NodeId, usize> = BTreeMap::new();
    for c in &fibre.components {
        index.insert(c.id.clone(), comps.len());
        comps.push((c.id.clone(), c.genus, 0));
    }
    let mut nodes = Vec::new();
    for n in &fibre.nodes {
        let ia = *index
            .get(&n.a)
            .ok_or_else(|| Error::internal(format!("node endpoint {} is not a component", n.a)))?;
        let ib = *index
            .get(&n.b)
            .ok_or_else(|| Error::internal(format!("node endpoint {} is not a component", n.b)))?;
        if n.order < 1 {
            return Err(Error::domain(format!("node {}-{} has order {} < 1", n.a, n.b, n.order)));
        }
        comps[ia].2 += 1;
        comps[ib].2 += 1;
        nodes.push((ia, ib, n.order));
    }

    let mut sections = Vec::new();
    for m in &fibre.marked_points {
        let anchor = *index.get(&m.component).ok_or_else(|| {
            Error::internal(format!("marked point {} sits on no component", m.label))
        })?;
        let twist = r
            .boundary_twists
            .iter()
            .find(|b| b.arrow == m.label || m.label.starts_with(&format!("{}.", b.arrow)))
            .ok_or_else(|| {
                Error::domain(format!("marked point {} has no boundary twist", m.label))
            })?;
        let scaled = &twist.twist * rational_int(d);
        if !scaled.is_integer() {
            return Err(Error::domain(format!(
                "boundary twist {} of {} times the degree {d} is not an integer",
                twist.twist, m.label
            )));
        }
        let self_int = -scaled.to_integer().to_i64().ok_or_else(|| {
            Error::domain(format!("section self-intersection of {} overflows", m.label))
        })?;
        sections.push((m.label.clone(), anchor, self_int));
    }
    Ok(Layout { comps, index, nodes, sections })
}

/// Solve the adjunction relations for the canonical multiplicities on the
/// semi-stable model described by a reduction report.
///
/// The unknowns are one multiplicity per fibre component and one per
/// section; the strings of (−2)-curves are eliminated symbolically, since
/// adjunction forces the multiplicity to interpolate linearly along them.
/// The equations are the adjunction relation on every component and section
/// plus the degree of the canonical class on a fibre, which has a unique
/// solution exactly when the intersection data is non-degenerate.
pub fn canonical_from_report(r: &ReductionReport) -> Result<CanonicalData> {
    let d = r.cover_degree;
    if d < 1 {
        return Err(Error::domain(format!("cover degree {d} < 1")));
    }
    let genus = arithmetic_genus(&r.stable_fibre);
    let lay = layout(r)?;
    let nc = lay.comps.len();
    let ns = lay.sections.len();
    if nc == 0 {
        return Err(Error::domain("the stable fibre has no components"));
    }

    // unknowns: k(comp 0..nc), k(section 0..ns)
    let cols = nc + ns;
    let mut a = vec![vec![Rational::zero(); cols]; nc + ns + 1];
    let mut b = vec![Rational::zero(); nc + ns + 1];

    // adjunction on each component, with the strings eliminated:
    //   Σ_nodes (k(b) − k(a))/order + Σ_sections k(s) = 2g(a) − 2 + deg(a)
    for (i, (_, g, deg)) in lay.comps.iter().enumerate() {
        b[i] = rational_int(2 * g - 2 + deg);
    }
    for &(ia, ib, order) in &lay.nodes {
        if ia == ib {
            continue; // a loop contributes nothing beyond its incidences
        }
        let w = rational(1, order);
        a[ia][ib] = &a[ia][ib] + &w;
        a[ia][ia] = &a[ia][ia] - &w;
        a[ib][ia] = &a[ib][ia] + &w;
        a[ib][ib] = &a[ib][ib] - &w;
    }
    for (j, (_, anchor, _)) in lay.sections.iter().enumerate() {
        a[*anchor][nc + j] = &a[*anchor][nc + j] + &rational_int(1);
    }

    // adjunction on each section: (d−1) + k(anchor) + k(s)·s² = −2 − s²
    for (j, (_, anchor, self_int)) in lay.sections.iter().enumerate() {
        let row = nc + j;
        a[row][*anchor] = rational_int(1);
        a[row][nc + j] = rational_int(*self_int);
        b[row] = rational_int(-2 - self_int - (d - 1));
    }

    // the canonical class has degree 2g − 2 on a fibre, carried entirely by
    // the sections
    for j in 0..ns {
        a[nc + ns][nc + j] = rational_int(1);
    }
    b[nc + ns] = rational_int(2 * genus - 2);

    let solution = match linalg::solve(a, b) {
        linalg::Outcome::Unique(x) => x,
        linalg::Outcome::Underdetermined { .. } => {
            return Err(Error::domain(
                "the intersection data does not determine the canonical class: \
                 the adjunction system is degenerate",
            ));
        }
        linalg::Outcome::Inconsistent => {
            return Err(Error::domain(
                "no canonical class is supported on the fibre over infinity, the sections \
                 and the ramification copies: the adjunction system is inconsistent",
            ));
        }
    };
    let as_int = |x: &Rational, what: &str| -> Result<i64> {
        if !x.is_integer() {
            return Err(Error::domain(format!(
                "canonical multiplicity of {what} is {x}, not an integer; the diagram is \
                 not the picture of a semi-stable family"
            )));
        }
        x.to_integer()
            .to_i64()
            .ok_or_else(|| Error::domain(format!("canonical multiplicity of {what} overflows")))
    };

    let k_comp: Vec<i64> = lay
        .comps
        .iter()
        .enumerate()
        .map(|(i, (id, _, _))| as_int(&solution[i], id))
        .collect::<Result<_>>()?;
    let k_sec: Vec<i64> = lay
        .sections
        .iter()
        .enumerate()
        .map(|(j, (label, _, _))| as_int(&solution[nc + j], label))
        .collect::<Result<_>>()?;

    // integrality across every node: the order divides the multiplicity jump
    let mut nodes = Vec::new();
    for &(ia, ib, order) in &lay.nodes {
        let jump = k_comp[ib] - k_comp[ia];
        if jump % order != 0 {
            return Err(Error::domain(format!(
                "canonical multiplicities {} and {} differ by {jump} across a node of order \
                 {order}; the string of the quotient singularity cannot carry integer \
                 multiplicities",
                lay.comps[ia].0, lay.comps[ib].0
            )));
        }
        nodes.push(NodeCanonical {
            a: lay.comps[ia].0.clone(),
            b: lay.comps[ib].0.clone(),
            order,
            step: jump / order,
        });
    }

    // D·C = χ(C) − valency(C) on every component — a consistency theorem for
    // the solved multiplicities, not an extra constraint
    let d_of = |k: i64| -k - 1;
    let mut d_dot = vec![0i64; nc];
    for &(ia, ib, order) in &lay.nodes {
        if ia == ib {
            continue;
        }
        let step = (d_of(k_comp[ib]) - d_of(k_comp[ia])) / order;
        d_dot[ia] += step;
        d_dot[ib] -= step;
    }
    let mut valency: Vec<i64> = lay.comps.iter().map(|(_, _, deg)| *deg).collect();
    for (j, (_, anchor, _)) in lay.sections.iter().enumerate() {
        d_dot[*anchor] += d_of(k_sec[j]);
        valency[*anchor] += 1;
    }
    for (i, (id, g, deg)) in lay.comps.iter().enumerate() {
        let expected = (2 - 2 * g) - valency[i];
        if d_dot[i] != expected {
            return Err(Error::internal(format!(
                "D·{id} = {} but χ − valency = {expected}",
                d_dot[i]
            )));
        }
        let _ = deg;
    }

    let components = lay
        .comps
        .iter()
        .enumerate()
        .map(|(i, (id, g, deg))| ComponentCanonical {
            id: id.clone(),
            genus: *g,
            self_int: -deg,
            k: k_comp[i],
            d_mult: d_of(k_comp[i]),
            d_dot: d_dot[i],
        })
        .collect();
    let sections = lay
        .sections
        .iter()
        .enumerate()
        .map(|(j, (label, anchor, self_int))| SectionCanonical {
            label: label.clone(),
            component: lay.comps[*anchor].0.clone(),
            self_int: *self_int,
            k: k_sec[j],
            d_mult: d_of(k_sec[j]),
        })
        .collect();
    let _ = &lay.index;
    Ok(CanonicalData {
        components,
        nodes,
        sections,
        fibre_copies: d - 1,
        fibre_genus: genus,
        degree: d,
    })
}

/// Canonical multiplicities from a resolved dual graph carrying its section
/// arrows, for a stated cover degree `d`.  The graph is condensed to its
/// splice diagram, reduced along the efficient route, and the result is
/// checked against `d` before solving.
pub fn canonical_multiplicities(g: &DualGraph, d: i64) -> Result<CanonicalData> {
    if g.arrows.iter().all(|a| a.multiplicity < 1) {
        return Err(Error::domain(
            "the dual graph has no section arrow; the canonical class needs the sections",
        ));
    }
    let s = splice_from_dual(g)?;
    let r = stable_reduce(&s)?;
    if r.cover_degree != d {
        return Err(Error::domain(format!(
            "stable reduction of this graph uses a degree-{} cover, not {d}",
            r.cover_degree
        )));
    }
    canonical_from_report(&r)
}

/// `K²` of the relative canonical class `K + 2F` of the semi-stable model
/// over a rational base, computed two independent ways that must agree:
/// once through the per-component identity
/// `K² = −K·D + Σᵢ (χ(Cᵢ) + Cᵢ·Cᵢ)`, whose terms vanish on the
/// (−2)-strings, and once by expanding `K²` against the full intersection
/// matrix.
pub fn k_squared_relative(c: &CanonicalData) -> Result<Rational> {
    let d = c.degree;
    let g = c.fibre_genus;

    // Route 1: component by component.  Adjunction gives K·C, and the
    // contribution of C to K² is (k+1)(K·C) + χ(C) + C·C.  A (−2)-string
    // curve contributes zero to both terms, so only components, sections and
    // the ramification copy of the generic fibre appear.
    let mut route1: i64 = 0;
    for comp in &c.components {
        let k_dot = 2 * comp.genus - 2 - comp.self_int;
        route1 += (comp.k + 1) * k_dot + (2 - 2 * comp.genus) + comp.self_int;
    }
    for s in &c.sections {
        let k_dot = -2 - s.self_int;
        route1 += (s.k + 1) * k_dot + 2 + s.self_int;
    }
    route1 += (d - 1) * (2 * g - 2);

    // Route 2: K² expanded against the intersection matrix.  The strings
    // telescope: a node of order r between a and b contributes
    // k(a)² + k(b)² − r·step².
    let mut vertical: i64 = 0;
    for comp in &c.components {
        vertical += comp.self_int * comp.k * comp.k;
    }
    let k_of: BTreeMap<&str, i64> = c.components.iter().map(|x| (x.id.as_str(), x.k)).collect();
    for n in &c.nodes {
        let ka = k_of[n.a.as_str()];
        let kb = k_of[n.b.as_str()];
        vertical += ka * ka + kb * kb - n.order * n.step * n.step;
    }
    let mut route2 = vertical;
    for s in &c.sections {
        let anchor = k_of[s.component.as_str()];
        route2 += 2 * s.k * anchor + s.k * s.k * s.self_int + 2 * (d - 1) * s.k;
    }

    if route1 != route2 {
        return Err(Error::internal(format!(
            "K² disagrees between the component formula ({route1}) and the intersection \
             matrix ({route2})"
        )));
    }
    Ok(rational_int(route1 + 4 * (2 * g - 2)))
}

// ---------------------------------------------------------------------------
// the invariants

/// Number of nodes of the semi-stably reduced family per unit of base
/// degree.  A finite fibre (already semi-stable) counts its nodes directly;
/// a node of the stable fibre over infinity with quotient-singularity order
/// `k` turns into `k` nodes upstairs, counted once per degree‑`d` cover.
pub fn delta(r: &ReductionReport, f: &FiniteFibreData) -> Rational {
    let mut total = rational_int(f.total_nodes());
    for n in &r.stable_fibre.nodes {
        total += rational(n.order, r.cover_degree);
    }
    total
}

/// The degree-2 tautological numbers of one family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantSet {
    pub delta: Rational,
    pub kappa1: Rational,
    pub lambda1: Rational,
    /// Cotangent weight at each marked point, in boundary order.
    pub psi: Vec<Rational>,
    /// `(κ₁ − 2δ)/3` — the signature of the reduced total space per unit of
    /// base degree, exposed for reference.
    pub sigma_over_d: Rational,
    pub cover_degree: i64,
}

/// Assemble δ, κ₁, λ₁ and the ψᵢ from a reduction report, finite-fibre data
/// and the canonical multiplicities.  The two available routes to each ψᵢ —
/// the boundary twist of the monodromy, and the self-intersection of the
/// section upstairs — are checked against each other.
pub fn invariant_set(
    r: &ReductionReport,
    f: &FiniteFibreData,
    c: &CanonicalData,
) -> Result<InvariantSet> {
    if c.degree != r.cover_degree {
        return Err(Error::domain(format!(
            "canonical data is for a degree-{} cover, the reduction uses {}",
            c.degree, r.cover_degree
        )));
    }
    let d = r.cover_degree;
    let delta = delta(r, f);
    let kappa1 = k_squared_relative(c)? / rational_int(d);
    let lambda1 = (&kappa1 + &delta) / rational_int(12);
    let sigma_over_d = (&kappa1 - rational_int(2) * &delta) / rational_int(3);

    let mut psi = Vec::new();
    for b in &r.boundary_twists {
        psi.push(b.twist.clone());
    }
    for s in &c.sections {
        let via_section = rational(-s.self_int, d);
        let via_twist = r
            .boundary_twists
            .iter()
            .find(|b| b.arrow == s.label || s.label.starts_with(&format!("{}.", b.arrow)))
            .map(|b| b.twist.clone())
            .ok_or_else(|| {
                Error::internal(format!("section {} matches no boundary twist", s.label))
            })?;
        if via_section != via_twist {
            return Err(Error::internal(format!(
                "ψ at {} is {via_twist} by the boundary twist but {via_section} by the \
                 section self-intersection",
                s.label
            )));
        }
    }

    Ok(InvariantSet { delta, kappa1, lambda1, psi, sigma_over_d, cover_degree: d })
}

/// Outcome of the vanishing-cycle count: the nodes of the finite exceptional
/// fibres must account for the whole drop of the Euler characteristic,
/// `Σ_c (χ_c − χ) = 1 − χ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuzukiCheck {
    pub vanishing_cycles: i64,
    pub expected: i64,
}

impl SuzukiCheck {
    pub fn residue(&self) -> i64 {
        self.vanishing_cycles - self.expected
    }
    pub fn passes(&self) -> bool {
        self.residue() == 0
    }
}

/// Compare the finite node counts against the Euler characteristic of the
/// generic fibre.  For complete data the residue is zero; listed fibres are
/// semi-stable so each node is one vanishing cycle.
pub fn suzuki_relation(f: &FiniteFibreData, chi: i64) -> SuzukiCheck {
    SuzukiCheck { vanishing_cycles: f.total_nodes(), expected: 1 - chi }
}

/// The combination `κ₁ + Σψᵢ` — the pairing of the family with the Kähler
/// class of the moduli space, positive whenever the family is not
/// isotrivial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WolpertCheck {
    pub value: Rational,
}

impl WolpertCheck {
    pub fn is_positive(&self) -> bool {
        self.value.is_positive()
    }
    /// Zero is what an isotrivial (constant) family produces.
    pub fn is_trivial(&self) -> bool {
        self.value.is_zero()
    }
}

pub fn wolpert_positivity(inv: &InvariantSet) -> WolpertCheck {
    let mut value = inv.kappa1.clone();
    for p in &inv.psi {
        value += p;
    }
    WolpertCheck { value }
}

// ---------------------------------------------------------------------------
// the one-point-at-infinity families

/// Parameters `(pᵢ, qᵢ)` of the chain family of polynomials with one point
/// at infinity.  Coprimality and `pᵢ, qᵢ ≥ 2` keep every multiplicity and
/// singularity order well-defined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyParams {
    pub pairs: Vec<(i64, i64)>,
}

impl FamilyParams {
    pub fn new(pairs: Vec<(i64, i64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::domain("a family needs at least one pair"));
        }
        for (i, (p, q)) in pairs.iter().enumerate() {
            if *p < 2 || *q < 2 {
                return Err(Error::domain(format!(
                    "pair {} is ({p}, {q}); both entries must be at least 2",
                    i + 1
                )));
            }
            if p.gcd(q) != 1 {
                return Err(Error::domain(format!(
                    "pair {} is ({p}, {q}); the entries must be coprime",
                    i + 1
                )));
            }
        }
        Ok(FamilyParams { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Splice diagram of the fibre over infinity for the chain family: node `i`
/// carries a leaf of weight `qᵢ` (node 1 also the leaf `p₁`), the edge into
/// node `i+1` has weights `1` and `pᵢ₊₁`, and the single boundary arrow
/// sits on the last node.  The multiplicity of node `i` comes out
/// `pᵢqᵢ·∏_{j>i} qⱼ`.
pub fn family_splice(params: &FamilyParams) -> Result<SpliceDiagram> {
    let m = params.len();
    let mut s = SpliceDiagram::default();
    for i in 1..=m {
        s.nodes.insert(format!("v{i}"), SpliceNode::default());
    }
    let (p1, q1) = params.pairs[0];
    s.nodes.insert("p1".into(), SpliceNode::default());
    s.nodes.insert("q1".into(), SpliceNode::default());
    s.edges.push(SpliceEdge { a: "v1".into(), weight_a: p1, b: "p1".into(), weight_b: 1 });
    s.edges.push(SpliceEdge { a: "v1".into(), weight_a: q1, b: "q1".into(), weight_b: 1 });
    for (i, &(p, q)) in params.pairs.iter().enumerate().skip(1) {
        let node = format!("v{}", i + 1);
        let prev = format!("v{i}");
        let leaf = format!("q{}", i + 1);
        s.nodes.insert(leaf.clone(), SpliceNode::default());
        s.edges.push(SpliceEdge { a: prev, weight_a: 1, b: node.clone(), weight_b: p });
        s.edges.push(SpliceEdge { a: node, weight_a: q, b: leaf, weight_b: 1 });
    }
    s.arrows.push(SpliceArrow {
        node: format!("v{m}"),
        weight: 1,
        multiplicity: 1,
        label: Some("s1".into()),
    });
    s.distinguished_leaf = Some("q1".into());
    Ok(s)
}

/// The closed-form values printed for the one- and two-node chain families.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyBounds {
    pub chi: i64,
    /// Upper bound for δ, attained at generic finite data.
    pub delta_bound: Rational,
    /// Upper bound for κ₁.
    pub kappa1_bound: Rational,
    pub psi1: Rational,
    /// Self-intersection of the section in the full `∏ pᵢqᵢ` cover.
    pub section_self_int: i64,
}

/// Evaluate the printed closed forms for one or two pairs; longer chains
/// have no printed closed form and are rejected.
pub fn family_bounds(params: &FamilyParams) -> Result<FamilyBounds> {
    match params.pairs.as_slice() {
        [(p, q)] => {
            let chi = p + q - p * q;
            Ok(FamilyBounds {
                chi,
                delta_bound: rational_int(1 - chi),
                kappa1_bound: rational(chi * chi - 1, p * q),
                psi1: rational(1, p * q),
                section_self_int: -1,
            })
        }
        [(p1, q1), (p2, q2)] => {
            let chi = q1 * q2 + p1 * q2 + p2 - p1 * q1 * q2 - p2 * q2;
            let delta_bound =
                rational_int(1 - chi) - rational(1, p1 * q1) + rational(*q2, *p2);
            let kappa1_bound = rational_int(2 - 2 * chi)
                + rational(1, p2 * q2)
                - rational_int(p1 * q1 + p2 * q2)
                + rational(*p1, *q1)
                + rational(*q1, *p1)
                + rational(*p2, *q2);
            Ok(FamilyBounds {
                chi,
                delta_bound,
                kappa1_bound,
                psi1: rational(1, p2 * q2),
                section_self_int: -p1 * q1,
            })
        }
        _ => Err(Error::domain(format!(
            "closed forms are only available for one or two pairs, not {}",
            params.len()
        ))),
    }
}

// ---------------------------------------------------------------------------
// the D-divisor on the splice diagram

/// Multiplicities of the divisor `D` on the nodes of a splice diagram, by
/// the outward recursion from the distinguished leaf: the leaf itself
/// carries 2, and across an edge `E` from the previous node `v′`,
/// `m(v) = w·m(v′) + det(E)` where `w` is the product of the weights at `v`
/// off `E`.  Under a cover the multiplicity scales by the local transverse
/// degree, which makes `D` the efficient carrier of the canonical class.
pub fn d_divisor(s: &SpliceDiagram) -> Result<BTreeMap<NodeId, i64>> {
    let root = s.distinguished_leaf.clone().ok_or_else(|| {
        Error::domain("no distinguished leaf: the recursion for D starts at the line at infinity")
    })?;
    if !s.nodes.contains_key(&root) {
        return Err(Error::domain(format!("distinguished leaf {root} is not a node")));
    }
    let mut out: BTreeMap<NodeId, i64> = BTreeMap::new();
    out.insert(root.clone(), 2);
    let mut queue = vec![root];
    while let Some(u) = queue.pop() {
        for (idx, e) in s.edges.iter().enumerate() {
            let v = if e.a == u {
                &e.b
            } else if e.b == u {
                &e.a
            } else {
                continue;
            };
            if out.contains_key(v) {
                continue;
            }
            let mut w: i64 = 1;
            for other in s.edges_at(v) {
                if std::ptr::eq(other, e) {
                    continue;
                }
                w = w
                    .checked_mul(other.weight_at(v)?)
                    .ok_or_else(|| Error::domain("D-multiplicity overflow"))?;
            }
            for arrow in s.arrows_at(v) {
                w = w
                    .checked_mul(arrow.weight)
                    .ok_or_else(|| Error::domain("D-multiplicity overflow"))?;
            }
            let det = edge_determinant(s, idx)?;
            out.insert(v.clone(), w * out[&u] + det);
            queue.push(v.clone());
        }
    }
    if out.len() != s.nodes.len() {
        return Err(Error::domain(
            "the splice diagram is not connected to its distinguished leaf",
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// reference constants for rational-fibre polynomials

/// Invariants of a polynomial with rational fibres and `n ≥ 3` points at
/// infinity whose homology class is nontrivial.  These come from the
/// classification of such polynomials and are stored constants, not
/// re-derived: κ₁ = 1 − n, δ = n − 1, ψᵢ = 1 for i < n and ψₙ = n − 3.
pub fn rational_reference(n: i64) -> Result<InvariantSet> {
    if n < 3 {
        return Err(Error::domain(format!(
            "a rational-fibre family needs at least 3 points at infinity, got {n}"
        )));
    }
    let kappa1 = rational_int(1 - n);
    let delta = rational_int(n - 1);
    let lambda1 = (&kappa1 + &delta) / rational_int(12);
    let sigma_over_d = (&kappa1 - rational_int(2) * &delta) / rational_int(3);
    let mut psi = vec![rational_int(1); (n - 1) as usize];
    psi.push(rational_int(n - 3));
    Ok(InvariantSet { delta, kappa1, lambda1, psi, sigma_over_d, cover_degree: 1 })
}

/// Invariants of a polynomial with rational fibres and one fibre isomorphic
/// to the punctured plane: κ₁ = −1 and δ = 1 across the whole family.  The
/// ψᵢ are not part of the stored reference.
pub fn c_star_reference() -> InvariantSet {
    let kappa1 = rational_int(-1);
    let delta = rational_int(1);
    let lambda1 = (&kappa1 + &delta) / rational_int(12);
    let sigma_over_d = (&kappa1 - rational_int(2) * &delta) / rational_int(3);
    InvariantSet { delta, kappa1, lambda1, psi: Vec::new(), sigma_over_d, cover_degree: 1 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{dual_from_splice, genus_and_points_dual};
    use crate::testutil::running_example;

    fn running_report() -> ReductionReport {
        stable_reduce(&running_example()).unwrap()
    }

    fn running_finite() -> FiniteFibreData {
        FiniteFibreData::new((1..=8).map(|i| (format!("c{i}"), 1)).collect()).unwrap()
    }

    #[test]
    fn delta_of_the_running_example() {
        let r = running_report();
        assert_eq!(delta(&r, &running_finite()), rational(247, 30));
        assert_eq!(delta(&r, &FiniteFibreData::default()), rational(7, 30));
    }

    #[test]
    fn canonical_multiplicities_of_the_running_example() {
        let c = canonical_from_report(&running_report()).unwrap();
        assert_eq!(c.degree, 60);
        assert_eq!(c.fibre_copies, 59);
        assert_eq!(c.fibre_genus, 4);

        let by_id: BTreeMap<&str, &ComponentCanonical> =
            c.components.iter().map(|x| (x.id.as_str(), x)).collect();
        let genus2 = &by_id["B"];
        assert_eq!((genus2.genus, genus2.k, genus2.d_mult), (2, -19, 18));
        assert_eq!(genus2.self_int, -2);
        assert_eq!(genus2.d_dot, -5); // χ − valency = −2 − 3
        for id in ["A.1", "A.2"] {
            let comp = &by_id[id];
            assert_eq!((comp.genus, comp.k, comp.d_mult), (1, -26, 25));
            assert_eq!(comp.d_dot, -1);
        }

        assert_eq!(c.sections.len(), 1);
        let s = &c.sections[0];
        assert_eq!((s.k, s.d_mult, s.self_int), (6, -7, -6));

        // across each order-7 node the multiplicity climbs by 1 per curve
        assert_eq!(c.nodes.len(), 2);
        for n in &c.nodes {
            assert_eq!((n.order, n.step.abs()), (7, 1));
        }
    }

    #[test]
    fn canonical_solve_from_the_dual_graph_agrees() {
        let g = dual_from_splice(&running_example()).unwrap();
        let via_dual = canonical_multiplicities(&g, 60).unwrap();
        let via_report = canonical_from_report(&running_report()).unwrap();
        assert_eq!(via_dual, via_report);
        assert!(canonical_multiplicities(&g, 12).is_err());
    }

    #[test]
    fn relative_canonical_square_of_the_running_example() {
        let c = canonical_from_report(&running_report()).unwrap();
        assert_eq!(k_squared_relative(&c).unwrap(), rational_int(274));
    }

    #[test]
    fn invariants_of_the_running_example() {
        let r = running_report();
        let c = canonical_from_report(&r).unwrap();
        let inv = invariant_set(&r, &running_finite(), &c).unwrap();
        assert_eq!(inv.delta, rational(247, 30));
        assert_eq!(inv.kappa1, rational(137, 30));
        assert_eq!(inv.lambda1, rational(16, 15));
        assert_eq!(inv.psi, vec![rational(1, 10)]);
        assert_eq!(inv.sigma_over_d, rational(-119, 30));

        // λ₁ scaled by the cover degree is an integer
        assert!((inv.lambda1.clone() * rational_int(inv.cover_degree)).is_integer());

        let w = wolpert_positivity(&inv);
        assert_eq!(w.value, rational(14, 3));
        assert!(w.is_positive());
    }

    #[test]
    fn vanishing_cycle_count_balances() {
        let s = running_example();
        let g = dual_from_splice(&s).unwrap();
        let (genus, points) = genus_and_points_dual(&g).unwrap();
        let chi = 2 - 2 * genus - points;
        assert_eq!(chi, -7);
        let check = suzuki_relation(&running_finite(), chi);
        assert_eq!((check.vanishing_cycles, check.expected), (8, 8));
        assert!(check.passes());

        // a coordinate function has no exceptional fibres and χ = 1
        assert!(suzuki_relation(&FiniteFibreData::default(), 1).passes());
    }

    #[test]
    fn one_pair_family_closed_forms() {
        let params = FamilyParams::new(vec![(2, 3)]).unwrap();
        let s = family_splice(&params).unwrap();
        let r = stable_reduce(&s).unwrap();
        assert_eq!(r.cover_degree, 6);
        assert_eq!(r.stable_fibre.components.len(), 1);
        assert_eq!(r.stable_fibre.components[0].genus, 1);
        assert!(r.stable_fibre.nodes.is_empty());

        let bounds = family_bounds(&params).unwrap();
        assert_eq!(bounds.chi, -1);
        assert_eq!(bounds.psi1, rational(1, 6));
        assert_eq!(bounds.section_self_int, -1);
        assert_eq!(r.boundary_twists[0].twist, rational(1, 6));

        // δ at generic finite data attains the bound
        assert_eq!(delta(&r, &FiniteFibreData::generic(bounds.chi)), bounds.delta_bound);

        // κ₁ attains its bound too: (χ² − 1)/pq with χ = −1 gives 0
        let c = canonical_from_report(&r).unwrap();
        let kappa1 = k_squared_relative(&c).unwrap() / rational_int(r.cover_degree);
        assert_eq!(kappa1, bounds.kappa1_bound);
        assert_eq!(kappa1, rational_int(0));
    }

    #[test]
    fn two_pair_family_reproduces_the_running_example() {
        let params = FamilyParams::new(vec![(3, 2), (5, 2)]).unwrap();
        let s = family_splice(&params).unwrap();
        let r = stable_reduce(&s).unwrap();
        assert_eq!(r.cover_degree, 60);
        assert_eq!(r.stable_fibre.node_orders(), vec![7, 7]);
        let reference = running_report();
        assert!(crate::model::fibres_isomorphic(&r.stable_fibre, &reference.stable_fibre));

        let bounds = family_bounds(&params).unwrap();
        assert_eq!(bounds.chi, -7);
        assert_eq!(bounds.delta_bound, rational(247, 30));
        assert_eq!(bounds.kappa1_bound, rational(143, 30));
        assert_eq!(bounds.psi1, rational(1, 10));
        assert_eq!(bounds.section_self_int, -6);

        assert_eq!(delta(&r, &FiniteFibreData::generic(-7)), bounds.delta_bound);

        let c = canonical_from_report(&r).unwrap();
        let kappa1 = k_squared_relative(&c).unwrap() / rational_int(60);
        assert_eq!(kappa1, rational(137, 30));
        assert!(kappa1 <= bounds.kappa1_bound);
    }

    #[test]
    fn d_divisor_of_the_running_example() {
        let s = running_example();
        let d = d_divisor(&s).unwrap();
        assert_eq!(d["K"], 2); // the distinguished leaf
        assert_eq!(d["A"], 5);
        assert_eq!(d["B"], 3);
        assert_eq!(d["L4"], 6);
        assert_eq!(d["L5"], 0);
    }

    #[test]
    fn d_divisor_scales_by_the_local_cover_degree() {
        // Upstairs each component over a junction carries d/m(v) times the
        // downstairs D-multiplicity, the transverse degree of the cover there.
        let s = running_example();
        let downstairs = d_divisor(&s).unwrap();
        let r = running_report();
        let c = canonical_from_report(&r).unwrap();
        for piece in &r.pieces {
            let factor = r.cover_degree / piece.monodromy_order;
            let expected = factor * downstairs[&piece.anchor];
            for comp in &c.components {
                let over_this = comp.id == piece.anchor
                    || comp.id.starts_with(&format!("{}.", piece.anchor));
                if over_this {
                    assert_eq!(comp.d_mult, expected, "component {}", comp.id);
                }
            }
        }
    }

    #[test]
    fn rational_fibre_reference_constants() {
        for n in 3..=8 {
            let inv = rational_reference(n).unwrap();
            assert_eq!(&inv.kappa1 + &inv.delta, rational_int(0));
            assert_eq!(inv.lambda1, rational_int(0));
            let w = wolpert_positivity(&inv);
            assert_eq!(w.value, rational_int(n - 3));
            if n == 3 {
                assert!(w.is_trivial());
            } else {
                assert!(w.is_positive());
            }
        }
        let c_star = c_star_reference();
        assert_eq!(&c_star.kappa1 + &c_star.delta, rational_int(0));
        assert_eq!(c_star.lambda1, rational_int(0));
    }

    #[test]
    fn inadmissible_parameters_are_rejected() {
        assert!(FamilyParams::new(vec![]).is_err());
        assert!(FamilyParams::new(vec![(4, 2)]).is_err());
        assert!(FamilyParams::new(vec![(1, 5)]).is_err());
        let three = FamilyParams::new(vec![(2, 3), (3, 2), (2, 5)]).unwrap();
        assert!(family_bounds(&three).is_err());
        assert!(family_splice(&three).is_ok());
    }

    #[test]
    fn finite_fibre_data_is_validated() {
        assert!(FiniteFibreData::new(vec![("c1".into(), 0)]).is_err());
        assert_eq!(FiniteFibreData::generic(-7).total_nodes(), 8);
        assert_eq!(FiniteFibreData::generic(1).total_nodes(), 0);
    }
}
