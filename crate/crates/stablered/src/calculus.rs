//! The graph calculus: multiplicities from weights, Euler characteristics,
//! edge determinants, conversions between the two diagram pictures,
//! blow-downs, and local resolution chains for cyclic quotient points.
//!
//! Conventions used throughout:
//!
//! * The *path rule*: the multiplicity of a node `v` is the sum, over all
//!   arrows, of the arrow multiplicity times the product of every half-edge
//!   weight that is attached at a node of the `v -> arrow` path but does not
//!   lie on the path itself (the arrow's own half edge counts as on-path at
//!   its node).  The same rule started from an edge gives the multilink
//!   multiplicity of that edge.
//! * Edge determinants: the splice form is `w_a*w_b − (product of all other
//!   half-edge weights at both endpoints)`, a signed integer.  The dual form
//!   is the determinant of the tridiagonal intersection matrix of the hidden
//!   chain along the edge.  The two agree up to sign; consumers use the
//!   magnitude, with orientation fixed so twists come out positive.
//! * Hidden nodes are genus-0, unmarked nodes of valency exactly two
//!   (counting arrows of multiplicity at least 1); everything else is
//!   retained when passing to the efficient picture.

use std::collections::BTreeMap;

use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::model::{
    Arrow, DualGraph, DualNode, Error, Mark, NodeId, Rational, Result, SpliceArrow, SpliceDiagram,
    SpliceEdge, SpliceNode,
};

// ---------------------------------------------------------------------------
// small integer helpers

fn checked_mul(a: i64, b: i64) -> Result<i64> {
    a.checked_mul(b)
        .ok_or_else(|| Error::domain("integer overflow in a weight product"))
}

/// Inverse of `a` modulo `m` (m >= 2), when it exists.
fn mod_inverse(a: i64, m: i64) -> Option<i64> {
    let (mut old_r, mut r) = (a.rem_euclid(m), m);
    let (mut old_s, mut s) = (1i64, 0i64);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m))
}

// ---------------------------------------------------------------------------
// continuants and negative continued fractions

/// Continuant of a sequence: `D() = 1`, `D(b1) = b1`,
/// `D(b1..bk) = bk*D(b1..b(k-1)) − D(b1..b(k-2))`.
///
/// For entries `bi >= 2` this is the magnitude of the determinant of the
/// tridiagonal intersection matrix of a chain of curves with
/// self-intersections `−b1..−bk`.
pub fn continuant(bs: &[i64]) -> Result<i64> {
    let (mut prev, mut cur) = (0i128, 1i128);
    for &b in bs {
        let next = (b as i128)
            .checked_mul(cur)
            .and_then(|x| x.checked_sub(prev))
            .ok_or_else(|| Error::domain("continuant overflow"))?;
        prev = cur;
        cur = next;
    }
    cur.to_i64()
        .ok_or_else(|| Error::domain("continuant exceeds 64 bits"))
}

/// Signed determinant of the tridiagonal intersection matrix of a chain of
/// curves with the given self-intersections (off-diagonal entries 1).
/// The empty chain has determinant 1 by convention.
pub fn chain_determinant(self_ints: &[i64]) -> Result<i64> {
    let (mut prev, mut cur) = (0i128, 1i128);
    for &e in self_ints {
        let next = (e as i128)
            .checked_mul(cur)
            .and_then(|x| x.checked_sub(prev))
            .ok_or_else(|| Error::domain("chain determinant overflow"))?;
        prev = cur;
        cur = next;
    }
    cur.to_i64()
        .ok_or_else(|| Error::domain("chain determinant exceeds 64 bits"))
}

/// Negative continued fraction expansion `p/q = b1 − 1/(b2 − 1/(...))` with
/// all `bi >= 2`, for `p >= 2` and `1 <= q < p` coprime.
pub fn negative_continued_fraction(p: i64, q: i64) -> Result<Vec<i64>> {
    if p < 2 || q < 1 || q >= p {
        return Err(Error::domain(format!(
            "negative continued fraction needs 1 <= q < p with p >= 2, got {p}/{q}"
        )));
    }
    if p.gcd(&q) != 1 {
        return Err(Error::domain(format!("{p}/{q} is not in lowest terms")));
    }
    let (mut p, mut q) = (p, q);
    let mut out = Vec::new();
    while q > 0 {
        let b = (p + q - 1) / q; // ceil(p/q)
        out.push(b);
        (p, q) = (q, b * q - p);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// the path rule

fn splice_is_tree(s: &SpliceDiagram) -> bool {
    if s.edges.len() + 1 != s.nodes.len() {
        return false;
    }
    // connectivity is part of validate_splice; re-check cheaply here
    crate::model::validate_splice(s)
        .map(|v| v.iter().all(|x| x.message != "not connected"))
        .unwrap_or(false)
}

fn require_tree(s: &SpliceDiagram) -> Result<()> {
    if splice_is_tree(s) {
        Ok(())
    } else {
        Err(Error::domain("the diagram is not a tree"))
    }
}

/// Unique path of node ids from `from` to `to` in a tree.
fn tree_path(s: &SpliceDiagram, from: &str, to: &str) -> Result<Vec<NodeId>> {
    let mut parent: BTreeMap<&str, &str> = BTreeMap::new();
    let mut stack = vec![from];
    parent.insert(from, from);
    while let Some(v) = stack.pop() {
        if v == to {
            break;
        }
        for e in s.edges_at(v) {
            let u = e.other(v);
            if !parent.contains_key(u) {
                parent.insert(u, v);
                stack.push(u);
            }
        }
    }
    if !parent.contains_key(to) {
        return Err(Error::internal(format!("no path from {from} to {to}")));
    }
    let mut path = vec![to.to_string()];
    let mut cur = to;
    while cur != from {
        cur = parent[cur];
        path.push(cur.to_string());
    }
    path.reverse();
    Ok(path)
}

fn edge_index_between(s: &SpliceDiagram, a: &str, b: &str) -> Result<usize> {
    s.edges
        .iter()
        .position(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
        .ok_or_else(|| Error::internal(format!("no edge between {a} and {b}")))
}

/// Product of the weights of all half edges hanging off the path but not on
/// it.  `entry_edge` is treated as on-path at `path[0]`; the half edge of
/// `arrows[arrow_idx]` is on-path at the terminal node.
fn off_path_product(
    s: &SpliceDiagram,
    path: &[NodeId],
    entry_edge: Option<usize>,
    arrow_idx: usize,
) -> Result<i64> {
    let mut on_path_edges: Vec<usize> = Vec::new();
    for w in path.windows(2) {
        on_path_edges.push(edge_index_between(s, &w[0], &w[1])?);
    }
    if let Some(e) = entry_edge {
        on_path_edges.push(e);
    }
    let terminal = path.last().expect("path is never empty");

    let mut product = 1i64;
    for node in path {
        for (idx, e) in s.edges.iter().enumerate() {
            if e.a != *node && e.b != *node {
                continue;
            }
            if on_path_edges.contains(&idx) {
                continue;
            }
            product = checked_mul(product, e.weight_at(node)?)?;
        }
        for (idx, a) in s.arrows.iter().enumerate() {
            if a.node != *node {
                continue;
            }
            if idx == arrow_idx && node == terminal {
                continue; // the target arrow's own half edge
            }
            product = checked_mul(product, a.weight)?;
        }
    }
    Ok(product)
}

/// Multiplicity of a node by the path rule.  Errors when the diagram has no
/// arrows (no multilink structure to evaluate).
pub fn node_multiplicity(s: &SpliceDiagram, v: &str) -> Result<i64> {
    require_tree(s)?;
    if !s.nodes.contains_key(v) {
        return Err(Error::domain(format!("unknown node id {v}")));
    }
    if s.arrows.is_empty() {
        return Err(Error::domain("no multilink structure: the diagram has no arrows"));
    }
    let mut total = 0i64;
    for (idx, arrow) in s.arrows.iter().enumerate() {
        if arrow.multiplicity == 0 {
            continue;
        }
        let path = tree_path(s, v, &arrow.node)?;
        let product = off_path_product(s, &path, None, idx)?;
        total = total
            .checked_add(checked_mul(product, arrow.multiplicity)?)
            .ok_or_else(|| Error::domain("multiplicity overflow"))?;
    }
    Ok(total)
}

/// Contribution to the multilink multiplicity of edge `edge_idx` from the
/// arrows on the `toward` side of the edge (the path starts at the edge and
/// runs through `toward`).
pub fn multilink_toward(s: &SpliceDiagram, edge_idx: usize, toward: &str) -> Result<i64> {
    require_tree(s)?;
    let edge = s
        .edges
        .get(edge_idx)
        .ok_or_else(|| Error::domain(format!("no edge with index {edge_idx}")))?;
    if edge.a != toward && edge.b != toward {
        return Err(Error::domain(format!("{toward} is not an endpoint of the edge")));
    }
    let far = edge.other(toward).to_string();
    let mut total = 0i64;
    for (idx, arrow) in s.arrows.iter().enumerate() {
        if arrow.multiplicity == 0 {
            continue;
        }
        let path = tree_path(s, toward, &arrow.node)?;
        if path.len() >= 2 && path[1] == far {
            continue; // the arrow sits on the other side of the cut
        }
        let product = off_path_product(s, &path, Some(edge_idx), idx)?;
        total = total
            .checked_add(checked_mul(product, arrow.multiplicity)?)
            .ok_or_else(|| Error::domain("multiplicity overflow"))?;
    }
    Ok(total)
}

/// Multilink multiplicity of an edge: the path rule started from the edge,
/// summed over the arrows on both sides.  For a decomposition cut this is the
/// number of annuli over the edge.
pub fn multilink_multiplicity(s: &SpliceDiagram, edge_idx: usize) -> Result<i64> {
    let edge = s
        .edges
        .get(edge_idx)
        .ok_or_else(|| Error::domain(format!("no edge with index {edge_idx}")))?;
    let (a, b) = (edge.a.clone(), edge.b.clone());
    Ok(multilink_toward(s, edge_idx, &a)? + multilink_toward(s, edge_idx, &b)?)
}

// ---------------------------------------------------------------------------
// Euler characteristic, genus and points at infinity

/// Euler characteristic of the generic fibre from a splice diagram:
/// sum over nodes of `m * (2 − 2g − valency)`, valency counting incident
/// edges and arrows of multiplicity at least 1.
pub fn euler_characteristic_splice(s: &SpliceDiagram) -> Result<i64> {
    let mut chi = 0i64;
    for (id, node) in &s.nodes {
        let m = node_multiplicity(s, id)?;
        chi += m * (2 - 2 * node.genus - s.valency(id));
    }
    Ok(chi)
}

/// Euler characteristic of the generic fibre from a dual graph (solving
/// multiplicities first when some are missing).
pub fn euler_characteristic_dual(g: &DualGraph) -> Result<i64> {
    let g = if g.fully_weighted() {
        g.clone()
    } else {
        solve_multiplicities(g)?
    };
    let mut chi = 0i64;
    for (id, node) in &g.nodes {
        let m = node
            .multiplicity
            .expect("all multiplicities are set after solving");
        chi += m * (2 - 2 * node.genus - g.valency(id));
    }
    Ok(chi)
}

/// Number of points at infinity: arrow multiplicities (at least 1) summed.
pub fn points_at_infinity_splice(s: &SpliceDiagram) -> i64 {
    s.arrows.iter().filter(|a| a.multiplicity >= 1).map(|a| a.multiplicity).sum()
}

/// Number of points at infinity of a dual graph.
pub fn points_at_infinity_dual(g: &DualGraph) -> i64 {
    g.arrows.iter().filter(|a| a.multiplicity >= 1).map(|a| a.multiplicity).sum()
}

/// Genus of the generic fibre from its open Euler characteristic and its
/// number of points at infinity: `chi = 2 − 2*genus − n`.
pub fn genus_and_points(chi: i64, n: i64) -> Result<(i64, i64)> {
    if n < 1 {
        return Err(Error::domain(
            "a fibration of an affine plane curve has at least one point at infinity",
        ));
    }
    let doubled = 2 - n - chi;
    if doubled < 0 || doubled % 2 != 0 {
        return Err(Error::domain(format!(
            "no genus-g curve with chi = {chi} and {n} punctures (2 - n - chi = {doubled})"
        )));
    }
    Ok((doubled / 2, n))
}

/// Genus and point count straight from a splice diagram.
pub fn genus_and_points_splice(s: &SpliceDiagram) -> Result<(i64, i64)> {
    genus_and_points(euler_characteristic_splice(s)?, points_at_infinity_splice(s))
}

/// Genus and point count straight from a dual graph.
pub fn genus_and_points_dual(g: &DualGraph) -> Result<(i64, i64)> {
    genus_and_points(euler_characteristic_dual(g)?, points_at_infinity_dual(g))
}

// ---------------------------------------------------------------------------
// edge determinants and edge analysis

/// Signed edge determinant of a splice edge: product of the two on-edge
/// weights minus the product of all other half-edge weights at the two
/// endpoints (arrow half edges included).
pub fn edge_determinant(s: &SpliceDiagram, edge_idx: usize) -> Result<i64> {
    let edge = s
        .edges
        .get(edge_idx)
        .ok_or_else(|| Error::domain(format!("no edge with index {edge_idx}")))?;
    let mut on = checked_mul(edge.weight_a, edge.weight_b)?;
    let mut off = 1i64;
    for node in [&edge.a, &edge.b] {
        for (idx, e) in s.edges.iter().enumerate() {
            if idx == edge_idx || (e.a != *node && e.b != *node) {
                continue;
            }
            off = checked_mul(off, e.weight_at(node)?)?;
        }
        for a in s.arrows_at(node) {
            off = checked_mul(off, a.weight)?;
        }
    }
    on = on
        .checked_sub(off)
        .ok_or_else(|| Error::domain("edge determinant overflow"))?;
    Ok(on)
}

/// Everything the decomposition needs to know about one edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeAnalysis {
    pub a: NodeId,
    pub b: NodeId,
    /// Multilink multiplicity of the edge — the number of annuli over it.
    pub d_e: i64,
    /// Multiplicity of endpoint `a`.
    pub l_a: i64,
    /// Multiplicity of endpoint `b`.
    pub l_b: i64,
    /// Signed edge determinant.
    pub delta: i64,
}

/// Analyze one edge of a splice diagram.  Checks the divisibility constraint
/// `d_E | gcd(l, l')`, which holds for every diagram describing an actual
/// fibre.
pub fn analyze_edge(s: &SpliceDiagram, edge_idx: usize) -> Result<EdgeAnalysis> {
    let edge = s
        .edges
        .get(edge_idx)
        .ok_or_else(|| Error::domain(format!("no edge with index {edge_idx}")))?;
    let l_a = node_multiplicity(s, &edge.a)?;
    let l_b = node_multiplicity(s, &edge.b)?;
    let d_e = multilink_multiplicity(s, edge_idx)?;
    let delta = edge_determinant(s, edge_idx)?;
    if l_a < 1 || l_b < 1 {
        return Err(Error::domain(format!(
            "edge {}-{} has an endpoint of multiplicity 0",
            edge.a, edge.b
        )));
    }
    if d_e < 1 {
        return Err(Error::domain(format!(
            "edge {}-{} carries no multilink multiplicity",
            edge.a, edge.b
        )));
    }
    if l_a.gcd(&l_b) % d_e != 0 {
        return Err(Error::domain(format!(
            "edge {}-{}: multilink multiplicity {d_e} does not divide gcd({l_a}, {l_b})",
            edge.a, edge.b
        )));
    }
    Ok(EdgeAnalysis { a: edge.a.clone(), b: edge.b.clone(), d_e, l_a, l_b, delta })
}

// ---------------------------------------------------------------------------
// exact linear algebra (shared with the invariant computations)

pub(crate) mod linalg {
    use crate::model::Rational;
    use num_traits::Zero;

    pub enum Outcome {
        Unique(Vec<Rational>),
        /// One solution plus a basis of the homogeneous solutions.
        Underdetermined { particular: Vec<Rational>, kernel: Vec<Vec<Rational>> },
        Inconsistent,
    }

    /// Gauss–Jordan elimination over exact rationals for `a x = b`.
    pub fn solve(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Outcome {
        let rows = a.len();
        let cols = if rows == 0 { 0 } else { a[0].len() };
        let mut pivot_of_col: Vec<Option<usize>> = vec![None; cols];
        let mut rank = 0usize;
        for col in 0..cols {
            let Some(pivot_row) = (rank..rows).find(|&r| !a[r][col].is_zero()) else {
                continue;
            };
            a.swap(rank, pivot_row);
            b.swap(rank, pivot_row);
            let inv = a[rank][col].clone();
            for c in col..cols {
                a[rank][c] = &a[rank][c] / &inv;
            }
            b[rank] = &b[rank] / &inv;
            for r in 0..rows {
                if r != rank && !a[r][col].is_zero() {
                    let f = a[r][col].clone();
                    for c in col..cols {
                        let delta = &f * &a[rank][c];
                        a[r][c] = &a[r][c] - &delta;
                    }
                    let delta = &f * &b[rank];
                    b[r] = &b[r] - &delta;
                }
            }
            pivot_of_col[col] = Some(rank);
            rank += 1;
            if rank == rows {
                break;
            }
        }
        if b[rank..rows].iter().any(|x| !x.is_zero()) {
            return Outcome::Inconsistent;
        }
        let zero = Rational::zero();
        let mut particular = vec![zero.clone(); cols];
        for (col, &pivot) in pivot_of_col.iter().enumerate() {
            if let Some(r) = pivot {
                particular[col] = b[r].clone();
            }
        }
        if rank == cols {
            return Outcome::Unique(particular);
        }
        let mut kernel = Vec::new();
        for free in 0..cols {
            if pivot_of_col[free].is_some() {
                continue;
            }
            let mut v = vec![zero.clone(); cols];
            v[free] = Rational::from_integer(1.into());
            for (col, &pivot) in pivot_of_col.iter().enumerate() {
                if let Some(r) = pivot {
                    v[col] = -a[r][free].clone();
                }
            }
            kernel.push(v);
        }
        Outcome::Underdetermined { particular, kernel }
    }
}

// ---------------------------------------------------------------------------
// solving multiplicities and self-intersections

/// Fill in missing multiplicities from the zero-intersection relations.
///
/// With arrows present the relations determine the multiplicities uniquely
/// (the intersection form on the exceptional curves is definite); without
/// arrows the system is homogeneous and the primitive positive solution is
/// taken, when the kernel is one-dimensional.
pub fn solve_multiplicities(g: &DualGraph) -> Result<DualGraph> {
    if g.fully_weighted() {
        return Ok(g.clone());
    }
    let ids: Vec<&NodeId> = g.nodes.keys().collect();
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let unknowns: Vec<usize> = ids
        .iter()
        .enumerate()
        .filter(|(_, id)| g.nodes[**id].multiplicity.is_none())
        .map(|(i, _)| i)
        .collect();
    let col_of: BTreeMap<usize, usize> = unknowns.iter().enumerate().map(|(c, &i)| (i, c)).collect();

    let n = ids.len();
    let mut coeff = vec![vec![0i64; n]; n];
    let mut constant = vec![0i64; n];
    for (row, id) in ids.iter().enumerate() {
        coeff[row][row] += g.nodes[*id].self_int;
        for (a, b) in &g.edges {
            if a == *id && b == *id {
                coeff[row][row] += 2;
            } else if a == *id {
                coeff[row][index[b.as_str()]] += 1;
            } else if b == *id {
                coeff[row][index[a.as_str()]] += 1;
            }
        }
        for arrow in &g.arrows {
            if &arrow.node == *id {
                constant[row] += arrow.multiplicity;
            }
        }
    }

    let mut a = vec![vec![Rational::zero(); unknowns.len()]; n];
    let mut b = vec![Rational::zero(); n];
    for row in 0..n {
        let mut rhs = -constant[row];
        for col in 0..n {
            if coeff[row][col] == 0 {
                continue;
            }
            match col_of.get(&col) {
                Some(&c) => a[row][c] = Rational::from_integer(coeff[row][col].into()),
                None => {
                    let known = g.nodes[ids[col]].multiplicity.unwrap();
                    rhs -= coeff[row][col] * known;
                }
            }
        }
        b[row] = Rational::from_integer(rhs.into());
    }

    let to_int = |x: &Rational| -> Result<i64> {
        if !x.is_integer() {
            return Err(Error::domain(format!("non-integral multiplicity {x}")));
        }
        x.numer()
            .to_i64()
            .ok_or_else(|| Error::domain("multiplicity exceeds 64 bits"))
    };

    let values: Vec<i64> = match linalg::solve(a, b) {
        linalg::Outcome::Unique(x) => x.iter().map(to_int).collect::<Result<_>>()?,
        linalg::Outcome::Inconsistent => {
            return Err(Error::domain("no multiplicity assignment satisfies the relations"))
        }
        linalg::Outcome::Underdetermined { particular, kernel } => {
            let homogeneous = particular.iter().all(|x| x.is_zero())
                && g.arrows.iter().all(|a| a.multiplicity == 0);
            if !(homogeneous && kernel.len() == 1 && unknowns.len() == n) {
                return Err(Error::domain(
                    "the relations do not determine the multiplicities uniquely",
                ));
            }
            // primitive integer vector from the kernel generator
            let gen = &kernel[0];
            let mut lcm = num_bigint::BigInt::from(1);
            for x in gen {
                lcm = lcm.lcm(x.denom());
            }
            let mut ints: Vec<num_bigint::BigInt> =
                gen.iter().map(|x| x.numer() * (&lcm / x.denom())).collect();
            let mut gcd = num_bigint::BigInt::from(0);
            for x in &ints {
                gcd = gcd.gcd(x);
            }
            if gcd.is_zero() {
                return Err(Error::domain("degenerate multiplicity kernel"));
            }
            for x in &mut ints {
                *x = &*x / &gcd;
            }
            if ints.iter().any(|x| x.is_negative()) {
                if ints.iter().any(|x| x.is_positive()) {
                    return Err(Error::domain("no positive multiplicity assignment exists"));
                }
                for x in &mut ints {
                    *x = -&*x;
                }
            }
            ints.iter()
                .map(|x| x.to_i64().ok_or_else(|| Error::domain("multiplicity exceeds 64 bits")))
                .collect::<Result<_>>()?
        }
    };

    let mut out = g.clone();
    for (&i, &c) in &col_of {
        let v = values[c];
        if v < 0 {
            return Err(Error::domain(format!("solved multiplicity of {} is negative", ids[i])));
        }
        out.nodes.get_mut(ids[i]).unwrap().multiplicity = Some(v);
    }
    Ok(out)
}

/// Solve every self-intersection from known multiplicities:
/// `e = −(sum of adjacent multiplicities + arrow multiplicities) / m`.
pub fn solve_self_intersections(g: &DualGraph) -> Result<DualGraph> {
    let mut out = g.clone();
    for id in g.nodes.keys() {
        let m = g.multiplicity(id)?;
        if m == 0 {
            return Err(Error::domain(format!(
                "cannot solve the self-intersection of {id}: multiplicity 0"
            )));
        }
        let mut sum = 0i64;
        for (a, b) in &g.edges {
            if a == id && b == id {
                sum += 2 * m;
            } else if a == id {
                sum += g.multiplicity(b)?;
            } else if b == id {
                sum += g.multiplicity(a)?;
            }
        }
        for arrow in &g.arrows {
            if &arrow.node == id {
                sum += arrow.multiplicity;
            }
        }
        if sum % m != 0 {
            return Err(Error::domain(format!(
                "no integral self-intersection at {id}: neighbour sum {sum} not divisible by {m}"
            )));
        }
        out.nodes.get_mut(id).unwrap().self_int = -sum / m;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// dual graph -> splice diagram

fn dual_is_tree(g: &DualGraph) -> bool {
    g.edges.len() + 1 == g.nodes.len()
        && g.edges.iter().all(|(a, b)| a != b)
        && crate::model::validate_dual_graph(g)
            .map(|v| v.iter().all(|x| x.message != "not connected"))
            .unwrap_or(false)
}

/// Count of incident half edges at a node: edges (self-edges twice) plus
/// arrows of multiplicity at least 1.
fn dual_valency(g: &DualGraph, id: &str) -> i64 {
    g.valency(id)
}

fn is_hidden(g: &DualGraph, id: &str) -> bool {
    let node = &g.nodes[id];
    node.genus == 0 && node.mark == Mark::Interior && dual_valency(g, id) == 2 && {
        // a pair of arrows with no edge cannot be contracted into anything
        g.edges.iter().any(|(a, b)| a == id || b == id)
    }
}

/// Signed determinant of the subtree hanging at `root` away from `parent`,
/// together with the determinant of the same subtree with `root` removed.
fn subtree_determinant(g: &DualGraph, root: &str, parent: Option<&str>) -> Result<(i128, i128)> {
    let mut children: Vec<(i128, i128)> = Vec::new();
    for u in g.neighbours(root) {
        if Some(u) != parent {
            children.push(subtree_determinant(g, u, Some(root))?);
        }
    }
    let overflow = || Error::domain("branch determinant overflow");
    let mut prod = 1i128;
    for (d, _) in &children {
        prod = prod.checked_mul(*d).ok_or_else(overflow)?;
    }
    let mut det = (g.nodes[root].self_int as i128).checked_mul(prod).ok_or_else(overflow)?;
    for i in 0..children.len() {
        let mut others = children[i].1;
        for (j, (d, _)) in children.iter().enumerate() {
            if j != i {
                others = others.checked_mul(*d).ok_or_else(overflow)?;
            }
        }
        det = det.checked_sub(others).ok_or_else(overflow)?;
    }
    Ok((det, prod))
}

/// One maximal hidden chain leaving a retained node.
struct ChainWalk {
    from: NodeId,
    to: ChainEnd,
    /// hidden nodes between, in walk order
    interior: Vec<NodeId>,
}

enum ChainEnd {
    Node(NodeId),
    /// index into `g.arrows`: the chain dead-ends in an arrow tail
    ArrowTail(usize),
}

/// Pass to the efficient picture: hide genus-0 valency-2 interior nodes and
/// migrate arrows from hidden chain tails to their nearest retained node.
///
/// Weights: a half edge pointing into an arrow-free branch carries the
/// magnitude of that branch's intersection determinant; half edges at leaves
/// and arrow half edges carry 1; the remaining weights (pointing towards the
/// arrows) are pinned by the requirement that the splice edge determinant
/// reproduce the hidden chain determinant and the path rule reproduce the
/// multiplicities.
pub fn splice_from_dual(g: &DualGraph) -> Result<SpliceDiagram> {
    let g = solve_multiplicities(g)?;
    if !dual_is_tree(&g) {
        return Err(Error::domain("only tree dual graphs have a splice form"));
    }

    let retained: Vec<&NodeId> = g.nodes.keys().filter(|id| !is_hidden(&g, id)).collect();
    if retained.is_empty() {
        return Err(Error::domain("no retained nodes (degenerate chain)"));
    }

    // every arrow must migrate to a single retained node for the weight
    // extraction below to be well posed
    let mut anchors: std::collections::BTreeSet<NodeId> = std::collections::BTreeSet::new();
    for arrow in &g.arrows {
        let mut cur = arrow.node.clone();
        let mut prev: Option<NodeId> = None;
        while is_hidden(&g, &cur) {
            let next = g
                .neighbours(&cur)
                .into_iter()
                .find(|u| Some(*u) != prev.as_deref())
                .ok_or_else(|| Error::internal(format!("arrow tail breaks at {cur}")))?
                .to_string();
            prev = Some(std::mem::replace(&mut cur, next));
        }
        anchors.insert(cur);
    }
    if anchors.len() > 1 {
        return Err(Error::domain(
            "weight extraction needs all arrows anchored around a single node",
        ));
    }
    let anchor_node: Option<NodeId> = anchors.into_iter().next();

    // structured chain walk
    let mut walks: Vec<ChainWalk> = Vec::new();
    let mut done_edges: Vec<bool> = vec![false; g.edges.len()];
    for start in &retained {
        loop {
            let Some(first) = g
                .edges
                .iter()
                .enumerate()
                .find(|(i, (a, b))| !done_edges[*i] && (a == *start || b == *start))
                .map(|(i, _)| i)
            else {
                break;
            };
            done_edges[first] = true;
            let (ea, eb) = &g.edges[first];
            let mut interior: Vec<NodeId> = Vec::new();
            let mut cur: &str = if ea == *start { eb } else { ea };
            let end = loop {
                if !is_hidden(&g, cur) {
                    break ChainEnd::Node(cur.to_string());
                }
                if let Some(idx) = g.arrows.iter().position(|a| a.node == *cur) {
                    interior.push(cur.to_string());
                    break ChainEnd::ArrowTail(idx);
                }
                interior.push(cur.to_string());
                let next_edge = g
                    .edges
                    .iter()
                    .enumerate()
                    .position(|(i, (x, y))| !done_edges[i] && (x == cur || y == cur))
                    .ok_or_else(|| Error::internal(format!("chain breaks at {cur}")))?;
                done_edges[next_edge] = true;
                let (x, y) = &g.edges[next_edge];
                cur = if x == cur { y } else { x };
            };
            walks.push(ChainWalk { from: (*start).to_string(), to: end, interior });
        }
    }

    let mut s = SpliceDiagram::default();
    for id in &retained {
        s.nodes.insert((*id).clone(), SpliceNode { genus: g.nodes[*id].genus });
        if g.nodes[*id].mark == Mark::LineAtInfinity {
            s.distinguished_leaf = Some((*id).clone());
        }
    }
    for arrow in &g.arrows {
        if !is_hidden(&g, &arrow.node) {
            s.arrows.push(SpliceArrow {
                node: arrow.node.clone(),
                weight: 1,
                multiplicity: arrow.multiplicity,
                label: arrow.label.clone(),
            });
        }
    }
    for walk in &walks {
        if let ChainEnd::ArrowTail(idx) = walk.to {
            let arrow = &g.arrows[idx];
            s.arrows.push(SpliceArrow {
                node: walk.from.clone(),
                weight: 1,
                multiplicity: arrow.multiplicity,
                label: arrow.label.clone(),
            });
        }
    }

    // does the branch beyond `node` through `towards` contain an arrow?
    fn branch_has_arrow(g: &DualGraph, node: &str, towards: &str) -> bool {
        let mut stack = vec![towards.to_string()];
        let mut seen: std::collections::BTreeSet<String> =
            [node.to_string(), towards.to_string()].into();
        while let Some(v) = stack.pop() {
            if g.arrows.iter().any(|a| a.node == v) {
                return true;
            }
            for u in g.neighbours(&v) {
                if seen.insert(u.to_string()) {
                    stack.push(u.to_string());
                }
            }
        }
        false
    }

    let branch_det = |node: &str, towards: &str| -> Result<i64> {
        let (det, _) = subtree_determinant(&g, towards, Some(node))?;
        let w = det
            .abs()
            .to_i64()
            .ok_or_else(|| Error::domain("branch determinant exceeds 64 bits"))?;
        if w == 0 {
            return Err(Error::domain(format!(
                "vanishing branch determinant at {node}; the diagram is degenerate"
            )));
        }
        Ok(w)
    };
    let is_splice_leaf =
        |id: &str| g.nodes[id].genus == 0 && dual_valency(&g, id) <= 1;

    // splice edges; weights towards the arrows deferred (0 placeholder)
    for walk in &walks {
        let ChainEnd::Node(to) = &walk.to else { continue };
        let first_beyond_from =
            walk.interior.first().map(|s| s.as_str()).unwrap_or(to.as_str());
        let first_beyond_to =
            walk.interior.last().map(|s| s.as_str()).unwrap_or(walk.from.as_str());
        let weight_at = |node: &str, beyond: &str| -> Result<i64> {
            if is_splice_leaf(node) {
                Ok(1)
            } else if branch_has_arrow(&g, node, beyond) {
                Ok(0) // resolved below
            } else {
                branch_det(node, beyond)
            }
        };
        s.edges.push(SpliceEdge {
            a: walk.from.clone(),
            weight_a: weight_at(&walk.from, first_beyond_from)?,
            b: to.clone(),
            weight_b: weight_at(to, first_beyond_to)?,
        });
    }

    // resolve deferred weights in ascending distance from the arrow anchor:
    // the splice edge determinant must match the hidden chain determinant in
    // magnitude, and the path rule must reproduce the multiplicities
    let mut deferred: Vec<(usize, bool)> = Vec::new(); // (edge index, a side?)
    for (i, e) in s.edges.iter().enumerate() {
        if e.weight_a == 0 {
            deferred.push((i, true));
        }
        if e.weight_b == 0 {
            deferred.push((i, false));
        }
    }
    if !deferred.is_empty() {
        let anchor = anchor_node
            .clone()
            .ok_or_else(|| Error::internal("deferred weights without an arrow"))?;
        // distances in the retained tree
        let mut dist: BTreeMap<NodeId, i64> = BTreeMap::new();
        dist.insert(anchor.clone(), 0);
        let mut frontier = vec![anchor.clone()];
        while let Some(v) = frontier.pop() {
            for e in s.edges.iter() {
                if e.a != v && e.b != v {
                    continue;
                }
                let u = e.other(&v).to_string();
                if !dist.contains_key(&u) {
                    dist.insert(u.clone(), dist[&v] + 1);
                    frontier.push(u);
                }
            }
        }
        deferred.sort_by_key(|(i, a_side)| {
            let e = &s.edges[*i];
            dist[if *a_side { &e.a } else { &e.b }]
        });
        for (i, a_side) in deferred {
            let e = s.edges[i].clone();
            let (v, w_other) = if a_side { (&e.a, e.weight_b) } else { (&e.b, e.weight_a) };
            let u = e.other(v);
            if w_other == 0 {
                return Err(Error::domain(
                    "weight extraction needs all arrows anchored around a single node",
                ));
            }
            // hidden chain determinant magnitude
            let chain = chain_between(&g, &e.a, &e.b)?;
            let q = chain_determinant(&chain)?.abs();
            let other_half_edges = |x: &str| -> Result<i64> {
                let mut p = 1i64;
                for (j, f) in s.edges.iter().enumerate() {
                    if j == i || (f.a != x && f.b != x) {
                        continue;
                    }
                    p = checked_mul(p, f.weight_at(x)?)?;
                }
                for arrow in s.arrows_at(x) {
                    p = checked_mul(p, arrow.weight)?;
                }
                Ok(p)
            };
            let p_v = other_half_edges(v)?;
            let p_u = other_half_edges(u)?;
            if p_v == 0 || p_u == 0 {
                return Err(Error::domain(
                    "weight extraction needs all arrows anchored around a single node",
                ));
            }
            let base = checked_mul(p_v, p_u)?;
            let mut candidates: Vec<i64> = Vec::new();
            for delta in [-q, q] {
                let numerator = base + delta;
                if numerator >= w_other && numerator % w_other == 0 {
                    let w = numerator / w_other;
                    if w >= 1 && !candidates.contains(&w) {
                        candidates.push(w);
                    }
                }
            }
            // keep the candidates that let the path rule reproduce the
            // multiplicities of the retained nodes on v's side
            let v_owned = v.clone();
            let mut witnesses: Vec<NodeId> = vec![v_owned.clone()];
            let mut stack = vec![v_owned.clone()];
            let mut seen: std::collections::BTreeSet<NodeId> = [u.to_string(), v_owned.clone()].into();
            while let Some(x) = stack.pop() {
                for f in s.edges.iter() {
                    if f.a != x && f.b != x {
                        continue;
                    }
                    let y = f.other(&x).to_string();
                    if seen.insert(y.clone()) {
                        witnesses.push(y.clone());
                        stack.push(y);
                    }
                }
            }
            candidates.sort();
            let mut accepted = None;
            'cands: for w in &candidates {
                let mut trial = s.clone();
                let f = &mut trial.edges[i];
                if a_side {
                    f.weight_a = *w;
                } else {
                    f.weight_b = *w;
                }
                // unresolved placeholders elsewhere never lie on these paths,
                // but give them a harmless value for the evaluation
                for f in &mut trial.edges {
                    if f.weight_a == 0 {
                        f.weight_a = 1;
                    }
                    if f.weight_b == 0 {
                        f.weight_b = 1;
                    }
                }
                for x in &witnesses {
                    if node_multiplicity(&trial, x)? != g.multiplicity(x)? {
                        continue 'cands;
                    }
                }
                accepted = Some(*w);
                break;
            }
            let Some(w) = accepted else {
                return Err(Error::domain(format!(
                    "no splice weight at {v} towards {u} matches the chain determinant {q}"
                )));
            };
            let f = &mut s.edges[i];
            if a_side {
                f.weight_a = w;
            } else {
                f.weight_b = w;
            }
        }
    }

    // consistency: the path rule on the output must reproduce the input
    if !s.arrows.is_empty() {
        for id in &retained {
            let recovered = node_multiplicity(&s, id)?;
            let given = g.multiplicity(id)?;
            if recovered != given {
                return Err(Error::internal(format!(
                    "weight extraction lost a multiplicity at {id}: path rule gives {recovered}, dual graph has {given}"
                )));
            }
        }
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// splice diagram -> dual graph

/// Interior chain realizing an edge with determinant magnitude `q` between
/// multiplicities `l_a` and `l_b`: self-intersection entries (negated) and
/// node multiplicities, read from the `a` side.
fn internal_chain(l_a: i64, l_b: i64, q: i64) -> Result<(Vec<i64>, Vec<i64>)> {
    if q == 1 {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut best: Option<(Vec<i64>, Vec<i64>)> = None;
    for r in 1..q {
        if r.gcd(&q) != 1 {
            continue;
        }
        if (l_a as i128 * r as i128 + l_b as i128).rem_euclid(q as i128) != 0 {
            continue;
        }
        let bs = negative_continued_fraction(q, r)?;
        let mu1 = (l_b as i128 + l_a as i128 * r as i128) / q as i128;
        let mut mults = vec![mu1];
        let mut prev = l_a as i128;
        for i in 0..bs.len() {
            let cur = mults[i];
            if cur < 1 {
                break;
            }
            if i + 1 == bs.len() {
                break;
            }
            let next = bs[i] as i128 * cur - prev;
            prev = cur;
            mults.push(next);
        }
        if mults.len() != bs.len() || mults.iter().any(|&m| m < 1) {
            continue;
        }
        // the recurrence must close up on l_b
        let last = *mults.last().unwrap();
        let before_last = if mults.len() >= 2 { mults[mults.len() - 2] } else { l_a as i128 };
        if *bs.last().unwrap() as i128 * last - before_last != l_b as i128 {
            continue;
        }
        let mults: Option<Vec<i64>> = mults.iter().map(|m| m.to_i64()).collect();
        let Some(mults) = mults else { continue };
        let better = match &best {
            None => true,
            Some((b0, _)) => bs.len() < b0.len(),
        };
        if better {
            best = Some((bs, mults));
        }
    }
    best.ok_or_else(|| {
        Error::domain(format!(
            "no chain of determinant {q} connects multiplicities {l_a} and {l_b}"
        ))
    })
}

/// Pendant chain for a leaf of weight `w` at a node of multiplicity `l`,
/// using the residue choice `r` (coprime to `w`): self-intersection entries
/// and multiplicities from the node outward; the last entry is the leaf.
fn leaf_chain(l: i64, w: i64, r: i64) -> Result<(Vec<i64>, Vec<i64>)> {
    let t = l / w;
    if w == 1 {
        return Ok((vec![1], vec![t])); // the leaf itself, self-int −1
    }
    let bs = negative_continued_fraction(w, r)?;
    // backwards from the leaf: mu_k = t, mu_{k−1} = b_k t, ...
    let k = bs.len();
    let mut mults = vec![0i128; k];
    mults[k - 1] = t as i128;
    if k >= 2 {
        mults[k - 2] = bs[k - 1] as i128 * t as i128;
    }
    for j in (0..k.saturating_sub(2)).rev() {
        mults[j] = bs[j + 1] as i128 * mults[j + 1] - mults[j + 2];
    }
    if mults.iter().any(|&m| m < 1) {
        return Err(Error::domain("leaf chain with non-positive multiplicity"));
    }
    let mults: Option<Vec<i64>> = mults.iter().map(|m| m.to_i64()).collect();
    Ok((bs, mults.ok_or_else(|| Error::domain("leaf chain multiplicity exceeds 64 bits"))?))
}

/// Pendant chain carrying an arrow of multiplicity `d` at a node of
/// multiplicity `l`, with the first chain multiplicity `m_a`: the descent
/// `mu_{i+1} = smallest positive value congruent to −mu_{i−1} mod mu_i`
/// terminates at the attaching curve of multiplicity exactly `d`.
fn arrow_chain(l: i64, d: i64, m_a: i64) -> Result<(Vec<i64>, Vec<i64>)> {
    if l.gcd(&m_a) != d {
        return Err(Error::internal(format!(
            "arrow chain seed {m_a} has gcd({l}, {m_a}) != {d}"
        )));
    }
    let mut bs: Vec<i64> = Vec::new();
    let mut mults: Vec<i64> = vec![m_a];
    let (mut x, mut y) = (l, m_a);
    loop {
        if y == d {
            bs.push((x + d) / d);
            break;
        }
        let rem = x % y;
        let z = if rem == 0 { y } else { y - rem };
        bs.push((x + z) / y);
        mults.push(z);
        (x, y) = (y, z);
    }
    Ok((bs, mults))
}

struct BranchPlan {
    /// contribution options at the anchor: (relation contribution, choice)
    options: Vec<(i64, i64)>,
    kind: BranchKind,
}

enum BranchKind {
    Leaf { leaf: NodeId, weight: i64 },
    Arrow { index: usize },
}

/// Expand a splice diagram back to a full dual graph.
///
/// Interior edges expand to the shortest chain matching the edge determinant
/// and the endpoint multiplicities.  Pendant branches (leaves and arrows)
/// have residual freedom; it is fixed per node by the first assignment, in
/// ascending order of the residues, that makes the node's self-intersection
/// a negative integer.  The output validates and preserves the Euler
/// characteristic.
pub fn dual_from_splice(s: &SpliceDiagram) -> Result<DualGraph> {
    require_tree(s)?;
    if s.arrows.is_empty() {
        return Err(Error::domain("no multilink structure: the diagram has no arrows"));
    }
    for a in &s.arrows {
        if a.weight != 1 {
            return Err(Error::domain(format!(
                "arrow at {} has half-edge weight {}; only weight 1 is realizable",
                a.node, a.weight
            )));
        }
    }
    for e in &s.edges {
        for (node, w) in [(&e.a, e.weight_a), (&e.b, e.weight_b)] {
            if s.is_leaf(node) && w != 1 {
                return Err(Error::domain(format!(
                    "half-edge weight at leaf {node} must be 1, found {w}"
                )));
            }
        }
    }

    let mut mult: BTreeMap<&str, i64> = BTreeMap::new();
    for id in s.nodes.keys() {
        let m = node_multiplicity(s, id)?;
        if m < 1 {
            return Err(Error::domain(format!("node {id} has multiplicity {m}")));
        }
        mult.insert(id, m);
    }

    let single_node = s.nodes.len() == 1;
    let anchor = |id: &str| single_node || !s.is_leaf(id);

    let mut g = DualGraph::default();
    let mut used_ids: std::collections::BTreeSet<String> = s.nodes.keys().cloned().collect();
    let fresh_id = |base: String, used: &mut std::collections::BTreeSet<String>| -> String {
        let mut id = base;
        while used.contains(&id) {
            id.push('x');
        }
        used.insert(id.clone());
        id
    };

    for (id, node) in &s.nodes {
        if anchor(id) || s.is_leaf(id) {
            g.nodes.insert(
                id.clone(),
                DualNode {
                    genus: node.genus,
                    self_int: 0, // anchors fixed later; leaves fixed by their chain
                    multiplicity: Some(mult[id.as_str()]),
                    mark: if s.distinguished_leaf.as_deref() == Some(id) {
                        Mark::LineAtInfinity
                    } else {
                        Mark::Interior
                    },
                },
            );
        }
    }

    // forced contributions: interior chains
    let mut contributions: BTreeMap<&str, i64> = BTreeMap::new();
    for e in &s.edges {
        let a_anchor = anchor(&e.a);
        let b_anchor = anchor(&e.b);
        if !(a_anchor && b_anchor) {
            continue;
        }
        let delta = edge_determinant(s, crate::calculus::edge_index_between(s, &e.a, &e.b)?)?;
        let q = delta.abs();
        if q == 0 {
            return Err(Error::domain(format!("edge {}-{} has determinant 0", e.a, e.b)));
        }
        let (bs, mults) = internal_chain(mult[e.a.as_str()], mult[e.b.as_str()], q)?;
        if bs.is_empty() {
            g.edges.push((e.a.clone(), e.b.clone()));
            *contributions.entry(e.a.as_str()).or_default() += mult[e.b.as_str()];
            *contributions.entry(e.b.as_str()).or_default() += mult[e.a.as_str()];
        } else {
            let mut prev = e.a.clone();
            for (j, (&b, &m)) in bs.iter().zip(&mults).enumerate() {
                let id = fresh_id(format!("{}.{}.{}", e.a, e.b, j + 1), &mut used_ids);
                g.nodes.insert(id.clone(), DualNode::rational(-b, m));
                g.edges.push((prev.clone(), id.clone()));
                prev = id;
            }
            g.edges.push((prev, e.b.clone()));
            *contributions.entry(e.a.as_str()).or_default() += mults[0];
            *contributions.entry(e.b.as_str()).or_default() += mults[mults.len() - 1];
        }
    }

    // free branches, node by node
    for id in s.nodes.keys().filter(|id| anchor(id)) {
        let l = mult[id.as_str()];
        let mut plans: Vec<BranchPlan> = Vec::new();
        let mut forced = *contributions.get(id.as_str()).unwrap_or(&0);

        for e in s.edges_at(id) {
            let other = e.other(id);
            if anchor(other) {
                continue; // interior edge, already handled
            }
            let w = e.weight_at(id)?;
            if l % w != 0 {
                return Err(Error::domain(format!(
                    "leaf weight {w} at {id} does not divide the node multiplicity {l}"
                )));
            }
            let t = l / w;
            if w == 1 {
                forced += t * 1; // direct leaf contributes its multiplicity l… = t*w = l ≡ 0, but keep exact
                plans.push(BranchPlan {
                    options: vec![(0, 1)], // contribution folded into `forced`; choice fixed
                    kind: BranchKind::Leaf { leaf: other.to_string(), weight: 1 },
                });
            } else {
                let options: Vec<(i64, i64)> = (1..w)
                    .filter(|r| r.gcd(&w) == 1)
                    .map(|r| (r * t, r))
                    .collect();
                plans.push(BranchPlan {
                    options,
                    kind: BranchKind::Leaf { leaf: other.to_string(), weight: w },
                });
            }
        }

        for (idx, arrow) in s.arrows.iter().enumerate() {
            if &arrow.node != id {
                continue;
            }
            let d = arrow.multiplicity;
            if d == 0 || d == l {
                forced += d; // attaches directly at the node
                continue;
            }
            if l % d != 0 {
                return Err(Error::domain(format!(
                    "arrow multiplicity {d} at {id} does not divide the node multiplicity {l}"
                )));
            }
            let options: Vec<(i64, i64)> = (1..=l / d)
                .map(|k| k * d)
                .filter(|&m| l.gcd(&m) == d)
                .map(|m| (m, m))
                .collect();
            plans.push(BranchPlan { options, kind: BranchKind::Arrow { index: idx } });
        }

        // pick the first assignment (ascending residues) making the
        // self-intersection a negative integer
        let mut chosen: Option<Vec<usize>> = None;
        let mut counters = vec![0usize; plans.len()];
        let combos: usize = plans.iter().map(|p| p.options.len().max(1)).product();
        if combos > 2_000_000 {
            return Err(Error::domain(format!("too many residue choices at node {id}")));
        }
        'search: loop {
            let mut total = forced;
            for (p, &c) in plans.iter().zip(&counters) {
                if p.options.is_empty() {
                    break 'search;
                }
                total += p.options[c].0;
            }
            if total % l == 0 && total / l >= 1 {
                chosen = Some(counters.clone());
                break;
            }
            // increment odometer
            let mut pos = plans.len();
            loop {
                if pos == 0 {
                    break 'search;
                }
                pos -= 1;
                counters[pos] += 1;
                if counters[pos] < plans[pos].options.len() {
                    break;
                }
                counters[pos] = 0;
            }
        }
        let Some(chosen) = chosen else {
            return Err(Error::domain(format!(
                "cannot realize node {id}: no residue assignment gives an integral self-intersection"
            )));
        };

        let mut total = forced;
        for (p, &c) in plans.iter().zip(&chosen) {
            total += p.options[c].0;
        }
        g.nodes.get_mut(id).unwrap().self_int = -(total / l);

        for (p, &c) in plans.iter().zip(&chosen) {
            match &p.kind {
                BranchKind::Leaf { leaf, weight } => {
                    let r = p.options[c].1;
                    let (bs, mults) = leaf_chain(l, *weight, r)?;
                    let mut prev = id.clone();
                    for (j, (&b, &m)) in bs.iter().zip(&mults).enumerate() {
                        let node_id = if j + 1 == bs.len() {
                            leaf.clone()
                        } else {
                            fresh_id(format!("{id}.{leaf}.{}", j + 1), &mut used_ids)
                        };
                        let entry = g.nodes.entry(node_id.clone()).or_insert(DualNode::rational(0, 0));
                        entry.self_int = -b;
                        entry.multiplicity = Some(m);
                        g.edges.push((prev.clone(), node_id.clone()));
                        prev = node_id;
                    }
                }
                BranchKind::Arrow { index } => {
                    let arrow = &s.arrows[*index];
                    let d = arrow.multiplicity;
                    let m_a = p.options[c].1;
                    let (bs, mults) = arrow_chain(l, d, m_a)?;
                    let tag = arrow.label.clone().unwrap_or_else(|| format!("arrow{index}"));
                    let mut prev = id.clone();
                    let mut last = id.clone();
                    for (j, (&b, &m)) in bs.iter().zip(&mults).enumerate() {
                        let node_id = fresh_id(format!("{id}.{tag}.{}", j + 1), &mut used_ids);
                        g.nodes.insert(node_id.clone(), DualNode::rational(-b, m));
                        g.edges.push((prev.clone(), node_id.clone()));
                        prev = node_id.clone();
                        last = node_id;
                    }
                    g.arrows.push(Arrow {
                        node: last,
                        multiplicity: d,
                        label: arrow.label.clone(),
                    });
                }
            }
        }
    }

    // direct arrows at anchors (multiplicity 0 or equal to the node's)
    for arrow in &s.arrows {
        if anchor(&arrow.node) {
            let d = arrow.multiplicity;
            let l = mult[arrow.node.as_str()];
            if d == 0 || d == l {
                g.arrows.push(Arrow {
                    node: arrow.node.clone(),
                    multiplicity: d,
                    label: arrow.label.clone(),
                });
            }
        } else {
            return Err(Error::domain(format!(
                "arrow anchored at leaf {}; attach it to an interior node",
                arrow.node
            )));
        }
    }

    let violations = crate::model::validate_dual_graph(&g)?;
    if !violations.is_empty() {
        return Err(Error::internal(format!(
            "expansion produced an invalid dual graph: {}",
            violations[0]
        )));
    }
    let chi_s = euler_characteristic_splice(s)?;
    let chi_g = euler_characteristic_dual(&g)?;
    if chi_s != chi_g {
        return Err(Error::internal(format!(
            "expansion changed the Euler characteristic: {chi_s} != {chi_g}"
        )));
    }
    Ok(g)
}

/// Self-intersections of the hidden chain between two retained nodes of a
/// tree dual graph, read from the `a` side (empty when the edge is direct).
pub fn chain_between(g: &DualGraph, a: &str, b: &str) -> Result<Vec<i64>> {
    // unique tree path
    let mut parent: BTreeMap<&str, &str> = BTreeMap::new();
    let mut stack = vec![a];
    parent.insert(a, a);
    while let Some(v) = stack.pop() {
        if v == b {
            break;
        }
        for u in g.neighbours(v) {
            if !parent.contains_key(u) {
                parent.insert(u, v);
                stack.push(u);
            }
        }
    }
    if !parent.contains_key(b) {
        return Err(Error::domain(format!("no path from {a} to {b}")));
    }
    let mut rev = Vec::new();
    let mut cur = b;
    while cur != a {
        rev.push(cur);
        cur = parent[cur];
    }
    rev.reverse();
    rev.pop(); // drop b itself
    for id in &rev {
        if !is_hidden(g, id) {
            return Err(Error::domain(format!(
                "path from {a} to {b} passes through the retained node {id}"
            )));
        }
    }
    Ok(rev.iter().map(|id| g.nodes[*id].self_int).collect())
}

// ---------------------------------------------------------------------------
// blow-down

/// One maximal run of (−2) chain nodes between two retained components, as a
/// would-be quotient node of the stable model.  `interior` is empty for a
/// direct intersection (order 1).  For a closed cycle of (−2) nodes the two
/// ends coincide.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuotientString {
    pub ends: (NodeId, NodeId),
    pub interior: Vec<NodeId>,
    pub order: i64,
}

/// Result of exhaustive blow-down.
#[derive(Debug, Clone)]
pub struct BlowDownOutcome {
    pub graph: DualGraph,
    /// Ids contracted, in contraction order.
    pub contracted: Vec<NodeId>,
    /// Maximal (−2)-strings (and direct intersections) of the final graph.
    pub strings: Vec<QuotientString>,
}

fn touches(g: &DualGraph, id: &str) -> i64 {
    let mut t = 0;
    for (a, b) in &g.edges {
        if a == id {
            t += 1;
        }
        if b == id {
            t += 1;
        }
    }
    t + g.arrows.iter().filter(|a| a.node == id).count() as i64
}

/// Repeatedly contract genus-0 (−1) curves meeting fewer than three other
/// curves (neighbours gain +1 self-intersection, arrows re-anchor to the
/// unique neighbour), then report the maximal strings of genus-0 (−2)
/// valency-2 nodes of the result.  Contracting a (−1) curve that meets the
/// same curve twice (or itself) is refused: that would create genus.
pub fn blow_down(g: &DualGraph) -> Result<BlowDownOutcome> {
    let mut graph = g.clone();
    let mut contracted = Vec::new();
    loop {
        let candidate = graph
            .nodes
            .iter()
            .find(|(id, n)| {
                n.genus == 0
                    && n.self_int == -1
                    && n.mark == Mark::Interior
                    && touches(&graph, id) < 3
                    && graph.edges.iter().any(|(a, b)| a == *id || b == *id)
                    && graph.nodes.len() > 1
            })
            .map(|(id, _)| id.clone());
        let Some(id) = candidate else { break };

        let incident: Vec<usize> = graph
            .edges
            .iter()
            .enumerate()
            .filter(|(_, (a, b))| *a == id || *b == id)
            .map(|(i, _)| i)
            .collect();
        let mut neighbours: Vec<NodeId> = Vec::new();
        for &i in &incident {
            let (a, b) = &graph.edges[i];
            if a == &id && b == &id {
                return Err(Error::domain(format!(
                    "blow-down of {id} would merge the curve with itself (self-edge)"
                )));
            }
            neighbours.push(if a == &id { b.clone() } else { a.clone() });
        }
        if neighbours.len() == 2 && neighbours[0] == neighbours[1] {
            return Err(Error::domain(format!(
                "blow-down of {id} would merge {} with itself and create genus",
                neighbours[0]
            )));
        }

        for n in &neighbours {
            graph.nodes.get_mut(n).unwrap().self_int += 1;
        }
        let mut keep = Vec::new();
        for (i, e) in graph.edges.iter().enumerate() {
            if !incident.contains(&i) {
                keep.push(e.clone());
            }
        }
        if neighbours.len() == 2 {
            keep.push((neighbours[0].clone(), neighbours[1].clone()));
        }
        graph.edges = keep;
        let target = neighbours
            .first()
            .cloned()
            .expect("contractible nodes have at least one edge");
        for arrow in &mut graph.arrows {
            if arrow.node == id {
                arrow.node = target.clone();
            }
        }
        graph.nodes.remove(&id);
        contracted.push(id);
    }

    let strings = find_strings(&graph);
    Ok(BlowDownOutcome { graph, contracted, strings })
}

fn is_string_node(g: &DualGraph, id: &str) -> bool {
    let n = &g.nodes[id];
    n.genus == 0
        && n.self_int == -2
        && n.mark == Mark::Interior
        && g.arrows.iter().all(|a| a.node != id)
        && g.edges.iter().filter(|(a, b)| a == id || b == id).count() == 2
        && g.edges.iter().all(|(a, b)| !(a == id && b == id))
}

/// Maximal (−2)-strings between retained components, plus order-1 records
/// for direct intersections of retained components.
fn find_strings(g: &DualGraph) -> Vec<QuotientString> {
    let mut out = Vec::new();
    let mut used: std::collections::BTreeSet<&str> = std::collections::BTreeSet::new();

    for start in g.nodes.keys() {
        if !is_string_node(g, start) || used.contains(start.as_str()) {
            continue;
        }
        // walk to one end of the run
        fn grow<'a>(g: &'a DualGraph, run: &mut Vec<&'a str>) {
            loop {
                let tail = *run.last().unwrap();
                let before = if run.len() >= 2 { run[run.len() - 2] } else { "" };
                let next = g
                    .neighbours(tail)
                    .into_iter()
                    .find(|u| *u != before && is_string_node(g, u) && !run.contains(u));
                match next {
                    Some(u) => run.push(u),
                    None => break,
                }
            }
        }
        let mut run: Vec<&str> = vec![start.as_str()];
        grow(g, &mut run);
        run.reverse();
        grow(g, &mut run);
        for id in &run {
            used.insert(id);
        }
        let end_anchor = |end: &str, inner: Option<&str>| -> Option<String> {
            g.neighbours(end)
                .into_iter()
                .find(|u| Some(*u) != inner && !run.contains(u))
                .map(|s| s.to_string())
        };
        let first = run[0];
        let last = *run.last().unwrap();
        let a = end_anchor(first, run.get(1).copied());
        let b = end_anchor(last, run.len().checked_sub(2).and_then(|i| run.get(i)).copied());
        match (a, b) {
            (Some(a), Some(b)) => out.push(QuotientString {
                ends: (a, b),
                interior: run.iter().map(|s| s.to_string()).collect(),
                order: run.len() as i64 + 1,
            }),
            _ => {
                // a closed cycle of string nodes: keep one as the component
                let kept = run[0].to_string();
                out.push(QuotientString {
                    ends: (kept.clone(), kept),
                    interior: run[1..].iter().map(|s| s.to_string()).collect(),
                    order: run.len() as i64,
                });
            }
        }
    }

    for (a, b) in &g.edges {
        if !is_string_node(g, a) && !is_string_node(g, b) {
            out.push(QuotientString { ends: (a.clone(), b.clone()), interior: vec![], order: 1 });
        }
    }
    out.sort_by(|x, y| (&x.ends, &x.interior).cmp(&(&y.ends, &y.interior)));
    out
}

// ---------------------------------------------------------------------------
// local resolution chains for cyclic covers

/// Chain of (self-intersection, multiplicity) pairs resolving the degree-`p`
/// cyclic cover of a transverse crossing of two curves of multiplicities `a`
/// and `b` (local model `z^p = x^a y^b`), read from the `a` side.
///
/// When `p` divides both exponents the cover is locally trivial (no chain,
/// `p` disjoint crossings upstairs); when it divides exactly one, the cover
/// is smooth over the crossing and the lifted curves meet directly (no
/// chain).  Otherwise the quotient singularity upstairs is resolved by the
/// negative continued fraction of `p / ((−b·a⁻¹) mod p)`, and the chain
/// multiplicities are fixed by the zero-intersection relations against the
/// lifted curves, which keep multiplicities `a` and `b`.
pub fn hj_chain(p: i64, a: i64, b: i64) -> Result<Vec<(i64, i64)>> {
    if p < 2 {
        return Err(Error::domain(format!("cover degree must be at least 2, got {p}")));
    }
    if a < 0 || b < 0 {
        return Err(Error::domain("branch exponents must be non-negative"));
    }
    let abar = a.rem_euclid(p);
    let bbar = b.rem_euclid(p);
    if abar == 0 || bbar == 0 {
        return Ok(Vec::new());
    }
    let inv = mod_inverse(abar, p).ok_or_else(|| {
        Error::domain(format!("exponent {a} is not invertible modulo {p}"))
    })?;
    let qbar = (p - (bbar * inv).rem_euclid(p)).rem_euclid(p);
    debug_assert!(qbar >= 1);
    let bs = negative_continued_fraction(p, qbar)?;
    let tail = continuant(&bs[1..])?;
    let first = (b as i128 + tail as i128 * a as i128) / p as i128;
    if (b as i128 + tail as i128 * a as i128) % p as i128 != 0 {
        return Err(Error::internal(format!(
            "chain multiplicity for z^{p} = x^{a} y^{b} is not integral"
        )));
    }
    let mut mults: Vec<i128> = vec![first];
    let mut prev = a as i128;
    for i in 0..bs.len() - 1 {
        let next = bs[i] as i128 * mults[i] - prev;
        prev = mults[i];
        mults.push(next);
    }
    let last = *mults.last().unwrap();
    let before = if mults.len() >= 2 { mults[mults.len() - 2] } else { a as i128 };
    if *bs.last().unwrap() as i128 * last - before != b as i128 {
        return Err(Error::internal(format!(
            "resolution chain for z^{p} = x^{a} y^{b} does not close up on {b}"
        )));
    }
    if mults.iter().any(|&m| m < 1) {
        return Err(Error::internal(format!(
            "resolution chain for z^{p} = x^{a} y^{b} has a non-positive multiplicity"
        )));
    }
    bs.iter()
        .zip(&mults)
        .map(|(&b, &m)| {
            Ok((-b, m.to_i64().ok_or_else(|| Error::domain("chain multiplicity exceeds 64 bits"))?))
        })
        .collect()
}
