//! The efficient route to the stable model: decompose the generic fibre
//! along the annuli over the internal edges, read off the monodromy order of
//! each piece, and assemble the stable fibre of the pulled-back family
//! without ever constructing a cover.
//!
//! The decomposition follows the circles the fibre traces over each edge
//! between junctions.  A junction — a node of valency greater than two or of
//! positive genus — anchors one piece; the piece's fibre may be
//! disconnected, and the number of components is the gcd of the multilink
//! multiplicities visible on its boundary.  The monodromy restricted to a
//! piece has finite order equal to the multiplicity of its anchor, so the
//! pull-back under a cyclic base cover whose degree is the lcm of those
//! orders has trivialized monodromy away from the gluing annuli.  On each
//! annulus a fractional Dehn twist survives; its denominator against the
//! cover degree is the order of the cyclic quotient singularity sitting at
//! the corresponding node of the stable fibre.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive};

use crate::calculus::{
    analyze_edge, euler_characteristic_splice, genus_and_points_splice, multilink_toward,
    node_multiplicity, EdgeAnalysis,
};
use crate::model::{
    arithmetic_genus, rational_int, validate_splice, validate_stable, Error, MarkedPoint, NodeId,
    Rational, Result, SpliceDiagram, StableComponent, StableFibre, StableNode,
};

/// One piece of the decomposition: the part of the generic fibre living over
/// the link of a single junction node, cut off along the annuli over the
/// junction-to-junction edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FibrePiece {
    /// Junction node the piece is anchored at.
    pub anchor: NodeId,
    /// Number of connected components of the piece.
    pub component_count: i64,
    /// Euler characteristic of one component, as a surface with boundary.
    pub euler_char_per_component: i64,
    /// Total number of boundary circles of the piece: the annulus ends over
    /// cut edges plus the fibre boundary on the arrows.
    pub boundary_circles: i64,
    /// Order of the monodromy restricted to the piece — the multiplicity of
    /// the anchor node (component permutation included).
    pub monodromy_order: i64,
}

impl FibrePiece {
    /// Genus of one component once its boundary circles are capped off.
    pub fn component_genus(&self) -> i64 {
        let boundary_per = self.boundary_circles / self.component_count;
        (2 - (self.euler_char_per_component + boundary_per)) / 2
    }
}

/// Twist data over one cut edge: the fractional Dehn twist of the monodromy
/// on its annuli, and the order of the quotient singularity at each of the
/// resulting nodes of the stable fibre.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeTwist {
    pub a: NodeId,
    pub b: NodeId,
    /// Fractional Dehn twist (positive orientation convention).
    pub twist: Rational,
    /// Order of the cyclic quotient singularity at each node over this edge.
    pub node_order: i64,
    /// Number of annuli over the edge — the number of stable-fibre nodes it
    /// contributes.
    pub node_count: i64,
}

/// Residual twist of the monodromy around one arrow's boundary circle(s);
/// this is the self-intersection paid by the section through that point,
/// i.e. the psi-class contribution of the marked point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryTwist {
    /// Arrow label, or its anchor node id when unlabelled.
    pub arrow: String,
    pub twist: Rational,
}

/// Everything the efficient route produces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionReport {
    pub pieces: Vec<FibrePiece>,
    /// Degree of the cyclic base cover that trivializes the monodromy on
    /// every piece: the lcm of the piece orders.
    pub cover_degree: i64,
    pub edge_twists: Vec<EdgeTwist>,
    pub stable_fibre: StableFibre,
    pub boundary_twists: Vec<BoundaryTwist>,
}

fn checked_lcm(a: i64, b: i64) -> Result<i64> {
    if a == 0 || b == 0 {
        return Err(Error::domain("lcm with a zero order"));
    }
    let g = a.gcd(&b);
    (a / g)
        .checked_mul(b)
        .ok_or_else(|| Error::domain("cover degree overflows 64 bits"))
}

/// The junction nodes: valency above two, or positive genus.
fn junctions(s: &SpliceDiagram) -> Vec<NodeId> {
    s.nodes
        .iter()
        .filter(|(id, n)| s.valency(id) > 2 || n.genus > 0)
        .map(|(id, _)| id.clone())
        .collect()
}

/// Pieces plus the node-to-anchor assignment (leaves and other plain nodes
/// belong to the piece of the unique junction they hang off).
fn pieces_and_assignment(
    s: &SpliceDiagram,
) -> Result<(Vec<FibrePiece>, BTreeMap<NodeId, NodeId>)> {
    let violations = validate_splice(s)?;
    if let Some(v) = violations.first() {
        return Err(Error::domain(format!("diagram does not validate: {v}")));
    }
    if s.arrows.iter().all(|a| a.multiplicity == 0) {
        return Err(Error::domain(
            "fibration structure needs at least one arrow of positive multiplicity",
        ));
    }

    let mut anchors: Vec<NodeId> = junctions(s);
    if anchors.is_empty() {
        // finite-order monodromy on the whole fibre: one piece, anchored at
        // the node carrying the (first) arrow
        let arrow = s
            .arrows
            .iter()
            .find(|a| a.multiplicity >= 1)
            .expect("positive arrow checked above");
        anchors.push(arrow.node.clone());
    }
    let anchor_set: BTreeSet<&str> = anchors.iter().map(|a| a.as_str()).collect();

    // assign every plain node to the unique junction its region hangs off
    let mut assignment: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for a in &anchors {
        assignment.insert(a.clone(), a.clone());
    }
    for id in s.nodes.keys() {
        if assignment.contains_key(id) {
            continue;
        }
        // flood the plain region around `id`
        let mut region: BTreeSet<NodeId> = [id.clone()].into();
        let mut stack = vec![id.clone()];
        let mut touching: BTreeSet<NodeId> = BTreeSet::new();
        while let Some(v) = stack.pop() {
            for e in s.edges_at(&v) {
                let u = e.other(&v).to_string();
                if anchor_set.contains(u.as_str()) {
                    touching.insert(u);
                } else if region.insert(u.clone()) {
                    stack.push(u);
                }
            }
        }
        if touching.len() != 1 {
            return Err(Error::domain(format!(
                "node {id} sits in a plain region touching {} junctions; \
                 contract valency-two nodes before decomposing",
                touching.len()
            )));
        }
        let anchor = touching.into_iter().next().expect("one junction");
        for v in region {
            assignment.insert(v, anchor.clone());
        }
    }

    // cut edges: both endpoints are anchors
    let cut_edges: Vec<usize> = s
        .edges
        .iter()
        .enumerate()
        .filter(|(_, e)| anchor_set.contains(e.a.as_str()) && anchor_set.contains(e.b.as_str()))
        .map(|(i, _)| i)
        .collect();

    let mut pieces = Vec::new();
    let mut chi_total = 0i64;
    for anchor in &anchors {
        let members: Vec<&NodeId> = assignment
            .iter()
            .filter(|(_, a)| *a == anchor)
            .map(|(v, _)| v)
            .collect();

        // χ of the whole (open) piece: each member node contributes
        // multiplicity × (2 − 2·genus − valency), exactly its share of the
        // fibre's Euler characteristic
        let mut chi_open = 0i64;
        for v in &members {
            let m = node_multiplicity(s, v)?;
            let n = &s.nodes[*v];
            chi_open += m * (2 - 2 * n.genus - s.valency(v));
        }
        chi_total += chi_open;

        // boundary data: annuli over cut edges at the anchor, fibre boundary
        // on the piece's arrows
        let mut wrap_counts: Vec<i64> = Vec::new(); // for the component count
        let mut boundary = 0i64;
        for &i in &cut_edges {
            let e = &s.edges[i];
            let far = if e.a == *anchor {
                &e.b
            } else if e.b == *anchor {
                &e.a
            } else {
                continue;
            };
            let analysis = analyze_edge(s, i)?;
            boundary += analysis.d_e;
            wrap_counts.push(multilink_toward(s, i, far)?);
        }
        for v in &members {
            for arrow in s.arrows_at(v) {
                boundary += arrow.multiplicity;
                wrap_counts.push(arrow.multiplicity);
            }
        }
        let component_count = wrap_counts.iter().fold(0i64, |acc, w| acc.gcd(w));
        if component_count < 1 {
            return Err(Error::domain(format!(
                "piece at {anchor} has no boundary data to count components from"
            )));
        }

        if chi_open % component_count != 0 || boundary % component_count != 0 {
            return Err(Error::internal(format!(
                "piece at {anchor}: χ {chi_open} or boundary {boundary} not divisible by \
                 the component count {component_count}"
            )));
        }
        let chi_per = chi_open / component_count;
        let boundary_per = boundary / component_count;
        let closed = chi_per + boundary_per;
        if closed % 2 != 0 || closed > 2 {
            return Err(Error::internal(format!(
                "piece at {anchor}: capped component χ {closed} is not an even number ≤ 2"
            )));
        }

        let order = node_multiplicity(s, anchor)?;
        if order % component_count != 0 {
            return Err(Error::internal(format!(
                "piece at {anchor}: component count {component_count} does not divide the \
                 monodromy order {order}"
            )));
        }
        pieces.push(FibrePiece {
            anchor: anchor.clone(),
            component_count,
            euler_char_per_component: chi_per,
            boundary_circles: boundary,
            monodromy_order: order,
        });
    }

    let chi_fibre = euler_characteristic_splice(s)?;
    if chi_total != chi_fibre {
        return Err(Error::internal(format!(
            "pieces account for χ = {chi_total} but the fibre has χ = {chi_fibre}"
        )));
    }
    Ok((pieces, assignment))
}

/// Cut the generic fibre along the annuli over the junction-to-junction
/// edges and describe the resulting pieces.
pub fn decompose(s: &SpliceDiagram) -> Result<Vec<FibrePiece>> {
    Ok(pieces_and_assignment(s)?.0)
}

/// Per-piece monodromy orders and the cover degree (their lcm).
pub fn monodromy_orders(s: &SpliceDiagram) -> Result<(Vec<(NodeId, i64)>, i64)> {
    let pieces = decompose(s)?;
    let mut d = 1i64;
    for p in &pieces {
        d = checked_lcm(d, p.monodromy_order)?;
    }
    Ok((pieces.into_iter().map(|p| (p.anchor, p.monodromy_order)).collect(), d))
}

/// Fractional Dehn twist of the monodromy on the annuli over an edge:
/// `|d_E · Δ| / (l·l′)`, oriented positively.
pub fn fractional_twist(e: &EdgeAnalysis) -> Result<Rational> {
    if e.delta == 0 {
        return Err(Error::domain(format!(
            "edge {}-{} has determinant 0; the diagram is degenerate",
            e.a, e.b
        )));
    }
    let numerator = BigInt::from(e.d_e) * BigInt::from(e.delta).abs();
    let denominator = BigInt::from(e.l_a) * BigInt::from(e.l_b);
    Ok(Rational::new(numerator, denominator))
}

/// Order of the quotient singularity at each stable-fibre node over an edge
/// with the given twist, in a degree-`d` cover: `twist × d`, which must come
/// out a positive integer.
pub fn twist_node_order(twist: &Rational, d: i64) -> Result<i64> {
    let scaled = twist * rational_int(d);
    if !scaled.is_integer() {
        return Err(Error::domain(format!(
            "twist {twist} times cover degree {d} is not an integer; \
             the diagram is not the picture of a fibration"
        )));
    }
    let order = scaled
        .to_integer()
        .to_i64()
        .ok_or_else(|| Error::domain("node order overflows 64 bits"))?;
    if order < 1 {
        return Err(Error::domain(format!("node order {order} < 1")));
    }
    Ok(order)
}

/// Residual twist around the boundary circle of one arrow: the arrow's
/// multilink multiplicity over the multiplicity of its anchor node.
pub fn boundary_twist(s: &SpliceDiagram, arrow_idx: usize) -> Result<Rational> {
    let arrow = s
        .arrows
        .get(arrow_idx)
        .ok_or_else(|| Error::domain(format!("no arrow with index {arrow_idx}")))?;
    let l = node_multiplicity(s, &arrow.node)?;
    if l == 0 {
        return Err(Error::domain(format!(
            "arrow at {} sits on a multiplicity-0 node",
            arrow.node
        )));
    }
    Ok(Rational::new(BigInt::from(arrow.multiplicity), BigInt::from(l)))
}

/// The efficient route end to end: pieces, cover degree, twists, and the
/// stable fibre with its quotient-singularity node orders.
pub fn stable_reduce(s: &SpliceDiagram) -> Result<ReductionReport> {
    let (pieces, assignment) = pieces_and_assignment(s)?;
    let mut cover_degree = 1i64;
    for p in &pieces {
        cover_degree = checked_lcm(cover_degree, p.monodromy_order)?;
    }

    let by_anchor: BTreeMap<&str, &FibrePiece> =
        pieces.iter().map(|p| (p.anchor.as_str(), p)).collect();
    let component_id = |piece: &FibrePiece, k: i64| -> NodeId {
        if piece.component_count == 1 {
            piece.anchor.clone()
        } else {
            format!("{}.{}", piece.anchor, k + 1)
        }
    };

    let mut fibre = StableFibre::default();
    for p in &pieces {
        for k in 0..p.component_count {
            fibre.components.push(StableComponent {
                id: component_id(p, k),
                genus: p.component_genus(),
            });
        }
    }

    let mut edge_twists = Vec::new();
    for (i, e) in s.edges.iter().enumerate() {
        let (Some(pa), Some(pb)) = (by_anchor.get(e.a.as_str()), by_anchor.get(e.b.as_str()))
        else {
            continue; // interior to a piece
        };
        let analysis = analyze_edge(s, i)?;
        let twist = fractional_twist(&analysis)?;
        let node_order = twist_node_order(&twist, cover_degree)?;
        for t in 0..analysis.d_e {
            fibre.nodes.push(StableNode {
                a: component_id(pa, t % pa.component_count),
                b: component_id(pb, t % pb.component_count),
                order: node_order,
            });
        }
        edge_twists.push(EdgeTwist {
            a: e.a.clone(),
            b: e.b.clone(),
            twist,
            node_order,
            node_count: analysis.d_e,
        });
    }

    let mut boundary_twists = Vec::new();
    for (idx, arrow) in s.arrows.iter().enumerate() {
        if arrow.multiplicity == 0 {
            continue;
        }
        let name = arrow
            .label
            .clone()
            .unwrap_or_else(|| format!("{}.arrow{}", arrow.node, idx + 1));
        boundary_twists.push(BoundaryTwist {
            arrow: name.clone(),
            twist: boundary_twist(s, idx)?,
        });
        let anchor = assignment
            .get(&arrow.node)
            .ok_or_else(|| Error::internal(format!("arrow node {} unassigned", arrow.node)))?;
        let piece = by_anchor[anchor.as_str()];
        for t in 0..arrow.multiplicity {
            let label = if arrow.multiplicity == 1 {
                name.clone()
            } else {
                format!("{name}.{}", t + 1)
            };
            fibre.marked_points.push(MarkedPoint {
                component: component_id(piece, t % piece.component_count),
                label,
            });
        }
    }

    // the pinched fibre must carry the same arithmetic genus as the generic
    // fibre, and must be honestly stable
    let (genus, _) = genus_and_points_splice(s)?;
    let pa = arithmetic_genus(&fibre);
    if pa != genus {
        return Err(Error::internal(format!(
            "stable fibre has arithmetic genus {pa}, generic fibre has genus {genus}"
        )));
    }
    let stability = validate_stable(&fibre);
    if let Some(v) = stability.first() {
        return Err(Error::domain(format!(
            "the reduced fibre is semi-stable but not stable: {v}"
        )));
    }

    Ok(ReductionReport { pieces, cover_degree, edge_twists, stable_fibre: fibre, boundary_twists })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{rational, SpliceArrow, SpliceDiagram, SpliceEdge, SpliceNode};
    use crate::testutil::running_example;

    /// Two genus-1 junctions joined by a determinant-±1 edge, one arrow:
    /// a fibration that is already semi-stable (all multiplicities 1).
    fn semistable_example() -> SpliceDiagram {
        let mut s = SpliceDiagram::default();
        s.nodes.insert("a".into(), SpliceNode { genus: 1 });
        s.nodes.insert("b".into(), SpliceNode { genus: 1 });
        s.edges.push(SpliceEdge { a: "a".into(), weight_a: 2, b: "b".into(), weight_b: 1 });
        s.arrows.push(SpliceArrow { node: "b".into(), weight: 1, multiplicity: 1, label: None });
        s
    }

    #[test]
    fn pieces_of_the_running_example() {
        let s = running_example();
        let pieces = decompose(&s).unwrap();
        assert_eq!(pieces.len(), 2);
        let left = pieces.iter().find(|p| p.anchor == "A").unwrap();
        let right = pieces.iter().find(|p| p.anchor == "B").unwrap();

        // two genus-1 components, one boundary circle each
        assert_eq!(left.component_count, 2);
        assert_eq!(left.euler_char_per_component, -1);
        assert_eq!(left.boundary_circles, 2);
        assert_eq!(left.component_genus(), 1);
        assert_eq!(left.monodromy_order, 12);

        // one genus-2 component with three boundary circles
        assert_eq!(right.component_count, 1);
        assert_eq!(right.euler_char_per_component, -5);
        assert_eq!(right.boundary_circles, 3);
        assert_eq!(right.component_genus(), 2);
        assert_eq!(right.monodromy_order, 10);
    }

    #[test]
    fn orders_and_cover_degree() {
        let s = running_example();
        let (orders, d) = monodromy_orders(&s).unwrap();
        let mut orders: Vec<i64> = orders.into_iter().map(|(_, o)| o).collect();
        orders.sort();
        assert_eq!(orders, vec![10, 12]);
        assert_eq!(d, 60);
    }

    #[test]
    fn twist_of_the_internal_edge() {
        let s = running_example();
        let idx = s.edges.iter().position(|e| e.a == "A" && e.b == "B").unwrap();
        let analysis = analyze_edge(&s, idx).unwrap();
        assert_eq!(analysis.d_e, 2);
        assert_eq!(analysis.delta, -7);
        let twist = fractional_twist(&analysis).unwrap();
        assert_eq!(twist, rational(7, 60));
        assert_eq!(twist_node_order(&twist, 60).unwrap(), 7);
    }

    #[test]
    fn boundary_twist_of_the_arrow() {
        let s = running_example();
        assert_eq!(boundary_twist(&s, 0).unwrap(), rational(1, 10));
    }

    #[test]
    fn stable_fibre_of_the_running_example() {
        let s = running_example();
        let report = stable_reduce(&s).unwrap();
        assert_eq!(report.cover_degree, 60);
        assert_eq!(report.stable_fibre.node_orders(), vec![7, 7]);

        let mut genera: Vec<i64> =
            report.stable_fibre.components.iter().map(|c| c.genus).collect();
        genera.sort();
        assert_eq!(genera, vec![1, 1, 2]);
        assert_eq!(arithmetic_genus(&report.stable_fibre), 4);

        // both nodes join a genus-1 component to the genus-2 component
        for n in &report.stable_fibre.nodes {
            let genus_of = |id: &str| {
                report.stable_fibre.components.iter().find(|c| c.id == id).unwrap().genus
            };
            let mut pair = vec![genus_of(&n.a), genus_of(&n.b)];
            pair.sort();
            assert_eq!(pair, vec![1, 2]);
        }

        // one marked point, on the genus-2 component
        assert_eq!(report.stable_fibre.marked_points.len(), 1);
        assert_eq!(report.boundary_twists.len(), 1);
        assert_eq!(report.boundary_twists[0].twist, rational(1, 10));
    }

    #[test]
    fn semistable_input_needs_no_cover() {
        let s = semistable_example();
        for id in ["a", "b"] {
            assert_eq!(node_multiplicity(&s, id).unwrap(), 1);
        }
        let report = stable_reduce(&s).unwrap();
        assert_eq!(report.cover_degree, 1);
        assert_eq!(report.edge_twists.len(), 1);
        assert_eq!(report.edge_twists[0].twist, rational(1, 1));
        assert_eq!(report.stable_fibre.node_orders(), vec![1]);
        let mut genera: Vec<i64> =
            report.stable_fibre.components.iter().map(|c| c.genus).collect();
        genera.sort();
        assert_eq!(genera, vec![1, 1]);
        assert_eq!(arithmetic_genus(&report.stable_fibre), 2);
    }

    #[test]
    fn single_junction_gives_one_piece_and_a_smooth_fibre() {
        // one junction with leaves 2 and 3 and one arrow: multiplicity 6
        let mut s = SpliceDiagram::default();
        for id in ["n", "p", "q"] {
            s.nodes.insert(id.into(), SpliceNode::default());
        }
        s.edges.push(SpliceEdge { a: "n".into(), weight_a: 2, b: "p".into(), weight_b: 1 });
        s.edges.push(SpliceEdge { a: "n".into(), weight_a: 3, b: "q".into(), weight_b: 1 });
        s.arrows.push(SpliceArrow { node: "n".into(), weight: 1, multiplicity: 1, label: None });
        s.distinguished_leaf = Some("q".into());

        let report = stable_reduce(&s).unwrap();
        assert_eq!(report.cover_degree, 6);
        assert_eq!(report.pieces.len(), 1);
        assert_eq!(report.pieces[0].monodromy_order, 6);
        assert!(report.edge_twists.is_empty());
        assert!(report.stable_fibre.nodes.is_empty());
        assert_eq!(report.stable_fibre.components.len(), 1);
        assert_eq!(report.stable_fibre.components[0].genus, 1);
        assert_eq!(report.boundary_twists[0].twist, rational(1, 6));
    }

    #[test]
    fn plain_chain_between_junctions_is_rejected() {
        // junction - plain valency-2 node - junction
        let mut s = SpliceDiagram::default();
        for id in ["x", "mid", "y", "x1", "x2", "y1", "y2"] {
            s.nodes.insert(id.into(), SpliceNode::default());
        }
        for (a, w, b) in [("x", 2, "x1"), ("x", 3, "x2"), ("y", 2, "y1"), ("y", 3, "y2")] {
            s.edges.push(SpliceEdge { a: a.into(), weight_a: w, b: b.into(), weight_b: 1 });
        }
        s.edges.push(SpliceEdge { a: "x".into(), weight_a: 1, b: "mid".into(), weight_b: 1 });
        s.edges.push(SpliceEdge { a: "mid".into(), weight_a: 1, b: "y".into(), weight_b: 1 });
        s.arrows.push(SpliceArrow { node: "y".into(), weight: 1, multiplicity: 1, label: None });
        let err = decompose(&s).unwrap_err();
        assert!(err.to_string().contains("plain region"), "got: {err}");
    }
}
