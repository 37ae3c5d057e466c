//! Independent branched-cover construction of the stable fibre.
//!
//! The fast route (`reduction`) never leaves the splice diagram: it reads the
//! stable fibre off junction data by pure arithmetic.  This module instead
//! performs the underlying geometry step by step on the resolved dual graph:
//! take a prime-order root of the fibration, normalize, resolve the cyclic
//! quotient singularities that appear over the crossings, blow down, and
//! repeat until the fibre is reduced; finally contract what stability
//! requires.  The two routes share only the graph model, which is what makes
//! their agreement a meaningful check.
//!
//! The cover of degree `p` branched along the fibre is classified by the
//! winding of the fibration: a meridian of a curve of multiplicity `m` winds
//! `m` times, a meridian of a boundary arrow of multiplicity `d` winds `d`
//! times.  Everything below is local bookkeeping of that homomorphism into
//! `Z/p`.

use std::collections::{BTreeMap, BTreeSet};

use num_integer::Integer;

use crate::calculus::{
    blow_down, euler_characteristic_dual, genus_and_points_dual, hj_chain, solve_multiplicities,
    solve_self_intersections, BlowDownOutcome,
};
use crate::model::{
    arithmetic_genus, validate_dual_graph, validate_stable, Arrow, DualGraph, DualNode, Error,
    Mark, MarkedPoint, NodeId, Result, StableComponent, StableFibre, StableNode,
};

/// One prime-degree cover of a resolved fibre.
#[derive(Debug, Clone)]
pub struct CoverStep {
    pub prime: i64,
    /// Curves along which the cover ramifies: multiplicity not divisible by
    /// the prime.  They lift isomorphically.
    pub branch_nodes: Vec<NodeId>,
    /// Input graph, with multiplicities solved.
    pub before: DualGraph,
    /// The resolved cover.
    pub after: DualGraph,
    /// Notable events: curves that split, marks that had to be dropped.
    pub log: Vec<String>,
}

/// Outcome of a full covering tower.
#[derive(Debug, Clone)]
pub struct CoverReduction {
    pub fibre: StableFibre,
    /// Total degree of the tower — the order of the monodromy.
    pub degree: i64,
    pub steps: Vec<CoverStep>,
}

fn is_prime(p: i64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Largest prime factor of `n`, or `None` for `n <= 1`.
pub fn largest_prime_factor(n: i64) -> Option<i64> {
    let mut n = n.abs();
    if n <= 1 {
        return None;
    }
    let mut largest = None;
    let mut d = 2;
    while d * d <= n {
        while n % d == 0 {
            largest = Some(d);
            n /= d;
        }
        d += 1;
    }
    if n > 1 {
        largest = Some(n);
    }
    largest
}

fn fresh_id(base: String, used: &mut BTreeSet<String>) -> String {
    let mut id = base;
    while used.contains(&id) {
        id.push('x');
    }
    used.insert(id.clone());
    id
}

/// The cyclic cover of prime degree `p` branched along the fibre, with its
/// quotient singularities resolved.
///
/// Local rules, all read off the winding homomorphism into `Z/p`:
///
/// * a curve of multiplicity `m` with `p ∤ m` is in the branch locus and
///   lifts isomorphically, keeping genus, mark and multiplicity;
/// * a curve with `p | m` is unbranched; it splits into `p` disjoint copies
///   of multiplicity `m/p` when every special point on it winds trivially,
///   and otherwise lifts to one curve of multiplicity `m/p` whose genus comes
///   from the Euler characteristic of the branched cover of curves;
/// * a crossing lifts to `p` crossings (both multiplicities divisible), one
///   transverse crossing (exactly one divisible), or one cyclic quotient
///   singularity resolved by `hj_chain` (neither divisible);
/// * an arrow of multiplicity `d` with `p ∤ d` lifts to one arrow of the
///   same multiplicity; with `p | d` it lifts to `p` arrows of multiplicity
///   `d/p`, which requires the underlying curve to be unbranched.
///
/// Self-intersections of the cover are recomputed from the zero-intersection
/// relations; the generic-fibre Euler characteristic must come out unchanged
/// and is asserted.
pub fn cover_step(g: &DualGraph, p: i64) -> Result<CoverStep> {
    if !is_prime(p) {
        return Err(Error::domain(format!("cover degree {p} is not prime")));
    }
    let before = solve_multiplicities(g)?;
    if let Some(v) = validate_dual_graph(&before)?.first() {
        return Err(Error::domain(format!("not a fibre: {v}")));
    }
    let chi_before = euler_characteristic_dual(&before)?;

    let mult = |id: &str| -> i64 {
        before.nodes[id].multiplicity.expect("multiplicities solved above")
    };

    // A cover along which every curve and every arrow winds trivially would
    // be p disjoint copies, not a connected surface.
    let trivial = before.nodes.values().all(|n| n.multiplicity.unwrap_or(0) % p == 0)
        && before.arrows.iter().all(|a| a.multiplicity % p == 0);
    if trivial {
        return Err(Error::domain(format!(
            "every multiplicity is divisible by {p}: the fibration class is not primitive \
             and the cover disconnects"
        )));
    }

    let mut log: Vec<String> = Vec::new();
    let mut used: BTreeSet<String> = BTreeSet::new();
    let mut after = DualGraph::default();
    // old id -> lifted ids (length 1 or p)
    let mut copies: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();

    for (id, node) in &before.nodes {
        let m = node.multiplicity.unwrap();
        if m % p != 0 {
            let nid = fresh_id(id.clone(), &mut used);
            after.nodes.insert(
                nid.clone(),
                DualNode { genus: node.genus, self_int: 0, multiplicity: Some(m), mark: node.mark },
            );
            copies.insert(id.clone(), vec![nid]);
            continue;
        }

        // windings at the special points of the curve
        let mut exponents: Vec<i64> = Vec::new();
        for (a, b) in &before.edges {
            if a == id && b == id {
                return Err(Error::domain(format!(
                    "curve {id} crosses itself and is unbranched in the degree-{p} cover; \
                     tracking which sheets meet at the lifted crossings is not supported"
                )));
            }
            if a == id {
                exponents.push(mult(b));
            } else if b == id {
                exponents.push(mult(a));
            }
        }
        for arrow in &before.arrows {
            if &arrow.node == id {
                exponents.push(arrow.multiplicity);
            }
        }

        let branch_points = exponents.iter().filter(|e| *e % p != 0).count() as i64;
        if branch_points == 0 {
            // trivial winding everywhere near the curve: p disjoint copies
            let ids: Vec<NodeId> =
                (1..=p).map(|i| fresh_id(format!("{id}.{i}"), &mut used)).collect();
            for nid in &ids {
                after.nodes.insert(
                    nid.clone(),
                    DualNode {
                        genus: node.genus,
                        self_int: 0,
                        multiplicity: Some(m / p),
                        mark: Mark::Interior,
                    },
                );
            }
            if node.mark != Mark::Interior {
                log.push(format!(
                    "mark '{}' dropped: {id} splits into {p} disjoint curves",
                    node.mark
                ));
            }
            log.push(format!("{id} splits into {p} copies of multiplicity {}", m / p));
            copies.insert(id.clone(), ids);
        } else {
            // connected: any point of nontrivial winding forces one sheet.
            // Over the curve itself the cover is unramified away from those
            // points and totally ramified at them.
            let chi_cover = p * (2 - 2 * node.genus) - branch_points * (p - 1);
            if chi_cover % 2 != 0 {
                return Err(Error::internal(format!(
                    "branched cover of {id} has odd Euler characteristic {chi_cover}; \
                     the windings around it cannot sum to zero mod {p}"
                )));
            }
            let genus = (2 - chi_cover) / 2;
            if genus < 0 {
                return Err(Error::internal(format!(
                    "branched cover of {id} would have negative genus"
                )));
            }
            let nid = fresh_id(id.clone(), &mut used);
            after.nodes.insert(
                nid.clone(),
                DualNode { genus, self_int: 0, multiplicity: Some(m / p), mark: node.mark },
            );
            copies.insert(id.clone(), vec![nid]);
        }
    }

    // crossings
    let attach_chain = |after: &mut DualGraph,
                            used: &mut BTreeSet<String>,
                            from: NodeId,
                            to: NodeId,
                            chain: Vec<(i64, i64)>,
                            base: &str|
     -> () {
        let mut prev = from;
        for (k, (e, cm)) in chain.iter().enumerate() {
            let nid = fresh_id(format!("{base}.{}", k + 1), used);
            after.nodes.insert(
                nid.clone(),
                DualNode { genus: 0, self_int: *e, multiplicity: Some(*cm), mark: Mark::Interior },
            );
            after.edges.push((prev.clone(), nid.clone()));
            prev = nid;
        }
        after.edges.push((prev, to));
    };

    for (idx, (a, b)) in before.edges.iter().enumerate() {
        if a == b {
            // self-crossing of a branch curve (the divisible case was
            // rejected above): one crossing upstairs, resolved by a chain
            // back to the same curve
            let m = mult(a);
            let chain = hj_chain(p, m, m)?;
            if chain.is_empty() {
                return Err(Error::internal(format!(
                    "self-crossing of {a} lifts without a resolution chain"
                )));
            }
            let cid = copies[a.as_str()][0].clone();
            attach_chain(&mut after, &mut used, cid.clone(), cid, chain, &format!("{a}~{idx}"));
            continue;
        }
        let (ma, mb) = (mult(a), mult(b));
        let ca = &copies[a.as_str()];
        let cb = &copies[b.as_str()];
        match (ma % p == 0, mb % p == 0) {
            (true, true) => {
                // unbranched on both sides: p crossings, matched sheet by sheet
                for i in 0..p as usize {
                    after.edges.push((ca[i % ca.len()].clone(), cb[i % cb.len()].clone()));
                }
            }
            (true, false) | (false, true) => {
                // the divisible side cannot split: the other endpoint's
                // multiplicity is a nontrivial winding on it
                if ca.len() != 1 || cb.len() != 1 {
                    return Err(Error::internal(format!(
                        "crossing {a}-{b} joins a split curve to a branch curve"
                    )));
                }
                after.edges.push((ca[0].clone(), cb[0].clone()));
            }
            (false, false) => {
                // one crossing upstairs with a cyclic quotient singularity
                let chain = hj_chain(p, ma, mb)?;
                attach_chain(
                    &mut after,
                    &mut used,
                    ca[0].clone(),
                    cb[0].clone(),
                    chain,
                    &format!("{a}~{b}"),
                );
            }
        }
    }

    // boundary arrows
    for arrow in &before.arrows {
        let m = mult(&arrow.node);
        let d = arrow.multiplicity;
        let ca = &copies[arrow.node.as_str()];
        if d % p != 0 {
            if ca.len() != 1 {
                return Err(Error::internal(format!(
                    "arrow of multiplicity {d} sits on the split curve {}",
                    arrow.node
                )));
            }
            after.arrows.push(Arrow {
                node: ca[0].clone(),
                multiplicity: d,
                label: arrow.label.clone(),
            });
        } else if m % p == 0 {
            for i in 0..p as usize {
                let label = arrow.label.as_ref().map(|l| format!("{l}.{}", i + 1));
                after.arrows.push(Arrow {
                    node: ca[i % ca.len()].clone(),
                    multiplicity: d / p,
                    label,
                });
            }
            if let Some(l) = &arrow.label {
                log.push(format!("arrow '{l}' splits into {p} of multiplicity {}", d / p));
            }
        } else {
            return Err(Error::domain(format!(
                "arrow of multiplicity {d} at the branch curve {}: all {p} lifted sections \
                 would pass through one point, which is not a normal crossing",
                arrow.node
            )));
        }
    }

    let after = solve_self_intersections(&after)?;
    let violations = validate_dual_graph(&after)?;
    if let Some(v) = violations.first() {
        return Err(Error::internal(format!("the degree-{p} cover is not a valid fibre: {v}")));
    }
    let chi_after = euler_characteristic_dual(&after)?;
    if chi_after != chi_before {
        return Err(Error::internal(format!(
            "the degree-{p} cover changed the generic-fibre Euler characteristic \
             from {chi_before} to {chi_after}"
        )));
    }

    let branch_nodes = before
        .nodes
        .iter()
        .filter(|(_, n)| n.multiplicity.unwrap() % p != 0)
        .map(|(id, _)| id.clone())
        .collect();
    Ok(CoverStep { prime: p, branch_nodes, before, after, log })
}

/// Multiplicities that drive the covering tower: the junction curves (genus,
/// or at least three special directions) — exactly the monodromy orders of
/// the fibre pieces.  Chain and leaf curves follow along: the covers and the
/// interleaved blow-downs dispose of them.  When the graph has no junction
/// the first boundary arrow's curve is the anchor.
fn driving_multiplicities(g: &DualGraph) -> Result<Vec<i64>> {
    let mut out = Vec::new();
    for (id, n) in &g.nodes {
        if n.genus > 0 || g.valency(id) >= 3 {
            out.push(g.multiplicity(id)?);
        }
    }
    if out.is_empty() {
        if let Some(a) = g.arrows.iter().find(|a| a.multiplicity >= 1) {
            out.push(g.multiplicity(&a.node)?);
        }
    }
    Ok(out)
}

fn driving_lcm(g: &DualGraph) -> Result<i64> {
    let mut l: i64 = 1;
    for m in driving_multiplicities(g)? {
        if m < 1 {
            return Err(Error::domain(format!("junction multiplicity {m} is not positive")));
        }
        l = l.checked_mul(m / l.gcd(&m)).ok_or_else(|| Error::domain("monodromy order overflow"))?;
    }
    Ok(l)
}

/// Stable reduction by explicit covers: repeatedly take the cover of prime
/// degree (largest prime of the remaining monodromy order) and blow down,
/// until the fibre is reduced; then contract the unstable remainder.
///
/// The total degree must come out equal to the monodromy order — the least
/// common multiple of the junction multiplicities of the input — and every
/// multiplicity must be 1 afterwards; both are asserted, as is agreement of
/// the arithmetic genus and the marked-point count with the input.
pub fn reduce_to_stable(g: &DualGraph) -> Result<CoverReduction> {
    let mut current = solve_multiplicities(g)?;
    if let Some(v) = validate_dual_graph(&current)?.first() {
        return Err(Error::domain(format!("not a fibre: {v}")));
    }
    let (genus_in, points_in) = genus_and_points_dual(&current)?;
    let expected = driving_lcm(&current)?;

    let mut degree: i64 = 1;
    let mut steps: Vec<CoverStep> = Vec::new();
    loop {
        let l = driving_lcm(&current)?;
        if l == 1 {
            break;
        }
        let p = largest_prime_factor(l).expect("lcm > 1 has a prime factor");
        degree = degree
            .checked_mul(p)
            .ok_or_else(|| Error::internal("covering tower degree overflow"))?;
        if degree > expected {
            return Err(Error::internal(format!(
                "covering tower exceeds the monodromy order {expected}"
            )));
        }
        let step = cover_step(&current, p)?;
        current = blow_down(&step.after)?.graph;
        steps.push(step);
    }
    if degree != expected {
        return Err(Error::internal(format!(
            "covering tower stopped at degree {degree}, monodromy order is {expected}"
        )));
    }
    for (id, n) in &current.nodes {
        if n.multiplicity != Some(1) {
            return Err(Error::internal(format!(
                "fibre is not reduced after the tower: {id} has multiplicity {:?}",
                n.multiplicity
            )));
        }
    }

    // The compactification marks have no meaning upstairs once the covers
    // are done; the semi-stable fibre is an abstract curve.
    for n in current.nodes.values_mut() {
        n.mark = Mark::Interior;
    }

    let fibre = stabilize(&current)?;

    if arithmetic_genus(&fibre) != genus_in {
        return Err(Error::internal(format!(
            "stable fibre has arithmetic genus {}, the fibration has genus {genus_in}",
            arithmetic_genus(&fibre)
        )));
    }
    if fibre.marked_points.len() as i64 != points_in {
        return Err(Error::internal(format!(
            "stable fibre has {} marked points, the fibration has {points_in} points at infinity",
            fibre.marked_points.len()
        )));
    }
    let violations = validate_stable(&fibre);
    if let Some(v) = violations.first() {
        return Err(Error::domain(format!("the reduced fibre is semi-stable but not stable: {v}")));
    }

    Ok(CoverReduction { fibre, degree, steps })
}

/// Blow down and contract marked tails until nothing changes, then assemble
/// the stable fibre from the surviving components and the (−2)-strings.
fn stabilize(g: &DualGraph) -> Result<StableFibre> {
    let mut current = g.clone();
    let outcome = loop {
        let bd = blow_down(&current)?;
        match contract_one_marked_tail(&bd.graph)? {
            Some(next) => current = next,
            None => break bd,
        }
    };
    assemble(&outcome)
}

/// A rational multiplicity-1 curve meeting the rest of the fibre in a single
/// point and carrying one marked point is unstable.  Contract it: the marked
/// point moves to the neighbour, whose self-intersection gains `1 − d` so
/// that the zero-intersection relations keep holding.
fn contract_one_marked_tail(g: &DualGraph) -> Result<Option<DualGraph>> {
    for (id, n) in &g.nodes {
        if n.genus != 0 || n.multiplicity != Some(1) || n.mark != Mark::Interior {
            continue;
        }
        if g.valency(id) != 2 {
            continue;
        }
        let incident: Vec<usize> = g
            .edges
            .iter()
            .enumerate()
            .filter(|(_, (a, b))| a == id || b == id)
            .map(|(i, _)| i)
            .collect();
        if incident.len() != 1 {
            continue; // two real arrows, or a self-edge counted twice
        }
        let (a, b) = &g.edges[incident[0]];
        if a == b {
            continue;
        }
        let d: i64 = g.arrows.iter().filter(|x| &x.node == id).map(|x| x.multiplicity).sum();
        if d < 1 {
            continue; // a plain chain end, handled by blow-down or strings
        }
        let u = if a == id { b.clone() } else { a.clone() };
        let mut out = g.clone();
        out.nodes.get_mut(&u).expect("edge endpoint exists").self_int += 1 - d;
        out.edges.remove(incident[0]);
        for arrow in &mut out.arrows {
            if &arrow.node == id {
                arrow.node = u.clone();
            }
        }
        out.nodes.remove(id);
        return Ok(Some(out));
    }
    Ok(None)
}

fn assemble(outcome: &BlowDownOutcome) -> Result<StableFibre> {
    let g = &outcome.graph;
    let interior: BTreeSet<&str> =
        outcome.strings.iter().flat_map(|s| s.interior.iter().map(|x| x.as_str())).collect();

    let mut fibre = StableFibre::default();
    for (id, n) in &g.nodes {
        if interior.contains(id.as_str()) {
            continue;
        }
        if n.multiplicity != Some(1) {
            return Err(Error::internal(format!(
                "component {id} of the reduced fibre has multiplicity {:?}",
                n.multiplicity
            )));
        }
        fibre.components.push(StableComponent { id: id.clone(), genus: n.genus });
    }
    for s in &outcome.strings {
        fibre.nodes.push(StableNode { a: s.ends.0.clone(), b: s.ends.1.clone(), order: s.order });
    }
    for (i, arrow) in g.arrows.iter().enumerate() {
        if arrow.multiplicity < 1 {
            continue; // bounds a disk, the generic fibre does not meet it
        }
        let base =
            arrow.label.clone().unwrap_or_else(|| format!("{}.arrow{}", arrow.node, i + 1));
        for t in 0..arrow.multiplicity {
            let label =
                if arrow.multiplicity > 1 { format!("{base}.{}", t + 1) } else { base.clone() };
            fibre.marked_points.push(MarkedPoint { component: arrow.node.clone(), label });
        }
    }
    Ok(fibre)
}
