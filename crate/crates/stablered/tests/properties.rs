//! Property-based checks: the parser is total, printing is a bijection onto
//! its own image, the two graph pictures agree on everything they both
//! express, blow-down is confluent, and the branched-cover tower agrees with
//! the efficient route on whole families of inputs.

use std::collections::BTreeMap;

use num_integer::Integer;
use proptest::prelude::*;

use stablered::calculus::{
    blow_down, dual_from_splice, euler_characteristic_dual, euler_characteristic_splice,
    node_multiplicity, splice_from_dual,
};
use stablered::cover::reduce_to_stable;
use stablered::invariants::{
    canonical_from_report, family_bounds, family_splice, invariant_set, k_squared_relative,
    FamilyParams, FiniteFibreData,
};
use stablered::model::{
    arithmetic_genus, fibres_isomorphic, rational, rational_int, validate_stable, Arrow, DualGraph,
    DualNode, Mark, SpliceArrow, SpliceDiagram, SpliceEdge, SpliceNode,
};
use stablered::reduction::stable_reduce;
use stablered::text::{parse, parse_rational, print, Document};

// ---------------------------------------------------------------------------
// generators

fn coprime_pair(limit: i64) -> impl Strategy<Value = (i64, i64)> {
    (2..=limit, 2..=limit).prop_filter("coprime", |(p, q)| p.gcd(q) == 1)
}

/// A structurally well-formed splice diagram: a random tree with random
/// weights, genera, arrows and an optional distinguished leaf.  No semantic
/// validity is promised — exactly what a text file from a user might hold.
fn loose_splice() -> impl Strategy<Value = SpliceDiagram> {
    let node = (0i64..3).prop_map(|genus| SpliceNode { genus });
    (2usize..8, prop::collection::vec(node, 8))
        .prop_flat_map(|(k, nodes)| {
            let attach = prop::collection::vec(any::<prop::sample::Index>(), k - 1);
            let weights = prop::collection::vec((1i64..30, 1i64..30), k - 1);
            let arrows = prop::collection::vec(
                (any::<prop::sample::Index>(), 1i64..9, 0i64..4),
                0..3,
            );
            let mark = prop::option::of(any::<prop::sample::Index>());
            (Just(k), Just(nodes), attach, weights, arrows, mark)
        })
        .prop_map(|(k, nodes, attach, weights, arrows, mark)| {
            let mut s = SpliceDiagram::default();
            let id = |i: usize| format!("n{i}");
            for i in 0..k {
                s.nodes.insert(id(i), nodes[i].clone());
            }
            for i in 1..k {
                let parent = attach[i - 1].index(i);
                let (wa, wb) = weights[i - 1];
                s.edges.push(SpliceEdge {
                    a: id(parent),
                    weight_a: wa,
                    b: id(i),
                    weight_b: wb,
                });
            }
            for (node, weight, multiplicity) in &arrows {
                s.arrows.push(SpliceArrow {
                    node: id(node.index(k)),
                    weight: *weight,
                    multiplicity: *multiplicity,
                    label: None,
                });
            }
            if let Some(m) = mark {
                // only an actual leaf may carry the mark in print/parse
                let candidate = id(m.index(k));
                if s.is_leaf(&candidate) {
                    s.distinguished_leaf = Some(candidate);
                }
            }
            s
        })
}

/// A structurally well-formed dual graph, cycles and self-edges included.
fn loose_dual() -> impl Strategy<Value = DualGraph> {
    let node = (0i64..2, -9i64..0, prop::option::of(1i64..20)).prop_map(
        |(genus, self_int, multiplicity)| DualNode {
            genus,
            self_int,
            multiplicity,
            mark: Mark::Interior,
        },
    );
    (2usize..8, prop::collection::vec(node, 8))
        .prop_flat_map(|(k, nodes)| {
            let edges = prop::collection::vec(
                (any::<prop::sample::Index>(), any::<prop::sample::Index>()),
                1..10,
            );
            let arrows = prop::collection::vec(
                (any::<prop::sample::Index>(), 0i64..3),
                0..3,
            );
            let infinity = prop::option::of(any::<prop::sample::Index>());
            let section = prop::option::of(any::<prop::sample::Index>());
            (Just(k), Just(nodes), edges, arrows, infinity, section)
        })
        .prop_map(|(k, nodes, edges, arrows, infinity, section)| {
            let mut g = DualGraph::default();
            let id = |i: usize| format!("n{i}");
            for i in 0..k {
                g.nodes.insert(id(i), nodes[i].clone());
            }
            for (a, b) in &edges {
                g.edges.push((id(a.index(k)), id(b.index(k))));
            }
            for (node, multiplicity) in &arrows {
                g.arrows.push(Arrow {
                    node: id(node.index(k)),
                    multiplicity: *multiplicity,
                    label: None,
                });
            }
            if let Some(i) = infinity {
                g.nodes.get_mut(&id(i.index(k))).unwrap().mark = Mark::LineAtInfinity;
            }
            if let Some(i) = section {
                let target = g.nodes.get_mut(&id(i.index(k))).unwrap();
                if target.mark == Mark::Interior {
                    target.mark = Mark::Section;
                }
            }
            g
        })
}

fn loose_finite() -> impl Strategy<Value = FiniteFibreData> {
    prop::collection::vec(1i64..9, 1..6).prop_map(|counts| {
        FiniteFibreData::new(
            counts.iter().enumerate().map(|(i, &n)| (format!("c{i}"), n)).collect(),
        )
        .unwrap()
    })
}

fn loose_family() -> impl Strategy<Value = FamilyParams> {
    prop::collection::vec(coprime_pair(9), 1..=2)
        .prop_map(|pairs| FamilyParams::new(pairs).unwrap())
}

fn any_document() -> impl Strategy<Value = Document> {
    prop_oneof![
        loose_splice().prop_map(Document::Splice),
        loose_dual().prop_map(Document::Dual),
        loose_finite().prop_map(Document::FiniteFibres),
        loose_family().prop_map(Document::Family),
    ]
}

// ---------------------------------------------------------------------------
// parser totality and round trips

proptest! {
    /// Arbitrary text never panics the parser.
    #[test]
    fn parser_is_total_on_noise(text in ".{0,400}") {
        let _ = parse(&text);
    }

    /// Token soup close to the real grammar never panics the parser either.
    #[test]
    fn parser_is_total_on_near_grammar(lines in prop::collection::vec(
        prop_oneof![
            Just("splice".to_string()),
            Just("dual".to_string()),
            "node [a-z]{1,3}( genus=-?[0-9]{1,3})?( selfint=-?[0-9]{1,3})?",
            "leaf [a-z]{1,3}( mark=[a-z]{1,9})?",
            "edge [a-z]{1,3} [a-z]{1,3}( w=-?[0-9]{1,3})?( wa=[0-9]{1,3})?",
            "arrow [a-z]{1,3}( mult=-?[0-9]{1,2})?( label=[a-z]{1,4})?",
            "fibre [a-z]{1,3} nodes=[0-9]{1,2}",
            "pairs=[0-9]{1,2},[0-9]{1,2}( [0-9]{1,2},[0-9]{1,2})?",
            "# [ a-z=0-9]{0,20}",
            Just(String::new()),
        ],
        0..12,
    )) {
        let _ = parse(&lines.join("\n"));
    }

    /// Printing any document and parsing it back is the identity on the
    /// parsed form, and printing is a fixpoint.
    #[test]
    fn print_parse_round_trips(doc in any_document()) {
        let printed = print(&doc);
        let reparsed = parse(&printed).expect("printed documents always parse");
        prop_assert_eq!(print(&reparsed), printed);
        let again = parse(&print(&reparsed)).unwrap();
        prop_assert_eq!(again, reparsed);
    }

    /// Rational values survive their text form, mixed-number form included.
    #[test]
    fn rational_text_round_trips(n in -9999i64..9999, d in 1i64..999) {
        let value = rational(n, d);
        prop_assert_eq!(parse_rational(&value.to_string()).unwrap(), value.clone());
        // mixed form "w r/d" for the same value
        let whole = n.div_euclid(d);
        let rest = n.rem_euclid(d);
        if whole != 0 && rest != 0 && n > 0 {
            let mixed = format!("{whole} {rest}/{d}");
            prop_assert_eq!(parse_rational(&mixed).unwrap(), value);
        }
    }
}

// ---------------------------------------------------------------------------
// the two pictures agree

proptest! {
    /// Expanding a family's splice diagram to the full dual graph preserves
    /// the Euler characteristic and every retained multiplicity, and the
    /// contraction back is the identity.
    #[test]
    fn expansion_preserves_chi_and_multiplicities(params in loose_family()) {
        let s = family_splice(&params).unwrap();
        // not every coprime combination is the splice of a plumbing; the
        // residue congruence at the junctions can be unsolvable
        let expanded = dual_from_splice(&s);
        prop_assume!(expanded.is_ok(), "parameters must be realizable");
        let g = expanded.unwrap();
        prop_assert_eq!(
            euler_characteristic_splice(&s).unwrap(),
            euler_characteristic_dual(&g).unwrap()
        );
        for id in s.nodes.keys() {
            prop_assert_eq!(
                node_multiplicity(&s, id).unwrap(),
                g.multiplicity(id).unwrap()
            );
        }
        prop_assert_eq!(splice_from_dual(&g).unwrap().normalized(), s.normalized());
    }
}

// ---------------------------------------------------------------------------
// blow-down confluence

/// Insert one exceptional curve in the middle of the given edge.
fn blow_up(g: &mut DualGraph, edge_idx: usize, name: String) {
    let (a, b) = g.edges[edge_idx].clone();
    let ma = g.multiplicity(&a).unwrap();
    let mb = g.multiplicity(&b).unwrap();
    g.nodes.get_mut(&a).unwrap().self_int -= 1;
    g.nodes.get_mut(&b).unwrap().self_int -= 1;
    g.nodes.insert(name.clone(), DualNode::rational(-1, ma + mb));
    g.edges[edge_idx] = (a, name.clone());
    g.edges.push((name, b));
}

fn relabel(g: &DualGraph, f: impl Fn(&String) -> String) -> DualGraph {
    let mut out = DualGraph::default();
    for (id, node) in &g.nodes {
        out.nodes.insert(f(id), node.clone());
    }
    for (a, b) in &g.edges {
        out.edges.push((f(a), f(b)));
    }
    for arrow in &g.arrows {
        let mut arrow = arrow.clone();
        arrow.node = f(&arrow.node);
        out.arrows.push(arrow);
    }
    out
}

proptest! {
    /// Blowing up a minimal graph along any sequence of edges (nested
    /// blow-ups included) and blowing back down restores the original graph,
    /// no matter how relabeling scrambles the contraction order.
    #[test]
    fn blow_down_is_confluent(
        params in loose_family(),
        picks in prop::collection::vec((any::<prop::sample::Index>(), any::<u64>()), 1..5),
    ) {
        let expanded = dual_from_splice(&family_splice(&params).unwrap());
        prop_assume!(expanded.is_ok(), "parameters must be realizable");
        let base = expanded.unwrap();
        prop_assert!(blow_down(&base).unwrap().contracted.is_empty());

        let mut blown = base.clone();
        for (i, (edge, _)) in picks.iter().enumerate() {
            let idx = edge.index(blown.edges.len());
            blow_up(&mut blown, idx, format!("exc{i}"));
        }

        let direct = blow_down(&blown).unwrap();
        prop_assert_eq!(direct.graph.normalized(), base.normalized());
        prop_assert_eq!(direct.contracted.len(), picks.len());

        // scramble the id order that drives candidate selection
        let salts: BTreeMap<&String, u64> = blown
            .nodes
            .keys()
            .zip(picks.iter().cycle().map(|(_, salt)| *salt))
            .map(|(id, salt)| (id, salt))
            .collect();
        let forward: BTreeMap<String, String> = blown
            .nodes
            .keys()
            .map(|id| (id.clone(), format!("s{:016x}.{id}", salts[id])))
            .collect();
        let back: BTreeMap<String, String> =
            forward.iter().map(|(k, v)| (v.clone(), k.clone())).collect();
        let scrambled = relabel(&blown, |id| forward[id].clone());
        let outcome = blow_down(&scrambled).unwrap();
        let restored = relabel(&outcome.graph, |id| back[id].clone());
        prop_assert_eq!(restored.normalized(), base.normalized());

        let mut c1: Vec<String> = direct.contracted.clone();
        let mut c2: Vec<String> = outcome.contracted.iter().map(|id| back[id].clone()).collect();
        c1.sort();
        c2.sort();
        prop_assert_eq!(c1, c2);
    }
}

// ---------------------------------------------------------------------------
// the tower oracle agrees with the efficient route

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// On every chain family, the explicit tower of prime cyclic covers
    /// lands on the same degree and the same stable fibre as the
    /// twist-arithmetic route.
    #[test]
    fn tower_agrees_with_fast_route(pairs in prop::collection::vec(coprime_pair(4), 1..=2)) {
        let params = FamilyParams::new(pairs).unwrap();
        let s = family_splice(&params).unwrap();
        let expanded = dual_from_splice(&s);
        prop_assume!(expanded.is_ok(), "parameters must be realizable");
        let fast = stable_reduce(&s).unwrap();

        let tower = reduce_to_stable(&expanded.unwrap()).unwrap();
        prop_assert_eq!(tower.degree, fast.cover_degree);
        prop_assert!(fibres_isomorphic(&tower.fibre, &fast.stable_fibre));
        prop_assert!(validate_stable(&tower.fibre).is_empty());
    }
}

// ---------------------------------------------------------------------------
// family sweeps as properties

proptest! {
    /// One-pair families over a wider parameter range than the fixtures:
    /// topology, degree, psi and the canonical self-intersection in closed
    /// form.
    #[test]
    fn one_pair_family_closed_forms((p, q) in coprime_pair(30)) {
        let params = FamilyParams::new(vec![(p, q)]).unwrap();
        let s = family_splice(&params).unwrap();
        let chi = p + q - p * q;
        prop_assert_eq!(euler_characteristic_splice(&s).unwrap(), chi);

        let report = stable_reduce(&s).unwrap();
        prop_assert_eq!(report.cover_degree, p * q);
        prop_assert!(report.stable_fibre.nodes.is_empty());
        prop_assert_eq!(arithmetic_genus(&report.stable_fibre), (p - 1) * (q - 1) / 2);

        let canonical = canonical_from_report(&report).unwrap();
        let k2_rel = k_squared_relative(&canonical).unwrap();
        prop_assert_eq!(k2_rel, rational_int(chi * chi - 1));

        let finite = FiniteFibreData::generic(chi);
        let inv = invariant_set(&report, &finite, &canonical).unwrap();
        let bounds = family_bounds(&params).unwrap();
        prop_assert_eq!(inv.psi, vec![rational(1, p * q)]);
        prop_assert_eq!(&inv.kappa1, &bounds.kappa1_bound);
        prop_assert_eq!(&inv.delta, &bounds.delta_bound);
        prop_assert_eq!(&inv.lambda1 * rational_int(12), &inv.kappa1 + &inv.delta);
    }

    /// Two-pair families: the degree-invariant node data and the closed form
    /// for delta at generic finite fibres.
    #[test]
    fn two_pair_family_closed_forms(
        (p1, q1) in coprime_pair(9),
        (p2, q2) in coprime_pair(9),
    ) {
        let params = FamilyParams::new(vec![(p1, q1), (p2, q2)]).unwrap();
        let s = family_splice(&params).unwrap();
        let report = stable_reduce(&s).unwrap();
        let d = report.cover_degree;

        prop_assert_eq!(report.stable_fibre.nodes.len() as i64, q2);
        for n in &report.stable_fibre.nodes {
            prop_assert_eq!(
                rational(n.order, d),
                rational(p1 * q1 * q2 - p2, p1 * q1 * p2 * q2)
            );
        }

        let chi = euler_characteristic_splice(&s).unwrap();
        prop_assert_eq!(chi, q2 * (p1 + q1 - p1 * q1) + p2 * (1 - q2));

        let canonical = canonical_from_report(&report).unwrap();
        let finite = FiniteFibreData::generic(chi);
        let inv = invariant_set(&report, &finite, &canonical).unwrap();
        let closed = rational_int(1 - chi) - rational(1, p1 * q1) + rational(q2, p2);
        prop_assert_eq!(&inv.delta, &closed);

        let bounds = family_bounds(&params).unwrap();
        prop_assert_eq!(&inv.delta, &bounds.delta_bound);
        prop_assert!(inv.kappa1 <= bounds.kappa1_bound);
        prop_assert!((&inv.lambda1 * rational_int(d)).is_integer());
    }
}

// ---------------------------------------------------------------------------
// cyclic fibres through the tower

/// A cycle of `n` multiplicity-1 rational curves with a transversal section:
/// already semi-stable, so the tower only has to contract the chain down to
/// one curve with a self-node of order `n`.
#[test]
fn cycle_fibres_reduce_to_a_self_node() {
    for n in 2usize..=8 {
        let mut g = DualGraph::default();
        for i in 0..n {
            let self_int = if i == 0 { -3 } else { -2 };
            g.nodes.insert(format!("u{i}"), DualNode::rational(self_int, 1));
        }
        for i in 0..n {
            g.edges.push((format!("u{i}"), format!("u{}", (i + 1) % n)));
        }
        g.arrows.push(Arrow { node: "u0".into(), multiplicity: 1, label: Some("s".into()) });

        let reduction = reduce_to_stable(&g).unwrap();
        assert_eq!(reduction.degree, 1, "n = {n}");
        assert_eq!(reduction.fibre.components.len(), 1, "n = {n}");
        assert_eq!(reduction.fibre.components[0].genus, 0, "n = {n}");
        let nodes = &reduction.fibre.nodes;
        assert_eq!(nodes.len(), 1, "n = {n}");
        assert_eq!(nodes[0].order as usize, n, "n = {n}");
        assert_eq!(nodes[0].a, nodes[0].b, "n = {n}");
        assert_eq!(arithmetic_genus(&reduction.fibre), 1, "n = {n}");
        assert!(validate_stable(&reduction.fibre).is_empty(), "n = {n}");
    }
}
