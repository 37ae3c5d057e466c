//! The small exact-arithmetic toolbox underneath everything else:
//! continued fractions and continuants, the path rule for multiplicities,
//! edge determinants, solving a partially weighted dual graph, local
//! resolution chains, and exhaustive blow-down.
//!
//! Run with `cargo run --example calculus_tour`.

use stablered::calculus::{
    analyze_edge, blow_down, chain_determinant, continuant, dual_from_splice, hj_chain,
    negative_continued_fraction, node_multiplicity, solve_multiplicities,
};
use stablered::model::{DualGraph, DualNode};
use stablered::text::{parse, Document};

fn running_splice() -> stablered::SpliceDiagram {
    let src = "\
splice
node A
node B
leaf K mark=infinity
leaf L4
leaf L5
edge A K w=2
edge A L4 w=3
edge A B wa=1 wb=5
edge B L5 w=2
arrow B w=1 mult=1 label=s1
";
    match parse(src).unwrap() {
        Document::Splice(s) => s,
        _ => unreachable!(),
    }
}

fn main() -> stablered::Result<()> {
    // Negative continued fractions: 12/5 = 3 - 1/(2 - 1/3), and the
    // continuant recovers the numerator.  The entries are the (negated)
    // self-intersections of the resolution chain of the 12/5 quotient
    // singularity.
    let bs = negative_continued_fraction(12, 5)?;
    println!("12/5 = {bs:?} as a negative continued fraction");
    assert_eq!(bs, vec![3, 2, 3]);
    assert_eq!(continuant(&bs)?, 12);
    let self_ints: Vec<i64> = bs.iter().map(|b| -b).collect();
    println!(
        "chain with self-intersections {:?} has determinant {}",
        self_ints,
        chain_determinant(&self_ints)?
    );

    // The path rule evaluates the multiplicity of each splice node from the
    // arrows alone.
    let s = running_splice();
    println!("\npath-rule multiplicities of the worked example:");
    for id in ["A", "B", "K", "L4", "L5"] {
        println!("  {id}: {}", node_multiplicity(&s, id)?);
    }

    // Per-edge analysis: multilink multiplicity (annuli over the edge) and
    // the signed edge determinant, whose magnitude is the order of the
    // quotient node the edge leaves on the stable fibre.
    println!("\nedge analysis:");
    for idx in 0..s.edges.len() {
        let e = analyze_edge(&s, idx)?;
        println!(
            "  {} -- {}: multiplicities {}/{}, {} annuli, determinant {}",
            e.a, e.b, e.l_a, e.l_b, e.d_e, e.delta
        );
    }

    // A dual graph missing some multiplicities is completed from the
    // zero-intersection relations.
    let full = dual_from_splice(&s)?;
    let mut stripped = full.clone();
    for node in stripped.nodes.values_mut() {
        node.multiplicity = None;
    }
    let solved = solve_multiplicities(&stripped)?;
    assert_eq!(solved.normalized(), full.normalized());
    println!("\nmultiplicities recovered for all {} curves", solved.nodes.len());

    // Local resolution chain of a cyclic cover: the degree-5 cover of a
    // normal crossing x^2 y^3 needs one exceptional curve.
    let chain = hj_chain(5, 2, 3)?;
    println!("\nresolution of z^5 = x^2 y^3: {chain:?} (self-intersection, multiplicity)");
    assert_eq!(chain, vec![(-5, 1)]);

    // Blow-down: plant an exceptional (-1) curve on an edge by hand, then
    // contract it away again.
    let mut blown = full.clone();
    let (a, b) = blown.edges[0].clone();
    let (ma, mb) = (blown.multiplicity(&a)?, blown.multiplicity(&b)?);
    blown.nodes.get_mut(&a).unwrap().self_int -= 1;
    blown.nodes.get_mut(&b).unwrap().self_int -= 1;
    blown.nodes.insert("E".into(), DualNode::rational(-1, ma + mb));
    blown.edges[0] = (a.clone(), "E".into());
    blown.edges.push(("E".into(), b.clone()));
    let outcome = blow_down(&blown)?;
    assert_eq!(outcome.contracted, vec!["E".to_string()]);
    assert_eq!(outcome.graph.normalized(), full.normalized());
    println!(
        "blow-down contracted {:?} and restored the minimal graph; {} quotient string(s) remain",
        outcome.contracted,
        outcome.strings.len()
    );
    let orders: Vec<i64> = outcome.strings.iter().map(|q| q.order).collect();
    println!("string orders between retained curves: {orders:?}");

    // The same machinery refuses a contraction that would change the genus.
    let mut bad = DualGraph::default();
    bad.nodes.insert("c".into(), DualNode::rational(-1, 2));
    bad.nodes.insert("d".into(), DualNode::rational(-2, 1));
    bad.edges.push(("c".into(), "d".into()));
    bad.edges.push(("c".into(), "d".into()));
    let err = blow_down(&bad).unwrap_err();
    println!("\nrefused: {err}");

    Ok(())
}
