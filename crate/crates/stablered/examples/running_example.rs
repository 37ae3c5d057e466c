//! End-to-end walk through one fibration: from its splice diagram at
//! infinity, through the boundary decomposition and the semistable cover, to
//! the stable fibre and the moduli intersection numbers.
//!
//! The example is the curve family whose link at infinity has two junctions
//! (monodromy orders 12 and 10) connected over a determinant-6 edge, with one
//! section.  Its generic fibre has genus 4 and one point at infinity.
//!
//! Run with `cargo run --example running_example`.

use std::fs;

use stablered::calculus::genus_and_points_splice;
use stablered::invariants::{
    canonical_from_report, invariant_set, k_squared_relative, suzuki_relation,
    wolpert_positivity,
};
use stablered::reduction::stable_reduce;
use stablered::text::{parse, Document};

fn fixture(name: &str) -> String {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    fs::read_to_string(format!("{path}/{name}")).expect("fixture exists")
}

fn main() -> stablered::Result<()> {
    let splice = match parse(&fixture("running_example.sd"))? {
        Document::Splice(s) => s,
        _ => unreachable!(),
    };
    let finite = match parse(&fixture("running_example.ff"))? {
        Document::FiniteFibres(f) => f,
        _ => unreachable!(),
    };

    // Topology of the generic fibre.
    let (genus, n_points) = genus_and_points_splice(&splice)?;
    println!("generic fibre: genus {genus}, {n_points} point(s) at infinity");

    // The boundary of a tubular neighbourhood of the fibre at infinity
    // decomposes into fibred pieces, one per junction, glued along tori.
    let report = stable_reduce(&splice)?;
    println!("\nfibred pieces of the boundary:");
    for piece in &report.pieces {
        println!(
            "  at {}: {} component(s), genus {}, {} boundary circle(s), monodromy order {}",
            piece.anchor,
            piece.component_count,
            piece.component_genus(),
            piece.boundary_circles,
            piece.monodromy_order,
        );
    }
    println!("\nfractional twists along the gluing tori:");
    for t in &report.edge_twists {
        println!(
            "  {} -- {}: twist {}, {} node(s) of order {} downstairs",
            t.a, t.b, t.twist, t.node_count, t.node_order
        );
    }
    for t in &report.boundary_twists {
        println!("  section {}: twist {}", t.arrow, t.twist);
    }

    // Pulling back over a degree-d base change makes the family semistable;
    // the fibre over the puncture becomes a stable curve whose nodes remember
    // the cyclic quotient singularities of the total space.
    println!("\nsemistable cover degree: {}", report.cover_degree);
    let fibre = &report.stable_fibre;
    println!("stable fibre:");
    for c in &fibre.components {
        println!("  component {} of genus {}", c.id, c.genus);
    }
    for n in &fibre.nodes {
        println!("  node {} -- {} of order {}", n.a, n.b, n.order);
    }
    for m in &fibre.marked_points {
        println!("  marked point {} on {}", m.label, m.component);
    }

    // The canonical class of the semistable model is pinned down by the
    // adjunction relations; from it comes the relative self-intersection.
    let canonical = canonical_from_report(&report)?;
    println!("\ncanonical multiplicities (relative canonical divisor):");
    for c in &canonical.components {
        println!("  {}: k = {}, multiplicity in D = {}", c.id, c.k, c.d_mult);
    }
    for s in &canonical.sections {
        println!("  section {}: k = {}, self-intersection {}", s.label, s.k, s.self_int);
    }
    let k2 = k_squared_relative(&canonical)?;
    println!("relative canonical self-intersection: {k2}");

    // Intersection numbers of the induced map to the moduli space of stable
    // curves, computed in exact rational arithmetic.  The boundary count
    // combines the contributions of the finite singular fibres with the
    // fractional contribution of the stable fibre over infinity.
    let inv = invariant_set(&report, &finite, &canonical)?;
    println!("\nmoduli invariants (degree {} base):", inv.cover_degree);
    println!("  delta   = {}", inv.delta);
    println!("  kappa1  = {}", inv.kappa1);
    println!("  lambda1 = {}", inv.lambda1);
    for (i, psi) in inv.psi.iter().enumerate() {
        println!("  psi_{}   = {}", i + 1, psi);
    }
    println!("  sigma/d = {}", inv.sigma_over_d);

    // Two classical consistency checks.
    let suzuki = suzuki_relation(&finite, 2 - 2 * genus - n_points);
    println!(
        "\nvanishing-cycle count {} matches the Euler defect {} (residue {})",
        suzuki.vanishing_cycles,
        suzuki.expected,
        suzuki.residue()
    );
    let wolpert = wolpert_positivity(&inv);
    println!("Wolpert combination kappa1 + sum(psi) = {} (> 0)", wolpert.value);
    assert!(suzuki.passes() && wolpert.is_positive());

    Ok(())
}
