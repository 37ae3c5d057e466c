//! The long route to the stable fibre: actually build the tower of
//! prime-degree cyclic branched covers over the dual graph, resolving the
//! quotient singularities and contracting what becomes contractible at each
//! stage, and confirm it lands on the same stable fibre as the fast route.
//!
//! Run with `cargo run --example oracle_tower`.

use std::fs;

use stablered::calculus::splice_from_dual;
use stablered::cover::reduce_to_stable;
use stablered::model::fibres_isomorphic;
use stablered::reduction::stable_reduce;
use stablered::text::{parse, Document};

fn main() -> stablered::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/running_example.dual");
    let text = fs::read_to_string(path).expect("fixture exists");
    let dual = match parse(&text)? {
        Document::Dual(g) => g,
        _ => unreachable!(),
    };
    println!(
        "input dual graph: {} curves, {} intersections, 1 section",
        dual.nodes.len(),
        dual.edges.len()
    );

    // The cover tower picks one prime divisor of the remaining fibre
    // multiplicities at a time and passes to the corresponding cyclic cover,
    // until every component has multiplicity one.
    let reduction = reduce_to_stable(&dual)?;
    println!("total cover degree: {}", reduction.degree);
    for (i, step) in reduction.steps.iter().enumerate() {
        println!(
            "\nstep {}: degree-{} cover, branched over {:?}",
            i + 1,
            step.prime,
            step.branch_nodes
        );
        println!(
            "  {} curves before, {} after",
            step.before.nodes.len(),
            step.after.nodes.len()
        );
        for line in &step.log {
            println!("  | {line}");
        }
    }

    println!("\nstable fibre after the tower:");
    for c in &reduction.fibre.components {
        println!("  component {} of genus {}", c.id, c.genus);
    }
    println!("  node orders: {:?}", reduction.fibre.node_orders());

    // The fast route computes the same fibre from the splice diagram alone,
    // without ever constructing a cover.
    let splice = splice_from_dual(&dual)?;
    let report = stable_reduce(&splice)?;
    assert_eq!(report.cover_degree, reduction.degree);
    assert!(fibres_isomorphic(&report.stable_fibre, &reduction.fibre));
    println!(
        "\nfast route agrees: degree {}, isomorphic stable fibre",
        report.cover_degree
    );

    Ok(())
}
