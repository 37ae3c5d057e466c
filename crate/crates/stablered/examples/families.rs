//! The chain families with one point at infinity: sweep the one-pair and
//! two-pair parameter spaces, compare the computed invariants against the
//! closed-form bounds, and show where the bounds are attained.
//!
//! Run with `cargo run --example families`.

use num_integer::Integer;

use stablered::calculus::genus_and_points_splice;
use stablered::invariants::{
    canonical_from_report, family_bounds, family_splice, invariant_set, FamilyParams,
    FiniteFibreData,
};
use stablered::reduction::stable_reduce;

fn main() -> stablered::Result<()> {
    // One pair (p, q): the fibre is a smooth curve with one point at
    // infinity, chi = p + q - pq.  The kappa1 bound is attained exactly when
    // the finite fibres are as generic as possible.
    println!("one-pair families (p, q coprime):");
    println!("{:>5} {:>5} {:>6} {:>8} {:>12} {:>12} {:>8}", "p", "q", "chi", "degree", "kappa1", "bound", "psi1");
    for p in 2..=5i64 {
        for q in 2..=5i64 {
            if p.gcd(&q) != 1 {
                continue;
            }
            let params = FamilyParams::new(vec![(p, q)])?;
            let splice = family_splice(&params)?;
            let bounds = family_bounds(&params)?;
            let report = stable_reduce(&splice)?;
            let canonical = canonical_from_report(&report)?;
            let finite = FiniteFibreData::generic(bounds.chi);
            let inv = invariant_set(&report, &finite, &canonical)?;
            assert_eq!(inv.kappa1, bounds.kappa1_bound, "one-pair families attain the bound");
            assert_eq!(inv.psi, vec![bounds.psi1.clone()]);
            println!(
                "{:>5} {:>5} {:>6} {:>8} {:>12} {:>12} {:>8}",
                p, q, bounds.chi, report.cover_degree, inv.kappa1, bounds.kappa1_bound, bounds.psi1
            );
        }
    }

    // Two pairs: the stable fibre over infinity breaks into 1 + q2
    // components and the delta bound is attained with equality for generic
    // finite fibres.
    println!("\ntwo-pair families ((p1, q1), (p2, q2)):");
    for pairs in [vec![(3, 2), (5, 2)], vec![(2, 3), (3, 2)], vec![(2, 5), (3, 4)]] {
        let params = FamilyParams::new(pairs.clone())?;
        let splice = family_splice(&params)?;
        let bounds = family_bounds(&params)?;
        let report = stable_reduce(&splice)?;
        let canonical = canonical_from_report(&report)?;
        let (genus, _) = genus_and_points_splice(&splice)?;
        let finite = FiniteFibreData::generic(bounds.chi);
        let inv = invariant_set(&report, &finite, &canonical)?;
        println!(
            "  {:?}: chi = {}, genus = {}, degree = {}, stable fibre has {} components / {} nodes",
            pairs,
            bounds.chi,
            genus,
            report.cover_degree,
            report.stable_fibre.components.len(),
            report.stable_fibre.nodes.len(),
        );
        println!(
            "    delta = {} (bound {}), kappa1 = {} (bound {}), lambda1 = {}",
            inv.delta, bounds.delta_bound, inv.kappa1, bounds.kappa1_bound, inv.lambda1
        );
        assert_eq!(inv.delta, bounds.delta_bound, "generic finite data attains the bound");
        assert!(inv.kappa1 <= bounds.kappa1_bound);
    }

    // The section's self-intersection in the minimal model is part of the
    // bound data: it is what converts between psi upstairs and downstairs.
    let params = FamilyParams::new(vec![(3, 2), (5, 2)])?;
    let bounds = family_bounds(&params)?;
    println!(
        "\nsection self-intersection for {:?}: {}",
        params.pairs, bounds.section_self_int
    );

    Ok(())
}
