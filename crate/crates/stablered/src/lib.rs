//! Exact-arithmetic calculus for the fibre at infinity of a polynomial fibration.
//!
//! A polynomial `p: C^2 -> C` compactifies to a fibration over `P^1` after
//! resolving its base points at infinity.  The combinatorics of the resolved
//! fibre over infinity is captured by two equivalent pictures:
//!
//! * a **dual graph**: one node per exceptional curve, decorated with genus,
//!   self-intersection and the multiplicity of the fibration along the curve,
//!   plus *arrows* for the horizontal curves (sections) crossing it, and
//! * a **splice diagram**: the efficient picture that keeps only nodes of
//!   valency other than two (or positive genus) and records the contracted
//!   chains through integer half-edge weights.
//!
//! From either picture this crate computes, all in exact integer/rational
//! arithmetic:
//!
//! * Euler characteristic, genus and number of points at infinity of the
//!   generic fibre ([`calculus`]),
//! * conversions between the two pictures and local resolution data
//!   ([`calculus`]),
//! * the decomposition of the fibred boundary into pieces, the monodromy
//!   orders, fractional Dehn twists, and the stable fibre of the pulled-back
//!   family together with the order of the quotient singularity at each node
//!   ([`reduction`]),
//! * an independent long-route oracle that performs the actual tower of
//!   prime-degree cyclic branched covers, Hirzebruch–Jung resolutions and
//!   blow-downs ([`cover`]), and
//! * the moduli intersection numbers `delta`, `kappa1`, `lambda1` and the
//!   `psi` classes of the induced map to the moduli space of stable curves,
//!   cross-checked through two independent routes ([`invariants`]).
//!
//! Diagrams are read and written through a small line-oriented text format
//! ([`text`]), and every computation is reachable from the `stablered`
//! command-line tool (see `src/main.rs`) or from the runnable programs in
//! `examples/`.
//!
//! ```
//! use stablered::text::{parse, Document};
//! use stablered::reduction::stable_reduce;
//!
//! let src = "\
//! splice
//! node A
//! node B
//! leaf K mark=infinity
//! leaf L4
//! leaf L5
//! edge A K w=2
//! edge A L4 w=3
//! edge A B wa=1 wb=5
//! edge B L5 w=2
//! arrow B w=1 mult=1 label=s1
//! ";
//! let doc = parse(src).unwrap();
//! let splice = match doc { Document::Splice(s) => s, _ => unreachable!() };
//! let report = stable_reduce(&splice).unwrap();
//! assert_eq!(report.cover_degree, 60);
//! ```
//!
//! All public types are plain owned values: they are `Send + Sync`, carry no
//! interior mutability, and operations never mutate their inputs.

pub mod calculus;
pub mod cli;
pub mod cover;
pub mod invariants;
pub mod model;
pub mod reduction;
pub mod text;

pub use model::{DualGraph, Error, Rational, Result, SpliceDiagram, StableFibre};

#[cfg(test)]
pub(crate) mod testutil {
    use crate::model::{SpliceArrow, SpliceDiagram, SpliceEdge, SpliceNode};

    /// The worked example used throughout the unit tests: two junction nodes
    /// with three leaves, the distinguished leaf on the left, and a single
    /// arrow at the right junction.
    pub fn running_example() -> SpliceDiagram {
        let mut s = SpliceDiagram::default();
        for id in ["A", "B", "K", "L4", "L5"] {
            s.nodes.insert(id.into(), SpliceNode::default());
        }
        s.edges.push(SpliceEdge { a: "A".into(), weight_a: 2, b: "K".into(), weight_b: 1 });
        s.edges.push(SpliceEdge { a: "A".into(), weight_a: 3, b: "L4".into(), weight_b: 1 });
        s.edges.push(SpliceEdge { a: "A".into(), weight_a: 1, b: "B".into(), weight_b: 5 });
        s.edges.push(SpliceEdge { a: "B".into(), weight_a: 2, b: "L5".into(), weight_b: 1 });
        s.arrows.push(SpliceArrow {
            node: "B".into(),
            weight: 1,
            multiplicity: 1,
            label: Some("s1".into()),
        });
        s.distinguished_leaf = Some("K".into());
        s
    }
}
