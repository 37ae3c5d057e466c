//! Tour of the diagram text format: parse each kind of document, print it
//! back in canonical form, convert between the two graph pictures, and show
//! what a rejected input looks like.
//!
//! Run with `cargo run --example parse_and_print`.

use stablered::calculus::{dual_from_splice, splice_from_dual};
use stablered::text::{document_json, parse, parse_rational, print, Document};

fn main() -> stablered::Result<()> {
    // A splice diagram is the compact picture: only junctions and leaves
    // survive, and each half-edge carries the determinant of the chain that
    // was contracted into it.  `w=` puts the weight at the first endpoint and
    // leaves 1 at the other; `mark=infinity` names the distinguished leaf
    // (the line at infinity of the compactified plane).
    let src = "\
# two junctions, three leaves, one section arrow
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
    let doc = parse(src)?;
    println!("parsed a {} document; canonical print:\n", doc.kind());
    println!("{}", print(&doc));

    // The same diagram expanded into a full dual graph: every contracted
    // chain is restored, self-intersections and multiplicities are solved
    // for, and the round trip back recovers the splice form.
    let splice = match doc {
        Document::Splice(s) => s,
        _ => unreachable!(),
    };
    let dual = dual_from_splice(&splice)?;
    println!(
        "expanded dual graph: {} curves, {} intersections",
        dual.nodes.len(),
        dual.edges.len()
    );
    let back = splice_from_dual(&dual)?;
    assert_eq!(back.normalized(), splice.normalized());
    println!("splice -> dual -> splice is the identity\n");

    // Dual graphs can also be written directly.  Rational attributes accept
    // `a/b` and mixed `w a/b` forms.
    let dual_doc = Document::Dual(dual);
    let dual_text = print(&dual_doc);
    println!("dual graph as text ({} lines), first five:", dual_text.lines().count());
    for line in dual_text.lines().take(5) {
        println!("  {line}");
    }
    assert_eq!(parse_rational("8 7/30")?, parse_rational("247/30")?);

    // Finite-fibre tables and family descriptions use the same reader.
    for src in [
        "finite_fibres\nfibre c1 nodes=1\nfibre c2 nodes=3\n",
        "family\npairs=3,2 5,2\n",
    ] {
        let doc = parse(src)?;
        println!("\n{} document:\n{}", doc.kind(), print(&doc));
    }

    // Every document also has a structured JSON form (used by `--format json`).
    let json = document_json(&parse("family\npairs=2,3\n")?);
    println!("family as JSON: {json}");

    // Errors carry the offending line; unknown attributes are rejected rather
    // than ignored.
    for bad in [
        "splice\nnode A\nedge A B w=2\n",               // undeclared id
        "splice\nnode A\nnode A\n",                     // duplicate id
        "splice\nnode A genus=1 colour=red\n",          // unknown attribute
        "dual\nnode C selfint=-2 mult=-1\n",            // negative multiplicity
    ] {
        let err = parse(bad).unwrap_err();
        println!("rejected: {err}");
    }

    Ok(())
}
