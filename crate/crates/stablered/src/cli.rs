//! Command-line front end: file in, report out.
//!
//! Every computation of the library is reachable through one subcommand.
//! Reports go to standard output (`--format text|json`), diagnostics to
//! standard error, and the exit code classifies the outcome:
//!
//! * `0` — success,
//! * `1` — the input is not a valid diagram (parse or domain error),
//! * `2` — usage error (bad flags, unreadable file),
//! * `3` — internal inconsistency: two routes that must agree disagreed
//!   (in particular an `--oracle` cross-check mismatch).
//!
//! The entry point is [`run`], which is also what the binary calls; tests
//! drive it directly with byte buffers for the two streams.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::calculus::{
    dual_from_splice, euler_characteristic_dual, euler_characteristic_splice,
    genus_and_points_dual, genus_and_points_splice, splice_from_dual,
};
use crate::cover::reduce_to_stable;
use crate::invariants::{
    canonical_from_report, family_bounds, family_splice, invariant_set, suzuki_relation,
    wolpert_positivity, FiniteFibreData,
};
use crate::model::{
    arithmetic_genus, fibres_isomorphic, validate_dual_graph, validate_splice, validate_stable,
    Error, SpliceDiagram,
};
use crate::reduction::{stable_reduce, ReductionReport};
use crate::text::{self, Document, Report, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Parser)]
#[command(
    name = "stablered",
    version,
    about = "Stable reduction data and moduli invariants of polynomial fibrations, \
             from splice diagrams and dual graphs",
    max_term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Output format for reports and converted diagrams
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Finite-fibre data (a finite_fibres document); node counts enter delta
    #[arg(long, global = true, value_name = "PATH")]
    finite: Option<PathBuf>,
    /// Re-derive the stable fibre through the explicit branched-cover tower
    /// and exit 3 if it disagrees with the fast route
    #[arg(long, global = true)]
    oracle: bool,
    /// Suppress the report on standard output; the exit code still carries
    /// the outcome
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the structural relations of a diagram file
    Validate { input: PathBuf },
    /// Euler characteristic, genus and points at infinity of the generic fibre
    Chi { input: PathBuf },
    /// Condense a dual graph into its splice diagram
    Splice { input: PathBuf },
    /// Expand a splice diagram into its full dual graph
    Dual { input: PathBuf },
    /// Boundary pieces, cover degree, twists and the stable fibre data
    StableReduce { input: PathBuf },
    /// Run the branched-cover tower explicitly (the long route)
    Cover { input: PathBuf },
    /// Moduli invariants delta, kappa1, lambda1 and psi
    Invariants { input: PathBuf },
    /// Invariants and closed-form bounds of a chain family
    Family { input: PathBuf },
    /// Run the full consistency suite on one input
    Check { input: PathBuf },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

enum Failure {
    /// The file could not be read at all.
    Io(PathBuf, std::io::Error),
    /// A library error, classified by its variant.
    Model(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

type CmdResult = std::result::Result<i32, Failure>;

fn error_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Domain(_) => EXIT_DOMAIN,
        Error::Internal(_) => EXIT_INTERNAL,
    }
}

/// Parse the argument list and run the selected command, writing the report
/// to `out` and diagnostics to `err`.  Returns the process exit code.
pub fn run(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let rendered = e.render().to_string();
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    EXIT_USAGE
                }
            };
        }
    };
    match run_command(&cli, out, err) {
        Ok(code) => code,
        Err(Failure::Io(path, e)) => {
            let _ = writeln!(err, "cannot read {}: {e}", path.display());
            EXIT_USAGE
        }
        Err(Failure::Model(e)) => {
            let _ = writeln!(err, "{e}");
            error_code(&e)
        }
    }
}

fn run_command(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    match &cli.command {
        Cmd::Validate { input } => cmd_validate(cli, input, out, err),
        Cmd::Chi { input } => cmd_chi(cli, input, out),
        Cmd::Splice { input } => cmd_splice(cli, input, out),
        Cmd::Dual { input } => cmd_dual(cli, input, out),
        Cmd::StableReduce { input } => cmd_stable_reduce(cli, input, out),
        Cmd::Cover { input } => cmd_cover(cli, input, out),
        Cmd::Invariants { input } => cmd_invariants(cli, input, out),
        Cmd::Family { input } => cmd_family(cli, input, out),
        Cmd::Check { input } => cmd_check(cli, input, out, err),
    }
}

fn read_document(path: &Path) -> std::result::Result<Document, Failure> {
    let contents = std::fs::read_to_string(path)
        .map_err(|e| Failure::Io(path.to_path_buf(), e))?;
    Ok(text::parse(&contents)?)
}

/// View any diagram-like document as a splice diagram: splice documents
/// directly, dual graphs through condensation, families through their
/// construction.
fn to_splice(doc: &Document) -> std::result::Result<SpliceDiagram, Error> {
    match doc {
        Document::Splice(s) => Ok(s.clone()),
        Document::Dual(g) => splice_from_dual(g),
        Document::Family(p) => family_splice(p),
        Document::FiniteFibres(_) => Err(Error::domain(
            "a finite_fibres document carries node counts, not a diagram; pass it via --finite",
        )),
    }
}

fn load_finite(cli: &Cli) -> std::result::Result<Option<FiniteFibreData>, Failure> {
    match &cli.finite {
        None => Ok(None),
        Some(path) => match read_document(path)? {
            Document::FiniteFibres(f) => Ok(Some(f)),
            other => Err(Failure::Model(Error::domain(format!(
                "--finite expects a finite_fibres document, got '{}'",
                other.kind()
            )))),
        },
    }
}

fn emit_report(cli: &Cli, report: &Report, out: &mut dyn Write) -> CmdResult {
    if cli.quiet {
        return Ok(EXIT_OK);
    }
    let rendered = match cli.format {
        Format::Text => report.to_text(),
        Format::Json => {
            let json = serde_json::to_string_pretty(&report.to_json())
                .map_err(|e| Error::internal(format!("JSON encoding failed: {e}")))?;
            format!("{json}\n")
        }
    };
    let _ = write!(out, "{rendered}");
    Ok(EXIT_OK)
}

fn emit_document(cli: &Cli, doc: &Document, out: &mut dyn Write) -> CmdResult {
    if cli.quiet {
        return Ok(EXIT_OK);
    }
    let rendered = match cli.format {
        Format::Text => text::print(doc),
        Format::Json => {
            let json = serde_json::to_string_pretty(&text::document_json(doc))
                .map_err(|e| Error::internal(format!("JSON encoding failed: {e}")))?;
            format!("{json}\n")
        }
    };
    let _ = write!(out, "{rendered}");
    Ok(EXIT_OK)
}

/// Compare the fast route against the explicit branched-cover tower.
fn oracle_check(s: &SpliceDiagram, r: &ReductionReport) -> std::result::Result<(), Error> {
    let g = dual_from_splice(s)?;
    let tower = reduce_to_stable(&g)?;
    if tower.degree != r.cover_degree {
        return Err(Error::internal(format!(
            "oracle mismatch: the cover tower has degree {}, the fast route {}",
            tower.degree, r.cover_degree
        )));
    }
    if !fibres_isomorphic(&tower.fibre, &r.stable_fibre) {
        return Err(Error::internal(
            "oracle mismatch: the tower's stable fibre is not isomorphic to the fast route's",
        ));
    }
    Ok(())
}

fn cmd_validate(cli: &Cli, input: &Path, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let doc = read_document(input)?;
    let violations = match &doc {
        Document::Dual(g) => validate_dual_graph(g)?,
        Document::Splice(s) => validate_splice(s)?,
        // these validate fully during parsing
        Document::FiniteFibres(_) | Document::Family(_) => Vec::new(),
    };
    let mut report = Report::new();
    report.push("kind", Value::Text(doc.kind().to_string()));
    report.push("valid", Value::Text((violations.is_empty()).to_string()));
    if violations.is_empty() {
        emit_report(cli, &report, out)
    } else {
        for v in &violations {
            let _ = writeln!(err, "{v}");
        }
        emit_report(cli, &report, out)?;
        Ok(EXIT_DOMAIN)
    }
}

fn cmd_chi(cli: &Cli, input: &Path, out: &mut dyn Write) -> CmdResult {
    let doc = read_document(input)?;
    let (chi, genus, points) = match &doc {
        Document::Dual(g) => {
            let chi = euler_characteristic_dual(g)?;
            let (genus, points) = genus_and_points_dual(g)?;
            (chi, genus, points)
        }
        other => {
            let s = to_splice(other)?;
            let chi = euler_characteristic_splice(&s)?;
            let (genus, points) = genus_and_points_splice(&s)?;
            (chi, genus, points)
        }
    };
    emit_report(cli, &text::chi_report(chi, genus, points), out)
}

fn cmd_splice(cli: &Cli, input: &Path, out: &mut dyn Write) -> CmdResult {
    let doc = read_document(input)?;
    let Document::Dual(g) = &doc else {
        return Err(Failure::Model(Error::domain(format!(
            "splice expects a dual document, got '{}'",
            doc.kind()
        ))));
    };
    let s = splice_from_dual(g)?;
    emit_document(cli, &Document::Splice(s), out)
}

fn cmd_dual(cli: &Cli, input: &Path, out: &mut dyn Write) -> CmdResult {
    let doc = read_document(input)?;
    let Document::Splice(s) = &doc else {
        return Err(Failure::Model(Error::domain(format!(
            "dual expects a splice document, got '{}'",
            doc.kind()
        ))));
    };
    let g = dual_from_splice(s)?;
    emit_document(cli, &Document::Dual(g), out)
}

fn cmd_stable_reduce(cli: &Cli, input: &Path, out: &mut dyn Write) -> CmdResult {
    let s = to_splice(&read_document(input)?)?;
    let r = stable_reduce(&s)?;
    if cli.oracle {
        oracle_check(&s, &r)?;
    }
    emit_report(cli, &text::reduction_report(&r), out)
}

fn cmd_cover(cli: &Cli, input: &Path, out: &mut dyn Write) -> CmdResult {
    let doc = read_document(input)?;
    let g = match &doc {
        Document::Dual(g) => g.clone(),
        other => dual_from_splice(&to_splice(other)?)?,
    };
    let tower = reduce_to_stable(&g)?;
    let mut report = Report::new();
    report.push("genus", Value::Int(arithmetic_genus(&tower.fibre)));
    report.push("cover_degree", Value::Int(tower.degree));
    report.push(
        "primes",
        Value::List(tower.steps.iter().map(|s| Value::Int(s.prime)).collect()),
    );
    report.push(
        "node_orders",
        Value::List(tower.fibre.node_orders().into_iter().map(Value::Int).collect()),
    );
    emit_report(cli, &report, out)
}

fn cmd_invariants(cli: &Cli, input: &Path, out: &mut dyn Write) -> CmdResult {
    let s = to_splice(&read_document(input)?)?;
    let r = stable_reduce(&s)?;
    if cli.oracle {
        oracle_check(&s, &r)?;
    }
    let c = canonical_from_report(&r)?;
    let finite = load_finite(cli)?.unwrap_or_default();
    let inv = invariant_set(&r, &finite, &c)?;
    emit_report(cli, &text::invariant_report(&inv), out)
}

fn cmd_family(cli: &Cli, input: &Path, out: &mut dyn Write) -> CmdResult {
    let doc = read_document(input)?;
    let Document::Family(params) = &doc else {
        return Err(Failure::Model(Error::domain(format!(
            "family expects a family document, got '{}'",
            doc.kind()
        ))));
    };
    let s = family_splice(params)?;
    let chi = euler_characteristic_splice(&s)?;
    let r = stable_reduce(&s)?;
    if cli.oracle {
        oracle_check(&s, &r)?;
    }
    let c = canonical_from_report(&r)?;
    // without explicit finite data, assume the generic configuration: every
    // finite singularity a plain node, which attains the delta bound
    let finite = load_finite(cli)?.unwrap_or_else(|| FiniteFibreData::generic(chi));
    let inv = invariant_set(&r, &finite, &c)?;

    let mut report = Report::new();
    report.push("chi", Value::Int(chi));
    report.push("cover_degree", Value::Int(inv.cover_degree));
    report.push(
        "node_orders",
        Value::List(r.stable_fibre.node_orders().into_iter().map(Value::Int).collect()),
    );
    report.push("delta", Value::Rat(inv.delta.clone()));
    report.push("kappa1", Value::Rat(inv.kappa1.clone()));
    report.push("lambda1", Value::Rat(inv.lambda1.clone()));
    report.push("psi", Value::List(inv.psi.iter().map(|p| Value::Rat(p.clone())).collect()));
    report.push("sigma_over_d", Value::Rat(inv.sigma_over_d.clone()));
    if let Ok(bounds) = family_bounds(params) {
        report.push("delta_bound", Value::Rat(bounds.delta_bound));
        report.push("kappa1_bound", Value::Rat(bounds.kappa1_bound));
        report.push("psi1", Value::Rat(bounds.psi1));
        report.push("section_self_int", Value::Int(bounds.section_self_int));
    }
    emit_report(cli, &report, out)
}

fn cmd_check(cli: &Cli, input: &Path, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let doc = read_document(input)?;
    let mut report = Report::new();
    let mut code = EXIT_OK;

    // records one step: ok, a failure (bumping the exit code), or skipped
    let step = |report: &mut Report,
                    err: &mut dyn Write,
                    code: &mut i32,
                    name: &str,
                    outcome: std::result::Result<(), Error>| {
        match outcome {
            Ok(()) => report.push(name, Value::Text("ok".to_string())),
            Err(e) => {
                let _ = writeln!(err, "check {name}: {e}");
                report.push(name, Value::Text("FAIL".to_string()));
                *code = (*code).max(error_code(&e));
            }
        }
    };

    // print round-trip holds for every document kind
    step(&mut report, err, &mut code, "print_roundtrip", {
        let printed = text::print(&doc);
        match text::parse(&printed) {
            Ok(reparsed) if reparsed == doc => Ok(()),
            Ok(_) => Err(Error::internal("print ∘ parse changed the document")),
            Err(e) => Err(Error::internal(format!("canonical print does not reparse: {e}"))),
        }
    });

    match &doc {
        Document::FiniteFibres(_) => {
            step(&mut report, err, &mut code, "structure", Ok(()));
        }
        _ => {
            // structural validation on the document's own terms
            step(&mut report, err, &mut code, "structure", {
                match &doc {
                    Document::Dual(g) => validate_dual_graph(g).map(|v| (v, "dual graph"))
                        .and_then(|(v, what)| {
                            if v.is_empty() {
                                Ok(())
                            } else {
                                Err(Error::domain(format!(
                                    "{what} violates {} relation(s): {}",
                                    v.len(),
                                    v[0]
                                )))
                            }
                        }),
                    Document::Splice(s) => validate_splice(s).and_then(|v| {
                        if v.is_empty() {
                            Ok(())
                        } else {
                            Err(Error::domain(format!(
                                "splice diagram violates {} relation(s): {}",
                                v.len(),
                                v[0]
                            )))
                        }
                    }),
                    _ => Ok(()),
                }
            });

            // topology of the generic fibre
            let chi = match &doc {
                Document::Dual(g) => {
                    let r = euler_characteristic_dual(g)
                        .and_then(|chi| genus_and_points_dual(g).map(|_| chi));
                    step(&mut report, err, &mut code, "topology", r.clone().map(|_| ()));
                    r.ok()
                }
                other => match to_splice(other) {
                    Ok(s) => {
                        let r = euler_characteristic_splice(&s)
                            .and_then(|chi| genus_and_points_splice(&s).map(|_| chi));
                        step(&mut report, err, &mut code, "topology", r.clone().map(|_| ()));
                        r.ok()
                    }
                    Err(e) => {
                        step(&mut report, err, &mut code, "topology", Err(e));
                        None
                    }
                },
            };

            // the efficient route needs a splice picture; a dual graph with
            // cycles only has the long route
            let splice = to_splice(&doc).ok();

            if let Some(s) = &splice {
                step(&mut report, err, &mut code, "expansion_roundtrip", {
                    dual_from_splice(s).and_then(|g| {
                        let back = splice_from_dual(&g)?;
                        if back.normalized() == s.normalized() {
                            Ok(())
                        } else {
                            Err(Error::internal(
                                "condensing the expanded dual graph does not recover the diagram",
                            ))
                        }
                    })
                });
            } else {
                report.push("expansion_roundtrip", Value::Text("skipped".to_string()));
            }

            // reduction: fast route when available, and always the tower
            let fast = splice.as_ref().map(|s| stable_reduce(s));
            let tower = {
                let g = match &doc {
                    Document::Dual(g) => Ok(g.clone()),
                    _ => splice
                        .as_ref()
                        .ok_or_else(|| Error::domain("no diagram to expand"))
                        .and_then(dual_from_splice),
                };
                g.and_then(|g| reduce_to_stable(&g))
            };
            step(&mut report, err, &mut code, "cover_tower", {
                tower.as_ref().map(|_| ()).map_err(Clone::clone).and_then(|()| {
                    let fibre = &tower.as_ref().unwrap().fibre;
                    let violations = validate_stable(fibre);
                    if violations.is_empty() {
                        Ok(())
                    } else {
                        Err(Error::internal(format!(
                            "tower produced an unstable fibre: {}",
                            violations[0]
                        )))
                    }
                })
            });

            match (&fast, &tower) {
                (Some(Ok(r)), Ok(t)) => {
                    step(&mut report, err, &mut code, "oracle_agreement", {
                        if t.degree != r.cover_degree {
                            Err(Error::internal(format!(
                                "tower degree {} vs fast degree {}",
                                t.degree, r.cover_degree
                            )))
                        } else if !fibres_isomorphic(&t.fibre, &r.stable_fibre) {
                            Err(Error::internal("tower and fast stable fibres differ"))
                        } else {
                            Ok(())
                        }
                    });
                }
                (Some(Err(e)), _) => {
                    step(&mut report, err, &mut code, "oracle_agreement", Err(e.clone()));
                }
                _ => report.push("oracle_agreement", Value::Text("skipped".to_string())),
            }

            // canonical class and invariants need the fast route's report
            if let Some(Ok(r)) = &fast {
                let canonical = canonical_from_report(r);
                step(
                    &mut report,
                    err,
                    &mut code,
                    "canonical_class",
                    canonical.as_ref().map(|_| ()).map_err(Clone::clone),
                );
                if let Ok(c) = &canonical {
                    step(&mut report, err, &mut code, "invariants", {
                        let finite = match load_finite(cli) {
                            Ok(Some(f)) => f,
                            Ok(None) => FiniteFibreData::generic(chi.unwrap_or(1)),
                            Err(Failure::Model(e)) => {
                                return Err(Failure::Model(e));
                            }
                            Err(io) => return Err(io),
                        };
                        invariant_set(r, &finite, c).and_then(|inv| {
                            let twelve = crate::model::rational_int(12);
                            if &inv.lambda1 * twelve != &inv.kappa1 + &inv.delta {
                                return Err(Error::internal("lambda1 is not (kappa1+delta)/12"));
                            }
                            if let Some(chi) = chi {
                                let s = suzuki_relation(&finite, chi);
                                if !s.passes() {
                                    return Err(Error::domain(format!(
                                        "finite fibres carry {} vanishing cycles, expected {}",
                                        s.vanishing_cycles, s.expected
                                    )));
                                }
                            }
                            let w = wolpert_positivity(&inv);
                            if !w.is_positive() && !w.is_trivial() {
                                return Err(Error::domain(format!(
                                    "kappa1 + sum(psi) = {} is negative",
                                    w.value
                                )));
                            }
                            Ok(())
                        })
                    });
                } else {
                    report.push("invariants", Value::Text("skipped".to_string()));
                }
            } else {
                report.push("canonical_class", Value::Text("skipped".to_string()));
                report.push("invariants", Value::Text("skipped".to_string()));
            }
        }
    }

    report.push(
        "result",
        Value::Text(if code == EXIT_OK { "ok".to_string() } else { "FAIL".to_string() }),
    );
    emit_report(cli, &report, out)?;
    Ok(code)
}
