//! The `ppp` command line.
//!
//! Exit codes: 0 success, 1 no persistent phylogeny (or an invalid tree for
//! `verify`), 2 input or usage error, 3 cross-check mismatch, 4 oracle over
//! budget, 5 internal error.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::hasse::{build_diagram, maximal_subgraph};
use crate::matrix::{parse_matrix, preprocess, BinaryMatrix};
use crate::oracle::{solve_bruteforce, Verdict, DEFAULT_BUDGET};
use crate::pipeline::{solve, Solution, SolveError};
use crate::redblack::RbGraph;
use crate::reduce::{ReduceError, TraceEvent};
use crate::treebuild::{export_tree, parse_newick, validate_tree, TreeFormat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NO_PHYLOGENY: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;
pub const EXIT_OVER_BUDGET: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Newick,
    Dot,
    Trace,
    JsonSummary,
}

#[derive(Debug, Parser)]
#[command(name = "ppp", version, about = "Persistent phylogenies of binary character matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output format; the default depends on the command.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Comma-separated active characters, replacing any `#active:` line.
    #[arg(long, global = true, value_delimiter = ',', num_args = 0..)]
    pub active: Option<Vec<String>>,
    /// Largest number of unknown cells the oracle will search.
    #[arg(long, global = true, default_value_t = DEFAULT_BUDGET)]
    pub oracle_budget: usize,
    /// After solving, confirm the verdict with the oracle when within budget.
    #[arg(long, global = true)]
    pub cross_check: bool,
    /// Require explicit species and character names.
    #[arg(long, global = true)]
    pub strict_names: bool,
    /// Reserved; the solver is deterministic.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Include wall-clock timings in the JSON summary.
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a persistent phylogeny.
    Solve { input: Option<PathBuf> },
    /// Print the red-black graph.
    InspectGraph { input: Option<PathBuf> },
    /// Print the Hasse diagram of the maximal characters.
    InspectHasse { input: Option<PathBuf> },
    /// Decide solvability by exhaustive completion search.
    Oracle { input: Option<PathBuf> },
    /// Check a Newick tree against a matrix.
    Verify {
        #[arg(long)]
        tree: PathBuf,
        input: Option<PathBuf>,
    },
}

struct Io<'a> {
    stdin: &'a mut dyn Read,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

struct Exit(i32);

type Outcome = Result<i32, Exit>;

macro_rules! fail {
    ($io:expr, $code:expr, $($arg:tt)*) => {{
        let _ = writeln!($io.err, $($arg)*);
        return Err(Exit($code));
    }};
}

/// Runs the command line with explicit streams; returns the exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = out.write_all(text.as_bytes());
            } else {
                let _ = err.write_all(text.as_bytes());
            }
            return code;
        }
    };
    let mut io = Io { stdin, out, err };
    match dispatch(&cli, &mut io) {
        Ok(code) | Err(Exit(code)) => code,
    }
}

fn dispatch(cli: &Cli, io: &mut Io) -> Outcome {
    match &cli.command {
        Command::Solve { input } => cmd_solve(cli, io, input),
        Command::InspectGraph { input } => cmd_inspect_graph(cli, io, input),
        Command::InspectHasse { input } => cmd_inspect_hasse(cli, io, input),
        Command::Oracle { input } => cmd_oracle(cli, io, input),
        Command::Verify { tree, input } => cmd_verify(cli, io, tree, input),
    }
}

fn read_text(io: &mut Io, path: &Option<PathBuf>) -> Result<String, Exit> {
    let mut text = String::new();
    let result = match path {
        Some(p) if p.as_os_str() != "-" => std::fs::read_to_string(p).map(|t| text = t),
        _ => io.stdin.read_to_string(&mut text).map(|_| ()),
    };
    if let Err(e) = result {
        let name = path
            .as_ref()
            .map_or("<stdin>".to_string(), |p| p.display().to_string());
        fail!(io, EXIT_INPUT, "error: cannot read {name}: {e}");
    }
    Ok(text)
}

fn load(cli: &Cli, io: &mut Io, path: &Option<PathBuf>) -> Result<BinaryMatrix, Exit> {
    let text = read_text(io, path)?;
    let mut m = match parse_matrix(&text, cli.strict_names) {
        Ok(m) => m,
        Err(e) => fail!(io, EXIT_INPUT, "error: {e}"),
    };
    if let Some(active) = &cli.active {
        let names: Vec<&str> = active.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
        if let Err(e) = m.set_active_by_name(&names) {
            fail!(io, EXIT_INPUT, "error: --active: {e}");
        }
    }
    Ok(m)
}

fn format_for(cli: &Cli, io: &mut Io, default: Format, allowed: &[Format]) -> Result<Format, Exit> {
    let f = cli.format.unwrap_or(default);
    if !allowed.contains(&f) {
        let name = f.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
        fail!(io, EXIT_INPUT, "error: format `{name}` is not available for this command");
    }
    Ok(f)
}

fn emit(io: &mut Io, text: &str) -> Result<(), Exit> {
    if io.out.write_all(text.as_bytes()).is_err() {
        return Err(Exit(EXIT_INTERNAL));
    }
    Ok(())
}

fn emit_json(io: &mut Io, value: &Value) -> Result<(), Exit> {
    let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
    text.push('\n');
    emit(io, &text)
}

fn names(list: &[usize], all: &[String]) -> Vec<String> {
    list.iter().map(|&i| all[i].clone()).collect()
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1000.0
}

fn cmd_solve(cli: &Cli, io: &mut Io, input: &Option<PathBuf>) -> Outcome {
    use Format::*;
    let format = format_for(cli, io, Newick, &[Newick, Dot, Trace, JsonSummary])?;
    let m = load(cli, io, input)?;
    let start = Instant::now();
    let result = solve(&m);
    let solve_ms = ms(start);

    let cross = if cli.cross_check {
        let start = Instant::now();
        let (pre, _) = preprocess(&m);
        Some((solve_bruteforce(&pre, cli.oracle_budget), ms(start)))
    } else {
        None
    };

    let code = match &result {
        Ok(_) => EXIT_OK,
        Err(e) if e.is_negative() => EXIT_NO_PHYLOGENY,
        Err(_) => EXIT_INTERNAL,
    };

    match &result {
        Ok(_) => {}
        Err(e) if e.is_negative() => {
            let _ = writeln!(io.err, "no persistent phylogeny: {e}");
        }
        Err(e) => {
            let _ = writeln!(io.err, "internal error: {e}");
        }
    }

    let mut mismatch = false;
    if let Some((verdict, _)) = &cross {
        match verdict {
            Verdict::OverBudget { unknowns, budget } => {
                let _ = writeln!(
                    io.err,
                    "cross-check skipped: {unknowns} unknown cells exceed the oracle budget {budget}"
                );
            }
            v if code != EXIT_INTERNAL && v.is_solvable() != result.is_ok() => {
                mismatch = true;
                let _ = writeln!(
                    io.err,
                    "cross-check mismatch: reduction says {}, oracle says {}",
                    if result.is_ok() { "solvable" } else { "unsolvable" },
                    v.name()
                );
            }
            _ => {}
        }
    }

    match format {
        JsonSummary => {
            let mut summary = solve_summary(&m, &result);
            if let Some((verdict, oracle_ms)) = &cross {
                summary["cross_check"] = json!({
                    "oracle": verdict.name(),
                    "agrees": !mismatch,
                });
                if cli.timing {
                    summary["timing_ms"] = json!({ "solve": solve_ms, "oracle": oracle_ms });
                }
            } else if cli.timing {
                summary["timing_ms"] = json!({ "solve": solve_ms });
            }
            emit_json(io, &summary)?;
        }
        Trace => {
            if let Ok(sol) = &result {
                emit(io, &sol.trace.to_text(sol.preprocessed.character_names()))?;
            }
        }
        Newick => {
            if let Ok(sol) = &result {
                emit(io, &export_tree(&sol.tree, TreeFormat::Newick))?;
            }
        }
        Dot => {
            if let Ok(sol) = &result {
                emit(io, &export_tree(&sol.tree, TreeFormat::Dot))?;
            }
        }
    }
    if cli.timing && format != JsonSummary {
        let _ = writeln!(io.err, "solve: {solve_ms:.3} ms");
    }
    Ok(if mismatch { EXIT_MISMATCH } else { code })
}

fn solve_summary(m: &BinaryMatrix, result: &Result<Solution, SolveError>) -> Value {
    let mut v = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "solve",
        "species": m.num_species(),
        "characters": m.num_characters(),
        "active": names(&m.active().iter().copied().collect::<Vec<_>>(), m.character_names()),
    });
    match result {
        Ok(sol) => {
            let cn = sol.preprocessed.character_names();
            let choices: Vec<Value> = sol
                .trace
                .events
                .iter()
                .filter_map(|(pos, e)| match e {
                    TraceEvent::SourceRealization {
                        state,
                        candidates,
                        degenerate,
                    } => Some(json!({
                        "position": pos,
                        "state": names(state, cn),
                        "candidates": candidates.iter().map(|c| names(c, cn)).collect::<Vec<_>>(),
                        "degenerate": degenerate,
                    })),
                    _ => None,
                })
                .collect();
            let events: Vec<Value> = sol
                .trace
                .events
                .iter()
                .map(|(pos, e)| {
                    let mut ev = serde_json::to_value(e).expect("events serialize");
                    ev["position"] = json!(pos);
                    ev
                })
                .collect();
            v["verdict"] = json!("solvable");
            v["preprocessing"] = serde_json::to_value(&sol.report).expect("report serializes");
            v["extended_reduction"] = json!(sol.trace.sequence.render(cn));
            v["negative_characters"] = json!(sol.trace.negatives());
            v["source_choices"] = json!(choices);
            v["events"] = json!(events);
            v["tree_nodes"] = json!(sol.tree.nodes().len());
            v["newick"] = json!(export_tree(&sol.tree, TreeFormat::Newick).trim_end());
        }
        Err(e) => {
            v["verdict"] = json!(if e.is_negative() {
                "no-persistent-phylogeny"
            } else {
                "error"
            });
            v["reason"] = json!(e.to_string());
            if let SolveError::Reduce(ReduceError::Abort(a)) = e {
                v["abort_path"] = json!(a.path);
            }
        }
    }
    v
}

fn cmd_inspect_graph(cli: &Cli, io: &mut Io, input: &Option<PathBuf>) -> Outcome {
    use Format::*;
    let format = format_for(cli, io, Dot, &[Dot, JsonSummary])?;
    let m = load(cli, io, input)?;
    let g = RbGraph::from_matrix(&m);
    match format {
        JsonSummary => {
            let edges: Vec<Value> = g
                .characters()
                .flat_map(|c| {
                    let g = &g;
                    g.neighbors_of_character(c)
                        .into_iter()
                        .flatten()
                        .map(move |&s| {
                            json!({
                                "species": g.species_name(s),
                                "character": g.character_name(c),
                                "color": if g.is_active(c) == Some(true) { "red" } else { "black" },
                            })
                        })
                })
                .collect();
            emit_json(
                io,
                &json!({
                    "schema_version": SCHEMA_VERSION,
                    "command": "inspect-graph",
                    "species": g.species().map(|s| g.species_name(s)).collect::<Vec<_>>(),
                    "characters": g.characters().map(|c| g.character_name(c)).collect::<Vec<_>>(),
                    "edges": edges,
                    "red_sigma": g.find_red_sigma().map(|[s1, c1, s2, c2, s3]| vec![
                        g.species_name(s1), g.character_name(c1), g.species_name(s2),
                        g.character_name(c2), g.species_name(s3),
                    ]),
                }),
            )?;
        }
        _ => emit(io, &g.to_dot())?,
    }
    Ok(EXIT_OK)
}

fn cmd_inspect_hasse(cli: &Cli, io: &mut Io, input: &Option<PathBuf>) -> Outcome {
    use Format::*;
    let format = format_for(cli, io, Dot, &[Dot, JsonSummary])?;
    let m = load(cli, io, input)?;
    let g = RbGraph::from_matrix(&m);
    let diagram = build_diagram(&maximal_subgraph(&g));
    match format {
        JsonSummary => {
            let cn = m.character_names();
            let sn = m.species_names();
            let nodes: Vec<Value> = diagram
                .nodes()
                .iter()
                .map(|n| json!({ "state": names(&n.state, cn), "species": names(&n.species, sn) }))
                .collect();
            emit_json(
                io,
                &json!({
                    "schema_version": SCHEMA_VERSION,
                    "command": "inspect-hasse",
                    "nodes": nodes,
                    "arcs": diagram.arcs(),
                    "sources": diagram.sources(),
                    "sinks": diagram.sinks(),
                    "degenerate": diagram.is_degenerate(),
                }),
            )?;
        }
        _ => emit(io, &diagram.to_dot(m.species_names(), m.character_names()))?,
    }
    Ok(EXIT_OK)
}

fn cmd_oracle(cli: &Cli, io: &mut Io, input: &Option<PathBuf>) -> Outcome {
    use Format::*;
    let format = format_for(cli, io, Trace, &[Trace, Newick, JsonSummary])?;
    let m = load(cli, io, input)?;
    let verdict = solve_bruteforce(&m, cli.oracle_budget);
    let code = match &verdict {
        Verdict::Solvable(_) => EXIT_OK,
        Verdict::Unsolvable => EXIT_NO_PHYLOGENY,
        Verdict::OverBudget { unknowns, budget } => {
            let _ = writeln!(
                io.err,
                "over budget: {unknowns} unknown cells exceed the oracle budget {budget}"
            );
            EXIT_OVER_BUDGET
        }
    };
    match format {
        JsonSummary => {
            let mut v = json!({
                "schema_version": SCHEMA_VERSION,
                "command": "oracle",
                "verdict": verdict.name(),
                "budget": cli.oracle_budget,
            });
            match &verdict {
                Verdict::Solvable(w) => {
                    v["completion"] = json!(w.completion.to_text());
                    v["tree"] = json!(export_tree(&w.tree, TreeFormat::Newick).trim_end());
                }
                Verdict::OverBudget { unknowns, .. } => v["unknowns"] = json!(unknowns),
                Verdict::Unsolvable => {}
            }
            emit_json(io, &v)?;
        }
        Newick => {
            if let Verdict::Solvable(w) = &verdict {
                emit(io, &export_tree(&w.tree, TreeFormat::Newick))?;
            }
        }
        _ => {
            emit(io, &format!("verdict: {}\n", verdict.name()))?;
            if let Verdict::Solvable(w) = &verdict {
                emit(io, &w.completion.to_text())?;
            }
        }
    }
    Ok(code)
}

fn cmd_verify(cli: &Cli, io: &mut Io, tree: &PathBuf, input: &Option<PathBuf>) -> Outcome {
    format_for(cli, io, Format::Trace, &[Format::Trace])?;
    let m = load(cli, io, input)?;
    let text = match std::fs::read_to_string(tree) {
        Ok(t) => t,
        Err(e) => fail!(io, EXIT_INPUT, "error: cannot read {}: {e}", tree.display()),
    };
    let t = match parse_newick(&text, &m) {
        Ok(t) => t,
        Err(e) => fail!(io, EXIT_INPUT, "error: {e}"),
    };
    match validate_tree(&t, &m) {
        Ok(()) => {
            emit(io, "valid\n")?;
            Ok(EXIT_OK)
        }
        Err(v) => {
            emit(io, &format!("invalid: {v}\n"))?;
            Ok(EXIT_NO_PHYLOGENY)
        }
    }
}
