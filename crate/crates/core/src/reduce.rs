//! Recursive computation of a successful extended c-reduction.
//!
//! Each level removes a free character, realizes a universal character,
//! splits into components, or realizes the characters of a safe source of
//! the Hasse diagram of the maximal characters. When no safe source exists
//! the graph has no persistent phylogeny and the reduction aborts.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::hasse::{analyze_sources, build_diagram, chain_cap, maximal_subgraph, ChainOverflow};
use crate::redblack::{CReduction, RbGraph, SignedCharacter};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TraceEvent {
    FreeNegative {
        character: usize,
    },
    UniversalPositive {
        character: usize,
    },
    /// The graph fell apart; component `index` (of `count`) starts here.
    ComponentSplit {
        index: usize,
        count: usize,
    },
    /// A safe source was chosen among `candidates`, all given as states.
    SourceRealization {
        state: Vec<usize>,
        candidates: Vec<Vec<usize>>,
        degenerate: bool,
    },
}

/// The extended c-reduction found by [`reduce`], with the branch taken at
/// each step. `events[i].0` is the position in `sequence` where the event's
/// characters begin.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReductionTrace {
    pub sequence: CReduction,
    pub events: Vec<(usize, TraceEvent)>,
}

impl ReductionTrace {
    /// One signed character per line; events as `#` comments before the
    /// character they annotate.
    pub fn to_text(&self, character_names: &[String]) -> String {
        let mut out = String::new();
        let mut events = self.events.iter().peekable();
        for (i, sc) in self.sequence.iter().enumerate() {
            while let Some((_, e)) = events.next_if(|(p, _)| *p == i) {
                out.push_str(&format!("# {}\n", render_event(e, character_names)));
            }
            out.push_str(&sc.render(character_names));
            out.push('\n');
        }
        for (_, e) in events {
            out.push_str(&format!("# {}\n", render_event(e, character_names)));
        }
        out
    }

    pub fn negatives(&self) -> usize {
        self.sequence.negatives().count()
    }
}

fn render_state(state: &[usize], names: &[String]) -> String {
    let v: Vec<&str> = state.iter().map(|&c| names[c].as_str()).collect();
    format!("{{{}}}", v.join(","))
}

fn render_event(e: &TraceEvent, names: &[String]) -> String {
    match e {
        TraceEvent::FreeNegative { character } => format!("free-negative {}", names[*character]),
        TraceEvent::UniversalPositive { character } => {
            format!("universal-positive {}", names[*character])
        }
        TraceEvent::ComponentSplit { index, count } => {
            format!("component-split {} of {}", index + 1, count)
        }
        TraceEvent::SourceRealization {
            state,
            candidates,
            degenerate,
        } => {
            let cands: Vec<String> = candidates.iter().map(|s| render_state(s, names)).collect();
            format!(
                "source-realization {} among [{}]{}",
                render_state(state, names),
                cands.join(" "),
                if *degenerate { " degenerate" } else { "" }
            )
        }
    }
}

/// Why and where a reduction gave up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Abort {
    /// Recursion path, outermost first.
    pub path: Vec<String>,
    pub sources: usize,
    pub degenerate: bool,
}

impl fmt::Display for Abort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "no safe source among {} source(s) of a {}diagram",
            self.sources,
            if self.degenerate { "degenerate " } else { "" }
        )?;
        if !self.path.is_empty() {
            write!(f, " at {}", self.path.join(" / "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReduceError {
    #[error("{0}")]
    Abort(Abort),
    #[error(transparent)]
    ChainOverflow(#[from] ChainOverflow),
    #[error("internal error: recursion exceeded {limit} levels")]
    DepthExceeded { limit: usize },
}

impl ReduceError {
    pub fn is_abort(&self) -> bool {
        matches!(self, ReduceError::Abort(_))
    }
}

struct Reducer {
    trace: ReductionTrace,
    path: Vec<String>,
    limit: usize,
}

impl Reducer {
    fn new(g: &RbGraph) -> Self {
        let n = g.species().count();
        let m = g.characters().count();
        Self {
            trace: ReductionTrace::default(),
            path: Vec::new(),
            limit: 2 * m + n + 1,
        }
    }

    fn event(&mut self, e: TraceEvent) {
        self.trace.events.push((self.trace.sequence.len(), e));
    }

    fn push(&mut self, sc: SignedCharacter) {
        self.trace.sequence.push(sc);
    }

    fn reduce(&mut self, mut g: RbGraph, depth: usize) -> Result<(), ReduceError> {
        if depth > self.limit {
            return Err(ReduceError::DepthExceeded { limit: self.limit });
        }
        // Realization never leaves isolated vertices behind, so there are no
        // singletons to remove here.
        if g.is_empty() {
            return Ok(());
        }
        if let Some(&c) = g.free_characters().first() {
            self.event(TraceEvent::FreeNegative { character: c });
            g.realize_negative_in_place(c).expect("free character");
            self.push(SignedCharacter::negative(c));
            return self.reduce(g, depth + 1);
        }
        if let Some(&c) = g.universal_characters().first() {
            self.event(TraceEvent::UniversalPositive { character: c });
            g.realize_positive_in_place(c).expect("inactive character");
            self.push(SignedCharacter::positive(c));
            return self.reduce(g, depth + 1);
        }
        if !g.is_connected() {
            return self.reduce_split(&g, depth);
        }

        let gm = maximal_subgraph(&g);
        let diagram = build_diagram(&gm);
        let analysis = analyze_sources(&g, &diagram, chain_cap(&g))?;
        let candidates: Vec<Vec<usize>> = analysis
            .safe_sources()
            .into_iter()
            .map(|i| diagram.node(i).state.clone())
            .collect();
        let Some(state) = candidates.first().cloned() else {
            self.path.push(format!("depth {depth}"));
            return Err(ReduceError::Abort(Abort {
                path: std::mem::take(&mut self.path),
                sources: diagram.sources().len(),
                degenerate: analysis.degenerate,
            }));
        };
        self.event(TraceEvent::SourceRealization {
            state: state.clone(),
            candidates,
            degenerate: analysis.degenerate,
        });
        let positives = CReduction::positives(state);
        let (next, extended) = g
            .apply_creduction(&positives)
            .expect("safe source is realizable");
        for sc in extended.iter() {
            self.push(*sc);
        }
        self.reduce(next, depth + 1)
    }

    fn reduce_split(&mut self, g: &RbGraph, depth: usize) -> Result<(), ReduceError> {
        let components = g.connected_components();
        let count = components.len();
        for (index, component) in components.into_iter().enumerate() {
            self.event(TraceEvent::ComponentSplit { index, count });
            self.path.push(format!("component {} of {count}", index + 1));
            self.reduce(component, depth + 1)?;
            self.path.pop();
        }
        Ok(())
    }
}

/// Computes a successful extended c-reduction of `g`, or aborts.
pub fn reduce(g: &RbGraph) -> Result<ReductionTrace, ReduceError> {
    let mut r = Reducer::new(g);
    r.reduce(g.clone(), 0)?;
    Ok(r.trace)
}

/// Reduces each connected component separately and concatenates the traces
/// in component order. A connected graph is reduced directly.
pub fn reduce_components(g: &RbGraph) -> Result<ReductionTrace, ReduceError> {
    let mut r = Reducer::new(g);
    if g.is_connected() {
        r.reduce(g.clone(), 0)?;
    } else {
        r.reduce_split(g, 0)?;
    }
    Ok(r.trace)
}
