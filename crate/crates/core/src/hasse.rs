//! Maximal characters, the Hasse diagram of species states over them, chains
//! and the safe-chain / safe-source tests that pick where a reduction starts.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::matrix::LookupError;
use crate::redblack::{escape, CReduction, RbGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("chain enumeration exceeded the cap of {cap} paths")]
pub struct ChainOverflow {
    pub cap: usize,
}

/// Inactive characters whose column in the associated matrix is not strictly
/// contained in the column of another inactive character. Active characters
/// take no part in the comparison.
pub fn maximal_characters(g: &RbGraph) -> BTreeSet<usize> {
    let columns: Vec<(usize, bool, BTreeSet<usize>)> = g
        .characters()
        .map(|c| (c, g.is_active(c) == Some(true), g.species_having(c)))
        .collect();
    columns
        .iter()
        .filter(|(_, active, _)| !active)
        .filter(|(c, _, sc)| {
            !columns.iter().any(|(d, active, sd)| {
                !active && d != c && sc.len() < sd.len() && sc.is_subset(sd)
            })
        })
        .map(|(c, _, _)| *c)
        .collect()
}

/// `G|C'`.
pub fn induced_subgraph(g: &RbGraph, chars: &BTreeSet<usize>) -> Result<RbGraph, LookupError> {
    g.induced_subgraph(chars)
}

/// The maximal reducible graph `G|C_M`.
pub fn maximal_subgraph(g: &RbGraph) -> RbGraph {
    g.induced_subgraph(&maximal_characters(g))
        .expect("maximal characters belong to the graph")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HasseNode {
    /// Sorted characters of the state.
    pub state: Vec<usize>,
    /// Species sharing the state, ascending.
    pub species: Vec<usize>,
}

/// Covering-relation DAG of the distinct species states of a graph.
///
/// Nodes are sorted lexicographically by state, so node order is the
/// deterministic tie-break used everywhere downstream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HasseDiagram {
    nodes: Vec<HasseNode>,
    arcs: Vec<(usize, usize)>,
    successors: Vec<Vec<usize>>,
    indegree: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Chain {
    pub nodes: Vec<usize>,
}

impl Chain {
    pub fn source(&self) -> usize {
        self.nodes[0]
    }

    pub fn is_trivial(&self) -> bool {
        self.nodes.len() == 1
    }
}

/// Builds the diagram of `gm`, with `C(s)` read from the associated matrix.
pub fn build_diagram(gm: &RbGraph) -> HasseDiagram {
    let mut by_state: std::collections::BTreeMap<Vec<usize>, Vec<usize>> = Default::default();
    for s in gm.species() {
        let state: Vec<usize> = gm.characters_of(s).into_iter().collect();
        by_state.entry(state).or_default().push(s);
    }
    let nodes: Vec<HasseNode> = by_state
        .into_iter()
        .map(|(state, species)| HasseNode { state, species })
        .collect();
    let sets: Vec<BTreeSet<usize>> = nodes
        .iter()
        .map(|n| n.state.iter().copied().collect())
        .collect();
    let below = |a: usize, b: usize| sets[a].len() < sets[b].len() && sets[a].is_subset(&sets[b]);

    let k = nodes.len();
    let mut arcs = Vec::new();
    let mut successors = vec![Vec::new(); k];
    let mut indegree = vec![0; k];
    for u in 0..k {
        for v in 0..k {
            if below(u, v) && !(0..k).any(|w| below(u, w) && below(w, v)) {
                arcs.push((u, v));
                successors[u].push(v);
                indegree[v] += 1;
            }
        }
    }
    HasseDiagram {
        nodes,
        arcs,
        successors,
        indegree,
    }
}

impl HasseDiagram {
    pub fn nodes(&self) -> &[HasseNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &HasseNode {
        &self.nodes[i]
    }

    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Characters gained along arc `(u, v)`, ascending.
    pub fn arc_label(&self, u: usize, v: usize) -> Vec<usize> {
        self.nodes[v]
            .state
            .iter()
            .filter(|c| self.nodes[u].state.binary_search(c).is_err())
            .copied()
            .collect()
    }

    pub fn sources(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.indegree[i] == 0).collect()
    }

    pub fn sinks(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.successors[i].is_empty())
            .collect()
    }

    /// A diagram with no arcs consists only of trivial chains.
    pub fn is_degenerate(&self) -> bool {
        self.arcs.is_empty()
    }

    /// All source-to-sink paths, lazily, in lexicographic node order.
    pub fn chains(&self) -> ChainIter<'_> {
        ChainIter {
            diagram: self,
            sources: self.sources().into_iter().rev().collect(),
            stack: Vec::new(),
        }
    }

    /// Chains starting at `source`.
    pub fn chains_from(&self, source: usize) -> ChainIter<'_> {
        ChainIter {
            diagram: self,
            sources: vec![source],
            stack: Vec::new(),
        }
    }

    /// Collects every chain, failing once more than `cap` are produced.
    pub fn chains_capped(&self, cap: usize) -> Result<Vec<Chain>, ChainOverflow> {
        let mut out = Vec::new();
        for ch in self.chains() {
            if out.len() == cap {
                return Err(ChainOverflow { cap });
            }
            out.push(ch);
        }
        Ok(out)
    }

    /// The c-reduction of a chain: the source's characters, then each arc
    /// label in path order, ascending within a state or label.
    pub fn chain_creduction(&self, chain: &Chain) -> CReduction {
        let mut chars = self.nodes[chain.source()].state.clone();
        for w in chain.nodes.windows(2) {
            chars.extend(self.arc_label(w[0], w[1]));
        }
        CReduction::positives(chars)
    }

    /// Graphviz rendering; sources are drawn bold, sinks double-bordered.
    pub fn to_dot(&self, species_names: &[String], character_names: &[String]) -> String {
        let sources = self.sources();
        let sinks = self.sinks();
        let mut out = String::from("digraph hasse {\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let state: Vec<&str> = n.state.iter().map(|&c| character_names[c].as_str()).collect();
            let members: Vec<&str> = n.species.iter().map(|&s| species_names[s].as_str()).collect();
            let mut attrs = Vec::new();
            if sources.contains(&i) {
                attrs.push("style=bold");
            }
            if sinks.contains(&i) {
                attrs.push("peripheries=2");
            }
            let extra = if attrs.is_empty() {
                String::new()
            } else {
                format!(", {}", attrs.join(", "))
            };
            out.push_str(&format!(
                "  n{i} [label=\"{{{}}}\\n{}\"{extra}];\n",
                escape(&state.join(",")),
                escape(&members.join(","))
            ));
        }
        for &(u, v) in &self.arcs {
            let label: Vec<&str> = self
                .arc_label(u, v)
                .into_iter()
                .map(|c| character_names[c].as_str())
                .collect();
            out.push_str(&format!(
                "  n{u} -> n{v} [label=\"{}\"];\n",
                escape(&label.join(","))
            ));
        }
        out.push_str("}\n");
        out
    }
}

pub struct ChainIter<'a> {
    diagram: &'a HasseDiagram,
    sources: Vec<usize>,
    // Path so far, with the index of the next successor to try at each node.
    stack: Vec<(usize, usize)>,
}

impl Iterator for ChainIter<'_> {
    type Item = Chain;

    fn next(&mut self) -> Option<Chain> {
        loop {
            if self.stack.is_empty() {
                let s = self.sources.pop()?;
                self.stack.push((s, 0));
            }
            let (node, next) = *self.stack.last().unwrap();
            let succ = &self.diagram.successors[node];
            if succ.is_empty() {
                let chain = Chain {
                    nodes: self.stack.iter().map(|(n, _)| *n).collect(),
                };
                self.stack.pop();
                return Some(chain);
            }
            if next < succ.len() {
                self.stack.last_mut().unwrap().1 += 1;
                self.stack.push((succ[next], 0));
            } else {
                self.stack.pop();
            }
        }
    }
}

/// A chain is safe when its c-reduction is feasible on `gm` and leaves no
/// red Σ-graph.
pub fn is_safe_chain(gm: &RbGraph, diagram: &HasseDiagram, chain: &Chain) -> bool {
    match gm.apply_creduction(&diagram.chain_creduction(chain)) {
        Ok((g, _)) => !g.has_red_sigma(),
        Err(_) => false,
    }
}

/// Realizes the characters of `state` in `g`, ascending, and reports whether
/// that is feasible without creating a red Σ-graph.
pub fn realizes_without_sigma(g: &RbGraph, state: &[usize]) -> bool {
    let inactive = state.iter().copied().filter(|&c| g.is_active(c) == Some(false));
    match g.apply_creduction(&CReduction::positives(inactive)) {
        Ok((h, _)) => !h.has_red_sigma(),
        Err(_) => false,
    }
}

/// Per-source outcome of [`analyze_sources`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SourceVerdict {
    pub node: usize,
    /// Some chain from this source is safe in `G|C_M` (non-degenerate case).
    pub has_safe_chain: bool,
    /// Realizing the source in `G` leaves no red Σ-graph.
    pub sigma_safe: bool,
    /// The source state equals the inactive character set of a species of `G`.
    pub is_species: bool,
    pub safe: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SourceAnalysis {
    pub degenerate: bool,
    pub chains_enumerated: usize,
    pub verdicts: Vec<SourceVerdict>,
}

impl SourceAnalysis {
    pub fn safe_sources(&self) -> Vec<usize> {
        self.verdicts
            .iter()
            .filter(|v| v.safe)
            .map(|v| v.node)
            .collect()
    }
}

/// Cap on enumerated chains for a graph: `n * m^2`.
pub fn chain_cap(g: &RbGraph) -> usize {
    let n = g.species().count().max(1);
    let m = g.characters().count().max(1);
    n * m * m
}

/// Classifies every source of `diagram`, the diagram of `G|C_M`.
pub fn analyze_sources(
    g: &RbGraph,
    diagram: &HasseDiagram,
    cap: usize,
) -> Result<SourceAnalysis, ChainOverflow> {
    let gm = maximal_subgraph(g);
    let degenerate = diagram.is_degenerate();
    let species_states: BTreeSet<Vec<usize>> = g
        .species()
        .map(|s| {
            g.neighbors_of_species(s)
                .into_iter()
                .flatten()
                .copied()
                .filter(|&c| g.is_active(c) == Some(false))
                .collect()
        })
        .collect();

    let mut enumerated = 0;
    let mut verdicts = Vec::new();
    for source in diagram.sources() {
        let has_safe_chain = if degenerate {
            true
        } else {
            let mut found = false;
            for chain in diagram.chains_from(source) {
                enumerated += 1;
                if enumerated > cap {
                    return Err(ChainOverflow { cap });
                }
                if is_safe_chain(&gm, diagram, &chain) {
                    found = true;
                    break;
                }
            }
            found
        };
        let state = &diagram.node(source).state;
        let sigma_safe = has_safe_chain && realizes_without_sigma(g, state);
        verdicts.push(SourceVerdict {
            node: source,
            has_safe_chain,
            sigma_safe,
            is_species: species_states.contains(state),
            safe: sigma_safe,
        });
    }
    if degenerate {
        enumerated = verdicts.len();
        // Sources that are species of G take precedence over those that are not.
        if verdicts.iter().any(|v| v.is_species) {
            for v in &mut verdicts {
                v.safe = v.safe && v.is_species;
            }
        }
    }
    Ok(SourceAnalysis {
        degenerate,
        chains_enumerated: enumerated,
        verdicts,
    })
}

/// Safe sources of `diagram` for `g`, in node order (ascending by state).
pub fn safe_sources(g: &RbGraph, diagram: &HasseDiagram) -> Result<Vec<usize>, ChainOverflow> {
    Ok(analyze_sources(g, diagram, chain_cap(g))?.safe_sources())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::tests::example;
    use crate::matrix::BinaryMatrix;

    fn set(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    fn example_graph() -> RbGraph {
        RbGraph::from_matrix(&example())
    }

    #[test]
    fn maximal_characters_of_worked_example() {
        // c8 only meets s1, which sits in its own component.
        assert_eq!(maximal_characters(&example_graph()), set(&[1, 2, 7]));
        let main = example_graph().connected_components().remove(1);
        assert_eq!(maximal_characters(&main), set(&[1, 2]));
    }

    #[test]
    fn disjoint_characters_are_all_maximal() {
        let m = BinaryMatrix::from_digits(&[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]], &[]);
        assert_eq!(maximal_characters(&RbGraph::from_matrix(&m)), set(&[0, 1, 2]));
    }

    #[test]
    fn active_columns_do_not_block_maximality() {
        // c1 active with column {s1,s2}; c2 inactive with column {s1}.
        let m = BinaryMatrix::from_digits(&[&[1, 1], &[1, 0], &[0, 0]], &[0]);
        let g = RbGraph::from_matrix(&m);
        assert_eq!(maximal_characters(&g), set(&[1]));
    }

    #[test]
    fn induced_subgraph_on_maximal_characters() {
        let g = example_graph();
        let gm = induced_subgraph(&g, &set(&[1, 2])).unwrap();
        assert_eq!(gm.species().collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
        assert_eq!(gm.characters().collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(induced_subgraph(&g, &g.characters().collect()).unwrap(), g);
        assert!(induced_subgraph(&g, &BTreeSet::new()).unwrap().is_empty());
        assert!(induced_subgraph(&g, &set(&[99])).is_err());
    }

    // The worked example without the component {s1, c8}.
    fn example_main() -> RbGraph {
        example_graph().connected_components().remove(1)
    }

    fn example_diagram() -> HasseDiagram {
        build_diagram(&maximal_subgraph(&example_main()))
    }

    #[test]
    fn diagram_of_worked_example() {
        let p = example_diagram();
        assert_eq!(
            p.nodes(),
            &[
                HasseNode { state: vec![1], species: vec![3] },
                HasseNode { state: vec![1, 2], species: vec![2, 4, 5] },
                HasseNode { state: vec![2], species: vec![1] },
            ]
        );
        assert_eq!(p.arcs(), &[(0, 1), (2, 1)]);
        assert_eq!(p.sources(), vec![0, 2]);
        assert_eq!(p.sinks(), vec![1]);
        assert!(!p.is_degenerate());
    }

    #[test]
    fn identical_states_make_one_node() {
        let m = BinaryMatrix::from_digits(&[&[1, 1], &[1, 1]], &[]);
        let p = build_diagram(&RbGraph::from_matrix(&m));
        assert_eq!(p.nodes().len(), 1);
        assert!(p.is_degenerate());
        assert_eq!(p.chains().count(), 1);
    }

    #[test]
    fn nested_states_make_a_path() {
        let m = BinaryMatrix::from_digits(&[&[1, 0, 0], &[1, 1, 0], &[1, 1, 1]], &[]);
        let p = build_diagram(&RbGraph::from_matrix(&m));
        assert_eq!(p.arcs(), &[(0, 1), (1, 2)]);
        assert_eq!(p.arc_label(0, 1), vec![1]);
        assert_eq!(p.arc_label(1, 2), vec![2]);
        let chains: Vec<Chain> = p.chains().collect();
        assert_eq!(chains, vec![Chain { nodes: vec![0, 1, 2] }]);
        assert_eq!(p.chain_creduction(&chains[0]), CReduction::positives([0, 1, 2]));
    }

    #[test]
    fn chains_of_worked_example() {
        let p = example_diagram();
        let chains: Vec<Chain> = p.chains().collect();
        // Node 0 is s4's state {c2}, node 2 is s2's state {c3}.
        assert_eq!(
            chains,
            vec![Chain { nodes: vec![0, 1] }, Chain { nodes: vec![2, 1] }]
        );
        assert_eq!(p.chain_creduction(&chains[1]), CReduction::positives([2, 1]));
        assert_eq!(p.chain_creduction(&chains[0]), CReduction::positives([1, 2]));
    }

    #[test]
    fn degenerate_and_empty_diagrams() {
        let m = BinaryMatrix::from_digits(&[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]], &[]);
        let p = build_diagram(&RbGraph::from_matrix(&m));
        assert!(p.is_degenerate());
        let chains: Vec<Chain> = p.chains().collect();
        assert_eq!(chains.len(), 3);
        assert!(chains.iter().all(Chain::is_trivial));
        assert_eq!(p.chain_creduction(&chains[0]), CReduction::positives([0]));

        let empty = build_diagram(&RbGraph::from_matrix(&BinaryMatrix::empty()));
        assert!(empty.is_empty());
        assert_eq!(empty.chains().count(), 0);
        assert!(empty.is_degenerate());
    }

    #[test]
    fn trivial_chain_creduction_lists_state() {
        let m = BinaryMatrix::from_digits(&[&[1, 1]], &[]);
        let p = build_diagram(&RbGraph::from_matrix(&m));
        let ch = p.chains().next().unwrap();
        assert_eq!(p.chain_creduction(&ch), CReduction::positives([0, 1]));
    }

    #[test]
    fn chain_cap_reports_overflow() {
        let p = example_diagram();
        assert_eq!(p.chains_capped(1), Err(ChainOverflow { cap: 1 }));
        assert_eq!(p.chains_capped(2).unwrap().len(), 2);
    }

    #[test]
    fn both_chains_of_worked_example_are_safe() {
        let gm = maximal_subgraph(&example_main());
        let p = build_diagram(&gm);
        for ch in p.chains() {
            assert!(is_safe_chain(&gm, &p, &ch), "{ch:?}");
        }
    }

    #[test]
    fn single_character_chain_is_safe() {
        let m = BinaryMatrix::from_digits(&[&[1], &[0], &[1]], &[]);
        let gm = RbGraph::from_matrix(&m);
        let p = build_diagram(&gm);
        let ch = p.chains().next().unwrap();
        assert!(is_safe_chain(&gm, &p, &ch));
    }

    #[test]
    fn dot_export_marks_sources_and_sinks() {
        let g = example_graph();
        let dot = example_diagram().to_dot(g.species_names(), g.character_names());
        assert!(dot.contains("n0 [label=\"{c2}\\ns4\", style=bold]"));
        assert!(dot.contains("n1 [label=\"{c2,c3}\\ns3,s5,s6\", peripheries=2]"));
        assert!(dot.contains("n2 -> n1 [label=\"c2\"]"));
    }
}
