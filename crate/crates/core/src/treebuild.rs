//! Persistent phylogenies: construction from a reduction trace, validation
//! and export.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::matrix::{BinaryMatrix, PreprocessReport};
use crate::redblack::{escape, RbGraph, ReductionError, Sign, SignedCharacter};
use crate::reduce::ReductionTrace;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub state: Vec<bool>,
    pub species: Vec<usize>,
    pub parent: Option<usize>,
    /// Signed characters on the edge from the parent, in order.
    pub label: Vec<SignedCharacter>,
    pub children: Vec<usize>,
}

/// A rooted tree whose nodes carry character states. Node 0 is the root;
/// a tree for a matrix without species has no nodes at all.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersistentTree {
    nodes: Vec<TreeNode>,
    species_names: Vec<String>,
    character_names: Vec<String>,
}

impl PersistentTree {
    pub fn with_root(m: &BinaryMatrix, root_state: Vec<bool>) -> Self {
        Self {
            nodes: vec![TreeNode {
                state: root_state,
                species: Vec::new(),
                parent: None,
                label: Vec::new(),
                children: Vec::new(),
            }],
            species_names: m.species_names().to_vec(),
            character_names: m.character_names().to_vec(),
        }
    }

    pub fn empty(m: &BinaryMatrix) -> Self {
        Self {
            nodes: Vec::new(),
            species_names: m.species_names().to_vec(),
            character_names: m.character_names().to_vec(),
        }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &TreeNode {
        &self.nodes[i]
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> Option<&TreeNode> {
        self.nodes.first()
    }

    pub fn species_names(&self) -> &[String] {
        &self.species_names
    }

    pub fn character_names(&self) -> &[String] {
        &self.character_names
    }

    pub fn add_child(&mut self, parent: usize, label: Vec<SignedCharacter>, state: Vec<bool>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            state,
            species: Vec::new(),
            parent: Some(parent),
            label,
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        id
    }

    /// Child of `parent` obtained by applying `label` to its state.
    pub fn extend(&mut self, parent: usize, label: Vec<SignedCharacter>) -> usize {
        let mut state = self.nodes[parent].state.clone();
        for sc in &label {
            state[sc.character] = sc.is_positive();
        }
        self.add_child(parent, label, state)
    }

    pub fn place_species(&mut self, node: usize, species: usize) {
        self.nodes[node].species.push(species);
    }

    /// All signed characters on edges, in preorder.
    pub fn labels_preorder(&self) -> Vec<SignedCharacter> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let mut stack = vec![0];
        while let Some(v) = stack.pop() {
            out.extend(self.nodes[v].label.iter().copied());
            stack.extend(self.nodes[v].children.iter().rev());
        }
        out
    }

    pub fn count_labels(&self, sign: Sign) -> usize {
        self.nodes
            .iter()
            .flat_map(|n| &n.label)
            .filter(|sc| sc.sign == sign)
            .count()
    }

    fn is_ancestor(&self, a: usize, mut b: usize) -> bool {
        while let Some(p) = self.nodes[b].parent {
            if p == a {
                return true;
            }
            b = p;
        }
        false
    }

    /// Re-expresses a tree built on a preprocessed matrix in terms of the
    /// original matrix: merged columns change together, null characters keep
    /// their root value and null species sit at the root.
    pub fn lift(&self, original: &BinaryMatrix, report: &PreprocessReport) -> PersistentTree {
        let root = original.root_state();
        if self.nodes.is_empty() {
            if original.num_species() == 0 {
                return PersistentTree::empty(original);
            }
            let mut t = PersistentTree::with_root(original, root);
            for &s in &report.removed_null_species {
                t.place_species(0, s);
            }
            return t;
        }
        let groups: Vec<Vec<usize>> = (0..report.kept_characters.len())
            .map(|c| report.merged_into(c))
            .collect();
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let mut state = root.clone();
                for (c, group) in groups.iter().enumerate() {
                    for &o in group {
                        state[o] = n.state[c];
                    }
                }
                let mut species: Vec<usize> =
                    n.species.iter().map(|&s| report.kept_species[s]).collect();
                if i == 0 {
                    species.extend(report.removed_null_species.iter().copied());
                    species.sort_unstable();
                }
                let label = n
                    .label
                    .iter()
                    .flat_map(|sc| {
                        groups[sc.character].iter().map(move |&o| SignedCharacter {
                            character: o,
                            sign: sc.sign,
                        })
                    })
                    .collect();
                TreeNode {
                    state,
                    species,
                    parent: n.parent,
                    label,
                    children: n.children.clone(),
                }
            })
            .collect();
        PersistentTree {
            nodes,
            species_names: original.species_names().to_vec(),
            character_names: original.character_names().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("trace does not replay: {0}")]
    Replay(#[from] ReductionError),
    #[error("species `{name}` was never placed")]
    Unplaced { species: usize, name: String },
    #[error("species `{name}` left the graph at a node whose state differs from its row")]
    Misplaced { species: usize, name: String },
    #[error("trace leaves a nonempty graph")]
    Incomplete,
    #[error("species of one component sit at different nodes")]
    ComponentSpread,
    #[error("built tree is invalid: {0}")]
    Invalid(Violation),
}

/// Replays `trace` on the red-black graph of `m`, growing one tree path per
/// live component. Each signed character becomes its own edge; a species is
/// attached to the node where it drops out of the graph.
pub fn build_tree(m: &BinaryMatrix, trace: &ReductionTrace) -> Result<PersistentTree, BuildError> {
    if m.num_species() == 0 {
        return Ok(PersistentTree::empty(m));
    }
    let mut tree = PersistentTree::with_root(m, m.root_state());
    let mut g = RbGraph::from_matrix(m);
    let mut node_of: BTreeMap<usize, usize> = BTreeMap::new();

    let place = |tree: &mut PersistentTree, node: usize, s: usize| -> Result<(), BuildError> {
        if tree.nodes[node].state.as_slice() != m.row(s) {
            return Err(BuildError::Misplaced {
                species: s,
                name: m.species_name(s).to_string(),
            });
        }
        tree.place_species(node, s);
        Ok(())
    };

    for s in 0..m.num_species() {
        if g.contains_species(s) {
            node_of.insert(s, 0);
        } else {
            place(&mut tree, 0, s)?;
        }
    }

    for (position, sc) in trace.sequence.iter().enumerate() {
        let component = g.component_species(sc.character);
        let at = component
            .iter()
            .map(|s| node_of[s])
            .collect::<BTreeSet<_>>();
        let parent = match at.len() {
            1 => *at.iter().next().unwrap(),
            0 => 0,
            _ => return Err(BuildError::ComponentSpread),
        };
        g.realize_in_place(*sc)
            .map_err(|cause| ReductionError { position, cause })?;
        let child = tree.extend(parent, vec![*sc]);
        for s in component {
            if g.contains_species(s) {
                node_of.insert(s, child);
            } else {
                node_of.remove(&s);
                place(&mut tree, child, s)?;
            }
        }
    }

    if let Some((&s, _)) = node_of.iter().next() {
        return Err(BuildError::Unplaced {
            species: s,
            name: m.species_name(s).to_string(),
        });
    }
    if !g.is_empty() {
        return Err(BuildError::Incomplete);
    }
    validate_tree(&tree, m).map_err(BuildError::Invalid)?;
    Ok(tree)
}

/// The first violated condition of the persistent phylogeny definition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// 1: shape and state lengths, 2: root state, 3: edge labels,
    /// 4: per-character gains and losses, 5: species rows.
    pub condition: u8,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "condition {}: {}", self.condition, self.detail)
    }
}

impl std::error::Error for Violation {}

/// Checks that `t` is a persistent phylogeny for `(M, A)`.
pub fn validate_tree(t: &PersistentTree, m: &BinaryMatrix) -> Result<(), Violation> {
    let fail = |condition: u8, detail: String| Err(Violation { condition, detail });
    let cname = |c: usize| m.character_name(c).to_string();
    let width = m.num_characters();

    if t.nodes.is_empty() {
        if m.num_species() == 0 {
            return Ok(());
        }
        return fail(5, "empty tree for a nonempty matrix".into());
    }

    // 1. Shape: parent links agree with child lists, everything reachable.
    for (i, n) in t.nodes.iter().enumerate() {
        if n.state.len() != width {
            return fail(1, format!("node {i} has {} states, expected {width}", n.state.len()));
        }
        match n.parent {
            None if i != 0 => return fail(1, format!("node {i} has no parent")),
            Some(_) if i == 0 => return fail(1, "root has a parent".into()),
            Some(p) if p >= t.nodes.len() || !t.nodes[p].children.contains(&i) => {
                return fail(1, format!("node {i} is not a child of its parent"))
            }
            _ => {}
        }
        for &c in &n.children {
            if t.nodes.get(c).and_then(|x| x.parent) != Some(i) {
                return fail(1, format!("child {c} of node {i} points elsewhere"));
            }
        }
    }
    let mut reached = vec![false; t.nodes.len()];
    let mut stack = vec![0];
    while let Some(v) = stack.pop() {
        if std::mem::replace(&mut reached[v], true) {
            return fail(1, format!("node {v} reached twice"));
        }
        stack.extend(&t.nodes[v].children);
    }
    if let Some(v) = reached.iter().position(|r| !r) {
        return fail(1, format!("node {v} is unreachable from the root"));
    }

    // 2. Root state.
    if t.nodes[0].state != m.root_state() {
        return fail(2, "root state differs from the active set".into());
    }

    // 3. Each edge flips exactly its labeled characters in their sign's direction.
    let mut gains: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut losses: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, n) in t.nodes.iter().enumerate().skip(1) {
        let parent = &t.nodes[n.parent.unwrap()];
        if n.label.is_empty() {
            return fail(3, format!("edge into node {i} has no label"));
        }
        let mut labeled = BTreeSet::new();
        for sc in &n.label {
            if sc.character >= width || !labeled.insert(sc.character) {
                return fail(3, format!("edge into node {i} has a bad or repeated character"));
            }
            let (from, to) = (!sc.is_positive(), sc.is_positive());
            if parent.state[sc.character] != from || n.state[sc.character] != to {
                return fail(
                    3,
                    format!(
                        "edge into node {i} is labeled {}{} but does not make that change",
                        cname(sc.character),
                        sc.sign.symbol()
                    ),
                );
            }
            match sc.sign {
                Sign::Positive => gains.entry(sc.character).or_default().push(i),
                Sign::Negative => losses.entry(sc.character).or_default().push(i),
            }
        }
        for c in 0..width {
            if !labeled.contains(&c) && parent.state[c] != n.state[c] {
                return fail(3, format!("{} changes on an edge into node {i} without a label", cname(c)));
            }
        }
    }

    // 4. At most one gain and one loss per character, the loss below the gain.
    for c in 0..width {
        let g = gains.get(&c).map_or(&[][..], Vec::as_slice);
        let l = losses.get(&c).map_or(&[][..], Vec::as_slice);
        if g.len() > 1 || l.len() > 1 {
            return fail(4, format!("{} changes state more than twice", cname(c)));
        }
        if m.is_active(c) && !g.is_empty() {
            return fail(4, format!("active character {} is gained", cname(c)));
        }
        if let (Some(&gv), Some(&lv)) = (g.first(), l.first()) {
            if !t.is_ancestor(gv, lv) {
                return fail(4, format!("loss of {} is not below its gain", cname(c)));
            }
        }
    }

    // 5. Every species labels exactly one node whose state is its row.
    let mut placed = vec![0usize; m.num_species()];
    for (i, n) in t.nodes.iter().enumerate() {
        for &s in &n.species {
            if s >= m.num_species() {
                return fail(5, format!("node {i} carries an unknown species"));
            }
            placed[s] += 1;
            if n.state.as_slice() != m.row(s) {
                return fail(5, format!("species {} sits at a node with a different state", m.species_name(s)));
            }
        }
    }
    for (s, &k) in placed.iter().enumerate() {
        if k != 1 {
            return fail(5, format!("species {} labels {k} nodes", m.species_name(s)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeFormat {
    Dot,
    Newick,
}

pub fn export_tree(t: &PersistentTree, format: TreeFormat) -> String {
    match format {
        TreeFormat::Dot => to_dot(t),
        TreeFormat::Newick => to_newick(t),
    }
}

fn node_name(t: &PersistentTree, i: usize) -> String {
    let n = &t.nodes[i];
    if n.species.is_empty() {
        return if i == 0 { "root".to_string() } else { String::new() };
    }
    n.species
        .iter()
        .map(|&s| t.species_names[s].as_str())
        .collect::<Vec<_>>()
        .join("/")
}

fn edge_label(t: &PersistentTree, i: usize) -> String {
    t.nodes[i]
        .label
        .iter()
        .map(|sc| sc.render(&t.character_names))
        .collect::<Vec<_>>()
        .join(",")
}

fn newick_quote(name: &str) -> String {
    if name.chars().any(|ch| "()[]:;,' \t".contains(ch)) {
        format!("'{}'", name.replace('\'', "''"))
    } else {
        name.to_string()
    }
}

fn to_newick(t: &PersistentTree) -> String {
    if t.nodes.is_empty() {
        return String::new();
    }
    fn rec(t: &PersistentTree, i: usize, out: &mut String) {
        let n = &t.nodes[i];
        if !n.children.is_empty() {
            out.push('(');
            for (k, &c) in n.children.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                rec(t, c, out);
            }
            out.push(')');
        }
        out.push_str(&newick_quote(&node_name(t, i)));
        if i != 0 {
            out.push('[');
            out.push_str(&edge_label(t, i));
            out.push(']');
        }
    }
    let mut out = String::new();
    rec(t, 0, &mut out);
    out.push_str(";\n");
    out
}

fn to_dot(t: &PersistentTree) -> String {
    if t.nodes.is_empty() {
        return String::new();
    }
    let mut out = String::from("digraph phylogeny {\n");
    for (i, n) in t.nodes.iter().enumerate() {
        let name = node_name(t, i);
        let style = if n.species.is_empty() {
            ""
        } else {
            ", style=filled, fillcolor=lightgray"
        };
        out.push_str(&format!("  n{i} [label=\"{}\"{style}];\n", escape(&name)));
    }
    for (i, n) in t.nodes.iter().enumerate().skip(1) {
        out.push_str(&format!(
            "  n{} -> n{i} [label=\"{}\"];\n",
            n.parent.unwrap(),
            escape(&edge_label(t, i))
        ));
    }
    out.push_str("}\n");
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("newick position {position}: {message}")]
pub struct NewickError {
    pub position: usize,
    pub message: String,
}

/// Reads a tree written by [`export_tree`] in Newick mode back, resolving
/// names against `m`. Node states are derived from the root state of `m` and
/// the edge labels, so the result can be checked with [`validate_tree`].
pub fn parse_newick(text: &str, m: &BinaryMatrix) -> Result<PersistentTree, NewickError> {
    let mut p = NewickParser {
        chars: text.trim().chars().collect(),
        pos: 0,
        m,
    };
    if p.chars.is_empty() {
        return Ok(PersistentTree::empty(m));
    }
    let parsed = p.subtree()?;
    p.expect(';')?;
    if p.pos != p.chars.len() {
        return Err(p.error("trailing input"));
    }
    if !parsed.label.is_empty() {
        return Err(p.error("root cannot carry an edge label"));
    }
    let mut tree = PersistentTree::with_root(m, m.root_state());
    fn attach(tree: &mut PersistentTree, node: usize, parsed: ParsedNode) {
        tree.nodes[node].species = parsed.species;
        for child in parsed.children {
            let id = tree.extend(node, child.label.clone());
            attach(tree, id, child);
        }
    }
    attach(&mut tree, 0, parsed);
    Ok(tree)
}

struct ParsedNode {
    species: Vec<usize>,
    label: Vec<SignedCharacter>,
    children: Vec<ParsedNode>,
}

struct NewickParser<'a> {
    chars: Vec<char>,
    pos: usize,
    m: &'a BinaryMatrix,
}

impl NewickParser<'_> {
    fn error(&self, message: &str) -> NewickError {
        NewickError {
            position: self.pos,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn expect(&mut self, ch: char) -> Result<(), NewickError> {
        if self.peek() == Some(ch) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{ch}`")))
        }
    }

    fn subtree(&mut self) -> Result<ParsedNode, NewickError> {
        let mut children = Vec::new();
        if self.peek() == Some('(') {
            self.pos += 1;
            loop {
                children.push(self.subtree()?);
                match self.peek() {
                    Some(',') => self.pos += 1,
                    Some(')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.error("expected `,` or `)`")),
                }
            }
        }
        let name = self.name()?;
        let label = if self.peek() == Some('[') {
            self.pos += 1;
            let start = self.pos;
            while self.peek().is_some_and(|c| c != ']') {
                self.pos += 1;
            }
            let body: String = self.chars[start..self.pos].iter().collect();
            self.expect(']')?;
            self.signed_list(&body)?
        } else {
            Vec::new()
        };
        let species = if name.is_empty() {
            Vec::new()
        } else {
            let mut out = Vec::new();
            for part in name.split('/') {
                match self.m.species_index(part) {
                    Ok(s) => out.push(s),
                    Err(_) if part == "root" && name == "root" => {}
                    Err(_) => return Err(self.error(&format!("unknown species `{part}`"))),
                }
            }
            out
        };
        Ok(ParsedNode {
            species,
            label,
            children,
        })
    }

    fn name(&mut self) -> Result<String, NewickError> {
        if self.peek() == Some('\'') {
            self.pos += 1;
            let mut out = String::new();
            loop {
                match self.peek() {
                    None => return Err(self.error("unterminated quoted name")),
                    Some('\'') if self.chars.get(self.pos + 1) == Some(&'\'') => {
                        out.push('\'');
                        self.pos += 2;
                    }
                    Some('\'') => {
                        self.pos += 1;
                        return Ok(out);
                    }
                    Some(c) => {
                        out.push(c);
                        self.pos += 1;
                    }
                }
            }
        }
        let start = self.pos;
        while self.peek().is_some_and(|c| !"()[]:;,".contains(c)) {
            self.pos += 1;
        }
        Ok(self.chars[start..self.pos].iter().collect::<String>().trim().to_string())
    }

    fn signed_list(&self, body: &str) -> Result<Vec<SignedCharacter>, NewickError> {
        body.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|tok| {
                let (name, sign) = if let Some(n) = tok.strip_suffix('+') {
                    (n, Sign::Positive)
                } else if let Some(n) = tok.strip_suffix('-') {
                    (n, Sign::Negative)
                } else {
                    return Err(self.error(&format!("`{tok}` has no sign")));
                };
                let character = self
                    .m
                    .character_index(name)
                    .map_err(|e| self.error(&e.to_string()))?;
                Ok(SignedCharacter { character, sign })
            })
            .collect()
    }
}
