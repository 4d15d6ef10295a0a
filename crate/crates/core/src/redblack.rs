//! Red-black graphs: the bipartite species/character graph that the
//! reduction algorithm rewrites.
//!
//! An inactive character is joined by black edges to the species that have
//! it; an active character is joined by red edges to the species that lack
//! it. Realizing a signed character rewrites the graph and drops every vertex
//! left isolated, so a graph never stores singletons.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::matrix::{BinaryMatrix, LookupError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
}

impl Sign {
    pub fn symbol(self) -> char {
        match self {
            Sign::Positive => '+',
            Sign::Negative => '-',
        }
    }
}

/// A character index tagged with a gain (`+`) or a loss (`-`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignedCharacter {
    pub character: usize,
    pub sign: Sign,
}

impl SignedCharacter {
    pub fn positive(character: usize) -> Self {
        Self {
            character,
            sign: Sign::Positive,
        }
    }

    pub fn negative(character: usize) -> Self {
        Self {
            character,
            sign: Sign::Negative,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.sign == Sign::Positive
    }

    pub fn render(&self, character_names: &[String]) -> String {
        format!("{}{}", character_names[self.character], self.sign.symbol())
    }
}

/// An ordered sequence of signed characters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct CReduction(pub Vec<SignedCharacter>);

impl CReduction {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn positives<I: IntoIterator<Item = usize>>(chars: I) -> Self {
        Self(chars.into_iter().map(SignedCharacter::positive).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SignedCharacter> {
        self.0.iter()
    }

    pub fn push(&mut self, sc: SignedCharacter) {
        self.0.push(sc);
    }

    pub fn extend_from(&mut self, other: &CReduction) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn negatives(&self) -> impl Iterator<Item = &SignedCharacter> {
        self.0.iter().filter(|sc| !sc.is_positive())
    }

    /// The positive subsequence, i.e. the plain c-reduction.
    pub fn positive_part(&self) -> CReduction {
        CReduction(self.0.iter().copied().filter(SignedCharacter::is_positive).collect())
    }

    /// No character appears twice with the same sign.
    pub fn is_well_formed(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.0.iter().all(|sc| seen.insert(*sc))
    }

    pub fn render(&self, character_names: &[String]) -> Vec<String> {
        self.0.iter().map(|sc| sc.render(character_names)).collect()
    }
}

impl FromIterator<SignedCharacter> for CReduction {
    fn from_iter<I: IntoIterator<Item = SignedCharacter>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RealizeError {
    #[error("character `{0}` is not in the graph")]
    NotFound(String),
    #[error("character `{0}` is already active")]
    AlreadyActive(String),
    #[error("character `{0}` is not active")]
    NotActive(String),
    #[error("character `{0}` is not free in its component")]
    NotFree(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("c-reduction infeasible at position {position}: {cause}")]
pub struct ReductionError {
    pub position: usize,
    pub cause: RealizeError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeColor {
    Black,
    Red,
}

#[derive(Debug, PartialEq, Eq)]
struct Names {
    species: Vec<String>,
    characters: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct CharacterVertex {
    active: bool,
    species: BTreeSet<usize>,
}

/// A red-black graph over the species and characters of some matrix.
///
/// Vertex ids are the row and column indices of the matrix the graph was
/// built from; removed vertices keep their ids reserved.
#[derive(Clone)]
pub struct RbGraph {
    names: Arc<Names>,
    species: BTreeMap<usize, BTreeSet<usize>>,
    characters: BTreeMap<usize, CharacterVertex>,
}

impl PartialEq for RbGraph {
    fn eq(&self, other: &Self) -> bool {
        self.species == other.species && self.characters == other.characters
    }
}

impl Eq for RbGraph {}

impl fmt::Debug for RbGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_map();
        for (c, v) in &self.characters {
            let key = format!(
                "{}{}",
                self.names.characters[*c],
                if v.active { "(red)" } else { "" }
            );
            let val: Vec<&str> = v
                .species
                .iter()
                .map(|s| self.names.species[*s].as_str())
                .collect();
            d.entry(&key, &val);
        }
        d.finish()
    }
}

impl RbGraph {
    /// Builds the graph of `(M, A)`: black edges on the 1-cells of inactive
    /// columns, red edges on the 0-cells of active columns.
    pub fn from_matrix(m: &BinaryMatrix) -> Self {
        let names = Arc::new(Names {
            species: m.species_names().to_vec(),
            characters: m.character_names().to_vec(),
        });
        let mut species: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        let mut characters = BTreeMap::new();
        for c in 0..m.num_characters() {
            let active = m.is_active(c);
            let adj: BTreeSet<usize> = (0..m.num_species())
                .filter(|&s| m.get(s, c) != active)
                .collect();
            if adj.is_empty() {
                continue;
            }
            for &s in &adj {
                species.entry(s).or_default().insert(c);
            }
            characters.insert(
                c,
                CharacterVertex {
                    active,
                    species: adj,
                },
            );
        }
        Self {
            names,
            species,
            characters,
        }
    }

    pub fn species_names(&self) -> &[String] {
        &self.names.species
    }

    pub fn character_names(&self) -> &[String] {
        &self.names.characters
    }

    pub fn character_name(&self, c: usize) -> &str {
        &self.names.characters[c]
    }

    pub fn species_name(&self, s: usize) -> &str {
        &self.names.species[s]
    }

    pub fn character_index(&self, name: &str) -> Result<usize, LookupError> {
        self.names
            .characters
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| LookupError::UnknownCharacter(name.to_string()))
    }

    pub fn is_empty(&self) -> bool {
        self.species.is_empty() && self.characters.is_empty()
    }

    pub fn num_vertices(&self) -> usize {
        self.species.len() + self.characters.len()
    }

    /// A component is nontrivial when it has more than one vertex.
    pub fn is_nontrivial(&self) -> bool {
        self.num_vertices() > 1
    }

    pub fn num_edges(&self, color: EdgeColor) -> usize {
        self.characters
            .values()
            .filter(|v| v.active == (color == EdgeColor::Red))
            .map(|v| v.species.len())
            .sum()
    }

    pub fn species(&self) -> impl Iterator<Item = usize> + '_ {
        self.species.keys().copied()
    }

    pub fn characters(&self) -> impl Iterator<Item = usize> + '_ {
        self.characters.keys().copied()
    }

    pub fn active_characters(&self) -> impl Iterator<Item = usize> + '_ {
        self.characters
            .iter()
            .filter(|(_, v)| v.active)
            .map(|(c, _)| *c)
    }

    pub fn inactive_characters(&self) -> impl Iterator<Item = usize> + '_ {
        self.characters
            .iter()
            .filter(|(_, v)| !v.active)
            .map(|(c, _)| *c)
    }

    pub fn contains_character(&self, c: usize) -> bool {
        self.characters.contains_key(&c)
    }

    pub fn contains_species(&self, s: usize) -> bool {
        self.species.contains_key(&s)
    }

    /// `Some(true)` for an active character, `None` if `c` is absent.
    pub fn is_active(&self, c: usize) -> Option<bool> {
        self.characters.get(&c).map(|v| v.active)
    }

    /// Species adjacent to `c`, whatever the edge color.
    pub fn neighbors_of_character(&self, c: usize) -> Option<&BTreeSet<usize>> {
        self.characters.get(&c).map(|v| &v.species)
    }

    pub fn neighbors_of_species(&self, s: usize) -> Option<&BTreeSet<usize>> {
        self.species.get(&s)
    }

    pub fn edge(&self, s: usize, c: usize) -> Option<EdgeColor> {
        let v = self.characters.get(&c)?;
        v.species.contains(&s).then_some(if v.active {
            EdgeColor::Red
        } else {
            EdgeColor::Black
        })
    }

    /// Column `c` of the associated matrix over the species present:
    /// black neighbors of an inactive character, non-neighbors of an active one.
    pub fn species_having(&self, c: usize) -> BTreeSet<usize> {
        match self.characters.get(&c) {
            None => BTreeSet::new(),
            Some(v) if v.active => self
                .species
                .keys()
                .filter(|s| !v.species.contains(s))
                .copied()
                .collect(),
            Some(v) => v.species.clone(),
        }
    }

    /// `C(s)`: the characters present in the graph that `s` has, according to
    /// the associated matrix.
    pub fn characters_of(&self, s: usize) -> BTreeSet<usize> {
        let Some(adj) = self.species.get(&s) else {
            return BTreeSet::new();
        };
        self.characters
            .iter()
            .filter(|(c, v)| adj.contains(c) != v.active)
            .map(|(c, _)| *c)
            .collect()
    }

    /// The matrix associated with the graph: present species and characters,
    /// `M[s,c] = 1` iff `(s,c)` is black, or `c` is active and `(s,c)` is not
    /// an edge.
    pub fn associated_matrix(&self) -> BinaryMatrix {
        let species: Vec<usize> = self.species().collect();
        let chars: Vec<usize> = self.characters().collect();
        let rows = species
            .iter()
            .map(|s| {
                chars
                    .iter()
                    .map(|c| {
                        let v = &self.characters[c];
                        v.species.contains(s) != v.active
                    })
                    .collect()
            })
            .collect();
        let active = chars
            .iter()
            .enumerate()
            .filter(|(_, c)| self.characters[c].active)
            .map(|(i, _)| i)
            .collect();
        BinaryMatrix::with_names(
            species.iter().map(|&s| self.names.species[s].clone()).collect(),
            chars.iter().map(|&c| self.names.characters[c].clone()).collect(),
            rows,
            active,
        )
    }

    /// Species and characters of the component containing character `c`.
    fn component_of_character(&self, c: usize) -> (BTreeSet<usize>, BTreeSet<usize>) {
        let mut seen_species = vec![false; self.names.species.len()];
        let mut seen_chars = vec![false; self.names.characters.len()];
        let mut stack = vec![c];
        seen_chars[c] = true;
        while let Some(c1) = stack.pop() {
            for &s in &self.characters[&c1].species {
                if seen_species[s] {
                    continue;
                }
                seen_species[s] = true;
                for &c2 in &self.species[&s] {
                    if !seen_chars[c2] {
                        seen_chars[c2] = true;
                        stack.push(c2);
                    }
                }
            }
        }
        let collect = |seen: Vec<bool>| {
            seen.iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(i, _)| i)
                .collect()
        };
        (collect(seen_species), collect(seen_chars))
    }

    /// `D(c)`: the species in the connected component of `c`.
    pub fn component_species(&self, c: usize) -> BTreeSet<usize> {
        if !self.characters.contains_key(&c) {
            return BTreeSet::new();
        }
        self.component_of_character(c).0
    }

    /// Component label per character id, and species count per label.
    fn component_labels(&self) -> (Vec<usize>, Vec<usize>) {
        let mut label = vec![usize::MAX; self.names.characters.len()];
        let mut seen = vec![false; self.names.species.len()];
        let mut sizes = Vec::new();
        let mut stack = Vec::new();
        for &c in self.characters.keys() {
            if label[c] != usize::MAX {
                continue;
            }
            let id = sizes.len();
            let mut count = 0;
            label[c] = id;
            stack.push(c);
            while let Some(c1) = stack.pop() {
                for &s in &self.characters[&c1].species {
                    if seen[s] {
                        continue;
                    }
                    seen[s] = true;
                    count += 1;
                    for &c2 in &self.species[&s] {
                        if label[c2] == usize::MAX {
                            label[c2] = id;
                            stack.push(c2);
                        }
                    }
                }
            }
            sizes.push(count);
        }
        (label, sizes)
    }

    /// Maximal connected subgraphs, ordered by smallest species index.
    pub fn connected_components(&self) -> Vec<RbGraph> {
        let mut seen_species = BTreeSet::new();
        let mut out = Vec::new();
        for &s in self.species.keys() {
            if seen_species.contains(&s) {
                continue;
            }
            let first_char = *self.species[&s].iter().next().expect("no isolated species");
            let (species, chars) = self.component_of_character(first_char);
            seen_species.extend(species.iter().copied());
            out.push(self.restrict(&species, &chars));
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        match self.characters.keys().next() {
            None => self.species.len() <= 1,
            Some(&c) => self.component_of_character(c).0.len() == self.species.len(),
        }
    }

    fn restrict(&self, species: &BTreeSet<usize>, chars: &BTreeSet<usize>) -> RbGraph {
        let mut g = RbGraph {
            names: Arc::clone(&self.names),
            species: BTreeMap::new(),
            characters: BTreeMap::new(),
        };
        for &c in chars {
            let v = &self.characters[&c];
            let adj: BTreeSet<usize> = v.species.intersection(species).copied().collect();
            if adj.is_empty() {
                continue;
            }
            for &s in &adj {
                g.species.entry(s).or_default().insert(c);
            }
            g.characters.insert(
                c,
                CharacterVertex {
                    active: v.active,
                    species: adj,
                },
            );
        }
        g
    }

    /// `G|C'`: the characters of `chars` and the species adjacent to them.
    pub fn induced_subgraph(&self, chars: &BTreeSet<usize>) -> Result<RbGraph, LookupError> {
        for &c in chars {
            if !self.characters.contains_key(&c) {
                return Err(LookupError::UnknownCharacter(
                    self.names
                        .characters
                        .get(c)
                        .cloned()
                        .unwrap_or_else(|| c.to_string()),
                ));
            }
        }
        let species = chars
            .iter()
            .flat_map(|c| self.characters[c].species.iter().copied())
            .collect();
        Ok(self.restrict(&species, chars))
    }

    /// Active characters red-adjacent to every species of their component.
    pub fn free_characters(&self) -> Vec<usize> {
        let (label, sizes) = self.component_labels();
        self.characters
            .iter()
            .filter(|(c, v)| v.active && v.species.len() == sizes[label[**c]])
            .map(|(c, _)| *c)
            .collect()
    }

    /// Inactive characters black-adjacent to every species of their component.
    pub fn universal_characters(&self) -> Vec<usize> {
        let (label, sizes) = self.component_labels();
        self.characters
            .iter()
            .filter(|(c, v)| !v.active && v.species.len() == sizes[label[**c]])
            .map(|(c, _)| *c)
            .collect()
    }

    /// An induced red path `s1 - c1 - s2 - c2 - s3`, if one exists.
    ///
    /// Two active characters induce such a path exactly when their red
    /// neighborhoods intersect and neither contains the other.
    pub fn find_red_sigma(&self) -> Option<[usize; 5]> {
        let active: Vec<(usize, &BTreeSet<usize>)> = self
            .characters
            .iter()
            .filter(|(_, v)| v.active)
            .map(|(c, v)| (*c, &v.species))
            .collect();
        for (i, &(c1, n1)) in active.iter().enumerate() {
            for &(c2, n2) in &active[i + 1..] {
                let Some(&mid) = n1.intersection(n2).next() else {
                    continue;
                };
                let left = n1.difference(n2).next();
                let right = n2.difference(n1).next();
                if let (Some(&s1), Some(&s3)) = (left, right) {
                    return Some([s1, c1, mid, c2, s3]);
                }
            }
        }
        None
    }

    pub fn has_red_sigma(&self) -> bool {
        self.find_red_sigma().is_some()
    }

    fn drop_isolated(&mut self, species: impl IntoIterator<Item = usize>) {
        for s in species {
            if self.species.get(&s).is_some_and(BTreeSet::is_empty) {
                self.species.remove(&s);
            }
        }
    }

    fn not_found(&self, c: usize) -> RealizeError {
        RealizeError::NotFound(
            self.names
                .characters
                .get(c)
                .cloned()
                .unwrap_or_else(|| c.to_string()),
        )
    }

    pub(crate) fn realize_positive_in_place(&mut self, c: usize) -> Result<(), RealizeError> {
        let Some(v) = self.characters.get(&c) else {
            return Err(self.not_found(c));
        };
        if v.active {
            return Err(RealizeError::AlreadyActive(self.names.characters[c].clone()));
        }
        let component = self.component_of_character(c).0;
        let old = std::mem::take(&mut self.characters.get_mut(&c).unwrap().species);
        let red: BTreeSet<usize> = component.difference(&old).copied().collect();
        for s in &old {
            self.species.get_mut(s).unwrap().remove(&c);
        }
        for s in &red {
            self.species.get_mut(s).unwrap().insert(c);
        }
        if red.is_empty() {
            self.characters.remove(&c);
        } else {
            let v = self.characters.get_mut(&c).unwrap();
            v.active = true;
            v.species = red;
        }
        self.drop_isolated(old);
        Ok(())
    }

    pub(crate) fn realize_negative_in_place(&mut self, c: usize) -> Result<(), RealizeError> {
        let Some(v) = self.characters.get(&c) else {
            return Err(self.not_found(c));
        };
        if !v.active {
            return Err(RealizeError::NotActive(self.names.characters[c].clone()));
        }
        if self.component_of_character(c).0.len() != v.species.len() {
            return Err(RealizeError::NotFree(self.names.characters[c].clone()));
        }
        let old = self.characters.remove(&c).unwrap().species;
        for s in &old {
            self.species.get_mut(s).unwrap().remove(&c);
        }
        self.drop_isolated(old);
        Ok(())
    }

    pub(crate) fn realize_in_place(&mut self, sc: SignedCharacter) -> Result<(), RealizeError> {
        match sc.sign {
            Sign::Positive => self.realize_positive_in_place(sc.character),
            Sign::Negative => self.realize_negative_in_place(sc.character),
        }
    }

    /// Realizes `c+`: `c` turns red towards the species of its component that
    /// lack it, and loses its black edges.
    pub fn realize_positive(&self, c: usize) -> Result<RbGraph, RealizeError> {
        let mut g = self.clone();
        g.realize_positive_in_place(c)?;
        Ok(g)
    }

    /// Realizes `c-` for an active character that is free in its component.
    pub fn realize_negative(&self, c: usize) -> Result<RbGraph, RealizeError> {
        let mut g = self.clone();
        g.realize_negative_in_place(c)?;
        Ok(g)
    }

    pub fn realize(&self, sc: SignedCharacter) -> Result<RbGraph, RealizeError> {
        let mut g = self.clone();
        g.realize_in_place(sc)?;
        Ok(g)
    }

    /// Realizes every free character negatively, ascending, until none is
    /// left; returns the negatives applied.
    pub(crate) fn flush_free_in_place(&mut self, out: &mut CReduction) {
        loop {
            let free = self.free_characters();
            if free.is_empty() {
                return;
            }
            for c in free {
                // Removing one free character never makes another non-free.
                self.realize_negative_in_place(c)
                    .expect("free character is realizable");
                out.push(SignedCharacter::negative(c));
            }
        }
    }

    /// Applies a c-reduction of positive characters. After each positive, every
    /// character that is free is realized negatively in ascending order. The
    /// returned sequence is the extended c-reduction.
    pub fn apply_creduction(
        &self,
        reduction: &CReduction,
    ) -> Result<(RbGraph, CReduction), ReductionError> {
        let mut g = self.clone();
        let mut extended = CReduction::new();
        for (position, sc) in reduction.iter().enumerate() {
            if !sc.is_positive() {
                return Err(ReductionError {
                    position,
                    cause: RealizeError::AlreadyActive(self.names.characters[sc.character].clone()),
                });
            }
            g.realize_positive_in_place(sc.character)
                .map_err(|cause| ReductionError { position, cause })?;
            extended.push(*sc);
            g.flush_free_in_place(&mut extended);
        }
        Ok((g, extended))
    }

    /// Replays a signed sequence one realization at a time, calling `visit`
    /// on every intermediate graph (the input and final graphs included).
    pub fn replay<F: FnMut(&RbGraph)>(
        &self,
        sequence: &CReduction,
        mut visit: F,
    ) -> Result<RbGraph, ReductionError> {
        let mut g = self.clone();
        visit(&g);
        for (position, sc) in sequence.iter().enumerate() {
            g.realize_in_place(*sc)
                .map_err(|cause| ReductionError { position, cause })?;
            visit(&g);
        }
        Ok(g)
    }

    /// Disjoint union of two graphs over the same universe.
    ///
    /// Panics if the graphs share a vertex.
    pub fn disjoint_union(&self, other: &RbGraph) -> RbGraph {
        let mut g = self.clone();
        for (s, adj) in &other.species {
            assert!(g.species.insert(*s, adj.clone()).is_none(), "shared species");
        }
        for (c, v) in &other.characters {
            assert!(g.characters.insert(*c, v.clone()).is_none(), "shared character");
        }
        g
    }

    /// Graphviz rendering: species as circles, characters as boxes, red edges
    /// and double borders for active characters.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph redblack {\n");
        for &s in self.species.keys() {
            out.push_str(&format!(
                "  s{s} [label=\"{}\", shape=circle];\n",
                escape(&self.names.species[s])
            ));
        }
        for (c, v) in &self.characters {
            let periph = if v.active { ", peripheries=2" } else { "" };
            out.push_str(&format!(
                "  c{c} [label=\"{}\", shape=box{periph}];\n",
                escape(&self.names.characters[*c])
            ));
        }
        for (c, v) in &self.characters {
            let color = if v.active { "red" } else { "black" };
            for s in &v.species {
                out.push_str(&format!("  s{s} -- c{c} [color={color}];\n"));
            }
        }
        out.push_str("}\n");
        out
    }
}

pub(crate) fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
