//! Binary species × character matrices with an active-character set.
//!
//! The text format is line oriented:
//!
//! ```text
//! #active: c4
//!     c1 c2 c3 c4
//! s1  0  0  0  1
//! s2  1  0  1  1
//! ```
//!
//! The `#active:` directive and the header line are optional. Without a
//! header, characters are named `c1..cm`; rows without a leading name are
//! named `s1..sn`. Other lines starting with `#` are comments.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("no rows")]
    NoRows,
    #[error("expected {expected} cells, found {found}")]
    RowLength { expected: usize, found: usize },
    #[error("cell `{0}` is not 0 or 1")]
    NonBinary(String),
    #[error("duplicate species name `{0}`")]
    DuplicateSpecies(String),
    #[error("duplicate character name `{0}`")]
    DuplicateCharacter(String),
    #[error("unknown active character `{0}`")]
    UnknownActive(String),
    #[error("row has no cells")]
    EmptyRow,
    #[error("strict names: {0} must be named explicitly")]
    AutoName(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LookupError {
    #[error("unknown character `{0}`")]
    UnknownCharacter(String),
    #[error("unknown species `{0}`")]
    UnknownSpecies(String),
    #[error("a character cannot be compared with itself: `{0}`")]
    SameCharacter(String),
}

/// An `n × m` 0/1 matrix together with its active characters.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMatrix {
    species_names: Vec<String>,
    character_names: Vec<String>,
    rows: Vec<Vec<bool>>,
    active: BTreeSet<usize>,
}

impl BinaryMatrix {
    /// Builds a matrix from rows of 0/1 values with auto-generated names.
    pub fn from_rows(rows: Vec<Vec<bool>>, active: BTreeSet<usize>) -> Self {
        let m = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == m), "ragged rows");
        assert!(active.iter().all(|&c| c < m), "active index out of range");
        Self {
            species_names: (1..=rows.len()).map(|i| format!("s{i}")).collect(),
            character_names: (1..=m).map(|j| format!("c{j}")).collect(),
            rows,
            active,
        }
    }

    /// Convenience constructor from integer rows; any nonzero value is 1.
    pub fn from_digits(rows: &[&[u8]], active: &[usize]) -> Self {
        Self::from_rows(
            rows.iter().map(|r| r.iter().map(|&v| v != 0).collect()).collect(),
            active.iter().copied().collect(),
        )
    }

    pub fn with_names(
        species_names: Vec<String>,
        character_names: Vec<String>,
        rows: Vec<Vec<bool>>,
        active: BTreeSet<usize>,
    ) -> Self {
        assert_eq!(species_names.len(), rows.len());
        assert!(rows.iter().all(|r| r.len() == character_names.len()));
        assert!(active.iter().all(|&c| c < character_names.len()));
        Self {
            species_names,
            character_names,
            rows,
            active,
        }
    }

    pub fn empty() -> Self {
        Self::from_rows(Vec::new(), BTreeSet::new())
    }

    pub fn num_species(&self) -> usize {
        self.rows.len()
    }

    pub fn num_characters(&self) -> usize {
        self.character_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty() || self.character_names.is_empty()
    }

    pub fn species_names(&self) -> &[String] {
        &self.species_names
    }

    pub fn character_names(&self) -> &[String] {
        &self.character_names
    }

    pub fn species_name(&self, s: usize) -> &str {
        &self.species_names[s]
    }

    pub fn character_name(&self, c: usize) -> &str {
        &self.character_names[c]
    }

    pub fn get(&self, s: usize, c: usize) -> bool {
        self.rows[s][c]
    }

    pub fn row(&self, s: usize) -> &[bool] {
        &self.rows[s]
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.rows
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = bool> + '_ {
        self.rows.iter().map(move |r| r[c])
    }

    pub fn active(&self) -> &BTreeSet<usize> {
        &self.active
    }

    pub fn is_active(&self, c: usize) -> bool {
        self.active.contains(&c)
    }

    /// The root state: 1 exactly on the active characters.
    pub fn root_state(&self) -> Vec<bool> {
        (0..self.num_characters())
            .map(|c| self.is_active(c))
            .collect()
    }

    pub fn character_index(&self, name: &str) -> Result<usize, LookupError> {
        self.character_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| LookupError::UnknownCharacter(name.to_string()))
    }

    pub fn species_index(&self, name: &str) -> Result<usize, LookupError> {
        self.species_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| LookupError::UnknownSpecies(name.to_string()))
    }

    /// Replaces the active set by the named characters.
    pub fn set_active_by_name<S: AsRef<str>>(&mut self, names: &[S]) -> Result<(), LookupError> {
        let active = names
            .iter()
            .map(|n| self.character_index(n.as_ref()))
            .collect::<Result<BTreeSet<_>, _>>()?;
        self.active = active;
        Ok(())
    }

    /// Species possessing character `c`, by index.
    pub fn species_set(&self, c: usize) -> BTreeSet<usize> {
        (0..self.num_species()).filter(|&s| self.rows[s][c]).collect()
    }

    /// `S(c)`: the species that have the named character.
    pub fn species_of(&self, character: &str) -> Result<BTreeSet<usize>, LookupError> {
        let c = self.character_index(character)?;
        Ok(self.species_set(c))
    }

    pub fn conflicting_indices(&self, a: usize, b: usize) -> bool {
        let mut seen = [false; 4];
        for r in &self.rows {
            seen[(usize::from(r[a]) << 1) | usize::from(r[b])] = true;
        }
        seen.iter().all(|&x| x)
    }

    /// Two characters conflict when their columns show all four 0/1 pairs.
    pub fn conflicting(&self, c1: &str, c2: &str) -> Result<bool, LookupError> {
        let a = self.character_index(c1)?;
        let b = self.character_index(c2)?;
        if a == b {
            return Err(LookupError::SameCharacter(c1.to_string()));
        }
        Ok(self.conflicting_indices(a, b))
    }

    /// True iff some pair of characters conflicts.
    pub fn has_conflict(&self) -> bool {
        let m = self.num_characters();
        (0..m).any(|a| (a + 1..m).any(|b| self.conflicting_indices(a, b)))
    }

    /// Submatrix keeping the listed species and characters, in the given order.
    pub fn select(&self, species: &[usize], characters: &[usize]) -> BinaryMatrix {
        let remap: HashMap<usize, usize> = characters
            .iter()
            .enumerate()
            .map(|(new, &old)| (old, new))
            .collect();
        BinaryMatrix {
            species_names: species.iter().map(|&s| self.species_names[s].clone()).collect(),
            character_names: characters
                .iter()
                .map(|&c| self.character_names[c].clone())
                .collect(),
            rows: species
                .iter()
                .map(|&s| characters.iter().map(|&c| self.rows[s][c]).collect())
                .collect(),
            active: self
                .active
                .iter()
                .filter_map(|c| remap.get(c).copied())
                .collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        parse_matrix(text, false)
    }

    /// Serializes into the text format accepted by [`parse_matrix`].
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for BinaryMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.active.is_empty() {
            let names: Vec<&str> = self.active.iter().map(|&c| self.character_name(c)).collect();
            writeln!(f, "#active: {}", names.join(","))?;
        }
        let width = self.species_names.iter().map(String::len).max().unwrap_or(0);
        writeln!(
            f,
            "{:width$} {}",
            "",
            self.character_names.join(" "),
            width = width
        )?;
        for (name, row) in self.species_names.iter().zip(&self.rows) {
            write!(f, "{name:width$}")?;
            for (c, &v) in row.iter().enumerate() {
                let w = self.character_names[c].len();
                write!(f, " {:>w$}", u8::from(v), w = w)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn is_binary(token: &str) -> bool {
    token == "0" || token == "1"
}

/// Parses the matrix text format. With `strict_names`, both the header and
/// the species name column are mandatory.
pub fn parse_matrix(text: &str, strict_names: bool) -> Result<BinaryMatrix, ParseError> {
    let err = |line: usize, column: usize, kind| ParseError { line, column, kind };

    let mut active_names: Option<(usize, Vec<(usize, String)>)> = None;
    let mut header: Option<Vec<String>> = None;
    let mut species_names = Vec::new();
    let mut rows: Vec<Vec<bool>> = Vec::new();
    let mut seen_content = false;
    let mut auto_species = false;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim_start();
            if let Some(list) = rest.strip_prefix("active:") {
                if !seen_content && active_names.is_none() {
                    let offset = raw.len() - list.len();
                    let mut names = Vec::new();
                    let mut col = offset + 1;
                    for part in list.split(',') {
                        let name = part.trim();
                        if !name.is_empty() {
                            let lead = part.len() - part.trim_start().len();
                            names.push((col + lead, name.to_string()));
                        }
                        col += part.len() + 1;
                    }
                    active_names = Some((lineno, names));
                }
            }
            continue;
        }

        let tokens: Vec<(usize, &str)> = tokenize(raw);
        let all_binary = tokens.iter().all(|(_, t)| is_binary(t));
        let tail_binary = tokens.iter().skip(1).all(|(_, t)| is_binary(t));

        if !seen_content {
            seen_content = true;
            let is_header = !all_binary && !(tokens.len() > 1 && tail_binary);
            if is_header {
                let mut seen = HashSet::new();
                for (col, t) in &tokens {
                    if !seen.insert(*t) {
                        return Err(err(lineno, *col, ParseErrorKind::DuplicateCharacter(t.to_string())));
                    }
                }
                header = Some(tokens.iter().map(|(_, t)| t.to_string()).collect());
                continue;
            }
        }

        let m = header
            .as_ref()
            .map(Vec::len)
            .or_else(|| rows.first().map(Vec::len));
        let (name, cells): (Option<(usize, &str)>, &[(usize, &str)]) = match m {
            Some(m) if tokens.len() == m + 1 => (Some(tokens[0]), &tokens[1..]),
            Some(m) if tokens.len() == m && all_binary => (None, &tokens[..]),
            Some(m) => {
                let found = if is_binary(tokens[0].1) { tokens.len() } else { tokens.len() - 1 };
                return Err(err(
                    lineno,
                    tokens.last().map_or(1, |t| t.0),
                    ParseErrorKind::RowLength { expected: m, found },
                ));
            }
            None if all_binary => (None, &tokens[..]),
            None => (Some(tokens[0]), &tokens[1..]),
        };
        if cells.is_empty() {
            return Err(err(lineno, 1, ParseErrorKind::EmptyRow));
        }
        let mut row = Vec::with_capacity(cells.len());
        for (col, t) in cells {
            match *t {
                "0" => row.push(false),
                "1" => row.push(true),
                other => {
                    return Err(err(lineno, *col, ParseErrorKind::NonBinary(other.to_string())))
                }
            }
        }
        match name {
            Some((col, n)) => {
                if species_names.iter().any(|s: &(usize, String)| s.1 == n) {
                    return Err(err(lineno, col, ParseErrorKind::DuplicateSpecies(n.to_string())));
                }
                species_names.push((lineno, n.to_string()));
            }
            None => {
                if strict_names {
                    return Err(err(lineno, 1, ParseErrorKind::AutoName("species")));
                }
                auto_species = true;
                species_names.push((lineno, String::new()));
            }
        }
        rows.push(row);
    }

    if rows.is_empty() {
        let line = text.lines().count().max(1);
        return Err(err(line, 1, ParseErrorKind::NoRows));
    }
    let m = rows[0].len();
    let character_names = match header {
        Some(h) => h,
        None => {
            if strict_names {
                return Err(err(1, 1, ParseErrorKind::AutoName("characters")));
            }
            (1..=m).map(|j| format!("c{j}")).collect()
        }
    };
    let species_names: Vec<String> = if auto_species {
        // Auto names must not collide with explicit ones.
        let explicit: HashSet<String> = species_names
            .iter()
            .filter(|(_, n)| !n.is_empty())
            .map(|(_, n)| n.clone())
            .collect();
        let mut out = Vec::with_capacity(species_names.len());
        for (i, (lineno, n)) in species_names.into_iter().enumerate() {
            if n.is_empty() {
                let auto = format!("s{}", i + 1);
                if explicit.contains(&auto) {
                    return Err(err(lineno, 1, ParseErrorKind::DuplicateSpecies(auto)));
                }
                out.push(auto);
            } else {
                out.push(n);
            }
        }
        out
    } else {
        species_names.into_iter().map(|(_, n)| n).collect()
    };

    let mut active = BTreeSet::new();
    if let Some((lineno, names)) = active_names {
        for (col, name) in names {
            match character_names.iter().position(|n| *n == name) {
                Some(c) => {
                    active.insert(c);
                }
                None => return Err(err(lineno, col, ParseErrorKind::UnknownActive(name))),
            }
        }
    }

    Ok(BinaryMatrix {
        species_names,
        character_names,
        rows,
        active,
    })
}

fn tokenize(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

/// What [`preprocess`] removed or merged, in the input's indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PreprocessReport {
    pub removed_null_characters: Vec<usize>,
    pub removed_null_species: Vec<usize>,
    /// `(kept, dropped)` pairs of identical columns.
    pub merged_duplicate_columns: Vec<(usize, usize)>,
    /// Input index of every surviving species, in output order.
    pub kept_species: Vec<usize>,
    /// Input index of every surviving character, in output order.
    pub kept_characters: Vec<usize>,
}

impl PreprocessReport {
    pub fn is_trivial(&self) -> bool {
        self.removed_null_characters.is_empty()
            && self.removed_null_species.is_empty()
            && self.merged_duplicate_columns.is_empty()
    }

    /// Input characters represented by surviving character `c` (itself first).
    pub fn merged_into(&self, c: usize) -> Vec<usize> {
        let kept = self.kept_characters[c];
        std::iter::once(kept)
            .chain(
                self.merged_duplicate_columns
                    .iter()
                    .filter(|(k, _)| *k == kept)
                    .map(|&(_, d)| d),
            )
            .collect()
    }
}

/// Removes null species and characters and merges identical columns.
///
/// A null character never changes state from the root (an inactive all-zero
/// column, or an active all-one column); a null species has exactly the root
/// state. With an empty active set these are the all-zero columns and rows.
/// Two columns merge only when both values and activity agree.
pub fn preprocess(m: &BinaryMatrix) -> (BinaryMatrix, PreprocessReport) {
    let mut report = PreprocessReport::default();
    let root = m.root_state();

    let null_chars: BTreeSet<usize> = (0..m.num_characters())
        .filter(|&c| m.column(c).all(|v| v == root[c]))
        .collect();
    report.removed_null_characters = null_chars.iter().copied().collect();

    for s in 0..m.num_species() {
        if m.row(s) == root.as_slice() {
            report.removed_null_species.push(s);
        } else {
            report.kept_species.push(s);
        }
    }

    let mut first_by_column: HashMap<(Vec<bool>, bool), usize> = HashMap::new();
    for c in 0..m.num_characters() {
        if null_chars.contains(&c) {
            continue;
        }
        let key = (
            report.kept_species.iter().map(|&s| m.get(s, c)).collect::<Vec<_>>(),
            m.is_active(c),
        );
        match first_by_column.get(&key) {
            Some(&kept) => report.merged_duplicate_columns.push((kept, c)),
            None => {
                first_by_column.insert(key, c);
                report.kept_characters.push(c);
            }
        }
    }

    let out = m.select(&report.kept_species, &report.kept_characters);
    (out, report)
}
