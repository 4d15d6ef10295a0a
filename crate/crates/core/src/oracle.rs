//! Brute-force decision procedure: a matrix has a persistent phylogeny iff
//! the matrix obtained by doubling every column into a gain column and a
//! loss column can be completed into a matrix with a perfect phylogeny.
//!
//! This module deliberately shares nothing with the graph machinery beyond
//! the matrix type and the tree type used for witnesses.

use std::collections::BTreeSet;

use crate::matrix::BinaryMatrix;
use crate::redblack::SignedCharacter;
use crate::treebuild::PersistentTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Zero,
    One,
    /// Part of an undecided pair: the gain and loss cells are both 0 or both 1.
    Unknown,
}

/// Column `2c` is `c+`, column `2c + 1` is `c-`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtendedMatrix {
    pub cells: Vec<Vec<Cell>>,
    pub unknowns: usize,
}

pub const DEFAULT_BUDGET: usize = 20;

pub fn extend(m: &BinaryMatrix) -> ExtendedMatrix {
    let mut unknowns = 0;
    let cells = m
        .rows()
        .iter()
        .map(|row| {
            let mut out = Vec::with_capacity(2 * row.len());
            for (c, &v) in row.iter().enumerate() {
                let pair = match (m.is_active(c), v) {
                    (true, true) => [Cell::One, Cell::Zero],
                    (true, false) => [Cell::One, Cell::One],
                    (false, true) => [Cell::One, Cell::Zero],
                    (false, false) => {
                        unknowns += 1;
                        [Cell::Unknown, Cell::Unknown]
                    }
                };
                out.extend(pair);
            }
            out
        })
        .collect();
    ExtendedMatrix { cells, unknowns }
}

/// Zero-rooted compatibility: no pair of columns shows all of
/// (0,1), (1,0) and (1,1). Columns are given as species sets.
pub fn perfect_phylogeny_test(columns: &[BTreeSet<usize>]) -> bool {
    columns.iter().enumerate().all(|(i, a)| {
        columns[i + 1..].iter().all(|b| {
            a.is_disjoint(b) || a.is_subset(b) || b.is_subset(a)
        })
    })
}

/// Same test for a complete 0/1 matrix given row-wise.
pub fn perfect_phylogeny_test_rows(rows: &[Vec<bool>]) -> bool {
    let width = rows.first().map_or(0, Vec::len);
    let columns: Vec<BTreeSet<usize>> = (0..width)
        .map(|c| (0..rows.len()).filter(|&s| rows[s][c]).collect())
        .collect();
    perfect_phylogeny_test(&columns)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    /// Loss set of every character: species that lost it.
    pub losses: Vec<BTreeSet<usize>>,
    /// The completed extended matrix, columns `c+` and `c-` per character.
    pub completion: BinaryMatrix,
    pub tree: PersistentTree,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Solvable(Box<Witness>),
    Unsolvable,
    OverBudget { unknowns: usize, budget: usize },
}

impl Verdict {
    pub fn is_solvable(&self) -> bool {
        matches!(self, Verdict::Solvable(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Solvable(_) => "solvable",
            Verdict::Unsolvable => "unsolvable",
            Verdict::OverBudget { .. } => "over-budget",
        }
    }
}

type Bits = u128;

fn compatible(a: Bits, b: Bits) -> bool {
    a & b == 0 || a & b == a || a & b == b
}

struct Search<'a> {
    m: &'a BinaryMatrix,
    chosen: Vec<Bits>,
    losses: Vec<Bits>,
}

impl Search<'_> {
    fn fits(&self, col: Bits) -> bool {
        self.chosen.iter().all(|&x| compatible(x, col))
    }

    fn run(&mut self, c: usize) -> bool {
        let m = self.m;
        if c == m.num_characters() {
            return true;
        }
        let n = m.num_species();
        let ones: Bits = (0..n).filter(|&s| m.get(s, c)).map(|s| 1 << s).sum();
        let all: Bits = if n == 0 { 0 } else { Bits::MAX >> (128 - n) };
        let zeros = all & !ones;
        if m.is_active(c) {
            if !self.fits(zeros) {
                return false;
            }
            self.chosen.push(zeros);
            self.losses.push(zeros);
            if self.run(c + 1) {
                return true;
            }
            self.chosen.pop();
            self.losses.pop();
            return false;
        }
        // Every subset of the zero cells, smallest first.
        let mut loss: Bits = 0;
        loop {
            let gain = ones | loss;
            if self.fits(gain) && self.fits(loss) && compatible(gain, loss) {
                self.chosen.extend([gain, loss]);
                self.losses.push(loss);
                if self.run(c + 1) {
                    return true;
                }
                self.chosen.truncate(self.chosen.len() - 2);
                self.losses.pop();
            }
            if loss == zeros {
                return false;
            }
            loss = (loss.wrapping_sub(zeros)) & zeros;
        }
    }
}

/// Decides solvability by searching all completions of the extended matrix.
/// The search prunes partial completions that already contain an
/// incompatible column pair, so it visits every completion that could pass.
pub fn solve_bruteforce(m: &BinaryMatrix, budget: usize) -> Verdict {
    let unknowns = extend(m).unknowns;
    if unknowns > budget || m.num_species() > Bits::BITS as usize {
        return Verdict::OverBudget { unknowns, budget };
    }
    let mut search = Search {
        m,
        chosen: Vec::new(),
        losses: Vec::new(),
    };
    if !search.run(0) {
        return Verdict::Unsolvable;
    }
    let losses: Vec<BTreeSet<usize>> = search
        .losses
        .iter()
        .map(|&b| (0..m.num_species()).filter(|&s| b >> s & 1 == 1).collect())
        .collect();
    let completion = completion_matrix(m, &losses);
    let tree = witness_tree(m, &losses);
    Verdict::Solvable(Box::new(Witness {
        losses,
        completion,
        tree,
    }))
}

fn gain_set(m: &BinaryMatrix, c: usize, loss: &BTreeSet<usize>) -> BTreeSet<usize> {
    if m.is_active(c) {
        (0..m.num_species()).collect()
    } else {
        m.species_set(c).union(loss).copied().collect()
    }
}

fn completion_matrix(m: &BinaryMatrix, losses: &[BTreeSet<usize>]) -> BinaryMatrix {
    let mut names = Vec::new();
    for c in 0..m.num_characters() {
        names.push(format!("{}+", m.character_name(c)));
        names.push(format!("{}-", m.character_name(c)));
    }
    let gains: Vec<BTreeSet<usize>> = (0..m.num_characters())
        .map(|c| gain_set(m, c, &losses[c]))
        .collect();
    let rows = (0..m.num_species())
        .map(|s| {
            (0..m.num_characters())
                .flat_map(|c| [gains[c].contains(&s), losses[c].contains(&s)])
                .collect()
        })
        .collect();
    BinaryMatrix::with_names(m.species_names().to_vec(), names, rows, BTreeSet::new())
}

/// Turns a compatible completion into a tree. Each nonempty column is a
/// cluster of species; clusters form a hierarchy, each becomes a path of
/// edges (gains before losses) hanging below the smallest strictly larger
/// cluster. Gains of active characters happen above the root and are omitted.
pub fn witness_tree(m: &BinaryMatrix, losses: &[BTreeSet<usize>]) -> PersistentTree {
    if m.num_species() == 0 {
        return PersistentTree::empty(m);
    }
    let mut labeled: Vec<(BTreeSet<usize>, SignedCharacter)> = Vec::new();
    for c in 0..m.num_characters() {
        if !m.is_active(c) {
            let gain = gain_set(m, c, &losses[c]);
            if !gain.is_empty() {
                labeled.push((gain, SignedCharacter::positive(c)));
            }
        }
        if !losses[c].is_empty() {
            labeled.push((losses[c].clone(), SignedCharacter::negative(c)));
        }
    }
    // Larger clusters first; equal clusters keep gains ahead of losses.
    labeled.sort_by(|(a, x), (b, y)| {
        b.len()
            .cmp(&a.len())
            .then_with(|| a.cmp(b))
            .then_with(|| y.is_positive().cmp(&x.is_positive()))
            .then_with(|| x.character.cmp(&y.character))
    });
    let mut tree = PersistentTree::with_root(m, m.root_state());
    let mut bottom: Vec<(BTreeSet<usize>, usize)> = Vec::new();
    for (cluster, sc) in labeled {
        let parent = bottom
            .iter()
            .rev()
            .find(|(big, _)| cluster.is_subset(big))
            .map_or(0, |&(_, node)| node);
        let node = tree.extend(parent, vec![sc]);
        bottom.push((cluster, node));
    }
    for s in 0..m.num_species() {
        let node = bottom
            .iter()
            .rev()
            .find(|(cluster, _)| cluster.contains(&s))
            .map_or(0, |&(_, node)| node);
        tree.place_species(node, s);
    }
    tree
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::matrix::tests::example;
    use crate::treebuild::validate_tree;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn extension_of_single_cells() {
        let e = extend(&BinaryMatrix::from_digits(&[&[1]], &[]));
        assert_eq!(e.cells, vec![vec![Cell::One, Cell::Zero]]);
        assert_eq!(e.unknowns, 0);
        let e = extend(&BinaryMatrix::from_digits(&[&[0]], &[]));
        assert_eq!(e.cells, vec![vec![Cell::Unknown, Cell::Unknown]]);
        assert_eq!(e.unknowns, 1);
        let e = extend(&BinaryMatrix::from_digits(&[&[0], &[1]], &[0]));
        assert_eq!(e.cells, vec![vec![Cell::One, Cell::One], vec![Cell::One, Cell::Zero]]);
        assert_eq!(e.unknowns, 0);
    }

    #[test]
    fn worked_example_unknown_count() {
        let m = example();
        let zeros = (0..m.num_characters())
            .filter(|&c| !m.is_active(c))
            .map(|c| m.column(c).filter(|v| !v).count())
            .sum::<usize>();
        assert_eq!(zeros, 26);
        assert_eq!(extend(&m).unknowns, zeros);
    }

    #[test]
    fn compatibility_test() {
        assert!(perfect_phylogeny_test(&[set(&[0, 1]), set(&[0])]));
        assert!(!perfect_phylogeny_test(&[set(&[0, 1]), set(&[1, 2])]));
        assert!(perfect_phylogeny_test(&[set(&[0]), set(&[1])]));
        let m = example();
        assert!(!perfect_phylogeny_test_rows(m.rows()));
    }

    #[test]
    fn conflict_free_is_solvable_without_losses() {
        let m = BinaryMatrix::from_digits(&[&[1, 1, 0], &[1, 0, 0], &[0, 0, 1]], &[]);
        let Verdict::Solvable(w) = solve_bruteforce(&m, DEFAULT_BUDGET) else {
            panic!("expected solvable");
        };
        assert!(w.losses.iter().all(BTreeSet::is_empty));
        assert_eq!(validate_tree(&w.tree, &m), Ok(()));
    }

    #[test]
    fn over_budget_is_distinct() {
        let m = example();
        assert_eq!(
            solve_bruteforce(&m, 25),
            Verdict::OverBudget {
                unknowns: 26,
                budget: 25
            }
        );
    }

    #[test]
    fn worked_example_is_solvable() {
        let m = example();
        let Verdict::Solvable(w) = solve_bruteforce(&m, 26) else {
            panic!("expected solvable");
        };
        assert_eq!(validate_tree(&w.tree, &m), Ok(()));
        let cols: Vec<BTreeSet<usize>> = (0..w.completion.num_characters())
            .map(|c| w.completion.species_set(c))
            .collect();
        assert!(perfect_phylogeny_test(&cols));
    }

    pub(crate) fn unsolvable_4x4() -> BinaryMatrix {
        BinaryMatrix::from_digits(
            &[&[0, 0, 1, 1], &[0, 1, 0, 1], &[1, 0, 1, 0], &[1, 1, 0, 0]],
            &[],
        )
    }

    #[test]
    fn pinned_unsolvable_matrix() {
        assert_eq!(solve_bruteforce(&unsolvable_4x4(), DEFAULT_BUDGET), Verdict::Unsolvable);
    }

    #[test]
    fn three_pairwise_conflicts_are_solvable() {
        let m = BinaryMatrix::from_digits(&[&[1, 1, 0], &[1, 0, 1], &[0, 1, 1], &[0, 0, 0]], &[]);
        let Verdict::Solvable(w) = solve_bruteforce(&m, DEFAULT_BUDGET) else {
            panic!("expected solvable");
        };
        assert_eq!(validate_tree(&w.tree, &m), Ok(()));
    }

    // Plain enumeration of every completion, without pruning.
    fn naive(m: &BinaryMatrix) -> bool {
        let e = extend(m);
        let unknown: Vec<(usize, usize)> = (0..m.num_species())
            .flat_map(|s| (0..m.num_characters()).map(move |c| (s, c)))
            .filter(|&(s, c)| e.cells[s][2 * c] == Cell::Unknown)
            .collect();
        (0u64..1 << unknown.len()).any(|mask| {
            let mut rows: Vec<Vec<bool>> = e
                .cells
                .iter()
                .map(|r| r.iter().map(|&x| x == Cell::One).collect())
                .collect();
            for (k, &(s, c)) in unknown.iter().enumerate() {
                let v = mask >> k & 1 == 1;
                rows[s][2 * c] = v;
                rows[s][2 * c + 1] = v;
            }
            perfect_phylogeny_test_rows(&rows)
        })
    }

    #[test]
    fn pruned_search_matches_plain_enumeration() {
        for bits in 0u32..1 << 9 {
            let rows: Vec<Vec<bool>> = (0..3)
                .map(|i| (0..3).map(|j| bits >> (3 * i + j) & 1 == 1).collect())
                .collect();
            for active in 0u32..1 << 3 {
                let a = (0..3).filter(|c| active >> c & 1 == 1).collect();
                let m = BinaryMatrix::from_rows(rows.clone(), a);
                let v = solve_bruteforce(&m, 64);
                assert_eq!(v.is_solvable(), naive(&m), "{m}");
                if let Verdict::Solvable(w) = v {
                    assert_eq!(validate_tree(&w.tree, &m), Ok(()), "{m}");
                }
            }
        }
        assert!(!naive(&unsolvable_4x4()));
    }

    #[test]
    fn duplicate_row_keeps_verdict() {
        let m = example();
        let mut rows = m.rows().to_vec();
        rows.push(rows[0].clone());
        let d = BinaryMatrix::from_rows(rows, m.active().clone());
        assert_eq!(
            solve_bruteforce(&m, 40).is_solvable(),
            solve_bruteforce(&d, 40).is_solvable()
        );
    }
}
