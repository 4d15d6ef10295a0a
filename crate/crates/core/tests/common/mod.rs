#![allow(dead_code)]

use std::collections::BTreeSet;

use persistent_phylogeny::BinaryMatrix;
use rand::Rng;

pub const EXAMPLE: &str = include_str!("../data/example.txt");
pub const UNSOLVABLE: &str = include_str!("../data/unsolvable.txt");

pub fn example() -> BinaryMatrix {
    BinaryMatrix::parse(EXAMPLE).unwrap()
}

pub fn unsolvable() -> BinaryMatrix {
    BinaryMatrix::parse(UNSOLVABLE).unwrap()
}

/// Row-major 4×4 matrix from the low 16 bits of `bits`.
pub fn matrix_4x4(bits: u32) -> BinaryMatrix {
    let rows = (0..4)
        .map(|r| (0..4).map(|c| bits >> (4 * r + c) & 1 == 1).collect())
        .collect();
    BinaryMatrix::from_rows(rows, BTreeSet::new())
}

pub fn random_matrix<R: Rng>(rng: &mut R, n: usize, m: usize, density: f64, active: usize) -> BinaryMatrix {
    let rows = (0..n)
        .map(|_| (0..m).map(|_| rng.gen_bool(density)).collect())
        .collect();
    let mut chars: Vec<usize> = (0..m).collect();
    for i in 0..active.min(m) {
        let j = rng.gen_range(i..m);
        chars.swap(i, j);
    }
    BinaryMatrix::from_rows(rows, chars[..active.min(m)].iter().copied().collect())
}

/// A matrix whose columns are subtrees of a random rooted tree, so no two
/// columns conflict.
pub fn laminar_matrix<R: Rng>(rng: &mut R, n: usize, m: usize) -> BinaryMatrix {
    let k = rng.gen_range(2..=n + m);
    let parent: Vec<usize> = (0..k).map(|i| if i == 0 { 0 } else { rng.gen_range(0..i) }).collect();
    let below = |a: usize, mut v: usize| loop {
        if v == a {
            return true;
        }
        if v == 0 {
            return false;
        }
        v = parent[v];
    };
    let home: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let at: Vec<usize> = (0..m).map(|_| rng.gen_range(1..k)).collect();
    let rows = home
        .iter()
        .map(|&h| at.iter().map(|&a| below(a, h)).collect())
        .collect();
    BinaryMatrix::from_rows(rows, BTreeSet::new())
}
