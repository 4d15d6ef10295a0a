//! Inputs on which the reduction and the exhaustive search once disagreed,
//! or still do. Each case records both verdicts.

use persistent_phylogeny::hasse::{build_diagram, is_safe_chain, maximal_characters, maximal_subgraph};
use persistent_phylogeny::oracle::{solve_bruteforce, Verdict};
use persistent_phylogeny::*;

fn oracle_solvable(m: &BinaryMatrix) -> bool {
    match solve_bruteforce(m, 30) {
        Verdict::Solvable(w) => {
            validate_tree(&w.tree, m).expect("witness tree is valid");
            true
        }
        Verdict::Unsolvable => false,
        Verdict::OverBudget { .. } => panic!("budget too small"),
    }
}

fn residual_solvable(g: &RbGraph, state: &[usize]) -> bool {
    let (h, _) = g.apply_creduction(&CReduction::positives(state.iter().copied())).unwrap();
    oracle_solvable(&h.associated_matrix())
}

fn three_safe_chains() -> BinaryMatrix {
    BinaryMatrix::from_digits(
        &[
            &[1, 1, 0, 0, 0, 1],
            &[1, 1, 1, 1, 1, 0],
            &[0, 1, 1, 1, 1, 0],
            &[1, 0, 1, 0, 0, 1],
            &[1, 0, 0, 1, 0, 0],
        ],
        &[],
    )
}

// reduce: abort. oracle: solvable.
#[test]
fn three_safe_chains_first_source_dead_end() {
    let m = three_safe_chains();
    assert_eq!(preprocess(&m).0, m);
    assert!(oracle_solvable(&m));
    let err = solve(&m).unwrap_err();
    assert!(err.is_negative());

    let g = RbGraph::from_matrix(&m);
    let gm = maximal_subgraph(&g);
    assert_eq!(maximal_characters(&g), [0, 1, 2, 3].into());
    assert!(oracle_solvable(&gm.associated_matrix()));

    let d = build_diagram(&gm);
    assert!(!d.is_degenerate());
    let safe: Vec<Vec<usize>> = d
        .chains()
        .filter(|ch| is_safe_chain(&gm, &d, ch))
        .map(|ch| d.node(ch.source()).state.clone())
        .collect();
    assert_eq!(safe, vec![vec![0, 1], vec![0, 2], vec![0, 3]]);

    // All three sources realize without a red sigma-graph, but only one
    // leaves a solvable graph.
    for state in &safe {
        assert!(persistent_phylogeny::hasse::realizes_without_sigma(&g, state));
    }
    assert!(!residual_solvable(&g, &[0, 1]));
    assert!(!residual_solvable(&g, &[0, 2]));
    assert!(residual_solvable(&g, &[0, 3]));
}

// reduce: abort. oracle: solvable.
#[test]
fn active_character_dead_end() {
    let m = BinaryMatrix::from_digits(
        &[
            &[0, 0, 1, 0, 1, 0],
            &[0, 1, 1, 0, 0, 1],
            &[1, 1, 1, 0, 1, 0],
            &[1, 0, 0, 0, 1, 0],
            &[0, 0, 0, 1, 1, 0],
        ],
        &[2],
    );
    let (pre, _) = preprocess(&m);
    assert!(oracle_solvable(&pre));
    assert!(solve(&pre).unwrap_err().is_negative());
}

// Active columns once blocked maximality. reduce: solvable. oracle: solvable.
#[test]
fn active_column_does_not_block_maximality() {
    let m = BinaryMatrix::from_digits(&[&[1, 0, 1, 1], &[0, 0, 1, 1], &[0, 1, 1, 0], &[1, 1, 0, 0]], &[]);
    assert!(oracle_solvable(&m));
    let s = solve(&m).unwrap();
    validate_tree(&s.tree, &m).unwrap();
}
