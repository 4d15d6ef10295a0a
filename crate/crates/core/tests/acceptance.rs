//! Acceptance gate. Runs every criterion, prints one line per criterion and
//! exits nonzero when any of them fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use persistent_phylogeny::hasse::{build_diagram, maximal_characters, maximal_subgraph, safe_sources};
use persistent_phylogeny::oracle::{solve_bruteforce, Verdict};
use persistent_phylogeny::redblack::EdgeColor;
use persistent_phylogeny::reduce::ReduceError;
use persistent_phylogeny::{
    build_tree, preprocess, solve, validate_tree, BinaryMatrix, CReduction, RbGraph, SignedCharacter, Solution,
    SolveError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{example, laminar_matrix, matrix_4x4, random_matrix};

type Outcome = Result<String, String>;

fn names(list: impl IntoIterator<Item = usize>, all: &[String]) -> Vec<String> {
    list.into_iter().map(|i| all[i].clone()).collect()
}

fn idx(m: &BinaryMatrix, name: &str) -> usize {
    m.character_index(name).unwrap()
}

fn criterion_1() -> Outcome {
    let m = example();
    let g = RbGraph::from_matrix(&m);
    let r = CReduction::positives([idx(&m, "c3"), idx(&m, "c5"), idx(&m, "c2")]);
    let start = Instant::now();
    let (_, extended) = g.apply_creduction(&r).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let expected = CReduction(vec![
        SignedCharacter::positive(idx(&m, "c3")),
        SignedCharacter::positive(idx(&m, "c5")),
        SignedCharacter::positive(idx(&m, "c2")),
        SignedCharacter::negative(idx(&m, "c4")),
    ]);

    // The graph right before the c4- step: positives realized one by one.
    let mut before = g.clone();
    for sc in r.iter() {
        before = before.realize(*sc).map_err(|e| e.to_string())?;
    }
    let red = |c: usize| -> Vec<String> {
        let set: BTreeSet<usize> = before
            .species()
            .filter(|&s| before.edge(s, c) == Some(EdgeColor::Red))
            .collect();
        names(set, m.species_names())
    };
    let c2 = red(idx(&m, "c2"));
    let c4 = red(idx(&m, "c4"));
    let want = vec!["s3".to_string(), "s4".to_string(), "s5".to_string()];
    let detail = format!(
        "extended {:?}, c2 red to {c2:?}, c4 red to {c4:?}, {:.3} ms",
        extended.render(m.character_names()),
        elapsed.as_secs_f64() * 1e3
    );
    if extended == expected && c2 == want && elapsed < Duration::from_millis(10) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_2() -> Outcome {
    let m = example();
    let got = names(maximal_characters(&RbGraph::from_matrix(&m)), m.character_names());
    let detail = format!("maximal characters {got:?}");
    if got == ["c2", "c3"] {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_3() -> Outcome {
    let m = example();
    let g = RbGraph::from_matrix(&m);
    let diagram = build_diagram(&maximal_subgraph(&g));
    let sources = safe_sources(&g, &diagram).map_err(|e| e.to_string())?;
    let got: BTreeSet<Vec<String>> = sources
        .iter()
        .map(|&i| names(diagram.node(i).state.iter().copied(), m.character_names()))
        .collect();
    let gm = maximal_subgraph(&g);
    let state_of = |s: &str| -> Vec<String> {
        let s = m.species_index(s).unwrap();
        names(gm.characters_of(s), m.character_names())
    };
    let want: BTreeSet<Vec<String>> = [state_of("s2"), state_of("s4")].into_iter().collect();
    let detail = format!("safe source states {got:?}, expected {want:?}");
    if got == want {
        Ok(detail)
    } else {
        Err(detail)
    }
}

#[derive(Default)]
struct Tally {
    instances: usize,
    agree: usize,
    disagreements: Vec<String>,
    invalid_trees: usize,
    over_budget: usize,
    sigma_violations: usize,
    connected_solved: usize,
    root_violations: usize,
    negatives: usize,
}

impl Tally {
    /// Runs reduce and the oracle on a preprocessed instance and records the
    /// checks shared by several criteria.
    fn check(&mut self, pre: &BinaryMatrix, budget: usize) {
        self.instances += 1;
        let result = solve(pre);
        let oracle = solve_bruteforce(pre, budget);
        if let Verdict::OverBudget { .. } = oracle {
            self.over_budget += 1;
        } else if oracle.is_solvable() == result.is_ok() {
            self.agree += 1;
        } else {
            self.disagreements.push(format!(
                "reduce={} oracle={} on\n{pre}",
                match &result {
                    Ok(_) => "solvable".to_string(),
                    Err(e) => e.to_string(),
                },
                oracle.name()
            ));
        }
        if let Err(SolveError::Reduce(ReduceError::ChainOverflow(_) | ReduceError::DepthExceeded { .. })) = &result {
            self.disagreements.push(format!("internal error on\n{pre}"));
        }
        if let Ok(sol) = result {
            self.observe(pre, &sol);
        }
    }

    /// Checks run on every successful reduction.
    fn observe(&mut self, pre: &BinaryMatrix, sol: &Solution) {
        if validate_tree(&sol.tree, pre).is_err() {
            self.invalid_trees += 1;
        }
        self.negatives += sol.trace.negatives();
        let g = RbGraph::from_matrix(&sol.preprocessed);
        let mut sigma = false;
        g.replay(&sol.trace.sequence, |h| sigma |= h.has_red_sigma())
            .expect("successful trace replays");
        if sigma {
            self.sigma_violations += 1;
        }
        if !g.is_empty() && g.is_connected() {
            self.connected_solved += 1;
            let tree = build_tree(&sol.preprocessed, &sol.trace).expect("trace builds");
            if tree.root().map_or(0, |r| r.children.len()) != 1 {
                self.root_violations += 1;
            }
        }
    }

    fn contract(&self) -> Outcome {
        let detail = format!(
            "{} instances, {} agree, {} disagree, {} over budget, {} invalid trees",
            self.instances,
            self.agree,
            self.disagreements.len(),
            self.over_budget,
            self.invalid_trees
        );
        if self.disagreements.is_empty() && self.invalid_trees == 0 && self.over_budget == 0 {
            Ok(detail)
        } else {
            let first = self.disagreements.first().cloned().unwrap_or_default();
            Err(format!("{detail}; first: {first}"))
        }
    }
}

fn criterion_4(t: &mut Tally) -> Outcome {
    let start = Instant::now();
    let mut seen = BTreeMap::new();
    for bits in 0u32..1 << 16 {
        let (pre, _) = preprocess(&matrix_4x4(bits));
        seen.entry(pre.to_text()).or_insert(pre);
    }
    for pre in seen.values() {
        t.check(pre, 16);
    }
    let elapsed = start.elapsed();
    let detail = format!("{}, {:.1} s", t.contract()?, elapsed.as_secs_f64());
    if elapsed < Duration::from_secs(300) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_5(t: &mut Tally) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..500 {
        let m = random_matrix(&mut rng, 5, 6, 0.5, i % 2);
        let (pre, _) = preprocess(&m);
        t.check(&pre, 30);
    }
    let elapsed = start.elapsed();
    let detail = format!("{}, {:.1} s", t.contract()?, elapsed.as_secs_f64());
    if elapsed < Duration::from_secs(120) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_6(t: &mut Tally) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut aborted = 0;
    let mut conflicts = 0;
    for _ in 0..200 {
        let n = rng.gen_range(2..=10);
        let m = rng.gen_range(2..=10);
        let matrix = laminar_matrix(&mut rng, n, m);
        if matrix.has_conflict() {
            conflicts += 1;
        }
        let (pre, _) = preprocess(&matrix);
        t.instances += 1;
        match solve(&pre) {
            Ok(sol) => t.observe(&pre, &sol),
            Err(_) => aborted += 1,
        }
    }
    let detail = format!(
        "200 laminar instances, {aborted} aborted, {} negative characters, {} invalid trees, {conflicts} generator conflicts",
        t.negatives, t.invalid_trees
    );
    if aborted == 0 && t.negatives == 0 && t.invalid_trees == 0 && conflicts == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_9() -> Outcome {
    let mut slowest = Duration::ZERO;
    let mut overflow = 0;
    let mut solved = 0;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let m = random_matrix(&mut rng, 50, 50, 0.5, 0);
        let start = Instant::now();
        let result = solve(&m);
        slowest = slowest.max(start.elapsed());
        match result {
            Ok(_) => solved += 1,
            Err(SolveError::Reduce(ReduceError::ChainOverflow(_))) => overflow += 1,
            Err(_) => {}
        }
    }
    let detail = format!(
        "10 instances 50x50, {solved} solved, {overflow} chain-cap hits, slowest {:.1} ms",
        slowest.as_secs_f64() * 1e3
    );
    if overflow == 0 && slowest < Duration::from_secs(1) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_ppp"))
        .args(args)
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=8);
        let m = rng.gen_range(1..=8);
        let active = rng.gen_range(0..=m.min(2));
        let matrix = random_matrix(&mut rng, n, m, 0.5, active);
        let (pre, _) = preprocess(&matrix);
        if RbGraph::from_matrix(&pre).associated_matrix() != pre {
            mismatches += 1;
        }
    }

    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data");
    let example = format!("{dir}/example.txt");
    let bad = format!("{dir}/unsolvable.txt");
    let runs: Vec<Vec<&str>> = vec![
        vec!["solve", &example],
        vec!["solve", "--format", "dot", &example],
        vec!["solve", "--format", "trace", &example],
        vec!["solve", "--format", "json-summary", "--cross-check", "--oracle-budget", "30", &example],
        vec!["solve", "--format", "json-summary", &bad],
        vec!["inspect-graph", &example],
        vec!["inspect-hasse", &example],
        vec!["oracle", "--oracle-budget", "30", &example],
    ];
    let mut unstable = Vec::new();
    for args in &runs {
        let first = run_cli(args);
        for _ in 0..3 {
            if run_cli(args) != first {
                unstable.push(args.join(" "));
                break;
            }
        }
    }
    let detail = format!(
        "1000 round trips, {mismatches} mismatches; {} CLI invocations, {} unstable",
        runs.len(),
        unstable.len()
    );
    if mismatches == 0 && unstable.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail} {unstable:?}"))
    }
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((1, "worked-example extended reduction", criterion_1()));
    results.push((2, "maximal characters", criterion_2()));
    results.push((3, "safe sources", criterion_3()));

    let mut exhaustive = Tally::default();
    results.push((4, "oracle equivalence, exhaustive 4x4", criterion_4(&mut exhaustive)));
    let mut random = Tally::default();
    results.push((5, "oracle equivalence, random 5x6", criterion_5(&mut random)));
    let mut laminar = Tally::default();
    results.push((6, "perfect-phylogeny specialization", criterion_6(&mut laminar)));

    let sigma: usize = [&exhaustive, &random, &laminar].iter().map(|t| t.sigma_violations).sum();
    let replayed: usize = [&exhaustive, &random, &laminar]
        .iter()
        .map(|t| t.instances)
        .sum();
    let detail = format!("{replayed} instances replayed, {sigma} with a red sigma-graph");
    results.push((7, "sigma invariant", if sigma == 0 { Ok(detail) } else { Err(detail) }));

    let connected = exhaustive.connected_solved + random.connected_solved;
    let violations = exhaustive.root_violations + random.root_violations;
    let detail = format!("{connected} connected solved instances, {violations} roots with other than one child");
    results.push((8, "root has one child", if violations == 0 { Ok(detail) } else { Err(detail) }));

    results.push((9, "50x50 runtime smoke", criterion_9()));
    results.push((10, "round trip and determinism", criterion_10()));

    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(d) => println!("criterion {n:>2} PASS  {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {d}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
