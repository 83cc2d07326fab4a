//! Named example structures and random generators shared by tests, the CLI
//! and the benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::{BayesNet, VarId};

/// The "extended student" network. `J` and `H` are observed.
pub fn student() -> BayesNet {
    BayesNet::from_names(
        &[("D", false), ("I", false), ("G", false), ("S", false), ("L", false), ("J", true), ("H", true)],
        &[("D", "G"), ("I", "G"), ("I", "S"), ("G", "L"), ("G", "H"), ("S", "J"), ("L", "J"), ("J", "H")],
    )
    .expect("student fixture")
}

/// Two-branch model `A -> B -> D`, `A -> C -> E` with observed leaves.
pub fn fig1a() -> BayesNet {
    BayesNet::from_names(
        &[("A", false), ("B", false), ("C", false), ("D", true), ("E", true)],
        &[("A", "B"), ("A", "C"), ("B", "D"), ("C", "E")],
    )
    .expect("fig1a fixture")
}

/// Edge-reversed inverse of [`fig1a`], the structure the Stuhlmüller heuristic builds.
pub fn fig1b() -> BayesNet {
    fig1a_universe(&[("B", "A"), ("C", "A"), ("D", "B"), ("E", "C")])
}

/// Faithful inverse of [`fig1a`] with the branch-coupling edges.
pub fn fig1c() -> BayesNet {
    fig1a_universe(&[("B", "A"), ("C", "A"), ("C", "B"), ("D", "B"), ("D", "C"), ("E", "C"), ("E", "D")])
}

fn fig1a_universe(edges: &[(&str, &str)]) -> BayesNet {
    BayesNet::from_names(&[("A", false), ("B", false), ("C", false), ("D", true), ("E", true)], edges)
        .expect("fig1a universe")
}

/// Second counterexample: a diamond `A -> {B, C} -> D` with an extra leaf `C -> E`.
pub fn fig1d() -> BayesNet {
    BayesNet::from_names(
        &[("A", false), ("B", false), ("C", false), ("D", true), ("E", true)],
        &[("A", "B"), ("A", "C"), ("B", "D"), ("C", "D"), ("C", "E")],
    )
    .expect("fig1d fixture")
}

/// Three-variable model `A -> B`, `A -> C`, `B -> C` used to illustrate naturalness,
/// together with the inverses `H1` (unnatural), `H2` and `H3` (natural).
pub fn naturalness_example() -> (BayesNet, [BayesNet; 3]) {
    let vars = [("A", false), ("B", false), ("C", false)];
    let g = BayesNet::from_names(&vars, &[("A", "B"), ("A", "C"), ("B", "C")]).unwrap();
    let h1 = BayesNet::from_names(&vars, &[("A", "C"), ("C", "B")]).unwrap();
    let h2 = BayesNet::from_names(&vars, &[("C", "B"), ("C", "A"), ("B", "A")]).unwrap();
    let h3 = BayesNet::from_names(&vars, &[("A", "B"), ("A", "C"), ("B", "C")]).unwrap();
    (g, [h1, h2, h3])
}

/// Complete binary tree of depth `d` with `2^d - 1` nodes `x0..`; node `i`
/// has children `2i+1` and `2i+2`, and the leaves are observed.
pub fn binary_tree(depth: u32) -> BayesNet {
    assert!(depth >= 1, "depth must be at least 1");
    let n = (1usize << depth) - 1;
    let first_leaf = (1usize << (depth - 1)) - 1;
    let names = (0..n).map(|i| format!("x{i}")).collect();
    let observed = (0..n).map(|i| i >= first_leaf).collect();
    let edges: Vec<(VarId, VarId)> = (1..n).map(|i| (VarId((i - 1) / 2), VarId(i))).collect();
    BayesNet::new(names, observed, &edges).expect("binary tree")
}

/// Collapsed Gaussian-mixture graph: `phi -> z_i -> x_i <- theta` for `i = 1..=n`.
pub fn gmm(n: usize) -> BayesNet {
    let mut names = vec!["theta".to_string(), "phi".to_string()];
    let mut observed = vec![false, false];
    for i in 1..=n {
        names.push(format!("z{i}"));
        observed.push(false);
    }
    for i in 1..=n {
        names.push(format!("x{i}"));
        observed.push(true);
    }
    let mut edges = Vec::new();
    for i in 0..n {
        let z = VarId(2 + i);
        let x = VarId(2 + n + i);
        edges.push((VarId(1), z));
        edges.push((z, x));
        edges.push((VarId(0), x));
    }
    BayesNet::new(names, observed, &edges).expect("gmm")
}

/// Markov chain `z0 -> z1 -> ... -> x` of `n >= 2` nodes; only the last is observed.
pub fn chain(n: usize) -> BayesNet {
    assert!(n >= 2, "chain needs at least two nodes");
    let names = (0..n).map(|i| if i + 1 == n { "x".to_string() } else { format!("z{i}") }).collect();
    let observed = (0..n).map(|i| i + 1 == n).collect();
    let edges: Vec<(VarId, VarId)> = (1..n).map(|i| (VarId(i - 1), VarId(i))).collect();
    BayesNet::new(names, observed, &edges).expect("chain")
}

/// Random DAG on `n` variables: a random causal order, each forward pair joined
/// with probability `edge_prob`, each variable observed with probability
/// `observed_prob`. At least one variable is always latent.
pub fn random_dag<R: Rng + ?Sized>(rng: &mut R, n: usize, edge_prob: f64, observed_prob: f64) -> BayesNet {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(edge_prob) {
                edges.push((VarId(perm[i]), VarId(perm[j])));
            }
        }
    }
    let mut observed: Vec<bool> = (0..n).map(|_| rng.random_bool(observed_prob)).collect();
    if n > 0 && observed.iter().all(|&o| o) {
        let k = rng.random_range(0..n);
        observed[k] = false;
    }
    let names = (0..n).map(|i| format!("V{i}")).collect();
    BayesNet::new(names, observed, &edges).expect("random DAG is acyclic by construction")
}

/// Random DAG whose every variable has at most `max_parents` parents, for
/// larger sparse instances.
pub fn random_sparse_dag<R: Rng + ?Sized>(rng: &mut R, n: usize, max_parents: usize, observed_prob: f64) -> BayesNet {
    let mut edges = Vec::new();
    for j in 1..n {
        let k = rng.random_range(0..=max_parents.min(j));
        for i in rand::seq::index::sample(rng, j, k) {
            edges.push((VarId(i), VarId(j)));
        }
    }
    let mut observed: Vec<bool> = (0..n).map(|_| rng.random_bool(observed_prob)).collect();
    if n > 0 && observed.iter().all(|&o| o) {
        observed[0] = false;
    }
    let names = (0..n).map(|i| format!("V{i}")).collect();
    BayesNet::new(names, observed, &edges).expect("sparse DAG is acyclic by construction")
}
