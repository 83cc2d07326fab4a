use nami::discrete::{
    eliminate_variables, expected_posterior_kl, factor_marginalize, factor_product, factor_project,
    fit_inverse_exact, joint, symbolic_scopes, DiscreteBN, Factor,
};
use nami::elimination::induced_graph;
use nami::fixtures;
use nami::graph::barren_latents;
use nami::independence::{enumerate_independencies, DEFAULT_ENUM_CAP};
use nami::inversion::{mean_field_inverse, nami, Direction};
use nami::VarId;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corpus(seed: u64, count: usize) -> Vec<DiscreteBN> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(2..=7);
            let p = rng.random_range(0.2..0.7);
            let g = fixtures::random_dag(&mut rng, n, p, 0.4);
            let card = (0..n).map(|_| rng.random_range(2..=3)).collect();
            DiscreteBN::random(g, card, &mut rng).unwrap()
        })
        .collect()
}

fn shuffled(rng: &mut ChaCha8Rng, n: usize) -> Vec<VarId> {
    let mut order: Vec<VarId> = (0..n).map(VarId).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    order
}

#[test]
fn nami_inverse_fits_the_posterior_exactly() {
    for (k, bn) in corpus(1, 200).iter().enumerate() {
        for dir in [Direction::Forward, Direction::Reverse] {
            let h = nami(&bn.structure, dir).unwrap();
            let q = fit_inverse_exact(bn, &h.graph).unwrap();
            let kl = expected_posterior_kl(bn, &q.q).unwrap();
            assert!(kl <= 1e-9, "case {k} {dir:?}: kl {kl}");
        }
    }
}

#[test]
fn mean_field_is_never_better_than_nami() {
    for bn in corpus(2, 60) {
        let q = fit_inverse_exact(&bn, &mean_field_inverse(&bn.structure).unwrap().graph).unwrap();
        assert!(expected_posterior_kl(&bn, &q.q).unwrap() >= 0.0);
    }
}

// With random CPDs every structural dependence shows up numerically, so each
// needed edge of the inverse costs KL when removed.
#[test]
fn dropping_an_inverse_edge_costs_kl() {
    let mut checked = 0;
    for bn in corpus(3, 120) {
        if !barren_latents(&bn.structure).is_empty() {
            continue;
        }
        let h = nami(&bn.structure, Direction::Forward).unwrap().graph;
        for (a, b) in h.edges() {
            if h.is_observed(b) {
                continue;
            }
            let q = fit_inverse_exact(&bn, &h.without_edge(a, b)).unwrap();
            let kl = expected_posterior_kl(&bn, &q.q).unwrap();
            assert!(kl > 1e-12, "edge {a:?}->{b:?} removable numerically: {kl}");
            checked += 1;
        }
    }
    assert!(checked > 50);
}

#[test]
fn elimination_equals_joint_then_marginalize() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for bn in corpus(4, 100) {
        let n = bn.n();
        let order = shuffled(&mut rng, n);
        let keep = rng.random_range(0..n);
        let (elim, rest) = order.split_at(keep);
        let got = eliminate_variables(&bn.cpds, elim).unwrap();
        let mut rest = rest.to_vec();
        rest.sort_unstable();
        let want = factor_project(&joint(&bn).unwrap(), &rest).unwrap();
        let got = got.reorder(&rest).unwrap();
        for (x, y) in got.values().iter().zip(want.values()) {
            assert!((x - y).abs() <= 1e-10 * x.abs().max(y.abs()).max(1e-300));
        }
    }
}

#[test]
fn intermediate_scopes_are_the_cliques() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.random_range(2..=10);
        let g = fixtures::random_dag(&mut rng, n, 0.35, 0.3);
        let order = shuffled(&mut rng, n);
        let scopes: Vec<Vec<VarId>> = g
            .vars()
            .map(|v| {
                let mut s = g.parents(v).to_vec();
                s.push(v);
                s
            })
            .collect();
        let psi = symbolic_scopes(&scopes, &order);
        let e = induced_graph(&g, &order).unwrap();
        let cliques: Vec<Vec<VarId>> = e.trace.steps.iter().map(|s| s.clique()).collect();
        assert_eq!(psi, cliques);
    }
}

// Every independence the structure licenses holds in the joint table.
#[test]
fn joint_satisfies_structural_independencies() {
    for bn in corpus(6, 25).into_iter().filter(|b| b.n() <= 5) {
        let p = joint(&bn).unwrap();
        for a in enumerate_independencies(&bn.structure, DEFAULT_ENUM_CAP).unwrap().assertions() {
            let (x, y) = (a.x[0], a.y[0]);
            let mut xyz = vec![x, y];
            xyz.extend(&a.z);
            let pxyz = factor_project(&p, &xyz).unwrap();
            let mut xz = vec![x];
            xz.extend(&a.z);
            let mut yz = vec![y];
            yz.extend(&a.z);
            let pxz = factor_project(&p, &xz).unwrap();
            let pyz = factor_project(&p, &yz).unwrap();
            let pz = factor_project(&p, &a.z).unwrap();
            // p(x,y,z) p(z) = p(x,z) p(y,z)
            let lhs = factor_product(&pxyz, &pz).unwrap().reorder(&xyz).unwrap();
            let rhs = factor_product(&pxz, &pyz).unwrap().reorder(&xyz).unwrap();
            for (l, r) in lhs.values().iter().zip(rhs.values()) {
                assert!((l - r).abs() < 1e-12);
            }
        }
    }
}

fn factor_strategy(scope: Vec<usize>) -> impl Strategy<Value = Factor> {
    prop::collection::vec(2usize..=3, scope.len()).prop_flat_map(move |card| {
        let size: usize = card.iter().product();
        let scope = scope.clone();
        prop::collection::vec(0.0f64..1.0, size)
            .prop_map(move |v| Factor::new(scope.iter().map(|&i| VarId(i)).collect(), card.clone(), v).unwrap())
    })
}

proptest! {
    #[test]
    fn product_is_commutative_up_to_order(a in factor_strategy(vec![0, 1]), b in factor_strategy(vec![2])) {
        let ab = factor_product(&a, &b).unwrap();
        let ba = factor_product(&b, &a).unwrap().reorder(ab.scope()).unwrap();
        prop_assert_eq!(ab.values(), ba.values());
    }

    #[test]
    fn marginalization_commutes(f in factor_strategy(vec![0, 1, 2])) {
        let a = factor_marginalize(&factor_marginalize(&f, VarId(0)).unwrap(), VarId(2)).unwrap();
        let b = factor_marginalize(&factor_marginalize(&f, VarId(2)).unwrap(), VarId(0)).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn summing_out_preserves_total(f in factor_strategy(vec![3, 1])) {
        let m = factor_marginalize(&f, VarId(3)).unwrap();
        prop_assert!((m.sum() - f.sum()).abs() < 1e-12);
    }
}
