use nami::elimination::clique_tree;
use nami::fixtures;
use nami::independence::{d_separated, DEFAULT_ENUM_CAP};
use nami::inversion::{
    fully_connected_inverse, nami, nami_invert, stuhlmuller_invert, Direction, FrontierRule, NamiOptions,
};
use nami::verification::{is_imap, is_minimal_imap, is_natural, prune_minimal_inverse, verify};
use nami::graph::barren_latents;
use nami::{BayesNet, VarId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CAP: usize = DEFAULT_ENUM_CAP;

fn corpus(seed: u64, count: usize, max_n: usize) -> Vec<BayesNet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(2..=max_n);
            let p = rng.random_range(0.2..0.7);
            let o = rng.random_range(0.2..0.6);
            fixtures::random_dag(&mut rng, n, p, o)
        })
        .collect()
}

// Minimality is only promised when every latent has an observed descendant:
// two latents tied by a moral edge through a barren collider stay coupled in
// the inverse although they are independent.
#[test]
fn nami_is_a_natural_minimal_imap_on_random_dags() {
    let mut barren_failures = 0;
    for (k, g) in corpus(1, 250, 8).iter().enumerate() {
        let barren = !barren_latents(g).is_empty();
        for dir in [Direction::Forward, Direction::Reverse] {
            let h = nami(g, dir).unwrap();
            let r = verify(&h.graph, g, CAP).unwrap();
            let msg = || format!("case {k} {dir:?} {:?} {:?}\n{}", g.edges(), g.observed_flags(), r.render(g));
            assert!(r.is_imap && r.is_natural, "{}", msg());
            if barren {
                barren_failures += usize::from(r.is_minimal != Some(true));
            } else {
                assert_eq!(r.is_minimal, Some(true), "{}", msg());
            }
        }
    }
    assert!(barren_failures > 0);
}

#[test]
fn barren_collider_breaks_minimality() {
    let g = BayesNet::from_names(&[("a", false), ("b", false), ("x", true)], &[("a", "b"), ("x", "b")]).unwrap();
    let h = nami(&g, Direction::Reverse).unwrap();
    let r = verify(&h.graph, &g, CAP).unwrap();
    assert!(r.is_imap);
    assert_eq!(r.removable_edge, Some((VarId(2), VarId(0))));
    // the forward inverse of the same model is minimal
    assert!(verify(&nami(&g, Direction::Forward).unwrap().graph, &g, CAP).unwrap().all_pass());
}

#[test]
fn nami_on_latent_groups_stays_an_imap() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for g in corpus(2, 100, 8) {
        let mut latents = g.latents();
        let cut = rng.random_range(0..=latents.len());
        let tail = latents.split_off(cut);
        let groups: Vec<Vec<VarId>> = [latents, tail].into_iter().filter(|v| !v.is_empty()).collect();
        for dir in [Direction::Forward, Direction::Reverse] {
            let mut opts = NamiOptions::new(dir);
            opts.groups = Some(groups.clone());
            let h = nami_invert(&g, &opts).unwrap();
            assert!(h.validate().is_ok());
            assert!(is_imap(&h.graph, &g, CAP).unwrap().0);
        }
    }
}

// Latent u reaches latent v only through an observed x; v's co-child y ties them.
#[test]
fn parent_only_frontier_can_break_naturalness() {
    let g = BayesNet::from_names(
        &[("v", false), ("u", false), ("x", true), ("y", false)],
        &[("u", "x"), ("x", "v"), ("u", "y"), ("v", "y")],
    )
    .unwrap();
    let mut opts = NamiOptions::new(Direction::Forward);
    opts.frontier = FrontierRule::Parents;
    let literal = nami_invert(&g, &opts).unwrap();
    assert!(!is_natural(&literal.graph, &g).unwrap().0);

    let nearest = nami(&g, Direction::Forward).unwrap();
    assert!(verify(&nearest.graph, &g, CAP).unwrap().all_pass());
}

#[test]
fn sepsets_match_nami_parents() {
    for g in corpus(3, 200, 8) {
        for dir in [Direction::Forward, Direction::Reverse] {
            let h = nami(&g, dir).unwrap();
            let tree = clique_tree(&g, &h.elim_order).unwrap();
            assert!(tree.has_running_intersection());
            for (i, &v) in tree.eliminated.iter().enumerate() {
                if g.is_observed(v) {
                    // pruned down to a subset of the sepset
                    assert!(h.graph.parents(v).iter().all(|p| tree.sepsets[i].contains(p)));
                } else {
                    assert_eq!(h.graph.parents(v), tree.sepsets[i].as_slice());
                }
            }
        }
    }
}

#[test]
fn sepsets_separate_upstream_from_downstream() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for g in corpus(4, 150, 8) {
        let mut order: Vec<VarId> = g.vars().collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let tree = clique_tree(&g, &order).unwrap();
        for i in 0..tree.len() {
            if tree.parent[i].is_none() {
                continue;
            }
            let up = tree.upstream_of(i);
            let sep = &tree.sepsets[i];
            let mut upvars: Vec<VarId> = up.iter().flat_map(|&k| tree.cliques[k].clone()).collect();
            upvars.sort_unstable();
            upvars.dedup();
            upvars.retain(|v| !sep.contains(v));
            let mut down: Vec<VarId> = (0..tree.len())
                .filter(|k| !up.contains(k))
                .flat_map(|k| tree.cliques[k].clone())
                .filter(|v| !sep.contains(v) && !upvars.contains(v))
                .collect();
            down.sort_unstable();
            down.dedup();
            if upvars.is_empty() || down.is_empty() {
                continue;
            }
            assert!(d_separated(&g, &upvars, &down, sep).unwrap());
        }
    }
}

#[test]
fn pruning_gives_an_imap_in_any_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for g in corpus(6, 60, 7) {
        let mut order: Vec<VarId> = g.vars().collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let h = prune_minimal_inverse(&g, &order).unwrap();
        assert!(is_imap(&h, &g, CAP).unwrap().0);
        assert!(is_minimal_imap(&h, &g, CAP).unwrap().0);
    }
}

#[test]
fn fully_connected_never_beats_nami_on_edges() {
    for g in corpus(7, 200, 9) {
        let full = fully_connected_inverse(&g, None).unwrap();
        for dir in [Direction::Forward, Direction::Reverse] {
            assert!(nami(&g, dir).unwrap().graph.edge_count() <= full.graph.edge_count());
        }
    }
}

#[test]
fn heuristic_is_exact_on_chains_only_sometimes() {
    for n in 2..8 {
        let c = fixtures::chain(n);
        assert!(is_imap(&stuhlmuller_invert(&c).unwrap().graph, &c, CAP).unwrap().0);
    }
    for g in [fixtures::fig1a(), fixtures::fig1d()] {
        assert!(!is_imap(&stuhlmuller_invert(&g).unwrap().graph, &g, CAP).unwrap().0);
    }
}

#[test]
fn reverse_tree_is_more_compact() {
    for d in [4, 5] {
        let t = fixtures::binary_tree(d);
        let f = nami(&t, Direction::Forward).unwrap().graph.edge_count();
        let r = nami(&t, Direction::Reverse).unwrap().graph.edge_count();
        let full = fully_connected_inverse(&t, None).unwrap().graph.edge_count();
        assert!(r < f && f < full, "d={d}: {r} {f} {full}");
    }
}
