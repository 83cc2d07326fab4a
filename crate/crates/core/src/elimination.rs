//! Simulated variable elimination: induced graphs, min-fill costs and clique trees.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::{moralize, BayesNet, UndirectedGraph, VarId};

/// Undirected graph whose eliminated nodes are marked. Starts as the moral
/// graph and only ever gains edges, each of which is appended to `fill_log`.
#[derive(Clone, Debug)]
pub struct MarkedGraph {
    base: UndirectedGraph,
    marked: Vec<bool>,
    fill_log: Vec<(VarId, VarId)>,
}

/// One simulated elimination.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EliminationStep {
    pub var: VarId,
    /// Unmarked neighbours at the moment `var` was eliminated, sorted.
    pub neighbors: Vec<VarId>,
    pub fill: Vec<(VarId, VarId)>,
}

impl EliminationStep {
    /// Scope of the intermediate factor created by this step.
    pub fn clique(&self) -> Vec<VarId> {
        let mut c = self.neighbors.clone();
        c.push(self.var);
        c.sort_unstable();
        c
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EliminationTrace {
    pub steps: Vec<EliminationStep>,
}

impl EliminationTrace {
    pub fn order(&self) -> Vec<VarId> {
        self.steps.iter().map(|s| s.var).collect()
    }

    pub fn largest_clique(&self) -> usize {
        self.steps.iter().map(|s| s.neighbors.len() + 1).max().unwrap_or(0)
    }
}

impl MarkedGraph {
    pub fn new(graph: UndirectedGraph) -> Self {
        let n = graph.n();
        MarkedGraph { base: graph, marked: vec![false; n], fill_log: Vec::new() }
    }

    /// Moral graph of `bn`, nothing marked.
    pub fn moral(bn: &BayesNet) -> Self {
        MarkedGraph::new(moralize(bn))
    }

    pub fn graph(&self) -> &UndirectedGraph {
        &self.base
    }

    pub fn is_marked(&self, v: VarId) -> bool {
        self.marked[v.0]
    }

    pub fn marked(&self) -> impl Iterator<Item = VarId> + '_ {
        self.marked.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| VarId(i))
    }

    pub fn fill_log(&self) -> &[(VarId, VarId)] {
        &self.fill_log
    }

    pub fn unmarked_neighbors(&self, v: VarId) -> Vec<VarId> {
        self.base.neighbors(v).iter().copied().filter(|u| !self.marked[u.0]).collect()
    }

    /// Number of missing edges among the unmarked neighbours of `v`.
    pub fn min_fill_cost(&self, v: VarId) -> Result<usize> {
        if self.marked[v.0] {
            return Err(Error::AlreadyMarked(v));
        }
        let nb = self.unmarked_neighbors(v);
        let mut missing = 0;
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if !self.base.has_edge(a, b) {
                    missing += 1;
                }
            }
        }
        Ok(missing)
    }

    /// Connects the unmarked neighbours of `v` pairwise, then marks `v`.
    pub fn eliminate(&mut self, v: VarId) -> Result<EliminationStep> {
        if self.marked[v.0] {
            return Err(Error::AlreadyMarked(v));
        }
        let nb = self.unmarked_neighbors(v);
        let mut fill = Vec::new();
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if self.base.add_edge(a, b) {
                    fill.push((a, b));
                }
            }
        }
        self.fill_log.extend_from_slice(&fill);
        self.marked[v.0] = true;
        Ok(EliminationStep { var: v, neighbors: nb, fill })
    }

    /// DOT rendering: fill edges dotted, eliminated nodes filled black,
    /// observed nodes shaded.
    pub fn to_dot(&self, bn: &BayesNet) -> String {
        let fills: BTreeSet<(VarId, VarId)> = self.fill_log.iter().copied().collect();
        let mut out = String::from("graph induced {\n");
        for v in bn.vars() {
            let style = if self.marked[v.0] {
                ", style=filled, fillcolor=black, fontcolor=white"
            } else if bn.is_observed(v) {
                ", style=filled, fillcolor=gray"
            } else {
                ""
            };
            let _ = writeln!(out, "  \"{}\" [label=\"{}\"{}];", bn.name(v), bn.name(v), style);
        }
        for (a, b) in self.base.edges() {
            let style = if fills.contains(&(a, b)) { " [style=dotted]" } else { "" };
            let _ = writeln!(out, "  \"{}\" -- \"{}\"{};", bn.name(a), bn.name(b), style);
        }
        out.push_str("}\n");
        out
    }
}

/// Result of eliminating a fixed ordering from the moral graph.
#[derive(Clone, Debug)]
pub struct Elimination {
    pub graph: MarkedGraph,
    pub trace: EliminationTrace,
}

fn check_order(bn: &BayesNet, order: &[VarId]) -> Result<()> {
    let mut seen = vec![false; bn.n()];
    for &v in order {
        bn.check(v)?;
        if std::mem::replace(&mut seen[v.0], true) {
            return Err(Error::DuplicateInOrder(v));
        }
    }
    Ok(())
}

/// Moralizes `bn` and eliminates `order` (any duplicate-free subset of the variables).
pub fn induced_graph(bn: &BayesNet, order: &[VarId]) -> Result<Elimination> {
    check_order(bn, order)?;
    let mut graph = MarkedGraph::moral(bn);
    let mut trace = EliminationTrace::default();
    for &v in order {
        trace.steps.push(graph.eliminate(v)?);
    }
    Ok(Elimination { graph, trace })
}

/// One clique per elimination step, linked towards the clique of the
/// earliest-eliminated neighbour.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliqueTree {
    pub cliques: Vec<Vec<VarId>>,
    /// Variable eliminated when clique `i` was formed.
    pub eliminated: Vec<VarId>,
    /// Downstream neighbour of each clique; `None` for roots.
    pub parent: Vec<Option<usize>>,
    /// Sepset on the edge to `parent[i]`; empty for roots.
    pub sepsets: Vec<Vec<VarId>>,
    /// Clique holding each variable's model factor (its family), if any clique covers it.
    pub factor_assignment: Vec<Option<usize>>,
}

pub fn clique_tree(bn: &BayesNet, order: &[VarId]) -> Result<CliqueTree> {
    let elim = induced_graph(bn, order)?;
    let mut position = vec![usize::MAX; bn.n()];
    for (i, &v) in order.iter().enumerate() {
        position[v.0] = i;
    }
    let steps = &elim.trace.steps;
    let cliques: Vec<Vec<VarId>> = steps.iter().map(EliminationStep::clique).collect();
    let mut parent = Vec::with_capacity(steps.len());
    let mut sepsets = Vec::with_capacity(steps.len());
    for step in steps {
        let next = step.neighbors.iter().map(|v| position[v.0]).filter(|&p| p != usize::MAX).min();
        match next {
            Some(j) => {
                let sep: Vec<VarId> =
                    step.neighbors.iter().copied().filter(|v| cliques[j].binary_search(v).is_ok()).collect();
                parent.push(Some(j));
                sepsets.push(sep);
            }
            None => {
                parent.push(None);
                sepsets.push(Vec::new());
            }
        }
    }
    let factor_assignment = bn
        .vars()
        .map(|v| {
            let mut family: Vec<VarId> = bn.parents(v).to_vec();
            family.push(v);
            cliques.iter().position(|c| family.iter().all(|f| c.binary_search(f).is_ok()))
        })
        .collect();
    Ok(CliqueTree { cliques, eliminated: elim.trace.order(), parent, sepsets, factor_assignment })
}

impl CliqueTree {
    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    /// Cliques whose route to a root passes through `i` (including `i`).
    pub fn upstream_of(&self, i: usize) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.path_to_root(k).contains(&i)).collect()
    }

    fn path_to_root(&self, mut k: usize) -> Vec<usize> {
        let mut path = vec![k];
        while let Some(p) = self.parent[k] {
            path.push(p);
            k = p;
        }
        path
    }

    fn path_between(&self, a: usize, b: usize) -> Option<Vec<usize>> {
        let pa = self.path_to_root(a);
        let pb = self.path_to_root(b);
        let meet = pa.iter().position(|k| pb.contains(k))?;
        let mut path: Vec<usize> = pa[..=meet].to_vec();
        let back = pb.iter().position(|&k| k == pa[meet]).unwrap();
        path.extend(pb[..back].iter().rev());
        Some(path)
    }

    /// Whenever a variable sits in two cliques it sits in every clique on
    /// the path between them, and cliques in different trees share nothing.
    pub fn has_running_intersection(&self) -> bool {
        for a in 0..self.len() {
            for b in a + 1..self.len() {
                let shared: Vec<VarId> =
                    self.cliques[a].iter().copied().filter(|v| self.cliques[b].binary_search(v).is_ok()).collect();
                if shared.is_empty() {
                    continue;
                }
                let Some(path) = self.path_between(a, b) else {
                    return false;
                };
                if !path.iter().all(|&k| shared.iter().all(|v| self.cliques[k].binary_search(v).is_ok())) {
                    return false;
                }
            }
        }
        true
    }

    /// Each assigned family fits in its clique; `require_all` also demands
    /// that every family was assigned.
    pub fn is_family_preserving(&self, bn: &BayesNet, require_all: bool) -> bool {
        bn.vars().all(|v| match self.factor_assignment[v.0] {
            Some(c) => {
                bn.parents(v).iter().chain([&v]).all(|f| self.cliques[c].binary_search(f).is_ok())
            }
            None => !require_all,
        })
    }

    pub fn sepsets_within_intersections(&self) -> bool {
        (0..self.len()).all(|i| match self.parent[i] {
            Some(j) => self.sepsets[i].iter().all(|v| {
                self.cliques[i].binary_search(v).is_ok() && self.cliques[j].binary_search(v).is_ok()
            }),
            None => self.sepsets[i].is_empty(),
        })
    }

    pub fn to_dot(&self, bn: &BayesNet) -> String {
        let label = |c: &[VarId]| c.iter().map(|&v| bn.name(v)).collect::<Vec<_>>().join(",");
        let mut out = String::from("digraph cliques {\n");
        for (i, c) in self.cliques.iter().enumerate() {
            let _ = writeln!(out, "  c{i} [shape=box, label=\"{}\"];", label(c));
        }
        for (i, p) in self.parent.iter().enumerate() {
            if let Some(j) = p {
                let _ = writeln!(out, "  c{i} -> c{j} [label=\"{}\"];", label(&self.sepsets[i]));
            }
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn ids(bn: &BayesNet, names: &[&str]) -> Vec<VarId> {
        names.iter().map(|n| bn.id(n).unwrap()).collect()
    }

    fn sorted(bn: &BayesNet, names: &[&str]) -> Vec<VarId> {
        let mut v = ids(bn, names);
        v.sort_unstable();
        v
    }

    #[test]
    fn min_fill_on_student_after_moralization() {
        let s = fixtures::student();
        let mut j = MarkedGraph::moral(&s);
        let (d, i) = (s.id("D").unwrap(), s.id("I").unwrap());
        assert_eq!(j.min_fill_cost(d).unwrap(), 0);
        // D-S and G-S are both missing while D is still around
        assert_eq!(j.min_fill_cost(i).unwrap(), 2);
        j.eliminate(d).unwrap();
        assert_eq!(j.min_fill_cost(i).unwrap(), 1);
    }

    #[test]
    fn min_fill_small_cases() {
        let mut g = UndirectedGraph::new(4);
        let j = MarkedGraph::new(g.clone());
        assert_eq!(j.min_fill_cost(VarId(0)).unwrap(), 0);
        for (a, b) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
            g.add_edge(VarId(a), VarId(b));
        }
        let mut j = MarkedGraph::new(g);
        assert_eq!(j.min_fill_cost(VarId(0)).unwrap(), 0);
        j.eliminate(VarId(0)).unwrap();
        assert_eq!(j.min_fill_cost(VarId(0)), Err(Error::AlreadyMarked(VarId(0))));
        assert_eq!(j.eliminate(VarId(0)), Err(Error::AlreadyMarked(VarId(0))));
    }

    #[test]
    fn eliminate_student_first_two_steps() {
        let s = fixtures::student();
        let mut j = MarkedGraph::moral(&s);
        let d = j.eliminate(s.id("D").unwrap()).unwrap();
        assert!(d.fill.is_empty());
        assert!(j.is_marked(s.id("D").unwrap()));
        let i = j.eliminate(s.id("I").unwrap()).unwrap();
        let (g, sv) = (s.id("G").unwrap(), s.id("S").unwrap());
        assert_eq!(i.fill, vec![(g.min(sv), g.max(sv))]);
    }

    #[test]
    fn eliminating_a_leaf_adds_nothing() {
        let c = fixtures::chain(3);
        let mut j = MarkedGraph::moral(&c);
        let step = j.eliminate(VarId(2)).unwrap();
        assert_eq!(step.neighbors, vec![VarId(1)]);
        assert!(step.fill.is_empty());
    }

    #[test]
    fn induced_graph_student_cliques() {
        let s = fixtures::student();
        let order = ids(&s, &["D", "I", "H", "G", "S", "L"]);
        let e = induced_graph(&s, &order).unwrap();
        let cliques: Vec<Vec<VarId>> = e.trace.steps.iter().map(EliminationStep::clique).collect();
        for want in [["D", "I", "G"].as_slice(), &["I", "S", "G"], &["G", "J", "S", "L"], &["G", "H", "J"]] {
            assert!(cliques.contains(&sorted(&s, want)), "missing clique {want:?}");
        }
        // replaying the fill log over the moral graph reproduces the induced graph
        let mut replay = moralize(&s);
        for &(a, b) in e.graph.fill_log() {
            replay.add_edge(a, b);
        }
        assert_eq!(&replay, e.graph.graph());
    }

    #[test]
    fn induced_graph_trivial_cases() {
        let c = fixtures::chain(3);
        let e = induced_graph(&c, &[VarId(0), VarId(1)]).unwrap();
        assert!(e.graph.fill_log().is_empty());

        // star around an observed centre: leaves never meet
        let star = BayesNet::from_names(
            &[("c", true), ("a", false), ("b", false), ("d", false)],
            &[("c", "a"), ("c", "b"), ("c", "d")],
        )
        .unwrap();
        let e = induced_graph(&star, &[VarId(1), VarId(2), VarId(3)]).unwrap();
        assert!(e.graph.fill_log().is_empty());
        assert_eq!(e.graph.graph(), &moralize(&star));

        let dup = induced_graph(&c, &[VarId(0), VarId(0)]);
        assert_eq!(dup.unwrap_err(), Error::DuplicateInOrder(VarId(0)));
    }

    #[test]
    fn clique_tree_student_first_ordering() {
        let s = fixtures::student();
        let t = clique_tree(&s, &ids(&s, &["D", "I", "H", "G", "S", "L"])).unwrap();
        assert_eq!(t.cliques[0], sorted(&s, &["D", "I", "G"]));
        assert_eq!(t.sepsets[0], sorted(&s, &["G", "I"]));
        assert_eq!(t.sepsets[1], sorted(&s, &["G", "S"]));
        assert_eq!(t.sepsets[2], sorted(&s, &["G", "J"]));
        assert_eq!(t.parent[0], Some(1));
        assert_eq!(t.parent[1], Some(3));
        assert_eq!(t.parent[2], Some(3));
        assert!(t.has_running_intersection());
        assert!(t.sepsets_within_intersections());
        assert!(t.is_family_preserving(&s, true));
        // D's, G's and I's families live in the first clique, S's in the second
        assert_eq!(t.factor_assignment[s.id("D").unwrap().0], Some(0));
        assert_eq!(t.factor_assignment[s.id("G").unwrap().0], Some(0));
        assert_eq!(t.factor_assignment[s.id("I").unwrap().0], Some(0));
        assert_eq!(t.factor_assignment[s.id("S").unwrap().0], Some(1));
    }

    #[test]
    fn clique_tree_student_second_ordering_is_a_path() {
        let s = fixtures::student();
        let order = ids(&s, &["D", "I", "S", "G", "L", "J", "H"]);
        let t = clique_tree(&s, &order).unwrap();
        let want_sep = [
            sorted(&s, &["I", "G"]),
            sorted(&s, &["G", "S"]),
            sorted(&s, &["G", "J", "L"]),
            sorted(&s, &["L", "J", "H"]),
            sorted(&s, &["J", "H"]),
            sorted(&s, &["H"]),
        ];
        for (i, sep) in want_sep.iter().enumerate() {
            assert_eq!(t.parent[i], Some(i + 1));
            assert_eq!(&t.sepsets[i], sep);
        }
        assert_eq!(t.parent[6], None);
        assert!(t.has_running_intersection());
    }

    #[test]
    fn clique_tree_single_latent() {
        let bn = BayesNet::from_names(&[("z", false), ("x", true)], &[("z", "x")]).unwrap();
        let t = clique_tree(&bn, &[VarId(0)]).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.cliques[0], vec![VarId(0), VarId(1)]);
        assert_eq!(t.parent[0], None);
    }

    #[test]
    fn dot_marks_fill_and_eliminated() {
        let s = fixtures::student();
        let e = induced_graph(&s, &ids(&s, &["D", "I"])).unwrap();
        let dot = e.graph.to_dot(&s);
        assert!(dot.contains("\"G\" -- \"S\" [style=dotted]"));
        assert!(dot.contains("\"D\" [label=\"D\", style=filled, fillcolor=black"));
    }
}
