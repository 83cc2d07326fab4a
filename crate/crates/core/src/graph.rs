//! Bayesian-network structures and the structural primitives built on them.
//!
//! Variables are dense indices `0..n` with a name table on the side. Every
//! routine breaks ties by ascending index so that traces are reproducible.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense index of a variable inside one [`BayesNet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl VarId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl From<usize> for VarId {
    fn from(i: usize) -> Self {
        VarId(i)
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A directed acyclic graph over named variables, partitioned into observed
/// and latent variables.
///
/// Parent and child lists are kept sorted. The constructor rejects cycles,
/// duplicate edges and self-loops, so every value of this type is a DAG.
#[derive(Clone, Debug)]
pub struct BayesNet {
    names: Vec<String>,
    index: HashMap<String, VarId>,
    observed: Vec<bool>,
    parents: Vec<Vec<VarId>>,
    children: Vec<Vec<VarId>>,
}

impl PartialEq for BayesNet {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names && self.observed == other.observed && self.parents == other.parents
    }
}

impl Eq for BayesNet {}

impl BayesNet {
    pub fn new(names: Vec<String>, observed: Vec<bool>, edges: &[(VarId, VarId)]) -> Result<Self> {
        let n = names.len();
        if observed.len() != n {
            return Err(Error::OutOfRange(observed.len(), n));
        }
        let mut index = HashMap::with_capacity(n);
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), VarId(i)).is_some() {
                return Err(Error::DuplicateName(name.clone()));
            }
        }
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for &(from, to) in edges {
            for v in [from, to] {
                if v.0 >= n {
                    return Err(Error::OutOfRange(v.0, n));
                }
            }
            if from == to {
                return Err(Error::SelfLoop(names[from.0].clone()));
            }
            parents[to.0].push(from);
            children[from.0].push(to);
        }
        for (v, list) in parents.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::DuplicateEdge(names[w[0].0].clone(), names[v].clone()));
            }
        }
        for list in children.iter_mut() {
            list.sort_unstable();
        }
        let bn = BayesNet { names, index, observed, parents, children };
        if let Some(v) = bn.find_cycle_member() {
            return Err(Error::Cyclic(bn.names[v.0].clone()));
        }
        Ok(bn)
    }

    /// Convenience constructor from `(name, observed)` pairs and named edges.
    pub fn from_names(vars: &[(&str, bool)], edges: &[(&str, &str)]) -> Result<Self> {
        let names: Vec<String> = vars.iter().map(|(n, _)| n.to_string()).collect();
        let observed = vars.iter().map(|&(_, o)| o).collect();
        let lookup: HashMap<&str, usize> = vars.iter().enumerate().map(|(i, (n, _))| (*n, i)).collect();
        let mut ids = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            let ia = *lookup.get(a).ok_or_else(|| Error::UnknownName(a.to_string()))?;
            let ib = *lookup.get(b).ok_or_else(|| Error::UnknownName(b.to_string()))?;
            ids.push((VarId(ia), VarId(ib)));
        }
        BayesNet::new(names, observed, &ids)
    }

    /// A graph over the same universe (names and observed flags) with new edges.
    pub fn with_edges(&self, edges: &[(VarId, VarId)]) -> Result<Self> {
        BayesNet::new(self.names.clone(), self.observed.clone(), edges)
    }

    /// Copy of this graph with the single edge `from -> to` removed.
    pub fn without_edge(&self, from: VarId, to: VarId) -> Self {
        let mut out = self.clone();
        out.parents[to.0].retain(|&p| p != from);
        out.children[from.0].retain(|&c| c != to);
        out
    }

    // Kahn's scan; returns a variable left over when a cycle blocks the scan.
    fn find_cycle_member(&self) -> Option<VarId> {
        let n = self.n();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut stack: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = stack.pop() {
            seen += 1;
            for c in &self.children[v] {
                indeg[c.0] -= 1;
                if indeg[c.0] == 0 {
                    stack.push(c.0);
                }
            }
        }
        if seen == n {
            None
        } else {
            (0..n).find(|&v| indeg[v] > 0).map(VarId)
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.n()).map(VarId)
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.names[v.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id(&self, name: &str) -> Result<VarId> {
        self.index.get(name).copied().ok_or_else(|| Error::UnknownName(name.to_string()))
    }

    pub fn check(&self, v: VarId) -> Result<()> {
        if v.0 < self.n() {
            Ok(())
        } else {
            Err(Error::OutOfRange(v.0, self.n()))
        }
    }

    pub fn parents(&self, v: VarId) -> &[VarId] {
        &self.parents[v.0]
    }

    pub fn children(&self, v: VarId) -> &[VarId] {
        &self.children[v.0]
    }

    pub fn is_observed(&self, v: VarId) -> bool {
        self.observed[v.0]
    }

    pub fn observed_flags(&self) -> &[bool] {
        &self.observed
    }

    pub fn latents(&self) -> Vec<VarId> {
        self.vars().filter(|&v| !self.observed[v.0]).collect()
    }

    pub fn observed(&self) -> Vec<VarId> {
        self.vars().filter(|&v| self.observed[v.0]).collect()
    }

    pub fn has_edge(&self, from: VarId, to: VarId) -> bool {
        self.parents[to.0].binary_search(&from).is_ok()
    }

    /// Directed edges `(parent, child)` sorted by parent, then child.
    pub fn edges(&self) -> Vec<(VarId, VarId)> {
        let mut out: Vec<(VarId, VarId)> = self
            .children
            .iter()
            .enumerate()
            .flat_map(|(p, cs)| cs.iter().map(move |&c| (VarId(p), c)))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// True when both graphs share names and observed flags, in the same order.
    pub fn same_universe(&self, other: &BayesNet) -> bool {
        self.names == other.names && self.observed == other.observed
    }

    /// Strict descendants of `v`, as a membership vector.
    pub fn descendants(&self, v: VarId) -> Vec<bool> {
        self.reach(v, |bn, u| bn.children(u))
    }

    /// Strict ancestors of `v`, as a membership vector.
    pub fn ancestors(&self, v: VarId) -> Vec<bool> {
        self.reach(v, |bn, u| bn.parents(u))
    }

    fn reach<'a>(&'a self, v: VarId, step: impl Fn(&'a BayesNet, VarId) -> &'a [VarId]) -> Vec<bool> {
        let mut seen = vec![false; self.n()];
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            for &w in step(self, u) {
                if !seen[w.0] {
                    seen[w.0] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Display helper: `{A,B}` using variable names.
    pub fn fmt_set<'a>(&self, vars: impl IntoIterator<Item = &'a VarId>) -> String {
        let names: Vec<&str> = vars.into_iter().map(|&v| self.name(v)).collect();
        format!("{{{}}}", names.join(","))
    }
}

/// Simple undirected graph with sorted adjacency sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UndirectedGraph {
    adj: Vec<BTreeSet<VarId>>,
}

impl UndirectedGraph {
    pub fn new(n: usize) -> Self {
        UndirectedGraph { adj: vec![BTreeSet::new(); n] }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    /// Adds `{a, b}`; returns false if the edge was already present.
    /// Self-loops are ignored.
    pub fn add_edge(&mut self, a: VarId, b: VarId) -> bool {
        if a == b {
            return false;
        }
        let fresh = self.adj[a.0].insert(b);
        self.adj[b.0].insert(a);
        fresh
    }

    pub fn has_edge(&self, a: VarId, b: VarId) -> bool {
        self.adj[a.0].contains(&b)
    }

    pub fn neighbors(&self, v: VarId) -> &BTreeSet<VarId> {
        &self.adj[v.0]
    }

    /// Edges as `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(VarId, VarId)> {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| ns.range(VarId(a + 1)..).map(move |&b| (VarId(a), b)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn is_subgraph_of(&self, other: &UndirectedGraph) -> bool {
        self.n() == other.n() && self.adj.iter().zip(&other.adj).all(|(a, b)| a.is_subset(b))
    }
}

/// Topological order with ties broken by ascending index.
pub fn topological_order(bn: &BayesNet) -> Vec<VarId> {
    let mut indeg: Vec<usize> = bn.vars().map(|v| bn.parents(v).len()).collect();
    let mut ready: BinaryHeap<Reverse<VarId>> = bn.vars().filter(|v| indeg[v.0] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(bn.n());
    while let Some(Reverse(v)) = ready.pop() {
        order.push(v);
        for &c in bn.children(v) {
            indeg[c.0] -= 1;
            if indeg[c.0] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    debug_assert_eq!(order.len(), bn.n());
    order
}

pub fn skeleton(bn: &BayesNet) -> UndirectedGraph {
    let mut g = UndirectedGraph::new(bn.n());
    for (p, c) in bn.edges() {
        g.add_edge(p, c);
    }
    g
}

/// All `(x, z, y)` with `x -> z <- y`, `x < y` and no edge between `x` and `y`.
pub fn immoralities(bn: &BayesNet) -> BTreeSet<(VarId, VarId, VarId)> {
    let mut out = BTreeSet::new();
    for z in bn.vars() {
        let ps = bn.parents(z);
        for (i, &x) in ps.iter().enumerate() {
            for &y in &ps[i + 1..] {
                if !bn.has_edge(x, y) && !bn.has_edge(y, x) {
                    out.insert((x, z, y));
                }
            }
        }
    }
    out
}

/// Skeleton plus an edge between every pair of co-parents.
pub fn moralize(bn: &BayesNet) -> UndirectedGraph {
    let mut g = skeleton(bn);
    for z in bn.vars() {
        let ps = bn.parents(z);
        for (i, &x) in ps.iter().enumerate() {
            for &y in &ps[i + 1..] {
                g.add_edge(x, y);
            }
        }
    }
    g
}

/// Parents, children and the children's other parents.
pub fn markov_blanket(bn: &BayesNet, v: VarId) -> BTreeSet<VarId> {
    let mut mb: BTreeSet<VarId> = bn.parents(v).iter().copied().collect();
    for &c in bn.children(v) {
        mb.insert(c);
        mb.extend(bn.parents(c).iter().copied());
    }
    mb.remove(&v);
    mb
}

/// Latent variables with no observed descendant.
pub fn barren_latents(bn: &BayesNet) -> Vec<VarId> {
    // a variable has an observed descendant iff one of its children is
    // observed or has one; scan in reverse topological order
    let mut feeds = vec![false; bn.n()];
    for &v in topological_order(bn).iter().rev() {
        feeds[v.0] = bn.children(v).iter().any(|&c| bn.is_observed(c) || feeds[c.0]);
    }
    bn.vars().filter(|&v| !bn.is_observed(v) && !feeds[v.0]).collect()
}
