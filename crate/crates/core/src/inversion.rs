//! Inverse structures for amortized inference: the NaMI elimination-based
//! construction and the heuristic, fully-connected and mean-field baselines.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::elimination::MarkedGraph;
use crate::error::{Error, Result};
use crate::independence::d_separated;
use crate::graph::{markov_blanket, topological_order, BayesNet, VarId};

/// Which way "upstream" points when building the frontier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Upstream = parents; roots of the model are eliminated first.
    Forward,
    /// Upstream = children; leaves are eliminated first.
    Reverse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Nami(Direction),
    Grouped(Direction),
    Heuristic,
    FullyConnected,
    MeanField,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Nami(Direction::Forward) => "forward",
            Mode::Nami(Direction::Reverse) => "reverse",
            Mode::Grouped(Direction::Forward) => "grouped-forward",
            Mode::Grouped(Direction::Reverse) => "grouped-reverse",
            Mode::Heuristic => "heuristic",
            Mode::FullyConnected => "full",
            Mode::MeanField => "mean-field",
        }
    }

    pub fn is_nami(self) -> bool {
        matches!(self, Mode::Nami(_) | Mode::Grouped(_))
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "forward" => Mode::Nami(Direction::Forward),
            "reverse" => Mode::Nami(Direction::Reverse),
            "grouped-forward" => Mode::Grouped(Direction::Forward),
            "grouped-reverse" => Mode::Grouped(Direction::Reverse),
            "heuristic" => Mode::Heuristic,
            "full" | "fully-connected" => Mode::FullyConnected,
            "mean-field" => Mode::MeanField,
            other => return Err(format!("unknown mode {other:?}")),
        })
    }
}

/// How the frontier decides that a variable is ready.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FrontierRule {
    /// Ready once every direct upstream neighbour inside the current group is marked.
    Parents,
    /// Ready once every nearest upstream group member is marked, looking
    /// through variables outside the group. Without this, a latent whose only
    /// latent ancestor sits behind an observed variable can be picked before
    /// that ancestor, which breaks naturalness.
    #[default]
    Nearest,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamiOptions {
    pub direction: Direction,
    /// Ordered partition of the latents; each group is eliminated in full
    /// before the next one starts.
    pub groups: Option<Vec<Vec<VarId>>>,
    /// After the latents, keep eliminating the observed variables so that the
    /// inverse also factorizes `q(x)`. When off, observed variables are only
    /// ever parents and carry no edges among themselves.
    pub eliminate_observed: bool,
    /// Shrink each observed variable's parents to a minimal set that still
    /// separates it from the other observed variables eliminated after it, so
    /// that the `q(x)` block is itself a minimal I-map of the observed marginal.
    /// The induced-graph parents can keep a pair that is only coupled through
    /// a moral edge. Only matters with `eliminate_observed`.
    pub minimal_observed: bool,
    pub frontier: FrontierRule,
}

impl NamiOptions {
    pub fn new(direction: Direction) -> Self {
        NamiOptions {
            direction,
            groups: None,
            eliminate_observed: true,
            minimal_observed: true,
            frontier: FrontierRule::default(),
        }
    }
}

/// One row of the NaMI trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamiStep {
    pub frontier: Vec<VarId>,
    pub var: VarId,
    pub fill: Vec<(VarId, VarId)>,
    pub parents: Vec<VarId>,
    /// Neighbours dropped from `parents` by the observed-block pruning.
    pub pruned: Vec<VarId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamiTrace {
    pub moral_edges: Vec<(VarId, VarId)>,
    pub steps: Vec<NamiStep>,
}

impl NamiTrace {
    /// Step table with the frontier, the chosen variable, fill edges and parents.
    pub fn render(&self, bn: &BayesNet) -> String {
        let edge = |&(a, b): &(VarId, VarId)| format!("{}–{}", bn.name(a), bn.name(b));
        let edges = |es: &[(VarId, VarId)]| {
            if es.is_empty() {
                "∅".to_string()
            } else {
                format!("{{{}}}", es.iter().map(edge).collect::<Vec<_>>().join(", "))
            }
        };
        let set = |vs: &[VarId]| if vs.is_empty() { "∅".to_string() } else { bn.fmt_set(vs) };
        let mut out = String::new();
        let _ = writeln!(out, "0: moral edges={}", edges(&self.moral_edges));
        for (i, s) in self.steps.iter().enumerate() {
            let _ = write!(
                out,
                "{}: S={} v={} fill={} Pa={}",
                i + 1,
                set(&s.frontier),
                bn.name(s.var),
                edges(&s.fill),
                set(&s.parents)
            );
            if !s.pruned.is_empty() {
                let _ = write!(out, " pruned={}", bn.fmt_set(&s.pruned));
            }
            if bn.is_observed(s.var) {
                out.push_str(" [observed]");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InverseStructure {
    pub graph: BayesNet,
    /// Elimination order; empty for the non-NaMI baselines.
    pub elim_order: Vec<VarId>,
    pub mode: Mode,
    pub trace: Option<NamiTrace>,
}

impl InverseStructure {
    /// Checks that no latent variable is a parent of an observed one.
    pub fn validate(&self) -> Result<()> {
        validate_inverse(&self.graph)
    }

    pub fn to_dot(&self) -> String {
        inverse_dot(&self.graph)
    }
}

pub fn validate_inverse(h: &BayesNet) -> Result<()> {
    for (a, b) in h.edges() {
        if !h.is_observed(a) && h.is_observed(b) {
            return Err(Error::InvalidInverse { latent: h.name(a).to_string(), observed: h.name(b).to_string() });
        }
    }
    Ok(())
}

/// DOT rendering of a directed graph with observed nodes shaded.
pub fn inverse_dot(h: &BayesNet) -> String {
    let mut out = String::from("digraph inverse {\n");
    for v in h.vars() {
        let style = if h.is_observed(v) { ", style=filled, fillcolor=gray" } else { "" };
        let _ = writeln!(out, "  \"{}\" [label=\"{}\"{}];", h.name(v), h.name(v), style);
    }
    for (a, b) in h.edges() {
        let _ = writeln!(out, "  \"{}\" -> \"{}\";", h.name(a), h.name(b));
    }
    out.push_str("}\n");
    out
}

pub fn edge_count(h: &InverseStructure) -> usize {
    h.graph.edge_count()
}

fn require_latents(bn: &BayesNet) -> Result<Vec<VarId>> {
    let latents = bn.latents();
    if latents.is_empty() {
        return Err(Error::NoLatents);
    }
    Ok(latents)
}

fn check_partition(bn: &BayesNet, groups: &[Vec<VarId>]) -> Result<()> {
    let mut seen = vec![false; bn.n()];
    for g in groups {
        if g.is_empty() {
            return Err(Error::InvalidPartition("empty group".into()));
        }
        for &v in g {
            bn.check(v)?;
            if bn.is_observed(v) {
                return Err(Error::InvalidPartition(format!("{} is observed", bn.name(v))));
            }
            if std::mem::replace(&mut seen[v.0], true) {
                return Err(Error::InvalidPartition(format!("{} appears twice", bn.name(v))));
            }
        }
    }
    if let Some(v) = bn.latents().into_iter().find(|v| !seen[v.0]) {
        return Err(Error::InvalidPartition(format!("{} is in no group", bn.name(v))));
    }
    Ok(())
}

/// For each member of `group`, the group members it has to wait for.
fn upstream_in_group(bn: &BayesNet, group: &[VarId], in_group: &[bool], dir: Direction, rule: FrontierRule) -> Vec<Vec<VarId>> {
    let up = |v: VarId| match dir {
        Direction::Forward => bn.parents(v),
        Direction::Reverse => bn.children(v),
    };
    let mut seen = vec![usize::MAX; bn.n()];
    group
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let mut found = Vec::new();
            match rule {
                FrontierRule::Parents => found.extend(up(v).iter().copied().filter(|u| in_group[u.0])),
                FrontierRule::Nearest => {
                    let mut stack: Vec<VarId> = up(v).to_vec();
                    while let Some(u) = stack.pop() {
                        if std::mem::replace(&mut seen[u.0], k) == k {
                            continue;
                        }
                        if in_group[u.0] {
                            found.push(u);
                        } else {
                            stack.extend_from_slice(up(u));
                        }
                    }
                }
            }
            found
        })
        .collect()
}

/// NaMI inversion. Moralizes `bn`, then repeatedly eliminates the frontier
/// variable of least fill (ties to the smaller id), giving it the unmarked
/// neighbours as parents in the inverse.
pub fn nami_invert(bn: &BayesNet, opts: &NamiOptions) -> Result<InverseStructure> {
    let latents = require_latents(bn)?;
    let mut phases: Vec<Vec<VarId>> = match &opts.groups {
        Some(groups) => {
            check_partition(bn, groups)?;
            groups.clone()
        }
        None => vec![latents],
    };
    if opts.eliminate_observed {
        let observed = bn.observed();
        if !observed.is_empty() {
            phases.push(observed);
        }
    }

    let mut j = MarkedGraph::moral(bn);
    let moral_edges: Vec<(VarId, VarId)> = j.graph().edges().into_iter().filter(|&(a, b)| !bn.has_edge(a, b) && !bn.has_edge(b, a)).collect();
    let mut steps = Vec::with_capacity(bn.n());
    let mut in_group = vec![false; bn.n()];
    let mut waiting = vec![0usize; bn.n()];

    for group in &phases {
        for &v in group {
            in_group[v.0] = true;
        }
        let upstream = upstream_in_group(bn, group, &in_group, opts.direction, opts.frontier);
        let mut downstream: Vec<Vec<VarId>> = vec![Vec::new(); bn.n()];
        let mut frontier = BTreeSet::new();
        for (&v, ups) in group.iter().zip(&upstream) {
            waiting[v.0] = ups.len();
            for &u in ups {
                downstream[u.0].push(v);
            }
            if ups.is_empty() {
                frontier.insert(v);
            }
        }
        while !frontier.is_empty() {
            let mut best: Option<(usize, VarId)> = None;
            for &v in &frontier {
                let cost = j.min_fill_cost(v)?;
                if best.is_none_or(|(c, _)| cost < c) {
                    best = Some((cost, v));
                }
            }
            let (_, v) = best.expect("frontier is non-empty");
            let shown: Vec<VarId> = frontier.iter().copied().collect();
            frontier.remove(&v);
            let step = j.eliminate(v)?;
            steps.push(NamiStep { frontier: shown, var: v, fill: step.fill, parents: step.neighbors, pruned: Vec::new() });
            for &w in &downstream[v.0] {
                waiting[w.0] -= 1;
                if waiting[w.0] == 0 {
                    frontier.insert(w);
                }
            }
        }
        for &v in group {
            in_group[v.0] = false;
        }
    }

    if opts.eliminate_observed && opts.minimal_observed {
        for s in steps.iter_mut().filter(|s| bn.is_observed(s.var)) {
            s.pruned = prune_parents(bn, s.var, &mut s.parents)?;
        }
    }
    let edges: Vec<(VarId, VarId)> = steps.iter().flat_map(|s| s.parents.iter().map(move |&p| (p, s.var))).collect();
    let graph = bn.with_edges(&edges)?;
    let mode = if opts.groups.is_some() { Mode::Grouped(opts.direction) } else { Mode::Nami(opts.direction) };
    Ok(InverseStructure {
        graph,
        elim_order: steps.iter().map(|s| s.var).collect(),
        mode,
        trace: Some(NamiTrace { moral_edges, steps }),
    })
}

// Drops parents `p` with `v ⟂ p | rest` in the model until none is left. Each
// drop keeps `v` separated from every later variable by contraction.
fn prune_parents(bn: &BayesNet, v: VarId, parents: &mut Vec<VarId>) -> Result<Vec<VarId>> {
    let mut dropped = Vec::new();
    loop {
        let mut changed = false;
        let mut i = 0;
        while i < parents.len() {
            let p = parents[i];
            let rest: Vec<VarId> = parents.iter().copied().filter(|&u| u != p).collect();
            if d_separated(bn, &[v], &[p], &rest)? {
                parents.remove(i);
                dropped.push(p);
                changed = true;
            } else {
                i += 1;
            }
        }
        if !changed {
            break;
        }
    }
    dropped.sort_unstable();
    Ok(dropped)
}

/// Shorthand for ungrouped NaMI with the default options.
pub fn nami(bn: &BayesNet, direction: Direction) -> Result<InverseStructure> {
    nami_invert(bn, &NamiOptions::new(direction))
}

/// Heuristic inverse: visit variables in reverse topological order and give
/// each the previously visited members of its Markov blanket as parents,
/// dropping latent candidates for observed variables.
pub fn stuhlmuller_invert(bn: &BayesNet) -> Result<InverseStructure> {
    require_latents(bn)?;
    let mut order = topological_order(bn);
    order.reverse();
    let mut visited = vec![false; bn.n()];
    let mut edges = Vec::new();
    for &y in &order {
        for p in markov_blanket(bn, y) {
            if visited[p.0] && (!bn.is_observed(y) || bn.is_observed(p)) {
                edges.push((p, y));
            }
        }
        visited[y.0] = true;
    }
    Ok(InverseStructure { graph: bn.with_edges(&edges)?, elim_order: Vec::new(), mode: Mode::Heuristic, trace: None })
}

/// Each latent depends on every observed variable and every earlier latent;
/// the observed block is completed in topological order, so the inverse
/// asserts no independencies at all. `order` defaults to reverse topological.
pub fn fully_connected_inverse(bn: &BayesNet, order: Option<&[VarId]>) -> Result<InverseStructure> {
    let latents = require_latents(bn)?;
    let topo = topological_order(bn);
    let order: Vec<VarId> = match order {
        Some(o) => {
            let mut sorted = o.to_vec();
            sorted.sort_unstable();
            if sorted != latents {
                return Err(Error::NotAPermutation("order must list every latent exactly once".into()));
            }
            o.to_vec()
        }
        None => topo.iter().rev().copied().filter(|&v| !bn.is_observed(v)).collect(),
    };
    let observed: Vec<VarId> = topo.iter().copied().filter(|&v| bn.is_observed(v)).collect();
    let mut edges = Vec::new();
    for (i, &x) in observed.iter().enumerate() {
        edges.extend(observed[..i].iter().map(|&p| (p, x)));
    }
    for (i, &z) in order.iter().enumerate() {
        edges.extend(observed.iter().map(|&x| (x, z)));
        edges.extend(order[..i].iter().map(|&p| (p, z)));
    }
    Ok(InverseStructure { graph: bn.with_edges(&edges)?, elim_order: Vec::new(), mode: Mode::FullyConnected, trace: None })
}

/// Every latent depends on all observed variables and on nothing else.
pub fn mean_field_inverse(bn: &BayesNet) -> Result<InverseStructure> {
    let latents = require_latents(bn)?;
    let observed = bn.observed();
    let edges: Vec<(VarId, VarId)> = latents.iter().flat_map(|&z| observed.iter().map(move |&x| (x, z))).collect();
    Ok(InverseStructure { graph: bn.with_edges(&edges)?, elim_order: Vec::new(), mode: Mode::MeanField, trace: None })
}

/// Dispatch by mode with default options; grouped modes need explicit groups.
pub fn invert(bn: &BayesNet, mode: Mode, groups: Option<Vec<Vec<VarId>>>) -> Result<InverseStructure> {
    match mode {
        Mode::Nami(d) | Mode::Grouped(d) => {
            let mut opts = NamiOptions::new(d);
            opts.groups = groups;
            if matches!(mode, Mode::Grouped(_)) && opts.groups.is_none() {
                return Err(Error::InvalidPartition("grouped mode needs groups".into()));
            }
            nami_invert(bn, &opts)
        }
        Mode::Heuristic => stuhlmuller_invert(bn),
        Mode::FullyConnected => fully_connected_inverse(bn, None),
        Mode::MeanField => mean_field_inverse(bn),
    }
}
