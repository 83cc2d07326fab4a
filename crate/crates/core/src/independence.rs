//! Active trails, d-separation and enumeration of the pairwise independence
//! assertions a DAG encodes.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::graph::{immoralities, skeleton, BayesNet, VarId};

/// Largest graph `enumerate_independencies` accepts unless told otherwise.
pub const DEFAULT_ENUM_CAP: usize = 14;

/// Hard ceiling for exhaustive enumeration: conditioning sets are packed in a `u64`.
pub const MAX_ENUM_VARS: usize = 64;

/// `(X ⟂ Y | Z)`, normalized so that `min(X) < min(Y)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IndepAssertion {
    pub x: Vec<VarId>,
    pub y: Vec<VarId>,
    pub z: Vec<VarId>,
}

impl IndepAssertion {
    /// Singleton assertion `(a ⟂ b | z)`; the pair is swapped if needed.
    pub fn pair(a: VarId, b: VarId, z: impl IntoIterator<Item = VarId>) -> Self {
        let (x, y) = if a <= b { (a, b) } else { (b, a) };
        let mut z: Vec<VarId> = z.into_iter().collect();
        z.sort_unstable();
        z.dedup();
        IndepAssertion { x: vec![x], y: vec![y], z }
    }

    pub fn display(&self, bn: &BayesNet) -> String {
        let side = |s: &[VarId]| {
            let names: Vec<&str> = s.iter().map(|&v| bn.name(v)).collect();
            names.join(",")
        };
        let z = if self.z.is_empty() { "∅".to_string() } else { side(&self.z) };
        format!("({} ⟂ {} | {})", side(&self.x), side(&self.y), z)
    }

    /// `[x, [z...], [y...]]` with names, the export layout for independence lists.
    pub fn to_json(&self, bn: &BayesNet) -> Value {
        let names = |s: &[VarId]| s.iter().map(|&v| bn.name(v).to_string()).collect::<Vec<_>>();
        let x = names(&self.x);
        let x = if x.len() == 1 { json!(x[0]) } else { json!(x) };
        json!([x, names(&self.z), names(&self.y)])
    }
}

// Canonical order: by X, then Y, then smaller conditioning sets first.
impl Ord for IndepAssertion {
    fn cmp(&self, other: &Self) -> Ordering {
        self.x
            .cmp(&other.x)
            .then_with(|| self.y.cmp(&other.y))
            .then_with(|| self.z.len().cmp(&other.z.len()))
            .then_with(|| self.z.cmp(&other.z))
    }
}

impl PartialOrd for IndepAssertion {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sorted set of pairwise assertions over a universe of `universe` variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndepSet {
    pub universe: usize,
    assertions: Vec<IndepAssertion>,
}

impl IndepSet {
    pub fn from_assertions(universe: usize, mut assertions: Vec<IndepAssertion>) -> Self {
        assertions.sort();
        assertions.dedup();
        IndepSet { universe, assertions }
    }

    pub fn assertions(&self) -> &[IndepAssertion] {
        &self.assertions
    }

    pub fn len(&self) -> usize {
        self.assertions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assertions.is_empty()
    }

    pub fn contains(&self, a: &IndepAssertion) -> bool {
        self.assertions.binary_search(a).is_ok()
    }

    pub fn is_subset(&self, other: &IndepSet) -> bool {
        self.assertions.iter().all(|a| other.contains(a))
    }

    pub fn to_json(&self, bn: &BayesNet) -> Value {
        Value::Array(self.assertions.iter().map(|a| a.to_json(bn)).collect())
    }
}

/// Checks a single trail against the active-trail definition.
pub fn is_active_trail(bn: &BayesNet, trail: &[VarId], z: &[VarId]) -> Result<bool> {
    for &v in trail.iter().chain(z) {
        bn.check(v)?;
    }
    let distinct: BTreeSet<VarId> = trail.iter().copied().collect();
    if distinct.len() != trail.len() {
        return Err(Error::InvalidTrail("trail repeats a variable".into()));
    }
    for w in trail.windows(2) {
        if !bn.has_edge(w[0], w[1]) && !bn.has_edge(w[1], w[0]) {
            return Err(Error::InvalidTrail(format!("{} and {} are not adjacent", bn.name(w[0]), bn.name(w[1]))));
        }
    }
    let mut in_z = vec![false; bn.n()];
    for &v in z {
        in_z[v.0] = true;
    }
    let Some((&first, _)) = trail.split_first() else {
        return Ok(true);
    };
    if in_z[first.0] || in_z[trail[trail.len() - 1].0] {
        return Ok(false);
    }
    for w in trail.windows(3) {
        let (prev, v, next) = (w[0], w[1], w[2]);
        let collider = bn.has_edge(prev, v) && bn.has_edge(next, v);
        if collider {
            let activated = in_z[v.0] || bn.descendants(v).iter().zip(&in_z).any(|(&d, &o)| d && o);
            if !activated {
                return Ok(false);
            }
        } else if in_z[v.0] {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `d-sep(X; Y | Z)` by the reachable-nodes traversal (ancestors of `Z`
/// first, then a two-direction sweep from `X`).
pub fn d_separated(bn: &BayesNet, x: &[VarId], y: &[VarId], z: &[VarId]) -> Result<bool> {
    let n = bn.n();
    let mut tag = vec![0u8; n];
    for (bit, set) in [(1u8, x), (2, y), (4, z)] {
        for &v in set {
            bn.check(v)?;
            if tag[v.0] & !bit != 0 {
                return Err(Error::Overlap(v));
            }
            tag[v.0] |= bit;
        }
    }
    let in_z: Vec<bool> = tag.iter().map(|t| t & 4 != 0).collect();
    let reach = reachable(bn, x, &in_z);
    Ok(!y.iter().any(|v| reach[v.0]))
}

/// Variables with an active trail from some member of `sources` given `in_z`.
pub(crate) fn reachable(bn: &BayesNet, sources: &[VarId], in_z: &[bool]) -> Vec<bool> {
    let n = bn.n();
    // ancestors of Z, Z included
    let mut anc = in_z.to_vec();
    let mut stack: Vec<VarId> = (0..n).filter(|&v| in_z[v]).map(VarId).collect();
    while let Some(v) = stack.pop() {
        for &p in bn.parents(v) {
            if !anc[p.0] {
                anc[p.0] = true;
                stack.push(p);
            }
        }
    }
    const UP: u8 = 1; // arrived from a child
    const DOWN: u8 = 2; // arrived from a parent
    let mut visited = vec![0u8; n];
    let mut reach = vec![false; n];
    let mut work: Vec<(VarId, u8)> = sources.iter().map(|&s| (s, UP)).collect();
    while let Some((v, dir)) = work.pop() {
        if visited[v.0] & dir != 0 {
            continue;
        }
        visited[v.0] |= dir;
        if !in_z[v.0] {
            reach[v.0] = true;
        }
        if dir == UP {
            if !in_z[v.0] {
                work.extend(bn.parents(v).iter().map(|&p| (p, UP)));
                work.extend(bn.children(v).iter().map(|&c| (c, DOWN)));
            }
        } else {
            if !in_z[v.0] {
                work.extend(bn.children(v).iter().map(|&c| (c, DOWN)));
            }
            if anc[v.0] {
                work.extend(bn.parents(v).iter().map(|&p| (p, UP)));
            }
        }
    }
    reach
}

/// Bitmask view of a DAG with at most 64 variables, for the enumeration hot loops.
#[derive(Clone, Debug)]
pub(crate) struct MaskDag {
    parents: Vec<u64>,
    children: Vec<u64>,
}

impl MaskDag {
    pub(crate) fn new(bn: &BayesNet) -> Self {
        assert!(bn.n() <= MAX_ENUM_VARS);
        let mut parents = vec![0u64; bn.n()];
        let mut children = vec![0u64; bn.n()];
        for (p, c) in bn.edges() {
            parents[c.0] |= 1 << p.0;
            children[p.0] |= 1 << c.0;
        }
        MaskDag { parents, children }
    }

    pub(crate) fn remove_edge(&mut self, from: VarId, to: VarId) {
        self.parents[to.0] &= !(1 << from.0);
        self.children[from.0] &= !(1 << to.0);
    }

    /// Same traversal as [`reachable`], on bitmasks.
    pub(crate) fn separated(&self, x: usize, y: usize, z: u64) -> bool {
        let mut anc = z;
        let mut frontier = z;
        while frontier != 0 {
            let v = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            let fresh = self.parents[v] & !anc;
            anc |= fresh;
            frontier |= fresh;
        }
        let mut up_seen = 0u64;
        let mut down_seen = 0u64;
        let mut up_todo = 1u64 << x;
        let mut down_todo = 0u64;
        loop {
            if up_todo != 0 {
                let v = up_todo.trailing_zeros() as usize;
                let bit = 1u64 << v;
                up_todo &= !bit;
                up_seen |= bit;
                if z & bit == 0 {
                    if v == y {
                        return false;
                    }
                    up_todo |= self.parents[v] & !up_seen;
                    down_todo |= self.children[v] & !down_seen;
                }
            } else if down_todo != 0 {
                let v = down_todo.trailing_zeros() as usize;
                let bit = 1u64 << v;
                down_todo &= !bit;
                down_seen |= bit;
                if z & bit == 0 {
                    if v == y {
                        return false;
                    }
                    down_todo |= self.children[v] & !down_seen;
                }
                if anc & bit != 0 {
                    up_todo |= self.parents[v] & !up_seen;
                }
            } else {
                return true;
            }
        }
    }
}

/// Conditioning sets over `rest`, smallest first and lexicographic within a
/// size, packed as bitmasks. This is the canonical iteration order for
/// witnesses.
pub(crate) fn conditioning_sets(rest: &[usize]) -> Vec<u64> {
    let r = rest.len();
    let mut out = Vec::with_capacity(1usize << r);
    let mut idx: Vec<usize> = Vec::with_capacity(r);
    for k in 0..=r {
        idx.clear();
        idx.extend(0..k);
        loop {
            out.push(idx.iter().fold(0u64, |m, &i| m | 1 << rest[i]));
            // advance to the next k-combination
            let mut i = k;
            while i > 0 && idx[i - 1] == r - k + (i - 1) {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    out
}

/// Pairs `(i, j)` with `i < j` and the variables outside each pair.
pub(crate) fn pairs(n: usize) -> impl Iterator<Item = (usize, usize, Vec<usize>)> {
    (0..n).flat_map(move |i| {
        (i + 1..n).map(move |j| (i, j, (0..n).filter(|&k| k != i && k != j).collect()))
    })
}

pub(crate) fn mask_to_vars(mask: u64) -> Vec<VarId> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    let mut m = mask;
    while m != 0 {
        out.push(VarId(m.trailing_zeros() as usize));
        m &= m - 1;
    }
    out
}

/// Every `(Xi ⟂ Xj | Z)` with singleton `Xi`, `Xj` that d-separation licenses.
pub fn enumerate_independencies(bn: &BayesNet, cap: usize) -> Result<IndepSet> {
    let n = bn.n();
    if n > cap.min(MAX_ENUM_VARS) {
        return Err(Error::SizeCap { n, cap: cap.min(MAX_ENUM_VARS) });
    }
    let dag = MaskDag::new(bn);
    let mut out = Vec::new();
    for (i, j, rest) in pairs(n) {
        for z in conditioning_sets(&rest) {
            if dag.separated(i, j, z) {
                out.push(IndepAssertion { x: vec![VarId(i)], y: vec![VarId(j)], z: mask_to_vars(z) });
            }
        }
    }
    Ok(IndepSet::from_assertions(n, out))
}

/// Same skeleton and same immoralities.
pub fn same_markov_equivalence(g: &BayesNet, h: &BayesNet) -> Result<bool> {
    if g.names() != h.names() {
        return Err(Error::UniverseMismatch);
    }
    Ok(skeleton(g) == skeleton(h) && immoralities(g) == immoralities(h))
}
