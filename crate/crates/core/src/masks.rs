//! Masking matrices for autoregressive networks that parametrize an inverse.
//!
//! Every unit carries a label that names a set of model variables. A weight
//! from unit `a` to unit `b` survives iff `members(a) ⊆ members(b)`. Plain
//! MADE is the special case where label `k` on a hidden unit stands for
//! `x ∪ {z_1..z_{k-1}}`.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::graph::{BayesNet, VarId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetLabel {
    pub id: usize,
    /// Sorted, duplicate-free.
    pub members: Vec<VarId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskSpec {
    /// Names of the model variables the labels refer to.
    pub variables: Vec<String>,
    /// Variable carried by each input unit.
    pub input_vars: Vec<VarId>,
    pub input_labels: Vec<SubsetLabel>,
    pub hidden_labels: Vec<Vec<SubsetLabel>>,
    /// Variable whose factor each output unit parametrizes.
    pub output_vars: Vec<VarId>,
    pub output_labels: Vec<SubsetLabel>,
    /// Labels hidden units were drawn from.
    pub pool: Vec<SubsetLabel>,
    pub skip: bool,
    pub seed: u64,
}

impl MaskSpec {
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_labels.len()];
        s.extend(self.hidden_labels.iter().map(Vec::len));
        s.push(self.output_labels.len());
        s
    }

    /// Checks that ids and member sets are in one-to-one correspondence,
    /// hidden labels come from the pool and unit lists line up.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidMaskSpec(m));
        if self.input_vars.len() != self.input_labels.len() {
            return bad("input_vars and input_labels differ in length".into());
        }
        if self.output_vars.len() != self.output_labels.len() {
            return bad("output_vars and output_labels differ in length".into());
        }
        let n = self.variables.len();
        let mut by_id: BTreeMap<usize, &[VarId]> = BTreeMap::new();
        let mut by_set: BTreeMap<&[VarId], usize> = BTreeMap::new();
        let all = self
            .input_labels
            .iter()
            .chain(self.hidden_labels.iter().flatten())
            .chain(&self.output_labels)
            .chain(&self.pool);
        for l in all {
            if l.members.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("label {} has unsorted or repeated members", l.id));
            }
            if let Some(v) = l.members.iter().find(|v| v.0 >= n) {
                return bad(format!("label {} names unknown variable {}", l.id, v.0));
            }
            if *by_id.entry(l.id).or_insert(&l.members) != l.members.as_slice() {
                return bad(format!("label id {} used for two different sets", l.id));
            }
            if *by_set.entry(&l.members).or_insert(l.id) != l.id {
                return bad(format!("one set carries two ids, {} and {}", by_set[l.members.as_slice()], l.id));
            }
        }
        for layer in &self.hidden_labels {
            if layer.is_empty() {
                return bad("empty hidden layer".into());
            }
            if let Some(l) = layer.iter().find(|l| !self.pool.contains(l)) {
                return bad(format!("hidden label {} is not in the pool", l.id));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let label = |l: &SubsetLabel| json!({"id": l.id, "members": self.names(&l.members)});
        json!({
            "variables": self.variables,
            "seed": self.seed,
            "skip": self.skip,
            "layer_sizes": self.layer_sizes(),
            "input_vars": self.names(&self.input_vars),
            "output_vars": self.names(&self.output_vars),
            "input_labels": self.input_labels.iter().map(|l| l.id).collect::<Vec<_>>(),
            "hidden_labels": self.hidden_labels.iter().map(|h| h.iter().map(|l| l.id).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "output_labels": self.output_labels.iter().map(|l| l.id).collect::<Vec<_>>(),
            "labels": self.distinct_labels().iter().map(label).collect::<Vec<_>>(),
        })
    }

    fn names(&self, vars: &[VarId]) -> Vec<&str> {
        vars.iter().map(|v| self.variables[v.0].as_str()).collect()
    }

    fn distinct_labels(&self) -> Vec<SubsetLabel> {
        let mut m = BTreeMap::new();
        for l in self.input_labels.iter().chain(self.hidden_labels.iter().flatten()).chain(&self.output_labels).chain(&self.pool) {
            m.entry(l.id).or_insert_with(|| l.clone());
        }
        m.into_values().collect()
    }
}

/// Dense 0/1 matrix, rows = source units, columns = target units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    bits: Vec<u8>,
}

impl Mask {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mask { rows, cols, bits: vec![0; rows * cols] }
    }

    fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut m = Mask::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.bits[i * cols + j] = u8::from(f(i, j));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j] != 0
    }

    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        self.bits[i * self.cols + j] = u8::from(on);
    }

    /// Row-major 0/1 bytes.
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    /// Boolean matrix product.
    pub fn compose(&self, next: &Mask) -> Result<Mask> {
        if self.cols != next.rows {
            return Err(Error::Shape(format!("{}x{} then {}x{}", self.rows, self.cols, next.rows, next.cols)));
        }
        let mut out = Mask::zeros(self.rows, next.cols);
        for i in 0..self.rows {
            for k in (0..self.cols).filter(|&k| self.get(i, k)) {
                for j in 0..next.cols {
                    if next.get(k, j) {
                        out.set(i, j, true);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Value {
        json!({"shape": [self.rows, self.cols], "data": self.bits})
    }

    /// Writes the mask as a version 1.0 `.npy` array of `u1`.
    pub fn write_npy(&self, w: &mut impl Write) -> std::io::Result<()> {
        let dict = format!("{{'descr': '|u1', 'fortran_order': False, 'shape': ({}, {}), }}", self.rows, self.cols);
        // magic(6) + version(2) + header length(2) + dict, padded to 64 with a final newline
        let unpadded = 10 + dict.len() + 1;
        let pad = (64 - unpadded % 64) % 64;
        let header = format!("{dict}{}\n", " ".repeat(pad));
        w.write_all(b"\x93NUMPY\x01\x00")?;
        w.write_all(&(header.len() as u16).to_le_bytes())?;
        w.write_all(header.as_bytes())?;
        w.write_all(&self.bits)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskStack {
    /// input→hidden₁, hidden₁→hidden₂, …, hidden_L→output.
    pub masks: Vec<Mask>,
    pub skip: Option<Mask>,
}

impl MaskStack {
    pub fn check_shapes(&self) -> Result<()> {
        if self.masks.is_empty() {
            return Err(Error::Shape("no layers".into()));
        }
        for w in self.masks.windows(2) {
            if w[0].cols != w[1].rows {
                return Err(Error::Shape(format!("{} columns feed {} rows", w[0].cols, w[1].rows)));
            }
        }
        if let Some(s) = &self.skip {
            let (r, c) = (self.masks[0].rows, self.masks.last().unwrap().cols);
            if (s.rows, s.cols) != (r, c) {
                return Err(Error::Shape(format!("skip mask is {}x{}, expected {r}x{c}", s.rows, s.cols)));
            }
        }
        Ok(())
    }

    /// `reach.get(input, output)`: some masked path (or the skip weight) connects them.
    pub fn reachability(&self) -> Result<Mask> {
        self.check_shapes()?;
        let mut r = self.masks[0].clone();
        for m in &self.masks[1..] {
            r = r.compose(m)?;
        }
        if let Some(s) = &self.skip {
            for (b, &sb) in r.bits.iter_mut().zip(&s.bits) {
                *b |= sb;
            }
        }
        Ok(r)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "masks": self.masks.iter().map(Mask::to_json).collect::<Vec<_>>(),
            "skip": self.skip.as_ref().map(Mask::to_json),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskOptions {
    /// Place every pool label at least once per hidden layer before filling
    /// the rest uniformly. Uniform-only sampling can starve a label at small
    /// widths and silently drop dependencies.
    pub coverage: bool,
    pub skip: bool,
    /// Output units per factor (e.g. 2 for a mean and a scale).
    pub params_per_factor: usize,
}

impl Default for MaskOptions {
    fn default() -> Self {
        MaskOptions { coverage: true, skip: true, params_per_factor: 1 }
    }
}

/// A plain MADE network, with both the integer labels and the equivalent subset spec.
#[derive(Debug, Clone)]
pub struct Made {
    pub stack: MaskStack,
    pub spec: MaskSpec,
    pub input_ints: Vec<usize>,
    pub hidden_ints: Vec<Vec<usize>>,
    pub output_ints: Vec<usize>,
}

impl Made {
    /// Per output unit: the inputs its factor may see, `x ∪ {z_j : j < i}`.
    pub fn expected(&self) -> Vec<Vec<VarId>> {
        self.spec.output_labels.iter().map(|l| l.members.clone()).collect()
    }
}

/// MADE masks for `q(z_1..z_m | x)`. Inputs are the `n_obs` observations
/// (label 0) followed by `z_1..z_m` (label i); hidden labels are drawn from
/// `1..=max(m-1, 1)`, so with a single latent every hidden unit gets label 1 and
/// sees only the observations.
///
/// Rules: input→hidden `a < b`, hidden→hidden `a ≤ b`, hidden→output `a ≤ b`,
/// skip `a < b`.
pub fn made_masks(m: usize, n_obs: usize, hidden_sizes: &[usize], seed: u64, opts: MaskOptions) -> Result<Made> {
    if m == 0 {
        return Err(Error::InvalidMaskSpec("need at least one latent".into()));
    }
    check_sizes(hidden_sizes, opts)?;
    let top = (m - 1).max(1);
    let pool_ints: Vec<usize> = (1..=top).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden_ints: Vec<Vec<usize>> =
        hidden_sizes.iter().map(|&w| draw_layer(&mut rng, &pool_ints, w, opts.coverage)).collect::<Result<_>>()?;

    let input_ints: Vec<usize> = (0..n_obs).map(|_| 0).chain(1..=m).collect();
    let output_ints: Vec<usize> = (1..=m).flat_map(|i| std::iter::repeat_n(i, opts.params_per_factor)).collect();

    let mut layers = vec![Mask::from_fn(input_ints.len(), hidden_sizes[0], |i, j| input_ints[i] < hidden_ints[0][j])];
    for w in hidden_ints.windows(2) {
        layers.push(Mask::from_fn(w[0].len(), w[1].len(), |i, j| w[0][i] <= w[1][j]));
    }
    let last = hidden_ints.last().unwrap();
    layers.push(Mask::from_fn(last.len(), output_ints.len(), |i, j| last[i] <= output_ints[j]));
    let skip = opts.skip.then(|| Mask::from_fn(input_ints.len(), output_ints.len(), |i, j| input_ints[i] < output_ints[j]));

    // subset view: variables are x_1..x_n then z_1..z_m; label k ↦ x ∪ z_{<k}
    let mut variables: Vec<String> = (1..=n_obs).map(|j| format!("x{j}")).collect();
    variables.extend((1..=m).map(|i| format!("z{i}")));
    let z = |i: usize| VarId(n_obs + i - 1);
    let below = |k: usize| -> Vec<VarId> { (0..n_obs).map(VarId).chain((1..k).map(z)).collect() };
    let mut ids = LabelIds::default();
    let input_vars: Vec<VarId> = (0..n_obs + m).map(VarId).collect();
    let input_labels = input_vars.iter().map(|&v| ids.label(vec![v])).collect();
    let pool: Vec<SubsetLabel> = pool_ints.iter().map(|&k| ids.label(below(k))).collect();
    let hidden_labels = hidden_ints.iter().map(|h| h.iter().map(|&k| pool[k - 1].clone()).collect()).collect();
    let output_labels = output_ints.iter().map(|&i| ids.label(below(i))).collect();
    let output_vars = output_ints.iter().map(|&i| z(i)).collect();
    let spec = MaskSpec {
        variables,
        input_vars,
        input_labels,
        hidden_labels,
        output_vars,
        output_labels,
        pool,
        skip: opts.skip,
        seed,
    };
    Ok(Made { stack: MaskStack { masks: layers, skip }, spec, input_ints, hidden_ints, output_ints })
}

/// Masks from a subset spec: a weight survives iff the source label's members
/// are contained in the target label's.
pub fn subset_masks(spec: &MaskSpec) -> Result<MaskStack> {
    spec.check()?;
    if spec.hidden_labels.is_empty() {
        return Err(Error::InvalidMaskSpec("no hidden layers".into()));
    }
    let sub = |a: &[SubsetLabel], b: &[SubsetLabel]| {
        Mask::from_fn(a.len(), b.len(), |i, j| is_subset(&a[i].members, &b[j].members))
    };
    let mut masks = vec![sub(&spec.input_labels, &spec.hidden_labels[0])];
    for w in spec.hidden_labels.windows(2) {
        masks.push(sub(&w[0], &w[1]));
    }
    masks.push(sub(spec.hidden_labels.last().unwrap(), &spec.output_labels));
    let skip = spec.skip.then(|| sub(&spec.input_labels, &spec.output_labels));
    Ok(MaskStack { masks, skip })
}

/// Tree-MADE for the forward inverse of a depth-`d` binary tree (variables
/// `x0..x_{2^d-2}`, node `i` the parent of `2i+1` and `2i+2`). The output for
/// latent `x_i` is labelled `{x_{i+1}..x_{2i+2}}`. Hidden labels come from the
/// pool of `{x_{i+1}}` and the suffixes `{x_s..x_{2i+2}}`, `i+2 ≤ s ≤ 2i+1`
/// (at least the one starting at `i+2`).
pub fn tree_made_spec(depth: u32, hidden_sizes: &[usize], seed: u64, opts: MaskOptions) -> Result<MaskSpec> {
    if depth < 2 {
        return Err(Error::InvalidMaskSpec("tree depth must be at least 2".into()));
    }
    let n = (1usize << depth) - 1;
    let latents = (1usize << (depth - 1)) - 1;
    let span = |a: usize, b: usize| -> Vec<VarId> { (a..=b).map(VarId).collect() };
    let mut pool_sets: Vec<Vec<VarId>> = Vec::new();
    for i in 0..latents {
        pool_sets.push(vec![VarId(i + 1)]);
        for s in i + 2..=(2 * i + 1).max(i + 2) {
            pool_sets.push(span(s, 2 * i + 2));
        }
    }
    let factors: Vec<(VarId, Vec<VarId>)> = (0..latents).map(|i| (VarId(i), span(i + 1, 2 * i + 2))).collect();
    build_spec((0..n).map(|i| format!("x{i}")).collect(), factors, pool_sets, hidden_sizes, seed, opts)
}

/// Subset spec for an arbitrary inverse: one output group per latent, labelled
/// with its parent set, and a pool made of those parent sets plus the
/// singletons of their members.
pub fn inverse_spec(h: &BayesNet, hidden_sizes: &[usize], seed: u64, opts: MaskOptions) -> Result<MaskSpec> {
    let factors: Vec<(VarId, Vec<VarId>)> = h.latents().into_iter().map(|v| (v, h.parents(v).to_vec())).collect();
    let mut pool_sets: Vec<Vec<VarId>> = Vec::new();
    for (_, pa) in &factors {
        pool_sets.extend(pa.iter().map(|&v| vec![v]));
        if pa.len() > 1 {
            pool_sets.push(pa.clone());
        }
    }
    if pool_sets.is_empty() {
        return Err(Error::InvalidMaskSpec("no latent has parents, nothing to mask".into()));
    }
    build_spec(h.names().to_vec(), factors, pool_sets, hidden_sizes, seed, opts)
}

fn build_spec(
    variables: Vec<String>,
    factors: Vec<(VarId, Vec<VarId>)>,
    mut pool_sets: Vec<Vec<VarId>>,
    hidden_sizes: &[usize],
    seed: u64,
    opts: MaskOptions,
) -> Result<MaskSpec> {
    check_sizes(hidden_sizes, opts)?;
    let mut seen = std::collections::BTreeSet::new();
    pool_sets.retain(|s| seen.insert(s.clone()));
    let mut ids = LabelIds::default();
    let input_vars: Vec<VarId> = (0..variables.len()).map(VarId).collect();
    let input_labels = input_vars.iter().map(|&v| ids.label(vec![v])).collect();
    let pool: Vec<SubsetLabel> = pool_sets.into_iter().map(|s| ids.label(s)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden_labels = hidden_sizes
        .iter()
        .map(|&w| draw_layer(&mut rng, &pool, w, opts.coverage))
        .collect::<Result<Vec<_>>>()?;
    let mut output_vars = Vec::new();
    let mut output_labels = Vec::new();
    for (v, pa) in factors {
        let l = ids.label(pa);
        for _ in 0..opts.params_per_factor {
            output_vars.push(v);
            output_labels.push(l.clone());
        }
    }
    let spec =
        MaskSpec { variables, input_vars, input_labels, hidden_labels, output_vars, output_labels, pool, skip: opts.skip, seed };
    spec.check()?;
    Ok(spec)
}

#[derive(Default)]
struct LabelIds(BTreeMap<Vec<VarId>, usize>);

impl LabelIds {
    fn label(&mut self, mut members: Vec<VarId>) -> SubsetLabel {
        members.sort_unstable();
        members.dedup();
        let next = self.0.len();
        let id = *self.0.entry(members.clone()).or_insert(next);
        SubsetLabel { id, members }
    }
}

fn check_sizes(hidden_sizes: &[usize], opts: MaskOptions) -> Result<()> {
    if hidden_sizes.is_empty() || hidden_sizes.contains(&0) {
        return Err(Error::InvalidMaskSpec("need at least one hidden layer, each of width >= 1".into()));
    }
    if opts.params_per_factor == 0 {
        return Err(Error::InvalidMaskSpec("params_per_factor must be >= 1".into()));
    }
    Ok(())
}

fn draw_layer<T: Clone>(rng: &mut ChaCha8Rng, pool: &[T], width: usize, coverage: bool) -> Result<Vec<T>> {
    let mut layer = Vec::with_capacity(width);
    if coverage {
        if width < pool.len() {
            return Err(Error::InvalidMaskSpec(format!(
                "hidden layer of width {width} cannot cover a pool of {} labels",
                pool.len()
            )));
        }
        layer.extend_from_slice(pool);
    }
    while layer.len() < width {
        layer.push(pool[rng.random_range(0..pool.len())].clone());
    }
    layer.shuffle(rng);
    Ok(layer)
}

fn is_subset(a: &[VarId], b: &[VarId]) -> bool {
    let mut it = b.iter();
    a.iter().all(|x| it.any(|y| y == x))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConnectivityWitness {
    /// Output unit reaches an input it must not see.
    Extra { output: usize, input: VarId },
    /// Output unit cannot reach an input it should see.
    Missing { output: usize, input: VarId },
}

/// Compares the inputs each output can reach with `expected` (one set per
/// output unit). Extra connections are reported before missing ones.
pub fn verify_connectivity(
    stack: &MaskStack,
    input_vars: &[VarId],
    expected: &[Vec<VarId>],
) -> Result<(bool, Option<ConnectivityWitness>)> {
    let reach = stack.reachability()?;
    if reach.rows != input_vars.len() || reach.cols != expected.len() {
        return Err(Error::Shape(format!(
            "reachability is {}x{}, expected {}x{}",
            reach.rows,
            reach.cols,
            input_vars.len(),
            expected.len()
        )));
    }
    let mut missing = None;
    for (o, want) in expected.iter().enumerate() {
        for (i, &v) in input_vars.iter().enumerate() {
            match (reach.get(i, o), want.contains(&v)) {
                (true, false) => return Ok((false, Some(ConnectivityWitness::Extra { output: o, input: v }))),
                (false, true) if missing.is_none() => missing = Some(ConnectivityWitness::Missing { output: o, input: v }),
                _ => {}
            }
        }
    }
    Ok((missing.is_none(), missing))
}
