//! I-map, minimality and naturalness checks for inverse structures, plus the
//! naive pruning construction used as an independent minimal-I-map oracle.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::graph::{BayesNet, VarId};
use crate::independence::{
    conditioning_sets, d_separated, mask_to_vars, pairs, reachable, IndepAssertion, MaskDag, MAX_ENUM_VARS,
};
use crate::inversion::validate_inverse;

/// Separation table of the model: for every pair `(i, j)`, one bit per
/// conditioning set in canonical order.
struct SepTable {
    n: usize,
    bits: Vec<Vec<u64>>,
}

impl SepTable {
    fn new(g: &BayesNet) -> Self {
        let dag = MaskDag::new(g);
        let bits = pairs(g.n())
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(i, j, rest)| {
                let sets = conditioning_sets(&rest);
                let mut words = vec![0u64; sets.len().div_ceil(64)];
                for (k, &z) in sets.iter().enumerate() {
                    if dag.separated(i, j, z) {
                        words[k / 64] |= 1 << (k % 64);
                    }
                }
                words
            })
            .collect();
        SepTable { n: g.n(), bits }
    }

    /// First assertion (canonical order) that `h` makes and the model does not.
    fn first_violation(&self, h: &MaskDag) -> Option<IndepAssertion> {
        pairs(self.n).zip(&self.bits).find_map(|((i, j, rest), words)| {
            conditioning_sets(&rest).into_iter().enumerate().find_map(|(k, z)| {
                let g_sep = words[k / 64] >> (k % 64) & 1 == 1;
                (!g_sep && h.separated(i, j, z))
                    .then(|| IndepAssertion { x: vec![VarId(i)], y: vec![VarId(j)], z: mask_to_vars(z) })
            })
        })
    }
}

fn check_sizes(h: &BayesNet, g: &BayesNet, cap: usize) -> Result<()> {
    if h.names() != g.names() {
        return Err(Error::UniverseMismatch);
    }
    let cap = cap.min(MAX_ENUM_VARS);
    if g.n() > cap {
        return Err(Error::SizeCap { n: g.n(), cap });
    }
    Ok(())
}

/// `I(h) ⊆ I(g)` by enumeration; the witness is the first assertion of `h`
/// that `g` does not make.
pub fn is_imap(h: &BayesNet, g: &BayesNet, cap: usize) -> Result<(bool, Option<IndepAssertion>)> {
    check_sizes(h, g, cap)?;
    let w = SepTable::new(g).first_violation(&MaskDag::new(h));
    Ok((w.is_none(), w))
}

/// Exact I-map test without enumeration: `h` is an I-map of `g` iff `g`
/// satisfies every local Markov statement of `h`. Works for any size; the
/// witness is a pairwise assertion of `h` that fails in `g`.
pub fn is_imap_local(h: &BayesNet, g: &BayesNet) -> Result<(bool, Option<IndepAssertion>)> {
    if h.names() != g.names() {
        return Err(Error::UniverseMismatch);
    }
    let w = h.vars().collect::<Vec<_>>().into_par_iter().find_map_first(|v| local_violation(h, g, v));
    Ok((w.is_none(), w))
}

fn local_violation(h: &BayesNet, g: &BayesNet, v: VarId) -> Option<IndepAssertion> {
    let desc = h.descendants(v);
    let mut in_z = vec![false; h.n()];
    for &p in h.parents(v) {
        in_z[p.0] = true;
    }
    let reach = reachable(g, &[v], &in_z);
    (0..h.n())
        .find(|&w| w != v.0 && !desc[w] && !in_z[w] && reach[w])
        .map(|w| IndepAssertion::pair(v, VarId(w), h.parents(v).iter().copied()))
}

/// An edge `u -> v` of an I-map is provably needed when the model couples
/// `u` and `v` given the other parents of `v`: dropping it would assert
/// exactly that independence.
fn edge_certified(h: &BayesNet, g: &BayesNet, u: VarId, v: VarId) -> bool {
    let z: Vec<VarId> = h.parents(v).iter().copied().filter(|&p| p != u).collect();
    !d_separated(g, &[u], &[v], &z).expect("distinct variables")
}

/// Every single-edge deletion of `h` breaks the I-map property. The witness
/// is the first removable edge in sorted order.
pub fn is_minimal_imap(h: &BayesNet, g: &BayesNet, cap: usize) -> Result<(bool, Option<(VarId, VarId)>)> {
    check_sizes(h, g, cap)?;
    let table = SepTable::new(g);
    if table.first_violation(&MaskDag::new(h)).is_some() {
        return Err(Error::NotAnImap);
    }
    let w = first_removable(h, g, |e| {
        let mut dag = MaskDag::new(h);
        dag.remove_edge(e.0, e.1);
        table.first_violation(&dag).is_none()
    });
    Ok((w.is_none(), w))
}

/// Minimality through the local Markov test; exact at any size.
pub fn is_minimal_imap_local(h: &BayesNet, g: &BayesNet) -> Result<(bool, Option<(VarId, VarId)>)> {
    if !is_imap_local(h, g)?.0 {
        return Err(Error::NotAnImap);
    }
    let w = first_removable(h, g, |e| is_imap_local(&h.without_edge(e.0, e.1), g).map(|r| r.0).unwrap_or(false));
    Ok((w.is_none(), w))
}

fn first_removable(
    h: &BayesNet,
    g: &BayesNet,
    still_imap: impl Fn((VarId, VarId)) -> bool + Sync,
) -> Option<(VarId, VarId)> {
    first_removable_of(h.edges(), h, g, still_imap)
}

fn first_removable_of(
    edges: Vec<(VarId, VarId)>,
    h: &BayesNet,
    g: &BayesNet,
    still_imap: impl Fn((VarId, VarId)) -> bool + Sync,
) -> Option<(VarId, VarId)> {
    edges.into_par_iter().find_map_first(|e| (!edge_certified(h, g, e.0, e.1) && still_imap(e)).then_some(e))
}

/// Edges of the inverse proper, i.e. those into latent variables. Edges among
/// observed variables only describe `q(x)` and are not part of `q(z|x)`.
fn inverse_edges(h: &BayesNet) -> Vec<(VarId, VarId)> {
    h.edges().into_iter().filter(|&(_, b)| !h.is_observed(b)).collect()
}

/// Edge pair showing that `h` points into both descendants and ancestors.
pub type NaturalWitness = ((VarId, VarId), (VarId, VarId));

/// `h` is natural when none of its edges runs from a variable to one of its
/// model descendants, or none runs to one of its model ancestors. Edges out
/// of observed variables are left out: the inverse always conditions on the
/// observations, so they say nothing about the sampling order of the latents.
pub fn is_natural(h: &BayesNet, g: &BayesNet) -> Result<(bool, Option<NaturalWitness>)> {
    if h.names() != g.names() {
        return Err(Error::UniverseMismatch);
    }
    let mut to_desc = None;
    let mut to_anc = None;
    for (a, b) in h.edges() {
        if h.is_observed(a) {
            continue;
        }
        if to_desc.is_none() && g.descendants(a)[b.0] {
            to_desc = Some((a, b));
        }
        if to_anc.is_none() && g.ancestors(a)[b.0] {
            to_anc = Some((a, b));
        }
        if let (Some(d), Some(u)) = (to_desc, to_anc) {
            return Ok((false, Some((d, u))));
        }
    }
    Ok((true, None))
}

/// Naive minimal I-map: variable `order[i]` starts with all earlier variables
/// as parents, and single parents are dropped while the model separates them
/// from `order[i]` given the remaining parents, until nothing changes.
pub fn prune_minimal_inverse(g: &BayesNet, order: &[VarId]) -> Result<BayesNet> {
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != g.vars().collect::<Vec<_>>() {
        return Err(Error::NotAPermutation("order must list every variable exactly once".into()));
    }
    let mut edges = Vec::new();
    for (i, &y) in order.iter().enumerate() {
        let mut kept: Vec<VarId> = order[..i].to_vec();
        loop {
            let mut changed = false;
            let mut k = 0;
            while k < kept.len() {
                let others: Vec<VarId> = kept.iter().copied().filter(|&p| p != kept[k]).collect();
                if d_separated(g, &[y], &[kept[k]], &others)? {
                    kept.remove(k);
                    changed = true;
                } else {
                    k += 1;
                }
            }
            if !changed {
                break;
            }
        }
        edges.extend(kept.into_iter().map(|p| (p, y)));
    }
    g.with_edges(&edges)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckMethod {
    /// Every pairwise assertion compared.
    Enumerated,
    /// Local Markov statements of the inverse checked against the model.
    LocalMarkov,
}

impl CheckMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckMethod::Enumerated => "enumerated",
            CheckMethod::LocalMarkov => "local-markov",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub method: CheckMethod,
    pub is_imap: bool,
    pub imap_witness: Option<IndepAssertion>,
    /// `None` when the inverse is not an I-map, since minimality is then undefined.
    /// Only edges into latent variables are candidates for removal.
    pub is_minimal: Option<bool>,
    pub removable_edge: Option<(VarId, VarId)>,
    pub is_natural: bool,
    pub natural_witness: Option<NaturalWitness>,
    pub nodes: usize,
    pub edges: usize,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.is_imap && self.is_minimal == Some(true) && self.is_natural
    }

    pub fn to_json(&self, h: &BayesNet) -> Value {
        let edge = |e: (VarId, VarId)| json!([h.name(e.0), h.name(e.1)]);
        json!({
            "method": self.method.as_str(),
            "is_imap": self.is_imap,
            "imap_witness": self.imap_witness.as_ref().map(|w| w.display(h)),
            "is_minimal": self.is_minimal,
            "removable_edge": self.removable_edge.map(edge),
            "is_natural": self.is_natural,
            "natural_witness": self.natural_witness.map(|(a, b)| json!([edge(a), edge(b)])),
            "nodes": self.nodes,
            "edges": self.edges,
        })
    }

    pub fn render(&self, h: &BayesNet) -> String {
        let edge = |e: (VarId, VarId)| format!("{} -> {}", h.name(e.0), h.name(e.1));
        let mark = |ok: bool| if ok { "yes" } else { "NO" };
        let mut out = String::new();
        let _ = writeln!(out, "check      result  witness");
        let _ = writeln!(
            out,
            "i-map      {:<7} {}",
            mark(self.is_imap),
            self.imap_witness.as_ref().map(|w| w.display(h)).unwrap_or_default()
        );
        let minimal = match self.is_minimal {
            Some(m) => mark(m),
            None => "n/a",
        };
        let _ = writeln!(out, "minimal    {:<7} {}", minimal, self.removable_edge.map(edge).unwrap_or_default());
        let _ = writeln!(
            out,
            "natural    {:<7} {}",
            mark(self.is_natural),
            self.natural_witness.map(|(a, b)| format!("{}; {}", edge(a), edge(b))).unwrap_or_default()
        );
        let _ = writeln!(out, "nodes {}, edges {}, method {}", self.nodes, self.edges, self.method.as_str());
        out
    }
}

/// All three checks. Up to `cap` variables the I-map and minimality checks
/// enumerate assertions; above it they use the local Markov test.
/// Minimality is judged over the edges into latent variables, the ones that
/// make up `q(z|x)`; [`is_minimal_imap`] looks at every edge.
pub fn verify(h: &BayesNet, g: &BayesNet, cap: usize) -> Result<VerificationReport> {
    if h.names() != g.names() {
        return Err(Error::UniverseMismatch);
    }
    validate_inverse(h)?;
    let method = if g.n() <= cap.min(MAX_ENUM_VARS) { CheckMethod::Enumerated } else { CheckMethod::LocalMarkov };
    let (is_imap, imap_witness, is_minimal, removable_edge) = match method {
        CheckMethod::Enumerated => {
            let table = SepTable::new(g);
            let w = table.first_violation(&MaskDag::new(h));
            if w.is_some() {
                (false, w, None, None)
            } else {
                let e = first_removable_of(inverse_edges(h), h, g, |e| {
                    let mut dag = MaskDag::new(h);
                    dag.remove_edge(e.0, e.1);
                    table.first_violation(&dag).is_none()
                });
                (true, None, Some(e.is_none()), e)
            }
        }
        CheckMethod::LocalMarkov => {
            let (ok, w) = is_imap_local(h, g)?;
            if ok {
                let e = first_removable_of(inverse_edges(h), h, g, |e| {
                    is_imap_local(&h.without_edge(e.0, e.1), g).map(|r| r.0).unwrap_or(false)
                });
                (true, None, Some(e.is_none()), e)
            } else {
                (false, w, None, None)
            }
        }
    };
    let (is_natural, natural_witness) = is_natural(h, g)?;
    Ok(VerificationReport {
        method,
        is_imap,
        imap_witness,
        is_minimal,
        removable_edge,
        is_natural,
        natural_witness,
        nodes: h.n(),
        edges: h.edge_count(),
    })
}
