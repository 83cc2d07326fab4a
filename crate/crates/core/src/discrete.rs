//! Exact inference on small discrete networks: dense factors, variable
//! elimination, joint tables, exact fitting of inverse CPDs and the expected
//! posterior KL of an inverse.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::graph::{BayesNet, VarId};
use crate::inversion::validate_inverse;

/// Largest joint table `joint` will build.
pub const MAX_JOINT_ENTRIES: usize = 1 << 20;

const CPD_TOLERANCE: f64 = 1e-12;

/// Dense table over `scope`, row-major with the last variable fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    scope: Vec<VarId>,
    card: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    pub fn new(scope: Vec<VarId>, card: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if scope.len() != card.len() {
            return Err(Error::InvalidFactor(format!("{} variables but {} cardinalities", scope.len(), card.len())));
        }
        for (i, v) in scope.iter().enumerate() {
            if scope[..i].contains(v) {
                return Err(Error::InvalidFactor(format!("{v:?} appears twice in the scope")));
            }
        }
        if card.contains(&0) {
            return Err(Error::InvalidFactor("zero cardinality".into()));
        }
        let size: usize = card.iter().product();
        if values.len() != size {
            return Err(Error::InvalidFactor(format!("expected {size} values, got {}", values.len())));
        }
        if let Some(x) = values.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::InvalidFactor(format!("entry {x} is negative or not finite")));
        }
        Ok(Factor { scope, card, values })
    }

    pub fn ones(scope: Vec<VarId>, card: Vec<usize>) -> Result<Self> {
        let size = card.iter().product();
        Factor::new(scope, card, vec![1.0; size])
    }

    pub fn scalar(value: f64) -> Self {
        Factor { scope: Vec::new(), card: Vec::new(), values: vec![value] }
    }

    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn card(&self) -> &[usize] {
        &self.card
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn card_of(&self, v: VarId) -> Option<usize> {
        self.scope.iter().position(|&s| s == v).map(|i| self.card[i])
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Entry for a full assignment given in scope order.
    pub fn get(&self, assignment: &[usize]) -> f64 {
        self.values[self.offset(assignment)]
    }

    fn offset(&self, assignment: &[usize]) -> usize {
        assignment.iter().zip(&self.card).fold(0, |acc, (&a, &c)| acc * c + a)
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.card.len()];
        for i in (0..self.card.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.card[i + 1];
        }
        s
    }

    /// Stride of each variable of `scope` inside this factor, 0 if absent.
    fn strides_for(&self, scope: &[VarId]) -> Vec<usize> {
        let own = self.strides();
        scope.iter().map(|v| self.scope.iter().position(|s| s == v).map_or(0, |i| own[i])).collect()
    }

    /// Same table with the scope reordered to `order` (a permutation of the scope).
    pub fn reorder(&self, order: &[VarId]) -> Result<Factor> {
        if order.len() != self.scope.len() || order.iter().any(|v| self.card_of(*v).is_none()) {
            return Err(Error::InvalidFactor("reorder needs a permutation of the scope".into()));
        }
        let card: Vec<usize> = order.iter().map(|&v| self.card_of(v).unwrap()).collect();
        let strides = self.strides_for(order);
        let mut values = Vec::with_capacity(self.values.len());
        for_each_assignment(&card, |_, off| values.push(self.values[off(&strides)]));
        Factor::new(order.to_vec(), card, values)
    }
}

/// Visits every assignment of `card` in row-major order. The callback gets
/// the assignment and a closure that maps a stride vector to an offset.
fn for_each_assignment(card: &[usize], mut visit: impl FnMut(&[usize], &dyn Fn(&[usize]) -> usize)) {
    let total: usize = card.iter().product();
    let mut a = vec![0usize; card.len()];
    for _ in 0..total {
        {
            let a_ref = &a;
            let off = |strides: &[usize]| a_ref.iter().zip(strides).map(|(x, s)| x * s).sum();
            visit(&a, &off);
        }
        for i in (0..card.len()).rev() {
            a[i] += 1;
            if a[i] < card[i] {
                break;
            }
            a[i] = 0;
        }
    }
}

/// Pointwise product over the union scope (`a`'s variables, then `b`'s new ones).
pub fn factor_product(a: &Factor, b: &Factor) -> Result<Factor> {
    let mut scope = a.scope.clone();
    let mut card = a.card.clone();
    for (&v, &c) in b.scope.iter().zip(&b.card) {
        match a.card_of(v) {
            Some(ca) if ca != c => return Err(Error::CardinalityMismatch { var: v, left: ca, right: c }),
            Some(_) => {}
            None => {
                scope.push(v);
                card.push(c);
            }
        }
    }
    let sa = a.strides_for(&scope);
    let sb = b.strides_for(&scope);
    let mut values = Vec::with_capacity(card.iter().product());
    for_each_assignment(&card, |_, off| values.push(a.values[off(&sa)] * b.values[off(&sb)]));
    Factor::new(scope, card, values)
}

/// Sums `v` out of `a`.
pub fn factor_marginalize(a: &Factor, v: VarId) -> Result<Factor> {
    let k = a.scope.iter().position(|&s| s == v).ok_or(Error::NotInScope(v))?;
    let mut scope = a.scope.clone();
    let mut card = a.card.clone();
    scope.remove(k);
    card.remove(k);
    let s = a.strides_for(&scope);
    let step = a.strides()[k];
    let mut values = Vec::with_capacity(card.iter().product());
    for_each_assignment(&card, |_, off| {
        let base = off(&s);
        values.push((0..a.card[k]).map(|x| a.values[base + x * step]).sum());
    });
    Factor::new(scope, card, values)
}

/// Marginal of `a` on `keep` (in that order).
pub fn factor_project(a: &Factor, keep: &[VarId]) -> Result<Factor> {
    let mut f = a.clone();
    for &v in a.scope() {
        if !keep.contains(&v) {
            f = factor_marginalize(&f, v)?;
        }
    }
    f.reorder(keep)
}

/// Sum-product variable elimination. Returns the final factor and the scope
/// of the intermediate product formed at each step.
pub fn eliminate_variables_traced(factors: &[Factor], order: &[VarId]) -> Result<(Factor, Vec<Vec<VarId>>)> {
    let mut pool: Vec<Factor> = factors.to_vec();
    let mut scopes = Vec::with_capacity(order.len());
    for &v in order {
        let (with, without): (Vec<Factor>, Vec<Factor>) = pool.into_iter().partition(|f| f.scope.contains(&v));
        if with.is_empty() {
            return Err(Error::NotInScope(v));
        }
        let mut psi = with[0].clone();
        for f in &with[1..] {
            psi = factor_product(&psi, f)?;
        }
        let mut scope = psi.scope.clone();
        scope.sort_unstable();
        scopes.push(scope);
        pool = without;
        pool.push(factor_marginalize(&psi, v)?);
    }
    let mut out = Factor::scalar(1.0);
    for f in &pool {
        out = factor_product(&out, f)?;
    }
    Ok((out, scopes))
}

pub fn eliminate_variables(factors: &[Factor], order: &[VarId]) -> Result<Factor> {
    eliminate_variables_traced(factors, order).map(|(f, _)| f)
}

/// Scopes the intermediate products would have, without touching any tables.
pub fn symbolic_scopes(scopes: &[Vec<VarId>], order: &[VarId]) -> Vec<Vec<VarId>> {
    let mut pool: Vec<Vec<VarId>> = scopes.to_vec();
    let mut out = Vec::with_capacity(order.len());
    for &v in order {
        let (with, without): (Vec<_>, Vec<_>) = pool.into_iter().partition(|s: &Vec<VarId>| s.contains(&v));
        let mut psi: Vec<VarId> = with.into_iter().flatten().collect();
        psi.sort_unstable();
        psi.dedup();
        pool = without;
        pool.push(psi.iter().copied().filter(|&u| u != v).collect());
        out.push(psi);
    }
    out
}

/// A structure with one CPD per variable, scoped `(parents..., variable)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteBN {
    pub structure: BayesNet,
    pub card: Vec<usize>,
    pub cpds: Vec<Factor>,
}

impl DiscreteBN {
    pub fn new(structure: BayesNet, card: Vec<usize>, cpds: Vec<Factor>) -> Result<Self> {
        if card.len() != structure.n() || cpds.len() != structure.n() {
            return Err(Error::OutOfRange(cpds.len().max(card.len()), structure.n()));
        }
        for v in structure.vars() {
            let cpd = &cpds[v.0];
            let name = structure.name(v).to_string();
            let bad = |reason: String| Error::InvalidCpd { var: name.clone(), reason };
            if cpd.scope.last() != Some(&v) {
                return Err(bad("the variable must come last in its CPD scope".into()));
            }
            let mut parents = cpd.scope[..cpd.scope.len() - 1].to_vec();
            parents.sort_unstable();
            if parents != structure.parents(v) {
                return Err(bad("CPD parents differ from the structure".into()));
            }
            for (&u, &c) in cpd.scope.iter().zip(&cpd.card) {
                if card[u.0] != c {
                    return Err(Error::CardinalityMismatch { var: u, left: card[u.0], right: c });
                }
            }
            let k = card[v.0];
            for (r, row) in cpd.values.chunks(k).enumerate() {
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > CPD_TOLERANCE {
                    return Err(bad(format!("row {r} sums to {s}")));
                }
            }
        }
        Ok(DiscreteBN { structure, card, cpds })
    }

    /// CPD rows drawn from Dirichlet(1), i.e. normalized exponential draws.
    pub fn random<R: Rng + ?Sized>(structure: BayesNet, card: Vec<usize>, rng: &mut R) -> Result<Self> {
        let cpds = structure
            .vars()
            .map(|v| {
                let mut scope = structure.parents(v).to_vec();
                scope.push(v);
                let c: Vec<usize> = scope.iter().map(|u| card[u.0]).collect();
                let k = card[v.0];
                let rows: usize = c.iter().product::<usize>() / k;
                let mut values = Vec::with_capacity(rows * k);
                for _ in 0..rows {
                    let draw: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
                    let s: f64 = draw.iter().sum();
                    values.extend(draw.iter().map(|x| x / s));
                }
                Factor::new(scope, c, values)
            })
            .collect::<Result<Vec<_>>>()?;
        DiscreteBN::new(structure, card, cpds)
    }

    pub fn n(&self) -> usize {
        self.structure.n()
    }

    pub fn joint_size(&self) -> u128 {
        self.card.iter().map(|&c| c as u128).product()
    }
}

/// Full joint table, scope in variable order.
pub fn joint(bn: &DiscreteBN) -> Result<Factor> {
    let size = bn.joint_size();
    if size > MAX_JOINT_ENTRIES as u128 {
        return Err(Error::JointTooLarge(size, MAX_JOINT_ENTRIES));
    }
    let scope: Vec<VarId> = bn.structure.vars().collect();
    let strides: Vec<Vec<usize>> = bn.cpds.iter().map(|f| f.strides_for(&scope)).collect();
    let mut values = Vec::with_capacity(size as usize);
    for_each_assignment(&bn.card, |_, off| {
        values.push(bn.cpds.iter().zip(&strides).map(|(f, s)| f.values[off(s)]).product());
    });
    Factor::new(scope, bn.card.clone(), values)
}

/// Exactly fitted inverse together with the CPD rows whose parent
/// configuration has zero probability (filled uniformly).
#[derive(Clone, Debug, PartialEq)]
pub struct FittedInverse {
    pub q: DiscreteBN,
    pub zero_rows: Vec<(VarId, usize)>,
}

/// Gives each variable of `h` the exact conditional of the model given its
/// parents in `h`.
pub fn fit_inverse_exact(bn: &DiscreteBN, h: &BayesNet) -> Result<FittedInverse> {
    if h.names() != bn.structure.names() {
        return Err(Error::UniverseMismatch);
    }
    validate_inverse(h)?;
    let p = joint(bn)?;
    let mut zero_rows = Vec::new();
    let mut cpds = Vec::with_capacity(h.n());
    for v in h.vars() {
        let mut scope = h.parents(v).to_vec();
        scope.push(v);
        let mut f = factor_project(&p, &scope)?;
        let k = bn.card[v.0];
        for (r, row) in f.values.chunks_mut(k).enumerate() {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|x| *x /= s);
            } else {
                row.iter_mut().for_each(|x| *x = 1.0 / k as f64);
                zero_rows.push((v, r));
            }
        }
        // renormalize away rounding so the constructor tolerance holds
        for row in f.values.chunks_mut(k) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
        }
        cpds.push(f);
    }
    Ok(FittedInverse { q: DiscreteBN::new(h.clone(), bn.card.clone(), cpds)?, zero_rows })
}

/// `E_{p(x)} KL(p(z|x) || q(z|x))`, summed exactly over every assignment.
/// Only the CPDs of latent variables in `q` enter.
pub fn expected_posterior_kl(bn: &DiscreteBN, q: &DiscreteBN) -> Result<f64> {
    if q.structure.names() != bn.structure.names() || q.card != bn.card {
        return Err(Error::UniverseMismatch);
    }
    validate_inverse(&q.structure)?;
    let p = joint(bn)?;
    let observed = bn.structure.observed();
    let px = factor_project(&p, &observed)?;
    let scope: Vec<VarId> = bn.structure.vars().collect();
    let sx = px.strides_for(&scope);
    let latents: Vec<VarId> = bn.structure.latents();
    let sq: Vec<Vec<usize>> = latents.iter().map(|z| q.cpds[z.0].strides_for(&scope)).collect();
    let sp = p.strides();
    let mut kl = 0.0;
    let mut failure = None;
    for_each_assignment(&bn.card, |a, off| {
        if failure.is_some() {
            return;
        }
        let pj = p.values[off(&sp)];
        if pj == 0.0 {
            return;
        }
        let marg = px.values[off(&sx)];
        let qz: f64 = latents.iter().zip(&sq).map(|(z, s)| q.cpds[z.0].values[off(s)]).product();
        if qz == 0.0 {
            let shown: Vec<String> =
                scope.iter().map(|&v| format!("{}={}", bn.structure.name(v), a[v.0])).collect();
            failure = Some(shown.join(", "));
            return;
        }
        kl += pj * ((pj / marg).ln() - qz.ln());
    });
    if let Some(a) = failure {
        return Err(Error::Support(a));
    }
    Ok(if kl < 0.0 && kl > -1e-12 { 0.0 } else { kl })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::inversion::{mean_field_inverse, nami, stuhlmuller_invert, Direction};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
    }

    fn rand_factor(rng: &mut ChaCha8Rng, scope: &[usize], card: &[usize]) -> Factor {
        let size = card.iter().product();
        let values = (0..size).map(|_| rng.random_range(0.0..1.0)).collect();
        Factor::new(scope.iter().map(|&v| VarId(v)).collect(), card.to_vec(), values).unwrap()
    }

    #[test]
    fn product_identity_and_outer() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = rand_factor(&mut rng, &[0, 1], &[2, 3]);
        let one = Factor::ones(vec![VarId(0), VarId(1)], vec![2, 3]).unwrap();
        assert_eq!(factor_product(&a, &one).unwrap(), a);

        let x = rand_factor(&mut rng, &[0], &[2]);
        let y = rand_factor(&mut rng, &[1], &[3]);
        let xy = factor_product(&x, &y).unwrap();
        assert_eq!(xy.len(), 6);
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(xy.get(&[i, j]), x.get(&[i]) * y.get(&[j]));
            }
        }
    }

    #[test]
    fn product_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // phi_D(D) * phi_G(G, I, D): D=0, I=1, G=2
        let d = rand_factor(&mut rng, &[0], &[2]);
        let g = rand_factor(&mut rng, &[2, 1, 0], &[3, 2, 2]);
        let p = factor_product(&d, &g).unwrap();
        assert_eq!(p.scope(), &[VarId(0), VarId(2), VarId(1)]);
        for dd in 0..2 {
            for gg in 0..3 {
                for ii in 0..2 {
                    let want = d.get(&[dd]) * g.get(&[gg, ii, dd]);
                    assert_eq!(p.get(&[dd, gg, ii]), want);
                }
            }
        }
    }

    #[test]
    fn product_rejects_cardinality_mismatch() {
        let a = Factor::ones(vec![VarId(0)], vec![2]).unwrap();
        let b = Factor::ones(vec![VarId(0)], vec![3]).unwrap();
        assert_eq!(factor_product(&a, &b), Err(Error::CardinalityMismatch { var: VarId(0), left: 2, right: 3 }));
    }

    #[test]
    fn marginalize_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = rand_factor(&mut rng, &[4], &[3]);
        let s = factor_marginalize(&a, VarId(4)).unwrap();
        assert!(s.scope().is_empty());
        assert!((s.values()[0] - a.sum()).abs() < 1e-15);

        let dist = Factor::new(vec![VarId(0)], vec![3], vec![0.2, 0.3, 0.5]).unwrap();
        assert!((factor_marginalize(&dist, VarId(0)).unwrap().values()[0] - 1.0).abs() < 1e-15);

        let f = rand_factor(&mut rng, &[0, 1, 2], &[2, 3, 2]);
        let a1 = factor_marginalize(&factor_marginalize(&f, VarId(0)).unwrap(), VarId(1)).unwrap();
        let a2 = factor_marginalize(&factor_marginalize(&f, VarId(1)).unwrap(), VarId(0)).unwrap();
        assert!(close(a1.values(), a2.values(), 1e-12));

        assert_eq!(factor_marginalize(&f, VarId(7)), Err(Error::NotInScope(VarId(7))));
    }

    #[test]
    fn elimination_matches_joint_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let g = fixtures::random_dag(&mut rng, 6, 0.4, 0.3);
            let bn = DiscreteBN::random(g, vec![2; 6], &mut rng).unwrap();
            let p = joint(&bn).unwrap();
            assert!((p.sum() - 1.0).abs() < 1e-10);
            let keep = VarId(rng.random_range(0..6));
            let order: Vec<VarId> = (0..6).map(VarId).filter(|&v| v != keep).collect();
            let m = eliminate_variables(&bn.cpds, &order).unwrap();
            let oracle = factor_project(&p, &[keep]).unwrap();
            assert!(close(m.reorder(&[keep]).unwrap().values(), oracle.values(), 1e-10));
        }
    }

    #[test]
    fn empty_order_is_the_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = rand_factor(&mut rng, &[0], &[2]);
        let b = rand_factor(&mut rng, &[1], &[2]);
        let f = eliminate_variables(&[a.clone(), b.clone()], &[]).unwrap();
        assert!(close(f.values(), factor_product(&a, &b).unwrap().values(), 1e-15));
    }

    #[test]
    fn intermediate_scopes_follow_the_student_cliques() {
        let s = fixtures::student();
        let scopes: Vec<Vec<VarId>> = s
            .vars()
            .map(|v| {
                let mut sc = s.parents(v).to_vec();
                sc.push(v);
                sc
            })
            .collect();
        let ids = |names: &[&str]| {
            let mut v: Vec<VarId> = names.iter().map(|n| s.id(n).unwrap()).collect();
            v.sort_unstable();
            v
        };
        let order: Vec<VarId> = ["D", "I"].iter().map(|n| s.id(n).unwrap()).collect();
        let psi = symbolic_scopes(&scopes, &order);
        assert_eq!(psi[0], ids(&["D", "I", "G"]));
        assert_eq!(psi[1], ids(&["G", "I", "S"]));
    }

    #[test]
    fn joint_simple_cases() {
        let coins = BayesNet::from_names(&[("a", false), ("b", true)], &[]).unwrap();
        let fair = |v| Factor::new(vec![VarId(v)], vec![2], vec![0.5, 0.5]).unwrap();
        let bn = DiscreteBN::new(coins, vec![2, 2], vec![fair(0), fair(1)]).unwrap();
        assert_eq!(joint(&bn).unwrap().values(), &[0.25; 4]);

        let chain = fixtures::chain(3);
        let root = Factor::new(vec![VarId(0)], vec![2], vec![0.3, 0.7]).unwrap();
        let copy = |p, c| Factor::new(vec![VarId(p), VarId(c)], vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let bn = DiscreteBN::new(chain, vec![2; 3], vec![root, copy(0, 1), copy(1, 2)]).unwrap();
        let j = joint(&bn).unwrap();
        let nonzero: Vec<usize> = (0..8).filter(|&i| j.values()[i] > 0.0).collect();
        assert_eq!(nonzero, vec![0, 7]);
    }

    #[test]
    fn joint_respects_size_cap() {
        let g = BayesNet::new((0..21).map(|i| format!("v{i}")).collect(), vec![false; 21], &[]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bn = DiscreteBN::random(g, vec![2; 21], &mut rng).unwrap();
        assert!(matches!(joint(&bn), Err(Error::JointTooLarge(..))));
    }

    #[test]
    fn cpd_validation() {
        let g = BayesNet::from_names(&[("a", false), ("b", true)], &[("a", "b")]).unwrap();
        let a = Factor::new(vec![VarId(0)], vec![2], vec![0.5, 0.5]).unwrap();
        let bad = Factor::new(vec![VarId(0), VarId(1)], vec![2, 2], vec![0.5, 0.6, 0.5, 0.5]).unwrap();
        assert!(matches!(DiscreteBN::new(g.clone(), vec![2, 2], vec![a.clone(), bad]), Err(Error::InvalidCpd { .. })));
        let missing_parent = Factor::new(vec![VarId(1)], vec![2], vec![0.5, 0.5]).unwrap();
        assert!(matches!(DiscreteBN::new(g, vec![2, 2], vec![a, missing_parent]), Err(Error::InvalidCpd { .. })));
        assert!(Factor::new(vec![VarId(0)], vec![2], vec![-0.1, 1.1]).is_err());
    }

    #[test]
    fn faithful_fit_has_zero_kl_and_mean_field_does_not() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = fixtures::fig1a();
        let bn = DiscreteBN::random(f.clone(), vec![2; 5], &mut rng).unwrap();
        for dir in [Direction::Forward, Direction::Reverse] {
            let h = nami(&f, dir).unwrap().graph;
            let q = fit_inverse_exact(&bn, &h).unwrap();
            assert!(expected_posterior_kl(&bn, &q.q).unwrap() <= 1e-10);
        }
        let mf = fit_inverse_exact(&bn, &mean_field_inverse(&f).unwrap().graph).unwrap();
        assert!(expected_posterior_kl(&bn, &mf.q).unwrap() > 1e-6);
        let heur = fit_inverse_exact(&bn, &stuhlmuller_invert(&f).unwrap().graph).unwrap();
        assert!(expected_posterior_kl(&bn, &heur.q).unwrap() >= 0.0);
    }

    #[test]
    fn chain_posterior_factorization_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = fixtures::chain(4);
        let bn = DiscreteBN::random(c.clone(), vec![3; 4], &mut rng).unwrap();
        // q(z2|x) q(z1|z2) q(z0|z1)
        let h = c.with_edges(&[(VarId(3), VarId(2)), (VarId(2), VarId(1)), (VarId(1), VarId(0))]).unwrap();
        let q = fit_inverse_exact(&bn, &h).unwrap();
        assert!(q.zero_rows.is_empty());
        assert!(expected_posterior_kl(&bn, &q.q).unwrap() <= 1e-12);
    }

    #[test]
    fn zero_rows_are_uniform_and_flagged() {
        let g = BayesNet::from_names(&[("z", false), ("x", true)], &[("z", "x")]).unwrap();
        let z = Factor::new(vec![VarId(0)], vec![2], vec![1.0, 0.0]).unwrap();
        let x = Factor::new(vec![VarId(0), VarId(1)], vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let bn = DiscreteBN::new(g.clone(), vec![2, 2], vec![z, x]).unwrap();
        let h = g.with_edges(&[(VarId(1), VarId(0))]).unwrap();
        let q = fit_inverse_exact(&bn, &h).unwrap();
        assert_eq!(q.zero_rows, vec![(VarId(0), 1)]);
        assert_eq!(&q.q.cpds[0].values()[2..], &[0.5, 0.5]);
        assert_eq!(expected_posterior_kl(&bn, &q.q).unwrap(), 0.0);
    }

    #[test]
    fn kl_reports_support_violations() {
        let g = BayesNet::from_names(&[("z", false), ("x", true)], &[("z", "x")]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let bn = DiscreteBN::random(g.clone(), vec![2, 2], &mut rng).unwrap();
        let h = g.with_edges(&[]).unwrap();
        let qx = Factor::new(vec![VarId(1)], vec![2], vec![0.5, 0.5]).unwrap();
        let qz = Factor::new(vec![VarId(0)], vec![2], vec![1.0, 0.0]).unwrap();
        let q = DiscreteBN::new(h, vec![2, 2], vec![qz, qx]).unwrap();
        assert!(matches!(expected_posterior_kl(&bn, &q), Err(Error::Support(_))));
    }
}
