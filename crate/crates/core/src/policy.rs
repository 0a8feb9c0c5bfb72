//! Memoryless randomized policies on a product MDP, exact policy evaluation
//! and discounted occupancy measures.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};

use crate::compose::{Choice, ProductMdp, StateSet, Transition};
use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use crate::model::{Distribution, PROB_TOL};

/// Residual tolerance of the policy-evaluation fixed point.
pub const EVAL_TOL: f64 = 1e-10;

/// Map from product state to a distribution over product action indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MemorylessPolicy {
    choice: BTreeMap<usize, Distribution>,
}

impl MemorylessPolicy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, v: usize, d: Distribution) {
        self.choice.insert(v, d);
    }

    pub fn set_deterministic(&mut self, v: usize, action: usize) {
        self.choice.insert(v, Distribution::point(action));
    }

    pub fn get(&self, v: usize) -> Option<&Distribution> {
        self.choice.get(&v)
    }

    pub fn contains(&self, v: usize) -> bool {
        self.choice.contains_key(&v)
    }

    pub fn domain(&self) -> impl Iterator<Item = usize> + '_ {
        self.choice.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Distribution)> {
        self.choice.iter().map(|(&v, d)| (v, d))
    }

    pub fn len(&self) -> usize {
        self.choice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choice.is_empty()
    }

    /// Most probable action at `v`; ties go to the lowest action index.
    pub fn argmax(&self, v: usize) -> Option<usize> {
        let d = self.choice.get(&v)?;
        let mut best: Option<(usize, f64)> = None;
        for &(a, p) in d.entries() {
            if best.is_none_or(|(_, q)| p > q + 1e-12) {
                best = Some((a, p));
            }
        }
        best.map(|b| b.0)
    }

    pub fn is_deterministic(&self) -> bool {
        self.choice.values().all(|d| d.support().count() == 1)
    }

    /// Checks that every row is a distribution over actions enabled in `p`.
    pub fn check(&self, p: &ProductMdp) -> Result<()> {
        for (&v, d) in &self.choice {
            if v >= p.num_states() {
                return Err(Error::Policy(format!("state index {v} out of range")));
            }
            if let Some(msg) = d.defect() {
                return Err(Error::Policy(format!("at {}: {msg}", p.name(v))));
            }
            for a in d.support() {
                if p.choice(v, a).is_none() {
                    return Err(Error::Policy(format!(
                        "action {} is not enabled at {}",
                        p.actions().get(a).map_or_else(|| a.to_string(), |x| x.to_string()),
                        p.name(v)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Convex mixture `(1 - rho) self + rho other` on the common domain.
    pub fn mix(&self, other: &MemorylessPolicy, rho: f64) -> MemorylessPolicy {
        let mut out = MemorylessPolicy::new();
        for (&v, d) in &self.choice {
            match other.choice.get(&v) {
                Some(e) => {
                    let entries = d
                        .entries()
                        .iter()
                        .map(|&(a, p)| (a, (1.0 - rho) * p))
                        .chain(e.entries().iter().map(|&(a, p)| (a, rho * p)));
                    out.set(v, Distribution::from_raw(entries));
                }
                None => out.set(v, d.clone()),
            }
        }
        out
    }
}

/// Successor lists of the actions `g` may take at `v`, with their probabilities.
pub(crate) fn policy_choices<'a>(
    p: &'a ProductMdp,
    g: &MemorylessPolicy,
    v: usize,
) -> Result<Vec<(f64, &'a Choice)>> {
    let d = g
        .get(v)
        .ok_or_else(|| Error::Policy(format!("policy undefined at {}", p.name(v))))?;
    let mut out = Vec::new();
    for &(a, pa) in d.entries() {
        if pa <= 0.0 {
            continue;
        }
        let c = p.choice(v, a).ok_or_else(|| {
            Error::Policy(format!("policy picks a disabled action at {}", p.name(v)))
        })?;
        out.push((pa, c));
    }
    Ok(out)
}

/// Exact discounted value of `g` on `domain`.
///
/// Solves `U(v) = sum_a g(v)(a) sum_v' P(v,a,v') (r(v,a,v') + gamma U(v'))`
/// for `v` in `domain`. Successors in `absorbing` collect their reward but
/// contribute no continuation value; any other successor outside `domain`
/// is an error. The result is indexed by product state and is NaN outside
/// `domain`.
pub fn evaluate_policy<F>(
    p: &ProductMdp,
    domain: &StateSet,
    g: &MemorylessPolicy,
    reward: F,
    absorbing: &StateSet,
) -> Result<Vec<f64>>
where
    F: Fn(usize, usize, &Transition) -> f64,
{
    let idx = local_index(p.num_states(), domain);
    let n = domain.len();
    let gamma = p.gamma();
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut r = DVector::<f64>::zeros(n);
    for (i, &v) in domain.iter().enumerate() {
        for (pa, c) in policy_choices(p, g, v)? {
            for t in &c.succ {
                let w = pa * t.prob;
                if w == 0.0 {
                    continue;
                }
                r[i] += w * reward(v, c.action, t);
                if let Some(k) = idx[t.target] {
                    a[(i, k)] -= gamma * w;
                } else if !absorbing.contains(&t.target) {
                    return Err(Error::Policy(format!(
                        "policy leaves the evaluation domain from {} to {}",
                        p.name(v),
                        p.name(t.target)
                    )));
                }
            }
        }
    }
    let u = solve_dense(&a, &r, EVAL_TOL)?;
    let mut out = vec![f64::NAN; p.num_states()];
    for (i, &v) in domain.iter().enumerate() {
        out[v] = u[i];
    }
    Ok(out)
}

/// Discounted state-action occupancy `x(v,a)` of `g` started from `init`,
/// counting only visits inside `domain`. Mass leaving `domain` is dropped.
pub fn occupancy_from_policy(
    p: &ProductMdp,
    domain: &StateSet,
    g: &MemorylessPolicy,
    init: &Distribution,
) -> Result<BTreeMap<(usize, usize), f64>> {
    let idx = local_index(p.num_states(), domain);
    let n = domain.len();
    let gamma = p.gamma();
    // Row i of `a` is the balance equation of state i: y - gamma P^T y = d0.
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut d0 = DVector::<f64>::zeros(n);
    for &(v, pr) in init.entries() {
        if let Some(i) = idx[v] {
            d0[i] += pr;
        }
    }
    for (i, &v) in domain.iter().enumerate() {
        for (pa, c) in policy_choices(p, g, v)? {
            for t in &c.succ {
                if let Some(k) = idx[t.target] {
                    a[(k, i)] -= gamma * pa * t.prob;
                }
            }
        }
    }
    let y = solve_dense(&a, &d0, EVAL_TOL)?;
    let mut x = BTreeMap::new();
    for (i, &v) in domain.iter().enumerate() {
        for &(act, pa) in g.get(v).expect("checked above").entries() {
            if pa > 0.0 {
                x.insert((v, act), y[i] * pa);
            }
        }
    }
    Ok(x)
}

pub(crate) fn local_index(n: usize, domain: &StateSet) -> Vec<Option<usize>> {
    let mut idx = vec![None; n];
    for (i, &v) in domain.iter().enumerate() {
        idx[v] = Some(i);
    }
    idx
}

/// States reachable from `from` under `g`, staying inside `domain`.
pub fn reachable_under(
    p: &ProductMdp,
    g: &MemorylessPolicy,
    from: impl IntoIterator<Item = usize>,
    domain: &StateSet,
) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<usize> = from.into_iter().filter(|v| domain.contains(v)).collect();
    while let Some(v) = stack.pop() {
        if !seen.insert(v) {
            continue;
        }
        if let Ok(cs) = policy_choices(p, g, v) {
            for (_, c) in cs {
                for t in &c.succ {
                    if t.prob > PROB_TOL && domain.contains(&t.target) && !seen.contains(&t.target) {
                        stack.push(t.target);
                    }
                }
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::{AcceptancePair, ControlMode, SaAction};

    fn chain(costs: [f64; 3], gamma: f64) -> ProductMdp {
        // 0 -> 1 -> 2 -> 0 deterministic cycle, one action.
        let choices = (0..3)
            .map(|v| {
                vec![Choice {
                    action: 0,
                    succ: vec![Transition {
                        target: (v + 1) % 3,
                        prob: 1.0,
                        cost: costs[v],
                    }],
                }]
            })
            .collect();
        ProductMdp::from_parts(
            vec!["a".into(), "b".into(), "c".into()],
            vec![SaAction::new("go", ControlMode::Autonomous, "e")],
            choices,
            Distribution::point(0),
            gamma,
            vec![AcceptancePair::default()],
        )
        .unwrap()
    }

    fn all(n: usize) -> StateSet {
        (0..n).collect()
    }

    fn always(n: usize, a: usize) -> MemorylessPolicy {
        let mut g = MemorylessPolicy::new();
        for v in 0..n {
            g.set_deterministic(v, a);
        }
        g
    }

    #[test]
    fn zero_cost_is_zero() {
        let p = chain([0.0; 3], 0.9);
        let u = evaluate_policy(&p, &all(3), &always(3, 0), |_, _, t| t.cost, &StateSet::new())
            .unwrap();
        assert!(u.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn constant_cost_is_geometric() {
        let p = chain([2.0; 3], 0.9);
        let u = evaluate_policy(&p, &all(3), &always(3, 0), |_, _, t| t.cost, &StateSet::new())
            .unwrap();
        for x in u {
            assert!((x - 20.0).abs() < 1e-10);
        }
    }

    #[test]
    fn leaking_domain_is_an_error() {
        let p = chain([1.0; 3], 0.9);
        let dom: StateSet = [0, 1].into_iter().collect();
        let r = evaluate_policy(&p, &dom, &always(3, 0), |_, _, t| t.cost, &StateSet::new());
        assert!(matches!(r, Err(Error::Policy(_))));
        let absorbing: StateSet = [2].into_iter().collect();
        let u = evaluate_policy(&p, &dom, &always(3, 0), |_, _, t| t.cost, &absorbing).unwrap();
        assert!((u[0] - 1.9).abs() < 1e-12);
        assert!(u[2].is_nan());
    }

    #[test]
    fn occupancy_sums_to_horizon() {
        let p = chain([1.0; 3], 0.8);
        let x = occupancy_from_policy(&p, &all(3), &always(3, 0), p.initial()).unwrap();
        let total: f64 = x.values().sum();
        assert!((total - 5.0).abs() < 1e-10);
        assert!((x[&(0, 0)] - 1.0 / (1.0 - 0.512)).abs() < 1e-10);
    }

    #[test]
    fn argmax_tie_goes_to_lowest() {
        let mut g = MemorylessPolicy::new();
        g.set(0, Distribution::from_raw([(3, 0.5), (1, 0.5)]));
        assert_eq!(g.argmax(0), Some(1));
        assert!(!g.is_deterministic());
    }
}
