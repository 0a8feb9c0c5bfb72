//! Random products and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use handoff_core::compose::{AcceptancePair, Choice, Transition};
use handoff_core::pareto::ValueProfile;
use handoff_core::{ControlMode, Distribution, ProductMdp, SaAction, Synthesis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random product with at most `max_states` states and `max_actions`
/// actions, random costs in `[0, 10)`, one or two acceptance pairs and a
/// discount in `[0.8, 0.99]`.
pub fn random_product(seed: u64, max_states: usize, max_actions: usize) -> ProductMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_states);
    let m = rng.gen_range(1..=max_actions);
    let actions: Vec<SaAction> = (0..m)
        .map(|k| SaAction::new(format!("a{k}"), ControlMode::Autonomous, "e"))
        .collect();
    let mut choices = Vec::with_capacity(n);
    for _ in 0..n {
        let mut enabled: Vec<usize> = (0..m).filter(|_| rng.gen_bool(0.7)).collect();
        if enabled.is_empty() {
            enabled.push(rng.gen_range(0..m));
        }
        let row = enabled
            .into_iter()
            .map(|a| {
                let mut targets: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.45)).collect();
                if targets.is_empty() {
                    targets.push(rng.gen_range(0..n));
                }
                let weights: Vec<f64> = targets.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
                let total: f64 = weights.iter().sum();
                let mut succ: Vec<Transition> = targets
                    .iter()
                    .zip(&weights)
                    .map(|(&t, w)| Transition {
                        target: t,
                        prob: w / total,
                        cost: rng.gen_range(0.0..10.0),
                    })
                    .collect();
                let head: f64 = succ[..succ.len() - 1].iter().map(|t| t.prob).sum();
                succ.last_mut().unwrap().prob = 1.0 - head;
                Choice { action: a, succ }
            })
            .collect();
        choices.push(row);
    }
    let pairs = (0..rng.gen_range(1..=2))
        .map(|_| {
            let avoid = (0..n).filter(|_| rng.gen_bool(0.25)).collect();
            let recur = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
            AcceptancePair { avoid, recur }
        })
        .collect();
    let start = rng.gen_range(0..n);
    let initial = if n > 1 && rng.gen_bool(0.3) {
        let other = (start + 1) % n;
        Distribution::new([(start, 0.5), (other, 0.5)]).unwrap()
    } else {
        Distribution::point(start)
    };
    let gamma = rng.gen_range(0.8..=0.99);
    let names = (0..n).map(|v| format!("v{v}")).collect();
    ProductMdp::from_parts(names, actions, choices, initial, gamma, pairs).unwrap()
}

/// Actions at `v` whose whole support lies in `set`.
fn staying(p: &ProductMdp, v: usize, set: &BTreeSet<usize>) -> BTreeSet<usize> {
    p.choices(v)
        .iter()
        .filter(|c| c.succ.iter().all(|t| t.prob <= 0.0 || set.contains(&t.target)))
        .map(|c| c.action)
        .collect()
}

fn strongly_connected(p: &ProductMdp, set: &BTreeSet<usize>) -> bool {
    let reach = |from: usize, forward: bool| {
        let mut seen = BTreeSet::from([from]);
        let mut stack = vec![from];
        while let Some(u) = stack.pop() {
            for &v in set {
                let edge = |a: usize, b: usize| {
                    p.choices(a).iter().any(|c| {
                        staying(p, a, set).contains(&c.action)
                            && c.succ.iter().any(|t| t.prob > 0.0 && t.target == b)
                    })
                };
                let e = if forward { edge(u, v) } else { edge(v, u) };
                if e && seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        seen.len() == set.len()
    };
    let first = *set.iter().next().unwrap();
    reach(first, true) && reach(first, false)
}

/// State sets of all end components, by subset enumeration.
pub fn all_end_component_sets(p: &ProductMdp, allowed: &BTreeSet<usize>) -> Vec<BTreeSet<usize>> {
    let pool: Vec<usize> = allowed.iter().copied().collect();
    let mut out = Vec::new();
    for mask in 1u32..(1 << pool.len()) {
        let set: BTreeSet<usize> = (0..pool.len()).filter(|&i| mask & (1 << i) != 0).map(|i| pool[i]).collect();
        if set.iter().all(|&v| !staying(p, v, &set).is_empty()) && strongly_connected(p, &set) {
            out.push(set);
        }
    }
    out
}

/// Maximal elements of `sets` under inclusion, each with its staying actions.
pub fn maximal(p: &ProductMdp, sets: &[BTreeSet<usize>]) -> BTreeMap<Vec<usize>, BTreeMap<usize, BTreeSet<usize>>> {
    sets.iter()
        .filter(|s| !sets.iter().any(|t| t != *s && s.is_subset(t)))
        .map(|s| {
            let acts = s.iter().map(|&v| (v, staying(p, v, s))).collect();
            (s.iter().copied().collect(), acts)
        })
        .collect()
}

pub fn brute_mecs(p: &ProductMdp) -> BTreeMap<Vec<usize>, BTreeMap<usize, BTreeSet<usize>>> {
    let all: BTreeSet<usize> = (0..p.num_states()).collect();
    maximal(p, &all_end_component_sets(p, &all))
}

/// Accepting components keyed by state set, with the pairs each satisfies.
pub fn brute_aecs(p: &ProductMdp) -> BTreeMap<Vec<usize>, BTreeSet<usize>> {
    let mut out: BTreeMap<Vec<usize>, BTreeSet<usize>> = BTreeMap::new();
    for (i, pair) in p.pairs().iter().enumerate() {
        let allowed: BTreeSet<usize> = (0..p.num_states()).filter(|v| !pair.avoid.contains(v)).collect();
        for (key, _) in maximal(p, &all_end_component_sets(p, &allowed)) {
            if key.iter().any(|v| pair.recur.contains(v)) {
                out.entry(key).or_default().insert(i);
            }
        }
    }
    out
}

/// Reward of a stage-one transition from `v` to `t` with cost `c`.
fn reward(syn: &Synthesis, i: usize, t: usize, c: f64) -> f64 {
    match (i, syn.accepting.contains(&t)) {
        (0, true) => 1.0,
        (0, false) => 0.0,
        (_, true) => -syn.terminal.value(t).unwrap(),
        (_, false) => -c,
    }
}

/// Optimal stage-one values of objective `i` by value iteration.
pub fn value_iteration(syn: &Synthesis, i: usize) -> Vec<f64> {
    let p = &syn.product;
    let g = p.gamma();
    let n = p.num_states();
    let mut u = vec![0.0; n];
    for _ in 0..200_000 {
        let mut next = vec![0.0; n];
        let mut delta = 0.0f64;
        for v in 0..n {
            if syn.accepting.contains(&v) {
                continue;
            }
            next[v] = p
                .choices(v)
                .iter()
                .map(|c| {
                    c.succ
                        .iter()
                        .map(|t| {
                            let cont = if syn.accepting.contains(&t.target) { 0.0 } else { u[t.target] };
                            t.prob * (reward(syn, i, t.target, t.cost) + g * cont)
                        })
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            delta = delta.max((next[v] - u[v]).abs());
        }
        u = next;
        if delta < 1e-15 {
            break;
        }
    }
    u
}

/// Initial-distribution expectation of stage-one values, counting mass that
/// starts in the accepting set at its entry reward.
pub fn expectation(syn: &Synthesis, i: usize, u: &[f64]) -> f64 {
    syn.product
        .initial()
        .entries()
        .iter()
        .map(|&(v, pr)| {
            let val = if syn.accepting.contains(&v) {
                if i == 0 {
                    1.0
                } else {
                    -syn.terminal.value(v).unwrap()
                }
            } else {
                u[v]
            };
            pr * val
        })
        .sum()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for k in col..n {
                        a[r][k] -= f * a[col][k];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    (0..n).map(|i| b[i] / a[i][i]).collect()
}

/// Exact profile of the deterministic stage-one policy picking choice
/// `pick[v]` at every non-accepting state.
pub fn deterministic_profile(syn: &Synthesis, pick: &[usize]) -> ValueProfile {
    let p = &syn.product;
    let n = p.num_states();
    let g = p.gamma();
    let mut out = [0.0; 2];
    for (i, slot) in out.iter_mut().enumerate() {
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        for v in 0..n {
            a[v][v] = 1.0;
            if syn.accepting.contains(&v) {
                continue;
            }
            for t in &p.choices(v)[pick[v]].succ {
                b[v] += t.prob * reward(syn, i, t.target, t.cost);
                if !syn.accepting.contains(&t.target) {
                    a[v][t.target] -= g * t.prob;
                }
            }
        }
        *slot = expectation(syn, i, &gauss(a, b));
    }
    ValueProfile { u1: out[0], u2: out[1] }
}

/// Profiles of every deterministic stage-one policy.
pub fn all_deterministic_profiles(syn: &Synthesis) -> Vec<ValueProfile> {
    let p = &syn.product;
    let n = p.num_states();
    let sizes: Vec<usize> = (0..n)
        .map(|v| if syn.accepting.contains(&v) { 1 } else { p.choices(v).len() })
        .collect();
    let mut pick = vec![0; n];
    let mut out = Vec::new();
    loop {
        out.push(deterministic_profile(syn, &pick));
        let mut k = 0;
        while k < n {
            pick[k] += 1;
            if pick[k] < sizes[k] {
                break;
            }
            pick[k] = 0;
            k += 1;
        }
        if k == n {
            return out;
        }
    }
}

/// `a` is at least as good as `b` in both objectives and better by more
/// than `tol` in one.
pub fn dominates(a: &ValueProfile, b: &ValueProfile, tol: f64) -> bool {
    a.u1 >= b.u1 - tol && a.u2 >= b.u2 - tol && (a.u1 > b.u1 + tol || a.u2 > b.u2 + tol)
}
