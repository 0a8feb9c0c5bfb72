//! Two-objective trade-off between discounted reachability of the accepting
//! states and discounted attention cost.
//!
//! Outside the accepting set the process collects `r1 = 1` on the step that
//! enters the set and `r2 = -cost` on ordinary steps, or minus the terminal
//! cost of the entered state. States in the accepting set are absorbing for
//! this stage.

use std::collections::{BTreeMap, BTreeSet};

use crate::aec::TerminalCostMap;
use crate::compose::{ProductMdp, StateSet, Transition};
use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, Relation, Sense};
use crate::model::Distribution;
use crate::policy::{evaluate_policy, MemorylessPolicy};

/// Per-transition rewards indexed by `[state][choice][successor]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardVector {
    pub r1: Vec<Vec<Vec<f64>>>,
    pub r2: Vec<Vec<Vec<f64>>>,
}

impl RewardVector {
    pub fn objective(&self, i: usize) -> &Vec<Vec<Vec<f64>>> {
        match i {
            0 => &self.r1,
            1 => &self.r2,
            _ => panic!("objective index {i} out of range"),
        }
    }

    /// Expected one-step reward of choice `k` at `v` for objective `i`.
    pub fn expected(&self, p: &ProductMdp, i: usize, v: usize, k: usize) -> f64 {
        let r = &self.objective(i)[v][k];
        p.choices(v)[k]
            .succ
            .iter()
            .zip(r)
            .map(|(t, r)| t.prob * r)
            .sum()
    }

    /// Reward of the transition `t` taken under action `action` at `v`.
    pub fn of(&self, p: &ProductMdp, i: usize, v: usize, action: usize, t: &Transition) -> f64 {
        let k = choice_index(p, v, action);
        let c = &p.choices(v)[k];
        let s = c
            .succ
            .iter()
            .position(|x| x.target == t.target && x.prob == t.prob && x.cost == t.cost)
            .expect("transition belongs to the choice");
        self.objective(i)[v][k][s]
    }
}

fn choice_index(p: &ProductMdp, v: usize, action: usize) -> usize {
    p.choices(v)
        .iter()
        .position(|c| c.action == action)
        .expect("action enabled")
}

/// Builds both reward functions from the accepting set and its terminal costs.
pub fn build_reward_vector(
    p: &ProductMdp,
    accepting: &StateSet,
    terminal: &TerminalCostMap,
) -> Result<RewardVector> {
    let n = p.num_states();
    let mut r1 = Vec::with_capacity(n);
    let mut r2 = Vec::with_capacity(n);
    for v in 0..n {
        let inside = accepting.contains(&v);
        let mut row1 = Vec::new();
        let mut row2 = Vec::new();
        for c in p.choices(v) {
            let mut a1 = Vec::with_capacity(c.succ.len());
            let mut a2 = Vec::with_capacity(c.succ.len());
            for t in &c.succ {
                if inside {
                    a1.push(0.0);
                    a2.push(0.0);
                } else if accepting.contains(&t.target) {
                    let u = terminal.value(t.target).ok_or_else(|| {
                        Error::Precondition(format!("no terminal cost for {}", p.name(t.target)))
                    })?;
                    a1.push(1.0);
                    a2.push(-u);
                } else {
                    a1.push(0.0);
                    a2.push(-t.cost);
                }
            }
            row1.push(a1);
            row2.push(a2);
        }
        r1.push(row1);
        r2.push(row2);
    }
    Ok(RewardVector { r1, r2 })
}

/// Discounted value pair of a policy under the initial distribution.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ValueProfile {
    pub u1: f64,
    pub u2: f64,
}

impl ValueProfile {
    pub fn get(&self, i: usize) -> f64 {
        if i == 0 {
            self.u1
        } else {
            self.u2
        }
    }

    /// Whether `self` is at least as good in both objectives and better by
    /// more than `tol` in one.
    pub fn dominates(&self, other: &ValueProfile, tol: f64) -> bool {
        let weakly = self.u1 >= other.u1 - tol && self.u2 >= other.u2 - tol;
        let strictly = self.u1 > other.u1 + tol || self.u2 > other.u2 + tol;
        weakly && strictly
    }
}

/// Stage-one problem data: the domain outside the accepting set, the
/// occupancy variable layout and per-variable expected rewards.
#[derive(Clone, Debug)]
pub struct Stage1 {
    pub domain: StateSet,
    pub accepting: StateSet,
    /// `(state, choice index)` of each occupancy variable.
    pub vars: Vec<(usize, usize)>,
    /// Expected one-step reward per variable, for each objective.
    pub reward: [Vec<f64>; 2],
    /// Contribution of initial mass that already lies in the accepting set.
    pub offset: [f64; 2],
    pub rewards: RewardVector,
    /// Domain states reachable from the initial mass without passing
    /// through the accepting set. Only these carry occupancy.
    pub reach: StateSet,
    /// Indices into `vars` of the occupancy program's columns.
    pub lp_vars: Vec<usize>,
}

impl Stage1 {
    pub fn new(p: &ProductMdp, rewards: RewardVector, terminal: &TerminalCostMap) -> Result<Self> {
        let accepting = terminal.states();
        let domain: StateSet = (0..p.num_states()).filter(|v| !accepting.contains(v)).collect();
        let mut vars = Vec::new();
        let mut reward = [Vec::new(), Vec::new()];
        for &v in &domain {
            for k in 0..p.choices(v).len() {
                vars.push((v, k));
                for (i, r) in reward.iter_mut().enumerate() {
                    r.push(rewards.expected(p, i, v, k));
                }
            }
        }
        let mut offset = [0.0, 0.0];
        for &(v, pr) in p.initial().entries() {
            if accepting.contains(&v) {
                offset[0] += pr;
                offset[1] -= pr
                    * terminal.value(v).ok_or_else(|| {
                        Error::Precondition(format!("no terminal cost for {}", p.name(v)))
                    })?;
            }
        }
        let mut reach = StateSet::new();
        let mut stack: Vec<usize> = p.initial().support().filter(|v| domain.contains(v)).collect();
        while let Some(v) = stack.pop() {
            if reach.insert(v) {
                for c in p.choices(v) {
                    for t in &c.succ {
                        if t.prob > 0.0 && domain.contains(&t.target) && !reach.contains(&t.target) {
                            stack.push(t.target);
                        }
                    }
                }
            }
        }
        let lp_vars = (0..vars.len()).filter(|&j| reach.contains(&vars[j].0)).collect();
        Ok(Stage1 {
            domain,
            accepting,
            vars,
            reward,
            offset,
            rewards,
            reach,
            lp_vars,
        })
    }

    /// Occupancy program skeleton: flow constraints and non-negative
    /// variables over the reachable part of the domain. Column `j` of the
    /// program is `vars[lp_vars[j]]`; unreachable states have no occupancy.
    fn flow_lp(&self, p: &ProductMdp, sense: Sense) -> LinearProgram {
        let mut lp = LinearProgram::new(sense);
        let row: BTreeMap<usize, usize> = self.reach.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.reach.len()];
        let gamma = p.gamma();
        for &jv in &self.lp_vars {
            let (v, k) = self.vars[jv];
            let c = &p.choices(v)[k];
            let j = lp.add_var(format!("x({},{})", p.name(v), p.action(c.action)));
            rows[row[&v]].push((j, 1.0));
            for t in &c.succ {
                if let Some(&r) = row.get(&t.target) {
                    rows[r].push((j, -gamma * t.prob));
                }
            }
        }
        for (i, &v) in self.reach.iter().enumerate() {
            lp.add_constraint(
                format!("flow({})", p.name(v)),
                std::mem::take(&mut rows[i]),
                Relation::Eq,
                p.initial().prob(v),
            );
        }
        lp
    }

    /// Expands a solution of the occupancy program to all of `vars`.
    pub fn expand(&self, lp_x: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.vars.len()];
        for (k, &j) in self.lp_vars.iter().enumerate() {
            x[j] = lp_x[k];
        }
        x
    }

    /// Exact value of `g` on the domain for objective `i` (NaN elsewhere).
    pub fn evaluate(&self, p: &ProductMdp, g: &MemorylessPolicy, i: usize) -> Result<Vec<f64>> {
        evaluate_policy(
            p,
            &self.domain,
            g,
            |v, a, t| self.rewards.of(p, i, v, a, t),
            &self.accepting,
        )
    }

    /// Value profile of `g` under the initial distribution.
    pub fn profile(&self, p: &ProductMdp, g: &MemorylessPolicy) -> Result<(ValueProfile, [Vec<f64>; 2])> {
        let u1 = self.evaluate(p, g, 0)?;
        let u2 = self.evaluate(p, g, 1)?;
        let prof = self.profile_of(p, &u1, &u2);
        if !(-1e-9..=1.0 + 1e-9).contains(&prof.u1) {
            return Err(Error::Solver(format!("reach value {} outside [0, 1]", prof.u1)));
        }
        Ok((prof, [u1, u2]))
    }

    pub(crate) fn profile_of(&self, p: &ProductMdp, u1: &[f64], u2: &[f64]) -> ValueProfile {
        ValueProfile {
            u1: self.expectation(p, 0, u1),
            u2: self.expectation(p, 1, u2),
        }
    }

    /// Initial-distribution expectation of per-state values of objective `i`,
    /// including the mass that starts in the accepting set.
    pub fn expectation(&self, p: &ProductMdp, i: usize, values: &[f64]) -> f64 {
        let mut total = self.offset[i];
        for &(v, pr) in p.initial().entries() {
            if self.domain.contains(&v) {
                total += pr * values[v];
            }
        }
        total
    }

    fn policy_from_choices(&self, p: &ProductMdp, pick: &BTreeMap<usize, usize>) -> MemorylessPolicy {
        let mut g = MemorylessPolicy::new();
        for (&v, &k) in pick {
            g.set_deterministic(v, p.choices(v)[k].action);
        }
        g
    }
}

/// Normalizes stage-one occupancy rows into a policy. Rows without mass get
/// the uniform distribution over enabled actions.
pub fn extract_policy(p: &ProductMdp, stage: &Stage1, x: &[f64]) -> MemorylessPolicy {
    let mut rows: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for (j, &(v, k)) in stage.vars.iter().enumerate() {
        rows.entry(v).or_default().push((p.choices(v)[k].action, x[j].max(0.0)));
    }
    let mut g = MemorylessPolicy::new();
    for (v, row) in rows {
        let total: f64 = row.iter().map(|e| e.1).sum();
        if total > 1e-12 {
            g.set(
                v,
                Distribution::from_raw(row.into_iter().filter(|e| e.1 > 0.0).map(|(a, x)| (a, x / total))),
            );
        } else {
            let acts: Vec<usize> = row.iter().map(|e| e.0).collect();
            g.set(v, Distribution::uniform(&acts));
        }
    }
    g
}

/// Optimum of one objective.
#[derive(Clone, Debug)]
pub struct SingleObjective {
    pub objective: usize,
    /// Deterministic optimal policy on the stage-one domain.
    pub policy: MemorylessPolicy,
    /// Optimal value per state (NaN outside the domain).
    pub values: Vec<f64>,
    /// Optimum of the occupancy program (domain part only).
    pub lp_value: f64,
    /// Largest per-state gap between the policy's value and value iteration.
    pub vi_gap: f64,
}

fn q_values(p: &ProductMdp, stage: &Stage1, i: usize, v: usize, u: &[f64]) -> Vec<f64> {
    let gamma = p.gamma();
    let r = &stage.rewards.objective(i)[v];
    p.choices(v)
        .iter()
        .zip(r)
        .map(|(c, rk)| {
            c.succ
                .iter()
                .zip(rk)
                .map(|(t, &rt)| {
                    let cont = if stage.domain.contains(&t.target) { u[t.target] } else { 0.0 };
                    t.prob * (rt + gamma * cont)
                })
                .sum()
        })
        .collect()
}

fn tie_tol(x: f64) -> f64 {
    1e-9 * x.abs().max(1.0)
}

/// Maximizes objective `i` over memoryless policies on the stage-one domain.
///
/// The occupancy program gives a starting policy, which is then improved
/// greedily until stable; among equally good actions the first enabled one
/// is kept. The result is compared against value iteration.
pub fn solve_single_objective(p: &ProductMdp, stage: &Stage1, i: usize) -> Result<SingleObjective> {
    let mut lp = stage.flow_lp(p, Sense::Maximize);
    for (k, &j) in stage.lp_vars.iter().enumerate() {
        lp.add_objective(k, stage.reward[i][j]);
    }
    let sol = lp::solve(&lp)?.into_optimal()?;
    let start = extract_policy(p, stage, &stage.expand(&sol.x));

    let mut pick: BTreeMap<usize, usize> = BTreeMap::new();
    for &v in &stage.domain {
        let a = start.argmax(v).expect("every domain state has a row");
        pick.insert(v, choice_index(p, v, a));
    }
    let mut policy = stage.policy_from_choices(p, &pick);
    let mut values = stage.evaluate(p, &policy, i)?;
    for _ in 0..200 {
        let mut changed = false;
        for &v in &stage.domain {
            let q = q_values(p, stage, i, v, &values);
            let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let k = q.iter().position(|&x| x >= best - tie_tol(best)).unwrap();
            if k != pick[&v] {
                pick.insert(v, k);
                changed = true;
            }
        }
        if !changed {
            break;
        }
        policy = stage.policy_from_choices(p, &pick);
        values = stage.evaluate(p, &policy, i)?;
    }

    let vi = value_iteration(p, stage, i, 1e-13);
    let vi_gap = stage
        .domain
        .iter()
        .map(|&v| (vi[v] - values[v]).abs() / values[v].abs().max(1.0))
        .fold(0.0, f64::max);
    Ok(SingleObjective {
        objective: i,
        policy,
        values,
        lp_value: sol.objective,
        vi_gap,
    })
}

/// Optimal values of objective `i` by value iteration, stopped once the
/// sup-norm error bound drops below `tol * max(1, |U|)`.
pub fn value_iteration(p: &ProductMdp, stage: &Stage1, i: usize, tol: f64) -> Vec<f64> {
    let gamma = p.gamma();
    let mut u = vec![0.0; p.num_states()];
    for v in 0..p.num_states() {
        if !stage.domain.contains(&v) {
            u[v] = f64::NAN;
        }
    }
    for _ in 0..10_000_000 {
        let mut next = u.clone();
        let mut delta: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for &v in &stage.domain {
            let best = q_values(p, stage, i, v, &u)
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            delta = delta.max((best - u[v]).abs());
            scale = scale.max(best.abs());
            next[v] = best;
        }
        u = next;
        if delta * gamma / (1.0 - gamma) <= tol * scale {
            break;
        }
    }
    u
}

/// Ideal point, Nadir approximation and the full cross-evaluation table
/// `cross[i][j]` = profile value of objective `i` under the optimum of `j`.
#[derive(Clone, Debug)]
pub struct Reference {
    pub ideal: [f64; 2],
    pub nadir: [f64; 2],
    pub cross: [[f64; 2]; 2],
}

pub fn ideal_and_nadir(p: &ProductMdp, stage: &Stage1, opt: [&SingleObjective; 2]) -> Result<Reference> {
    let mut values: [[Vec<f64>; 2]; 2] = Default::default();
    for (i, row) in values.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = if i == j {
                opt[i].values.clone()
            } else {
                stage.evaluate(p, &opt[j].policy, i)?
            };
        }
    }
    let mut cross = [[0.0; 2]; 2];
    let mut ideal = [0.0; 2];
    let mut nadir = [0.0; 2];
    for i in 0..2 {
        let mut worst = vec![f64::NAN; p.num_states()];
        for &v in &stage.domain {
            worst[v] = values[i][0][v].min(values[i][1][v]);
        }
        for j in 0..2 {
            cross[i][j] = stage.expectation(p, i, &values[i][j]);
        }
        ideal[i] = cross[i][i];
        nadir[i] = stage.expectation(p, i, &worst);
    }
    Ok(Reference { ideal, nadir, cross })
}

/// Ideal and Nadir points with the user's weights and the resulting
/// normalized weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarizationContext {
    pub ideal: [f64; 2],
    pub nadir: [f64; 2],
    pub weights: [f64; 2],
    pub lambda: [f64; 2],
    pub eps_aug: f64,
}

impl ScalarizationContext {
    /// Weights must be non-negative and not both zero; they are not
    /// required to sum to one.
    pub fn new(ideal: [f64; 2], nadir: [f64; 2], weights: [f64; 2], eps_aug: f64) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Precondition(format!("invalid weights {weights:?}")));
        }
        if !(eps_aug > 0.0 && eps_aug.is_finite()) {
            return Err(Error::Precondition(format!("augmentation {eps_aug} must be positive")));
        }
        let mut lambda = [0.0; 2];
        for i in 0..2 {
            let range = (ideal[i] - nadir[i]).abs();
            lambda[i] = if range > 1e-12 { weights[i] / range } else { weights[i] };
        }
        Ok(ScalarizationContext {
            ideal,
            nadir,
            weights,
            lambda,
            eps_aug,
        })
    }
}

/// Linearized augmented Tchebychev program: the occupancy variables plus a
/// free variable `z` bounding each weighted distance to the ideal point.
/// Returns the program and the index of `z`.
pub fn build_tchebychev_lp(p: &ProductMdp, stage: &Stage1, ctx: &ScalarizationContext) -> (LinearProgram, usize) {
    let mut lp = stage.flow_lp(p, Sense::Minimize);
    let z = lp.add_free_var("z");
    lp.add_objective(z, 1.0);
    let n = stage.lp_vars.len();
    let mut aug = vec![0.0; n];
    for i in 0..2 {
        let lam = ctx.lambda[i];
        // z >= lam (I_i - R_i x)  <=>  z + lam R_i x >= lam I_i
        let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(n + 1);
        coeffs.push((z, 1.0));
        for (k, &j) in stage.lp_vars.iter().enumerate() {
            let r = stage.reward[i][j];
            if r != 0.0 && lam != 0.0 {
                coeffs.push((k, lam * r));
            }
            aug[k] -= ctx.eps_aug * lam * r;
        }
        let ideal_domain = ctx.ideal[i] - stage.offset[i];
        lp.add_constraint(format!("dist{}", i + 1), coeffs, Relation::Ge, lam * ideal_domain);
    }
    for (j, c) in aug.into_iter().enumerate() {
        if c != 0.0 {
            lp.add_objective(j, c);
        }
    }
    (lp, z)
}

/// Solution of one scalarized problem.
#[derive(Clone, Debug)]
pub struct TchebychevSolution {
    pub weights: [f64; 2],
    pub lambda: [f64; 2],
    pub policy: MemorylessPolicy,
    pub profile: ValueProfile,
    pub x: Vec<f64>,
    /// `z + eps_aug * sum_i lambda_i (I_i - R_i x)` at the optimum.
    pub objective: f64,
}

pub fn solve_tchebychev(p: &ProductMdp, stage: &Stage1, ctx: &ScalarizationContext) -> Result<TchebychevSolution> {
    let (lp, z) = build_tchebychev_lp(p, stage, ctx);
    let mut sol = lp::solve(&lp)?.into_optimal()?;
    if let Some(j) = (0..2).find(|&i| ctx.lambda[i] == 0.0 && ctx.lambda[1 - i] > 0.0) {
        // A zero weight leaves objective `j` out of the program, so the
        // optimum may be only weakly Pareto optimal. Among the optimal
        // solutions, take one that is best for objective `j`.
        let mut lex = lp.clone();
        let bound = sol.objective + 1e-9 * sol.objective.abs().max(1.0);
        lex.add_constraint("scalarized", lp.objective.clone(), Relation::Le, bound);
        lex.objective = stage
            .lp_vars
            .iter()
            .enumerate()
            .filter(|(_, &jv)| stage.reward[j][jv] != 0.0)
            .map(|(k, &jv)| (k, -stage.reward[j][jv]))
            .collect();
        sol = lp::solve(&lex)?.into_optimal()?;
    }
    let x = stage.expand(&sol.x[..stage.lp_vars.len()]);
    let policy = extract_policy(p, stage, &x);
    let (profile, _) = stage.profile(p, &policy)?;
    let mut objective = sol.x[z];
    for i in 0..2 {
        let rx: f64 = stage.reward[i].iter().zip(&x).map(|(r, x)| r * x).sum();
        objective += ctx.eps_aug * ctx.lambda[i] * (ctx.ideal[i] - stage.offset[i] - rx);
    }
    Ok(TchebychevSolution {
        weights: ctx.weights,
        lambda: ctx.lambda,
        policy,
        profile,
        x,
        objective,
    })
}

/// One weight of a sweep and its outcome.
#[derive(Debug)]
pub struct SweepPoint {
    pub weights: [f64; 2],
    pub lambda: [f64; 2],
    pub result: Result<TchebychevSolution>,
}

/// Solves the scalarized problem for each weight; failures are kept per
/// point. Output is sorted by the first weight.
pub fn pareto_sweep(
    p: &ProductMdp,
    stage: &Stage1,
    reference: &Reference,
    weights: &[[f64; 2]],
    eps_aug: f64,
) -> Vec<SweepPoint> {
    let one = |w: &[f64; 2]| -> SweepPoint {
        match ScalarizationContext::new(reference.ideal, reference.nadir, *w, eps_aug) {
            Ok(ctx) => SweepPoint {
                weights: *w,
                lambda: ctx.lambda,
                result: solve_tchebychev(p, stage, &ctx),
            },
            Err(e) => SweepPoint {
                weights: *w,
                lambda: [f64::NAN; 2],
                result: Err(e),
            },
        }
    };
    #[cfg(feature = "parallel")]
    let mut out: Vec<SweepPoint> = {
        use rayon::prelude::*;
        weights.par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let mut out: Vec<SweepPoint> = weights.iter().map(one).collect();
    out.sort_by(|a, b| a.weights[0].total_cmp(&b.weights[0]));
    out
}

/// The weights `(k/(n+1), 1 - k/(n+1))` for `k = 1..=n`.
pub fn beta_grid(n: usize) -> Vec<[f64; 2]> {
    (1..=n)
        .map(|k| {
            let b = k as f64 / (n + 1) as f64;
            [b, 1.0 - b]
        })
        .collect()
}

/// States where `g` puts positive probability on an action of the given
/// control mode.
pub fn states_using(p: &ProductMdp, g: &MemorylessPolicy, mode: crate::compose::ControlMode) -> BTreeSet<usize> {
    g.iter()
        .filter(|(_, d)| d.support().any(|a| p.action(a).mode == mode))
        .map(|(v, _)| v)
        .collect()
}
