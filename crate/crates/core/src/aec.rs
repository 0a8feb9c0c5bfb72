//! Minimum-effort recurrence policies inside accepting end components and
//! the terminal cost they induce.

use std::collections::{BTreeMap, BTreeSet};

use crate::compose::{ProductMdp, StateSet};
use crate::ec::{sccs, EndComponent};
use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, Relation, Sense};
use crate::model::{Distribution, PROB_TOL};
use crate::policy::{evaluate_policy, MemorylessPolicy};

#[derive(Clone, Debug, PartialEq)]
pub struct AecConfig {
    /// Lower bound on the discounted visit frequency of every state.
    pub eps_visit: f64,
    /// Number of times `eps_visit` is divided by 10 after an infeasible solve.
    pub max_backoff: u32,
    /// Weight of the uniform staying policy mixed into an optimum whose
    /// induced chain is not irreducible.
    pub recurrence_mix: f64,
}

impl Default for AecConfig {
    fn default() -> Self {
        AecConfig {
            eps_visit: 1e-6,
            max_backoff: 6,
            recurrence_mix: 1e-3,
        }
    }
}

/// Occupancy program of one component with its variable layout.
#[derive(Clone, Debug)]
pub struct AecProgram {
    pub lp: LinearProgram,
    /// `(state, action)` of each LP variable.
    pub vars: Vec<(usize, usize)>,
}

/// Builds the minimum-cost recurrence program over `w`.
///
/// Variables are `x(v,a)` for staying actions, constrained by discounted
/// flow conservation with initial mass `eta` and by a visit frequency of at
/// least `eps_visit` at every state.
pub fn build_aec_lp(
    p: &ProductMdp,
    w: &EndComponent,
    eta: &Distribution,
    eps_visit: f64,
) -> Result<AecProgram> {
    if !(eps_visit > 0.0) {
        return Err(Error::Precondition(format!("visit bound {eps_visit} must be positive")));
    }
    let mut vars = Vec::new();
    for &v in &w.states {
        let acts = w.actions.get(&v).filter(|a| !a.is_empty()).ok_or_else(|| {
            Error::Precondition(format!("component state {} has no staying action", p.name(v)))
        })?;
        for &a in acts {
            let c = p.choice(v, a).ok_or_else(|| {
                Error::Precondition(format!("staying action is disabled at {}", p.name(v)))
            })?;
            if let Some(t) = c
                .succ
                .iter()
                .find(|t| t.prob > PROB_TOL && !w.states.contains(&t.target))
            {
                return Err(Error::Precondition(format!(
                    "component is not closed: {} under {} reaches {}",
                    p.name(v),
                    p.action(a),
                    p.name(t.target)
                )));
            }
            vars.push((v, a));
        }
    }

    let gamma = p.gamma();
    let mut lp = LinearProgram::new(Sense::Minimize);
    let row: BTreeMap<usize, usize> = w.states.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut flow: Vec<Vec<(usize, f64)>> = vec![Vec::new(); w.states.len()];
    let mut visit: Vec<Vec<(usize, f64)>> = vec![Vec::new(); w.states.len()];
    for &(v, a) in &vars {
        let j = lp.add_var(format!("x({},{})", p.name(v), p.action(a)));
        let c = p.choice(v, a).unwrap();
        lp.add_objective(j, c.expected_cost());
        flow[row[&v]].push((j, 1.0));
        visit[row[&v]].push((j, 1.0));
        for t in &c.succ {
            if let Some(&k) = row.get(&t.target) {
                flow[k].push((j, -gamma * t.prob));
            }
        }
    }
    for (i, &v) in w.states.iter().enumerate() {
        lp.add_constraint(
            format!("flow({})", p.name(v)),
            std::mem::take(&mut flow[i]),
            Relation::Eq,
            eta.prob(v),
        );
    }
    for (i, &v) in w.states.iter().enumerate() {
        lp.add_constraint(
            format!("visit({})", p.name(v)),
            std::mem::take(&mut visit[i]),
            Relation::Ge,
            eps_visit,
        );
    }
    Ok(AecProgram { lp, vars })
}

/// Solved recurrence problem for one component.
#[derive(Clone, Debug)]
pub struct AecSolution {
    pub component: EndComponent,
    /// Policy normalized from the LP occupancy.
    pub lp_policy: MemorylessPolicy,
    /// Policy actually executed: `lp_policy`, or its mixture with the
    /// uniform staying policy when `lp_policy` does not revisit every state.
    pub policy: MemorylessPolicy,
    pub mixed: bool,
    pub occupancy: BTreeMap<(usize, usize), f64>,
    /// LP optimum, the expected cost under the uniform initial distribution.
    pub objective: f64,
    pub eps_visit: f64,
    /// Value of `policy` per product state (NaN outside the component).
    pub values: Vec<f64>,
}

/// Whether the chain induced by `g` on `states` is strongly connected.
pub fn induced_irreducible(p: &ProductMdp, states: &StateSet, g: &MemorylessPolicy) -> bool {
    let actions: BTreeMap<usize, BTreeSet<usize>> = states
        .iter()
        .map(|&v| {
            let acts = g
                .get(v)
                .map(|d| d.support().collect())
                .unwrap_or_default();
            (v, acts)
        })
        .collect();
    sccs(p, states, &actions).len() == 1
}

fn uniform_staying(w: &EndComponent) -> MemorylessPolicy {
    let mut g = MemorylessPolicy::new();
    for &v in &w.states {
        let acts: Vec<usize> = w.staying(v).collect();
        g.set(v, Distribution::uniform(&acts));
    }
    g
}

/// Solves the recurrence program of `w` with uniform initial mass, backing
/// off the visit bound on infeasibility, and evaluates the resulting policy.
pub fn solve_aec_policy(p: &ProductMdp, w: &EndComponent, cfg: &AecConfig) -> Result<AecSolution> {
    let states: Vec<usize> = w.states.iter().copied().collect();
    let eta = Distribution::uniform(&states);
    let mut eps = cfg.eps_visit;
    let mut attempt = 0;
    let (prog, sol) = loop {
        let prog = build_aec_lp(p, w, &eta, eps)?;
        let sol = lp::solve(&prog.lp)?;
        match sol.status {
            lp::LpStatus::Optimal => break (prog, sol),
            lp::LpStatus::Infeasible if attempt < cfg.max_backoff => {
                attempt += 1;
                eps /= 10.0;
            }
            lp::LpStatus::Infeasible => return Err(Error::Infeasible),
            lp::LpStatus::Unbounded => return Err(Error::Unbounded),
        }
    };

    let mut occupancy = BTreeMap::new();
    let mut rows: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for (j, &(v, a)) in prog.vars.iter().enumerate() {
        let x = sol.x[j];
        occupancy.insert((v, a), x);
        rows.entry(v).or_default().push((a, x));
    }
    let mut lp_policy = MemorylessPolicy::new();
    for (v, row) in rows {
        let total: f64 = row.iter().map(|e| e.1).sum();
        if total <= 0.0 {
            return Err(Error::Solver(format!(
                "component state {} has zero occupancy",
                p.name(v)
            )));
        }
        lp_policy.set(
            v,
            Distribution::from_raw(row.into_iter().filter(|e| e.1 > 0.0).map(|(a, x)| (a, x / total))),
        );
    }

    let mixed = !induced_irreducible(p, &w.states, &lp_policy);
    let policy = if mixed {
        if !(cfg.recurrence_mix > 0.0) {
            return Err(Error::Policy(
                "optimal occupancy does not revisit every component state".into(),
            ));
        }
        let g = lp_policy.mix(&uniform_staying(w), cfg.recurrence_mix);
        debug_assert!(induced_irreducible(p, &w.states, &g));
        g
    } else {
        lp_policy.clone()
    };
    let values = evaluate_policy(p, &w.states, &policy, |_, _, t| t.cost, &StateSet::new())?;

    Ok(AecSolution {
        component: w.clone(),
        lp_policy,
        policy,
        mixed,
        occupancy,
        objective: sol.objective,
        eps_visit: eps,
        values,
    })
}

/// Terminal cost per accepting state and the recurrence policy to follow
/// from it.
#[derive(Clone, Debug, Default)]
pub struct TerminalCostMap {
    pub values: BTreeMap<usize, f64>,
    /// Index into `solutions` of the component chosen for each state.
    pub chosen: BTreeMap<usize, usize>,
    pub solutions: Vec<AecSolution>,
}

impl TerminalCostMap {
    pub fn value(&self, v: usize) -> Option<f64> {
        self.values.get(&v).copied()
    }

    /// Policy to follow once `v` has been reached.
    pub fn policy_for(&self, v: usize) -> Option<&MemorylessPolicy> {
        self.chosen.get(&v).map(|&k| &self.solutions[k].policy)
    }

    pub fn component_for(&self, v: usize) -> Option<&EndComponent> {
        self.chosen.get(&v).map(|&k| &self.solutions[k].component)
    }

    pub fn states(&self) -> StateSet {
        self.values.keys().copied().collect()
    }
}

/// Solves every component and keeps, per state, the cheapest containing
/// one (lowest index on ties).
pub fn terminal_costs(p: &ProductMdp, aecs: &[EndComponent], cfg: &AecConfig) -> Result<TerminalCostMap> {
    #[cfg(feature = "parallel")]
    let solutions: Result<Vec<AecSolution>> = {
        use rayon::prelude::*;
        aecs.par_iter().map(|w| solve_aec_policy(p, w, cfg)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let solutions: Result<Vec<AecSolution>> =
        aecs.iter().map(|w| solve_aec_policy(p, w, cfg)).collect();
    let solutions = solutions?;

    let mut map = TerminalCostMap::default();
    for (k, s) in solutions.iter().enumerate() {
        for &v in &s.component.states {
            let u = s.values[v];
            match map.values.get(&v) {
                Some(&best) if u >= best - 1e-12 * best.abs().max(1.0) => {}
                _ => {
                    map.values.insert(v, u);
                    map.chosen.insert(v, k);
                }
            }
        }
    }
    map.solutions = solutions;
    Ok(map)
}
