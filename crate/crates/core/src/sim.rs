//! Monte-Carlo execution of a synthesized controller: the stage-one policy
//! runs until an accepting state is reached, then the recurrence policy
//! chosen for that state takes over for good.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::aec::TerminalCostMap;
use crate::compose::{ControlMode, ProductMdp};
use crate::error::{Error, Result};
use crate::model::Distribution;
use crate::policy::MemorylessPolicy;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub mode: ControlMode,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trace {
    pub steps: Vec<Step>,
    /// State after the last step.
    pub last: usize,
    /// Step at which an accepting state was first occupied.
    pub switch_index: Option<usize>,
}

/// Seed of trace `i` derived from a master seed with the SplitMix64
/// sequence: the `(i+1)`-th output of a generator started at `master`.
pub fn trace_seed(master: u64, i: u64) -> u64 {
    let mut z = master.wrapping_add((i + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample(d: &Distribution, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen::<f64>() * d.total();
    let mut acc = 0.0;
    let mut last = d.entries()[0].0;
    for &(i, p) in d.entries() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Runs one execution, calling `visit(t, step, switched)` for each step.
fn run(
    p: &ProductMdp,
    f: &MemorylessPolicy,
    terminal: &TerminalCostMap,
    seed: u64,
    horizon: usize,
    mut visit: impl FnMut(usize, &Step, Option<usize>),
) -> Result<(usize, Option<usize>)> {
    if horizon == 0 {
        return Err(Error::Precondition("horizon must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = sample(p.initial(), &mut rng);
    let mut switch: Option<usize> = None;
    let mut active = f;
    for t in 0..horizon {
        if switch.is_none() {
            if let Some(g) = terminal.policy_for(v) {
                switch = Some(t);
                active = g;
            }
        }
        let d = active.get(v).ok_or_else(|| {
            Error::Policy(format!("no policy action at {} (step {t})", p.name(v)))
        })?;
        let a = sample(d, &mut rng);
        let c = p.choice(v, a).ok_or_else(|| {
            Error::Policy(format!("policy picked a disabled action at {}", p.name(v)))
        })?;
        let k = sample_succ(c, &mut rng);
        let tr = c.succ[k];
        let step = Step {
            state: v,
            action: a,
            mode: p.action(a).mode,
            cost: tr.cost,
        };
        visit(t, &step, switch);
        v = tr.target;
    }
    if switch.is_none() && terminal.policy_for(v).is_some() {
        switch = Some(horizon);
    }
    Ok((v, switch))
}

fn sample_succ(c: &crate::compose::Choice, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen::<f64>() * c.prob_sum();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, t) in c.succ.iter().enumerate() {
        if t.prob <= 0.0 {
            continue;
        }
        acc += t.prob;
        last = k;
        if u < acc {
            return k;
        }
    }
    last
}

/// Samples one execution of `horizon` steps.
pub fn simulate(
    p: &ProductMdp,
    f: &MemorylessPolicy,
    terminal: &TerminalCostMap,
    seed: u64,
    horizon: usize,
) -> Result<Trace> {
    let mut steps = Vec::with_capacity(horizon);
    let (last, switch_index) = run(p, f, terminal, seed, horizon, |_, s, _| steps.push(s.clone()))?;
    Ok(Trace {
        steps,
        last,
        switch_index,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateOptions {
    pub traces: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Only traces that spend at least this many steps after switching
    /// enter the recurrence table.
    pub min_suffix: usize,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            traces: 10_000,
            horizon: 2000,
            seed: 0,
            min_suffix: 1000,
        }
    }
}

/// Visit statistics of one accepting state over trace suffixes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecurrenceRow {
    pub state: String,
    /// Long-suffix traces whose chosen component contains the state.
    pub eligible: usize,
    /// Of those, how many visited it after switching.
    pub visited: usize,
    pub visits: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub traces: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Mean discounted reach reward: 1 if the run starts in the accepting
    /// set, `gamma^(k-1)` if it first enters at step `k`, else 0.
    pub reach: f64,
    pub reach_se: f64,
    /// Mean discounted attention cost with the terminal cost charged on
    /// entry, matching the second objective's sign-flipped value.
    pub cost: f64,
    pub cost_se: f64,
    /// Mean discounted attention cost actually incurred over the horizon.
    pub realized_cost: f64,
    pub realized_cost_se: f64,
    /// Fraction of traces that reached the accepting set.
    pub switched: f64,
    /// Upper bound on the discounted mass beyond the horizon, per unit of
    /// per-step reward.
    pub truncation_bound: f64,
    /// Same bound for the cost estimates, using the largest step cost.
    pub cost_truncation_bound: f64,
    pub recurrence: Vec<RecurrenceRow>,
}

struct TraceSummary {
    reach: f64,
    cost: f64,
    realized: f64,
    switched: bool,
    /// `(component states, visits per state)` when the suffix is long enough.
    suffix: Option<BTreeMap<usize, u64>>,
}

fn mean_se(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Estimates discounted reach and cost over `opts.traces` seeded runs and
/// tabulates post-switch visits inside the chosen components.
pub fn estimate(
    p: &ProductMdp,
    f: &MemorylessPolicy,
    terminal: &TerminalCostMap,
    opts: &EstimateOptions,
) -> Result<Estimate> {
    if opts.traces == 0 {
        return Err(Error::Precondition("at least one trace is required".into()));
    }
    let gamma = p.gamma();
    let one = |i: usize| -> Result<TraceSummary> {
        let mut realized = 0.0;
        let mut before = 0.0;
        let mut last_before = 0.0;
        let mut disc = 1.0;
        let mut entered = None;
        let mut visits: BTreeMap<usize, u64> = BTreeMap::new();
        let seed = trace_seed(opts.seed, i as u64);
        let (last, switch) = run(p, f, terminal, seed, opts.horizon, |t, s, sw| {
            realized += disc * s.cost;
            match sw {
                None => {
                    before += disc * s.cost;
                    last_before = s.cost;
                }
                Some(k) => {
                    if t == k {
                        entered = Some(s.state);
                    }
                    *visits.entry(s.state).or_default() += 1;
                }
            }
            disc *= gamma;
        })?;
        let entered = entered.or(switch.map(|_| last));
        let (reach, cost) = match (switch, entered) {
            (Some(k), Some(w)) => {
                let u = terminal.value(w).unwrap_or(0.0);
                if k == 0 {
                    (1.0, u)
                } else {
                    // The entering step is charged the terminal cost instead
                    // of its own attention cost.
                    let g = gamma.powi(k as i32 - 1);
                    (g, before - g * last_before + g * u)
                }
            }
            _ => (0.0, before),
        };
        let suffix = match (switch, entered) {
            (Some(k), Some(w)) if k < opts.horizon && opts.horizon - k >= opts.min_suffix => {
                let comp = terminal.component_for(w).expect("switch state has a component");
                Some(
                    comp.states
                        .iter()
                        .map(|&v| (v, visits.get(&v).copied().unwrap_or(0)))
                        .collect(),
                )
            }
            _ => None,
        };
        Ok(TraceSummary {
            reach,
            cost,
            realized,
            switched: switch.is_some(),
            suffix,
        })
    };

    #[cfg(feature = "parallel")]
    let summaries: Result<Vec<TraceSummary>> = {
        use rayon::prelude::*;
        (0..opts.traces).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let summaries: Result<Vec<TraceSummary>> = (0..opts.traces).map(one).collect();
    let summaries = summaries?;

    let (reach, reach_se) = mean_se(summaries.iter().map(|s| s.reach));
    let (cost, cost_se) = mean_se(summaries.iter().map(|s| s.cost));
    let (realized_cost, realized_cost_se) = mean_se(summaries.iter().map(|s| s.realized));
    let switched = summaries.iter().filter(|s| s.switched).count() as f64 / opts.traces as f64;

    let mut table: BTreeMap<usize, RecurrenceRow> = BTreeMap::new();
    for s in &summaries {
        if let Some(counts) = &s.suffix {
            for (&v, &n) in counts {
                let row = table.entry(v).or_insert_with(|| RecurrenceRow {
                    state: p.name(v).to_owned(),
                    eligible: 0,
                    visited: 0,
                    visits: 0,
                });
                row.eligible += 1;
                row.visited += usize::from(n > 0);
                row.visits += n;
            }
        }
    }

    let max_cost = (0..p.num_states())
        .flat_map(|v| p.choices(v).iter().flat_map(|c| c.succ.iter().map(|t| t.cost)))
        .fold(0.0f64, f64::max);
    let tail = gamma.powi(opts.horizon as i32) / (1.0 - gamma);
    Ok(Estimate {
        traces: opts.traces,
        horizon: opts.horizon,
        seed: opts.seed,
        reach,
        reach_se,
        cost,
        cost_se,
        realized_cost,
        realized_cost_se,
        switched,
        truncation_bound: gamma.powi(opts.horizon as i32),
        cost_truncation_bound: tail * max_cost,
        recurrence: table.into_values().collect(),
    })
}
