//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use handoff_core::aec::{solve_aec_policy, AecConfig};
use handoff_core::builtin::arm::ArmParams;
use handoff_core::builtin::gridworld::GridParams;
use handoff_core::builtin::Example;
use handoff_core::compose::{AcceptancePair, Choice, Transition};
use handoff_core::ec::{accepting_end_components, maximal_end_components};
use handoff_core::pareto::{beta_grid, ValueProfile};
use handoff_core::sim::{estimate, Estimate, EstimateOptions};
use handoff_core::{
    synthesize, ControlMode, Distribution, MemorylessPolicy, ProductMdp, SaAction, Synthesis, SynthesisConfig,
};

use common::*;

const LISTED_STATES: [&str; 6] = ["((1,1),0)", "((1,1),1)", "((1,0),0)", "((1,0),1)", "((0,1),1)", "((0,1),0)"];
const F1_ROW: [Option<&str>; 6] = [
    Some("(a_A,1)"),
    Some("(b_H,1)"),
    Some("(a_A,1)"),
    Some("(a_H,1)"),
    Some("(b_H,1)"),
    Some("(b_A,1)"),
];
const F2_ROW: [Option<&str>; 6] = [Some("(a_A,0)"), None, Some("(a_A,0)"), None, None, Some("(b_A,0)")];
const FP_ROW: [Option<&str>; 6] = [
    Some("(a_A,1)"),
    Some("(b_H,1)"),
    Some("(a_A,0)"),
    Some("(a_H,0)"),
    Some("(b_H,1)"),
    Some("(b_A,1)"),
];
const FP_LAMBDA: [f64; 2] = [11.93, 0.02];
const LAMBDA_REL_TOL: f64 = 0.10;
const REDUCTION_TOL: f64 = 1e-6;
const VI_TOL: f64 = 1e-9;
const DOMINANCE_TOL: f64 = 1e-6;
const CLOSED_FORM_TOL: f64 = 1e-9;
const ARM_TERMINAL: f64 = 250.0;

type Outcome = Result<String, String>;

fn run(ex: &Example) -> Synthesis {
    synthesize(&ex.autonomous, &ex.human, &ex.attention, &ex.automaton, &SynthesisConfig::default()).unwrap()
}

fn arm() -> Synthesis {
    run(&ArmParams::default().build().unwrap())
}

/// Non-accepting product state of the arm for a `(system, attention)` name.
fn arm_state(syn: &Synthesis, name: &str) -> Option<usize> {
    let prefix = format!("{name}|");
    (0..syn.product.num_states())
        .find(|&v| syn.product.name(v).starts_with(&prefix) && !syn.accepting.contains(&v))
}

fn action_name(syn: &Synthesis, g: &MemorylessPolicy, v: usize) -> Option<String> {
    g.argmax(v).map(|a| syn.product.action(a).to_string())
}

fn compare_row(syn: &Synthesis, g: &MemorylessPolicy, row: &[Option<&str>; 6]) -> Vec<String> {
    let mut bad = Vec::new();
    for (state, want) in LISTED_STATES.iter().zip(row) {
        let Some(want) = want else { continue };
        let got = arm_state(syn, state).and_then(|v| action_name(syn, g, v));
        if got.as_deref() != Some(*want) {
            bad.push(format!("{state}: want {want}, got {}", got.unwrap_or_else(|| "none".into())));
        }
    }
    bad
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let syn = arm();
    let mut bad = compare_row(&syn, &syn.optima[0].policy, &F1_ROW);
    bad.extend(compare_row(&syn, &syn.optima[1].policy, &F2_ROW));
    let deterministic = syn.optima.iter().all(|o| o.policy.is_deterministic());
    let elapsed = t.elapsed();
    if !deterministic {
        bad.push("an optimum is randomized".into());
    }
    if elapsed > Duration::from_secs(5) {
        bad.push(format!("took {elapsed:?}"));
    }
    if bad.is_empty() {
        Ok(format!("f1* and f2* match at all listed states in {elapsed:.2?}"))
    } else {
        Err(bad.join("; "))
    }
}

fn criterion_2() -> Outcome {
    let syn = arm();
    let sol = syn.scalarize([0.8, 0.2]).map_err(|e| e.to_string())?;
    let mut bad = compare_row(&syn, &sol.policy, &FP_ROW);
    for i in 0..2 {
        let rel = (sol.lambda[i] - FP_LAMBDA[i]).abs() / FP_LAMBDA[i];
        if rel > LAMBDA_REL_TOL {
            bad.push(format!(
                "lambda{} = {:.6} is {:.0}% away from {}",
                i + 1,
                sol.lambda[i],
                100.0 * rel,
                FP_LAMBDA[i]
            ));
        }
    }
    let detail = format!(
        "ideal ({:.6}, {:.4}), nadir ({:.6}, {:.4})",
        syn.reference.ideal[0], syn.reference.ideal[1], syn.reference.nadir[0], syn.reference.nadir[1]
    );
    if bad.is_empty() {
        Ok(format!("policy and lambda match; {detail}"))
    } else {
        Err(format!("{}; {detail}", bad.join("; ")))
    }
}

fn criterion_3() -> Outcome {
    let mut notes = Vec::new();
    for (name, syn) in [("arm", arm()), ("gridworld", run(&GridParams::default().build().unwrap()))] {
        for (i, w) in [[1.0, 0.0], [0.0, 1.0]].into_iter().enumerate() {
            let sol = syn.scalarize(w).map_err(|e| format!("{name} {w:?}: {e}"))?;
            let got = sol.profile.get(i);
            let want = syn.reference.ideal[i];
            if (got - want).abs() > REDUCTION_TOL {
                return Err(format!("{name} w={w:?}: u{} = {got} vs ideal {want}", i + 1));
            }
            notes.push(format!("{name} u{}={got:.9}", i + 1));
        }
    }
    Ok(notes.join(", "))
}

fn criterion_4() -> Outcome {
    let t = Instant::now();
    let mut worst_vi = 0.0f64;
    for seed in 0..200u64 {
        let p = random_product(seed, 4, 2);
        let syn = Synthesis::from_product(p, &SynthesisConfig::default()).map_err(|e| format!("seed {seed}: {e}"))?;
        for i in 0..2 {
            let u = value_iteration(&syn, i);
            let domain_part: f64 = syn
                .product
                .initial()
                .entries()
                .iter()
                .filter(|(v, _)| !syn.accepting.contains(v))
                .map(|&(v, pr)| pr * u[v])
                .sum();
            let gap = (syn.optima[i].lp_value - domain_part).abs();
            worst_vi = worst_vi.max(gap);
            if gap > VI_TOL {
                return Err(format!(
                    "seed {seed} objective {}: LP {} vs value iteration {domain_part}",
                    i + 1,
                    syn.optima[i].lp_value
                ));
            }
        }
        let profiles = all_deterministic_profiles(&syn);
        let mut weights = beta_grid(9);
        weights.extend([[1.0, 0.0], [0.0, 1.0]]);
        for w in weights {
            let sol = syn.scalarize(w).map_err(|e| format!("seed {seed} w={w:?}: {e}"))?;
            for e in &profiles {
                if dominates(e, &sol.profile, DOMINANCE_TOL) {
                    return Err(format!("seed {seed} w={w:?}: {e:?} dominates {:?}", sol.profile));
                }
            }
        }
    }
    let elapsed = t.elapsed();
    if elapsed > Duration::from_secs(60) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("max LP/VI gap {worst_vi:.1e}, 200 products in {elapsed:.2?}"))
}

fn criterion_5() -> Outcome {
    let t = Instant::now();
    let mut total = 0;
    for seed in 0..100u64 {
        let p = random_product(1000 + seed, 6, 3);
        let mecs: BTreeMap<Vec<usize>, BTreeMap<usize, BTreeSet<usize>>> = maximal_end_components(&p)
            .into_iter()
            .map(|ec| (ec.states.iter().copied().collect(), ec.actions))
            .collect();
        if mecs != brute_mecs(&p) {
            return Err(format!("seed {seed}: maximal end components differ"));
        }
        let aecs: BTreeMap<Vec<usize>, BTreeSet<usize>> = accepting_end_components(&p)
            .into_iter()
            .map(|ec| (ec.states.iter().copied().collect(), ec.pairs.into_iter().collect()))
            .collect();
        if aecs != brute_aecs(&p) {
            return Err(format!("seed {seed}: accepting end components differ: {aecs:?} vs {:?}", brute_aecs(&p)));
        }
        total += aecs.len();
    }
    let elapsed = t.elapsed();
    if elapsed > Duration::from_secs(30) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("100 products, {total} accepting components, {elapsed:.2?}"))
}

fn criterion_6() -> Outcome {
    for (c, gamma) in [(3.0, 0.9), (7.5, 0.98), (0.0, 0.5)] {
        let p = ProductMdp::from_parts(
            vec!["w".into()],
            vec![SaAction::new("loop", ControlMode::Autonomous, "e")],
            vec![vec![Choice {
                action: 0,
                succ: vec![Transition { target: 0, prob: 1.0, cost: c }],
            }]],
            Distribution::point(0),
            gamma,
            vec![AcceptancePair { avoid: BTreeSet::new(), recur: BTreeSet::from([0]) }],
        )
        .unwrap();
        let aecs = accepting_end_components(&p);
        if aecs.len() != 1 {
            return Err(format!("expected one component, found {}", aecs.len()));
        }
        let sol = solve_aec_policy(&p, &aecs[0], &AecConfig::default()).map_err(|e| e.to_string())?;
        let want = c / (1.0 - gamma);
        if (sol.objective - want).abs() > CLOSED_FORM_TOL {
            return Err(format!("c={c}, gamma={gamma}: {} vs {want}", sol.objective));
        }
    }
    let syn = arm();
    let w = arm_state_any(&syn, "((0,0),0)").ok_or("arm has no accepting ((0,0),0) state")?;
    let k = syn.terminal.chosen[&w];
    let lp = syn.terminal.solutions[k].objective;
    let terminal = syn.terminal.value(w).unwrap();
    if (lp - ARM_TERMINAL).abs() > CLOSED_FORM_TOL {
        return Err(format!("arm recurrence optimum {lp} vs {ARM_TERMINAL}"));
    }
    Ok(format!(
        "singletons exact; arm recurrence optimum {lp:.9}, executed terminal cost {terminal:.6} after mixing"
    ))
}

fn arm_state_any(syn: &Synthesis, name: &str) -> Option<usize> {
    let prefix = format!("{name}|");
    (0..syn.product.num_states())
        .find(|&v| syn.product.name(v).starts_with(&prefix) && syn.accepting.contains(&v))
}

fn check_front(name: &str, syn: &Synthesis) -> Result<Vec<ValueProfile>, String> {
    let pts = syn.sweep(&beta_grid(9));
    let mut profiles = Vec::new();
    for pt in pts {
        let s = pt.result.map_err(|e| format!("{name} w={:?}: {e}", pt.weights))?;
        profiles.push(s.profile);
    }
    for (a, pa) in profiles.iter().enumerate() {
        for (b, pb) in profiles.iter().enumerate() {
            if a != b && dominates(pa, pb, DOMINANCE_TOL) {
                return Err(format!("{name}: point {a} {pa:?} dominates point {b} {pb:?}"));
            }
        }
    }
    for w in profiles.windows(2) {
        if w[1].u1 < w[0].u1 - DOMINANCE_TOL || w[1].u2 > w[0].u2 + DOMINANCE_TOL {
            return Err(format!("{name}: trade-off not monotone between {:?} and {:?}", w[0], w[1]));
        }
    }
    Ok(profiles)
}

fn criterion_7() -> Outcome {
    let a = check_front("arm", &arm())?;
    let g = check_front("gridworld", &run(&GridParams::default().build().unwrap()))?;
    let span = |ps: &[ValueProfile]| (ps[ps.len() - 1].u1 - ps[0].u1, ps[ps.len() - 1].u2 - ps[0].u2);
    let (a1, a2) = span(&a);
    let (g1, g2) = span(&g);
    Ok(format!(
        "non-dominated and monotone; arm spans du1={a1:.4} du2={a2:.3}, gridworld du1={g1:.4} du2={g2:.3}"
    ))
}

fn criterion_8() -> Outcome {
    let syn = arm();
    let f1 = &syn.optima[0].policy;
    let lp_u1 = syn.stage.profile(&syn.product, f1).map_err(|e| e.to_string())?.0.u1;
    let est = estimate(
        &syn.product,
        f1,
        &syn.terminal,
        &EstimateOptions { traces: 10_000, horizon: 2000, seed: 2024, min_suffix: 1000 },
    )
    .map_err(|e| e.to_string())?;
    let z = (est.reach - lp_u1).abs() / est.reach_se;
    if z > 3.0 {
        return Err(format!("reach {} +- {} vs LP {lp_u1} ({z:.2} standard errors)", est.reach, est.reach_se));
    }
    let long = estimate(
        &syn.product,
        f1,
        &syn.terminal,
        &EstimateOptions { traces: 200, horizon: 100_000, seed: 7, min_suffix: 50_000 },
    )
    .map_err(|e| e.to_string())?;
    if long.recurrence.is_empty() {
        return Err("no trace qualified for the recurrence check".into());
    }
    for row in &long.recurrence {
        if row.visited != row.eligible {
            return Err(format!("{} visited in {} of {} long traces", row.state, row.visited, row.eligible));
        }
    }
    let eligible = long.recurrence.iter().map(|r| r.eligible).max().unwrap_or(0);
    Ok(format!(
        "reach {:.5} +- {:.5} vs LP {lp_u1:.5} ({z:.2} se); all component states visited in {eligible} long traces",
        est.reach, est.reach_se
    ))
}

fn criterion_9() -> Outcome {
    let t = Instant::now();
    let syn = run(&GridParams::default().build().unwrap());
    let pts = syn.sweep(&beta_grid(9));
    let elapsed = t.elapsed();
    if let Some(bad) = pts.iter().find(|p| p.result.is_err()) {
        return Err(format!("sweep failed at {:?}", bad.weights));
    }
    if elapsed > Duration::from_secs(60) {
        return Err(format!("took {elapsed:?}"));
    }
    let opts = EstimateOptions { traces: 10_000, horizon: 2000, seed: 99, min_suffix: 1000 };
    let est = |g: &MemorylessPolicy| -> Result<Estimate, String> {
        estimate(&syn.product, g, &syn.terminal, &opts).map_err(|e| e.to_string())
    };
    let e1 = est(&syn.optima[0].policy)?;
    let e2 = est(&syn.optima[1].policy)?;
    let joint = (e1.reach_se.powi(2) + e2.reach_se.powi(2)).sqrt();
    let gap = e1.reach - e2.reach;
    if gap <= 3.0 * joint {
        return Err(format!("f1* {} vs f2* {} (joint se {joint})", e1.reach, e2.reach));
    }
    Ok(format!(
        "synthesis and sweep in {elapsed:.2?}; reach f1* {:.4} vs f2* {:.4} ({:.1} joint se)",
        e1.reach,
        e2.reach,
        gap / joint.max(f64::MIN_POSITIVE)
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("arm single-objective policies", criterion_1),
        ("arm Pareto policy at w=(0.8,0.2)", criterion_2),
        ("scalarization reductions", criterion_3),
        ("oracle equivalence on random products", criterion_4),
        ("end components against enumeration", criterion_5),
        ("recurrence closed form", criterion_6),
        ("sweep non-domination", criterion_7),
        ("Monte-Carlo consistency", criterion_8),
        ("gridworld end to end", criterion_9),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name} [{secs:.2}s]: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name} [{secs:.2}s]: {detail}", k + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
