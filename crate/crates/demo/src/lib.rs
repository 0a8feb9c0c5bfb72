//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns a JSON string. The work happens in plain Rust
//! functions so it can be tested natively.

use std::cell::RefCell;

use handoff_core::builtin::arm::ArmParams;
use handoff_core::builtin::gridworld::{cell_name, GridParams, LEVELS};
use handoff_core::builtin::Example;
use handoff_core::pareto::{beta_grid, ValueProfile};
use handoff_core::{synthesize, Error, MemorylessPolicy, Result, Synthesis, SynthesisConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
pub struct FrontPoint {
    pub w1: f64,
    pub u1: f64,
    pub u2: f64,
}

#[derive(Serialize)]
pub struct Front {
    pub ideal: [f64; 2],
    pub nadir: [f64; 2],
    pub f1: ValueProfile,
    pub f2: ValueProfile,
    pub points: Vec<FrontPoint>,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
pub struct ActionShare {
    pub action: String,
    pub prob: f64,
}

#[derive(Serialize)]
pub struct PolicyRow {
    pub state: String,
    /// `stage1` before the accepting set is reached, `recurrence` inside it.
    pub phase: &'static str,
    pub actions: Vec<ActionShare>,
}

#[derive(Serialize)]
pub struct PolicyView {
    pub weights: [f64; 2],
    pub profile: ValueProfile,
    pub rows: Vec<PolicyRow>,
}

#[derive(Serialize)]
pub struct GridCell {
    pub row: usize,
    pub col: usize,
    pub terrain: String,
    pub region: Option<u8>,
    pub obstacle: bool,
    /// Most likely move per attention level, `None` when the product never
    /// visits that combination in the first automaton state.
    pub moves: Vec<Option<GridMove>>,
}

#[derive(Serialize)]
pub struct GridMove {
    pub dir: String,
    pub human: bool,
    pub event: String,
    pub prob: f64,
}

#[derive(Serialize)]
pub struct GridView {
    pub weights: [f64; 2],
    pub profile: ValueProfile,
    pub rows: usize,
    pub cols: usize,
    pub start: (usize, usize),
    pub levels: Vec<String>,
    pub cells: Vec<GridCell>,
}

fn run(ex: &Example) -> Result<Synthesis> {
    synthesize(&ex.autonomous, &ex.human, &ex.attention, &ex.automaton, &SynthesisConfig::default())
}

thread_local! {
    static ARM: RefCell<Option<Synthesis>> = const { RefCell::new(None) };
    static GRID: RefCell<Option<(String, GridParams, Synthesis)>> = const { RefCell::new(None) };
}

fn with_arm<T>(f: impl FnOnce(&Synthesis) -> Result<T>) -> Result<T> {
    ARM.with(|cell| {
        let mut slot = cell.borrow_mut();
        if slot.is_none() {
            *slot = Some(run(&ArmParams::default().build()?)?);
        }
        f(slot.as_ref().expect("just filled"))
    })
}

fn with_grid<T>(params: &str, f: impl FnOnce(&GridParams, &Synthesis) -> Result<T>) -> Result<T> {
    GRID.with(|cell| {
        let mut slot = cell.borrow_mut();
        if slot.as_ref().is_none_or(|(key, _, _)| key != params) {
            let p: GridParams = if params.trim().is_empty() {
                GridParams::default()
            } else {
                serde_json::from_str(params)?
            };
            let syn = run(&p.build()?)?;
            *slot = Some((params.to_owned(), p, syn));
        }
        let (_, p, syn) = slot.as_ref().expect("just filled");
        f(p, syn)
    })
}

fn weights(w1: f64) -> Result<[f64; 2]> {
    if !(0.0..=1.0).contains(&w1) {
        return Err(Error::Precondition(format!("w1 = {w1} is outside [0, 1]")));
    }
    Ok([w1, 1.0 - w1])
}

/// Combined controller: the stage-one policy outside the accepting set and
/// the recurrence policy inside it.
fn action_at<'a>(syn: &'a Synthesis, stage1: &'a MemorylessPolicy, v: usize) -> Option<(&'static str, &'a handoff_core::Distribution)> {
    match syn.terminal.policy_for(v) {
        Some(g) => g.get(v).map(|d| ("recurrence", d)),
        None => stage1.get(v).map(|d| ("stage1", d)),
    }
}

/// Pareto front of the arm example over `n` evenly spaced weights.
pub fn front(n: usize) -> Result<Front> {
    with_arm(|syn| {
        let points = syn
            .sweep(&beta_grid(n))
            .into_iter()
            .filter_map(|pt| {
                pt.result.ok().map(|s| FrontPoint {
                    w1: pt.weights[0],
                    u1: s.profile.u1,
                    u2: s.profile.u2,
                })
            })
            .collect();
        let profile = |k: usize| syn.stage.profile(&syn.product, &syn.optima[k].policy).map(|(p, _)| p);
        Ok(Front {
            ideal: syn.reference.ideal,
            nadir: syn.reference.nadir,
            f1: profile(0)?,
            f2: profile(1)?,
            points,
            warnings: syn.warnings(),
        })
    })
}

/// Arm controller for the weights `(w1, 1 - w1)`.
pub fn policy(w1: f64) -> Result<PolicyView> {
    let w = weights(w1)?;
    with_arm(|syn| {
        let sol = syn.scalarize(w)?;
        let p = &syn.product;
        let rows = (0..p.num_states())
            .filter_map(|v| {
                let (phase, d) = action_at(syn, &sol.policy, v)?;
                let actions = d
                    .entries()
                    .iter()
                    .filter(|&&(_, q)| q > 1e-9)
                    .map(|&(a, q)| ActionShare {
                        action: p.action(a).to_string(),
                        prob: q,
                    })
                    .collect();
                Some(PolicyRow {
                    state: p.name(v).to_owned(),
                    phase,
                    actions,
                })
            })
            .collect();
        Ok(PolicyView {
            weights: w,
            profile: sol.profile,
            rows,
        })
    })
}

/// Gridworld controller for `(w1, 1 - w1)`, summarized per cell. `params`
/// is a JSON object of generator parameters, or empty for the defaults.
pub fn grid(w1: f64, params: &str) -> Result<GridView> {
    let w = weights(w1)?;
    with_grid(params, |gp, syn| {
        let sol = syn.scalarize(w)?;
        let g = gp.grid()?;
        let p = &syn.product;
        let origin = p.origin().ok_or_else(|| Error::Precondition("product has no origin".into()))?;
        let mut cells = Vec::with_capacity(g.rows * g.cols);
        for r in 0..g.rows {
            for c in 0..g.cols {
                let cell = g.cell(r, c);
                let name = cell_name(r, c);
                let moves = LEVELS
                    .iter()
                    .map(|lvl| {
                        let v = origin.keys.iter().position(|k| {
                            origin.sys_states[k.sys] == name && origin.att_states[k.att] == *lvl && k.dra == 0
                        })?;
                        let (_, d) = action_at(syn, &sol.policy, v)?;
                        let &(a, q) = d.entries().iter().max_by(|x, y| x.1.total_cmp(&y.1))?;
                        let act = p.action(a);
                        Some(GridMove {
                            dir: act.base.clone(),
                            human: act.mode == handoff_core::ControlMode::Human,
                            event: act.event.clone(),
                            prob: q,
                        })
                    })
                    .collect();
                cells.push(GridCell {
                    row: r,
                    col: c,
                    terrain: serde_json::to_value(cell.terrain)?.as_str().unwrap_or_default().to_owned(),
                    region: cell.region,
                    obstacle: cell.obstacle,
                    moves,
                });
            }
        }
        Ok(GridView {
            weights: w,
            profile: sol.profile,
            rows: g.rows,
            cols: g.cols,
            start: gp.start,
            levels: LEVELS.iter().map(|s| s.to_string()).collect(),
            cells,
        })
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn arm_front(n: usize) -> std::result::Result<String, JsError> {
    to_js(front(n))
}

#[wasm_bindgen]
pub fn arm_policy(w1: f64) -> std::result::Result<String, JsError> {
    to_js(policy(w1))
}

#[wasm_bindgen]
pub fn gridworld_policy(w1: f64, params: &str) -> std::result::Result<String, JsError> {
    to_js(grid(w1, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn front_is_ordered_between_the_optima() {
        let f = front(9).unwrap();
        assert_eq!(f.points.len(), 9);
        for pt in &f.points {
            assert!(pt.u1 <= f.f1.u1 + 1e-6 && pt.u1 >= f.f2.u1 - 1e-6);
        }
    }

    #[test]
    fn arm_policy_covers_the_start() {
        let v = policy(0.8).unwrap();
        let start = v.rows.iter().find(|r| r.state.starts_with("((1,1),0)")).unwrap();
        let total: f64 = start.actions.iter().map(|a| a.prob).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(policy(1.5).is_err());
    }

    #[test]
    fn gridworld_view_has_every_cell() {
        let v = grid(0.9, "").unwrap();
        assert_eq!(v.cells.len(), 25);
        assert_eq!(v.levels.len(), 3);
        let start = &v.cells[v.start.0 * v.cols + v.start.1];
        assert!(start.moves[0].is_some());
        assert!(v.cells.iter().any(|c| c.obstacle));
        assert!(grid(0.5, "{\"bogus\": 1}").is_err());
    }
}
