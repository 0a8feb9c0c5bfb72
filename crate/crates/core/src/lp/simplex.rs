//! Two-phase revised simplex with an explicit dense basis inverse.
//!
//! The program is brought to standard form `min c^T x, A x = b, x >= 0,
//! b >= 0` by shifting lower bounds, splitting free variables and adding
//! slack, surplus and artificial columns. The basis inverse is updated with
//! elementary row operations and rebuilt from scratch periodically.
//! Entering columns use Dantzig's rule; after a run of degenerate pivots the
//! solver switches to Bland's rule until progress resumes.

use nalgebra::DMatrix;

use super::{LinearProgram, LpSolution, LpStatus, Relation, Sense, FEAS_TOL};
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
/// Pivot entries below this fraction of the column's largest entry are
/// avoided.
const REL_PIVOT_TOL: f64 = 1e-7;
const HARRIS_SLACK: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Number of basis updates between full refactorizations.
    pub refactor_every: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_iterations: 200_000,
            refactor_every: 100,
            bland_after: 30,
        }
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    solve_with(lp, &SimplexOptions::default())
}

enum ColOrigin {
    /// Structural column for original variable `j`, with sign.
    Var(usize, f64),
    Slack,
    Artificial,
}

struct Standard {
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    origin: Vec<ColOrigin>,
    cost: Vec<f64>,
    b: Vec<f64>,
    row_sign: Vec<f64>,
    /// Initial basis column per row.
    start: Vec<usize>,
    n_artificial: usize,
}

fn standardize(lp: &LinearProgram) -> Standard {
    let m = lp.constraints.len();
    let sense = if lp.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let mut obj = vec![0.0; lp.vars.len()];
    for &(j, c) in &lp.objective {
        obj[j] += sense * c;
    }

    let mut var_cols: Vec<Vec<usize>> = vec![Vec::new(); lp.vars.len()];
    let mut origin = Vec::new();
    let mut cost = Vec::new();
    for (j, v) in lp.vars.iter().enumerate() {
        var_cols[j].push(origin.len());
        origin.push(ColOrigin::Var(j, 1.0));
        cost.push(obj[j]);
        if v.lower.is_none() {
            var_cols[j].push(origin.len());
            origin.push(ColOrigin::Var(j, -1.0));
            cost.push(-obj[j]);
        }
    }
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); origin.len()];
    let mut b = vec![0.0; m];
    let mut row_sign = vec![1.0; m];
    let mut rel = Vec::with_capacity(m);
    for (i, c) in lp.constraints.iter().enumerate() {
        let mut rhs = c.rhs;
        for &(j, a) in &c.coeffs {
            if let Some(l) = lp.vars[j].lower {
                rhs -= a * l;
            }
        }
        let mut r = c.relation;
        if rhs < 0.0 {
            row_sign[i] = -1.0;
            rhs = -rhs;
            r = match r {
                Relation::Ge => Relation::Le,
                Relation::Le => Relation::Ge,
                Relation::Eq => Relation::Eq,
            };
        }
        b[i] = rhs;
        rel.push(r);
        for &(j, a) in &c.coeffs {
            for &col in &var_cols[j] {
                let sign = match origin[col] {
                    ColOrigin::Var(_, s) => s,
                    _ => unreachable!(),
                };
                cols[col].push((i, row_sign[i] * sign * a));
            }
        }
    }
    for col in &mut cols {
        col.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(col.len());
        for &(i, a) in col.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += a,
                _ => merged.push((i, a)),
            }
        }
        merged.retain(|e| e.1 != 0.0);
        *col = merged;
    }

    let mut start = vec![usize::MAX; m];
    for (i, r) in rel.iter().enumerate() {
        match r {
            Relation::Le => {
                start[i] = cols.len();
                cols.push(vec![(i, 1.0)]);
                origin.push(ColOrigin::Slack);
                cost.push(0.0);
            }
            Relation::Ge => {
                cols.push(vec![(i, -1.0)]);
                origin.push(ColOrigin::Slack);
                cost.push(0.0);
            }
            Relation::Eq => {}
        }
    }
    let mut n_artificial = 0;
    for i in 0..m {
        if start[i] == usize::MAX {
            start[i] = cols.len();
            cols.push(vec![(i, 1.0)]);
            origin.push(ColOrigin::Artificial);
            cost.push(0.0);
            n_artificial += 1;
        }
    }
    Standard {
        m,
        cols,
        origin,
        cost,
        b,
        row_sign,
        start,
        n_artificial,
    }
}

struct Tableau<'a> {
    sf: &'a Standard,
    opts: &'a SimplexOptions,
    basis: Vec<usize>,
    /// Basis position of each column, if basic.
    pos: Vec<Option<usize>>,
    /// Row-major `m x m` basis inverse.
    binv: Vec<f64>,
    xb: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl<'a> Tableau<'a> {
    fn new(sf: &'a Standard, opts: &'a SimplexOptions) -> Self {
        let m = sf.m;
        let mut pos = vec![None; sf.cols.len()];
        for (i, &c) in sf.start.iter().enumerate() {
            pos[c] = Some(i);
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        Tableau {
            sf,
            opts,
            basis: sf.start.clone(),
            pos,
            binv,
            xb: sf.b.clone(),
            since_refactor: 0,
            iterations: 0,
        }
    }

    fn is_artificial(&self, j: usize) -> bool {
        matches!(self.sf.origin[j], ColOrigin::Artificial)
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.sf.m;
        if m == 0 {
            return Ok(());
        }
        let mut bm = DMatrix::<f64>::zeros(m, m);
        for (k, &j) in self.basis.iter().enumerate() {
            for &(i, a) in &self.sf.cols[j] {
                bm[(i, k)] = a;
            }
        }
        let inv = bm.lu().try_inverse().ok_or_else(|| {
            Error::Solver(format!(
                "basis matrix became singular after {} iterations",
                self.iterations
            ))
        })?;
        for i in 0..m {
            for k in 0..m {
                self.binv[i * m + k] = inv[(i, k)];
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            self.xb[i] = row.iter().zip(&self.sf.b).map(|(a, b)| a * b).sum();
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.sf.m;
        let mut y = vec![0.0; m];
        for (i, &j) in self.basis.iter().enumerate() {
            let cb = cost[j];
            if cb != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, a) in y.iter_mut().zip(row) {
                    *yk += cb * a;
                }
            }
        }
        y
    }

    fn column(&self, j: usize) -> Vec<f64> {
        let m = self.sf.m;
        let mut alpha = vec![0.0; m];
        for &(k, v) in &self.sf.cols[j] {
            for (i, a) in alpha.iter_mut().enumerate() {
                *a += self.binv[i * m + k] * v;
            }
        }
        alpha
    }

    fn pivot(&mut self, r: usize, j: usize, alpha: &[f64], theta: f64) {
        let m = self.sf.m;
        for (x, a) in self.xb.iter_mut().zip(alpha) {
            *x -= theta * a;
        }
        self.xb[r] = theta;
        let piv = alpha[r];
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (row_r, after) = rest.split_at_mut(m);
        for v in row_r.iter_mut() {
            *v /= piv;
        }
        for (i, row) in before.chunks_mut(m).enumerate() {
            let f = alpha[i];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(row_r.iter()) {
                    *v -= f * p;
                }
            }
        }
        for (i, row) in after.chunks_mut(m).enumerate() {
            let f = alpha[r + 1 + i];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(row_r.iter()) {
                    *v -= f * p;
                }
            }
        }
        self.pos[self.basis[r]] = None;
        self.pos[j] = Some(r);
        self.basis[r] = j;
        self.since_refactor += 1;
        self.iterations += 1;
    }

    /// Sum of the basic artificial values.
    fn infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.xb)
            .filter(|(&j, _)| self.is_artificial(j))
            .map(|(_, &x)| x.max(0.0))
            .sum()
    }

    /// Runs simplex iterations. With `stop_below`, phase one ends as soon as
    /// the artificial sum falls under it.
    fn run(&mut self, cost: &[f64], allow: &dyn Fn(usize) -> bool, stop_below: Option<f64>) -> Result<Outcome> {
        let mut degenerate_run = 0usize;
        loop {
            if let Some(tol) = stop_below {
                if self.infeasibility() <= tol {
                    return Ok(Outcome::Optimal);
                }
            }
            if self.iterations >= self.opts.max_iterations {
                return Err(Error::Solver(format!(
                    "iteration limit {} reached",
                    self.opts.max_iterations
                )));
            }
            if self.since_refactor >= self.opts.refactor_every {
                self.refactor()?;
            }
            let bland = degenerate_run >= self.opts.bland_after;
            let y = self.duals(cost);
            let mut enter: Option<(usize, f64)> = None;
            for (j, col) in self.sf.cols.iter().enumerate() {
                if self.pos[j].is_some() || !allow(j) {
                    continue;
                }
                let (dot, mag) = col
                    .iter()
                    .fold((0.0, 0.0), |(s, m), &(i, a)| (s + y[i] * a, m + (y[i] * a).abs()));
                let d = cost[j] - dot;
                // Relative to the magnitude of the terms, so that rounding
                // in large duals cannot make a tied column look attractive.
                if d < -OPT_TOL * (1.0 + cost[j].abs() + mag) {
                    match enter {
                        None => enter = Some((j, d)),
                        Some((_, best)) if !bland && d < best => enter = Some((j, d)),
                        _ => {}
                    }
                    if bland {
                        break;
                    }
                }
            }
            let Some((j, dj)) = enter else {
                return Ok(Outcome::Optimal);
            };
            let alpha = self.column(j);

            // Basic artificials sitting at zero must not move, so any
            // nonzero entry in their row forces them out first.
            let mut leave: Option<(usize, f64)> = None;
            let mut largest = PIVOT_TOL;
            for (i, &a) in alpha.iter().enumerate() {
                if a.abs() > largest && self.is_artificial(self.basis[i]) && !allow(self.basis[i]) {
                    largest = a.abs();
                    leave = Some((i, 0.0));
                }
            }
            if leave.is_none() {
                leave = self.ratio_test(&alpha, bland);
            }
            let Some((r, theta)) = leave else {
                return Ok(Outcome::Unbounded);
            };
            // Steps that barely move the objective count as degenerate.
            if theta * dj.abs() <= 1e-10 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, j, &alpha, theta);
        }
    }

    /// Leaving row for entering column `alpha`.
    ///
    /// Harris two-pass test: the step may overshoot the exact minimum ratio
    /// by a feasibility slack so that, among nearly tied rows, the largest
    /// pivot element wins. Entries small relative to the column are skipped
    /// unless nothing else is available. Under Bland's rule the exact
    /// minimum ratio is taken with ties broken by lowest column index.
    fn ratio_test(&self, alpha: &[f64], bland: bool) -> Option<(usize, f64)> {
        let biggest = alpha.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let mut tol = PIVOT_TOL.max(REL_PIVOT_TOL * biggest);
        if !alpha.iter().any(|&a| a > tol) {
            tol = PIVOT_TOL;
        }
        let rows = || alpha.iter().enumerate().filter(move |(_, &a)| a > tol);
        let ratio = |i: usize| self.xb[i].max(0.0) / alpha[i];
        if bland {
            let flat = |i: usize| if self.xb[i] > 1e-11 { self.xb[i] / alpha[i] } else { 0.0 };
            let mut leave: Option<(usize, f64)> = None;
            for (i, _) in rows() {
                let t = flat(i);
                leave = match leave {
                    None => Some((i, t)),
                    Some((k, best)) if t < best - 1e-12 || (t <= best + 1e-12 && self.basis[i] < self.basis[k]) => {
                        Some((i, t.min(best)))
                    }
                    keep => keep,
                };
            }
            return leave.map(|(i, _)| (i, ratio(i)));
        }
        let bound = rows()
            .map(|(i, &a)| (self.xb[i].max(0.0) + HARRIS_SLACK) / a)
            .fold(f64::INFINITY, f64::min);
        rows()
            .filter(|&(i, _)| ratio(i) <= bound)
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| (i, ratio(i)))
    }

    /// Pivots basic artificials out wherever a structural or slack column
    /// can replace them. Those that remain belong to redundant rows.
    fn drive_out_artificials(&mut self) {
        let m = self.sf.m;
        for r in 0..m {
            if !self.is_artificial(self.basis[r]) {
                continue;
            }
            let row = &self.binv[r * m..(r + 1) * m];
            let mut best: Option<(usize, f64)> = None;
            for (j, col) in self.sf.cols.iter().enumerate() {
                if self.pos[j].is_some() || self.is_artificial(j) {
                    continue;
                }
                let v: f64 = col.iter().map(|&(i, a)| row[i] * a).sum();
                if v.abs() > PIVOT_TOL && best.is_none_or(|(_, b)| v.abs() > b) {
                    best = Some((j, v.abs()));
                }
            }
            if let Some((j, _)) = best {
                let alpha = self.column(j);
                let theta = self.xb[r] / alpha[r];
                self.pivot(r, j, &alpha, theta);
            }
        }
    }
}

pub fn solve_with(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpSolution> {
    lp.check()?;
    let sf = standardize(lp);
    let mut t = Tableau::new(&sf, opts);

    if sf.n_artificial > 0 {
        let phase1: Vec<f64> = sf
            .origin
            .iter()
            .map(|o| if matches!(o, ColOrigin::Artificial) { 1.0 } else { 0.0 })
            .collect();
        let scale = 1.0 + sf.b.iter().fold(0.0f64, |a, &b| a.max(b));
        match t.run(&phase1, &|_| true, Some(1e-3 * FEAS_TOL * scale))? {
            Outcome::Optimal => {}
            Outcome::Unbounded => {
                return Err(Error::Solver("phase one reported an unbounded ray".into()))
            }
        }
        t.refactor()?;
        if t.infeasibility() > FEAS_TOL * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                objective: f64::NAN,
                x: Vec::new(),
                duals: Vec::new(),
                iterations: t.iterations,
            });
        }
        t.drive_out_artificials();
        t.refactor()?;
    }

    let allow = |j: usize| !matches!(sf.origin[j], ColOrigin::Artificial);
    if let Outcome::Unbounded = t.run(&sf.cost, &allow, None)? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            objective: f64::NAN,
            x: Vec::new(),
            duals: Vec::new(),
            iterations: t.iterations,
        });
    }
    t.refactor()?;

    let mut x: Vec<f64> = lp.vars.iter().map(|v| v.lower.unwrap_or(0.0)).collect();
    for (i, &j) in t.basis.iter().enumerate() {
        let v = t.xb[i];
        if v < -FEAS_TOL {
            return Err(Error::Solver(format!(
                "basic variable {j} is negative ({v:e}) after refactorization"
            )));
        }
        if let ColOrigin::Var(k, s) = sf.origin[j] {
            x[k] += s * v.max(0.0);
        }
    }
    let sense = if lp.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let y = t.duals(&sf.cost);
    let duals = y
        .iter()
        .zip(&sf.row_sign)
        .map(|(y, s)| sense * s * y)
        .collect();

    for (i, c) in lp.constraints.iter().enumerate() {
        let v = c.violation(&x);
        if v > FEAS_TOL * (1.0 + c.rhs.abs()) {
            return Err(Error::Solver(format!(
                "constraint {} ({i}) violated by {v:e} at the final basis",
                c.name
            )));
        }
    }

    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: lp.objective_value(&x),
        x,
        duals,
        iterations: t.iterations,
    })
}
