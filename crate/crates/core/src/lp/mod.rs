//! Linear programs in general form and a revised simplex solver.

mod simplex;

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub use simplex::{solve, solve_with, SimplexOptions};

/// Feasibility tolerance used by the solver and by [`LinearProgram::max_violation`] checks.
pub const FEAS_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Ge,
    Le,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    /// `None` means the variable is free.
    pub lower: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this constraint (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.relation {
            Relation::Eq => (lhs - self.rhs).abs(),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Le => (lhs - self.rhs).max(0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub vars: Vec<Variable>,
    pub objective: Vec<(usize, f64)>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        LinearProgram {
            sense,
            vars: Vec::new(),
            objective: Vec::new(),
            constraints: Vec::new(),
        }
    }

    /// Adds a variable bounded below by 0.
    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.add_var_bounded(name, Some(0.0))
    }

    pub fn add_free_var(&mut self, name: impl Into<String>) -> usize {
        self.add_var_bounded(name, None)
    }

    pub fn add_var_bounded(&mut self, name: impl Into<String>, lower: Option<f64>) -> usize {
        self.vars.push(Variable {
            name: name.into(),
            lower,
        });
        self.vars.len() - 1
    }

    /// Adds `coef` to the objective coefficient of `var`.
    pub fn add_objective(&mut self, var: usize, coef: f64) {
        self.objective.push((var, coef));
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        self.constraints.push(Constraint {
            name: name.into(),
            coeffs,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// Largest constraint or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| c.violation(x));
        let bounds = self
            .vars
            .iter()
            .zip(x)
            .map(|(v, &xj)| v.lower.map_or(0.0, |l| (l - xj).max(0.0)));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    /// Checks that every reference is in range and every number finite.
    pub fn check(&self) -> Result<()> {
        let n = self.vars.len();
        let bad = |what: &str| Err(Error::InvalidProgram(what.to_owned()));
        for v in &self.vars {
            if v.lower.is_some_and(|l| !l.is_finite()) {
                return bad(&format!("variable {} has a non-finite lower bound", v.name));
            }
        }
        for &(j, c) in &self.objective {
            if j >= n {
                return bad(&format!("objective references undeclared variable {j}"));
            }
            if !c.is_finite() {
                return bad("objective coefficient is not finite");
            }
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return bad(&format!("constraint {} has a non-finite right-hand side", c.name));
            }
            for &(j, a) in &c.coeffs {
                if j >= n {
                    return bad(&format!("constraint {} references undeclared variable {j}", c.name));
                }
                if !a.is_finite() {
                    return bad(&format!("constraint {} has a non-finite coefficient", c.name));
                }
            }
        }
        Ok(())
    }

    /// Renders the program in CPLEX LP text format.
    pub fn to_lp_format(&self) -> String {
        let names: Vec<String> = self.vars.iter().map(|v| lp_name(&v.name)).collect();
        let mut out = String::new();
        out.push_str(match self.sense {
            Sense::Minimize => "Minimize\n",
            Sense::Maximize => "Maximize\n",
        });
        let _ = writeln!(out, " obj: {}", lp_terms(&self.objective, &names));
        out.push_str("Subject To\n");
        for (i, c) in self.constraints.iter().enumerate() {
            let rel = match c.relation {
                Relation::Eq => "=",
                Relation::Ge => ">=",
                Relation::Le => "<=",
            };
            let label = if c.name.is_empty() {
                format!("c{i}")
            } else {
                lp_name(&c.name)
            };
            let _ = writeln!(out, " {label}: {} {rel} {}", lp_terms(&c.coeffs, &names), c.rhs);
        }
        out.push_str("Bounds\n");
        for (v, name) in self.vars.iter().zip(&names) {
            match v.lower {
                None => {
                    let _ = writeln!(out, " {name} free");
                }
                Some(l) if l != 0.0 => {
                    let _ = writeln!(out, " {name} >= {l}");
                }
                Some(_) => {}
            }
        }
        out.push_str("End\n");
        out
    }
}

fn lp_name(raw: &str) -> String {
    let mut s: String = raw
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.".contains(c) { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        s.insert(0, 'v');
    }
    s
}

fn lp_terms(terms: &[(usize, f64)], names: &[String]) -> String {
    if terms.is_empty() {
        return "0".into();
    }
    let mut s = String::new();
    for (k, &(j, c)) in terms.iter().enumerate() {
        if k > 0 {
            s.push_str(if c < 0.0 { " - " } else { " + " });
            let _ = write!(s, "{} {}", c.abs(), names[j]);
        } else {
            let _ = write!(s, "{c} {}", names[j]);
        }
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective value in the program's own sense (NaN unless optimal).
    pub objective: f64,
    /// Primal values for the declared variables (empty unless optimal).
    pub x: Vec<f64>,
    /// One multiplier per constraint, for the program in its own sense
    /// (empty unless optimal).
    pub duals: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Returns the solution if optimal, otherwise the matching error.
    pub fn into_optimal(self) -> Result<Self> {
        match self.status {
            LpStatus::Optimal => Ok(self),
            LpStatus::Infeasible => Err(Error::Infeasible),
            LpStatus::Unbounded => Err(Error::Unbounded),
        }
    }

    /// Objective of the dual program built from `duals`; equals `objective`
    /// at an optimum up to solver tolerance.
    pub fn dual_objective(&self, lp: &LinearProgram) -> f64 {
        let mut v: f64 = lp
            .constraints
            .iter()
            .zip(&self.duals)
            .map(|(c, y)| c.rhs * y)
            .sum();
        // Shifted lower bounds contribute l_j times the reduced cost.
        let rc = self.reduced_costs(lp);
        for (j, var) in lp.vars.iter().enumerate() {
            if let Some(l) = var.lower {
                v += l * rc[j];
            }
        }
        v
    }

    /// Reduced costs c_j - y^T A_j of the declared variables.
    pub fn reduced_costs(&self, lp: &LinearProgram) -> Vec<f64> {
        let mut rc = vec![0.0; lp.vars.len()];
        for &(j, c) in &lp.objective {
            rc[j] += c;
        }
        for (c, y) in lp.constraints.iter().zip(&self.duals) {
            for &(j, a) in &c.coeffs {
                rc[j] -= a * y;
            }
        }
        rc
    }
}
