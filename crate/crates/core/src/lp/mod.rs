//! Linear programs: a small modelling layer, a dense revised simplex, and
//! the facility-location relaxations built on top of it.

mod flm;
mod simplex;
mod ufl;

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{FlmError, Result};

pub use flm::{
    build_lp_flm, check_lp_flm_feasible, flm_costs, project_to_ufl, solve_lp_flm, solve_lp_flm_with, FractionalFlm,
    LpFlmResult, LpLayout, LpVariant,
};
pub use simplex::solve_lp;
pub use ufl::solve_lp_ufl;

/// Feasibility tolerance of returned LP points.
pub const FEAS_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `min c·x` over nonnegative `x` subject to linear constraints.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LinearProgram {
    names: Vec<String>,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpSolution {
    pub values: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a nonnegative variable with objective coefficient `cost`.
    pub fn add_variable(&mut self, name: impl Into<String>, cost: f64) -> usize {
        self.names.push(name.into());
        self.objective.push(cost);
        self.names.len() - 1
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> Result<usize> {
        let name = name.into();
        if let Some(&(v, _)) = terms.iter().find(|&&(v, _)| v >= self.names.len()) {
            return Err(FlmError::Identifier(format!("constraint {name} references undeclared variable {v}")));
        }
        if !rhs.is_finite() || terms.iter().any(|t| !t.1.is_finite()) {
            return Err(FlmError::Precondition(format!("constraint {name} has a non-finite coefficient")));
        }
        self.constraints.push(Constraint { name, terms, relation, rhs });
        Ok(self.constraints.len() - 1)
    }

    pub fn n_variables(&self) -> usize {
        self.names.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn variable_name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Constraints (and nonnegativity bounds) violated by more than `tol`.
    pub fn violations(&self, x: &[f64], tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        for (v, &val) in x.iter().enumerate() {
            if val < -tol {
                out.push(format!("{} = {val} < 0", self.names[v]));
            }
        }
        for c in &self.constraints {
            let lhs: f64 = c.terms.iter().map(|&(v, a)| a * x[v]).sum();
            let bad = match c.relation {
                Relation::Le => lhs > c.rhs + tol,
                Relation::Ge => lhs < c.rhs - tol,
                Relation::Eq => (lhs - c.rhs).abs() > tol,
            };
            if bad {
                out.push(format!("{}: lhs {lhs} vs rhs {}", c.name, c.rhs));
            }
        }
        out
    }

    /// CPLEX LP text (Minimize / Subject To / Bounds / End).
    pub fn to_lp_format(&self) -> String {
        let mut s = String::from("\\ generated by flm\nMinimize\n obj:");
        let mut any = false;
        for (v, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                write_term(&mut s, c, &self.names[v], !any);
                any = true;
            }
        }
        if !any {
            s.push_str(" 0 ");
            s.push_str(&self.names.first().cloned().unwrap_or_else(|| "dummy".into()));
        }
        s.push_str("\nSubject To\n");
        for c in &self.constraints {
            let _ = write!(s, " {}:", c.name);
            if c.terms.is_empty() {
                let _ = write!(s, " 0 {}", self.names.first().map_or("dummy", String::as_str));
            }
            for (k, &(v, a)) in c.terms.iter().enumerate() {
                write_term(&mut s, a, &self.names[v], k == 0);
            }
            let rel = match c.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            let _ = writeln!(s, " {rel} {}", c.rhs);
        }
        s.push_str("Bounds\n");
        for name in &self.names {
            let _ = writeln!(s, " {name} >= 0");
        }
        s.push_str("End\n");
        s
    }
}

fn write_term(s: &mut String, coef: f64, name: &str, first: bool) {
    if coef < 0.0 {
        let _ = write!(s, " - {} {name}", -coef);
    } else if first {
        let _ = write!(s, " {coef} {name}");
    } else {
        let _ = write!(s, " + {coef} {name}");
    }
}
