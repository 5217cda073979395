//! Generic linear programs (maximization) and their solver.

mod format;
mod simplex;

pub use format::export_lp_text;
pub use simplex::{solve_lp, solve_lp_with, SolverOptions};

use thiserror::Error;

pub type VarId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("constraint {constraint} references undeclared variable {var}")]
    DanglingIndex { constraint: usize, var: VarId },
    #[error("objective references undeclared variable {0}")]
    DanglingObjective(VarId),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("variable {0} has an empty bound interval")]
    EmptyBounds(VarId),
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("solution is not {0:?}")]
    NotOptimal(LpStatus),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * values[v]).sum()
    }

    /// Amount by which `values` violate this row (zero when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// `maximize c.x` subject to sparse rows and per-variable bounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    vars: Vec<Variable>,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: Option<f64>) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
        });
        self.objective.push(0.0);
        self.vars.len() - 1
    }

    /// Adds a nonnegative variable with objective coefficient `cost`.
    pub fn add_nonneg(&mut self, name: impl Into<String>, cost: f64) -> VarId {
        let v = self.add_var(name, 0.0, None);
        self.objective[v] = cost;
        v
    }

    pub fn set_objective(&mut self, var: VarId, coeff: f64) {
        self.objective[var] = coeff;
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
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

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective
            .iter()
            .zip(values)
            .filter(|(c, _)| **c != 0.0)
            .map(|(c, x)| c * x)
            .sum()
    }

    /// Largest row or bound violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(values))
            .fold(0.0, f64::max);
        let bounds = self
            .vars
            .iter()
            .zip(values)
            .map(|(v, &x)| {
                let lo = (v.lower - x).max(0.0);
                let hi = v.upper.map_or(0.0, |u| (x - u).max(0.0));
                lo.max(hi)
            })
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.vars.len();
        for (i, v) in self.vars.iter().enumerate() {
            if !v.lower.is_finite()
                || v.upper
                    .is_some_and(|u| u.is_nan() || u == f64::NEG_INFINITY)
            {
                return Err(LpError::NonFinite(format!("bounds of `{}`", v.name)));
            }
            if v.upper.is_some_and(|u| u < v.lower) {
                return Err(LpError::EmptyBounds(i));
            }
        }
        if let Some(c) = self.objective.iter().find(|c| !c.is_finite()) {
            return Err(LpError::NonFinite(format!("objective coefficient {c}")));
        }
        for (ci, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(LpError::NonFinite(format!("rhs of `{}`", c.name)));
            }
            for &(v, a) in &c.coeffs {
                if v >= n {
                    return Err(LpError::DanglingIndex {
                        constraint: ci,
                        var: v,
                    });
                }
                if !a.is_finite() {
                    return Err(LpError::NonFinite(format!("row `{}`", c.name)));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective_value: f64,
    /// Primal values, one per variable; empty unless optimal.
    pub values: Vec<f64>,
    /// Row duals, one per constraint; empty unless optimal.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}
