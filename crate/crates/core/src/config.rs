use serde::{Deserialize, Serialize};

/// Numerical tolerances shared by the solver, the flow checks and path extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Absolute primal feasibility tolerance, per constraint.
    pub tol_feas: f64,
    /// Relative objective tolerance; the absolute bound is `tol_obj * (1 + |obj|)`.
    pub tol_obj: f64,
    /// Residual flows at or below this value are treated as zero during extraction.
    pub eps: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_feas: 1e-7,
            tol_obj: 1e-7,
            eps: 1e-9,
        }
    }
}

impl Tolerances {
    pub fn objective_slack(&self, objective: f64) -> f64 {
        self.tol_obj * (1.0 + objective.abs())
    }
}
