//! Bounded revised primal simplex with an explicit dense basis inverse.
//!
//! Variables are shifted to a zero lower bound; nonbasic variables sit at one of
//! their bounds. Entering columns are priced with the largest reduced cost and
//! the solver falls back to Bland's smallest-index rule (for both the entering
//! and the leaving choice) after a streak of degenerate pivots, which rules out
//! cycling. Equality rows, and inequality rows whose slack would start
//! negative, receive an artificial column; phase one drives those to zero and
//! phase two pins them at zero.
//!
//! The basis inverse is stored densely and updated in product form. Each update
//! only touches rows where the entering column is nonzero, which keeps pivots
//! cheap on the network-structured programs this crate builds.

use super::{LinearProgram, LpError, LpSolution, LpStatus, Relation};

const NONE: usize = usize::MAX;
const INF: f64 = f64::INFINITY;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Primal tolerance used inside the ratio test and phase-one check.
    pub primal_tol: f64,
    /// Reduced costs within this of zero are treated as optimal.
    pub dual_tol: f64,
    /// Smallest pivot element accepted by the ratio test.
    pub pivot_tol: f64,
    /// Degenerate pivots in a row before switching to Bland's rule.
    pub degenerate_streak: usize,
    /// Recompute basic values and duals from the inverse every this many pivots.
    pub refresh_every: usize,
    pub max_iterations: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            primal_tol: 1e-9,
            dual_tol: 1e-9,
            pivot_tol: 1e-9,
            degenerate_streak: 64,
            refresh_every: 128,
            max_iterations: None,
        }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_lp_with(lp, &SolverOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let n = lp.num_vars();
    let m = lp.num_constraints();

    let lower: Vec<f64> = lp.vars().iter().map(|v| v.lower).collect();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut b = vec![0.0; m];
    for (i, c) in lp.constraints().iter().enumerate() {
        let mut shift = 0.0;
        for &(v, a) in &c.coeffs {
            if a != 0.0 {
                cols[v].push((i, a));
                shift += a * lower[v];
            }
        }
        b[i] = c.rhs - shift;
    }
    for col in &mut cols {
        merge_duplicates(col);
    }
    let mut upper: Vec<f64> = lp
        .vars()
        .iter()
        .map(|v| v.upper.map_or(INF, |u| u - v.lower))
        .collect();

    let mut basis = vec![NONE; m];
    let mut artificials = Vec::new();
    let mut init_val = vec![0.0; m];
    let mut diag = vec![1.0; m];
    for (i, c) in lp.constraints().iter().enumerate() {
        let slack_sign = match c.relation {
            Relation::Le => Some(1.0),
            Relation::Ge => Some(-1.0),
            Relation::Eq => None,
        };
        if let Some(sign) = slack_sign {
            cols.push(vec![(i, sign)]);
            upper.push(INF);
            if b[i] * sign >= 0.0 {
                basis[i] = cols.len() - 1;
                init_val[i] = b[i] * sign;
                diag[i] = sign;
                continue;
            }
        }
        let sign = if b[i] >= 0.0 { 1.0 } else { -1.0 };
        cols.push(vec![(i, sign)]);
        upper.push(INF);
        basis[i] = cols.len() - 1;
        init_val[i] = b[i].abs();
        diag[i] = sign;
        artificials.push(cols.len() - 1);
    }

    let ncols = cols.len();
    let mut s = Simplex {
        m,
        cols,
        upper,
        x: vec![0.0; ncols],
        at_upper: vec![false; ncols],
        row_of: vec![NONE; ncols],
        basis,
        binv: vec![0.0; m * m],
        b,
        iterations: 0,
    };
    for i in 0..m {
        s.binv[i * m + i] = 1.0 / diag[i];
        s.row_of[s.basis[i]] = i;
        s.x[s.basis[i]] = init_val[i];
    }
    let limit = opts.max_iterations.unwrap_or(20_000 + 50 * (m + ncols));

    let scale = 1.0 + s.b.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if artificials.iter().any(|&a| s.x[a] > 0.0) {
        let mut cost = vec![0.0; ncols];
        for &a in &artificials {
            cost[a] = -1.0;
        }
        s.optimize(&cost, opts, limit)?;
        let residual: f64 = artificials.iter().map(|&a| s.x[a]).sum();
        if residual > 1e-7 * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                objective_value: f64::NAN,
                values: Vec::new(),
                duals: Vec::new(),
                iterations: s.iterations,
            });
        }
    }
    for &a in &artificials {
        s.upper[a] = 0.0;
        if s.row_of[a] == NONE {
            s.x[a] = 0.0;
            s.at_upper[a] = false;
        }
    }

    let mut cost = vec![0.0; ncols];
    cost[..n].copy_from_slice(lp.objective());
    if s.optimize(&cost, opts, limit)? == Outcome::Unbounded {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            objective_value: f64::INFINITY,
            values: Vec::new(),
            duals: Vec::new(),
            iterations: s.iterations,
        });
    }

    let values: Vec<f64> = (0..n)
        .map(|j| {
            let x = s.x[j].max(0.0).min(s.upper[j]);
            let x = if x.abs() < opts.primal_tol * 1e-3 {
                0.0
            } else {
                x
            };
            x + lower[j]
        })
        .collect();
    let duals = s.duals(&cost);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value: lp.objective_value(&values),
        values,
        duals,
        iterations: s.iterations,
    })
}

fn merge_duplicates(col: &mut Vec<(usize, f64)>) {
    col.sort_by_key(|&(r, _)| r);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(col.len());
    for &(r, a) in col.iter() {
        match out.last_mut() {
            Some(last) if last.0 == r => last.1 += a,
            _ => out.push((r, a)),
        }
    }
    out.retain(|&(_, a)| a != 0.0);
    *col = out;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
}

struct Simplex {
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    upper: Vec<f64>,
    x: Vec<f64>,
    at_upper: Vec<bool>,
    row_of: Vec<usize>,
    basis: Vec<usize>,
    /// Row-major `m x m` basis inverse.
    binv: Vec<f64>,
    b: Vec<f64>,
    iterations: usize,
}

impl Simplex {
    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &bi) in self.basis.iter().enumerate() {
            let c = cost[bi];
            if c != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, &r) in y.iter_mut().zip(row) {
                    *yk += c * r;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, cost: &[f64], y: &[f64]) -> f64 {
        let mut d = cost[j];
        for &(i, a) in &self.cols[j] {
            d -= y[i] * a;
        }
        d
    }

    fn ftran(&self, j: usize, out: &mut [f64]) {
        let m = self.m;
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(k, a) in &self.cols[j] {
            for (i, o) in out.iter_mut().enumerate() {
                let v = self.binv[i * m + k];
                if v != 0.0 {
                    *o += v * a;
                }
            }
        }
    }

    /// Recomputes basic values from the nonbasic ones.
    fn refresh_primal(&mut self) {
        let m = self.m;
        let mut r = self.b.clone();
        for (j, col) in self.cols.iter().enumerate() {
            if self.row_of[j] == NONE && self.x[j] != 0.0 {
                for &(i, a) in col {
                    r[i] -= a * self.x[j];
                }
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v: f64 = row.iter().zip(&r).map(|(p, q)| p * q).sum();
            self.x[self.basis[i]] = v;
        }
    }

    fn pivot(&mut self, r: usize, alpha: &[f64], pivot_row: &mut [f64]) {
        let m = self.m;
        let piv = alpha[r];
        for (dst, src) in pivot_row.iter_mut().zip(&self.binv[r * m..(r + 1) * m]) {
            *dst = src / piv;
        }
        self.binv[r * m..(r + 1) * m].copy_from_slice(pivot_row);
        for (i, &a) in alpha.iter().enumerate() {
            if i == r || a == 0.0 {
                continue;
            }
            let row = &mut self.binv[i * m..(i + 1) * m];
            for (v, &p) in row.iter_mut().zip(pivot_row.iter()) {
                if p != 0.0 {
                    *v -= a * p;
                }
            }
        }
    }

    fn optimize(
        &mut self,
        cost: &[f64],
        opts: &SolverOptions,
        limit: usize,
    ) -> Result<Outcome, LpError> {
        let m = self.m;
        let ncols = self.cols.len();
        let mut y = self.duals(cost);
        let mut alpha = vec![0.0; m];
        let mut pivot_row = vec![0.0; m];
        let mut streak = 0usize;
        let mut since_refresh = 0usize;
        let mut fresh = true;

        loop {
            if self.iterations >= limit {
                return Err(LpError::IterationLimit(limit));
            }
            let bland = streak >= opts.degenerate_streak;

            // pricing
            let mut entering = NONE;
            let mut entering_d = 0.0;
            let mut best = 0.0;
            for j in 0..ncols {
                if self.row_of[j] != NONE || self.upper[j] == 0.0 {
                    continue;
                }
                let d = self.reduced_cost(j, cost, &y);
                let eligible = if self.at_upper[j] {
                    d < -opts.dual_tol
                } else {
                    d > opts.dual_tol
                };
                if !eligible {
                    continue;
                }
                if bland {
                    entering = j;
                    entering_d = d;
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    entering = j;
                    entering_d = d;
                }
            }
            if entering == NONE {
                if fresh {
                    return Ok(Outcome::Optimal);
                }
                self.refresh_primal();
                y = self.duals(cost);
                fresh = true;
                since_refresh = 0;
                continue;
            }
            let q = entering;
            let dir = if self.at_upper[q] { -1.0 } else { 1.0 };

            // ratio test
            self.ftran(q, &mut alpha);
            let mut theta = self.upper[q];
            let mut leave = NONE;
            let mut leave_size = 0.0;
            for (i, &a_raw) in alpha.iter().enumerate() {
                let a = a_raw * dir;
                if a.abs() <= opts.pivot_tol {
                    continue;
                }
                let bi = self.basis[i];
                let xb = self.x[bi];
                let t = if a > 0.0 {
                    xb.max(0.0) / a
                } else {
                    let ub = self.upper[bi];
                    if ub == INF {
                        continue;
                    }
                    (ub - xb).max(0.0) / -a
                };
                let take = if leave == NONE {
                    t < theta || (theta == INF && t < INF)
                } else if t < theta - 1e-12 {
                    true
                } else if (t - theta).abs() <= 1e-12 {
                    if bland {
                        bi < self.basis[leave]
                    } else {
                        a.abs() > leave_size
                    }
                } else {
                    false
                };
                if take {
                    theta = t;
                    leave = i;
                    leave_size = a.abs();
                }
            }
            if theta == INF {
                return Ok(Outcome::Unbounded);
            }

            self.iterations += 1;
            if theta <= 1e-12 {
                streak += 1;
            } else {
                streak = 0;
            }
            if theta != 0.0 {
                for (i, &a) in alpha.iter().enumerate() {
                    if a != 0.0 {
                        self.x[self.basis[i]] -= dir * theta * a;
                    }
                }
            }
            if leave == NONE {
                self.at_upper[q] = !self.at_upper[q];
                self.x[q] = if self.at_upper[q] { self.upper[q] } else { 0.0 };
            } else {
                let r = leave;
                let out = self.basis[r];
                let entering_value = self.x[q] + dir * theta;
                if alpha[r] * dir > 0.0 {
                    self.x[out] = 0.0;
                    self.at_upper[out] = false;
                } else {
                    self.x[out] = self.upper[out];
                    self.at_upper[out] = true;
                }
                self.row_of[out] = NONE;
                self.pivot(r, &alpha, &mut pivot_row);
                self.basis[r] = q;
                self.row_of[q] = r;
                self.at_upper[q] = false;
                self.x[q] = entering_value;
                for (yk, &p) in y.iter_mut().zip(pivot_row.iter()) {
                    *yk += entering_d * p;
                }
            }
            fresh = false;
            since_refresh += 1;
            if since_refresh >= opts.refresh_every {
                self.refresh_primal();
                y = self.duals(cost);
                since_refresh = 0;
            }
        }
    }
}
