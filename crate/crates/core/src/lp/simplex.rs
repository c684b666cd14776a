//! Two-phase revised simplex on dense data with an explicit basis inverse.
//!
//! Pricing is Dantzig's rule until a run of degenerate pivots, after which
//! the phase finishes under Bland's rule. The inverse is updated by rank-one
//! eta steps and rebuilt from scratch periodically.

use super::{LinearProgram, LpSolution, Relation, FEAS_TOL};
use crate::error::{FlmError, Result};

const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 50;
const DEGENERATE_RUN: usize = 50;
const MAX_ITERATIONS: usize = 200_000;

/// Solves `lp`, returning an optimal basic (vertex) solution.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    let mut t = Tableau::build(lp);
    let mut iterations = 0;

    // phase 1: minimize the sum of artificials
    let phase1_cost: Vec<f64> = (0..t.ncols).map(|j| if j >= t.first_artificial { 1.0 } else { 0.0 }).collect();
    iterations += t.optimize(&phase1_cost, true)?;
    let infeas: f64 = t.basis.iter().zip(&t.xb).filter(|(&j, _)| j >= t.first_artificial).map(|(_, &v)| v).sum();
    let scale = 1.0 + t.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if infeas > FEAS_TOL * scale {
        let rows: Vec<&str> = t
            .basis
            .iter()
            .zip(&t.xb)
            .enumerate()
            .filter(|(_, (&j, &v))| j >= t.first_artificial && v > FEAS_TOL)
            .map(|(r, _)| lp.constraints()[t.row_origin[r]].name.as_str())
            .collect();
        return Err(FlmError::Infeasible(format!(
            "phase 1 ends with infeasibility {infeas:.3e}; unsatisfied rows include {rows:?}"
        )));
    }
    t.drive_out_artificials();

    // phase 2
    let mut cost = vec![0.0; t.ncols];
    cost[..lp.n_variables()].copy_from_slice(lp.objective());
    iterations += t.optimize(&cost, false)?;

    let mut values = vec![0.0; lp.n_variables()];
    for (r, &j) in t.basis.iter().enumerate() {
        if j < lp.n_variables() {
            values[j] = t.xb[r].max(0.0);
        }
    }
    let bad = lp.violations(&values, FEAS_TOL);
    if !bad.is_empty() {
        return Err(FlmError::Invariant(format!("simplex returned an infeasible point: {}", bad.join("; "))));
    }
    Ok(LpSolution { objective: lp.evaluate(&values), values, iterations })
}

struct Tableau {
    m: usize,
    ncols: usize,
    first_artificial: usize,
    /// column-major constraint matrix, m entries per column
    a: Vec<f64>,
    b: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    row_origin: Vec<usize>,
    barred: Vec<bool>,
    since_refactor: usize,
}

/// Terms, relation and right-hand side of one constraint.
type SparseRow = (Vec<(usize, f64)>, Relation, f64);

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.n_constraints();
        let n = lp.n_variables();
        // normalize rows to rhs ≥ 0
        let mut rows: Vec<SparseRow> = lp
            .constraints()
            .iter()
            .map(|c| {
                if c.rhs < 0.0 {
                    let rel = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (c.terms.iter().map(|&(v, a)| (v, -a)).collect(), rel, -c.rhs)
                } else {
                    (c.terms.clone(), c.relation, c.rhs)
                }
            })
            .collect();
        let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let ncols = n + n_slack + n_art;
        let first_artificial = n + n_slack;
        let mut a = vec![0.0; ncols * m];
        let mut b = vec![0.0; m];
        let mut basis = vec![0; m];
        let mut slack = n;
        let mut art = first_artificial;
        for (r, (terms, rel, rhs)) in rows.iter_mut().enumerate() {
            for &(v, coef) in terms.iter() {
                a[v * m + r] += coef;
            }
            b[r] = *rhs;
            match rel {
                Relation::Le => {
                    a[slack * m + r] = 1.0;
                    basis[r] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    a[slack * m + r] = -1.0;
                    slack += 1;
                    a[art * m + r] = 1.0;
                    basis[r] = art;
                    art += 1;
                }
                Relation::Eq => {
                    a[art * m + r] = 1.0;
                    basis[r] = art;
                    art += 1;
                }
            }
        }
        let mut in_basis = vec![false; ncols];
        basis.iter().for_each(|&j| in_basis[j] = true);
        let mut binv = vec![0.0; m * m];
        for r in 0..m {
            binv[r * m + r] = 1.0;
        }
        Self {
            m,
            ncols,
            first_artificial,
            a,
            xb: b.clone(),
            b,
            basis,
            in_basis,
            binv,
            row_origin: (0..m).collect(),
            barred: vec![false; ncols],
            since_refactor: 0,
        }
    }

    fn column(&self, j: usize) -> &[f64] {
        &self.a[j * self.m..(j + 1) * self.m]
    }

    /// Binv · A_j
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let col = self.column(j);
        let mut out = vec![0.0; m];
        for (k, &c) in col.iter().enumerate() {
            if c != 0.0 {
                for r in 0..m {
                    out[r] += self.binv[r * m + k] * c;
                }
            }
        }
        out
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut pi = vec![0.0; m];
        for (r, &j) in self.basis.iter().enumerate() {
            let cb = cost[j];
            if cb != 0.0 {
                for k in 0..m {
                    pi[k] += cb * self.binv[r * m + k];
                }
            }
        }
        pi
    }

    fn pivot(&mut self, r: usize, q: usize, u: &[f64]) {
        let m = self.m;
        let piv = u[r];
        for k in 0..m {
            self.binv[r * m + k] /= piv;
        }
        self.xb[r] /= piv;
        for i in 0..m {
            if i != r && u[i] != 0.0 {
                let f = u[i];
                for k in 0..m {
                    self.binv[i * m + k] -= f * self.binv[r * m + k];
                }
                self.xb[i] -= f * self.xb[r];
            }
        }
        self.in_basis[self.basis[r]] = false;
        self.basis[r] = q;
        self.in_basis[q] = true;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor();
        }
    }

    /// Rebuilds Binv from the basis columns by Gauss-Jordan elimination.
    fn refactor(&mut self) {
        let m = self.m;
        let mut bmat = vec![0.0; m * m];
        for (r, &j) in self.basis.iter().enumerate() {
            for (i, &v) in self.column(j).iter().enumerate() {
                bmat[i * m + r] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for r in 0..m {
            inv[r * m + r] = 1.0;
        }
        for col in 0..m {
            let p = (col..m)
                .max_by(|&x, &y| bmat[x * m + col].abs().total_cmp(&bmat[y * m + col].abs()))
                .expect("nonempty");
            if bmat[p * m + col].abs() < 1e-14 {
                // numerically singular; keep the updated inverse
                return;
            }
            if p != col {
                for k in 0..m {
                    bmat.swap(p * m + k, col * m + k);
                    inv.swap(p * m + k, col * m + k);
                }
            }
            let d = bmat[col * m + col];
            for k in 0..m {
                bmat[col * m + k] /= d;
                inv[col * m + k] /= d;
            }
            for i in 0..m {
                if i != col {
                    let f = bmat[i * m + col];
                    if f != 0.0 {
                        for k in 0..m {
                            bmat[i * m + k] -= f * bmat[col * m + k];
                            inv[i * m + k] -= f * inv[col * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        let mut xb = vec![0.0; m];
        for r in 0..m {
            xb[r] = (0..m).map(|k| self.binv[r * m + k] * self.b[k]).sum();
            if xb[r].abs() < 1e-13 {
                xb[r] = 0.0;
            }
        }
        self.xb = xb;
        self.since_refactor = 0;
    }

    fn optimize(&mut self, cost: &[f64], phase1: bool) -> Result<usize> {
        let cscale = 1.0 + cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let opt_tol = 1e-9 * cscale;
        let mut bland = false;
        let mut degenerate = 0;
        for it in 0..MAX_ITERATIONS {
            let pi = self.duals(cost);
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.ncols {
                if self.in_basis[j] || self.barred[j] || (!phase1 && j >= self.first_artificial) {
                    continue;
                }
                let col = self.column(j);
                let d = cost[j] - col.iter().zip(&pi).map(|(a, p)| a * p).sum::<f64>();
                if d < -opt_tol {
                    if bland {
                        entering = Some((j, d));
                        break;
                    }
                    if entering.is_none_or(|(_, best)| d < best) {
                        entering = Some((j, d));
                    }
                }
            }
            let Some((q, _)) = entering else {
                return Ok(it);
            };
            let u = self.ftran(q);
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                if u[r] > PIVOT_TOL {
                    let ratio = self.xb[r].max(0.0) / u[r];
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-12 {
                                true
                            } else if ratio <= lratio + 1e-12 {
                                if bland {
                                    self.basis[r] < self.basis[lr]
                                } else {
                                    u[r] > u[lr]
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                if phase1 {
                    return Err(FlmError::Invariant("phase 1 reported unbounded".into()));
                }
                return Err(FlmError::Unbounded(format!("column {q} improves without limit")));
            };
            if ratio < 1e-12 {
                degenerate += 1;
                if degenerate >= DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            self.pivot(r, q, &u);
            for v in self.xb.iter_mut() {
                if *v < 0.0 && *v > -1e-11 {
                    *v = 0.0;
                }
            }
        }
        Err(FlmError::Invariant(format!("simplex did not converge in {MAX_ITERATIONS} iterations")))
    }

    /// Pivots zero-valued artificials out of the basis; rows where that is
    /// impossible are redundant and keep their artificial, which is barred
    /// from re-entering.
    fn drive_out_artificials(&mut self) {
        for r in 0..self.m {
            if self.basis[r] < self.first_artificial {
                continue;
            }
            let row: Vec<f64> = self.binv[r * self.m..(r + 1) * self.m].to_vec();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.first_artificial {
                if self.in_basis[j] {
                    continue;
                }
                let v: f64 = self.column(j).iter().zip(&row).map(|(a, b)| a * b).sum();
                if v.abs() > 1e-7 && best.is_none_or(|(_, bv)| v.abs() > bv.abs()) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                let u = self.ftran(j);
                self.pivot(r, j, &u);
            }
        }
        for j in self.first_artificial..self.ncols {
            self.barred[j] = true;
        }
        self.refactor();
    }
}
