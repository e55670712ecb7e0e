//! Two-phase revised simplex.
//!
//! Used only where basis enumeration is out of budget. The basis matrix is
//! refactored from the original data at every iteration, so rounding does not
//! accumulate across pivots. Pricing is Dantzig's rule, switching to Bland's
//! rule after a run of degenerate pivots.

use super::{OracleError, OracleSolution, Reduced, FEAS_TOL};
use crate::linalg::{norm_inf, Lu, Matrix};
use crate::lp_model::{kkt_residual, StandardFormLp};

const PIVOT_EPS: f64 = 1e-9;
const MAX_ITERATIONS: usize = 50_000;
const DEGENERATE_RUN: usize = 50;

struct Revised {
    /// `[±A | I]` with rows signed so that `b ≥ 0`.
    m: Matrix,
    b: Vec<f64>,
    basis: Vec<usize>,
}

impl Revised {
    fn factor(&self) -> Result<Lu, OracleError> {
        Lu::factor(&self.m.select_columns(&self.basis))
            .ok_or_else(|| OracleError::Numerical("simplex basis became singular".into()))
    }

    /// Minimizes `cost` over columns `0..allowed`. Returns `false` when unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<bool, OracleError> {
        let tol = FEAS_TOL * (1.0 + norm_inf(cost));
        let mut degenerate = 0;
        for _ in 0..MAX_ITERATIONS {
            let lu = self.factor()?;
            let xb = lu.solve(&self.b);
            let cb: Vec<f64> = self.basis.iter().map(|&j| cost[j]).collect();
            let y = lu.solve_transpose(&cb);
            let aty = self.m.tr_mul_vec(&y);
            let candidates = (0..allowed)
                .filter(|j| !self.basis.contains(j))
                .map(|j| (j, cost[j] - aty[j]))
                .filter(|&(_, d)| d < -tol);
            let entering = if degenerate >= DEGENERATE_RUN {
                candidates.min_by_key(|&(j, _)| j)
            } else {
                candidates.min_by(|a, b| a.1.total_cmp(&b.1))
            };
            let Some((q, _)) = entering else {
                return Ok(true);
            };
            let dir = lu.solve(&self.m.column(q));
            let mut leave: Option<(usize, f64)> = None;
            for (r, (&d, &x)) in dir.iter().zip(&xb).enumerate() {
                if d <= PIVOT_EPS {
                    continue;
                }
                let ratio = x.max(0.0) / d;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        let tie = (ratio - lratio).abs() <= 1e-12 * (1.0 + lratio);
                        let better = if degenerate >= DEGENERATE_RUN {
                            self.basis[r] < self.basis[lr]
                        } else {
                            d > dir[lr]
                        };
                        if (tie && better) || (!tie && ratio < lratio) {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
            let Some((r, step)) = leave else {
                return Ok(false);
            };
            if step <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.basis[r] = q;
        }
        Err(OracleError::Numerical("simplex iteration limit reached".into()))
    }
}

/// Solves `lp` with a two-phase simplex. The result carries the final basis
/// as its only optimal basis and the corresponding dual as its only dual vertex.
pub fn solve_simplex(lp: &StandardFormLp) -> Result<OracleSolution, OracleError> {
    lp.ensure_valid()
        .map_err(|e| OracleError::InvalidLp(e.to_string()))?;
    let reduced = Reduced::new(lp)?;
    let rlp = &reduced.lp;
    let (m, n) = (rlp.m(), rlp.n());

    // Phase one on [A | I] with rows flipped so that b ≥ 0.
    let cols = n + m;
    let mut full = Matrix::zeros(m, cols);
    let mut b = vec![0.0; m];
    for i in 0..m {
        let sign = if rlp.b[i] < 0.0 { -1.0 } else { 1.0 };
        let row = full.row_mut(i);
        for j in 0..n {
            row[j] = sign * rlp.a[(i, j)];
        }
        row[n + i] = 1.0;
        b[i] = sign * rlp.b[i];
    }
    let mut rs = Revised {
        m: full,
        b,
        basis: (n..n + m).collect(),
    };
    let mut phase1 = vec![0.0; cols];
    for v in phase1[n..].iter_mut() {
        *v = 1.0;
    }
    rs.optimize(&phase1, cols)?;
    let xb = rs.factor()?.solve(&rs.b);
    let infeasibility: f64 = rs
        .basis
        .iter()
        .zip(&xb)
        .filter(|(&bj, _)| bj >= n)
        .map(|(_, &v)| v)
        .sum();
    if infeasibility > FEAS_TOL * (1.0 + norm_inf(&rlp.b)) {
        return Err(OracleError::Infeasible);
    }
    // Drive zero-level artificials out of the basis.
    for r in 0..m {
        if rs.basis[r] >= n {
            let mut e = vec![0.0; m];
            e[r] = 1.0;
            let alpha = rs.m.tr_mul_vec(&rs.factor()?.solve_transpose(&e));
            let col = (0..n)
                .filter(|j| !rs.basis.contains(j))
                .max_by(|&a, &b| alpha[a].abs().total_cmp(&alpha[b].abs()));
            match col {
                Some(j) if alpha[j].abs() > PIVOT_EPS => rs.basis[r] = j,
                _ => {
                    return Err(OracleError::Numerical(
                        "artificial variable stuck in basis".into(),
                    ))
                }
            }
        }
    }

    let mut cost = rlp.c.clone();
    cost.extend(std::iter::repeat(0.0).take(m));
    if !rs.optimize(&cost, n)? {
        return Err(OracleError::Unbounded);
    }

    let mut basis = rs.basis.clone();
    basis.sort_unstable();
    let lu = Lu::factor(&rlp.a.select_columns(&basis))
        .ok_or_else(|| OracleError::Numerical("final basis is singular".into()))?;
    let xb = lu.solve(&rlp.b);
    let mut x = vec![0.0; n];
    for (&j, &v) in basis.iter().zip(&xb) {
        x[j] = v.max(0.0);
    }
    let cb: Vec<f64> = basis.iter().map(|&j| rlp.c[j]).collect();
    let zr: Vec<f64> = lu.solve_transpose(&cb).into_iter().map(|v| -v).collect();
    let z = reduced.lift_dual(&zr);

    let sol = OracleSolution {
        optimal_value: lp.objective(&x),
        x_star: x.clone(),
        z_star: z.clone(),
        optimal_bases: vec![basis],
        dual_vertices: vec![z],
        primal_vertices: vec![x],
    };
    let residual = kkt_residual(lp, &sol.state());
    let scale = 1.0 + lp.a.max_abs() + norm_inf(&lp.b) + norm_inf(&lp.c);
    if residual > 1e3 * FEAS_TOL * scale {
        return Err(OracleError::Numerical(format!(
            "simplex certificate residual {residual:e} too large"
        )));
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp_model::lp1;
    use crate::oracle::solve_primal_dual;

    #[test]
    fn agrees_with_enumeration_on_lp1() {
        let s = solve_simplex(&lp1()).unwrap();
        assert_eq!(s.x_star, vec![1.0, 0.0]);
        assert_eq!(s.z_star, vec![-1.0]);
        assert_eq!(s.optimal_value, solve_primal_dual(&lp1()).unwrap().optimal_value);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let p = StandardFormLp::new("", vec![vec![1.0]], vec![-1.0], vec![1.0]).unwrap();
        assert_eq!(solve_simplex(&p), Err(OracleError::Infeasible));
        let p = StandardFormLp::new("", vec![vec![1.0, -1.0]], vec![0.0], vec![-1.0, 0.0]).unwrap();
        assert_eq!(solve_simplex(&p), Err(OracleError::Unbounded));
    }

    #[test]
    fn negative_rhs_rows_flipped() {
        // −x₁ − x₂ = −2, min 3x₁ + x₂ → x = (0, 2), value 2
        let p = StandardFormLp::new("", vec![vec![-1.0, -1.0]], vec![-2.0], vec![3.0, 1.0]).unwrap();
        let s = solve_simplex(&p).unwrap();
        assert_eq!(s.x_star, vec![0.0, 2.0]);
        assert!((s.optimal_value - 2.0).abs() < 1e-12);
        assert!(kkt_residual(&p, &s.state()) < 1e-12);
    }
}
