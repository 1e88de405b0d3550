//! Assembly and solution of the per-step implicit systems
//! `(I + gamma * z * A) u = rhs`, where A is the (unscaled) discrete
//! Laplacian matrix with zero Dirichlet boundary and `z * A` scales row j
//! of A by the switch value z_j.
//!
//! Rows with z_j = 0 are identity rows. Both solvers here return
//! `u_j = rhs_j` *bitwise* for such rows: the 1D path is an unpivoted
//! Thomas elimination (safe: every pivot is >= 1 under the row-dominance
//! invariant) and the 2D path is a Gauss-Seidel sweep whose update for a
//! z=0 row is exactly `rhs_j`. Pivoting solvers would smear roundoff into
//! those rows and un-freeze contacted nodes.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Interior-only row-scaled implicit operator.
#[derive(Debug, Clone)]
pub struct RowScaledSystem {
    grid: Grid,
    gamma: f64,
    /// Switch values at interior nodes, in storage order.
    z: Vec<f64>,
}

/// Build the system for a switch field and step ratio gamma = dt/h^2.
pub fn assemble(z: &Field, gamma: f64) -> Result<RowScaledSystem> {
    let ok = gamma.is_finite() && gamma > 0.0;
    if !ok {
        return Err(Error::InvalidArgument(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let zi = z.interior();
    if zi.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidArgument(
            "switch values must lie in [0, 1]".into(),
        ));
    }
    Ok(RowScaledSystem {
        grid: *z.grid(),
        gamma,
        z: zi,
    })
}

impl RowScaledSystem {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Apply the operator to an interior vector.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let g = self.gamma;
        match self.grid {
            Grid::OneD(_) => {
                let n = x.len();
                let mut out = vec![0.0; n];
                for j in 0..n {
                    let left = if j > 0 { x[j - 1] } else { 0.0 };
                    let right = if j + 1 < n { x[j + 1] } else { 0.0 };
                    out[j] = x[j] + g * self.z[j] * (2.0 * x[j] - left - right);
                }
                out
            }
            Grid::TwoD(gr) => {
                let (mx, my) = (gr.nx - 1, gr.ny - 1);
                let mut out = vec![0.0; x.len()];
                for iy in 0..my {
                    for ix in 0..mx {
                        let p = iy * mx + ix;
                        let mut nb = 0.0;
                        if ix > 0 {
                            nb += x[p - 1];
                        }
                        if ix + 1 < mx {
                            nb += x[p + 1];
                        }
                        if iy > 0 {
                            nb += x[p - mx];
                        }
                        if iy + 1 < my {
                            nb += x[p + mx];
                        }
                        out[p] = x[p] + g * self.z[p] * (4.0 * x[p] - nb);
                    }
                }
                out
            }
        }
    }

    pub fn residual_inf(&self, x: &[f64], rhs: &[f64]) -> f64 {
        self.apply(x)
            .iter()
            .zip(rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Unpivoted Thomas elimination. `sub[j]`/`sup[j]` are row j's
/// coefficients for x_{j-1} / x_{j+1} (first/last entries unused).
/// Requires nonvanishing pivots, which both callers guarantee by
/// diagonal dominance; a zero subdiagonal entry leaves the row's
/// solution exactly equal to its eliminated right-hand side.
pub(crate) fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    debug_assert!(sub.len() == n && sup.len() == n && rhs.len() == n);
    let mut d = diag.to_vec();
    let mut r = rhs.to_vec();
    for j in 1..n {
        let m = sub[j] / d[j - 1];
        d[j] -= m * sup[j - 1];
        r[j] -= m * r[j - 1];
    }
    let mut x = vec![0.0; n];
    x[n - 1] = r[n - 1] / d[n - 1];
    for j in (0..n - 1).rev() {
        x[j] = (r[j] - sup[j] * x[j + 1]) / d[j];
    }
    x
}

/// Direct tridiagonal solve of a 1D row-scaled system.
pub fn solve_direct_1d(sys: &RowScaledSystem, rhs: &[f64]) -> Result<Vec<f64>> {
    let Grid::OneD(_) = sys.grid else {
        return Err(Error::InvalidArgument(
            "solve_direct_1d needs a 1D system".into(),
        ));
    };
    let n = sys.z.len();
    if rhs.len() != n {
        return Err(Error::InvalidArgument(format!(
            "rhs length {} does not match interior count {n}",
            rhs.len()
        )));
    }
    let g = sys.gamma;
    let mut diag = vec![0.0; n];
    let mut sub = vec![0.0; n];
    let mut sup = vec![0.0; n];
    for j in 0..n {
        diag[j] = 1.0 + 2.0 * g * sys.z[j];
        if j > 0 {
            sub[j] = -g * sys.z[j];
        }
        if j + 1 < n {
            sup[j] = -g * sys.z[j];
        }
    }
    Ok(thomas(&sub, &diag, &sup, rhs))
}

/// Gauss-Seidel sweeps on a 2D row-scaled system until
/// `||Bu - rhs||_inf <= tol_lin * (1 + ||rhs||_inf)`.
pub fn solve_iterative_2d(
    sys: &RowScaledSystem,
    rhs: &[f64],
    tol_lin: f64,
    max_it: usize,
) -> Result<Vec<f64>> {
    let Grid::TwoD(gr) = sys.grid else {
        return Err(Error::InvalidArgument(
            "solve_iterative_2d needs a 2D system".into(),
        ));
    };
    let ok = tol_lin.is_finite() && tol_lin > 0.0;
    if !ok {
        return Err(Error::InvalidArgument("tol_lin must be positive".into()));
    }
    let n = sys.z.len();
    if rhs.len() != n {
        return Err(Error::InvalidArgument(format!(
            "rhs length {} does not match interior count {n}",
            rhs.len()
        )));
    }
    let (mx, my) = (gr.nx - 1, gr.ny - 1);
    let g = sys.gamma;
    let rhs_norm = rhs.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let bound = tol_lin * (1.0 + rhs_norm);

    // warm start from the rhs (the previous time level for the scheme)
    let mut x = rhs.to_vec();
    let mut sweeps = 0;
    let mut residual = sys.residual_inf(&x, rhs);
    while residual > bound {
        if sweeps >= max_it {
            return Err(Error::LinearNoConvergence { residual, sweeps });
        }
        // residual evaluation costs about one sweep; amortize it
        for _ in 0..4 {
            for iy in 0..my {
                for ix in 0..mx {
                    let p = iy * mx + ix;
                    let zj = sys.z[p];
                    if zj == 0.0 {
                        x[p] = rhs[p];
                        continue;
                    }
                    let mut nb = 0.0;
                    if ix > 0 {
                        nb += x[p - 1];
                    }
                    if ix + 1 < mx {
                        nb += x[p + 1];
                    }
                    if iy > 0 {
                        nb += x[p - mx];
                    }
                    if iy + 1 < my {
                        nb += x[p + mx];
                    }
                    x[p] = (rhs[p] + g * zj * nb) / (1.0 + 4.0 * g * zj);
                }
            }
            sweeps += 1;
            if sweeps >= max_it {
                break;
            }
        }
        residual = sys.residual_inf(&x, rhs);
    }
    Ok(x)
}

/// Dispatch on the grid dimension with the default iteration budget.
pub fn solve(sys: &RowScaledSystem, rhs: &[f64], tol_lin: f64) -> Result<Vec<f64>> {
    match sys.grid {
        Grid::OneD(_) => solve_direct_1d(sys, rhs),
        Grid::TwoD(_) => {
            let budget = 10 * sys.grid.interior_count();
            solve_iterative_2d(sys, rhs, tol_lin, budget)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid_1d, build_grid_2d, sample, Field};

    fn field_from_interior(grid: &Grid, vals: &[f64]) -> Field {
        Field::from_interior(grid, vals).unwrap()
    }

    #[test]
    fn assemble_validates() {
        let g = build_grid_1d(0.0, 1.0, 4).unwrap();
        let z = sample(&g, |_, _| 0.5).unwrap();
        assert!(assemble(&z, 0.0).is_err());
        assert!(assemble(&z, -1.0).is_err());
        let bad = sample(&g, |_, _| 1.5).unwrap();
        assert!(assemble(&bad, 1.0).is_err());
    }

    #[test]
    fn identity_system_returns_rhs() {
        let g = build_grid_1d(0.0, 1.0, 6).unwrap();
        let z = Field::zeros(&g);
        let sys = assemble(&z, 3.0).unwrap();
        let rhs = vec![1.0, -2.0, 0.25, 7.0, 1e-30];
        let x = solve_direct_1d(&sys, &rhs).unwrap();
        assert_eq!(x, rhs);
    }

    #[test]
    fn mixed_rows_match_hand_assembly() {
        // z = (1,0,1), gamma = 1 -> rows (3,-1,0), (0,1,0), (0,-1,3)
        let g = build_grid_1d(0.0, 1.0, 4).unwrap();
        let z = field_from_interior(&g, &[1.0, 0.0, 1.0]);
        let sys = assemble(&z, 1.0).unwrap();
        assert_eq!(sys.apply(&[1.0, 0.0, 0.0]), vec![3.0, 0.0, 0.0]);
        assert_eq!(sys.apply(&[0.0, 1.0, 0.0]), vec![-1.0, 1.0, -1.0]);
        assert_eq!(sys.apply(&[0.0, 0.0, 1.0]), vec![0.0, 0.0, 3.0]);
        // identity row keeps its rhs bitwise
        let x = solve_direct_1d(&sys, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x[1], 2.0);
        assert!(sys.residual_inf(&x, &[1.0, 2.0, 3.0]) < 1e-14);
    }

    #[test]
    fn backward_euler_heat_matrix() {
        // z = 1 everywhere: classic tridiag [-g, 1+2g, -g]
        let g = build_grid_1d(0.0, 1.0, 4).unwrap();
        let z = field_from_interior(&g, &[1.0, 1.0, 1.0]);
        let sys = assemble(&z, 1.0).unwrap();
        let rhs = [1.0, 1.0, 1.0];
        let x = solve_direct_1d(&sys, &rhs).unwrap();
        assert!(sys.residual_inf(&x, &rhs) <= 1e-12 * 2.0);
        // symmetric rhs: middle component of [-1,3,-1] solve of ones is 5/7
        assert!((x[1] - 5.0 / 7.0).abs() < 1e-14);
        assert!((x[0] - 4.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn iterative_2d_identity_and_zero() {
        let g = build_grid_2d(0.0, 1.0, 0.0, 1.0, 5, 5).unwrap();
        let z = Field::zeros(&g);
        let sys = assemble(&z, 2.0).unwrap();
        let rhs: Vec<f64> = (0..16).map(|i| i as f64 * 0.1 - 0.4).collect();
        let x = solve_iterative_2d(&sys, &rhs, 1e-10, 100).unwrap();
        assert_eq!(x, rhs);

        let ones = sample(&g, |_, _| 1.0).unwrap();
        let zi = Field::from_interior(&g, &ones.interior()).unwrap();
        let sys = assemble(&zi, 2.0).unwrap();
        let zero = vec![0.0; 16];
        let x = solve_iterative_2d(&sys, &zero, 1e-10, 1000).unwrap();
        assert!(x.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn iterative_2d_budget_error() {
        let g = build_grid_2d(0.0, 1.0, 0.0, 1.0, 8, 8).unwrap();
        let ones = sample(&g, |_, _| 1.0).unwrap();
        let z = Field::from_interior(&g, &ones.interior()).unwrap();
        let sys = assemble(&z, 50.0).unwrap();
        let rhs = vec![1.0; 49];
        match solve_iterative_2d(&sys, &rhs, 1e-12, 3) {
            Err(Error::LinearNoConvergence { residual, sweeps }) => {
                assert!(residual > 0.0);
                assert!(sweeps >= 3);
            }
            other => panic!("expected no-convergence, got {other:?}"),
        }
    }
}
