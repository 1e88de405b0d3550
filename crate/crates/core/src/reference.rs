//! Comparison solver for the parabolic obstacle problem: each implicit
//! step solves the complementarity system through a piecewise-linear
//! equation `[I + gamma*A*P(x)] x = b`, where P(x) is the diagonal 0/1
//! matrix of the active (positive) entries of x, iterated from the empty
//! active set until the set stabilizes. Then `w = u^c + max(x, 0)`.
//!
//! The right-hand side is `b = w^k - u^c + dt*f - gamma*A*u^c`, with A
//! the interior zero-Dirichlet Laplacian matrix applied to the interior
//! obstacle vector (zero padding at the boundary): this is the exact
//! algebra of the implicit Euler step for w, which vanishes on the
//! boundary.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::linsolve::thomas;
use crate::scheme::{drive, DiscreteProblem, RunResult, SchemeConfig, StepOutcome, TimeStepper};

/// Trace of one piecewise-linear solve.
#[derive(Debug, Clone)]
pub struct PlTrace {
    /// Linear solves performed (one per Picard iteration).
    pub solves: usize,
    /// Active-set size after each iteration.
    pub active_sizes: Vec<usize>,
}

/// Interior matrix-vector product of the zero-Dirichlet Laplacian matrix
/// A (3-point / 5-point, unscaled by h^2).
pub(crate) fn apply_a_interior(grid: &Grid, v: &[f64]) -> Vec<f64> {
    match grid {
        Grid::OneD(_) => {
            let n = v.len();
            let mut out = vec![0.0; n];
            for j in 0..n {
                let left = if j > 0 { v[j - 1] } else { 0.0 };
                let right = if j + 1 < n { v[j + 1] } else { 0.0 };
                out[j] = 2.0 * v[j] - left - right;
            }
            out
        }
        Grid::TwoD(g) => {
            let (mx, my) = (g.nx - 1, g.ny - 1);
            let mut out = vec![0.0; v.len()];
            for iy in 0..my {
                for ix in 0..mx {
                    let p = iy * mx + ix;
                    let mut nb = 0.0;
                    if ix > 0 {
                        nb += v[p - 1];
                    }
                    if ix + 1 < mx {
                        nb += v[p + 1];
                    }
                    if iy > 0 {
                        nb += v[p - mx];
                    }
                    if iy + 1 < my {
                        nb += v[p + mx];
                    }
                    out[p] = 4.0 * v[p] - nb;
                }
            }
            out
        }
    }
}

/// Solve `(I + gamma*A*P) x = b` for a fixed active mask. Columns with
/// p=false are identity columns, so the system reduces to the active
/// principal block (diagonally dominant) plus explicit fill-in.
fn solve_masked(grid: &Grid, gamma: f64, b: &[f64], active: &[bool]) -> Result<Vec<f64>> {
    match grid {
        Grid::OneD(_) => {
            // full tridiagonal elimination; column dominance keeps all
            // pivots >= 1 without pivoting
            let n = b.len();
            let mut diag = vec![0.0; n];
            let mut sub = vec![0.0; n];
            let mut sup = vec![0.0; n];
            for j in 0..n {
                diag[j] = 1.0 + if active[j] { 2.0 * gamma } else { 0.0 };
                if j > 0 && active[j - 1] {
                    sub[j] = -gamma;
                }
                if j + 1 < n && active[j + 1] {
                    sup[j] = -gamma;
                }
            }
            Ok(thomas(&sub, &diag, &sup, b))
        }
        Grid::TwoD(g) => {
            let (mx, my) = (g.nx - 1, g.ny - 1);
            let n = b.len();
            let mut x = vec![0.0; n];
            let active_rows: Vec<usize> = (0..n).filter(|&p| active[p]).collect();
            for &p in &active_rows {
                x[p] = b[p];
            }
            let bnorm = b.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            let bound = 1e-12 * (1.0 + bnorm);
            let budget = 10 * n.max(1000);
            let mut sweeps = 0usize;
            let fill = |x: &mut Vec<f64>| {
                for p in 0..n {
                    if active[p] {
                        continue;
                    }
                    let ix = p % mx;
                    let iy = p / mx;
                    let mut nb = 0.0;
                    if ix > 0 && active[p - 1] {
                        nb += x[p - 1];
                    }
                    if ix + 1 < mx && active[p + 1] {
                        nb += x[p + 1];
                    }
                    if iy > 0 && active[p - mx] {
                        nb += x[p - mx];
                    }
                    if iy + 1 < my && active[p + mx] {
                        nb += x[p + mx];
                    }
                    x[p] = b[p] + gamma * nb;
                }
            };
            loop {
                for _ in 0..4 {
                    for &p in &active_rows {
                        let ix = p % mx;
                        let iy = p / mx;
                        let mut nb = 0.0;
                        if ix > 0 && active[p - 1] {
                            nb += x[p - 1];
                        }
                        if ix + 1 < mx && active[p + 1] {
                            nb += x[p + 1];
                        }
                        if iy > 0 && active[p - mx] {
                            nb += x[p - mx];
                        }
                        if iy + 1 < my && active[p + mx] {
                            nb += x[p + mx];
                        }
                        x[p] = (b[p] + gamma * nb) / (1.0 + 4.0 * gamma);
                    }
                    sweeps += 1;
                }
                fill(&mut x);
                let res = residual_masked(grid, gamma, &x, b, active);
                if res <= bound {
                    return Ok(x);
                }
                if sweeps >= budget {
                    return Err(Error::LinearNoConvergence {
                        residual: res,
                        sweeps,
                    });
                }
            }
        }
    }
}

fn residual_masked(grid: &Grid, gamma: f64, x: &[f64], b: &[f64], active: &[bool]) -> f64 {
    let masked: Vec<f64> = x
        .iter()
        .zip(active)
        .map(|(&v, &a)| if a { v } else { 0.0 })
        .collect();
    let ax = apply_a_interior(grid, &masked);
    x.iter()
        .zip(ax.iter())
        .zip(b)
        .map(|((&xv, &av), &bv)| (xv + gamma * av - bv).abs())
        .fold(0.0, f64::max)
}

/// Piecewise-linear Picard solve of `[I + gamma*A*P(x)] x = b`, starting
/// from the empty active set, stopping when the active set repeats.
pub fn pl_solve(
    grid: &Grid,
    gamma: f64,
    b: &[f64],
    max_picard: usize,
) -> Result<(Vec<f64>, PlTrace)> {
    pl_solve_from(grid, gamma, b, max_picard, None)
}

/// Same as [`pl_solve`] but optionally warm-started from a given active
/// set (off the default paths; cold starts match the reported solve costs).
pub fn pl_solve_from(
    grid: &Grid,
    gamma: f64,
    b: &[f64],
    max_picard: usize,
    initial: Option<&[bool]>,
) -> Result<(Vec<f64>, PlTrace)> {
    let ok = gamma.is_finite() && gamma > 0.0;
    if !ok {
        return Err(Error::InvalidArgument("gamma must be positive".into()));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("rhs must be finite".into()));
    }
    if b.len() != grid.interior_count() {
        return Err(Error::InvalidArgument(format!(
            "rhs length {} does not match interior count {}",
            b.len(),
            grid.interior_count()
        )));
    }
    let n = b.len();
    let mut active = match initial {
        Some(a) => a.to_vec(),
        None => vec![false; n],
    };
    let mut trace = PlTrace {
        solves: 0,
        active_sizes: Vec::new(),
    };
    loop {
        let x = solve_masked(grid, gamma, b, &active)?;
        trace.solves += 1;
        let next: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();
        trace.active_sizes.push(next.iter().filter(|&&a| a).count());
        if next == active {
            let res = residual_masked(grid, gamma, &x, b, &active);
            let bound = 1e-10 * (1.0 + b.iter().fold(0.0f64, |a, &v| a.max(v.abs())));
            if res > bound {
                return Err(Error::ResidualBound { residual: res });
            }
            return Ok((x, trace));
        }
        if trace.solves >= max_picard {
            let sizes = &trace.active_sizes;
            return Err(Error::PicardNoConvergence {
                iterations: trace.solves,
                previous: sizes.get(sizes.len().wrapping_sub(2)).copied().unwrap_or(0),
                last: *sizes.last().unwrap_or(&0),
            });
        }
        active = next;
    }
}

/// One implicit obstacle step: `w^{k+1} = u^c + max(x, 0)` with x from
/// the piecewise-linear solve; gamma is dt/h^2.
pub fn obstacle_step(w: &Field, p: &DiscreteProblem, dt: f64) -> Result<Field> {
    let (field, _, _) = obstacle_step_traced(w, p, dt, None)?;
    Ok(field)
}

fn obstacle_step_traced(
    w: &Field,
    p: &DiscreteProblem,
    dt: f64,
    warm: Option<&[bool]>,
) -> Result<(Field, PlTrace, Vec<bool>)> {
    let ok = dt.is_finite() && dt > 0.0;
    if !ok {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    w.same_grid(&p.uc)?;
    let grid = &p.grid;
    let h = grid.h();
    let gamma = dt / (h * h);
    let interior = grid.interior_indices();
    let uc_int: Vec<f64> = interior.iter().map(|&i| p.uc.values()[i]).collect();
    let a_uc = apply_a_interior(grid, &uc_int);
    let mut b = Vec::with_capacity(interior.len());
    for (pos, &idx) in interior.iter().enumerate() {
        b.push(w.values()[idx] - uc_int[pos] + dt * p.f.values()[idx] - gamma * a_uc[pos]);
    }
    let max_picard = grid.interior_count().max(8);
    let (x, trace) = pl_solve_from(grid, gamma, &b, max_picard, warm)?;
    let active: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();
    let vals: Vec<f64> = x
        .iter()
        .zip(uc_int.iter())
        .map(|(&xv, &ucv)| ucv + xv.max(0.0))
        .collect();
    Ok((Field::from_interior(grid, &vals)?, trace, active))
}

struct ReferenceStepper<'a> {
    p: &'a DiscreteProblem,
    warm_start: bool,
    last_active: Option<Vec<bool>>,
}

impl TimeStepper for ReferenceStepper<'_> {
    fn step(&mut self, u: &Field, dt: f64) -> Result<StepOutcome> {
        let warm = if self.warm_start {
            self.last_active.as_deref()
        } else {
            None
        };
        let (field, trace, active) = obstacle_step_traced(u, self.p, dt, warm)?;
        self.last_active = Some(active);

        let grid = &self.p.grid;
        let w = grid.node_weight();
        let mut step_flux = 0.0;
        let mut new_contacts = Vec::new();
        for idx in grid.interior_indices() {
            step_flux += field.values()[idx] - u.values()[idx];
            let ucj = self.p.uc.values()[idx];
            if field.values()[idx] == ucj && u.values()[idx] > ucj {
                new_contacts.push(idx);
            }
        }
        step_flux *= w / dt;
        Ok(StepOutcome {
            field,
            new_contacts,
            clipped_mass: 0.0,
            step_flux,
            solves: trace.solves,
            picard_iterations: trace.solves,
            active_sizes: trace.active_sizes,
        })
    }
}

/// Evolve the obstacle-problem solver with the same loop and stopping
/// criterion as the switched scheme.
pub fn run_reference(p: &DiscreteProblem, cfg: &SchemeConfig) -> Result<RunResult> {
    run_reference_opts(p, cfg, false)
}

/// `run_reference` with the warm-start option exposed.
pub fn run_reference_opts(
    p: &DiscreteProblem,
    cfg: &SchemeConfig,
    warm_start: bool,
) -> Result<RunResult> {
    let mut stepper = ReferenceStepper {
        p,
        warm_start,
        last_active: None,
    };
    drive(p, cfg, &mut stepper, None)
}

/// Replay an explicit step schedule (for snapshot-aligned comparisons
/// against a scheme run).
pub fn run_reference_replay(
    p: &DiscreteProblem,
    cfg: &SchemeConfig,
    dts: &[f64],
) -> Result<RunResult> {
    let mut stepper = ReferenceStepper {
        p,
        warm_start: false,
        last_active: None,
    };
    drive(p, cfg, &mut stepper, Some(dts))
}

/// Long-time limit: run the reference solver at tol/10 and return the
/// final field, checking the discrete complementarity residual.
pub fn asymptotic_solution(p: &DiscreteProblem, cfg: &SchemeConfig) -> Result<Field> {
    let mut tight = cfg.clone();
    tight.tol = cfg.tol / 10.0;
    let run = run_reference(p, &tight)?;
    if run.termination != crate::scheme::Termination::Criterion {
        return Err(Error::NotConverged { t: run.exit_time });
    }
    let defect = crate::scheme::stationarity_defect(&run.final_field, p);
    if defect >= cfg.tol {
        return Err(Error::NotConverged { t: run.exit_time });
    }
    Ok(run.final_field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid_1d, sample};
    use crate::scheme::{Domain, ProblemSpec};

    fn toy_problem() -> DiscreteProblem {
        let spec = ProblemSpec {
            domain: Domain::Interval { a: -1.0, b: 1.0 },
            initial: |x, _| 0.7 - 0.7 * x * x,
            obstacle: |x, _| 0.5 - 2.0 * x * x,
            source: |_, _| 0.0,
            h1_violated: false,
        };
        spec.discretize(101).unwrap()
    }

    #[test]
    fn pl_solve_nonpositive_rhs_returns_rhs() {
        let g = build_grid_1d(0.0, 1.0, 6).unwrap();
        let b = vec![-1.0, -0.5, 0.0, -2.0, -1e-9];
        let (x, trace) = pl_solve(&g, 3.0, &b, 10).unwrap();
        assert_eq!(x, b);
        assert_eq!(trace.solves, 1);
        assert_eq!(trace.active_sizes, vec![0]);
    }

    #[test]
    fn pl_solve_positive_rhs_takes_two_iterations() {
        let g = build_grid_1d(0.0, 1.0, 6).unwrap();
        let b = vec![1.0, 2.0, 1.5, 2.0, 1.0];
        let (x, trace) = pl_solve(&g, 1.0, &b, 10).unwrap();
        assert_eq!(trace.solves, 2, "all-positive rhs stabilizes in 2 solves");
        assert!(x.iter().all(|&v| v > 0.0), "dominance keeps x positive");
        // residual of the full piecewise equation
        let active: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();
        let res = residual_masked(&g, 1.0, &x, &b, &active);
        assert!(res <= 1e-10 * 3.0);
    }

    #[test]
    fn pl_solve_validates() {
        let g = build_grid_1d(0.0, 1.0, 6).unwrap();
        assert!(pl_solve(&g, 0.0, &[0.0; 5], 10).is_err());
        assert!(pl_solve(&g, 1.0, &[f64::NAN; 5], 10).is_err());
        assert!(pl_solve(&g, 1.0, &[0.0; 4], 10).is_err());
    }

    #[test]
    fn obstacle_stationary_where_b_stays_nonpositive() {
        // w = u^c with A*u^c >= 0 (so b = -gamma*A*u^c <= 0) is a fixed
        // point; the concave arch 1 - x^2 with zero boundary trace does it
        let spec = ProblemSpec {
            domain: Domain::Interval { a: -1.0, b: 1.0 },
            initial: |x, _| 1.0 - x * x,
            obstacle: |x, _| 1.0 - x * x,
            source: |_, _| 0.0,
            h1_violated: true,
        };
        let p = spec.discretize(21).unwrap();
        let w = p.uc.clone();
        let next = obstacle_step(&w, &p, 0.01).unwrap();
        for idx in p.grid.interior_indices() {
            assert_eq!(next.values()[idx], w.values()[idx]);
        }
    }

    #[test]
    fn first_step_matches_scheme_before_contact() {
        let p = toy_problem();
        let cfg = SchemeConfig::new(crate::switch::SwitchVariant::Exact, 37.5);
        let dt = 37.5 * 0.02 * 0.02;
        let mut u0 = p.u0.clone();
        for idx in 0..p.grid.node_count() {
            if !p.grid.is_interior(idx) {
                u0.values_mut()[idx] = 0.0;
            }
        }
        let (scheme_next, contacts) = crate::scheme::step(&u0, &p, &cfg, dt).unwrap();
        assert!(contacts.is_empty(), "no contact on the first step");
        let ref_next = obstacle_step(&u0, &p, dt).unwrap();
        let mut worst = 0.0f64;
        for idx in p.grid.interior_indices() {
            worst = worst.max((scheme_next.values()[idx] - ref_next.values()[idx]).abs());
        }
        assert!(
            worst < 1e-12,
            "pre-contact steps are the same solve: {worst}"
        );
    }

    #[test]
    fn asymptotic_solution_errors_on_short_horizon() {
        let p = toy_problem();
        let mut cfg = SchemeConfig::new(crate::switch::SwitchVariant::Exact, 37.5);
        cfg.t_max = 0.05;
        match asymptotic_solution(&p, &cfg) {
            Err(Error::NotConverged { .. }) => {}
            other => panic!("expected not-converged, got {other:?}"),
        }
    }

    #[test]
    fn inactive_obstacle_reduces_to_heat_step() {
        let g = build_grid_1d(-1.0, 1.0, 40).unwrap();
        let spec = ProblemSpec {
            domain: Domain::Interval { a: -1.0, b: 1.0 },
            initial: |x, _| (std::f64::consts::PI * x).sin(),
            obstacle: |_, _| -10.0,
            source: |_, _| 0.0,
            h1_violated: false,
        };
        let p = spec.discretize(41).unwrap();
        let u0 = sample(&g, |x, _| (std::f64::consts::PI * x).sin()).unwrap();
        let dt = 0.01;
        let w = obstacle_step(&u0, &p, dt).unwrap();
        // backward Euler heat step via the row-scaled solver with z = 1
        let ones = Field::from_interior(&g, &vec![1.0; g.interior_count()]).unwrap();
        let sys = crate::linsolve::assemble(&ones, dt / (0.05 * 0.05)).unwrap();
        let x = crate::linsolve::solve_direct_1d(&sys, &u0.interior()).unwrap();
        let heat = Field::from_interior(&g, &x).unwrap();
        for idx in g.interior_indices() {
            assert!(
                (w.values()[idx] - heat.values()[idx]).abs() < 1e-10,
                "node {idx}"
            );
        }
    }
}
