//! Scalar functionals over run data: mass excess, switched interface
//! flux, mass-balance bookkeeping, contact-set geometry, cross-run
//! distances and the exponential-convergence fit.

use crate::error::{Error, Result};
use crate::grid::{laplacian, Field, Grid};
use crate::scheme::RunResult;
use crate::switch::{switch_field, SwitchVariant};
use std::io::Write;

/// Interior rectangle-rule integral of u - u^c.
pub fn mass_excess(u: &Field, uc: &Field) -> Result<f64> {
    u.same_grid(uc)?;
    let w = u.grid().node_weight();
    let mut sum = 0.0;
    for idx in u.grid().interior_indices() {
        sum += u.values()[idx] - uc.values()[idx];
    }
    Ok(w * sum)
}

/// Interior rectangle-rule integral of z * (lap(u) + f); the discrete
/// analogue of the mass rate.
pub fn interface_flux(u: &Field, uc: &Field, f: &Field, variant: SwitchVariant) -> Result<f64> {
    u.same_grid(uc)?;
    u.same_grid(f)?;
    let z = switch_field(u, uc, variant)?;
    let lap = laplacian(u);
    let w = u.grid().node_weight();
    let mut sum = 0.0;
    for idx in u.grid().interior_indices() {
        sum += z.values()[idx] * (lap.values()[idx] + f.values()[idx]);
    }
    Ok(w * sum)
}

/// One row of the mass-balance audit between consecutive states.
#[derive(Debug, Clone)]
pub struct BalanceRow {
    pub t: f64,
    /// (M^{k+1} - M^k) / dt.
    pub mass_rate: f64,
    /// Implicit within-step flux recorded by the run.
    pub step_flux: f64,
    /// clipped mass / dt.
    pub clip_rate: f64,
    /// |mass_rate - step_flux - clip_rate|.
    pub defect: f64,
}

#[derive(Debug, Clone)]
pub struct BalanceReport {
    pub max_defect: f64,
    pub rows: Vec<BalanceRow>,
}

/// Audit the identity "mass change = dt * step flux + clipped mass" over
/// every recorded step. The clipped mass is reported as its own column;
/// the returned defect has it subtracted out, so it sits at rounding
/// level by construction of the step bookkeeping.
pub fn discrete_balance_check(run: &RunResult) -> Result<BalanceReport> {
    if run.steps.len() < 2 {
        return Err(Error::InvalidArgument(
            "balance check needs at least two recorded states".into(),
        ));
    }
    let mut rows = Vec::with_capacity(run.steps.len() - 1);
    let mut max_defect = 0.0f64;
    for k in 1..run.steps.len() {
        let prev = &run.steps[k - 1];
        let cur = &run.steps[k];
        let dt = cur.dt;
        let mass_rate = (cur.mass - prev.mass) / dt;
        let clip_rate = cur.clipped_mass / dt;
        let defect = (mass_rate - cur.step_flux - clip_rate).abs();
        max_defect = max_defect.max(defect);
        rows.push(BalanceRow {
            t: cur.t,
            mass_rate,
            step_flux: cur.step_flux,
            clip_rate,
            defect,
        });
    }
    Ok(BalanceReport { max_defect, rows })
}

/// Nodes where the solution sits on the obstacle.
#[derive(Debug, Clone)]
pub struct ContactSet {
    /// Flat node indices, interior only, in storage order.
    pub nodes: Vec<usize>,
    /// Largest |x| over contacted nodes (symmetric 1D reporting);
    /// None when the set is empty.
    pub bound: Option<f64>,
    /// 4-connected components (consecutive runs in 1D).
    pub components: usize,
    /// Components of the interior complement (2 for an annulus,
    /// 1 for a simply connected blob).
    pub complement_components: usize,
}

impl ContactSet {
    pub fn contains(&self, idx: usize) -> bool {
        self.nodes.binary_search(&idx).is_ok()
    }

    pub fn write_csv<W: Write>(&self, grid: &Grid, mut w: W) -> Result<()> {
        match grid {
            Grid::OneD(_) => {
                writeln!(w, "x")?;
                for &idx in &self.nodes {
                    writeln!(w, "{:.14e}", grid.node_coords(idx).0)?;
                }
            }
            Grid::TwoD(_) => {
                writeln!(w, "x,y")?;
                for &idx in &self.nodes {
                    let (x, y) = grid.node_coords(idx);
                    writeln!(w, "{x:.14e},{y:.14e}")?;
                }
            }
        }
        Ok(())
    }
}

fn count_components(grid: &Grid, member: &[bool]) -> usize {
    // member is indexed over interior nodes in storage order
    match grid {
        Grid::OneD(_) => {
            let mut comps = 0;
            let mut inside = false;
            for &m in member {
                if m && !inside {
                    comps += 1;
                }
                inside = m;
            }
            comps
        }
        Grid::TwoD(g) => {
            let (mx, my) = (g.nx - 1, g.ny - 1);
            let mut seen = vec![false; member.len()];
            let mut comps = 0;
            let mut stack = Vec::new();
            for start in 0..member.len() {
                if !member[start] || seen[start] {
                    continue;
                }
                comps += 1;
                seen[start] = true;
                stack.push(start);
                while let Some(p) = stack.pop() {
                    let ix = p % mx;
                    let iy = p / mx;
                    let mut push = |q: usize| {
                        if member[q] && !seen[q] {
                            seen[q] = true;
                            stack.push(q);
                        }
                    };
                    if ix > 0 {
                        push(p - 1);
                    }
                    if ix + 1 < mx {
                        push(p + 1);
                    }
                    if iy > 0 {
                        push(p - mx);
                    }
                    if iy + 1 < my {
                        push(p + mx);
                    }
                }
            }
            comps
        }
    }
}

/// Detect the contact set `{u = u^c within eps}` over interior nodes.
/// eps = 0 is exact equality, valid under the bitwise clip.
pub fn contact_set(u: &Field, uc: &Field, eps: f64) -> Result<ContactSet> {
    if eps < 0.0 {
        return Err(Error::InvalidArgument("eps must be >= 0".into()));
    }
    u.same_grid(uc)?;
    let grid = u.grid();
    let interior = grid.interior_indices();
    let member: Vec<bool> = interior
        .iter()
        .map(|&idx| (u.values()[idx] - uc.values()[idx]).abs() <= eps)
        .collect();
    let nodes: Vec<usize> = interior
        .iter()
        .zip(&member)
        .filter(|(_, &m)| m)
        .map(|(&idx, _)| idx)
        .collect();
    let bound = nodes
        .iter()
        .map(|&idx| {
            let (x, y) = grid.node_coords(idx);
            match grid {
                Grid::OneD(_) => x.abs(),
                Grid::TwoD(_) => x.abs().max(y.abs()),
            }
        })
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |a| a.max(v)))
        });
    let complement: Vec<bool> = member.iter().map(|&m| !m).collect();
    Ok(ContactSet {
        components: count_components(grid, &member),
        complement_components: count_components(grid, &complement),
        nodes,
        bound,
    })
}

/// Max over shared snapshot times of the sup-norm distance between two
/// runs. Requires identical grids and snapshot time sequences.
pub fn sup_distance(a: &RunResult, b: &RunResult) -> Result<f64> {
    a.final_field.same_grid(&b.final_field)?;
    if a.snapshots.len() != b.snapshots.len() {
        return Err(Error::SnapshotMismatch);
    }
    let mut worst = 0.0f64;
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        if sa.t != sb.t {
            return Err(Error::SnapshotMismatch);
        }
        for (va, vb) in sa.field.values().iter().zip(sb.field.values()) {
            worst = worst.max((va - vb).abs());
        }
    }
    Ok(worst)
}

/// Discrete H^1 distance: rectangle-rule L^2 part over interior nodes
/// plus the forward-difference seminorm over all node pairs.
pub fn h1_distance(a: &Field, b: &Field) -> Result<f64> {
    a.same_grid(b)?;
    let grid = a.grid();
    let d: Vec<f64> = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x - y)
        .collect();
    let mut l2 = 0.0;
    for idx in grid.interior_indices() {
        l2 += d[idx] * d[idx];
    }
    let mut semi = 0.0;
    match grid {
        Grid::OneD(g) => {
            let h2 = g.h * g.h;
            for j in 0..g.n {
                let fd = d[j + 1] - d[j];
                semi += fd * fd / h2;
            }
        }
        Grid::TwoD(g) => {
            let w = g.nx + 1;
            let h2 = g.h * g.h;
            for iy in 0..=g.ny {
                for ix in 0..=g.nx {
                    let p = iy * w + ix;
                    if ix < g.nx {
                        let fd = d[p + 1] - d[p];
                        semi += fd * fd / h2;
                    }
                    if iy < g.ny {
                        let fd = d[p + w] - d[p];
                        semi += fd * fd / h2;
                    }
                }
            }
        }
    }
    let wq = grid.node_weight();
    Ok((wq * (l2 + semi)).sqrt())
}

#[derive(Debug, Clone)]
pub struct RateFit {
    /// Fitted decay constant (minus the log-distance slope).
    pub rate: f64,
    /// RMS fit residual relative to the log-distance range.
    pub relative_residual: f64,
    pub window: (f64, f64),
    pub points: usize,
    /// True when the run ended before t = 1 and the window fell back to
    /// the last half of the run.
    pub window_fallback: bool,
}

impl RateFit {
    /// One-line fit report: `C_hat,residual,window`.
    pub fn to_csv(&self) -> String {
        format!(
            "C_hat,residual,window\n{},{},{}..{}\n",
            self.rate, self.relative_residual, self.window.0, self.window.1
        )
    }
}

/// Least-squares exponential-rate fit of the H^1 distance to the
/// asymptotic state over t in [1, T*] (or the last half of short runs).
/// Distances at or below 1e-14 are treated as saturated and excluded.
pub fn convergence_rate(run: &RunResult, ubar: &Field) -> Result<RateFit> {
    let t_end = run.exit_time;
    let (lo, fallback) = if t_end >= 1.0 {
        (1.0, false)
    } else {
        (t_end / 2.0, true)
    };
    let mut ts = Vec::new();
    let mut lds = Vec::new();
    for snap in &run.snapshots {
        if snap.t < lo || snap.t > t_end {
            continue;
        }
        let d = h1_distance(&snap.field, ubar)?;
        if d <= 1e-14 {
            continue;
        }
        ts.push(snap.t);
        lds.push(d.ln());
    }
    let m = ts.len();
    if m < 3 {
        return Err(Error::Fit(format!(
            "only {m} usable snapshots in the window [{lo}, {t_end}]"
        )));
    }
    let mean_t = ts.iter().sum::<f64>() / m as f64;
    let mean_d = lds.iter().sum::<f64>() / m as f64;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (t, ld) in ts.iter().zip(&lds) {
        cov += (t - mean_t) * (ld - mean_d);
        var += (t - mean_t) * (t - mean_t);
    }
    if var == 0.0 {
        return Err(Error::Fit("degenerate time window".into()));
    }
    let slope = cov / var;
    let intercept = mean_d - slope * mean_t;
    let mut ss = 0.0;
    for (t, ld) in ts.iter().zip(&lds) {
        let e = ld - (slope * t + intercept);
        ss += e * e;
    }
    let rms = (ss / m as f64).sqrt();
    let range = lds.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - lds.iter().cloned().fold(f64::INFINITY, f64::min);
    if range <= 0.0 {
        return Err(Error::Fit("log-distance range is degenerate".into()));
    }
    Ok(RateFit {
        rate: -slope,
        relative_residual: rms / range,
        window: (lo, t_end),
        points: m,
        window_fallback: fallback,
    })
}

/// Largest violation of the one-sided bound `f <= w_t - lap(w)` over
/// consecutive snapshots (lap taken at the newer state). The implicit
/// obstacle step satisfies it to solver precision; the switched scheme
/// may break it transiently at clip events, so this is a soft
/// diagnostic, not an invariant.
pub fn residual_lower_bound_defect(run: &RunResult, f: &Field) -> Result<f64> {
    if run.snapshots.len() < 2 {
        return Err(Error::InvalidArgument(
            "defect needs at least two snapshots".into(),
        ));
    }
    let grid = f.grid();
    let mut worst = 0.0f64;
    for pair in run.snapshots.windows(2) {
        let dt = pair[1].t - pair[0].t;
        let lap = laplacian(&pair[1].field);
        for idx in grid.interior_indices() {
            let rate = (pair[1].field.values()[idx] - pair[0].field.values()[idx]) / dt;
            worst = worst.max(f.values()[idx] - (rate - lap.values()[idx]));
        }
    }
    Ok(worst)
}

/// Write the per-step diagnostic series as `t,M,I,new_contacts,dt`.
pub fn write_diag_csv<W: Write>(run: &RunResult, mut w: W) -> Result<()> {
    writeln!(w, "t,M,I,new_contacts,dt")?;
    for row in &run.steps {
        writeln!(
            w,
            "{:.14e},{:.14e},{:.14e},{},{:.14e}",
            row.t, row.mass, row.flux, row.new_contacts, row.dt
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid_1d, build_grid_2d, sample};

    #[test]
    fn mass_excess_cases() {
        let g = build_grid_1d(-1.0, 1.0, 100).unwrap();
        let uc = sample(&g, |x, _| -x).unwrap();
        assert_eq!(mass_excess(&uc, &uc).unwrap(), 0.0);
        let up = sample(&g, |x, _| -x + 1.0).unwrap();
        // interior-only rectangle rule: 2 * 99/100
        let m = mass_excess(&up, &uc).unwrap();
        assert!((m - 1.98).abs() < 1e-12, "got {m}");
    }

    #[test]
    fn interface_flux_cases() {
        let g = build_grid_1d(-1.0, 1.0, 50).unwrap();
        let uc = sample(&g, |x, _| 0.2 * x).unwrap();
        let f = sample(&g, |_, _| 0.0).unwrap();
        // u = uc: switch vanishes
        assert_eq!(
            interface_flux(&uc, &uc, &f, SwitchVariant::Exact).unwrap(),
            0.0
        );
        // linear u above the obstacle: stencil of a line is zero
        let ul = sample(&g, |x, _| 0.5 * x + 2.0).unwrap();
        let i = interface_flux(&ul, &uc, &f, SwitchVariant::Exact).unwrap();
        assert!(i.abs() < 1e-10, "got {i}");
    }

    #[test]
    fn contact_bound_and_components_1d() {
        let g = build_grid_1d(-1.0, 1.0, 10).unwrap();
        let uc = sample(&g, |x, _| x).unwrap();
        let mut u = uc.clone();
        // detach two separated interior nodes
        u.values_mut()[3] += 1.0;
        u.values_mut()[7] += 1.0;
        let c = contact_set(&u, &uc, 0.0).unwrap();
        assert_eq!(c.nodes, vec![1, 2, 4, 5, 6, 8, 9]);
        assert_eq!(c.components, 3);
        assert_eq!(c.complement_components, 2);
        assert_eq!(c.bound, Some(0.8));
        // empty set
        let far = sample(&g, |x, _| x + 5.0).unwrap();
        let c = contact_set(&far, &uc, 0.0).unwrap();
        assert!(c.nodes.is_empty());
        assert!(c.bound.is_none());
        assert_eq!(c.components, 0);
        assert_eq!(c.complement_components, 1);
    }

    #[test]
    fn contact_components_2d_annulus() {
        // ring of contacted nodes leaves 2 complement components
        let g = build_grid_2d(-1.0, 1.0, -1.0, 1.0, 10, 10).unwrap();
        let uc = sample(&g, |_, _| 0.0).unwrap();
        let u = sample(&g, |x, y| {
            let r = (x * x + y * y).sqrt();
            if (0.35..=0.75).contains(&r) {
                0.0
            } else {
                1.0
            }
        })
        .unwrap();
        let c = contact_set(&u, &uc, 0.0).unwrap();
        assert_eq!(c.components, 1, "ring is one 4-connected component");
        assert_eq!(c.complement_components, 2, "hole plus outside");
    }

    #[test]
    fn h1_distance_hand_value() {
        let g = build_grid_1d(0.0, 1.0, 4).unwrap();
        let a = sample(&g, |x, _| x).unwrap();
        let b = sample(&g, |_, _| 0.0).unwrap();
        // d = x: L2 part h*sum(x_j^2, interior) = 0.25*(0.0625+0.25+0.5625)
        // seminorm part: 4 gaps, slope 1 -> h * 4 * (1/h^2 * h^2)/... = 4*0.25
        let want = (0.25f64 * (0.0625 + 0.25 + 0.5625) + 0.25 * 4.0).sqrt();
        let got = h1_distance(&a, &b).unwrap();
        assert!((got - want).abs() < 1e-14, "got {got} want {want}");
    }

    #[test]
    fn sup_distance_of_identical_runs_is_zero() {
        use crate::scheme::{run, Domain, ProblemSpec, SchemeConfig};
        let spec = ProblemSpec {
            domain: Domain::Interval { a: -1.0, b: 1.0 },
            initial: |x, _| 0.7 - 0.7 * x * x,
            obstacle: |x, _| 0.5 - 2.0 * x * x,
            source: |_, _| 0.0,
            h1_violated: false,
        };
        let p = spec.discretize(41).unwrap();
        let cfg = SchemeConfig::new(SwitchVariant::Exact, 20.0);
        let a = run(&p, &cfg).unwrap();
        let b = run(&p, &cfg).unwrap();
        assert_eq!(sup_distance(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn rate_fit_report_shape() {
        let fit = RateFit {
            rate: 9.5,
            relative_residual: 0.003,
            window: (1.0, 2.5),
            points: 40,
            window_fallback: false,
        };
        let csv = fit.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("C_hat,residual,window"));
        assert_eq!(lines.next(), Some("9.5,0.003,1..2.5"));
    }

    #[test]
    fn convergence_rate_errors_when_already_stationary() {
        use crate::scheme::{run, Domain, ProblemSpec, SchemeConfig};
        // u0 = 0 above an inactive obstacle satisfies the criterion at
        // t = 0: every snapshot distance to ubar saturates, no fit
        let spec = ProblemSpec {
            domain: Domain::Interval { a: -1.0, b: 1.0 },
            initial: |_, _| 0.0,
            obstacle: |_, _| -1.0,
            source: |_, _| 0.0,
            h1_violated: false,
        };
        let p = spec.discretize(41).unwrap();
        let cfg = SchemeConfig::new(SwitchVariant::Exact, 20.0);
        let r = run(&p, &cfg).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(convergence_rate(&r, &r.final_field).is_err());
    }
}
