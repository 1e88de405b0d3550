//! The semi-implicit switched scheme with obstacle projection.
//!
//! One step freezes the switch at the previous time level, solves the
//! row-scaled implicit system, then clips any node that crossed the
//! obstacle back onto it (bitwise). Contacted nodes have switch value 0,
//! so their rows are identity rows and they never move again under the
//! exact switch.
//!
//! The run loop checks the stationarity criterion *before* each step;
//! `iterations` counts criterion evaluations, so a run that stops after
//! m accepted steps reports m + 1 iterations.

use crate::diagnostics::{self, ContactSet};
use crate::error::{Error, Result};
use crate::grid::{build_grid_1d, build_grid_2d, laplacian, sample, Field, Grid};
use crate::linsolve;
use crate::switch::{switch_field, SwitchVariant};

/// Scalar expression of space; interval problems receive y = 0.
pub type SpaceFn = fn(f64, f64) -> f64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Rectangle { ax: f64, bx: f64, ay: f64, by: f64 },
}

/// Closed-form problem data: domain, initial datum, obstacle, source.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub domain: Domain,
    pub initial: SpaceFn,
    pub obstacle: SpaceFn,
    pub source: SpaceFn,
    /// Set when the initial datum deliberately touches the obstacle.
    pub h1_violated: bool,
}

/// Sampled problem data on a concrete grid.
#[derive(Debug, Clone)]
pub struct DiscreteProblem {
    pub grid: Grid,
    pub u0: Field,
    pub uc: Field,
    pub f: Field,
    pub h1_violated: bool,
}

impl ProblemSpec {
    /// Sample onto a grid with `nodes` total nodes per axis.
    pub fn discretize(&self, nodes: usize) -> Result<DiscreteProblem> {
        if nodes < 4 {
            return Err(Error::InvalidArgument(format!(
                "need at least 4 nodes per axis, got {nodes}"
            )));
        }
        let n = nodes - 1;
        let grid = match self.domain {
            Domain::Interval { a, b } => build_grid_1d(a, b, n)?,
            Domain::Rectangle { ax, bx, ay, by } => build_grid_2d(ax, bx, ay, by, n, n)?,
        };
        let u0 = sample(&grid, |x, y| (self.initial)(x, y))?;
        let uc = sample(&grid, |x, y| (self.obstacle)(x, y))?;
        for idx in grid.interior_indices() {
            let gap = u0.values()[idx] - uc.values()[idx];
            if gap < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "initial datum lies below the obstacle at node {idx}"
                )));
            }
            if gap == 0.0 && !self.h1_violated {
                return Err(Error::InvalidArgument(format!(
                    "initial datum touches the obstacle at node {idx}; \
                     set h1_violated when that is intended"
                )));
            }
        }
        Ok(DiscreteProblem {
            grid,
            u0,
            uc,
            f: sample(&grid, |x, y| (self.source)(x, y))?,
            h1_violated: self.h1_violated,
        })
    }
}

/// Nodewise hypothesis report; informational, never blocks a run.
#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    /// Interior nodes where the strict dominance u0 > u^c fails.
    pub h1_violations: Vec<usize>,
    /// Interior nodes where lap(u^c) + f > 0.
    pub h2_violations: Vec<usize>,
}

impl FeasibilityReport {
    pub fn h1_ok(&self) -> bool {
        self.h1_violations.is_empty()
    }
    pub fn h2_ok(&self) -> bool {
        self.h2_violations.is_empty()
    }
}

/// Check the strict initial dominance and the obstacle-source sign
/// condition node by node.
pub fn feasibility_check(p: &DiscreteProblem) -> FeasibilityReport {
    let lap_uc = laplacian(&p.uc);
    let mut h1 = Vec::new();
    let mut h2 = Vec::new();
    for idx in p.grid.interior_indices() {
        if p.u0.values()[idx] <= p.uc.values()[idx] {
            h1.push(idx);
        }
        if lap_uc.values()[idx] + p.f.values()[idx] > 0.0 {
            h2.push(idx);
        }
    }
    FeasibilityReport {
        h1_violations: h1,
        h2_violations: h2,
    }
}

/// Time-step policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtPolicy {
    Fixed,
    /// Step bounded by the smallest predicted time-to-contact.
    Adaptive {
        safety: f64,
    },
    /// Halve on steps that create too many contacts at once.
    Halving {
        max_new_contacts: usize,
        stable_steps: usize,
    },
}

impl DtPolicy {
    pub fn adaptive() -> DtPolicy {
        DtPolicy::Adaptive { safety: 1.0 }
    }
    pub fn halving() -> DtPolicy {
        DtPolicy::Halving {
            max_new_contacts: 2,
            stable_steps: 3,
        }
    }
    pub fn name(&self) -> &'static str {
        match self {
            DtPolicy::Fixed => "fixed",
            DtPolicy::Adaptive { .. } => "adaptive",
            DtPolicy::Halving { .. } => "halving",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SnapshotCadence {
    /// Every step for the first 32, then powers of two, plus the final state.
    Geometric,
    EveryStep,
}

/// Relative gap below which a node no longer constrains the adaptive
/// step: a node this close to the obstacle is contacted by the next
/// ordinary step anyway, while letting it drive the step size stalls
/// the run in a quadratically shrinking cascade.
pub const ADAPTIVE_GAP_FILTER: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub switch: SwitchVariant,
    /// Base step ratio dt/h^2.
    pub gamma: f64,
    pub policy: DtPolicy,
    /// Stationarity tolerance.
    pub tol: f64,
    /// Time horizon.
    pub t_max: f64,
    pub cadence: SnapshotCadence,
    /// Residual tolerance of the iterative 2D linear solver.
    pub lin_tol: f64,
}

impl SchemeConfig {
    pub fn new(switch: SwitchVariant, gamma: f64) -> SchemeConfig {
        SchemeConfig {
            switch,
            gamma,
            policy: DtPolicy::Fixed,
            tol: 1e-4,
            t_max: 10.0,
            cadence: SnapshotCadence::Geometric,
            lin_tol: 1e-10,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.gamma) {
            return Err(Error::InvalidArgument("gamma must be positive".into()));
        }
        if !positive(self.tol) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if !positive(self.t_max) {
            return Err(Error::InvalidArgument("t_max must be positive".into()));
        }
        if let SwitchVariant::Smoothed { n } = self.switch {
            if n < 1 {
                return Err(Error::InvalidArgument("eta parameter must be >= 1".into()));
            }
        }
        if let DtPolicy::Adaptive { safety } = self.policy {
            let ok = safety > 0.0 && safety <= 1.0;
            if !ok {
                return Err(Error::InvalidArgument("safety must lie in (0, 1]".into()));
            }
        }
        Ok(())
    }
}

/// Mutable policy state threaded through `choose_dt`.
#[derive(Debug, Clone)]
pub struct DtState {
    pub base: f64,
    /// Current halving step.
    pub current: f64,
    pub consecutive_accepted: usize,
    /// Magnitude scale for the adaptive gap filter.
    pub gap_scale: f64,
}

impl DtState {
    pub fn new(p: &DiscreteProblem, cfg: &SchemeConfig) -> DtState {
        let h = p.grid.h();
        let base = cfg.gamma * h * h;
        let amax = |f: &Field| f.values().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        DtState {
            base,
            current: base,
            consecutive_accepted: 0,
            gap_scale: 1.0 + amax(&p.u0) + amax(&p.uc),
        }
    }

    pub fn floor(&self) -> f64 {
        self.base * 2f64.powi(-20)
    }
}

/// Pick the next time step under the configured policy.
pub fn choose_dt(
    u: &Field,
    p: &DiscreteProblem,
    cfg: &SchemeConfig,
    state: &DtState,
) -> Result<f64> {
    let dt = match cfg.policy {
        DtPolicy::Fixed => state.base,
        DtPolicy::Halving { .. } => state.current,
        DtPolicy::Adaptive { safety } => {
            let z = switch_field(u, &p.uc, cfg.switch)?;
            let lap = laplacian(u);
            let gap_floor = ADAPTIVE_GAP_FILTER * state.gap_scale;
            let mut best = f64::INFINITY;
            for idx in p.grid.interior_indices() {
                let zj = z.values()[idx];
                let moving = match cfg.switch {
                    SwitchVariant::Exact => zj == 1.0,
                    SwitchVariant::Smoothed { .. } => zj > 0.0,
                };
                if !moving {
                    continue;
                }
                let slope = lap.values()[idx] + p.f.values()[idx];
                if slope >= 0.0 {
                    continue;
                }
                let gap = u.values()[idx] - p.uc.values()[idx];
                if gap <= gap_floor {
                    continue;
                }
                best = best.min(gap / -slope);
            }
            if best.is_finite() {
                state.base.min(safety * best)
            } else {
                state.base
            }
        }
    };
    if dt <= state.floor() {
        return Err(Error::DtFloor {
            t: f64::NAN,
            floor: state.floor(),
        });
    }
    Ok(dt)
}

/// Stationarity criterion: max over interior nodes of
/// `(u - u^c) * |lap(u) + f|` below the tolerance.
pub fn stopped(u: &Field, p: &DiscreteProblem, cfg: &SchemeConfig) -> bool {
    stationarity_defect(u, p) < cfg.tol
}

/// The criterion's left-hand side.
pub fn stationarity_defect(u: &Field, p: &DiscreteProblem) -> f64 {
    let lap = laplacian(u);
    let mut worst = 0.0f64;
    for idx in p.grid.interior_indices() {
        let gap = u.values()[idx] - p.uc.values()[idx];
        let slope = (lap.values()[idx] + p.f.values()[idx]).abs();
        worst = worst.max(gap * slope);
    }
    worst
}

pub(crate) struct StepOutcome {
    pub field: Field,
    pub new_contacts: Vec<usize>,
    pub clipped_mass: f64,
    /// Mass rate of the implicit update before clipping.
    pub step_flux: f64,
    pub solves: usize,
    pub picard_iterations: usize,
    pub active_sizes: Vec<usize>,
}

pub(crate) trait TimeStepper {
    fn step(&mut self, u: &Field, dt: f64) -> Result<StepOutcome>;
}

pub(crate) struct SchemeStepper<'a> {
    pub p: &'a DiscreteProblem,
    pub cfg: &'a SchemeConfig,
}

impl TimeStepper for SchemeStepper<'_> {
    fn step(&mut self, u: &Field, dt: f64) -> Result<StepOutcome> {
        scheme_step(u, self.p, self.cfg, dt)
    }
}

fn scheme_step(u: &Field, p: &DiscreteProblem, cfg: &SchemeConfig, dt: f64) -> Result<StepOutcome> {
    let grid = &p.grid;
    let h = grid.h();
    let gamma_eff = dt / (h * h);
    let z = switch_field(u, &p.uc, cfg.switch)?;
    let sys = linsolve::assemble(&z, gamma_eff)?;

    let interior = grid.interior_indices();
    let mut rhs = Vec::with_capacity(interior.len());
    for &idx in &interior {
        rhs.push(u.values()[idx] + dt * z.values()[idx] * p.f.values()[idx]);
    }
    let mut x = linsolve::solve(&sys, &rhs, cfg.lin_tol)?;

    let w = grid.node_weight();
    let mut step_flux = 0.0;
    for (pos, &idx) in interior.iter().enumerate() {
        step_flux += x[pos] - u.values()[idx];
    }
    step_flux *= w / dt;

    let mut new_contacts = Vec::new();
    let mut clipped_mass = 0.0;
    for (pos, &idx) in interior.iter().enumerate() {
        let ucj = p.uc.values()[idx];
        if x[pos] < ucj {
            clipped_mass += w * (ucj - x[pos]);
            x[pos] = ucj;
            new_contacts.push(idx);
        }
    }

    Ok(StepOutcome {
        field: Field::from_interior(grid, &x)?,
        new_contacts,
        clipped_mass,
        step_flux,
        solves: 1,
        picard_iterations: 0,
        active_sizes: Vec::new(),
    })
}

/// One projected scheme step; returns the clipped field and the nodes
/// newly forced onto the obstacle.
pub fn step(
    u: &Field,
    p: &DiscreteProblem,
    cfg: &SchemeConfig,
    dt: f64,
) -> Result<(Field, Vec<usize>)> {
    let ok = dt.is_finite() && dt > 0.0;
    if !ok {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    u.same_grid(&p.uc)?;
    for idx in p.grid.interior_indices() {
        if u.values()[idx] < p.uc.values()[idx] {
            return Err(Error::InvalidArgument(
                "state lies below the obstacle".into(),
            ));
        }
    }
    let out = scheme_step(u, p, cfg, dt)?;
    Ok((out.field, out.new_contacts))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The stationarity criterion fired.
    Criterion,
    /// The horizon t_max was reached first.
    Horizon,
    /// A replayed step schedule was exhausted.
    ScheduleDone,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Termination::Criterion => write!(f, "stopped-by-criterion"),
            Termination::Horizon => write!(f, "horizon-reached"),
            Termination::ScheduleDone => write!(f, "schedule-done"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    /// Accepted-step index of this state (0 = initial).
    pub step: usize,
    pub t: f64,
    pub field: Field,
}

/// Per-state diagnostic record; row 0 describes the initial state.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub t: f64,
    /// Step size used to reach this state (0 for the initial row).
    pub dt: f64,
    /// Mass excess of this state.
    pub mass: f64,
    /// Switched interface flux evaluated at this state.
    pub flux: f64,
    pub new_contacts: usize,
    /// Implicit within-step mass rate of the step that produced this state.
    pub step_flux: f64,
    /// Mass added back by the clip during that step.
    pub clipped_mass: f64,
}

/// Aggregated projected-iteration counts for a reference run.
#[derive(Debug, Clone, Default)]
pub struct PicardTrace {
    /// Per accepted step: iteration count and per-iteration active-set sizes.
    pub per_step: Vec<(usize, Vec<usize>)>,
    pub total_solves: usize,
}

#[derive(Debug, Clone)]
pub struct RunMeta {
    pub switch: SwitchVariant,
    pub policy: DtPolicy,
    pub gamma: f64,
    pub nodes_per_axis: usize,
    pub tol: f64,
    pub lin_tol: f64,
    pub base_dt: f64,
    pub adaptive_gap_filter: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub snapshots: Vec<Snapshot>,
    pub steps: Vec<StepRecord>,
    pub final_field: Field,
    pub exit_time: f64,
    /// Criterion evaluations (accepted steps + 1 when stopped by criterion).
    pub iterations: usize,
    pub linear_solves: usize,
    /// Contact set at exit; bitwise for the exact switch, within tol for
    /// the smoothed switch (which may approach without exact contact).
    pub contact: ContactSet,
    pub termination: Termination,
    pub picard: Option<PicardTrace>,
    pub meta: RunMeta,
}

impl RunResult {
    pub fn dt_history(&self) -> Vec<f64> {
        self.steps.iter().skip(1).map(|r| r.dt).collect()
    }
}

fn geometric_snapshot(step: usize) -> bool {
    step <= 32 || step.is_power_of_two()
}

pub(crate) fn drive(
    p: &DiscreteProblem,
    cfg: &SchemeConfig,
    stepper: &mut dyn TimeStepper,
    schedule: Option<&[f64]>,
) -> Result<RunResult> {
    cfg.validate()?;
    p.u0.same_grid(&p.uc)?;
    p.u0.same_grid(&p.f)?;

    let grid = &p.grid;
    let mut u = p.u0.clone();
    // the evolution carries homogeneous Dirichlet data
    for idx in 0..grid.node_count() {
        if !grid.is_interior(idx) {
            u.values_mut()[idx] = 0.0;
        }
    }
    for idx in grid.interior_indices() {
        if u.values()[idx] < p.uc.values()[idx] {
            return Err(Error::InvalidArgument(format!(
                "initial datum lies below the obstacle at node {idx}"
            )));
        }
    }

    let mut state = DtState::new(p, cfg);
    let mut t = 0.0;
    let mut iterations = 0usize;
    let mut solves = 0usize;
    let mut accepted = 0usize;
    let mut picard = PicardTrace::default();

    let mut snapshots = vec![Snapshot {
        step: 0,
        t: 0.0,
        field: u.clone(),
    }];
    let mut steps = vec![StepRecord {
        t: 0.0,
        dt: 0.0,
        mass: diagnostics::mass_excess(&u, &p.uc)?,
        flux: diagnostics::interface_flux(&u, &p.uc, &p.f, cfg.switch)?,
        new_contacts: 0,
        step_flux: 0.0,
        clipped_mass: 0.0,
    }];

    let termination = loop {
        iterations += 1;
        match schedule {
            Some(s) => {
                if accepted >= s.len() {
                    break Termination::ScheduleDone;
                }
            }
            None => {
                if stopped(&u, p, cfg) {
                    break Termination::Criterion;
                }
                if t >= cfg.t_max {
                    break Termination::Horizon;
                }
            }
        }

        let mut dt = match schedule {
            Some(s) => s[accepted],
            None => choose_dt(&u, p, cfg, &state).map_err(|e| match e {
                Error::DtFloor { floor, .. } => Error::DtFloor { t, floor },
                other => other,
            })?,
        };

        let outcome = loop {
            let o = stepper.step(&u, dt)?;
            solves += o.solves;
            if o.picard_iterations > 0 {
                picard.total_solves += o.solves;
            }
            if schedule.is_none() {
                if let DtPolicy::Halving {
                    max_new_contacts, ..
                } = cfg.policy
                {
                    if o.new_contacts.len() > max_new_contacts {
                        if dt * 0.5 <= state.floor() {
                            return Err(Error::DtFloor {
                                t,
                                floor: state.floor(),
                            });
                        }
                        dt *= 0.5;
                        state.current = dt;
                        state.consecutive_accepted = 0;
                        continue;
                    }
                }
            }
            break o;
        };
        if let DtPolicy::Halving { stable_steps, .. } = cfg.policy {
            state.consecutive_accepted += 1;
            if state.consecutive_accepted >= stable_steps {
                state.current = state.base;
                state.consecutive_accepted = 0;
            }
        }

        if outcome.picard_iterations > 0 {
            picard
                .per_step
                .push((outcome.picard_iterations, outcome.active_sizes.clone()));
        }

        u = outcome.field;
        t += dt;
        accepted += 1;

        steps.push(StepRecord {
            t,
            dt,
            mass: diagnostics::mass_excess(&u, &p.uc)?,
            flux: diagnostics::interface_flux(&u, &p.uc, &p.f, cfg.switch)?,
            new_contacts: outcome.new_contacts.len(),
            step_flux: outcome.step_flux,
            clipped_mass: outcome.clipped_mass,
        });
        let record = match cfg.cadence {
            SnapshotCadence::EveryStep => true,
            SnapshotCadence::Geometric => geometric_snapshot(accepted),
        };
        if record {
            snapshots.push(Snapshot {
                step: accepted,
                t,
                field: u.clone(),
            });
        }
    };

    if snapshots.last().map(|s| s.step) != Some(accepted) {
        snapshots.push(Snapshot {
            step: accepted,
            t,
            field: u.clone(),
        });
    }

    let eps_c = match cfg.switch {
        SwitchVariant::Exact => 0.0,
        SwitchVariant::Smoothed { .. } => cfg.tol,
    };
    let contact = diagnostics::contact_set(&u, &p.uc, eps_c)?;
    let nodes_per_axis = match grid {
        Grid::OneD(g) => g.n + 1,
        Grid::TwoD(g) => g.nx + 1,
    };

    Ok(RunResult {
        snapshots,
        steps,
        final_field: u,
        exit_time: t,
        iterations,
        linear_solves: solves,
        contact,
        termination,
        picard: if picard.total_solves > 0 {
            Some(picard)
        } else {
            None
        },
        meta: RunMeta {
            switch: cfg.switch,
            policy: cfg.policy,
            gamma: cfg.gamma,
            nodes_per_axis,
            tol: cfg.tol,
            lin_tol: cfg.lin_tol,
            base_dt: state.base,
            adaptive_gap_filter: ADAPTIVE_GAP_FILTER,
        },
    })
}

/// Evolve the switched scheme until the criterion fires or the horizon
/// is reached.
pub fn run(p: &DiscreteProblem, cfg: &SchemeConfig) -> Result<RunResult> {
    let mut stepper = SchemeStepper { p, cfg };
    drive(p, cfg, &mut stepper, None)
}

/// Re-run the scheme over an explicit step schedule (used for aligned
/// cross-solver comparisons).
pub fn run_with_schedule(
    p: &DiscreteProblem,
    cfg: &SchemeConfig,
    dts: &[f64],
) -> Result<RunResult> {
    let mut stepper = SchemeStepper { p, cfg };
    drive(p, cfg, &mut stepper, Some(dts))
}
