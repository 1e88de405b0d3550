//! Built-in catalog of the ten benchmark problems, the experiment
//! driver behind the CLI, and the twelve-row performance sweep.

use crate::diagnostics::{self};
use crate::error::{Error, Result};
use crate::reference;
use crate::scheme::{
    self, Domain, DtPolicy, ProblemSpec, RunResult, SchemeConfig, SnapshotCadence, SpaceFn,
};
use crate::switch::SwitchVariant;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// One source/initial-datum variant of a catalog entry.
#[derive(Debug, Clone)]
pub struct Variant {
    pub label: char,
    pub source: SpaceFn,
    pub initial_override: Option<SpaceFn>,
    /// Reference outer contact bound where one is published.
    pub expected_contact_bound: Option<f64>,
    pub note: &'static str,
}

/// A catalog problem with all its printed variants.
#[derive(Debug, Clone)]
pub struct TestCase {
    pub id: u8,
    pub name: &'static str,
    pub dimension: u8,
    pub domain: Domain,
    pub initial: SpaceFn,
    pub obstacle: SpaceFn,
    pub variants: Vec<Variant>,
    pub h1_violated: bool,
}

impl TestCase {
    pub fn variant(&self, label: char) -> Result<&Variant> {
        self.variants
            .iter()
            .find(|v| v.label == label)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("test {} has no variant '{label}'", self.id))
            })
    }

    pub fn problem(&self, label: char) -> Result<ProblemSpec> {
        let v = self.variant(label)?;
        Ok(ProblemSpec {
            domain: self.domain,
            initial: v.initial_override.unwrap_or(self.initial),
            obstacle: self.obstacle,
            source: v.source,
            h1_violated: self.h1_violated,
        })
    }
}

fn zero(_: f64, _: f64) -> f64 {
    0.0
}

const INTERVAL: Domain = Domain::Interval { a: -1.0, b: 1.0 };
const SQUARE: Domain = Domain::Rectangle {
    ax: -1.0,
    bx: 1.0,
    ay: -1.0,
    by: 1.0,
};
// the printed hills-and-valleys data only satisfies the boundary
// conditions on the larger square
const SQUARE2: Domain = Domain::Rectangle {
    ax: -2.0,
    bx: 2.0,
    ay: -2.0,
    by: 2.0,
};

/// Fetch a catalog entry by id (1..10).
pub fn catalog(id: u8) -> Result<TestCase> {
    let case = match id {
        1 => TestCase {
            id,
            name: "inverted parabola obstacle",
            dimension: 1,
            domain: INTERVAL,
            initial: |x, _| 0.7 - 0.7 * x * x,
            obstacle: |x, _| 0.5 - 2.0 * x * x,
            variants: vec![
                Variant {
                    label: 'a',
                    source: zero,
                    initial_override: None,
                    expected_contact_bound: Some(0.14),
                    note: "contact [-0.14, 0.14]",
                },
                Variant {
                    label: 'b',
                    source: |_, _| -1.5,
                    initial_override: None,
                    expected_contact_bound: Some(0.26),
                    note: "constant load widens the contact to [-0.26, 0.26]",
                },
            ],
            h1_violated: false,
        },
        2 => TestCase {
            id,
            name: "partially convex initial state",
            dimension: 1,
            domain: INTERVAL,
            initial: |x, _| 1.0 / (1.0 + 10.0 * x * x) - 1.0 / 11.0,
            obstacle: |x, _| 0.5 - 2.0 * x * x,
            variants: vec![Variant {
                label: 'a',
                source: zero,
                initial_override: None,
                expected_contact_bound: Some(0.14),
                note: "same stationary state as test 1, different transient",
            }],
            h1_violated: false,
        },
        3 => TestCase {
            id,
            name: "initial contact point at the origin",
            dimension: 1,
            domain: INTERVAL,
            initial: |x, _| (1.0 - x * x) * (1.0 + x * x).powi(3),
            obstacle: |x, _| 1.0 - 2.0 * x * x,
            variants: vec![Variant {
                label: 'a',
                source: zero,
                initial_override: None,
                expected_contact_bound: Some(0.30),
                note: "origin stays stuck under the exact switch",
            }],
            h1_violated: true,
        },
        4 => TestCase {
            id,
            name: "double hill with a valley",
            dimension: 1,
            domain: INTERVAL,
            initial: |x, _| 1.0 - x * x,
            obstacle: |x, _| 0.5 - (2.0 * x * x - 0.5) * (2.0 * x * x - 0.5),
            variants: vec![
                Variant {
                    label: 'a',
                    source: zero,
                    initial_override: None,
                    expected_contact_bound: Some(0.6054),
                    note: "disconnected contact (-b,-0.5) u (0.5,b)",
                },
                Variant {
                    label: 'b',
                    source: |_, _| -4.0,
                    initial_override: None,
                    expected_contact_bound: Some(0.66),
                    note: "load strong enough to fill the valley: (-0.66, 0.66)",
                },
                Variant {
                    label: 'c',
                    source: zero,
                    initial_override: Some(|x, _| {
                        let uc = 0.5 - (2.0 * x * x - 0.5) * (2.0 * x * x - 0.5);
                        (uc + 0.1).max(0.0)
                    }),
                    expected_contact_bound: Some(0.6054),
                    note: "start close to the obstacle; approach from below",
                },
            ],
            h1_violated: false,
        },
        5 => TestCase {
            id,
            name: "three peaks",
            dimension: 1,
            domain: INTERVAL,
            initial: |x, _| 1.6 - 1.6 * x * x,
            obstacle: |x, _| {
                (1.0 - 3.0 * x.abs())
                    .max(0.5 - 4.0 * (x + 0.7).abs())
                    .max(0.4 - 8.0 * (x - 0.8).abs())
            },
            variants: vec![Variant {
                label: 'a',
                source: |x, _| 3.0 * x,
                initial_override: None,
                expected_contact_bound: None,
                note: "contact set is three isolated points",
            }],
            h1_violated: false,
        },
        6 => TestCase {
            id,
            name: "discontinuous roof obstacle",
            dimension: 1,
            domain: INTERVAL,
            initial: |x, _| 2.0 - 2.0 * x * x,
            obstacle: |x, _| if x < 0.0 { x + 0.5 } else { 1.0 - x },
            variants: vec![Variant {
                label: 'a',
                source: zero,
                initial_override: None,
                expected_contact_bound: None,
                note: "contact fills [0, 1] (within tol off the kink)",
            }],
            h1_violated: false,
        },
        7 => TestCase {
            id,
            name: "reversed paraboloid",
            dimension: 2,
            domain: SQUARE,
            initial: |x, y| 2.0 * (1.0 - x * x) * (1.0 - y * y),
            obstacle: |x, y| 1.0 - 2.0 * (x * x + y * y),
            variants: vec![Variant {
                label: 'a',
                source: |_, _| -1.0,
                initial_override: None,
                expected_contact_bound: None,
                note: "contact set is a disk",
            }],
            h1_violated: false,
        },
        8 => TestCase {
            id,
            name: "volcano crater",
            dimension: 2,
            domain: SQUARE,
            initial: |x, y| 4.0 * (1.0 - x * x) * (1.0 - y * y),
            obstacle: |x, y| {
                let s = 3.5 * (x * x + y * y) - 2.0;
                1.0 - s * s
            },
            variants: vec![Variant {
                label: 'a',
                source: zero,
                initial_override: None,
                expected_contact_bound: None,
                note: "contact set is a circular crown",
            }],
            h1_violated: false,
        },
        9 => TestCase {
            id,
            name: "central pyramid",
            dimension: 2,
            domain: SQUARE,
            initial: |x, y| 2.0 * (2.0 - (x + y).abs() - (y - x).abs()),
            obstacle: |x, y| (2.0 - (x + y).abs() - (y - x).abs()) - 1.0,
            variants: vec![Variant {
                label: 'a',
                source: zero,
                initial_override: None,
                expected_contact_bound: None,
                note: "contact set is the two diagonals",
            }],
            h1_violated: false,
        },
        10 => TestCase {
            id,
            name: "hills and valleys",
            dimension: 2,
            domain: SQUARE2,
            initial: |x, y| (2.0 - 0.5 * x * x) * (2.0 - 0.5 * y * y),
            obstacle: |x, y| 1.0 + x * x + 2.0 * y * y - x.powi(4) - y.powi(4),
            variants: vec![
                Variant {
                    label: 'a',
                    source: zero,
                    initial_override: None,
                    expected_contact_bound: None,
                    note: "disconnected contact set",
                },
                Variant {
                    label: 'b',
                    source: |_, _| -2.0,
                    initial_override: None,
                    expected_contact_bound: None,
                    note: "connected contact set",
                },
            ],
            h1_violated: false,
        },
        _ => {
            return Err(Error::InvalidArgument(format!(
                "unknown test id {id} (valid: 1..10)"
            )))
        }
    };
    Ok(case)
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub test: u8,
    pub variant: char,
    pub switch: SwitchVariant,
    pub policy: DtPolicy,
    /// Default: 37.5 in 1D, 10.0 in 2D.
    pub gamma: Option<f64>,
    /// Total nodes per axis.
    pub nodes: usize,
    pub tol: f64,
    pub t_max: f64,
    pub compare: bool,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(test: u8, variant: char) -> ExperimentConfig {
        ExperimentConfig {
            test,
            variant,
            switch: SwitchVariant::Exact,
            policy: DtPolicy::Fixed,
            gamma: None,
            nodes: 101,
            tol: 1e-4,
            t_max: 10.0,
            compare: false,
            out: None,
        }
    }
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub scheme: RunResult,
    pub reference: Option<RunResult>,
    pub sup_distance: Option<f64>,
    /// Human-readable summary, one line per run.
    pub summary: String,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn summary_header() -> &'static str {
    "solver,switch,policy,gamma,nodes,tol,t_star,iterations,linear_solves,picard_total,contact_bound,termination,sup_distance\n"
}

fn summary_row(solver: &str, run: &RunResult, sup: Option<f64>) -> String {
    let m = &run.meta;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        solver,
        m.switch,
        m.policy.name(),
        m.gamma,
        m.nodes_per_axis,
        m.tol,
        run.exit_time,
        run.iterations,
        run.linear_solves,
        run.picard
            .as_ref()
            .map(|p| p.total_solves.to_string())
            .unwrap_or_default(),
        // an empty contact set reports NaN, not an empty cell
        run.contact.bound.unwrap_or(f64::NAN),
        run.termination,
        fmt_opt(sup),
    )
}

/// Execute one catalog experiment; optionally re-run the reference
/// solver over the identical step schedule and write CSV artifacts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let case = catalog(cfg.test)?;
    let spec = case.problem(cfg.variant)?;
    let p = spec.discretize(cfg.nodes)?;
    let gamma = cfg
        .gamma
        .unwrap_or(if case.dimension == 1 { 37.5 } else { 10.0 });
    let mut scfg = SchemeConfig::new(cfg.switch, gamma);
    scfg.policy = cfg.policy;
    scfg.tol = cfg.tol;
    scfg.t_max = cfg.t_max;
    scfg.cadence = if cfg.compare {
        SnapshotCadence::EveryStep
    } else {
        SnapshotCadence::Geometric
    };

    let run = scheme::run(&p, &scfg)?;
    let (reference, sup) = if cfg.compare {
        let r = reference::run_reference_replay(&p, &scfg, &run.dt_history())?;
        let d = diagnostics::sup_distance(&run, &r)?;
        (Some(r), Some(d))
    } else {
        (None, None)
    };

    let mut summary = String::new();
    let _ = write!(
        summary,
        "test {}{} ({}) | switch={} policy={} gamma={} nodes={} tol={} | T*={:.6} iterations={} solves={} contact_bound={} components={} | {}",
        case.id,
        cfg.variant,
        case.name,
        scfg.switch,
        scfg.policy.name(),
        gamma,
        cfg.nodes,
        cfg.tol,
        run.exit_time,
        run.iterations,
        run.linear_solves,
        run.contact
            .bound
            .map(|b| format!("{b:.4}"))
            .unwrap_or_else(|| "none".into()),
        run.contact.components,
        run.termination,
    );
    if let (Some(r), Some(d)) = (&reference, sup) {
        let _ = write!(
            summary,
            "\nreference | picard_total={} linear_solves={} | sup_distance={d:.6e}{}",
            r.picard.as_ref().map(|p| p.total_solves).unwrap_or(0),
            r.linear_solves,
            if case.dimension == 2 {
                " (2D reference comparison is experimental)"
            } else {
                ""
            },
        );
    }

    if let Some(dir) = &cfg.out {
        write_artifacts(dir, &run, reference.as_ref(), sup)?;
    }

    Ok(ExperimentOutcome {
        scheme: run,
        reference,
        sup_distance: sup,
        summary,
    })
}

fn write_artifacts(
    dir: &Path,
    run: &RunResult,
    reference: Option<&RunResult>,
    sup: Option<f64>,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut summary = String::from(summary_header());
    summary.push_str(&summary_row("scheme", run, sup));
    if let Some(r) = reference {
        summary.push_str(&summary_row("reference", r, sup));
    }
    fs::write(dir.join("summary.csv"), summary)?;

    let mut diag = Vec::new();
    diagnostics::write_diag_csv(run, &mut diag)?;
    fs::write(dir.join("diag.csv"), diag)?;

    let mut contact = Vec::new();
    run.contact
        .write_csv(run.final_field.grid(), &mut contact)?;
    fs::write(dir.join("contact.csv"), contact)?;

    for snap in &run.snapshots {
        let mut buf = Vec::new();
        snap.field.write_csv(&mut buf)?;
        fs::write(dir.join(format!("snap_{}.csv", snap.step)), buf)?;
    }
    Ok(())
}

/// One row of the performance sweep.
#[derive(Debug, Clone)]
pub struct Table1Row {
    pub switch: SwitchVariant,
    pub policy: DtPolicy,
    pub gamma: f64,
    pub t_star: f64,
    pub iterations: usize,
    pub c_bound: f64,
    pub sup_distance: f64,
    pub reference_solves: usize,
}

/// The twelve printed sweep configurations, in table order.
pub fn table1_configs() -> Vec<(SwitchVariant, DtPolicy, f64)> {
    use DtPolicy as P;
    use SwitchVariant as S;
    vec![
        (S::Exact, P::Fixed, 375.0),
        (S::Exact, P::adaptive(), 375.0),
        (S::Exact, P::Fixed, 187.5),
        (S::Smoothed { n: 20 }, P::Fixed, 187.5),
        (S::Exact, P::adaptive(), 187.5),
        (S::Exact, P::Fixed, 150.0),
        (S::Exact, P::Fixed, 75.0),
        (S::Smoothed { n: 50 }, P::Fixed, 75.0),
        (S::Exact, P::adaptive(), 75.0),
        (S::Exact, P::Fixed, 37.5),
        (S::Exact, P::Fixed, 18.75),
        (S::Exact, P::Fixed, 9.37),
    ]
}

/// Run the full sweep on the first catalog problem (zero source,
/// 101 nodes) and render the comparison table as CSV.
pub fn table1_sweep() -> Result<(String, Vec<Table1Row>)> {
    let configs = table1_configs();
    let mut slots: Vec<Option<Result<Table1Row>>> = (0..configs.len()).map(|_| None).collect();

    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (i, (sw, pol, gamma)) in configs.iter().enumerate() {
            handles.push((
                i,
                scope.spawn(move || -> Result<Table1Row> {
                    let mut cfg = ExperimentConfig::new(1, 'a');
                    cfg.switch = *sw;
                    cfg.policy = *pol;
                    cfg.gamma = Some(*gamma);
                    cfg.compare = true;
                    let out = run_experiment(&cfg)?;
                    Ok(Table1Row {
                        switch: *sw,
                        policy: *pol,
                        gamma: *gamma,
                        t_star: out.scheme.exit_time,
                        iterations: out.scheme.iterations,
                        c_bound: out.scheme.contact.bound.unwrap_or(f64::NAN),
                        sup_distance: out.sup_distance.unwrap_or(f64::NAN),
                        reference_solves: out
                            .reference
                            .as_ref()
                            .and_then(|r| r.picard.as_ref())
                            .map(|p| p.total_solves)
                            .unwrap_or(0),
                    })
                }),
            ));
        }
        for (i, h) in handles {
            slots[i] = Some(h.join().expect("sweep worker panicked"));
        }
    });

    let mut rows = Vec::with_capacity(configs.len());
    for slot in slots {
        rows.push(slot.expect("sweep slot missing")?);
    }
    let mut csv = String::from("switch,policy,gamma,t_star,iterations,c_bound,sup_distance\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.switch,
            r.policy.name(),
            r.gamma,
            r.t_star,
            r.iterations,
            r.c_bound,
            r.sup_distance
        );
    }
    Ok((csv, rows))
}
