//! Solvers for a degenerate diffusion equation whose diffusion switches
//! off where the solution meets a prescribed obstacle, together with a
//! projected-iteration solver for the equivalent parabolic obstacle
//! problem, diagnostics, and a catalog of benchmark experiments.
//!
//! The switched scheme treats diffusion implicitly with the switch
//! frozen at the previous time level, then projects onto the obstacle;
//! the obstacle-problem solver steps the complementarity system by a
//! piecewise-linear active-set iteration. Both share one driver loop and
//! one stationarity criterion, so their trajectories can be compared
//! snapshot by snapshot.

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod linsolve;
pub mod reference;
pub mod scheme;
pub mod switch;

pub use error::{Error, Result};
pub use grid::{build_grid_1d, build_grid_2d, laplacian, sample, Field, Grid};
pub use scheme::{
    run, DiscreteProblem, Domain, DtPolicy, ProblemSpec, RunResult, SchemeConfig, SnapshotCadence,
    Termination,
};
pub use switch::SwitchVariant;
