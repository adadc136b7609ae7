//! Bound-preserving JKO solver for continuity equations with a saturating
//! mobility.

pub mod error;
pub mod grid;
pub mod optimizer;
pub mod physics;
pub mod profiles;
pub mod stepper;
pub mod transport;

pub use error::{Error, Result};
pub use grid::{ConstraintOperator, Field, Grid, SpectralEstimate, State};
pub use optimizer::{solve_inner, IterationStats, SigmaRule, SolverParams, Variant};
pub use physics::{EnergySpec, Potential};
pub use stepper::{run, run_sbp, DiagnosticsRow, SbpConfig, TimeConfig, Trajectory};
pub use transport::{Mobility, ProxCase, ProxResult};
