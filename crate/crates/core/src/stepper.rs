//! Outer JKO time loop and its Schrödinger-bridge regularised variant.

use crate::error::{invalid, Error, Result};
use crate::grid::{ConstraintOperator, Field};
use crate::optimizer::{solve_problem, InnerProblem, SolverParams};
use crate::physics::{energy, EnergySpec};
use crate::transport::Mobility;

/// One line of `diagnostics.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRow {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
    pub mass: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub inner_iters: usize,
    pub constraint_norm: f64,
    /// False when the inner solver hit its iteration cap.
    pub converged: bool,
}

impl DiagnosticsRow {
    fn new(step: usize, time: f64, rho: &Field, spec: &EnergySpec) -> Result<Self> {
        Ok(Self {
            step,
            time,
            energy: energy(rho, spec)?,
            mass: rho.integral(),
            rho_min: rho.min(),
            rho_max: rho.max(),
            inner_iters: 0,
            constraint_norm: 0.0,
            converged: true,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub rho: Field,
}

/// Result of a run. On an inner-solver failure the trajectory holds every
/// completed step and `failure` carries the error.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub diagnostics: Vec<DiagnosticsRow>,
    pub snapshots: Vec<Snapshot>,
    pub failure: Option<Error>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.diagnostics.iter().map(|r| r.time).collect()
    }

    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory always holds the initial snapshot")
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }
}

/// Time-stepping controls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeConfig {
    pub tau: f64,
    pub t_final: f64,
    pub save_every: usize,
}

impl TimeConfig {
    pub fn steps(&self) -> usize {
        (self.t_final / self.tau - 1e-9).ceil().max(0.0) as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(invalid("tau", format!("must be positive, got {}", self.tau)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(invalid("t_final", format!("must be positive, got {}", self.t_final)));
        }
        if self.save_every == 0 {
            return Err(invalid("save_every", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SbpConfig {
    pub eta0: f64,
    pub adaptive: bool,
}

impl Default for SbpConfig {
    fn default() -> Self {
        Self {
            eta0: 80.0,
            adaptive: true,
        }
    }
}

impl SbpConfig {
    /// `max(eta0, 1/(1 - |rho|_inf))` when adaptive; infinite once the
    /// density touches 1.
    pub fn eta_for(&self, rho: &Field) -> f64 {
        if !self.adaptive {
            return self.eta0;
        }
        let sup = rho.sup_norm();
        if sup >= 1.0 {
            f64::INFINITY
        } else {
            self.eta0.max(1.0 / (1.0 - sup))
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0) {
            return Err(invalid("eta0", format!("must be positive, got {}", self.eta0)));
        }
        Ok(())
    }
}

/// Plain JKO run.
pub fn run(
    rho0: &Field,
    time: TimeConfig,
    energy: &EnergySpec,
    mob: Mobility,
    params: &SolverParams,
) -> Result<Trajectory> {
    integrate(rho0, time, energy, mob, params, None, &mut |_| {})
}

/// Schrödinger-bridge regularised run.
pub fn run_sbp(
    rho0: &Field,
    time: TimeConfig,
    energy: &EnergySpec,
    mob: Mobility,
    params: &SolverParams,
    sbp: SbpConfig,
) -> Result<Trajectory> {
    integrate(rho0, time, energy, mob, params, Some(sbp), &mut |_| {})
}

/// Shared time loop; `on_step` sees every diagnostics row as it is produced.
pub fn integrate(
    rho0: &Field,
    time: TimeConfig,
    spec: &EnergySpec,
    mob: Mobility,
    params: &SolverParams,
    sbp: Option<SbpConfig>,
    on_step: &mut dyn FnMut(&DiagnosticsRow),
) -> Result<Trajectory> {
    time.validate()?;
    params.validate()?;
    if let Some(s) = &sbp {
        s.validate()?;
    }
    let grid = *rho0.grid();
    spec.check(&grid)?;
    if rho0.min() < mob.alpha() - 1e-12 || rho0.max() > mob.beta() + 1e-12 {
        return Err(invalid(
            "rho0",
            format!("initial density leaves [{}, {}]", mob.alpha(), mob.beta()),
        ));
    }

    let steps = time.steps();
    let mut rho = rho0.clone();
    let first = DiagnosticsRow::new(0, 0.0, &rho, spec)?;
    on_step(&first);
    let mut traj = Trajectory {
        diagnostics: vec![first],
        snapshots: vec![Snapshot {
            step: 0,
            time: 0.0,
            rho: rho.clone(),
        }],
        failure: None,
    };

    let mut op = ConstraintOperator::new(grid);
    let mut dual: Option<Field> = None;
    for step in 1..=steps {
        let mut weight = 0.0;
        if let Some(s) = &sbp {
            let eta = s.eta_for(&rho);
            let diffusion = if eta.is_finite() { time.tau / eta } else { 0.0 };
            weight = if eta.is_finite() { 1.0 / eta } else { 0.0 };
            if diffusion != op.diffusion() {
                op = ConstraintOperator::with_diffusion(grid, diffusion)?;
            }
        }
        let problem = InnerProblem {
            rho_k: &rho,
            energy: spec,
            mobility: mob,
            tau: time.tau,
            constraint: &op,
            entropy_weight: weight,
            dual_guess: if params.warm_start { dual.as_ref() } else { None },
        };
        let sol = match solve_problem(&problem, params) {
            Ok(sol) => sol,
            Err(e) => {
                traj.failure = Some(e);
                break;
            }
        };
        rho = sol.state.rho_field();
        dual = Some(sol.dual);
        let t = step as f64 * time.tau;
        let mut row = DiagnosticsRow::new(step, t, &rho, spec)?;
        row.inner_iters = sol.stats.iters;
        row.constraint_norm = sol.stats.constraint_norm();
        row.converged = sol.stats.converged;
        on_step(&row);
        traj.diagnostics.push(row);
        if step % time.save_every == 0 || step == steps {
            traj.snapshots.push(Snapshot {
                step,
                time: t,
                rho: rho.clone(),
            });
        }
    }
    if traj.failure.is_some() {
        let last = traj.diagnostics.last().expect("initial row").step;
        if traj.snapshots.last().map(|s| s.step) != Some(last) {
            traj.snapshots.push(Snapshot {
                step: last,
                time: last as f64 * time.tau,
                rho,
            });
        }
    }
    Ok(traj)
}
