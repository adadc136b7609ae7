//! Turning a validated config into solver inputs, running it, and writing
//! the CSV outputs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use jkoflow::profiles::{ch_initial_mean, ch_log_initial, mollified_droplets, random_field, Disk};
use jkoflow::stepper::{integrate, Snapshot};
use jkoflow::{DiagnosticsRow, EnergySpec, Field, Grid, Mobility, Potential, SbpConfig, TimeConfig, Trajectory};

use crate::config::{ExperimentConfig, InitialCondition, PotentialConfig};
use crate::error::{CliError, Result};

pub const DIAGNOSTICS_HEADER: [&str; 8] = [
    "step",
    "time",
    "energy",
    "mass",
    "rho_min",
    "rho_max",
    "inner_iters",
    "constraint_norm",
];

/// Everything the stepper needs, built from a config.
#[derive(Clone, Debug)]
pub struct Setup {
    pub grid: Grid,
    pub rho0: Field,
    pub energy: EnergySpec,
    pub mobility: Mobility,
    pub params: jkoflow::SolverParams,
    pub time: TimeConfig,
    pub sbp: Option<SbpConfig>,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = cfg.grid.build()?;
        let mobility = Mobility::new(cfg.mobility.alpha, cfg.mobility.beta)?;
        let energy = energy_spec(cfg, &grid)?;
        let rho0 = initial_field(cfg, &grid)?;
        Ok(Self {
            grid,
            rho0,
            energy,
            mobility,
            params: cfg.solver.params(),
            time: TimeConfig {
                tau: cfg.time.tau,
                t_final: cfg.time.t_final,
                save_every: cfg.time.save_every,
            },
            sbp: cfg.sbp.map(|s| SbpConfig {
                eta0: s.eta0,
                adaptive: s.adaptive,
            }),
        })
    }

    pub fn run(&self, on_step: &mut dyn FnMut(&DiagnosticsRow)) -> Result<Trajectory> {
        Ok(integrate(
            &self.rho0,
            self.time,
            &self.energy,
            self.mobility,
            &self.params,
            self.sbp,
            on_step,
        )?)
    }
}

fn energy_spec(cfg: &ExperimentConfig, grid: &Grid) -> Result<EnergySpec> {
    let e = &cfg.energy;
    let (potential, confinement) = match e.potential {
        PotentialConfig::Gl => (Potential::GinzburgLandau, None),
        PotentialConfig::Log { theta, theta_c } => (Potential::Logarithmic { theta, theta_c }, None),
        PotentialConfig::Entropy { diffusion, confinement } => {
            (Potential::EntropyConfinement { diffusion }, Some(confinement))
        }
    };
    let mut spec = EnergySpec::new(potential, e.epsilon)?;
    if let Some(c) = confinement {
        spec = spec.with_external(Field::from_fn(*grid, |x, y| 0.5 * c * (x * x + y * y)));
    }
    if let Some(bw) = e.beta_w {
        spec = spec.with_wall(bw)?;
    }
    Ok(spec)
}

fn initial_field(cfg: &ExperimentConfig, grid: &Grid) -> Result<Field> {
    let field = match &cfg.initial {
        InitialCondition::Uniform { value } => Field::constant(*grid, *value),
        InitialCondition::ChBump => {
            let (eps, h) = (cfg.energy.epsilon, grid.dx());
            Field::from_fn(*grid, |x, _| ch_initial_mean(x - 0.5 * h, x + 0.5 * h, eps))
        }
        InitialCondition::ChTwoInterface => Field::from_fn(*grid, |x, _| ch_log_initial(x)),
        InitialCondition::Random { center, halfwidth } => {
            let seed = cfg.seed.ok_or_else(|| CliError::invalid("seed", "randomized initial data needs --seed"))?;
            random_field(grid, *center, *halfwidth, seed)?
        }
        InitialCondition::Droplets { disks } => {
            let disks: Vec<Disk> = disks.iter().map(|d| Disk::new(d[0], d[1], d[2])).collect();
            mollified_droplets(grid, &disks, cfg.energy.epsilon)?
        }
    };
    Ok(field)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn comment_line(w: &mut impl Write, cfg: &ExperimentConfig, path: &Path) -> Result<()> {
    writeln!(w, "# {}", cfg.to_json()).map_err(|e| CliError::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::io(path, std::io::Error::other(e))
}

fn row_fields(r: &DiagnosticsRow) -> [String; 8] {
    [
        r.step.to_string(),
        r.time.to_string(),
        r.energy.to_string(),
        r.mass.to_string(),
        r.rho_min.to_string(),
        r.rho_max.to_string(),
        r.inner_iters.to_string(),
        r.constraint_norm.to_string(),
    ]
}

pub fn write_snapshot(dir: &Path, cfg: &ExperimentConfig, snap: &Snapshot) -> Result<()> {
    let path = dir.join(format!("snap_{}.csv", snap.step));
    let mut file = create(&path)?;
    comment_line(&mut file, cfg, &path)?;
    let mut w = csv::Writer::from_writer(file);
    let grid = snap.rho.grid();
    let two_d = grid.is_2d();
    let header: &[&str] = if two_d { &["x", "y", "rho"] } else { &["x", "rho"] };
    w.write_record(header).map_err(|e| csv_err(&path, e))?;
    for (k, v) in snap.rho.values().iter().enumerate() {
        let (x, y) = grid.center(k);
        let rec = if two_d {
            vec![x.to_string(), y.to_string(), v.to_string()]
        } else {
            vec![x.to_string(), v.to_string()]
        };
        w.write_record(&rec).map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))
}

/// Summary of a finished (or failed) run.
#[derive(Debug)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub unconverged_steps: usize,
}

/// Runs `cfg` and writes `diagnostics.csv` plus one `snap_<step>.csv` per
/// saved step into `cfg.out`. Outputs are kept when the solver fails; the
/// failure is then returned as the error.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let setup = Setup::new(cfg)?;
    let dir = cfg.out.as_path();
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;

    let diag_path = dir.join("diagnostics.csv");
    let mut file = create(&diag_path)?;
    comment_line(&mut file, cfg, &diag_path)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(DIAGNOSTICS_HEADER).map_err(|e| csv_err(&diag_path, e))?;
    let mut write_err = None;
    let trajectory = setup.run(&mut |row| {
        if write_err.is_none() {
            write_err = w.write_record(row_fields(row)).err();
        }
    })?;
    if let Some(e) = write_err {
        return Err(csv_err(&diag_path, e));
    }
    w.flush().map_err(|e| CliError::io(&diag_path, e))?;

    for snap in &trajectory.snapshots {
        write_snapshot(dir, cfg, snap)?;
    }
    let unconverged_steps = trajectory.diagnostics.iter().filter(|r| !r.converged).count();
    if let Some(e) = &trajectory.failure {
        return Err(CliError::Solver(e.clone()));
    }
    Ok(RunOutcome {
        trajectory,
        unconverged_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::preset;

    #[test]
    fn bump_cells_carry_the_exact_mass() {
        let cfg = preset("ch1d-converge").unwrap();
        let setup = Setup::new(&cfg).unwrap();
        let eps = cfg.energy.epsilon;
        assert!((setup.rho0.integral() - (-1.0 + 2.0 * eps)).abs() < 1e-13);
    }

    #[test]
    fn saturation_energy_has_the_confinement() {
        let cfg = preset("saturation1d-small").unwrap();
        let setup = Setup::new(&cfg).unwrap();
        let v = setup.energy.external().unwrap();
        let x = setup.grid.x_center(0);
        assert!((v.values()[0] - 0.5 * x * x).abs() < 1e-14);
        assert!((setup.rho0.integral() - 3.32).abs() < 1e-12);
    }

    #[test]
    fn random_init_requires_a_seed() {
        let mut cfg = preset("ch2d-separation-small").unwrap();
        assert!(Setup::new(&cfg).is_err());
        cfg.seed = Some(3);
        let a = Setup::new(&cfg).unwrap().rho0;
        let b = Setup::new(&cfg).unwrap().rho0;
        assert_eq!(a, b);
    }
}
