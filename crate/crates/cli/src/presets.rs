//! Named experiment setups. Each has a `-small` variant sized for a desk
//! run (at most 64x64 cells or a shortened horizon).

use std::f64::consts::PI;
use std::path::PathBuf;

use crate::config::{
    EnergyConfig, ExperimentConfig, GridConfig, InitialCondition, MobilityConfig, PotentialConfig, SbpSection,
    SolverConfig, TimeSection, VariantName,
};
use crate::error::{CliError, Result};

pub const PRESETS: [&str; 9] = [
    "saturation1d",
    "ch1d-converge",
    "ch1d-log",
    "ch1d-separation",
    "ch2d-converge",
    "ch2d-separation",
    "droplet-angles",
    "droplet-pair",
    "droplet-sizes",
];

/// Every full preset followed by its `-small` variant.
pub fn preset_names() -> Vec<String> {
    PRESETS
        .iter()
        .flat_map(|p| [p.to_string(), format!("{p}-small")])
        .collect()
}

pub fn small_preset_names() -> Vec<String> {
    PRESETS.iter().map(|p| format!("{p}-small")).collect()
}

fn grid_1d(nx: usize, a: f64, b: f64) -> GridConfig {
    GridConfig {
        nx,
        x_range: [a, b],
        ny: None,
        y_range: None,
    }
}

fn grid_2d(nx: usize, ny: usize, x: [f64; 2], y: [f64; 2]) -> GridConfig {
    GridConfig {
        nx,
        x_range: x,
        ny: Some(ny),
        y_range: Some(y),
    }
}

fn solver(lambda: f64, max_iters: usize) -> SolverConfig {
    SolverConfig {
        variant: VariantName::Prepd3o,
        lambda,
        sigma_factor: 0.99,
        sigma: None,
        delta: None,
        tol: 1e-5,
        max_iters,
        warm_start: true,
    }
}

fn time(tau: f64, t_final: f64, save_every: usize) -> TimeSection {
    TimeSection {
        tau,
        t_final,
        save_every,
    }
}

const PHASE: MobilityConfig = MobilityConfig { alpha: -1.0, beta: 1.0 };
const LOG_CONVERGE: PotentialConfig = PotentialConfig::Log { theta: 0.0, theta_c: 1.0 };
const LOG_MIXING: PotentialConfig = PotentialConfig::Log { theta: 0.3, theta_c: 1.0 };

fn energy(potential: PotentialConfig, epsilon: f64, beta_w: Option<f64>) -> EnergyConfig {
    EnergyConfig {
        potential,
        epsilon,
        beta_w,
    }
}

fn full(name: &str) -> Option<ExperimentConfig> {
    let base = |grid, energy, mobility, solver, time, initial| ExperimentConfig {
        preset: name.to_string(),
        seed: None,
        out: PathBuf::from("out").join(name),
        grid,
        energy,
        mobility,
        solver,
        time,
        sbp: None,
        initial,
    };
    let cfg = match name {
        "saturation1d" => base(
            grid_1d(200, -4.0, 4.0),
            energy(
                PotentialConfig::Entropy {
                    diffusion: 1.0,
                    confinement: 1.0,
                },
                0.0,
                None,
            ),
            MobilityConfig { alpha: 0.0, beta: 1.0 },
            solver(0.1, 100_000),
            time(0.01, 15.0, 100),
            InitialCondition::Uniform { value: 3.32 / 8.0 },
        ),
        "ch1d-converge" => {
            let mut s = solver(1.0, 100_000);
            // Mass drifts by up to delta per step; the default would swamp
            // the spatial error over a thousand steps.
            s.delta = Some(1e-9);
            base(
                grid_1d(50, 0.0, 1.0),
                energy(LOG_CONVERGE, 0.1, None),
                PHASE,
                s,
                time(1e-3, 1.0, 100),
                InitialCondition::ChBump,
            )
        }
        "ch1d-log" => base(
            grid_1d(80, 0.0, 1.0),
            energy(LOG_MIXING, 1e-3f64.sqrt(), None),
            PHASE,
            solver(0.1, 100_000),
            time(0.1, 10.0, 10),
            InitialCondition::ChTwoInterface,
        ),
        "ch1d-separation" => base(
            grid_1d(200, -40.0, 40.0),
            energy(LOG_MIXING, 1.0, None),
            PHASE,
            solver(1.0, 100_000),
            time(0.01, 100.0, 500),
            InitialCondition::Random {
                center: 0.0,
                halfwidth: 0.5,
            },
        ),
        "ch2d-converge" => {
            let mut s = solver(1.0, 100_000);
            s.delta = Some(1e-9);
            base(
                grid_2d(80, 80, [0.0, 1.0], [0.0, 1.0]),
                energy(LOG_CONVERGE, 0.1, None),
                PHASE,
                s,
                time(0.01, 1.0, 10),
                InitialCondition::ChBump,
            )
        }
        "ch2d-separation" => base(
            grid_2d(64, 64, [0.0, 1.0], [0.0, 1.0]),
            energy(PotentialConfig::Gl, 0.018, None),
            PHASE,
            solver(20.0, 100_000),
            time(1e-3, 1.0, 100),
            InitialCondition::Random {
                center: -0.4,
                halfwidth: 0.1,
            },
        ),
        "droplet-angles" => base(
            grid_2d(256, 256, [-0.5, 0.5], [0.0, 1.0]),
            energy(PotentialConfig::Gl, 0.012, Some(PI / 3.0)),
            PHASE,
            solver(0.5, 100_000),
            time(0.01, 0.1, 1),
            InitialCondition::Droplets {
                disks: vec![[0.0, 0.0, 0.25]],
            },
        ),
        "droplet-pair" => base(
            grid_2d(256, 64, [-1.0, 1.0], [0.0, 0.5]),
            energy(PotentialConfig::Gl, 0.005, Some(PI / 4.0)),
            PHASE,
            solver(10.0, 100_000),
            time(0.005, 2.0, 40),
            InitialCondition::Droplets {
                disks: vec![[-0.35, 0.0, 0.3], [0.35, 0.0, 0.3]],
            },
        ),
        "droplet-sizes" => base(
            grid_2d(256, 96, [-1.0, 1.0], [0.0, 0.75]),
            energy(PotentialConfig::Gl, 0.02, Some(3.0 * PI / 4.0)),
            PHASE,
            solver(0.1, 100_000),
            time(0.1, 20.0, 10),
            InitialCondition::Droplets {
                disks: vec![[-0.35, 0.0, 0.35], [0.4, 0.0, 0.2]],
            },
        ),
        _ => return None,
    };
    Some(cfg)
}

fn shrink(mut cfg: ExperimentConfig) -> ExperimentConfig {
    let name = format!("{}-small", cfg.preset);
    cfg.out = PathBuf::from("out").join(&name);
    match cfg.preset.as_str() {
        "saturation1d" => {
            cfg.grid.nx = 100;
            cfg.time = time(0.01, 1.0, 25);
        }
        "ch1d-converge" => {
            cfg.grid.nx = 24;
            cfg.time = time(1e-3, 0.05, 10);
        }
        "ch1d-log" => cfg.time = time(0.1, 1.0, 2),
        "ch1d-separation" => {
            cfg.grid = grid_1d(100, -20.0, 20.0);
            cfg.time = time(0.01, 0.5, 10);
        }
        "ch2d-converge" => {
            cfg.grid = grid_2d(20, 20, [0.0, 1.0], [0.0, 1.0]);
            cfg.time = time(0.01, 0.1, 2);
        }
        "ch2d-separation" => {
            cfg.grid = grid_2d(32, 32, [0.0, 1.0], [0.0, 1.0]);
            cfg.time = time(1e-3, 0.01, 2);
        }
        "droplet-angles" => {
            cfg.grid = grid_2d(32, 32, [-0.5, 0.5], [0.0, 1.0]);
            cfg.energy.epsilon = 0.04;
            cfg.time = time(0.01, 0.05, 1);
        }
        "droplet-pair" => {
            cfg.grid = grid_2d(64, 16, [-1.0, 1.0], [0.0, 0.5]);
            cfg.energy.epsilon = 0.03;
            cfg.time = time(0.005, 0.05, 2);
        }
        "droplet-sizes" => {
            cfg.grid = grid_2d(64, 24, [-1.0, 1.0], [0.0, 0.75]);
            cfg.energy.epsilon = 0.04;
            cfg.time = time(0.1, 0.5, 1);
        }
        _ => unreachable!("every full preset has a small variant"),
    }
    cfg.preset = name;
    cfg
}

/// Looks up a preset by name, including `-small` variants.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let found = match name.strip_suffix("-small") {
        Some(stem) => full(stem).map(shrink),
        None => full(name),
    };
    found.ok_or_else(|| CliError::UnknownPreset {
        name: name.to_string(),
        available: preset_names().join(", "),
    })
}

/// The SBP block switched on by `--sbp`.
pub fn default_sbp() -> SbpSection {
    SbpSection::default()
}

/// Presets whose steady state is known in closed form.
pub fn has_analytic_steady_state(name: &str) -> bool {
    matches!(name.trim_end_matches("-small"), "ch1d-converge" | "ch2d-converge")
}
