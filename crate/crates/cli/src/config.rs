//! Experiment configuration: a TOML document mirroring the run parameters.
//! Presets provide complete documents; files and flags override keys.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub grid: GridConfig,
    pub energy: EnergyConfig,
    pub mobility: MobilityConfig,
    pub solver: SolverConfig,
    pub time: TimeSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sbp: Option<SbpSection>,
    pub initial: InitialCondition,
}

/// One-dimensional when `ny` and `y_range` are both absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub x_range: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_range: Option<[f64; 2]>,
}

impl GridConfig {
    pub fn is_2d(&self) -> bool {
        self.ny.is_some() || self.y_range.is_some()
    }

    pub fn dx(&self) -> f64 {
        (self.x_range[1] - self.x_range[0]) / self.nx as f64
    }

    /// Refines to spacing `dx` in every direction.
    pub fn set_spacing(&mut self, dx: f64) -> Result<()> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(CliError::invalid("dx", format!("must be positive, got {dx}")));
        }
        let count = |range: [f64; 2]| -> Result<usize> {
            let len = range[1] - range[0];
            let n = (len / dx).round();
            if n < 1.0 || (n * dx - len).abs() > 1e-9 * len.abs().max(1.0) {
                return Err(CliError::invalid(
                    "dx",
                    format!("{dx} does not divide the interval [{}, {}]", range[0], range[1]),
                ));
            }
            Ok(n as usize)
        };
        self.nx = count(self.x_range)?;
        if let Some(yr) = self.y_range {
            self.ny = Some(count(yr)?);
        }
        Ok(())
    }

    pub fn build(&self) -> Result<jkoflow::Grid> {
        let grid = match (self.ny, self.y_range) {
            (None, None) => jkoflow::Grid::new_1d(self.nx, self.x_range[0], self.x_range[1]),
            (Some(ny), Some(yr)) => jkoflow::Grid::new_2d(
                self.nx,
                ny,
                (self.x_range[0], self.x_range[1]),
                (yr[0], yr[1]),
            ),
            _ => unreachable!("validated"),
        };
        Ok(grid?)
    }

    fn validate(&self) -> Result<()> {
        let range = |key: &str, r: [f64; 2]| {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1]) {
                return Err(CliError::invalid(key, format!("needs finite lo < hi, got {r:?}")));
            }
            Ok(())
        };
        range("grid.x_range", self.x_range)?;
        if self.nx < 2 {
            return Err(CliError::invalid("grid.nx", "needs at least 2 cells"));
        }
        match (self.ny, self.y_range) {
            (None, None) => {}
            (Some(ny), Some(yr)) => {
                range("grid.y_range", yr)?;
                if ny < 2 {
                    return Err(CliError::invalid("grid.ny", "needs at least 2 cells"));
                }
            }
            (Some(_), None) => return Err(CliError::invalid("grid.y_range", "required when grid.ny is set")),
            (None, Some(_)) => return Err(CliError::invalid("grid.ny", "required when grid.y_range is set")),
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialConfig {
    /// Double well `(rho^2 - 1)^2 / 4`.
    Gl,
    Log {
        theta: f64,
        theta_c: f64,
    },
    /// `D rho (ln rho - 1)` plus the confinement `C |x|^2 / 2`.
    Entropy {
        diffusion: f64,
        confinement: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    pub potential: PotentialConfig,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_w: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityConfig {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VariantName {
    Pd3o,
    Prepd3o,
}

impl From<VariantName> for jkoflow::Variant {
    fn from(v: VariantName) -> Self {
        match v {
            VariantName::Pd3o => jkoflow::Variant::Pd3o,
            VariantName::Prepd3o => jkoflow::Variant::PrePd3o,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub variant: VariantName,
    pub lambda: f64,
    /// `sigma = sigma_factor / (lambda * lambda_max)` unless `sigma` is set.
    pub sigma_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Defaults to `1e-5 sqrt(|Omega|)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub tol: f64,
    pub max_iters: usize,
    #[serde(default)]
    pub warm_start: bool,
}

impl SolverConfig {
    pub fn params(&self) -> jkoflow::SolverParams {
        jkoflow::SolverParams {
            lambda: self.lambda,
            sigma: match self.sigma {
                Some(s) => jkoflow::SigmaRule::Explicit(s),
                None => jkoflow::SigmaRule::Factor(self.sigma_factor),
            },
            delta: self.delta,
            tol: self.tol,
            max_iters: self.max_iters,
            variant: self.variant.into(),
            record_history: false,
            warm_start: self.warm_start,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub tau: f64,
    pub t_final: f64,
    pub save_every: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbpSection {
    pub eta0: f64,
    pub adaptive: bool,
}

impl Default for SbpSection {
    fn default() -> Self {
        let d = jkoflow::SbpConfig::default();
        Self {
            eta0: d.eta0,
            adaptive: d.adaptive,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    Uniform {
        value: f64,
    },
    /// Cell averages of the cosine bump centred at `x = 1/2` (a stripe in 2D).
    ChBump,
    /// Two-interface piecewise-linear datum on `[0, 1]`.
    ChTwoInterface,
    /// i.i.d. uniform samples in `center +- halfwidth`; needs a seed.
    Random {
        center: f64,
        halfwidth: f64,
    },
    /// Mollified union of disks `[cx, cy, radius]`.
    Droplets {
        disks: Vec<[f64; 3]>,
    },
}

impl InitialCondition {
    pub fn needs_seed(&self) -> bool {
        matches!(self, InitialCondition::Random { .. })
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::invalid(key, format!("must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    /// Schema-level checks; nothing is allocated before this passes.
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let two_d = self.grid.is_2d();

        let MobilityConfig { alpha, beta } = self.mobility;
        if !(alpha.is_finite() && beta.is_finite() && alpha < beta) {
            return Err(CliError::invalid("mobility", format!("needs finite alpha < beta, got ({alpha}, {beta})")));
        }

        let e = &self.energy;
        if !(e.epsilon >= 0.0 && e.epsilon.is_finite()) {
            return Err(CliError::invalid("energy.epsilon", format!("must be >= 0, got {}", e.epsilon)));
        }
        match e.potential {
            PotentialConfig::Gl => {}
            PotentialConfig::Log { theta, theta_c } => {
                if !(theta >= 0.0 && theta.is_finite()) {
                    return Err(CliError::invalid("energy.potential.theta", format!("must be >= 0, got {theta}")));
                }
                positive("energy.potential.theta_c", theta_c)?;
            }
            PotentialConfig::Entropy { diffusion, confinement } => {
                positive("energy.potential.diffusion", diffusion)?;
                if !(confinement >= 0.0 && confinement.is_finite()) {
                    return Err(CliError::invalid(
                        "energy.potential.confinement",
                        format!("must be >= 0, got {confinement}"),
                    ));
                }
                if alpha < 0.0 {
                    return Err(CliError::invalid("mobility.alpha", "the entropy potential needs alpha >= 0"));
                }
            }
        }
        if let Some(bw) = e.beta_w {
            if !(bw > 0.0 && bw < PI) {
                return Err(CliError::invalid("energy.beta_w", format!("must lie in (0, pi), got {bw}")));
            }
            if !two_d {
                return Err(CliError::invalid("energy.beta_w", "the wall needs a 2D grid"));
            }
            if e.epsilon <= 0.0 {
                return Err(CliError::invalid("energy.beta_w", "the wall needs epsilon > 0"));
            }
        }

        let s = &self.solver;
        positive("solver.lambda", s.lambda)?;
        if !(s.sigma_factor > 0.0 && s.sigma_factor < 1.0) {
            return Err(CliError::invalid("solver.sigma_factor", format!("must lie in (0, 1), got {}", s.sigma_factor)));
        }
        if let Some(sigma) = s.sigma {
            positive("solver.sigma", sigma)?;
        }
        if let Some(d) = s.delta {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(CliError::invalid("solver.delta", format!("must be >= 0, got {d}")));
            }
        }
        positive("solver.tol", s.tol)?;
        if s.max_iters == 0 {
            return Err(CliError::invalid("solver.max_iters", "must be at least 1"));
        }

        positive("time.tau", self.time.tau)?;
        positive("time.t_final", self.time.t_final)?;
        if self.time.save_every == 0 {
            return Err(CliError::invalid("time.save_every", "must be at least 1"));
        }
        if let Some(sbp) = &self.sbp {
            positive("sbp.eta0", sbp.eta0)?;
        }

        let inside = |v: f64| v >= alpha && v <= beta;
        match &self.initial {
            InitialCondition::Uniform { value } => {
                if !inside(*value) {
                    return Err(CliError::invalid("initial.value", format!("{value} lies outside [{alpha}, {beta}]")));
                }
            }
            InitialCondition::ChBump | InitialCondition::ChTwoInterface => {
                if alpha > -1.0 || beta < 1.0 {
                    return Err(CliError::invalid("initial.kind", "needs mobility bounds containing [-1, 1]"));
                }
            }
            InitialCondition::Random { center, halfwidth } => {
                if !(*halfwidth >= 0.0 && inside(center - halfwidth) && inside(center + halfwidth)) {
                    return Err(CliError::invalid(
                        "initial.halfwidth",
                        format!("{center} +- {halfwidth} leaves [{alpha}, {beta}]"),
                    ));
                }
                if self.seed.is_none() {
                    return Err(CliError::invalid("seed", "randomized initial data needs --seed"));
                }
            }
            InitialCondition::Droplets { disks } => {
                if !two_d {
                    return Err(CliError::invalid("initial.disks", "droplets need a 2D grid"));
                }
                if disks.is_empty() {
                    return Err(CliError::invalid("initial.disks", "needs at least one disk"));
                }
                if disks.iter().any(|d| !(d[2] > 0.0) || d.iter().any(|v| !v.is_finite())) {
                    return Err(CliError::invalid("initial.disks", "radii must be positive and finite"));
                }
                if alpha > -1.0 || beta < 1.0 {
                    return Err(CliError::invalid("initial.kind", "needs mobility bounds containing [-1, 1]"));
                }
                if e.epsilon <= 0.0 {
                    return Err(CliError::invalid("energy.epsilon", "the mollifier width needs epsilon > 0"));
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config is always representable")
    }
}

/// Overlays the keys of `overlay` on `base`, recursing into tables.
fn merge(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    // A new `kind` replaces the whole tagged table.
                    Some(slot @ toml::Value::Table(_)) if !switches_kind(slot, &v) => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn switches_kind(current: &toml::Value, new: &toml::Value) -> bool {
    match (current.get("kind"), new.get("kind")) {
        (Some(a), Some(b)) => a != b,
        _ => false,
    }
}

/// Applies a TOML document on top of `base`; unknown keys are rejected.
pub fn apply_toml(base: &ExperimentConfig, text: &str) -> Result<ExperimentConfig> {
    let overlay: toml::Value = text
        .parse::<toml::Table>()
        .map(toml::Value::Table)
        .map_err(|e| CliError::Parse(e.to_string()))?;
    let mut value = toml::Value::try_from(base).expect("config is always representable");
    merge(&mut value, overlay);
    value.try_into().map_err(|e: toml::de::Error| CliError::Parse(e.to_string()))
}

pub fn apply_file(base: &ExperimentConfig, path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    apply_toml(base, &text)
}
