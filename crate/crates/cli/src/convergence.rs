//! Grid-refinement study against the closed-form steady state.

use std::path::Path;

use jkoflow::profiles::ch_steady;
use jkoflow::Field;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::experiment::Setup;
use crate::presets::has_analytic_steady_state;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    /// `(dx, error)` in the order the spacings were given.
    pub errors: Vec<(f64, f64)>,
    /// `log2(e_i / e_{i+1})`; meaningful for successive halvings.
    pub orders: Vec<f64>,
}

impl ConvergenceReport {
    pub fn from_errors(errors: Vec<(f64, f64)>) -> Self {
        let orders = errors.windows(2).map(|w| (w[0].1 / w[1].1).log2()).collect();
        Self { errors, orders }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, std::io::Error::other(e)))?;
        let wrap = |e: csv::Error| CliError::io(path, std::io::Error::other(e));
        w.write_record(["dx", "error", "order"]).map_err(wrap)?;
        for (i, (dx, err)) in self.errors.iter().enumerate() {
            let order = if i == 0 { String::new() } else { self.orders[i - 1].to_string() };
            w.write_record([dx.to_string(), err.to_string(), order]).map_err(wrap)?;
        }
        w.flush().map_err(|e| CliError::io(path, e))
    }
}

/// `sqrt(sum |rho_i - rho_inf(x_i)|^2 |C|)` against the cosine steady state.
pub fn steady_state_error(rho: &Field, epsilon: f64) -> f64 {
    let grid = rho.grid();
    let area = grid.cell_area();
    let sum: f64 = rho
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| (v - ch_steady(grid.center(k).0, epsilon)).powi(2) * area)
        .sum();
    sum.sqrt()
}

/// Runs `cfg` once per spacing and measures the final-time error.
pub fn run_convergence(cfg: &ExperimentConfig, dx_list: &[f64]) -> Result<ConvergenceReport> {
    if !has_analytic_steady_state(&cfg.preset) {
        return Err(CliError::invalid(
            "preset",
            format!("`{}` has no closed-form steady state", cfg.preset),
        ));
    }
    if dx_list.is_empty() {
        return Err(CliError::invalid("dx-list", "needs at least one spacing"));
    }
    // Check every spacing before the first run starts.
    let mut configs = Vec::with_capacity(dx_list.len());
    for &dx in dx_list {
        let mut c = cfg.clone();
        c.grid.set_spacing(dx)?;
        c.validate()?;
        configs.push(c);
    }
    let mut errors = Vec::with_capacity(dx_list.len());
    for (c, &dx) in configs.iter().zip(dx_list) {
        let traj = Setup::new(c)?.run(&mut |_| {})?;
        if let Some(e) = traj.failure {
            return Err(CliError::Solver(e));
        }
        errors.push((dx, steady_state_error(&traj.final_snapshot().rho, c.energy.epsilon)));
    }
    Ok(ConvergenceReport::from_errors(errors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::preset;

    #[test]
    fn orders_from_errors() {
        let r = ConvergenceReport::from_errors(vec![(0.1, 4e-2), (0.05, 1e-2), (0.025, 2.5e-3)]);
        assert_eq!(r.orders.len(), 2);
        assert!(r.orders.iter().all(|o| (o - 2.0).abs() < 1e-12));
        let single = ConvergenceReport::from_errors(vec![(0.1, 1.0)]);
        assert!(single.orders.is_empty());
    }

    #[test]
    fn exact_steady_state_has_zero_error() {
        let g = jkoflow::Grid::new_1d(40, 0.0, 1.0).unwrap();
        let f = Field::from_fn(g, |x, _| ch_steady(x, 0.1));
        assert_eq!(steady_state_error(&f, 0.1), 0.0);
    }

    #[test]
    fn rejects_presets_without_reference() {
        let cfg = preset("saturation1d-small").unwrap();
        assert!(run_convergence(&cfg, &[0.08]).is_err());
        let cfg = preset("ch1d-converge-small").unwrap();
        assert!(run_convergence(&cfg, &[0.03]).is_err());
    }
}
