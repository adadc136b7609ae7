//! Primal-dual inner solvers for one JKO step.
//!
//! Both variants minimise `Phi(u) + tau E(rho)` subject to `|A u - b| <= delta`
//! after dividing the objective by the cell area, so the transport part is a
//! plain per-cell sum and the proximal step uses `lambda` directly.

use crate::error::{invalid, Error, Result};
use crate::grid::{dot, CgWorkspace, ConstraintOperator, Field, State};
use crate::physics::{bound_entropy_deriv, bound_entropy_raw, energy_grad_raw, energy_raw, EnergySpec};
use crate::transport::{action_sq, prox_action_in_place, Mobility};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Pd3o,
    PrePd3o,
}

/// How the PD3O dual step is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SigmaRule {
    Explicit(f64),
    /// `sigma = factor / (lambda * lambda_max(A A^t))`.
    Factor(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverParams {
    pub lambda: f64,
    pub sigma: SigmaRule,
    /// Constraint radius; `None` means `1e-5 * sqrt(|Omega|)`.
    pub delta: Option<f64>,
    pub tol: f64,
    pub max_iters: usize,
    pub variant: Variant,
    pub record_history: bool,
    /// Start each JKO step from the previous step's dual variable instead of
    /// zero (used by the stepper only).
    pub warm_start: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            sigma: SigmaRule::Factor(0.99),
            delta: None,
            tol: 1e-5,
            max_iters: 20_000,
            variant: Variant::Pd3o,
            record_history: false,
            warm_start: false,
        }
    }
}

impl SolverParams {
    pub fn delta_for(&self, measure: f64) -> f64 {
        self.delta.unwrap_or(1e-5 * measure.sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid("lambda", format!("must be positive, got {}", self.lambda)));
        }
        match self.sigma {
            SigmaRule::Explicit(s) if !(s > 0.0 && s.is_finite()) => {
                return Err(invalid("sigma", format!("must be positive, got {s}")));
            }
            SigmaRule::Factor(f) if !(f > 0.0 && f < 1.0) => {
                return Err(invalid("sigma_factor", format!("must lie in (0, 1), got {f}")));
            }
            _ => {}
        }
        if let Some(d) = self.delta {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(invalid("delta", format!("must be >= 0, got {d}")));
            }
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol", format!("must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters", "must be at least 1"));
        }
        Ok(())
    }
}

/// Stopping-monitor values after one iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Monitors {
    /// `sqrt(|C|) * |A u - b|`.
    pub constraint: f64,
    pub rel_u: f64,
    pub rel_phi: f64,
    pub rel_energy: f64,
    pub rel_action: f64,
}

impl Monitors {
    fn passes(&self, delta: f64, tol: f64) -> bool {
        self.constraint <= delta
            && self.rel_u <= tol
            && self.rel_phi <= tol
            && self.rel_energy <= tol
            && self.rel_action <= tol
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterationStats {
    pub iters: usize,
    pub converged: bool,
    pub last: Monitors,
    pub history: Vec<Monitors>,
    pub newton_iters: usize,
    pub cg_iters: usize,
}

impl IterationStats {
    pub fn constraint_norm(&self) -> f64 {
        self.last.constraint
    }
}

#[derive(Clone, Debug)]
pub struct InnerSolution {
    pub state: State,
    pub dual: Field,
    pub stats: IterationStats,
}

/// `Proj_B(y)` for the ball of radius `delta` around `b`.
pub fn project_ball(y: &Field, b: &Field, delta: f64) -> Result<Field> {
    b.check_grid(y.grid(), "ball center")?;
    check_delta(delta)?;
    let mut out = y.values().to_vec();
    project_ball_in_place(&mut out, b.values(), delta);
    Ok(Field::from_raw(*y.grid(), out))
}

/// `y - sigma Proj_B(y / sigma)`.
pub fn prox_dual(y: &Field, sigma: f64, b: &Field, delta: f64) -> Result<Field> {
    b.check_grid(y.grid(), "ball center")?;
    check_delta(delta)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid("sigma", format!("must be positive, got {sigma}")));
    }
    let mut out = y.values().to_vec();
    prox_dual_in_place(&mut out, sigma, b.values(), delta);
    Ok(Field::from_raw(*y.grid(), out))
}

/// `y - M^{-1} Proj_B(M y)` with `M = lambda A A^t`.
pub fn prox_dual_pre(op: &ConstraintOperator, y: &Field, lambda: f64, b: &Field, delta: f64) -> Result<Field> {
    y.check_grid(op.grid(), "dual field")?;
    b.check_grid(op.grid(), "ball center")?;
    check_delta(delta)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", format!("must be positive, got {lambda}")));
    }
    let mut ws = CgWorkspace::new(op.grid());
    let mut scratch = vec![0.0; op.grid().state_len()];
    let out = prox_dual_metric(
        y.values(),
        b.values(),
        delta,
        |v, out| {
            op.apply_aat_into(v, out, &mut scratch);
            out.iter_mut().for_each(|o| *o *= lambda);
        },
        |rhs, x| op.solve_aat_into(rhs, lambda, x, &mut ws).map(|_| ()),
    )?;
    Ok(Field::from_raw(*op.grid(), out))
}

/// Moreau-type identity for a metric `M` given by `apply_m` and `solve_m`.
fn prox_dual_metric(
    y: &[f64],
    b: &[f64],
    delta: f64,
    mut apply_m: impl FnMut(&[f64], &mut [f64]),
    mut solve_m: impl FnMut(&[f64], &mut [f64]) -> Result<()>,
) -> Result<Vec<f64>> {
    let mut z = vec![0.0; y.len()];
    apply_m(y, &mut z);
    let mut r = z.clone();
    project_ball_in_place(&mut r, b, delta);
    for (ri, zi) in r.iter_mut().zip(&z) {
        *ri = zi - *ri;
    }
    // y - M^{-1} Proj(M y) = M^{-1} (M y - Proj(M y)).
    let mut x = y.to_vec();
    solve_m(&r, &mut x)?;
    Ok(x)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(invalid("delta", format!("must be >= 0, got {delta}")));
    }
    Ok(())
}

fn project_ball_in_place(y: &mut [f64], b: &[f64], delta: f64) {
    let dist = y.iter().zip(b).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
    if dist <= delta {
        return;
    }
    let s = delta / dist;
    for (yi, bi) in y.iter_mut().zip(b) {
        *yi = bi + s * (*yi - bi);
    }
}

fn prox_dual_in_place(y: &mut [f64], sigma: f64, b: &[f64], delta: f64) {
    let dist = y
        .iter()
        .zip(b)
        .map(|(a, c)| (a / sigma - c).powi(2))
        .sum::<f64>()
        .sqrt();
    if dist <= delta {
        y.fill(0.0);
        return;
    }
    let s = delta / dist;
    for (yi, bi) in y.iter_mut().zip(b) {
        let scaled = *yi / sigma;
        *yi -= sigma * (bi + s * (scaled - bi));
    }
}

/// One inner JKO problem.
///
/// `entropy_weight` is `1/eta` for the Schrödinger-bridge variant (the
/// constraint operator then carries the matching diffusion) and zero
/// otherwise.
#[derive(Clone, Copy, Debug)]
pub struct InnerProblem<'a> {
    pub rho_k: &'a Field,
    pub energy: &'a EnergySpec,
    pub mobility: Mobility,
    pub tau: f64,
    pub constraint: &'a ConstraintOperator,
    pub entropy_weight: f64,
    /// Initial dual iterate; zero when absent.
    pub dual_guess: Option<&'a Field>,
}

impl InnerProblem<'_> {
    /// Objective energy `E(rho) - w H(rho)`.
    fn energy(&self, rho: &[f64]) -> Result<f64> {
        let grid = self.constraint.grid();
        let mut e = energy_raw(grid, rho, self.energy)?;
        if self.entropy_weight > 0.0 {
            let (a, b) = (self.mobility.alpha(), self.mobility.beta());
            e -= self.entropy_weight * bound_entropy_raw(rho, a, b) * grid.cell_area();
        }
        Ok(e)
    }

    /// Gradient of the area-normalised objective on the density block.
    fn gradient(&self, rho: &[f64], out: &mut [f64]) -> Result<()> {
        let grid = self.constraint.grid();
        energy_grad_raw(grid, rho, self.energy, out)?;
        let scale = self.tau / grid.cell_area();
        out.iter_mut().for_each(|g| *g *= scale);
        if self.entropy_weight > 0.0 {
            let (a, b) = (self.mobility.alpha(), self.mobility.beta());
            let w = self.tau * self.entropy_weight;
            for (g, &r) in out.iter_mut().zip(rho) {
                *g -= w * bound_entropy_deriv(r, a, b);
            }
        }
        Ok(())
    }

    /// `sum_i phi(rho_i, m_i) |C| / 2`.
    fn action(&self, u: &[f64]) -> f64 {
        let grid = self.constraint.grid();
        let n = grid.len();
        let comps = grid.momentum_components();
        let total: f64 = (0..n)
            .map(|k| {
                let m2: f64 = (1..=comps).map(|c| u[c * n + k].powi(2)).sum();
                action_sq(u[k], m2, &self.mobility)
            })
            .sum();
        0.5 * total * grid.cell_area()
    }
}

/// One plain JKO step from `rho_k`.
pub fn solve_inner(
    rho_k: &Field,
    energy: &EnergySpec,
    mob: Mobility,
    tau: f64,
    params: &SolverParams,
) -> Result<InnerSolution> {
    let op = ConstraintOperator::new(*rho_k.grid());
    solve_problem(
        &InnerProblem {
            rho_k,
            energy,
            mobility: mob,
            tau,
            constraint: &op,
            entropy_weight: 0.0,
            dual_guess: None,
        },
        params,
    )
}

fn rel_change(new: &[f64], old: &[f64]) -> f64 {
    let diff: f64 = new.iter().zip(old).map(|(a, b)| (a - b) * (a - b)).sum();
    diff.sqrt() / dot(new, new).sqrt().max(1e-30)
}

fn rel_scalar(new: f64, old: f64) -> f64 {
    (new - old).abs() / new.abs().max(1e-30)
}

/// Runs PD3O or PrePD3O on `problem`.
pub fn solve_problem(problem: &InnerProblem, params: &SolverParams) -> Result<InnerSolution> {
    params.validate()?;
    let op = problem.constraint;
    let grid = *op.grid();
    problem.rho_k.check_grid(&grid, "rho_k")?;
    problem.energy.check(&grid)?;
    if !(problem.tau > 0.0 && problem.tau.is_finite()) {
        return Err(invalid("tau", format!("must be positive, got {}", problem.tau)));
    }
    if !(problem.entropy_weight >= 0.0 && problem.entropy_weight.is_finite()) {
        return Err(invalid("entropy_weight", "must be finite and >= 0"));
    }
    let (alpha, beta) = (problem.mobility.alpha(), problem.mobility.beta());
    if problem.rho_k.min() < alpha - 1e-12 || problem.rho_k.max() > beta + 1e-12 {
        return Err(invalid(
            "rho_k",
            format!("density leaves [{alpha}, {beta}]"),
        ));
    }

    let lambda = params.lambda;
    let delta = params.delta_for(grid.measure());
    let sigma = match params.variant {
        Variant::PrePd3o => 0.0,
        Variant::Pd3o => {
            let lmax = op.lambda_max().value;
            let s = match params.sigma {
                SigmaRule::Factor(f) => f / (lambda * lmax),
                SigmaRule::Explicit(s) => s,
            };
            if s * lambda * lmax >= 1.0 {
                return Err(invalid(
                    "sigma",
                    format!("sigma*lambda*lambda_max = {} must be < 1", s * lambda * lmax),
                ));
            }
            s
        }
    };

    let n = grid.len();
    let len = grid.state_len();
    let comps = grid.momentum_components();
    let area_sqrt = grid.cell_area().sqrt();
    let b = problem.rho_k.values();

    let mut u = vec![0.0; len];
    u[..n].copy_from_slice(b);
    let mut u_bar = u.clone();
    let mut u_new = vec![0.0; len];
    let mut phi = match problem.dual_guess {
        Some(guess) => {
            guess.check_grid(&grid, "dual guess")?;
            guess.values().to_vec()
        }
        None => vec![0.0; n],
    };
    let mut phi_new = vec![0.0; n];
    let mut at_phi = vec![0.0; len];
    let mut tmp = vec![0.0; len];
    let mut au = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut grad_new = vec![0.0; n];
    let mut ws = CgWorkspace::new(&grid);

    op.adjoint_into(&phi, &mut at_phi);
    problem.gradient(&u[..n], &mut grad)?;
    let mut energy_old = problem.energy(&u[..n])?;
    let mut action_old = problem.action(&u);
    let mut stats = IterationStats::default();

    for iter in 1..=params.max_iters {
        // Dual step.
        match params.variant {
            Variant::Pd3o => {
                op.apply_into(&u_bar, &mut au);
                for k in 0..n {
                    phi_new[k] = phi[k] + sigma * au[k];
                }
                prox_dual_in_place(&mut phi_new, sigma, b, delta);
            }
            Variant::PrePd3o => {
                // M2 (phi + M2^{-1} A u_bar) = A (lambda A^t phi + u_bar).
                for i in 0..len {
                    tmp[i] = lambda * at_phi[i] + u_bar[i];
                }
                op.apply_into(&tmp, &mut au);
                let mut r = au.clone();
                project_ball_in_place(&mut r, b, delta);
                for k in 0..n {
                    r[k] = au[k] - r[k];
                }
                phi_new.copy_from_slice(&phi);
                stats.cg_iters += op.solve_aat_into(&r, lambda, &mut phi_new, &mut ws)?;
            }
        }

        // Primal step.
        op.adjoint_into(&phi_new, &mut at_phi);
        for i in 0..len {
            u_new[i] = u[i] - lambda * at_phi[i];
        }
        for k in 0..n {
            u_new[k] -= lambda * grad[k];
        }
        stats.newton_iters += prox_action_in_place(n, comps, &mut u_new, lambda, &problem.mobility)?;
        problem.gradient(&u_new[..n], &mut grad_new)?;

        for i in 0..len {
            u_bar[i] = 2.0 * u_new[i] - u[i];
        }
        for k in 0..n {
            u_bar[k] += lambda * (grad[k] - grad_new[k]);
        }

        // Monitors.
        op.apply_into(&u_new, &mut au);
        let residual: f64 = au.iter().zip(b).map(|(a, c)| (a - c) * (a - c)).sum();
        let energy_new = problem.energy(&u_new[..n])?;
        let action_new = problem.action(&u_new);
        let mon = Monitors {
            constraint: area_sqrt * residual.sqrt(),
            rel_u: rel_change(&u_new, &u),
            rel_phi: rel_change(&phi_new, &phi),
            rel_energy: rel_scalar(energy_new, energy_old),
            rel_action: rel_scalar(action_new, action_old),
        };
        if !(mon.constraint.is_finite() && mon.rel_u.is_finite() && mon.rel_phi.is_finite() && energy_new.is_finite())
        {
            return Err(Error::NonFinite {
                stage: "primal-dual iteration",
                iteration: iter,
            });
        }

        std::mem::swap(&mut u, &mut u_new);
        std::mem::swap(&mut phi, &mut phi_new);
        std::mem::swap(&mut grad, &mut grad_new);
        energy_old = energy_new;
        action_old = action_new;
        stats.iters = iter;
        stats.last = mon;
        if params.record_history {
            stats.history.push(mon);
        }
        // The starting point is feasible, so the first dual update can be
        // exactly zero and every relative change trivially small.
        if iter > 1 && mon.passes(delta, params.tol) {
            stats.converged = true;
            break;
        }
    }

    Ok(InnerSolution {
        state: State::from_raw(grid, u),
        dual: Field::from_raw(grid, phi),
        stats,
    })
}
