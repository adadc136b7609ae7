//! Free-energy functionals and their discrete gradients.
//!
//! The discrete energy is
//! `sum (H(rho) + V rho) |C| + Dirichlet(eps) + wall`, with the Dirichlet
//! part on the trapezoidal rule and the wall contribution evaluated at the
//! boundary-face value `rho_half` obtained from the wetting closure.

use std::f64::consts::SQRT_2;

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, Grid};

/// Floor applied to every logarithm argument.
pub const LOG_CLIP: f64 = 1e-13;

#[inline]
fn clipped_ln(x: f64) -> f64 {
    x.max(LOG_CLIP).ln()
}

/// Bulk free-energy density `H`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Potential {
    /// `(rho^2 - 1)^2 / 4`
    GinzburgLandau,
    /// Flory-Huggins type potential on `(-1, 1)`.
    Logarithmic { theta: f64, theta_c: f64 },
    /// `D rho (ln rho - 1)` on `rho > 0`; confinement enters through `V`.
    EntropyConfinement { diffusion: f64 },
}

impl Potential {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Potential::GinzburgLandau => Ok(()),
            Potential::Logarithmic { theta, theta_c } => {
                if !(theta >= 0.0 && theta.is_finite()) {
                    return Err(invalid("theta", format!("must be >= 0, got {theta}")));
                }
                if !(theta_c > 0.0 && theta_c.is_finite()) {
                    return Err(invalid("theta_c", format!("must be > 0, got {theta_c}")));
                }
                Ok(())
            }
            Potential::EntropyConfinement { diffusion } => {
                if !(diffusion > 0.0 && diffusion.is_finite()) {
                    return Err(invalid("D", format!("must be > 0, got {diffusion}")));
                }
                Ok(())
            }
        }
    }

    /// `H(rho)`.
    pub fn value(&self, rho: f64) -> f64 {
        match *self {
            Potential::GinzburgLandau => 0.25 * (rho * rho - 1.0).powi(2),
            Potential::Logarithmic { theta, theta_c } => {
                let mixing = if theta == 0.0 {
                    0.0
                } else {
                    0.5 * theta
                        * ((1.0 + rho) * clipped_ln(0.5 * (1.0 + rho))
                            + (1.0 - rho) * clipped_ln(0.5 * (1.0 - rho)))
                };
                mixing + 0.5 * theta_c * (1.0 - rho * rho)
            }
            Potential::EntropyConfinement { diffusion } => {
                diffusion * rho * (clipped_ln(rho) - 1.0)
            }
        }
    }

    /// `H'(rho)`.
    pub fn deriv(&self, rho: f64) -> f64 {
        match *self {
            Potential::GinzburgLandau => rho * (rho * rho - 1.0),
            Potential::Logarithmic { theta, theta_c } => {
                let mixing = if theta == 0.0 {
                    0.0
                } else {
                    0.5 * theta * (clipped_ln(0.5 * (1.0 + rho)) - clipped_ln(0.5 * (1.0 - rho)))
                };
                mixing - theta_c * rho
            }
            Potential::EntropyConfinement { diffusion } => diffusion * clipped_ln(rho),
        }
    }
}

/// `cos(beta_w)`, with the floating-point residue at `pi/2` snapped to zero.
fn wall_cos(beta_w: f64) -> f64 {
    let c = beta_w.cos();
    if c.abs() < 1e-15 {
        0.0
    } else {
        c
    }
}

/// Cubic wall energy `f_w = (eps/sqrt 2) cos(beta_w) (rho^3/3 - rho)`.
pub fn wall_energy(rho: f64, beta_w: f64, epsilon: f64) -> f64 {
    epsilon / SQRT_2 * wall_cos(beta_w) * (rho.powi(3) / 3.0 - rho)
}

/// `f_w'(rho) = (eps/sqrt 2) cos(beta_w) (rho^2 - 1)`.
pub fn wall_energy_deriv(rho: f64, beta_w: f64, epsilon: f64) -> f64 {
    epsilon / SQRT_2 * wall_cos(beta_w) * (rho * rho - 1.0)
}

/// Boundary-face density and the ghost value it implies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryClosure {
    pub rho_half: f64,
    pub rho_ghost: f64,
}

/// Solves the discrete wetting condition
/// `eps^2 (rho_1 - rho_0)/dx = f_w'(rho_half)`, `rho_0 = 2 rho_half - rho_1`,
/// i.e. `gamma X^2 + eps X - (eps rho_1 + gamma) = 0` with
/// `gamma = sqrt(2) dx cos(beta_w) / 4`.
///
/// The root in `[-1, 1]` is returned; if both roots qualify, the one closer
/// to `rho_adjacent`.
pub fn wetting_boundary_value(
    rho_adjacent: f64,
    epsilon: f64,
    beta_w: f64,
    dx_normal: f64,
) -> Result<BoundaryClosure> {
    let cos_b = wall_cos(beta_w);
    let closure = |x: f64| BoundaryClosure {
        rho_half: x,
        rho_ghost: 2.0 * x - rho_adjacent,
    };
    if cos_b == 0.0 {
        return Ok(closure(rho_adjacent));
    }
    let fail = || Error::NoAdmissibleRoot {
        rho_adjacent,
        epsilon,
        beta_w,
        dx: dx_normal,
    };
    if !(epsilon > 0.0) {
        return Err(fail());
    }
    let gamma = SQRT_2 * dx_normal * cos_b / 4.0;
    let c = -(epsilon * rho_adjacent + gamma);
    let disc = epsilon * epsilon - 4.0 * gamma * c;
    if !(disc >= 0.0) {
        return Err(fail());
    }
    // epsilon > 0, so the sign-stable form takes the + branch of sqrt.
    let q = -0.5 * (epsilon + disc.sqrt());
    let roots = [q / gamma, c / q];
    const SLACK: f64 = 1e-12;
    let admissible = roots.iter().copied().filter(|r| r.abs() <= 1.0 + SLACK);
    let best = admissible.min_by(|a, b| {
        (a - rho_adjacent)
            .abs()
            .partial_cmp(&(b - rho_adjacent).abs())
            .unwrap()
    });
    let mut x = best.ok_or_else(fail)?;
    // One Newton polish step on the quadratic.
    let g = gamma * x * x + epsilon * x + c;
    let dg = 2.0 * gamma * x + epsilon;
    if dg != 0.0 {
        x -= g / dg;
    }
    Ok(closure(x))
}

/// Free-energy specification: bulk potential, interface coefficient,
/// optional external potential sampled at cell centres, optional wall.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergySpec {
    potential: Potential,
    epsilon: f64,
    external: Option<Field>,
    wall: Option<f64>,
}

impl EnergySpec {
    pub fn new(potential: Potential, epsilon: f64) -> Result<Self> {
        potential.validate()?;
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(invalid("epsilon", format!("must be >= 0, got {epsilon}")));
        }
        Ok(Self {
            potential,
            epsilon,
            external: None,
            wall: None,
        })
    }

    /// Adds the external potential `V`, pre-sampled at cell centres.
    pub fn with_external(mut self, v: Field) -> Self {
        self.external = Some(v);
        self
    }

    /// Enables the wetting wall (both ends in 1D, the `y = c` substrate in 2D).
    pub fn with_wall(mut self, beta_w: f64) -> Result<Self> {
        if !(beta_w > 0.0 && beta_w < std::f64::consts::PI) {
            return Err(invalid("beta_w", format!("must lie in (0, pi), got {beta_w}")));
        }
        if wall_cos(beta_w) != 0.0 && !(self.epsilon > 0.0) {
            return Err(invalid("epsilon", "a wetting wall needs epsilon > 0"));
        }
        self.wall = Some(beta_w);
        Ok(self)
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn external(&self) -> Option<&Field> {
        self.external.as_ref()
    }

    pub fn wall(&self) -> Option<f64> {
        self.wall
    }

    pub(crate) fn check(&self, grid: &Grid) -> Result<()> {
        if let Some(v) = &self.external {
            v.check_grid(grid, "external potential")?;
        }
        Ok(())
    }

    fn v_at(&self, k: usize) -> f64 {
        self.external.as_ref().map_or(0.0, |v| v.values()[k])
    }

    fn wall_f(&self, x: f64) -> f64 {
        self.wall.map_or(0.0, |b| wall_energy(x, b, self.epsilon))
    }

    fn wall_df(&self, x: f64) -> f64 {
        self.wall.map_or(0.0, |b| wall_energy_deriv(x, b, self.epsilon))
    }
}

/// Boundary-face value next to a wall cell; homogeneous Neumann when the
/// spec has no wall.
pub fn boundary_value(rho_adjacent: f64, spec: &EnergySpec, dx_normal: f64) -> Result<BoundaryClosure> {
    match spec.wall {
        Some(beta_w) => wetting_boundary_value(rho_adjacent, spec.epsilon, beta_w, dx_normal),
        None => Ok(BoundaryClosure {
            rho_half: rho_adjacent,
            rho_ghost: rho_adjacent,
        }),
    }
}

fn bulk_energy(rho: &[f64], spec: &EnergySpec) -> f64 {
    rho.iter()
        .enumerate()
        .map(|(k, &r)| spec.potential.value(r) + spec.v_at(k) * r)
        .sum()
}

/// Discrete energy of a 1D density.
pub fn energy_1d(rho: &Field, spec: &EnergySpec) -> Result<f64> {
    if rho.grid().is_2d() {
        return Err(Error::GridMismatch("energy_1d needs a 1D grid".into()));
    }
    spec.check(rho.grid())?;
    energy_raw(rho.grid(), rho.values(), spec)
}

/// `d E / d rho_i` on a 1D grid.
pub fn energy_grad_1d(rho: &Field, spec: &EnergySpec) -> Result<Field> {
    if rho.grid().is_2d() {
        return Err(Error::GridMismatch("energy_grad_1d needs a 1D grid".into()));
    }
    spec.check(rho.grid())?;
    let mut out = vec![0.0; rho.len()];
    energy_grad_raw(rho.grid(), rho.values(), spec, &mut out)?;
    Ok(Field::from_raw(*rho.grid(), out))
}

/// Discrete energy of a 2D density; the substrate is the `y = c` side.
pub fn energy_2d(rho: &Field, spec: &EnergySpec) -> Result<f64> {
    if !rho.grid().is_2d() {
        return Err(Error::GridMismatch("energy_2d needs a 2D grid".into()));
    }
    spec.check(rho.grid())?;
    energy_raw(rho.grid(), rho.values(), spec)
}

/// `d E / d rho_ij` on a 2D grid.
pub fn energy_grad_2d(rho: &Field, spec: &EnergySpec) -> Result<Field> {
    if !rho.grid().is_2d() {
        return Err(Error::GridMismatch("energy_grad_2d needs a 2D grid".into()));
    }
    spec.check(rho.grid())?;
    let mut out = vec![0.0; rho.len()];
    energy_grad_raw(rho.grid(), rho.values(), spec, &mut out)?;
    Ok(Field::from_raw(*rho.grid(), out))
}

/// Energy on either dimension.
pub fn energy(rho: &Field, spec: &EnergySpec) -> Result<f64> {
    spec.check(rho.grid())?;
    energy_raw(rho.grid(), rho.values(), spec)
}

/// Gradient on either dimension.
pub fn energy_gradient(rho: &Field, spec: &EnergySpec) -> Result<Field> {
    spec.check(rho.grid())?;
    let mut out = vec![0.0; rho.len()];
    energy_grad_raw(rho.grid(), rho.values(), spec, &mut out)?;
    Ok(Field::from_raw(*rho.grid(), out))
}

pub(crate) fn energy_raw(grid: &Grid, rho: &[f64], spec: &EnergySpec) -> Result<f64> {
    let eps2 = spec.epsilon * spec.epsilon;
    let area = grid.cell_area();
    let bulk = bulk_energy(rho, spec) * area;
    if !grid.is_2d() {
        let n = rho.len();
        let dx = grid.dx();
        let interior: f64 = rho.windows(2).map(|w| ((w[1] - w[0]) / dx).powi(2)).sum();
        let left = boundary_value(rho[0], spec, dx)?.rho_half;
        let right = boundary_value(rho[n - 1], spec, dx)?.rho_half;
        let g_left = 2.0 * (rho[0] - left) / dx;
        let g_right = 2.0 * (right - rho[n - 1]) / dx;
        let dirichlet = 0.25 * eps2 * (g_left * g_left + 2.0 * interior + g_right * g_right) * dx;
        return Ok(bulk + dirichlet + spec.wall_f(left) + spec.wall_f(right));
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let (dx, dy) = (grid.dx(), grid.dy());
    let mut faces = 0.0;
    for i in 0..nx {
        for j in 0..ny {
            let c = rho[grid.index(i, j)];
            if i + 1 < nx {
                faces += ((rho[grid.index(i + 1, j)] - c) / dx).powi(2);
            }
            if j + 1 < ny {
                faces += ((rho[grid.index(i, j + 1)] - c) / dy).powi(2);
            }
        }
    }
    let mut substrate = 0.0;
    let mut wall = 0.0;
    if spec.wall.is_some() {
        for i in 0..nx {
            let r = rho[grid.index(i, 0)];
            let half = boundary_value(r, spec, dy)?.rho_half;
            substrate += (2.0 * (r - half) / dy).powi(2);
            wall += spec.wall_f(half);
        }
    }
    Ok(bulk + 0.5 * eps2 * faces * area + 0.25 * eps2 * substrate * area + wall * dx)
}

pub(crate) fn energy_grad_raw(grid: &Grid, rho: &[f64], spec: &EnergySpec, out: &mut [f64]) -> Result<()> {
    let eps2 = spec.epsilon * spec.epsilon;
    if !grid.is_2d() {
        let n = rho.len();
        let dx = grid.dx();
        for i in 0..n {
            let c = rho[i];
            let curvature = match i {
                0 => rho[1] - c,
                _ if i + 1 == n => rho[n - 2] - c,
                _ => rho[i + 1] - 2.0 * c + rho[i - 1],
            };
            out[i] = (spec.potential.deriv(c) + spec.v_at(i)) * dx - eps2 * curvature / dx;
        }
        if spec.wall.is_some() {
            out[0] += spec.wall_df(boundary_value(rho[0], spec, dx)?.rho_half);
            out[n - 1] += spec.wall_df(boundary_value(rho[n - 1], spec, dx)?.rho_half);
        }
        return Ok(());
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let (dx, dy) = (grid.dx(), grid.dy());
    let area = dx * dy;
    for i in 0..nx {
        for j in 0..ny {
            let k = grid.index(i, j);
            let c = rho[k];
            let lx = match i {
                0 => rho[grid.index(1, j)] - c,
                _ if i + 1 == nx => rho[grid.index(i - 1, j)] - c,
                _ => rho[grid.index(i + 1, j)] - 2.0 * c + rho[grid.index(i - 1, j)],
            } / (dx * dx);
            let ly = match j {
                0 => rho[grid.index(i, 1)] - c,
                _ if j + 1 == ny => rho[grid.index(i, j - 1)] - c,
                _ => rho[grid.index(i, j + 1)] - 2.0 * c + rho[grid.index(i, j - 1)],
            } / (dy * dy);
            out[k] = (spec.potential.deriv(c) + spec.v_at(k) - eps2 * (lx + ly)) * area;
        }
    }
    if spec.wall.is_some() {
        for i in 0..nx {
            let k = grid.index(i, 0);
            out[k] += spec.wall_df(boundary_value(rho[k], spec, dy)?.rho_half) * dx;
        }
    }
    Ok(())
}

/// Bound entropy
/// `(1/(beta-alpha)) sum [(rho-alpha) ln(rho-alpha) + (beta-rho) ln(beta-rho)] |C|`
/// used by the Schrödinger-bridge regularisation.
pub fn bound_entropy(rho: &Field, alpha: f64, beta: f64) -> f64 {
    bound_entropy_raw(rho.values(), alpha, beta) * rho.grid().cell_area()
}

pub(crate) fn bound_entropy_raw(rho: &[f64], alpha: f64, beta: f64) -> f64 {
    let width = beta - alpha;
    rho.iter()
        .map(|&r| {
            let lo = r - alpha;
            let hi = beta - r;
            (lo * clipped_ln(lo) + hi * clipped_ln(hi)) / width
        })
        .sum()
}

/// Per-cell derivative of [`bound_entropy_raw`] (without the cell weight).
#[inline]
pub(crate) fn bound_entropy_deriv(rho: f64, alpha: f64, beta: f64) -> f64 {
    (clipped_ln(rho - alpha) - clipped_ln(beta - rho)) / (beta - alpha)
}
