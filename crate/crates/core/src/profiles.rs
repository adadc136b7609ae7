//! Analytic steady states and initial data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, Grid};

/// `alpha * sqrt(2 pi D / C)`.
pub fn critical_mass(alpha: f64, c: f64, d: f64) -> f64 {
    alpha * (2.0 * std::f64::consts::PI * d / c).sqrt()
}

/// Steady state of the saturation problem on `[-half_width, half_width]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaturationSteady {
    pub mass: f64,
    pub alpha: f64,
    pub c: f64,
    pub d: f64,
    pub half_width: f64,
    /// Plateau half-length; `None` on the subcritical branch.
    pub plateau: Option<f64>,
}

impl SaturationSteady {
    pub fn new(mass: f64, alpha: f64, c: f64, d: f64, half_width: f64) -> Result<Self> {
        for (name, v) in [("mass", mass), ("alpha", alpha), ("C", c), ("D", d), ("half_width", half_width)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid("saturation", format!("{name} must be positive, got {v}")));
            }
        }
        let mut out = Self {
            mass,
            alpha,
            c,
            d,
            half_width,
            plateau: None,
        };
        if mass > critical_mass(alpha, c, d) {
            out.plateau = Some(out.solve_plateau()?);
        }
        Ok(out)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.c / (2.0 * self.d);
        match self.plateau {
            None => self.mass * (self.c / (2.0 * std::f64::consts::PI * self.d)).sqrt() * (-k * x * x).exp(),
            Some(l) => self.alpha * (-k * (x * x - l * l).max(0.0)).exp(),
        }
    }

    /// Mass over the domain for plateau half-length `l`, by adaptive Simpson
    /// on the decaying tail.
    pub fn domain_mass(&self, l: f64) -> f64 {
        let k = self.c / (2.0 * self.d);
        let tail = |x: f64| self.alpha * (-k * (x * x - l * l)).exp();
        let width = self.half_width;
        2.0 * (self.alpha * l.min(width) + adaptive_simpson(&tail, l.min(width), width, 1e-12))
    }

    fn solve_plateau(&self) -> Result<f64> {
        let (mut lo, mut hi) = (0.0, self.half_width);
        if self.domain_mass(lo) >= self.mass || self.domain_mass(hi) <= self.mass {
            return Err(Error::Bracket(format!(
                "mass {} not attainable on [-{w}, {w}] with plateau value {}",
                self.mass,
                self.alpha,
                w = self.half_width
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.domain_mass(mid) < self.mass {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Convenience wrapper around [`SaturationSteady`].
pub fn saturation_steady(x: f64, mass: f64, alpha: f64, c: f64, d: f64, half_width: f64) -> Result<f64> {
    Ok(SaturationSteady::new(mass, alpha, c, d, half_width)?.eval(x))
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 50)
}

/// Compactly supported cosine bump around `x = 1/2` used as initial data for
/// the convergence study.
pub fn ch_initial(x: f64, epsilon: f64) -> f64 {
    let s = x - 0.5;
    if s.abs() <= 0.5 * std::f64::consts::PI * epsilon {
        (s / epsilon).cos() - 1.0
    } else {
        -1.0
    }
}

/// Exact mean of [`ch_initial`] over `[a, b]`.
pub fn ch_initial_mean(a: f64, b: f64, epsilon: f64) -> f64 {
    let w = 0.5 * std::f64::consts::PI * epsilon;
    let (lo, hi) = ((a - 0.5).max(-w), (b - 0.5).min(w));
    if hi <= lo {
        return -1.0;
    }
    -1.0 + epsilon * ((hi / epsilon).sin() - (lo / epsilon).sin()) / (b - a)
}

/// Steady state reached from [`ch_initial`]. The support half-width is
/// `pi * epsilon`, which is where the profile meets -1 continuously and
/// keeps the mass of the initial bump.
pub fn ch_steady(x: f64, epsilon: f64) -> f64 {
    let s = x - 0.5;
    if s.abs() <= std::f64::consts::PI * epsilon {
        (1.0 + (s / epsilon).cos()) / std::f64::consts::PI - 1.0
    } else {
        -1.0
    }
}

/// Piecewise-linear two-interface initial datum on `[0, 1]`.
pub fn ch_log_initial(x: f64) -> f64 {
    let third = 1.0 / 3.0;
    if (0.0..=third - 0.05).contains(&x) {
        1.0
    } else if (x - third).abs() <= 0.05 {
        20.0 * (third - x)
    } else if (x - 0.82).abs() <= 0.05 {
        -20.0 * (x - 0.82).abs()
    } else {
        -1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disk {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

impl Disk {
    pub fn new(cx: f64, cy: f64, radius: f64) -> Self {
        Self { cx, cy, radius }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.cx).powi(2) + (y - self.cy).powi(2) < self.radius * self.radius
    }
}

/// Kernel support radius in units of epsilon.
pub const MOLLIFIER_REACH: f64 = 10.0;

/// Normalised 1D factor of the Gaussian `exp(-r^2 / (4 eps^2))` sampled at
/// offsets `k h`, `|k h| <= 10 eps`; index `reach + k` holds offset `k`.
pub fn mollifier_weights(h: f64, epsilon: f64) -> Vec<f64> {
    let reach = (MOLLIFIER_REACH * epsilon / h).floor() as isize;
    let mut w: Vec<f64> = (-reach..=reach)
        .map(|k| (-((k as f64 * h).powi(2)) / (4.0 * epsilon * epsilon)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// `(2 * 1_disks) * W - 1` with a discrete, renormalised Gaussian kernel.
/// The indicator is evaluated analytically at every shifted cell center, so
/// disks touching the boundary are treated as if the plane continued.
pub fn mollified_droplets(grid: &Grid, disks: &[Disk], epsilon: f64) -> Result<Field> {
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
    }
    if !grid.is_2d() {
        return Err(Error::InvalidGrid("droplet data needs a 2D grid".into()));
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let (dx, dy) = (grid.dx(), grid.dy());
    let wx = mollifier_weights(dx, epsilon);
    let wy = mollifier_weights(dy, epsilon);
    let (rx, ry) = ((wx.len() / 2) as isize, (wy.len() / 2) as isize);
    let x_at = |i: isize| grid.x_range().0 + (i as f64 + 0.5) * dx;
    let y_at = |j: isize| grid.y_range().0 + (j as f64 + 0.5) * dy;
    let inside = |x: f64, y: f64| disks.iter().any(|d| d.contains(x, y));

    // Smooth along x on rows extended by the y reach, then along y.
    let ext = ny + 2 * ry as usize;
    let mut partial = vec![0.0; nx * ext];
    for i in 0..nx {
        for e in 0..ext {
            let y = y_at(e as isize - ry);
            partial[i * ext + e] = (-rx..=rx)
                .map(|k| {
                    if inside(x_at(i as isize + k), y) {
                        wx[(k + rx) as usize]
                    } else {
                        0.0
                    }
                })
                .sum();
        }
    }
    let mut values = vec![0.0; grid.len()];
    for i in 0..nx {
        for j in 0..ny {
            let s: f64 = (0..wy.len()).map(|t| wy[t] * partial[i * ext + j + t]).sum();
            values[grid.index(i, j)] = (2.0 * s - 1.0).clamp(-1.0, 1.0);
        }
    }
    Field::new(*grid, values)
}

/// I.i.d. uniform samples in `[center - halfwidth, center + halfwidth]`.
pub fn random_field(grid: &Grid, center: f64, halfwidth: f64, seed: u64) -> Result<Field> {
    if !(halfwidth >= 0.0 && halfwidth.is_finite() && center.is_finite()) {
        return Err(invalid("halfwidth", format!("must be finite and >= 0, got {halfwidth}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len())
        .map(|_| rng.gen_range(center - halfwidth..=center + halfwidth))
        .collect();
    Field::new(*grid, values)
}
