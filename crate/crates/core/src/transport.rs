//! Saturating mobility, the transport action `|m|^2 / M(rho)` and its
//! bound-preserving proximal operator.
//!
//! `prox_action` minimises
//! `F(r, q) = |r - rho|^2/2 + |q - m|^2/2 + (lambda/2) phi(r, q)`.
//! Eliminating `q = m M(r) / (lambda + M(r))` leaves the scalar root problem
//! `f(r) = r - rho - lambda M'(r) |m|^2 / (2 (lambda + M(r))^2) = 0`, which is
//! increasing on `(alpha, beta)`, concave left of the midpoint and convex
//! right of it. Newton started on the correct side of the root converges
//! monotonically inside the bracket fixed by the case analysis.

use crate::error::{invalid, Error, Result};
use crate::grid::State;

/// `M(rho) = (rho - alpha)(beta - rho)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mobility {
    alpha: f64,
    beta: f64,
}

impl Mobility {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && alpha < beta) {
            return Err(invalid(
                "mobility",
                format!("need finite alpha < beta, got [{alpha}, {beta}]"),
            ));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.alpha + self.beta)
    }

    #[inline]
    pub fn value(&self, rho: f64) -> f64 {
        (rho - self.alpha) * (self.beta - rho)
    }

    #[inline]
    pub fn deriv(&self, rho: f64) -> f64 {
        self.alpha + self.beta - 2.0 * rho
    }
}

/// Transport action `phi(rho, m)`; `+inf` outside the admissible set.
pub fn action(rho: f64, m: &[f64], mob: &Mobility) -> f64 {
    let m2: f64 = m.iter().map(|v| v * v).sum();
    action_sq(rho, m2, mob)
}

#[inline]
pub(crate) fn action_sq(rho: f64, m2: f64, mob: &Mobility) -> f64 {
    let mv = mob.value(rho);
    if mv > 0.0 {
        m2 / mv
    } else if m2 == 0.0 && rho >= mob.alpha && rho <= mob.beta {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Which branch of the initial-guess strategy produced the result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProxCase {
    /// `alpha <= rho < mid`, Newton from `rho`.
    LowerHalf,
    /// `mid < rho <= beta`, Newton from `rho`.
    UpperHalf,
    /// `rho = mid`, exact.
    Midpoint,
    /// Below `alpha` but above the clamp threshold, Newton from `alpha`.
    BelowAlpha,
    /// Above `beta` but below the clamp threshold, Newton from `beta`.
    AboveBeta,
    /// Clamped to `(alpha, 0)`.
    ClampAlpha,
    /// Clamped to `(beta, 0)`.
    ClampBeta,
}

impl ProxCase {
    /// Case number 1..=7.
    pub fn id(&self) -> u8 {
        match self {
            ProxCase::LowerHalf => 1,
            ProxCase::UpperHalf => 2,
            ProxCase::Midpoint => 3,
            ProxCase::BelowAlpha => 4,
            ProxCase::AboveBeta => 5,
            ProxCase::ClampAlpha => 6,
            ProxCase::ClampBeta => 7,
        }
    }

    /// Classifies an input `(rho, |m|^2)`; ties at a clamp threshold go to
    /// the clamp.
    pub fn classify(rho: f64, m_norm_sq: f64, lambda: f64, mob: &Mobility) -> Self {
        let (alpha, beta) = (mob.alpha, mob.beta);
        let spread = (beta - alpha) * m_norm_sq / (2.0 * lambda);
        let mid = mob.midpoint();
        if rho <= alpha - spread {
            ProxCase::ClampAlpha
        } else if rho >= beta + spread {
            ProxCase::ClampBeta
        } else if rho < alpha {
            ProxCase::BelowAlpha
        } else if rho > beta {
            ProxCase::AboveBeta
        } else if rho < mid {
            ProxCase::LowerHalf
        } else if rho > mid {
            ProxCase::UpperHalf
        } else {
            ProxCase::Midpoint
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProxResult {
    pub rho_star: f64,
    pub m_star: Vec<f64>,
    pub newton_iters: usize,
    pub case: ProxCase,
}

/// Scalar outcome: `m* = shrink * m`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ScalarProx {
    pub rho: f64,
    pub shrink: f64,
    pub iters: usize,
    pub case: ProxCase,
}

pub const NEWTON_MAX_ITERS: usize = 60;
pub const NEWTON_REL_TOL: f64 = 1e-13;

struct RootFn {
    rho: f64,
    m2: f64,
    lambda: f64,
    mob: Mobility,
}

impl RootFn {
    #[inline]
    fn f(&self, x: f64) -> f64 {
        let s = self.lambda + self.mob.value(x);
        x - self.rho - self.lambda * self.mob.deriv(x) * self.m2 / (2.0 * s * s)
    }

    #[inline]
    fn df(&self, x: f64) -> f64 {
        let s = self.lambda + self.mob.value(x);
        let dm = self.mob.deriv(x);
        let lm = self.lambda * self.m2;
        // M'' = -2.
        1.0 + dm * dm * lm / (s * s * s) + lm / (s * s)
    }
}

pub(crate) fn prox_scalar(rho: f64, m2: f64, lambda: f64, mob: &Mobility) -> Result<ScalarProx> {
    let case = ProxCase::classify(rho, m2, lambda, mob);
    let (guess, lo, hi) = match case {
        ProxCase::ClampAlpha | ProxCase::ClampBeta => {
            let r = if case == ProxCase::ClampAlpha {
                mob.alpha
            } else {
                mob.beta
            };
            return Ok(ScalarProx {
                rho: r,
                shrink: 0.0,
                iters: 0,
                case,
            });
        }
        ProxCase::Midpoint => {
            let r = mob.midpoint();
            let mv = mob.value(r);
            return Ok(ScalarProx {
                rho: r,
                shrink: mv / (lambda + mv),
                iters: 0,
                case,
            });
        }
        ProxCase::LowerHalf => (rho, rho, mob.midpoint()),
        ProxCase::UpperHalf => (rho, mob.midpoint(), rho),
        ProxCase::BelowAlpha => (mob.alpha, mob.alpha, mob.midpoint()),
        ProxCase::AboveBeta => (mob.beta, mob.midpoint(), mob.beta),
    };
    let root = RootFn {
        rho,
        m2,
        lambda,
        mob: *mob,
    };
    let tol = NEWTON_REL_TOL * (1.0 + rho.abs());
    let fail = || Error::ProxFailure {
        rho,
        m_norm_sq: m2,
        lambda,
    };

    let mut x = guess;
    let mut iters = 0;
    let mut solved = false;
    while iters < NEWTON_MAX_ITERS {
        let fx = root.f(x);
        if !fx.is_finite() {
            return Err(fail());
        }
        if fx.abs() <= tol {
            solved = true;
            break;
        }
        let step = fx / root.df(x);
        let next = x - step;
        iters += 1;
        if !(next >= lo && next <= hi) {
            break;
        }
        x = next;
        if step.abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            solved = true;
            break;
        }
    }
    if !solved {
        x = bisect(&root, lo, hi, tol).ok_or_else(fail)?;
    }
    let x = x.clamp(mob.alpha, mob.beta);
    let mv = mob.value(x);
    Ok(ScalarProx {
        rho: x,
        shrink: mv / (lambda + mv),
        iters,
        case,
    })
}

/// Bisection fallback on a bracket with `f(lo) <= 0 <= f(hi)`.
fn bisect(root: &RootFn, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64> {
    if root.f(lo) > tol || root.f(hi) < -tol {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = root.f(mid);
        if !fm.is_finite() {
            return None;
        }
        if fm.abs() <= tol || hi - lo <= 4.0 * f64::EPSILON * mid.abs().max(1.0) {
            return Some(mid);
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", format!("must be positive, got {lambda}")));
    }
    Ok(())
}

/// Proximal map of `(lambda/2) phi` at `(rho, m)`.
pub fn prox_action(rho: f64, m: &[f64], lambda: f64, mob: &Mobility) -> Result<ProxResult> {
    check_lambda(lambda)?;
    let m2: f64 = m.iter().map(|v| v * v).sum();
    let p = prox_scalar(rho, m2, lambda, mob)?;
    Ok(ProxResult {
        rho_star: p.rho,
        m_star: m.iter().map(|v| v * p.shrink).collect(),
        newton_iters: p.iters,
        case: p.case,
    })
}

/// Cell-wise proximal map on a whole state; 2D momenta are treated as one
/// vector per cell.
pub fn prox_action_field(u: &State, lambda: f64, mob: &Mobility) -> Result<State> {
    check_lambda(lambda)?;
    let mut out = u.clone();
    let grid = *u.grid();
    prox_action_in_place(grid.len(), grid.momentum_components(), out.as_mut_slice(), lambda, mob)?;
    Ok(out)
}

/// In-place cell-wise prox on a flat `(rho, m_x[, m_y])` vector.
/// Returns the total Newton iteration count.
pub(crate) fn prox_action_in_place(
    n: usize,
    components: usize,
    data: &mut [f64],
    lambda: f64,
    mob: &Mobility,
) -> Result<usize> {
    let mut total = 0;
    for k in 0..n {
        let mut m2 = 0.0;
        for c in 0..components {
            let v = data[(c + 1) * n + k];
            m2 += v * v;
        }
        let p = prox_scalar(data[k], m2, lambda, mob)?;
        total += p.iters;
        data[k] = p.rho;
        for c in 0..components {
            data[(c + 1) * n + k] *= p.shrink;
        }
    }
    Ok(total)
}
