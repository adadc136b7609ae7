//! Randomised comparison of the Newton prox against a brute-force grid
//! search over the reduced one-dimensional objective.

use jkoflow::transport::prox_action;
use jkoflow::{Mobility, ProxCase};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, Result};

pub const ORACLE_STEP: f64 = 1e-5;
pub const MAX_DEVIATION: f64 = 2e-5;
pub const OBJECTIVE_SLACK: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct Instance {
    pub rho: f64,
    pub m: Vec<f64>,
    pub lambda: f64,
    pub mobility: Mobility,
}

/// Minimising `m` for fixed `x` is `m M/(M + lambda)`, which leaves
/// `(x - rho)^2/(2 lambda) + |m|^2/(2 (lambda + M(x)))`.
fn reduced_objective(x: f64, rho: f64, m2: f64, lambda: f64, mob: &Mobility) -> f64 {
    (x - rho).powi(2) / (2.0 * lambda) + m2 / (2.0 * (lambda + mob.value(x)))
}

fn full_objective(rho_s: f64, m_s: &[f64], inst: &Instance) -> f64 {
    let lambda = inst.lambda;
    let mv = inst.mobility.value(rho_s);
    let ms2: f64 = m_s.iter().map(|v| v * v).sum();
    let action = if ms2 == 0.0 { 0.0 } else { ms2 / (2.0 * mv) };
    let dist: f64 = (rho_s - inst.rho).powi(2) + m_s.iter().zip(&inst.m).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    action + dist / (2.0 * lambda)
}

/// Grid minimiser on `[alpha, beta]` with spacing `step`, endpoints included.
pub fn oracle(inst: &Instance, step: f64) -> (f64, f64) {
    let (a, b) = (inst.mobility.alpha(), inst.mobility.beta());
    let m2: f64 = inst.m.iter().map(|v| v * v).sum();
    let n = ((b - a) / step).ceil() as usize;
    let mut best = (a, f64::INFINITY);
    for k in 0..=n {
        let x = (a + k as f64 * step).min(b);
        let f = reduced_objective(x, inst.rho, m2, inst.lambda, &inst.mobility);
        if f < best.1 {
            best = (x, f);
        }
    }
    best
}

/// Draws an instance whose density falls in the region of `case`.
pub fn sample(case: ProxCase, rng: &mut ChaCha8Rng) -> Instance {
    let alpha: f64 = rng.gen_range(-1.0..0.5);
    let beta = alpha + rng.gen_range(0.4..2.5);
    let mobility = Mobility::new(alpha, beta).expect("alpha < beta");
    let lambda = 10f64.powf(rng.gen_range(-1.5..1.0));
    let m: Vec<f64> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(-1.2..1.2)).collect();
    let m2: f64 = m.iter().map(|v| v * v).sum();
    let reach = (beta - alpha) * m2 / (2.0 * lambda);
    let mid = 0.5 * (alpha + beta);
    let u: f64 = rng.gen_range(0.01..0.99);
    let rho = match case {
        ProxCase::LowerHalf => alpha + u * (mid - alpha),
        ProxCase::UpperHalf => mid + u * (beta - mid),
        ProxCase::Midpoint => mid,
        ProxCase::BelowAlpha => alpha - u * reach,
        ProxCase::AboveBeta => beta + u * reach,
        ProxCase::ClampAlpha => alpha - reach - u,
        ProxCase::ClampBeta => beta + reach + u,
    };
    Instance {
        rho,
        m,
        lambda,
        mobility,
    }
}

const CASES: [ProxCase; 7] = [
    ProxCase::LowerHalf,
    ProxCase::UpperHalf,
    ProxCase::Midpoint,
    ProxCase::BelowAlpha,
    ProxCase::AboveBeta,
    ProxCase::ClampAlpha,
    ProxCase::ClampBeta,
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProxReport {
    pub count: usize,
    pub max_deviation: f64,
    pub max_objective_excess: f64,
    pub failures: usize,
    /// Indexed by case id; entry 0 is unused.
    pub per_case: [usize; 8],
    /// Newton iterations spent on midpoint-case inputs.
    pub midpoint_newton_iters: usize,
}

impl ProxReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Cycles through the seven cases, `count` instances in total.
pub fn run_proxcheck(count: usize, seed: u64) -> Result<ProxReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ProxReport {
        count,
        ..Default::default()
    };
    for k in 0..count {
        let inst = sample(CASES[k % CASES.len()], &mut rng);
        let p = prox_action(inst.rho, &inst.m, inst.lambda, &inst.mobility)?;
        let (x, f_oracle) = oracle(&inst, ORACLE_STEP);
        let dev = (p.rho_star - x).abs();
        let excess = full_objective(p.rho_star, &p.m_star, &inst) - f_oracle;
        report.max_deviation = report.max_deviation.max(dev);
        report.max_objective_excess = report.max_objective_excess.max(excess);
        report.per_case[p.case.id() as usize] += 1;
        if p.case == ProxCase::Midpoint {
            report.midpoint_newton_iters += p.newton_iters;
        }
        if dev > MAX_DEVIATION || excess > OBJECTIVE_SLACK {
            report.failures += 1;
        }
    }
    Ok(report)
}

/// Like [`run_proxcheck`] but an oracle disagreement is an error.
pub fn check(count: usize, seed: u64) -> Result<ProxReport> {
    let report = run_proxcheck(count, seed)?;
    if !report.passed() {
        return Err(CliError::OracleMismatch {
            failures: report.failures,
            count,
            max_dev: report.max_deviation,
        });
    }
    Ok(report)
}
