use approx::assert_relative_eq;
use jkoflow::profiles::{critical_mass, saturation_steady, SaturationSteady};
use statrs::function::erf::erf;
use std::f64::consts::PI;

/// Mass of `alpha` on `[-l, l]` plus the two Gaussian tails out to `half`.
fn plateau_mass(l: f64, alpha: f64, c: f64, d: f64, half: f64) -> f64 {
    let k = c / (2.0 * d);
    let tails = alpha * (PI / k).sqrt() * (k * l * l).exp() * (erf(k.sqrt() * half) - erf(k.sqrt() * l));
    2.0 * alpha * l + tails
}

#[test]
fn critical_mass_is_the_gaussian_peak_threshold() {
    assert_relative_eq!(critical_mass(1.0, 1.0, 1.0), (2.0 * PI).sqrt(), max_relative = 1e-15);
    // The subcritical Gaussian with the critical mass peaks at exactly alpha.
    let s = SaturationSteady::new(critical_mass(0.8, 2.0, 0.5) * 0.999, 0.8, 2.0, 0.5, 10.0).unwrap();
    assert!(s.plateau.is_none());
    assert_relative_eq!(s.eval(0.0), 0.8 * 0.999, max_relative = 1e-12);
}

#[test]
fn supercritical_plateau_carries_the_mass() {
    for &(mass, alpha, c, d, half) in &[
        (3.32, 1.0, 1.0, 1.0, 4.0),
        (5.0, 1.0, 1.0, 1.0, 6.0),
        (2.0, 0.5, 3.0, 0.7, 3.0),
    ] {
        let s = SaturationSteady::new(mass, alpha, c, d, half).unwrap();
        let l = s.plateau.expect("above the critical mass");
        assert_relative_eq!(plateau_mass(l, alpha, c, d, half), mass, max_relative = 1e-9);
        assert_relative_eq!(s.eval(0.0), alpha);
        assert_relative_eq!(s.eval(l), alpha);
        assert!(s.eval(l + 0.1) < alpha);
        assert_relative_eq!(
            saturation_steady(l + 0.3, mass, alpha, c, d, half).unwrap(),
            s.eval(l + 0.3)
        );
    }
}

#[test]
fn subcritical_profile_matches_the_erf_mass() {
    let (mass, c, d, half) = (1.5, 1.0, 1.0, 4.0);
    let s = SaturationSteady::new(mass, 1.0, c, d, half).unwrap();
    assert!(s.plateau.is_none());
    // Midpoint quadrature of the profile against the closed-form erf mass.
    let n = 20_000;
    let h = 2.0 * half / n as f64;
    let quad: f64 = (0..n).map(|i| s.eval(-half + (i as f64 + 0.5) * h) * h).sum();
    let k: f64 = c / (2.0 * d);
    assert_relative_eq!(quad, mass * erf(k.sqrt() * half), max_relative = 1e-7);
}
