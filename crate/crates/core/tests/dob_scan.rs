//! Observer margin against an independent frequency scan of
//! `w_q^2 / (s^2 + 2 zeta w_q s) e^{-sT}`.

use exoshape::dob::{dob_stability_margin, QFilter};
use num_complex::Complex64;
use proptest::prelude::*;

fn loop_at(wq: f64, zeta: f64, delay: f64, w: f64) -> Complex64 {
    let s = Complex64::new(0.0, w);
    wq * wq / (s * s + s * 2.0 * zeta * wq) * (-s * delay).exp()
}

/// Crossover on a dense log grid, then phase margin from the continuous
/// phase (rational part plus -wT).
fn scan_margin(wq: f64, zeta: f64, delay: f64) -> f64 {
    let n = 20_000;
    let (lo, hi) = (wq * 1e-4, wq * 1e3);
    let mut wc = hi;
    for k in 0..n {
        let w = lo * (hi / lo).powf(k as f64 / n as f64);
        if loop_at(wq, zeta, delay, w).norm() < 1.0 {
            wc = w;
            break;
        }
    }
    let rational = (-90.0) - (wc / (2.0 * zeta * wq)).atan().to_degrees();
    180.0 + rational - (wc * delay).to_degrees()
}

fn scan_critical(zeta: f64, delay: f64) -> f64 {
    let mut wq = 1.0;
    while scan_margin(wq * 1.01, zeta, delay) > 0.0 {
        wq *= 1.01;
    }
    wq
}

#[test]
fn critical_cutoff_matches_scan() {
    for delay in [0.001, 0.002, 0.004] {
        let got = dob_stability_margin(&QFilter::new(100.0, 0.7), delay).unwrap().critical_omega_q;
        let want = scan_critical(0.7, delay);
        assert!((got - want).abs() <= 0.05 * want, "T = {delay}: {got} vs {want}");
    }
}

#[test]
fn margin_matches_scan() {
    for wq in [50.0, 200.0, 600.0] {
        let got = dob_stability_margin(&QFilter::new(wq, 0.7), 0.002).unwrap().phase_margin_deg;
        let want = scan_margin(wq, 0.7, 0.002);
        assert!((got - want).abs() <= 0.05 * want.abs().max(1.0), "w_q = {wq}: {got} vs {want}");
    }
}

#[test]
fn critical_cutoff_falls_with_delay() {
    let crit = |t: f64| dob_stability_margin(&QFilter::new(100.0, 0.7), t).unwrap().critical_omega_q;
    let c: Vec<f64> = [0.001, 0.002, 0.004].into_iter().map(crit).collect();
    assert!(c[0] > c[1] && c[1] > c[2]);
    // the cutoff scales as 1/T
    assert!((c[0] / c[1] - 2.0).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn margin_decreases_with_cutoff(a in 10.0..500.0f64, f in 1.05..3.0f64, zeta in 0.4..1.2f64) {
        let m = |w: f64| dob_stability_margin(&QFilter::new(w, zeta), 0.002).unwrap().phase_margin_deg;
        prop_assert!(m(a * f) < m(a));
    }
}
