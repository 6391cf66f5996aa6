//! Chain-built compliances against a direct linear solve of the model
//! equations at each frequency.

use exoshape::interconnect::{build_system_chain, Feedback, PlantParams};
use exoshape::shaping::{double_compliance_design, extract_sea_gains, ComplianceShape, DesignSpec, SeaGains};
use exoshape::tf::Tf;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Unknowns: theta_m, theta_j, tau_s, tau_m, u_theta, u_s.
/// Joint driven by an external torque of one; returns theta_j.
fn direct_c5(p: &PlantParams, gt: Complex64, gs: Complex64, w: f64) -> Complex64 {
    let s = Complex64::new(0.0, w);
    let z = Complex64::new(0.0, 0.0);
    let one = c(1.0);
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(6, 6, &[
        // tau_s = K_s (theta_j - theta_m)
        c(p.k_s), c(-p.k_s), one, z, z, z,
        // J_m s^2 theta_m + B_m s theta_m = tau_s + tau_m
        s * s * p.j_m + s * p.b_m, z, -one, -one, z, z,
        // J_j s^2 theta_j = tau_e - tau_s
        z, s * s * p.j_j, one, z, z, z,
        // u_theta = G_theta theta_m
        -gt, z, z, z, one, z,
        // u_s = G_s tau_s
        z, z, -gs, z, z, one,
        // tau_m = u_theta + u_s
        z, z, z, one, -one, -one,
    ]);
    let b = DVector::from_vec(vec![z, z, one, z, z, z]);
    a.lu().solve(&b).expect("nonsingular")[1]
}

/// Unknowns: theta_m, theta_j, theta_h, tau_s, tau_c, tau_m. The cuff is
/// driven by a torque of one at the human side; returns theta_h.
fn direct_c7(p: &PlantParams, fb: &Feedback<Tf>, delay: f64, w: f64) -> Complex64 {
    let s = Complex64::new(0.0, w);
    let e = (-s * delay).exp();
    let gt = fb.g_theta.eval(w).unwrap() * e;
    let gs = fb.g_s.eval(w).unwrap() * e;
    let gc = fb.g_c.eval(w).unwrap() * e;
    let z = c(0.0);
    let one = c(1.0);
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(6, 6, &[
        c(p.k_s), c(-p.k_s), z, one, z, z,
        s * s * p.j_m + s * p.b_m, z, z, -one, z, -one,
        z, s * s * p.j_j, z, one, -one, z,
        // tau_c = K_c (theta_h - theta_j)
        z, c(p.k_c), c(-p.k_c), z, one, z,
        // tau_m = e^{-sT}(G_theta theta_m + G_s tau_s + G_c tau_c)
        -gt, z, z, -gs, -gc, one,
        // tau_c equals the applied torque
        z, z, z, z, one, z,
    ]);
    let b = DVector::from_vec(vec![z, z, z, z, z, one]);
    a.lu().solve(&b).expect("nonsingular")[2]
}

fn random_plant(rng: &mut ChaCha8Rng) -> PlantParams {
    PlantParams {
        j_m: rng.random_range(0.2..5.0),
        b_m: rng.random_range(0.5..20.0),
        k_s: rng.random_range(100.0..5000.0),
        j_j: rng.random_range(0.02..0.5),
        k_c: rng.random_range(50.0..2000.0),
        delay: 0.002,
    }
}

fn feedback(g: &SeaGains) -> Feedback<Tf> {
    Feedback {
        g_theta: Tf::from_coeffs(&[-g.k1, -g.b1], &[1.0]).unwrap(),
        g_s: Tf::from_coeffs(&[g.k2_tau, g.b2_tau], &[1.0]).unwrap(),
        g_c: Tf::zero(),
    }
}

fn omegas() -> Vec<f64> {
    (0..50).map(|k| 10f64.powf(-1.0 + 4.0 * k as f64 / 49.0)).collect()
}

#[test]
fn c5_matches_six_equation_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let p = random_plant(&mut rng);
        let shape = ComplianceShape {
            k1: rng.random_range(0.0..50.0),
            b1: rng.random_range(1.0..40.0),
            k2: rng.random_range(50.0..2000.0),
            b2: rng.random_range(1.0..80.0),
        };
        let fb = feedback(&extract_sea_gains(&shape, &p));
        let vm = DesignSpec::new(2.0 * p.j_m, 2.0 * p.b_m, 4.0).virtual_motor();
        let chain = build_system_chain(&p, &fb, vm).unwrap();
        for w in omegas() {
            let got = chain.c5().eval(w).unwrap();
            let want = direct_c5(&p, fb.g_theta.eval(w).unwrap(), fb.g_s.eval(w).unwrap(), w);
            worst = worst.max((got - want).norm() / want.norm());
        }
    }
    assert!(worst <= 1e-9, "worst relative error {worst:e}");
}

#[test]
fn zero_gains_give_open_loop_c4() {
    let p = PlantParams {
        j_m: 1.0,
        b_m: 6.0,
        k_s: 500.0,
        j_j: 0.15,
        k_c: 300.0,
        delay: 0.002,
    };
    let chain = build_system_chain(&p, &feedback(&SeaGains::zero()), DesignSpec::new(2.0, 12.0, 8.0).virtual_motor())
        .unwrap();
    // (J_m s^2 + B_m s + K_s) / ((J_m s^2 + B_m s) K_s)
    for w in omegas() {
        let s = Complex64::new(0.0, w);
        let want = (s * s + s * 6.0 + 500.0) / ((s * s + s * 6.0) * 500.0);
        let got = chain.c4().eval(w).unwrap();
        assert!((got - want).norm() <= 1e-12 * want.norm());
    }
}

#[test]
fn realized_c7_matches_delayed_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let p = random_plant(&mut rng);
        let spec = DesignSpec::new(
            p.j_m * rng.random_range(1.5..4.0),
            p.b_m * rng.random_range(1.0..3.0),
            rng.random_range(1.5..8.0),
        );
        let bundle = double_compliance_design(&spec, &p).unwrap();
        let hold = 0.0005;
        let chain = bundle.realized_chain(hold).unwrap();
        let fb = bundle.realized_feedback();
        for w in omegas() {
            let got = chain.c7().eval(w).unwrap();
            let want = direct_c7(&p, &fb, p.delay + hold, w);
            let err = (got - want).norm() / want.norm();
            assert!(err <= 1e-7, "w = {w}: {err:e}");
        }
    }
}

#[test]
fn nominal_c7_matches_designed_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let p = random_plant(&mut rng);
        let spec = DesignSpec::new(p.j_m * rng.random_range(1.5..4.0), p.b_m * 2.0, rng.random_range(1.0..8.0));
        let bundle = double_compliance_design(&spec, &p).unwrap();
        let chain = bundle.nominal_chain().unwrap();
        for w in omegas() {
            let got = chain.c7().eval(w).unwrap();
            let want = direct_c7(&p, &bundle.nominal_feedback(), 0.0, w);
            assert!((got - want).norm() <= 1e-8 * want.norm());
        }
    }
}
