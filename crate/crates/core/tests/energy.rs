//! Energy bookkeeping of the unforced mechanical network.

use exoshape::interconnect::PlantParams;
use exoshape::sim::{Boundary, FrictionModel, HumanModel, Plant, PlantState};
use proptest::prelude::*;

fn params(b_m: f64) -> PlantParams {
    PlantParams {
        j_m: 1.0,
        b_m,
        k_s: 500.0,
        j_j: 0.15,
        k_c: 300.0,
        delay: 0.002,
    }
}

fn displaced() -> PlantState {
    PlantState {
        theta_m: 0.05,
        omega_m: -0.3,
        theta_j: -0.02,
        omega_j: 0.4,
        theta_h: 0.01,
        omega_h: 0.0,
    }
}

fn energies(b_m: f64, human: &HumanModel, steps: usize) -> Vec<f64> {
    let plant = Plant {
        params: params(b_m),
        friction: FrictionModel::new(0.0),
        boundary: Boundary::Human(human),
    };
    let mut x = displaced();
    let dt = 1e-4;
    let mut out = vec![plant.energy(&x, 0.0, 0.0)];
    for k in 0..steps {
        x = plant.step(&x, k as f64 * dt, dt, 0.0, &|_| 0.0);
        out.push(plant.energy(&x, (k + 1) as f64 * dt, 0.0));
    }
    out
}

#[test]
fn lossless_network_conserves_energy() {
    for h in [HumanModel::spring(800.0), HumanModel::pure_inertia(0.05)] {
        let e = energies(0.0, &h, 20_000);
        let drift = e.iter().map(|v| (v - e[0]).abs()).fold(0.0, f64::max);
        assert!(drift <= 1e-6 * e[0], "drift {drift:e} of {}", e[0]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn motor_damping_only_dissipates(b_m in 0.5..30.0f64, k_h in 10.0..3000.0f64) {
        let e = energies(b_m, &HumanModel::spring(k_h), 5_000);
        for w in e.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-9));
        }
        prop_assert!(e[e.len() - 1] < e[0]);
    }
}
