//! Plant dynamics and the RK4 step.

use serde::{Deserialize, Serialize};

use super::human::HumanModel;
use crate::interconnect::PlantParams;

pub fn default_v_eps() -> f64 {
    0.01
}

/// Smoothed Coulomb friction `delta_f = -F_c tanh(omega_m / v_eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionModel {
    #[serde(rename = "F_c", default)]
    pub f_c: f64,
    #[serde(default = "default_v_eps")]
    pub v_eps: f64,
}

impl Default for FrictionModel {
    fn default() -> Self {
        FrictionModel {
            f_c: 0.0,
            v_eps: default_v_eps(),
        }
    }
}

impl FrictionModel {
    pub fn new(f_c: f64) -> Self {
        FrictionModel {
            f_c,
            v_eps: default_v_eps(),
        }
    }

    pub fn torque(&self, omega_m: f64) -> f64 {
        if self.f_c == 0.0 {
            0.0
        } else {
            -self.f_c * (omega_m / self.v_eps).tanh()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.f_c >= 0.0 && self.f_c.is_finite()) {
            return Err(format!("friction.F_c must be nonnegative, got {}", self.f_c));
        }
        if !(self.v_eps > 0.0 && self.v_eps.is_finite()) {
            return Err(format!("friction.v_eps must be positive, got {}", self.v_eps));
        }
        Ok(())
    }
}

/// Mechanical state. The human node is carried here as well; it is unused
/// unless a dynamic human model is attached.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PlantState {
    pub theta_m: f64,
    pub omega_m: f64,
    pub theta_j: f64,
    pub omega_j: f64,
    pub theta_h: f64,
    pub omega_h: f64,
}

impl PlantState {
    fn to_array(self) -> [f64; 6] {
        [
            self.theta_m,
            self.omega_m,
            self.theta_j,
            self.omega_j,
            self.theta_h,
            self.omega_h,
        ]
    }

    fn from_array(x: [f64; 6]) -> Self {
        PlantState {
            theta_m: x[0],
            omega_m: x[1],
            theta_j: x[2],
            omega_j: x[3],
            theta_h: x[4],
            omega_h: x[5],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// What terminates the cuff port.
#[derive(Debug, Clone, Copy)]
pub enum Boundary<'a> {
    /// Joint clamped at zero, cuff torque is the input.
    Locked,
    /// Joint free, cuff torque is the input.
    CuffTorque,
    /// Joint free, a human model on the far side of the cuff spring; the
    /// input is a torque applied at the human node.
    Human(&'a HumanModel),
}

/// Signals that follow from the state and the inputs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantOutputs {
    pub tau_s: f64,
    pub tau_c: f64,
    pub theta_h: f64,
    pub omega_h: f64,
    pub delta_f: f64,
}

pub struct Plant<'a> {
    pub params: PlantParams,
    pub friction: FrictionModel,
    pub boundary: Boundary<'a>,
}

impl Plant<'_> {
    /// Outputs at time `t` given the external input value `u`.
    pub fn outputs(&self, x: &PlantState, t: f64, u: f64) -> PlantOutputs {
        let p = &self.params;
        let tau_s = p.k_s * (x.theta_j - x.theta_m);
        let delta_f = self.friction.torque(x.omega_m);
        let (tau_c, theta_h, omega_h) = match self.boundary {
            Boundary::Locked | Boundary::CuffTorque => {
                (u, x.theta_j + u / p.k_c, x.omega_j)
            }
            Boundary::Human(h) => {
                if let Some(theta) = h.prescribed_angle(t) {
                    (p.k_c * (theta - x.theta_j), theta, 0.0)
                } else if h.has_inertia() || h.has_damping() {
                    (p.k_c * (x.theta_h - x.theta_j), x.theta_h, x.omega_h)
                } else {
                    // massless, damperless node: force balance fixes the angle
                    let theta = (u + p.k_c * x.theta_j) / (p.k_c + h.stiffness());
                    (p.k_c * (theta - x.theta_j), theta, 0.0)
                }
            }
        };
        PlantOutputs {
            tau_s,
            tau_c,
            theta_h,
            omega_h,
            delta_f,
        }
    }

    fn derivative(&self, x: [f64; 6], t: f64, tau_m: f64, u: f64) -> [f64; 6] {
        let p = &self.params;
        let s = PlantState::from_array(x);
        let o = self.outputs(&s, t, u);
        let acc_m = (o.tau_s + tau_m + o.delta_f - p.b_m * s.omega_m) / p.j_m;
        let (vel_j, acc_j) = match self.boundary {
            Boundary::Locked => (0.0, 0.0),
            _ => (s.omega_j, (o.tau_c - o.tau_s) / p.j_j),
        };
        let (vel_h, acc_h) = match self.boundary {
            Boundary::Human(h) if h.prescribed_angle(t).is_none() => {
                let net = u - o.tau_c - h.stiffness() * s.theta_h;
                if h.has_inertia() {
                    (s.omega_h, (net - h.damping() * s.omega_h) / h.inertia())
                } else if h.has_damping() {
                    (net / h.damping(), 0.0)
                } else {
                    (0.0, 0.0)
                }
            }
            _ => (0.0, 0.0),
        };
        [s.omega_m, acc_m, vel_j, acc_j, vel_h, acc_h]
    }

    /// One classical RK4 step of length `dt` with `tau_m` held and the
    /// input sampled from `u` at the stage times.
    pub fn step(
        &self,
        state: &PlantState,
        t: f64,
        dt: f64,
        tau_m: f64,
        u: &dyn Fn(f64) -> f64,
    ) -> PlantState {
        let x = state.to_array();
        let add = |a: [f64; 6], b: [f64; 6], h: f64| {
            let mut r = a;
            for i in 0..6 {
                r[i] += h * b[i];
            }
            r
        };
        let th = t + 0.5 * dt;
        let k1 = self.derivative(x, t, tau_m, u(t));
        let k2 = self.derivative(add(x, k1, 0.5 * dt), th, tau_m, u(th));
        let k3 = self.derivative(add(x, k2, 0.5 * dt), th, tau_m, u(th));
        let k4 = self.derivative(add(x, k3, dt), t + dt, tau_m, u(t + dt));
        let mut out = x;
        for i in 0..6 {
            out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let mut s = PlantState::from_array(out);
        if let Boundary::Human(h) = self.boundary {
            if !h.has_inertia() {
                s.omega_h = 0.0;
            }
        }
        if matches!(self.boundary, Boundary::Locked) {
            s.theta_j = 0.0;
            s.omega_j = 0.0;
        }
        s
    }

    /// Stored plus kinetic energy of the mechanical network.
    pub fn energy(&self, x: &PlantState, t: f64, u: f64) -> f64 {
        let p = &self.params;
        let o = self.outputs(x, t, u);
        let mut e = 0.5 * p.j_m * x.omega_m.powi(2)
            + 0.5 * p.j_j * x.omega_j.powi(2)
            + 0.5 * o.tau_s.powi(2) / p.k_s;
        if let Boundary::Human(h) = self.boundary {
            e += 0.5 * o.tau_c.powi(2) / p.k_c
                + 0.5 * h.stiffness() * o.theta_h.powi(2)
                + 0.5 * h.inertia() * o.omega_h.powi(2);
        }
        e
    }
}

/// Single step with a constant input, for callers without a signal.
pub fn step_plant(
    state: &PlantState,
    tau_m: f64,
    params: &PlantParams,
    boundary: Boundary<'_>,
    friction: &FrictionModel,
    u: f64,
    dt: f64,
) -> PlantState {
    let plant = Plant {
        params: *params,
        friction: *friction,
        boundary,
    };
    plant.step(state, 0.0, dt, tau_m, &|_| u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_plant() -> PlantParams {
        PlantParams {
            j_m: 1.0,
            b_m: 6.0,
            k_s: 500.0,
            j_j: 0.15,
            k_c: 300.0,
            delay: 0.002,
        }
    }

    #[test]
    fn rest_is_equilibrium() {
        let s0 = PlantState::default();
        let s = step_plant(&s0, 0.0, &demo_plant(), Boundary::CuffTorque, &FrictionModel::default(), 0.0, 1e-4);
        assert_eq!(s, s0);
    }

    #[test]
    fn locked_motor_settles_against_spring() {
        let p = demo_plant();
        let mut s = PlantState::default();
        for _ in 0..200_000 {
            s = step_plant(&s, 50.0, &p, Boundary::Locked, &FrictionModel::default(), 0.0, 1e-4);
        }
        // tau_s = -K_s theta_m balances the motor
        assert!((p.k_s * s.theta_m - 50.0).abs() < 1e-6);
        assert_eq!(s.theta_j, 0.0);
    }

    #[test]
    fn friction_opposes_motion() {
        let f = FrictionModel::new(20.0);
        assert!(f.torque(1.0) < -19.99);
        assert!(f.torque(-1.0) > 19.99);
        assert_eq!(f.torque(0.0), 0.0);
    }
}
