//! Discrete controller: composite SEA/cuff law, actuator delay and the DOB.

use std::collections::VecDeque;

use crate::dob::{Dob, DobError, ObserverSettings};
use crate::interconnect::PlantParams;
use crate::shaping::ControllerBundle;
use crate::tf::{discretize_tustin, DiscreteFilter, DiscreteTf, Tf, TfError};

/// `w s / (s + w)` at sample period `dt`.
pub fn derivative_filter(cutoff_hz: f64, dt: f64) -> Result<DiscreteTf, TfError> {
    let w = 2.0 * std::f64::consts::PI * cutoff_hz;
    discretize_tustin(&Tf::from_coeffs(&[0.0, w], &[w, 1.0])?, dt)
}

/// Torque delay line plus the observer; shared by every controller.
#[derive(Debug, Clone)]
pub struct Actuator {
    pending: VecDeque<f64>,
    delay_steps: usize,
    last_applied: f64,
    torque_limit: f64,
    dob: Option<Dob>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActuatorOutput {
    /// Torque reaching the motor during the coming interval.
    pub applied: f64,
    pub delta_hat: f64,
}

impl Actuator {
    pub fn new(delay_steps: usize, torque_limit: f64, dob: Option<Dob>) -> Self {
        Actuator {
            pending: std::iter::repeat_n(0.0, delay_steps).collect(),
            delay_steps,
            last_applied: 0.0,
            torque_limit,
            dob,
        }
    }

    pub fn dob_mut(&mut self) -> Option<&mut Dob> {
        self.dob.as_mut()
    }

    /// Takes the controller torque at this sample and returns what the motor
    /// receives now. The observer is fed the torque actually reaching the
    /// motor, aligned with the delay.
    pub fn step(&mut self, tau_ctrl: f64, theta_m: f64, tau_s: f64) -> ActuatorOutput {
        let due = self.pending.front().copied();
        let torque_seen = match due {
            Some(a) => 0.5 * (self.last_applied + a),
            None => self.last_applied,
        };
        let delta_hat = match self.dob.as_mut() {
            Some(d) => d.update(theta_m, tau_s, torque_seen),
            None => 0.0,
        };
        let raw = tau_ctrl - delta_hat;
        let command = raw.clamp(-self.torque_limit, self.torque_limit);
        if let Some(d) = self.dob.as_mut() {
            d.set_frozen(command != raw);
        }
        let applied = if self.delay_steps == 0 {
            command
        } else {
            self.pending.push_back(command);
            self.pending.pop_front().unwrap_or(0.0)
        };
        self.last_applied = applied;
        ActuatorOutput { applied, delta_hat }
    }

    pub fn is_finite(&self) -> bool {
        self.dob.as_ref().is_none_or(|d| d.is_finite()) && self.last_applied.is_finite()
    }
}

/// Scalar gains of the composite law.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Gains {
    k1: f64,
    b1: f64,
    k2: f64,
    b2: f64,
    k2_hat: f64,
    b2_hat: f64,
}

impl Gains {
    fn from_bundle(b: &ControllerBundle) -> Self {
        Gains {
            k1: b.sea.k1,
            b1: b.sea.b1,
            k2: b.sea.k2_tau,
            b2: b.sea.b2_tau,
            k2_hat: b.meta.k2_hat,
            b2_hat: b.meta.b2_hat,
        }
    }
}

/// `tau = -(K1 + B1 s) theta_m + (K2 + B2 s) tau_s + G_v (K2_hat + B2_hat s) tau_c`
/// with every `s` realized as a first-order filtered derivative.
#[derive(Debug, Clone)]
pub struct ExoController {
    gains: Gains,
    d_theta: DiscreteFilter,
    d_s: DiscreteFilter,
    d_c: DiscreteFilter,
    gv: DiscreteFilter,
    dt: f64,
}

impl ExoController {
    pub fn new(bundle: &ControllerBundle, dt: f64) -> Result<Self, TfError> {
        let d = derivative_filter(bundle.spec.derivative_cutoff_hz, dt)?;
        Ok(ExoController {
            gains: Gains::from_bundle(bundle),
            d_theta: DiscreteFilter::new(&d),
            d_s: DiscreteFilter::new(&d),
            d_c: DiscreteFilter::new(&d),
            gv: DiscreteFilter::new(&discretize_tustin(&bundle.gv_causal, dt)?),
            dt,
        })
    }

    /// New gains and `G_v` coefficients; filter states are kept.
    pub fn retune(&mut self, bundle: &ControllerBundle) -> Result<(), TfError> {
        self.gains = Gains::from_bundle(bundle);
        self.gv.retune(&discretize_tustin(&bundle.gv_causal, self.dt)?);
        Ok(())
    }

    pub fn torque(&mut self, theta_m: f64, tau_s: f64, tau_c: f64) -> f64 {
        let g = self.gains;
        let v_m = self.d_theta.step(theta_m);
        let v_s = self.d_s.step(tau_s);
        let v_c = self.d_c.step(tau_c);
        let cuff = self.gv.step(g.k2_hat * tau_c + g.b2_hat * v_c);
        -g.k1 * theta_m - g.b1 * v_m + g.k2 * tau_s + g.b2 * v_s + cuff
    }

    pub fn is_finite(&self) -> bool {
        self.d_theta.is_finite() && self.d_s.is_finite() && self.d_c.is_finite() && self.gv.is_finite()
    }
}

/// PD position loop on the motor angle.
#[derive(Debug, Clone)]
pub struct PdController {
    pub kp: f64,
    pub kd: f64,
    d_theta: DiscreteFilter,
}

impl PdController {
    pub fn new(kp: f64, kd: f64, cutoff_hz: f64, dt: f64) -> Result<Self, TfError> {
        Ok(PdController {
            kp,
            kd,
            d_theta: DiscreteFilter::new(&derivative_filter(cutoff_hz, dt)?),
        })
    }

    pub fn torque(&mut self, reference: f64, reference_rate: f64, theta_m: f64) -> f64 {
        let v = self.d_theta.step(theta_m);
        self.kp * (reference - theta_m) + self.kd * (reference_rate - v)
    }
}

pub fn build_dob_for(
    observer: Option<&ObserverSettings>,
    p: &PlantParams,
    dt: f64,
) -> Result<Option<Dob>, DobError> {
    observer
        .map(|o| Dob::new(&o.q, p.j_m, p.b_m, dt, o.saturation))
        .transpose()
}
