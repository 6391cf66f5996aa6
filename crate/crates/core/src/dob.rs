//! Transmission disturbance observer.
//!
//! The observer inverts the motor model `J_m s^2 + B_m s` behind a low-pass
//! `Q`, estimating the torque that the model cannot explain.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tf::{discretize_tustin, DiscreteFilter, Polynomial, Tf, TfError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DobError {
    #[error("Q must have relative degree >= 2, got {0}")]
    InsufficientRelativeDegree(isize),
    #[error("loop gain never reaches unity")]
    NoCrossover,
    #[error("phase margin is not monotone in omega_q near {0} rad/s")]
    NonMonotonicMargin(f64),
    #[error("delay must be positive, got {0}")]
    NonPositiveDelay(f64),
    #[error(transparent)]
    Tf(#[from] TfError),
}

pub fn default_omega_q() -> f64 {
    2.0 * std::f64::consts::PI * 20.0
}
pub fn default_zeta_q() -> f64 {
    0.7
}

/// `Q(s) = w_q^2 / (s^2 + 2 zeta_q w_q s + w_q^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QFilter {
    #[serde(default = "default_omega_q")]
    pub omega_q: f64,
    #[serde(default = "default_zeta_q")]
    pub zeta_q: f64,
}

impl Default for QFilter {
    fn default() -> Self {
        QFilter {
            omega_q: default_omega_q(),
            zeta_q: default_zeta_q(),
        }
    }
}

impl QFilter {
    pub fn new(omega_q: f64, zeta_q: f64) -> Self {
        QFilter { omega_q, zeta_q }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.omega_q > 0.0 && self.omega_q.is_finite()) {
            return Err(format!("dob.omega_q must be positive, got {}", self.omega_q));
        }
        if !(self.zeta_q > 0.0 && self.zeta_q.is_finite()) {
            return Err(format!("dob.zeta_q must be positive, got {}", self.zeta_q));
        }
        Ok(())
    }

    pub fn tf(&self) -> Tf {
        Tf::low_pass2(self.omega_q, self.zeta_q).expect("positive cutoff")
    }
}

/// `L(s) = Q / (1 - Q) e^{-sT}`.
pub fn dob_loop_gain(q: &QFilter, delay: f64) -> Tf {
    let qt = q.tf();
    let one_minus = Tf::gain(1.0).sub(&qt).expect("delay-free");
    qt.div(&one_minus)
        .and_then(|l| l.minreal())
        .expect("1 - Q is nonzero")
        .with_delay(delay)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DobMargin {
    pub phase_margin_deg: f64,
    /// Unity-gain crossover of the loop, rad/s.
    pub crossover: f64,
    /// Cutoff at which the phase margin reaches zero for this `zeta_q` and delay.
    pub critical_omega_q: f64,
}

/// Phase of `L(jw)` in degrees without wrapping: rational part plus `-wT`.
fn unwrapped_phase_deg(l: &Tf, w: f64) -> Result<f64, TfError> {
    let rational = l.clone().with_delay(0.0).eval(w)?;
    Ok((rational.arg() - w * l.delay()).to_degrees())
}

/// Crossover frequency and phase margin of a loop with decreasing magnitude.
pub fn phase_margin(l: &Tf) -> Result<(f64, f64), DobError> {
    let mag = |w: f64| l.eval(w).map(|v| v.norm());
    let (mut lo, mut hi) = (1e-6, 1e-6);
    if mag(lo)? < 1.0 {
        return Err(DobError::NoCrossover);
    }
    while mag(hi)? >= 1.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(DobError::NoCrossover);
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mag(mid)? >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    let wc = (lo * hi).sqrt();
    Ok((wc, 180.0 + unwrapped_phase_deg(l, wc)?))
}

/// Phase margin for a given cutoff; the crossover is returned alongside.
pub fn dob_phase_margin(q: &QFilter, delay: f64) -> Result<(f64, f64), DobError> {
    phase_margin(&dob_loop_gain(q, delay))
}

pub fn dob_stability_margin(q: &QFilter, delay: f64) -> Result<DobMargin, DobError> {
    if !(delay > 0.0) {
        return Err(DobError::NonPositiveDelay(delay));
    }
    let (crossover, pm) = dob_phase_margin(q, delay)?;
    let pm_at = |w: f64| dob_phase_margin(&QFilter::new(w, q.zeta_q), delay).map(|r| r.1);
    let mut lo = 1e-3 / delay;
    let mut hi = lo;
    while pm_at(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 / delay {
            return Err(DobError::NoCrossover);
        }
    }
    // Margin must fall steadily across the bracket.
    let mut prev = f64::INFINITY;
    for k in 0..=32 {
        let w = lo * (hi / lo).powf(k as f64 / 32.0);
        let m = pm_at(w)?;
        if m > prev + 1e-9 {
            return Err(DobError::NonMonotonicMargin(w));
        }
        prev = m;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if pm_at(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * hi {
            break;
        }
    }
    Ok(DobMargin {
        phase_margin_deg: pm,
        crossover,
        critical_omega_q: 0.5 * (lo + hi),
    })
}

/// Runtime observer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObserverSettings {
    pub q: QFilter,
    /// Symmetric bound on the estimate, N·m.
    pub saturation: f64,
}

/// Discrete observer state.
#[derive(Debug, Clone)]
pub struct Dob {
    /// `Q (J_m s^2 + B_m s)` acting on motor position.
    inverse_plant: DiscreteFilter,
    /// `Q` acting on the known torques.
    q: DiscreteFilter,
    saturation: f64,
    estimate: f64,
    frozen: bool,
}

impl Dob {
    pub fn new(q: &QFilter, j_m: f64, b_m: f64, dt: f64, saturation: f64) -> Result<Self, DobError> {
        let qt = q.tf();
        let rel = -qt.excess_degree().unwrap_or(0);
        if rel < 2 {
            return Err(DobError::InsufficientRelativeDegree(rel));
        }
        let plant_inv = Tf::polynomial(Polynomial::new(vec![0.0, b_m, j_m]));
        let inverse_plant = discretize_tustin(&qt.mul(&plant_inv), dt)?;
        let qd = discretize_tustin(&qt, dt)?;
        Ok(Dob {
            inverse_plant: DiscreteFilter::new(&inverse_plant),
            q: DiscreteFilter::new(&qd),
            saturation,
            estimate: 0.0,
            frozen: false,
        })
    }

    /// Swaps in a new motor model, keeping the filter states.
    pub fn retune(&mut self, q: &QFilter, j_m: f64, b_m: f64, dt: f64) -> Result<(), DobError> {
        let qt = q.tf();
        let plant_inv = Tf::polynomial(Polynomial::new(vec![0.0, b_m, j_m]));
        self.inverse_plant.retune(&discretize_tustin(&qt.mul(&plant_inv), dt)?);
        self.q.retune(&discretize_tustin(&qt, dt)?);
        Ok(())
    }

    /// One sample: `delta_hat = Q[(J_m s^2 + B_m s) theta_m - tau_s - tau_m]`.
    pub fn update(&mut self, theta_m: f64, tau_s: f64, tau_m_applied: f64) -> f64 {
        let a = self.inverse_plant.step(theta_m);
        let b = self.q.step(tau_s + tau_m_applied);
        if !self.frozen {
            self.estimate = (a - b).clamp(-self.saturation, self.saturation);
        }
        self.estimate
    }

    /// Holds the current estimate while set.
    pub fn set_frozen(&mut self, frozen: bool) {
        self.frozen = frozen;
    }

    pub fn estimate(&self) -> f64 {
        self.estimate
    }

    pub fn is_finite(&self) -> bool {
        self.inverse_plant.is_finite() && self.q.is_finite() && self.estimate.is_finite()
    }
}
