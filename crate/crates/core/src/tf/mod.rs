//! Transfer-function algebra.
//!
//! [`Tf`] is a single-delay rational with exact coefficient arithmetic;
//! [`DelayedTf`] carries several delays at once and is used for loops closed
//! around a delayed actuator. Both implement [`Lti`] so interconnection code
//! can be written once.

mod delayed;
mod discrete;
mod polynomial;
mod rational;
mod roots;

pub use delayed::{DelayedTf, QuasiPolynomial};
pub use discrete::{discretize_tustin, DiscreteFilter, DiscreteTf};
pub use polynomial::Polynomial;
pub use rational::{Tf, TfOp, CANCELLATION_TOLERANCE, POLE_ON_AXIS_THRESHOLD};
pub use roots::find_roots;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TfError {
    #[error("cannot add transfer functions with delays {left} s and {right} s")]
    DelayMismatch { left: f64, right: f64 },
    #[error("a delay of {0} s has no causal inverse")]
    NonInvertibleDelay(f64),
    #[error("inverse of the zero transfer function")]
    ZeroNumerator,
    #[error("denominator is identically zero")]
    ZeroDenominator,
    #[error("pole on the imaginary axis at w = {0} rad/s")]
    PoleOnAxis(f64),
    #[error("root finder did not converge in {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("polynomial is identically zero")]
    ZeroPolynomial,
    #[error("polynomial has degree zero")]
    ConstantPolynomial,
    #[error("transfer function is improper")]
    ImproperTransferFunction,
    #[error("sample period must be positive, got {0}")]
    InvalidSamplePeriod(f64),
    #[error("non-finite coefficient")]
    NonFinite,
    #[error("binary operation needs a second operand")]
    MissingOperand,
    #[error("quasi-polynomial is not of retarded type")]
    NeutralQuasiPolynomial,
    #[error("argument principle gave a non-integer root count {0}")]
    WindingNotInteger(f64),
}

/// Closed-loop algebra shared by [`Tf`] and [`DelayedTf`].
pub trait Lti: Clone + Sized {
    fn gain(k: f64) -> Self;
    fn add(&self, other: &Self) -> Result<Self, TfError>;
    fn mul(&self, other: &Self) -> Self;
    fn inv(&self) -> Result<Self, TfError>;
    fn neg(&self) -> Self;
    fn is_zero(&self) -> bool;
    /// Cancels common factors where the representation allows it.
    fn simplify(self) -> Result<Self, TfError>;
    fn eval(&self, omega: f64) -> Result<Complex64, TfError>;

    fn sub(&self, other: &Self) -> Result<Self, TfError> {
        self.add(&other.neg())
    }

    fn div(&self, other: &Self) -> Result<Self, TfError> {
        Ok(self.mul(&other.inv()?))
    }
}

impl Lti for Tf {
    fn gain(k: f64) -> Self {
        Tf::gain(k)
    }
    fn add(&self, other: &Self) -> Result<Self, TfError> {
        Tf::add(self, other)
    }
    fn mul(&self, other: &Self) -> Self {
        Tf::mul(self, other)
    }
    fn inv(&self) -> Result<Self, TfError> {
        Tf::inv(self)
    }
    fn neg(&self) -> Self {
        Tf::neg(self)
    }
    fn is_zero(&self) -> bool {
        Tf::is_zero(self)
    }
    fn simplify(self) -> Result<Self, TfError> {
        self.minreal()
    }
    fn eval(&self, omega: f64) -> Result<Complex64, TfError> {
        Tf::eval(self, omega)
    }
    fn div(&self, other: &Self) -> Result<Self, TfError> {
        Tf::div(self, other)
    }
}

impl Lti for DelayedTf {
    fn gain(k: f64) -> Self {
        DelayedTf::gain(k)
    }
    fn add(&self, other: &Self) -> Result<Self, TfError> {
        Ok(DelayedTf::add(self, other))
    }
    fn mul(&self, other: &Self) -> Self {
        DelayedTf::mul(self, other)
    }
    fn inv(&self) -> Result<Self, TfError> {
        DelayedTf::inv(self)
    }
    fn neg(&self) -> Self {
        DelayedTf::neg(self)
    }
    fn is_zero(&self) -> bool {
        DelayedTf::is_zero(self)
    }
    fn simplify(self) -> Result<Self, TfError> {
        Ok(self)
    }
    fn eval(&self, omega: f64) -> Result<Complex64, TfError> {
        DelayedTf::eval(self, omega)
    }
}

/// Applies one arithmetic operation; `b` is ignored for [`TfOp::Inv`].
pub fn rational_arithmetic(a: &Tf, b: Option<&Tf>, op: TfOp) -> Result<Tf, TfError> {
    a.apply(op, b)
}

pub fn evaluate_at_frequency(tf: &Tf, omega: f64) -> Result<Complex64, TfError> {
    tf.eval(omega)
}

/// Absolute margin around the imaginary axis used by [`classify_stability`].
pub const STABILITY_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Marginal,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityClass {
    pub stability: Stability,
    /// Largest real part among the poles (`-inf` when there are none).
    pub worst_pole_real_part: f64,
    /// All zeros in the closed left half-plane.
    pub minimum_phase: bool,
}

/// Pole-based classification of the rational part; the delay is ignored.
pub fn classify_stability(tf: &Tf) -> Result<StabilityClass, TfError> {
    let worst = tf
        .poles()?
        .iter()
        .map(|p| p.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let stability = if worst < -STABILITY_EPSILON {
        Stability::Stable
    } else if worst <= STABILITY_EPSILON {
        Stability::Marginal
    } else {
        Stability::Unstable
    };
    let minimum_phase = tf.zeros()?.iter().all(|z| z.re <= STABILITY_EPSILON);
    Ok(StabilityClass {
        stability,
        worst_pole_real_part: worst,
        minimum_phase,
    })
}

/// Diagonal Padé approximant of `exp(-s T)` of the given order.
pub fn pade_delay(delay: f64, order: usize) -> Tf {
    if delay == 0.0 || order == 0 {
        return Tf::gain(1.0);
    }
    // c_k = (2n - k)! n! / ((2n)! k! (n - k)!)
    let n = order;
    let fact = |m: usize| (1..=m).fold(1.0_f64, |a, b| a * b as f64);
    let mut num = Vec::with_capacity(n + 1);
    let mut den = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let c = fact(2 * n - k) * fact(n) / (fact(2 * n) * fact(k) * fact(n - k));
        let tk = delay.powi(k as i32);
        den.push(c * tk);
        num.push(if k % 2 == 0 { c * tk } else { -c * tk });
    }
    Tf::from_coeffs(&num, &den).expect("Padé denominator is nonzero")
}

/// Replaces every delay by its Padé approximant, giving a plain rational.
pub fn pade_rational(d: &DelayedTf, order: usize) -> Result<Tf, TfError> {
    let expand = |q: &QuasiPolynomial| -> Result<Tf, TfError> {
        let mut acc = Tf::zero();
        for (delay, p) in q.terms() {
            let term = if *delay >= 0.0 {
                Tf::polynomial(p.clone()).mul(&pade_delay(*delay, order))
            } else {
                Tf::polynomial(p.clone()).mul(&pade_delay(-*delay, order).inv()?)
            };
            acc = acc.add(&term)?;
        }
        Ok(acc)
    };
    expand(d.num())?.div(&expand(d.den())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_first_order() {
        let c = classify_stability(&Tf::from_coeffs(&[1.0], &[1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(c.stability, Stability::Stable);
        assert!((c.worst_pole_real_part + 1.0).abs() < 1e-12);
    }

    #[test]
    fn classify_oscillator_marginal() {
        let c = classify_stability(&Tf::from_coeffs(&[1.0], &[1.0, 0.0, 1.0]).unwrap()).unwrap();
        assert_eq!(c.stability, Stability::Marginal);
        assert!(c.worst_pole_real_part.abs() < 1e-12);
    }

    #[test]
    fn classify_integrator_marginal() {
        let c = classify_stability(&Tf::from_coeffs(&[1.0], &[0.0, 1.0]).unwrap()).unwrap();
        assert_eq!(c.stability, Stability::Marginal);
    }

    #[test]
    fn classify_non_minimum_phase() {
        let c = classify_stability(&Tf::from_coeffs(&[-3.0, 1.0], &[2.0, 3.0, 1.0]).unwrap()).unwrap();
        assert_eq!(c.stability, Stability::Stable);
        assert!(!c.minimum_phase);
    }

    #[test]
    fn pade_matches_delay_at_low_frequency() {
        let p = pade_delay(0.002, 3);
        let w = 50.0;
        let exact = Complex64::new(0.0, -w * 0.002).exp();
        assert!((p.eval(w).unwrap() - exact).norm() < 1e-9);
    }
}
