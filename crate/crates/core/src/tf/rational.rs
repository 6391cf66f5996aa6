//! Rational transfer functions with a pure time delay.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::polynomial::Polynomial;
use super::roots::find_roots;
use super::TfError;

/// Smallest denominator magnitude treated as nonzero on the imaginary axis.
pub const POLE_ON_AXIS_THRESHOLD: f64 = 1e-300;

/// Two roots closer than this (relative) are treated as a common factor by [`Tf::minreal`].
pub const CANCELLATION_TOLERANCE: f64 = 1e-6;

/// `num(s) / den(s) * exp(-s * delay)`, kept with a monic denominator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tf {
    num: Polynomial,
    den: Polynomial,
    delay: f64,
}

/// Binary and unary operations accepted by [`Tf::apply`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfOp {
    Add,
    Sub,
    Mul,
    Div,
    Inv,
}

impl Tf {
    pub fn new(num: Polynomial, den: Polynomial, delay: f64) -> Result<Self, TfError> {
        if den.is_zero() {
            return Err(TfError::ZeroDenominator);
        }
        if !(delay.is_finite()) {
            return Err(TfError::NonFinite);
        }
        if num
            .coeffs()
            .iter()
            .chain(den.coeffs())
            .any(|c| !c.is_finite())
        {
            return Err(TfError::NonFinite);
        }
        Ok(Tf { num, den, delay }.canonical())
    }

    /// Convenience constructor from ascending coefficient slices, no delay.
    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self, TfError> {
        Tf::new(Polynomial::new(num), Polynomial::new(den), 0.0)
    }

    pub fn gain(k: f64) -> Self {
        Tf {
            num: Polynomial::constant(k),
            den: Polynomial::constant(1.0),
            delay: 0.0,
        }
    }

    pub fn zero() -> Self {
        Tf::gain(0.0)
    }

    /// `exp(-s * delay)`.
    pub fn pure_delay(delay: f64) -> Self {
        Tf {
            num: Polynomial::constant(1.0),
            den: Polynomial::constant(1.0),
            delay,
        }
    }

    /// The polynomial `p(s)` as a transfer function.
    pub fn polynomial(p: Polynomial) -> Self {
        Tf {
            num: p,
            den: Polynomial::constant(1.0),
            delay: 0.0,
        }
    }

    /// `1 / (a2 s^2 + a1 s + a0)`, the compliance of a mass-damper-spring.
    pub fn second_order_compliance(a2: f64, a1: f64, a0: f64) -> Result<Self, TfError> {
        Tf::from_coeffs(&[1.0], &[a0, a1, a2])
    }

    /// `wn^2 / (s^2 + 2 zeta wn s + wn^2)`.
    pub fn low_pass2(omega: f64, zeta: f64) -> Result<Self, TfError> {
        let w2 = omega * omega;
        Tf::from_coeffs(&[w2], &[w2, 2.0 * zeta * omega, 1.0])
    }

    pub fn with_delay(mut self, delay: f64) -> Self {
        self.delay = delay;
        self
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// `deg num - deg den`; `None` for the zero function.
    pub fn excess_degree(&self) -> Option<isize> {
        Some(self.num.degree()? as isize - self.den.degree()? as isize)
    }

    pub fn is_proper(&self) -> bool {
        self.excess_degree().is_none_or(|d| d <= 0)
    }

    /// Monic denominator, common powers of `s` removed.
    fn canonical(mut self) -> Self {
        if self.num.is_zero() {
            return Tf {
                num: Polynomial::zero(),
                den: Polynomial::constant(1.0),
                delay: self.delay,
            };
        }
        let common = self
            .num
            .zero_root_multiplicity()
            .min(self.den.zero_root_multiplicity());
        if common > 0 {
            self.num = self.num.shift_down(common);
            self.den = self.den.shift_down(common);
        }
        let lead = self.den.leading();
        self.num = self.num.scale(1.0 / lead);
        self.den = self.den.scale(1.0 / lead);
        self
    }

    pub fn apply(&self, op: TfOp, other: Option<&Tf>) -> Result<Tf, TfError> {
        match (op, other) {
            (TfOp::Inv, _) => self.inv(),
            (_, None) => Err(TfError::MissingOperand),
            (TfOp::Add, Some(b)) => self.add(b),
            (TfOp::Sub, Some(b)) => self.sub(b),
            (TfOp::Mul, Some(b)) => Ok(self.mul(b)),
            (TfOp::Div, Some(b)) => self.div(b),
        }
    }

    pub fn add(&self, other: &Tf) -> Result<Tf, TfError> {
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.delay != other.delay {
            return Err(TfError::DelayMismatch {
                left: self.delay,
                right: other.delay,
            });
        }
        if self.den == other.den {
            return Tf::new(&self.num + &other.num, self.den.clone(), self.delay);
        }
        Tf::new(
            &(&self.num * &other.den) + &(&other.num * &self.den),
            &self.den * &other.den,
            self.delay,
        )
    }

    pub fn sub(&self, other: &Tf) -> Result<Tf, TfError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Tf {
        Tf {
            num: -&self.num,
            den: self.den.clone(),
            delay: self.delay,
        }
    }

    pub fn scale(&self, k: f64) -> Tf {
        Tf {
            num: self.num.scale(k),
            den: self.den.clone(),
            delay: self.delay,
        }
        .canonical()
    }

    pub fn mul(&self, other: &Tf) -> Tf {
        Tf {
            num: &self.num * &other.num,
            den: &self.den * &other.den,
            delay: self.delay + other.delay,
        }
        .canonical()
    }

    pub fn inv(&self) -> Result<Tf, TfError> {
        if self.num.is_zero() {
            return Err(TfError::ZeroNumerator);
        }
        if self.delay != 0.0 {
            return Err(TfError::NonInvertibleDelay(self.delay));
        }
        Tf::new(self.den.clone(), self.num.clone(), 0.0)
    }

    pub fn div(&self, other: &Tf) -> Result<Tf, TfError> {
        if other.num.is_zero() {
            return Err(TfError::ZeroNumerator);
        }
        let delay = self.delay - other.delay;
        if delay < 0.0 {
            return Err(TfError::NonInvertibleDelay(other.delay));
        }
        Tf::new(&self.num * &other.den, &self.den * &other.num, delay)
    }

    /// Cancels pole/zero pairs that coincide to within [`CANCELLATION_TOLERANCE`].
    ///
    /// Matching factors are divided out of the original coefficient vectors,
    /// so surviving coefficients are not rebuilt from roots.
    pub fn minreal(&self) -> Result<Tf, TfError> {
        let (Some(nd), Some(dd)) = (self.num.degree(), self.den.degree()) else {
            return Ok(self.clone());
        };
        if nd == 0 || dd == 0 {
            return Ok(self.clone());
        }
        let zeros = find_roots(&self.num)?;
        let poles = find_roots(&self.den)?;
        let mut used = vec![false; zeros.len()];
        let mut num = self.num.clone();
        let mut den = self.den.clone();
        for p in poles.iter().filter(|p| p.im >= 0.0) {
            let tol = CANCELLATION_TOLERANCE * (1.0 + p.norm());
            let hit = zeros
                .iter()
                .enumerate()
                .filter(|&(j, z)| !used[j] && z.im >= 0.0 && (z - p).norm() <= tol)
                .min_by(|a, b| (a.1 - p).norm().total_cmp(&(b.1 - p).norm()));
            if let Some((j, z)) = hit {
                used[j] = true;
                let r = (z + p) * 0.5;
                let r = if p.im == 0.0 || z.im == 0.0 {
                    Complex64::new(r.re, 0.0)
                } else {
                    r
                };
                num = num.deflate(r);
                den = den.deflate(r);
            }
        }
        Tf::new(num, den, self.delay)
    }

    /// `H(jw)`, delay phase included exactly.
    pub fn eval(&self, omega: f64) -> Result<Complex64, TfError> {
        self.eval_s(Complex64::new(0.0, omega))
    }

    pub fn eval_s(&self, s: Complex64) -> Result<Complex64, TfError> {
        let d = self.den.eval_complex(s);
        if d.norm() < POLE_ON_AXIS_THRESHOLD {
            return Err(TfError::PoleOnAxis(s.im));
        }
        let n = self.num.eval_complex(s);
        Ok(n / d * (-s * self.delay).exp())
    }

    /// Value at `s = 0` (ignores the delay, which is 1 at DC).
    pub fn dc_gain(&self) -> Result<f64, TfError> {
        let d = self.den.coeff(0);
        if d == 0.0 {
            return Err(TfError::PoleOnAxis(0.0));
        }
        Ok(self.num.coeff(0) / d)
    }

    pub fn poles(&self) -> Result<Vec<Complex64>, TfError> {
        match self.den.degree() {
            Some(0) | None => Ok(Vec::new()),
            _ => find_roots(&self.den),
        }
    }

    pub fn zeros(&self) -> Result<Vec<Complex64>, TfError> {
        match self.num.degree() {
            Some(0) | None => Ok(Vec::new()),
            _ => find_roots(&self.num),
        }
    }
}

impl fmt::Display for Tf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)?;
        if self.delay != 0.0 {
            write!(f, " * exp(-{} s)", self.delay)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrator() -> Tf {
        Tf::from_coeffs(&[1.0], &[0.0, 1.0]).unwrap()
    }

    #[test]
    fn add_integrators() {
        let two = integrator().add(&integrator()).unwrap();
        assert_eq!(two, Tf::from_coeffs(&[2.0], &[0.0, 1.0]).unwrap());
    }

    #[test]
    fn delays_add_under_multiplication() {
        let a = Tf::from_coeffs(&[1.0], &[1.0, 1.0]).unwrap().with_delay(0.001);
        let b = Tf::from_coeffs(&[1.0], &[2.0, 1.0]).unwrap().with_delay(0.001);
        let c = a.mul(&b);
        assert_eq!(c.den().coeffs(), &[2.0, 3.0, 1.0]);
        assert_eq!(c.num().coeffs(), &[1.0]);
        assert!((c.delay() - 0.002).abs() < 1e-15);
    }

    #[test]
    fn inverse_swaps_and_normalizes() {
        let a = Tf::from_coeffs(&[2.0, 1.0], &[1.0, 3.0, 1.0]).unwrap();
        let inv = a.inv().unwrap();
        assert_eq!(inv.num().coeffs(), &[1.0, 3.0, 1.0]);
        assert_eq!(inv.den().coeffs(), &[2.0, 1.0]);
        let one = a.mul(&inv).minreal().unwrap();
        assert_eq!(one.num().coeffs(), &[1.0]);
        assert_eq!(one.den().coeffs(), &[1.0]);
    }

    #[test]
    fn error_paths() {
        let a = integrator().with_delay(0.01);
        assert!(matches!(
            a.add(&integrator()),
            Err(TfError::DelayMismatch { .. })
        ));
        assert!(matches!(a.inv(), Err(TfError::NonInvertibleDelay(_))));
        assert!(matches!(Tf::zero().inv(), Err(TfError::ZeroNumerator)));
        assert!(matches!(
            integrator().div(&Tf::zero()),
            Err(TfError::ZeroNumerator)
        ));
        assert!(matches!(
            Tf::from_coeffs(&[1.0], &[0.0]),
            Err(TfError::ZeroDenominator)
        ));
    }

    #[test]
    fn integrator_phase() {
        let v = integrator().eval(1.0).unwrap();
        assert!((v - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn pure_delay_phase() {
        let v = Tf::pure_delay(0.002).eval(100.0).unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-15);
        assert!((v.arg() + 0.2).abs() < 1e-14);
    }

    #[test]
    fn pole_on_axis_is_reported() {
        let osc = Tf::from_coeffs(&[1.0], &[1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(osc.eval(1.0), Err(TfError::PoleOnAxis(_))));
    }

    #[test]
    fn structural_s_cancellation() {
        let t = Tf::from_coeffs(&[0.0, 0.0, 3.0], &[0.0, 2.0, 1.0]).unwrap();
        assert_eq!(t.num().coeffs(), &[0.0, 3.0]);
        assert_eq!(t.den().coeffs(), &[2.0, 1.0]);
    }

    #[test]
    fn minreal_removes_complex_pair() {
        // (s^2 + s + 4)(s + 1) / ((s^2 + s + 4)(s + 5))
        let q = Polynomial::new(vec![4.0, 1.0, 1.0]);
        let num = &q * &Polynomial::new(vec![1.0, 1.0]);
        let den = &q * &Polynomial::new(vec![5.0, 1.0]);
        let t = Tf::new(num, den, 0.0).unwrap().minreal().unwrap();
        assert_eq!(t.den().degree(), Some(1));
        assert!((t.num().coeff(0) - 1.0).abs() < 1e-12);
        assert!((t.den().coeff(0) - 5.0).abs() < 1e-12);
    }
}
