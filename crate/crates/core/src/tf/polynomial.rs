//! Real polynomials in the Laplace variable, stored in ascending powers.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Relative size below which a coefficient counts as zero: against the
/// operands for sums, against the largest coefficient for roots at `s = 0`.
pub const TRIM_TOLERANCE: f64 = 1e-12;

/// A real polynomial `coeffs[0] + coeffs[1] s + coeffs[2] s^2 + ...`.
///
/// The highest-index coefficient is always nonzero; the zero polynomial has
/// an empty coefficient vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        let mut p = Polynomial {
            coeffs: coeffs.into(),
        };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    /// `s`
    pub fn s() -> Self {
        Polynomial::new(vec![0.0, 1.0])
    }

    /// Monic polynomial with the given real roots.
    pub fn from_real_roots(roots: &[f64]) -> Self {
        roots.iter().fold(Polynomial::constant(1.0), |acc, &r| {
            acc * Polynomial::new(vec![-r, 1.0])
        })
    }

    /// Drops trailing zero coefficients. Coefficients of physical models
    /// routinely span many decades, so small is not treated as zero here.
    fn trim(&mut self) {
        while self.coeffs.last() == Some(&0.0) {
            self.coeffs.pop();
        }
    }

    /// Coefficient-wise `a + sign b`, flushing terms that cancel to rounding level.
    fn combine(&self, rhs: &Polynomial, sign: f64) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new(
            (0..n)
                .map(|k| {
                    let (a, b) = (self.coeff(k), sign * rhs.coeff(k));
                    let c = a + b;
                    if c.abs() <= TRIM_TOLERANCE * (a.abs() + b.abs()) {
                        0.0
                    } else {
                        c
                    }
                })
                .collect::<Vec<_>>(),
        )
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    pub fn scale(&self, k: f64) -> Self {
        Polynomial::new(self.coeffs.iter().map(|c| c * k).collect::<Vec<_>>())
    }

    /// Multiplies by `s^k`.
    pub fn shift_up(&self, k: usize) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let mut c = vec![0.0; k];
        c.extend_from_slice(&self.coeffs);
        Polynomial { coeffs: c }
    }

    /// Number of leading zero coefficients, i.e. the multiplicity of the root at `s = 0`.
    pub fn zero_root_multiplicity(&self) -> usize {
        let max = self.max_abs_coeff();
        self.coeffs
            .iter()
            .take_while(|c| c.abs() <= TRIM_TOLERANCE * max)
            .count()
    }

    /// Divides by `s^k`, discarding the low coefficients.
    pub fn shift_down(&self, k: usize) -> Self {
        Polynomial::new(self.coeffs.iter().skip(k).copied().collect::<Vec<_>>())
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// `sum |c_k| |z|^k`, the natural scale for residuals at `z`.
    pub fn eval_abs(&self, r: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * r + c.abs())
    }

    pub fn derivative(&self) -> Self {
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * k as f64)
                .collect::<Vec<_>>(),
        )
    }

    /// Long division; returns `(quotient, remainder)`.
    pub fn div_rem(&self, divisor: &Polynomial) -> (Polynomial, Polynomial) {
        let dd = divisor.degree().expect("division by zero polynomial");
        let Some(nd) = self.degree() else {
            return (Polynomial::zero(), Polynomial::zero());
        };
        if nd < dd {
            return (Polynomial::zero(), self.clone());
        }
        let mut rem = self.coeffs.clone();
        let mut quot = vec![0.0; nd - dd + 1];
        let lead = divisor.leading();
        for k in (0..=nd - dd).rev() {
            let q = rem[k + dd] / lead;
            quot[k] = q;
            for (j, &d) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= q * d;
            }
            rem[k + dd] = 0.0;
        }
        rem.truncate(dd);
        (Polynomial::new(quot), Polynomial::new(rem))
    }

    /// Removes the factor `(s - r)` (real `r`) or `(s^2 - 2 Re(r) s + |r|^2)`
    /// (complex `r`), discarding the remainder.
    pub fn deflate(&self, r: Complex64) -> Polynomial {
        let factor = if r.im == 0.0 {
            Polynomial::new(vec![-r.re, 1.0])
        } else {
            Polynomial::new(vec![r.norm_sqr(), -2.0 * r.re, 1.0])
        };
        self.div_rem(&factor).0
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.combine(rhs, -1.0)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut c = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Polynomial::new(c)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: Polynomial) -> Polynomial {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " {} ", if c < 0.0 { '-' } else { '+' })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            let a = c.abs();
            match k {
                0 => write!(f, "{a}")?,
                1 => write!(f, "{a}*s")?,
                _ => write!(f, "{a}*s^{k}")?,
            }
            first = false;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trims_trailing_zeros() {
        let p = Polynomial::new(vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.degree(), Some(1));
        assert!(Polynomial::new(vec![0.0, 0.0]).is_zero());
        // small but genuine leading coefficients survive
        assert_eq!(Polynomial::new(vec![1e16, 1.0]).degree(), Some(1));
    }

    #[test]
    fn cancellation_in_sums_is_exact_zero() {
        let a = Polynomial::new(vec![1.0, 0.1 + 0.2]);
        let b = Polynomial::new(vec![0.0, 0.3]);
        assert_eq!((&a - &b).degree(), Some(0));
        let wide = &Polynomial::new(vec![1e9, 0.0, 1.0]) * &Polynomial::new(vec![1e9, 1.0]);
        assert_eq!(wide.degree(), Some(3));
    }

    #[test]
    fn long_division_recovers_factor() {
        let a = Polynomial::new(vec![1.0, 1.0]);
        let b = Polynomial::new(vec![2.0, 3.0, 1.0]);
        let (q, r) = (&a * &b).div_rem(&a);
        assert_eq!(q, b);
        assert!(r.is_zero());
    }

    #[test]
    fn deflate_complex_pair() {
        // (s^2 + 250)(s + 3)
        let p = Polynomial::new(vec![750.0, 250.0, 3.0, 1.0]);
        let q = p.deflate(Complex64::new(0.0, 250f64.sqrt()));
        assert!((q.coeff(0) - 3.0).abs() < 1e-12);
        assert!((q.coeff(1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_root_multiplicity() {
        let p = Polynomial::new(vec![0.0, 0.0, 5.0, 1.0]);
        assert_eq!(p.zero_root_multiplicity(), 2);
        assert_eq!(p.shift_down(2), Polynomial::new(vec![5.0, 1.0]));
    }
}
