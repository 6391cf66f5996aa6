//! Ratios of quasi-polynomials `sum_k p_k(s) exp(-s d_k)`.
//!
//! Closed loops around a delayed actuator mix delayed and undelayed terms, so
//! they are not rational with a single delay. This type keeps every delay
//! exact and supports pointwise evaluation and the argument-principle count in
//! [`QuasiPolynomial::count_rhp_roots`]. No cancellation is attempted.

use num_complex::Complex64;

use super::polynomial::Polynomial;
use super::rational::{Tf, POLE_ON_AXIS_THRESHOLD};
use super::TfError;

/// Delays closer than this are merged into one term.
const DELAY_MERGE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiPolynomial {
    /// `(delay, polynomial)` sorted by delay, no zero polynomials.
    terms: Vec<(f64, Polynomial)>,
}

impl QuasiPolynomial {
    pub fn zero() -> Self {
        QuasiPolynomial { terms: Vec::new() }
    }

    pub fn from_polynomial(p: Polynomial) -> Self {
        QuasiPolynomial::from_terms(vec![(0.0, p)])
    }

    pub fn from_terms(terms: Vec<(f64, Polynomial)>) -> Self {
        let mut terms: Vec<_> = terms.into_iter().filter(|(_, p)| !p.is_zero()).collect();
        terms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, Polynomial)> = Vec::with_capacity(terms.len());
        for (d, p) in terms {
            match merged.last_mut() {
                Some((dl, pl)) if (d - *dl).abs() <= DELAY_MERGE => *pl = &*pl + &p,
                _ => merged.push((d, p)),
            }
        }
        merged.retain(|(_, p)| !p.is_zero());
        QuasiPolynomial { terms: merged }
    }

    pub fn terms(&self) -> &[(f64, Polynomial)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when there is a single undelayed term.
    pub fn is_polynomial(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.terms[0].0 == 0.0)
    }

    pub fn min_delay(&self) -> f64 {
        self.terms.first().map_or(0.0, |t| t.0)
    }

    pub fn max_delay(&self) -> f64 {
        self.terms.last().map_or(0.0, |t| t.0)
    }

    pub fn add(&self, other: &Self) -> Self {
        QuasiPolynomial::from_terms(self.terms.iter().chain(&other.terms).cloned().collect())
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn scale(&self, k: f64) -> Self {
        QuasiPolynomial::from_terms(self.terms.iter().map(|(d, p)| (*d, p.scale(k))).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (da, pa) in &self.terms {
            for (db, pb) in &other.terms {
                out.push((da + db, pa * pb));
            }
        }
        QuasiPolynomial::from_terms(out)
    }

    pub fn mul_poly(&self, p: &Polynomial) -> Self {
        QuasiPolynomial::from_terms(self.terms.iter().map(|(d, q)| (*d, q * p)).collect())
    }

    /// Multiplies by `exp(s * advance)`.
    pub fn advance(&self, advance: f64) -> Self {
        QuasiPolynomial::from_terms(self.terms.iter().map(|(d, p)| (d - advance, p.clone())).collect())
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.terms
            .iter()
            .map(|(d, p)| p.eval_complex(s) * (-s * *d).exp())
            .sum()
    }

    /// Highest polynomial degree over all terms.
    pub fn degree(&self) -> Option<usize> {
        self.terms.iter().filter_map(|(_, p)| p.degree()).max()
    }

    /// The undelayed part, if present.
    pub fn principal(&self) -> Option<&Polynomial> {
        self.terms.iter().find(|(d, _)| *d == 0.0).map(|(_, p)| p)
    }

    fn largest_coefficient_scale(&self) -> f64 {
        self.terms
            .iter()
            .map(|(_, p)| p.max_abs_coeff())
            .fold(0.0, f64::max)
    }

    /// Number of roots with real part greater than `shift`, by the argument
    /// principle along the vertical line `Re s = shift`.
    ///
    /// The quasi-polynomial must be of retarded type after normalisation: the
    /// undelayed term carries the strictly highest degree. `points_per_decade`
    /// sets the base log-grid density; the grid is refined wherever the phase
    /// moves by more than π/4 between samples and, while delayed terms are not
    /// dominated, whenever a delay could rotate by more than π/4.
    pub fn count_rhp_roots(&self, shift: f64, points_per_decade: usize) -> Result<usize, TfError> {
        let q = self.advance(self.min_delay());
        let principal = q.principal().ok_or(TfError::NeutralQuasiPolynomial)?.clone();
        let n = principal.degree().ok_or(TfError::NeutralQuasiPolynomial)?;
        let delayed: Vec<_> = q.terms.iter().filter(|(d, _)| *d > 0.0).cloned().collect();
        if delayed.iter().any(|(_, p)| p.degree().unwrap_or(0) >= n) {
            return Err(TfError::NeutralQuasiPolynomial);
        }
        let d_max = q.max_delay();
        let scale = q.largest_coefficient_scale();
        let eval = |w: f64| q.eval(Complex64::new(shift, w));
        let dominated = |w: f64| {
            let s = Complex64::new(shift, w);
            let p = principal.eval_complex(s).norm();
            let rest: f64 = delayed
                .iter()
                .map(|(d, dp)| dp.eval_complex(s).norm() * (-shift * d).exp())
                .sum();
            rest < 0.5 * p
        };

        // Upper end: beyond every root of the principal part and with the
        // delayed terms negligible.
        // Fujiwara bound on the principal roots.
        let lead = principal.leading().abs();
        let c = principal.coeffs();
        let fujiwara = 2.0
            * (1..=n)
                .map(|k| (c[n - k].abs() / lead).powf(1.0 / k as f64))
                .fold(0.0_f64, f64::max);
        let mut w_end = (100.0 * fujiwara).max(1e5);
        while !dominated(w_end) || !dominated(w_end * 0.5) {
            w_end *= 4.0;
            if w_end > 1e14 {
                return Err(TfError::NeutralQuasiPolynomial);
            }
        }

        let v0 = eval(0.0);
        if v0.norm() <= f64::MIN_POSITIVE * scale.max(1.0) {
            return Err(TfError::PoleOnAxis(0.0));
        }
        let mut phase = v0.arg();
        let start_phase = phase;
        let mut prev_w = 0.0;
        let mut prev_v = v0;
        let ratio = 10f64.powf(1.0 / points_per_decade.max(1) as f64);
        let mut w = 1e-3_f64.min(w_end);
        let rotation_cap = if d_max > 0.0 {
            std::f64::consts::FRAC_PI_4 / d_max
        } else {
            f64::INFINITY
        };
        loop {
            let (next_phase, next_v) = unwrap_step(&eval, prev_w, prev_v, w, phase, 0)?;
            phase = next_phase;
            prev_v = next_v;
            prev_w = w;
            if w >= w_end {
                break;
            }
            let mut next = (w * ratio).min(w_end);
            if !dominated(w) {
                next = next.min(w + rotation_cap);
            }
            w = next;
        }

        // Asymptotic phase of the leading term, taken on the branch nearest
        // the tracked phase.
        let lead_arg = if principal.leading() < 0.0 {
            std::f64::consts::PI
        } else {
            0.0
        };
        let asym = lead_arg + n as f64 * std::f64::consts::FRAC_PI_2;
        let k = ((phase - asym) / std::f64::consts::TAU).round();
        let total = asym + k * std::f64::consts::TAU - start_phase;
        let count = n as f64 / 2.0 - total / std::f64::consts::PI;
        let rounded = count.round();
        if (count - rounded).abs() > 0.25 || rounded < 0.0 {
            return Err(TfError::WindingNotInteger(count));
        }
        Ok(rounded as usize)
    }
}

/// Advances the unwrapped phase from `(w0, v0)` to `w1`, bisecting until each
/// increment is below π/4.
fn unwrap_step(
    eval: &impl Fn(f64) -> Complex64,
    w0: f64,
    v0: Complex64,
    w1: f64,
    phase: f64,
    depth: usize,
) -> Result<(f64, Complex64), TfError> {
    let v1 = eval(w1);
    if v1.norm() == 0.0 || !v1.is_finite() {
        return Err(TfError::PoleOnAxis(w1));
    }
    let dphi = (v1 / v0).arg();
    if dphi.abs() <= std::f64::consts::FRAC_PI_4 || depth > 40 {
        return Ok((phase + dphi, v1));
    }
    let wm = 0.5 * (w0 + w1);
    let (pm, vm) = unwrap_step(eval, w0, v0, wm, phase, depth + 1)?;
    unwrap_step(eval, wm, vm, w1, pm, depth + 1)
}

/// `num(s) / den(s)` with quasi-polynomial numerator and denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedTf {
    num: QuasiPolynomial,
    den: QuasiPolynomial,
}

impl DelayedTf {
    pub fn new(num: QuasiPolynomial, den: QuasiPolynomial) -> Result<Self, TfError> {
        if den.is_zero() {
            return Err(TfError::ZeroDenominator);
        }
        Ok(DelayedTf { num, den }.normalized())
    }

    pub fn gain(k: f64) -> Self {
        DelayedTf::from(&Tf::gain(k))
    }

    pub fn num(&self) -> &QuasiPolynomial {
        &self.num
    }

    pub fn den(&self) -> &QuasiPolynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Shifts delays so the denominator's smallest delay is zero and scales
    /// so its undelayed leading coefficient is one.
    fn normalized(self) -> Self {
        if self.num.is_zero() {
            return DelayedTf {
                num: QuasiPolynomial::zero(),
                den: QuasiPolynomial::from_polynomial(Polynomial::constant(1.0)),
            };
        }
        let shift = self.den.min_delay();
        let num = self.num.advance(shift);
        let den = self.den.advance(shift);
        let lead = den
            .principal()
            .map(|p| p.leading())
            .filter(|l| *l != 0.0)
            .unwrap_or(1.0);
        DelayedTf {
            num: num.scale(1.0 / lead),
            den: den.scale(1.0 / lead),
        }
    }

    pub fn with_delay(&self, delay: f64) -> Self {
        DelayedTf {
            num: self.num.advance(-delay),
            den: self.den.clone(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if self.den == other.den {
            return DelayedTf {
                num: self.num.add(&other.num),
                den: self.den.clone(),
            }
            .normalized();
        }
        DelayedTf {
            num: self.num.mul(&other.den).add(&other.num.mul(&self.den)),
            den: self.den.mul(&other.den),
        }
        .normalized()
    }

    pub fn neg(&self) -> Self {
        DelayedTf {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        DelayedTf {
            num: self.num.mul(&other.num),
            den: self.den.mul(&other.den),
        }
        .normalized()
    }

    pub fn inv(&self) -> Result<Self, TfError> {
        if self.num.is_zero() {
            return Err(TfError::ZeroNumerator);
        }
        Ok(DelayedTf {
            num: self.den.clone(),
            den: self.num.clone(),
        }
        .normalized())
    }

    pub fn div(&self, other: &Self) -> Result<Self, TfError> {
        Ok(self.mul(&other.inv()?))
    }

    pub fn eval(&self, omega: f64) -> Result<Complex64, TfError> {
        self.eval_s(Complex64::new(0.0, omega))
    }

    pub fn eval_s(&self, s: Complex64) -> Result<Complex64, TfError> {
        let d = self.den.eval(s);
        if d.norm() < POLE_ON_AXIS_THRESHOLD {
            return Err(TfError::PoleOnAxis(s.im));
        }
        Ok(self.num.eval(s) / d)
    }

    /// Collapses to a single-delay rational when the structure allows it.
    pub fn to_rational(&self) -> Option<Tf> {
        if !self.den.is_polynomial() || self.num.terms().len() > 1 {
            return None;
        }
        let den = self.den.principal().cloned().unwrap_or_else(|| Polynomial::constant(1.0));
        match self.num.terms().first() {
            None => Some(Tf::zero()),
            Some((d, p)) if *d >= 0.0 => Tf::new(p.clone(), den, *d).ok(),
            _ => None,
        }
    }
}

impl From<&Tf> for DelayedTf {
    fn from(tf: &Tf) -> Self {
        DelayedTf {
            num: QuasiPolynomial::from_terms(vec![(tf.delay(), tf.num().clone())]),
            den: QuasiPolynomial::from_polynomial(tf.den().clone()),
        }
    }
}

impl From<Tf> for DelayedTf {
    fn from(tf: Tf) -> Self {
        DelayedTf::from(&tf)
    }
}
