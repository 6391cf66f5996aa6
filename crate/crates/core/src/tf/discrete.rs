//! Bilinear (Tustin) discretization and a direct-form runtime filter.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::polynomial::Polynomial;
use super::rational::Tf;
use super::TfError;

/// `sum b_k z^-k / sum a_k z^-k` with `a_0 = 1`, followed by `delay_steps` samples of delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteTf {
    pub num_z: Vec<f64>,
    pub den_z: Vec<f64>,
    pub sample_period: f64,
    pub delay_steps: usize,
}

/// Coefficients of `(1 - z^-1)^a (1 + z^-1)^b` in ascending powers of `z^-1`.
fn tustin_basis(a: usize, b: usize) -> Polynomial {
    let minus = Polynomial::new(vec![1.0, -1.0]);
    let plus = Polynomial::new(vec![1.0, 1.0]);
    let mut p = Polynomial::constant(1.0);
    for _ in 0..a {
        p = &p * &minus;
    }
    for _ in 0..b {
        p = &p * &plus;
    }
    p
}

/// Substitutes `s <- (2/dt)(1 - z^-1)/(1 + z^-1)`.
///
/// DC gain is preserved exactly when the system has no pole at the origin,
/// since `z = 1` maps to `s = 0`. The delay becomes `round(delay / dt)` steps.
pub fn discretize_tustin(tf: &Tf, dt: f64) -> Result<DiscreteTf, TfError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(TfError::InvalidSamplePeriod(dt));
    }
    if !tf.is_proper() {
        return Err(TfError::ImproperTransferFunction);
    }
    let n = tf.den().degree().unwrap_or(0);
    let c = 2.0 / dt;
    let map = |p: &Polynomial| -> Vec<f64> {
        let mut acc = vec![0.0; n + 1];
        let mut ck = 1.0;
        for (k, &coef) in p.coeffs().iter().enumerate() {
            let basis = tustin_basis(k, n - k);
            for (j, &bj) in basis.coeffs().iter().enumerate() {
                acc[j] += coef * ck * bj;
            }
            ck *= c;
        }
        acc
    };
    let mut num_z = map(tf.num());
    let mut den_z = map(tf.den());
    let a0 = den_z[0];
    if a0 == 0.0 {
        return Err(TfError::ZeroDenominator);
    }
    num_z.iter_mut().for_each(|b| *b /= a0);
    den_z.iter_mut().for_each(|a| *a /= a0);
    Ok(DiscreteTf {
        num_z,
        den_z,
        sample_period: dt,
        delay_steps: (tf.delay() / dt).round() as usize,
    })
}

impl DiscreteTf {
    pub fn static_gain(k: f64, dt: f64) -> Self {
        DiscreteTf {
            num_z: vec![k],
            den_z: vec![1.0],
            sample_period: dt,
            delay_steps: 0,
        }
    }

    /// Response at `z = exp(j w dt)`, including the sample delay.
    pub fn eval(&self, omega: f64) -> Complex64 {
        let zi = Complex64::from_polar(1.0, -omega * self.sample_period);
        let poly = |c: &[f64]| {
            c.iter()
                .rev()
                .fold(Complex64::new(0.0, 0.0), |acc, &x| acc * zi + x)
        };
        poly(&self.num_z) / poly(&self.den_z) * zi.powu(self.delay_steps as u32)
    }

    /// Poles in the z-plane: roots of `z^n + a_1 z^{n-1} + ... + a_n`.
    pub fn poles(&self) -> Result<Vec<Complex64>, TfError> {
        if self.den_z.len() <= 1 {
            return Ok(Vec::new());
        }
        let rev: Vec<f64> = self.den_z.iter().rev().copied().collect();
        super::roots::find_roots(&Polynomial::new(rev))
    }
}

/// Transposed direct form II realization of a [`DiscreteTf`].
#[derive(Debug, Clone)]
pub struct DiscreteFilter {
    b: Vec<f64>,
    a: Vec<f64>,
    state: Vec<f64>,
    delay_line: std::collections::VecDeque<f64>,
}

impl DiscreteFilter {
    pub fn new(d: &DiscreteTf) -> Self {
        let order = d.num_z.len().max(d.den_z.len());
        let mut b = d.num_z.clone();
        let mut a = d.den_z.clone();
        b.resize(order, 0.0);
        a.resize(order, 0.0);
        DiscreteFilter {
            b,
            a,
            state: vec![0.0; order.saturating_sub(1)],
            delay_line: std::iter::repeat_n(0.0, d.delay_steps).collect(),
        }
    }

    /// Replaces the coefficients in place, keeping the internal state.
    pub fn retune(&mut self, d: &DiscreteTf) {
        let order = self.b.len();
        if d.num_z.len().max(d.den_z.len()) != order {
            *self = DiscreteFilter::new(d);
            return;
        }
        self.b = d.num_z.clone();
        self.a = d.den_z.clone();
        self.b.resize(order, 0.0);
        self.a.resize(order, 0.0);
    }

    pub fn step(&mut self, x: f64) -> f64 {
        let x = if self.delay_line.is_empty() {
            x
        } else {
            self.delay_line.push_back(x);
            self.delay_line.pop_front().unwrap_or(0.0)
        };
        let y = self.b[0] * x + self.state.first().copied().unwrap_or(0.0);
        let n = self.state.len();
        for i in 0..n {
            let next = if i + 1 < n { self.state[i + 1] } else { 0.0 };
            self.state[i] = next + self.b[i + 1] * x - self.a[i + 1] * y;
        }
        y
    }

    /// Primes the state so a constant input `x` gives a constant output.
    pub fn settle_to(&mut self, x: f64) {
        let sb: f64 = self.b.iter().sum();
        let sa: f64 = self.a.iter().sum();
        if sa == 0.0 {
            return;
        }
        let y = sb / sa * x;
        let n = self.state.len();
        for i in (0..n).rev() {
            let next = if i + 1 < n { self.state[i + 1] } else { 0.0 };
            self.state[i] = next + self.b[i + 1] * x - self.a[i + 1] * y;
        }
        self.delay_line.iter_mut().for_each(|v| *v = x);
    }

    pub fn is_finite(&self) -> bool {
        self.state.iter().all(|v| v.is_finite())
    }
}
