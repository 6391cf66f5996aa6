//! Aberth–Ehrlich simultaneous root finding for real polynomials.

use num_complex::Complex64;

use super::polynomial::Polynomial;
use super::TfError;

pub const MAX_ITERATIONS: usize = 500;
pub const STEP_TOLERANCE: f64 = 1e-12;
/// Acceptance bound on `|p(r)| / sum |c_k| |r|^k`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

/// All complex roots of `p`, with multiplicity.
///
/// Exact zeros at the origin are split off first. Roots of real polynomials
/// come back as exact conjugate pairs (real roots have `im == 0`), sorted by
/// real part then imaginary part.
pub fn find_roots(p: &Polynomial) -> Result<Vec<Complex64>, TfError> {
    let degree = p.degree().ok_or(TfError::ZeroPolynomial)?;
    if degree == 0 {
        return Err(TfError::ConstantPolynomial);
    }
    if p.coeffs().iter().any(|c| !c.is_finite()) {
        return Err(TfError::NonFinite);
    }
    let zeros = p.zero_root_multiplicity();
    let rest = p.shift_down(zeros);
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
    roots.extend(aberth(&rest)?);
    enforce_conjugate_symmetry(&mut roots);
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(roots)
}

fn aberth(p: &Polynomial) -> Result<Vec<Complex64>, TfError> {
    let n = match p.degree() {
        None | Some(0) => return Ok(Vec::new()),
        Some(n) => n,
    };
    let c = p.coeffs();
    if n == 1 {
        return Ok(vec![Complex64::new(-c[0] / c[1], 0.0)]);
    }
    let dp = p.derivative();
    let mut z = initial_guesses(c);

    let eps = f64::EPSILON;
    for _ in 0..MAX_ITERATIONS {
        let mut max_step = 0.0_f64;
        let mut all_at_noise_floor = true;
        for i in 0..n {
            let zi = z[i];
            let pv = p.eval_complex(zi);
            let noise = 4.0 * eps * p.eval_abs(zi.norm()) * (n as f64);
            if pv.norm() <= noise {
                continue;
            }
            all_at_noise_floor = false;
            let dv = dp.eval_complex(zi);
            let ratio = pv / dv;
            let repulsion: Complex64 = z
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &zj)| {
                    let d = zi - zj;
                    if d.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let denom = Complex64::new(1.0, 0.0) - ratio * repulsion;
            let step = if denom.norm() == 0.0 || !denom.is_finite() {
                ratio
            } else {
                ratio / denom
            };
            if !step.is_finite() {
                continue;
            }
            z[i] -= step;
            max_step = max_step.max(step.norm() / (1.0 + z[i].norm()));
        }
        if all_at_noise_floor || max_step <= STEP_TOLERANCE {
            polish(p, &dp, &mut z);
            return check_residuals(p, z);
        }
    }
    // Converged to within rounding for clustered roots is still acceptable.
    polish(p, &dp, &mut z);
    check_residuals(p, z).map_err(|_| TfError::NoConvergence {
        iterations: MAX_ITERATIONS,
    })
}

/// Guesses on circles whose radii come from the upper convex hull of
/// `(k, ln|c_k|)`, so root magnitudes spanning many decades start close.
/// An irrational angular offset keeps guesses off the real axis.
fn initial_guesses(c: &[f64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    let pts: Vec<(usize, f64)> = c
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(k, v)| (k, v.abs().ln()))
        .collect();
    let mut hull: Vec<(usize, f64)> = Vec::new();
    for &pt in &pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) as f64 * (pt.1 - a.1) - (b.1 - a.1) * (pt.0 - a.0) as f64;
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    let mut z = Vec::with_capacity(n);
    for w in hull.windows(2) {
        let (i, j) = (w[0].0, w[1].0);
        let m = j - i;
        let r = ((w[0].1 - w[1].1) / m as f64).exp();
        for k in 0..m {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / m as f64 + 0.4 + 1.3 * i as f64 / n as f64;
            z.push(Complex64::from_polar(r, theta));
        }
    }
    z
}

fn polish(p: &Polynomial, dp: &Polynomial, z: &mut [Complex64]) {
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let pv = p.eval_complex(*zi);
            let dv = dp.eval_complex(*zi);
            if dv.norm() == 0.0 {
                break;
            }
            let cand = *zi - pv / dv;
            if cand.is_finite() && p.eval_complex(cand).norm() < pv.norm() {
                *zi = cand;
            } else {
                break;
            }
        }
    }
}

fn check_residuals(p: &Polynomial, z: Vec<Complex64>) -> Result<Vec<Complex64>, TfError> {
    for r in &z {
        let scale = p.eval_abs(r.norm());
        if p.eval_complex(*r).norm() > RESIDUAL_TOLERANCE * scale {
            return Err(TfError::NoConvergence {
                iterations: MAX_ITERATIONS,
            });
        }
    }
    Ok(z)
}

/// Snaps near-real roots onto the axis and averages conjugate partners.
fn enforce_conjugate_symmetry(roots: &mut [Complex64]) {
    let n = roots.len();
    let mut paired = vec![false; n];
    for i in 0..n {
        if paired[i] {
            continue;
        }
        let ri = roots[i];
        let tol = 1e-7 * (1.0 + ri.norm());
        if ri.im.abs() <= tol {
            roots[i].im = 0.0;
            paired[i] = true;
            continue;
        }
        let partner = (0..n)
            .filter(|&j| j != i && !paired[j])
            .min_by(|&a, &b| {
                (roots[a] - ri.conj())
                    .norm()
                    .total_cmp(&(roots[b] - ri.conj()).norm())
            });
        if let Some(j) = partner {
            let avg = (ri + roots[j].conj()) * 0.5;
            let upper = Complex64::new(avg.re, avg.im.abs());
            roots[i] = upper;
            roots[j] = upper.conj();
            paired[j] = true;
        }
        paired[i] = true;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn perfect_square() {
        let r = find_roots(&Polynomial::new(vec![1.0, 2.0, 1.0])).unwrap();
        assert_eq!(r.len(), 2);
        for x in r {
            assert!(close(x, Complex64::new(-1.0, 0.0), 1e-7));
        }
    }

    #[test]
    fn difference_of_squares() {
        let r = find_roots(&Polynomial::new(vec![-1.0, 0.0, 1.0])).unwrap();
        assert!(close(r[0], Complex64::new(-1.0, 0.0), 1e-12));
        assert!(close(r[1], Complex64::new(1.0, 0.0), 1e-12));
    }

    #[test]
    fn imaginary_pair() {
        let r = find_roots(&Polynomial::new(vec![250.0, 0.0, 1.0])).unwrap();
        let w = 15.811388300841896;
        assert!(close(r[0], Complex64::new(0.0, -w), 1e-9));
        assert!(close(r[1], Complex64::new(0.0, w), 1e-9));
        assert_eq!(r[0], r[1].conj());
    }

    #[test]
    fn zeros_at_origin_are_exact() {
        let r = find_roots(&Polynomial::new(vec![0.0, 0.0, 3.0, 1.0])).unwrap();
        assert_eq!(r.iter().filter(|z| z.norm() == 0.0).count(), 2);
        assert!(r.iter().any(|z| close(*z, Complex64::new(-3.0, 0.0), 1e-12)));
    }

    #[test]
    fn constant_is_rejected() {
        assert!(matches!(
            find_roots(&Polynomial::constant(3.0)),
            Err(TfError::ConstantPolynomial)
        ));
    }
}
