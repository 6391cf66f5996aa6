//! Frequency-domain verdicts: Bode tables, compliance passivity, the
//! amplification ratio and coupled human/exoskeleton stability.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interconnect::{Feedback, PlantParams, SystemChain};
use crate::shaping::ControllerBundle;
use crate::sim::{run_coupled_human, HumanKind, HumanModel, SimConfig, SimError, Verdict};
use crate::tf::{find_roots, pade_delay, DelayedTf, Lti, Polynomial, QuasiPolynomial, Tf, TfError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),
    #[error("human model {0:?} has no impedance")]
    NoImpedance(HumanKind),
    #[error("invalid search range [{0}, {1}]")]
    InvalidRange(f64, f64),
    #[error(transparent)]
    Tf(#[from] TfError),
    #[error(transparent)]
    Sim(Box<SimError>),
}

/// Frequency at which "DC" values are read, rad/s.
pub const DC_OMEGA: f64 = 1e-3;

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, AnalysisError> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(AnalysisError::InvalidGrid(format!("need 0 < lo < hi, got {lo}, {hi}")));
    }
    if points < 2 {
        return Err(AnalysisError::InvalidGrid(format!("need at least 2 points, got {points}")));
    }
    let (a, b) = (lo.log10(), hi.log10());
    let n = points - 1;
    Ok((0..=n)
        .map(|k| match k {
            0 => lo,
            k if k == n => hi,
            k => 10f64.powf(a + (b - a) * k as f64 / n as f64),
        })
        .collect())
}

/// Log grid with a given density per decade.
pub fn decade_grid(lo: f64, hi: f64, per_decade: usize) -> Result<Vec<f64>, AnalysisError> {
    let decades = (hi / lo).log10().max(0.0);
    log_grid(lo, hi, ((decades * per_decade as f64).ceil() as usize + 1).max(2))
}

fn wrap_deg(x: f64) -> f64 {
    let y = (x + 180.0).rem_euclid(360.0) - 180.0;
    if y == -180.0 {
        180.0
    } else {
        y
    }
}

/// Unwrapped phase in degrees along `values`, `None` entries skipped.
/// The first finite value is placed in `(-270, 90]`, so a pure double
/// integrator reads -180 rather than +180.
fn unwrap_phase(values: &[Option<Complex64>]) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(values.len());
    let mut last: Option<f64> = None;
    for v in values {
        let Some(v) = v else {
            out.push(None);
            continue;
        };
        let p = v.arg().to_degrees();
        let ph = match last {
            None => {
                if p > 90.0 {
                    p - 360.0
                } else {
                    p
                }
            }
            Some(prev) => prev + wrap_deg(p - prev),
        };
        last = Some(ph);
        out.push(Some(ph));
    }
    out
}

/// One row of a Bode table. A pole on the axis is marked by an infinite
/// magnitude and a NaN phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodeRow {
    pub freq_hz: f64,
    pub mag_db: f64,
    pub phase_deg: f64,
}

impl BodeRow {
    pub fn is_pole(&self) -> bool {
        self.phase_deg.is_nan()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BodeTable {
    pub rows: Vec<BodeRow>,
}

pub const BODE_HEADER: &str = "freq_hz,mag_db,phase_deg";

impl BodeTable {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        if self.rows.is_empty() {
            wtr.write_record(BODE_HEADER.split(','))?;
        }
        for r in &self.rows {
            wtr.serialize(r)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<BodeTable, csv::Error> {
        let rows = csv::Reader::from_reader(r).deserialize().collect::<Result<_, _>>()?;
        Ok(BodeTable { rows })
    }
}

fn sample<T: Lti>(tf: &T, omegas: &[f64]) -> Result<Vec<Option<Complex64>>, TfError> {
    omegas
        .iter()
        .map(|&w| match tf.eval(w) {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            Ok(_) | Err(TfError::PoleOnAxis(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

pub fn bode_table<T: Lti>(tf: &T, fmin_hz: f64, fmax_hz: f64, points: usize) -> Result<BodeTable, AnalysisError> {
    let freqs = log_grid(fmin_hz, fmax_hz, points)?;
    let omegas: Vec<f64> = freqs.iter().map(|f| 2.0 * std::f64::consts::PI * f).collect();
    let values = sample(tf, &omegas)?;
    let phases = unwrap_phase(&values);
    let rows = freqs
        .iter()
        .zip(values.iter().zip(&phases))
        .map(|(&freq_hz, (v, ph))| match (v, ph) {
            (Some(v), Some(ph)) => BodeRow {
                freq_hz,
                mag_db: 20.0 * v.norm().log10(),
                phase_deg: *ph,
            },
            _ => BodeRow {
                freq_hz,
                mag_db: f64::INFINITY,
                phase_deg: f64::NAN,
            },
        })
        .collect();
    Ok(BodeTable { rows })
}

/// A frequency band, rad/s, in which a compliance leaves `[-180°, 0°]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseViolation {
    pub omega_start: f64,
    pub omega_end: f64,
}

/// Phase slack, degrees, so that exact integrators sit inside the band.
pub const PASSIVITY_PHASE_SLACK: f64 = 1e-6;

/// Bands of `grid` (rad/s) where the unwrapped phase of the compliance `tf`
/// is outside `[-180°, 0°]`. Grid points on poles are skipped.
pub fn passivity_phase_check<T: Lti>(tf: &T, grid: &[f64]) -> Vec<PhaseViolation> {
    let values: Vec<Option<Complex64>> = grid
        .iter()
        .map(|&w| tf.eval(w).ok().filter(|v| v.is_finite()))
        .collect();
    let phases = unwrap_phase(&values);
    let mut out: Vec<PhaseViolation> = Vec::new();
    let mut open: Option<PhaseViolation> = None;
    for (&w, ph) in grid.iter().zip(&phases) {
        let Some(ph) = ph else { continue };
        let bad = *ph > PASSIVITY_PHASE_SLACK || *ph < -180.0 - PASSIVITY_PHASE_SLACK;
        match (&mut open, bad) {
            (Some(v), true) => v.omega_end = w,
            (None, true) => {
                open = Some(PhaseViolation {
                    omega_start: w,
                    omega_end: w,
                })
            }
            (Some(_), false) => out.extend(open.take()),
            (None, false) => {}
        }
    }
    out.extend(open);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplificationRatio<T> {
    /// `C6 / C5`
    pub ratio: T,
    /// `|C6 / C5|` at [`DC_OMEGA`].
    pub dc: f64,
}

pub fn amplification_ratio<T: Lti>(chain: &SystemChain<T>) -> Result<AmplificationRatio<T>, AnalysisError> {
    let ratio = chain.c6().div(chain.c5())?.simplify()?;
    let dc = ratio.eval(DC_OMEGA)?.norm();
    Ok(AmplificationRatio { ratio, dc })
}

/// Lowest frequency in `[lo, hi]` rad/s at which `|ratio|` departs from
/// `alpha` by more than `rel_tol` of `alpha`.
pub fn amplification_bandwidth<T: Lti>(
    ratio: &T,
    alpha: f64,
    rel_tol: f64,
    lo: f64,
    hi: f64,
) -> Result<Option<f64>, AnalysisError> {
    let off = |w: f64| -> Result<f64, AnalysisError> { Ok((ratio.eval(w)?.norm() - alpha).abs() / alpha - rel_tol) };
    let grid = decade_grid(lo, hi, 200)?;
    let mut prev = (grid[0], off(grid[0])?);
    if prev.1 > 0.0 {
        return Ok(Some(grid[0]));
    }
    for &w in &grid[1..] {
        let v = off(w)?;
        if v > 0.0 {
            let (mut a, mut b) = (prev.0, w);
            for _ in 0..60 {
                let m = (a * b).sqrt();
                if off(m)? > 0.0 {
                    b = m;
                } else {
                    a = m;
                }
            }
            return Ok(Some(b));
        }
        prev = (w, v);
    }
    Ok(None)
}

/// How the delay-aware root count is done.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityMethod {
    /// Argument principle on the exact quasi-polynomial.
    #[default]
    Nyquist,
    /// Third-order Padé delay, then polynomial roots.
    Pade3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityOptions {
    pub method: StabilityMethod,
    pub points_per_decade: usize,
    pub omega_min: f64,
    pub omega_max: f64,
    /// Roots with real part in `[-shift, shift]` count as on the axis.
    pub shift: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            method: StabilityMethod::Nyquist,
            points_per_decade: 200,
            omega_min: 1e-3,
            omega_max: 1e5,
            shift: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityVerdict {
    Stable,
    Marginal,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub verdict: StabilityVerdict,
    /// Closed-loop roots with real part above `shift`.
    pub rhp_roots: usize,
    /// `|L(jw)| = 1` crossings, rad/s.
    pub crossover_freqs: Vec<f64>,
    /// Smallest phase margin over the crossovers; `None` when there is none.
    pub phase_margin_deg: Option<f64>,
    /// Smallest gain margin over the -180° crossings; `None` when there is none.
    pub gain_margin_db: Option<f64>,
    pub passivity_violations: Vec<PhaseViolation>,
    pub warnings: Vec<String>,
}

/// An exoskeleton loop ready for coupling with a human: its driving-point
/// compliance at the human node and what is needed to write the coupled
/// characteristic equation without cancelling anything numerically.
#[derive(Debug, Clone, PartialEq)]
pub struct ExoModel {
    pub plant: PlantParams,
    pub feedback: Feedback<Tf>,
    /// Actuator delay in the loop, s.
    pub delay: f64,
    pub c7: DelayedTf,
}

impl ExoModel {
    pub fn nominal(bundle: &ControllerBundle) -> Result<Self, AnalysisError> {
        let chain = bundle.nominal_chain()?;
        Ok(ExoModel {
            plant: bundle.plant,
            feedback: bundle.nominal_feedback(),
            delay: 0.0,
            c7: DelayedTf::from(chain.c7()),
        })
    }

    /// Realized loop with delay `plant.T + hold`.
    pub fn realized(bundle: &ControllerBundle, hold: f64) -> Result<Self, AnalysisError> {
        let chain = bundle.realized_chain(hold)?;
        Ok(ExoModel {
            plant: bundle.plant,
            feedback: bundle.realized_feedback(),
            delay: bundle.plant.delay + hold,
            c7: chain.c7().clone(),
        })
    }

    /// Determinant of the motor/joint/human equations with the controller
    /// denominators cleared. Its roots are the coupled closed-loop poles,
    /// plus the (stable) controller filter poles.
    pub fn characteristic(&self, human: &HumanModel) -> Result<QuasiPolynomial, AnalysisError> {
        let [k_h, b_h, j_h] = human_impedance(human)?;
        let p = &self.plant;
        let fb = &self.feedback;
        for g in [&fb.g_theta, &fb.g_s, &fb.g_c] {
            if g.delay() != 0.0 {
                return Err(TfError::DelayMismatch {
                    left: g.delay(),
                    right: 0.0,
                }
                .into());
            }
        }
        let (nt, dt) = (fb.g_theta.num(), fb.g_theta.den());
        let (ns, ds) = (fb.g_s.num(), fb.g_s.den());
        let (nc, dc) = (fb.g_c.num(), fb.g_c.den());
        let clear = &(dt * ds) * dc;
        let gt = &(nt * ds) * dc;
        let gs = &(&(ns * dt) * dc).scale(p.k_s);
        let gc = &(&(nc * dt) * ds).scale(p.k_c);
        let delayed = |x: Polynomial| QuasiPolynomial::from_terms(vec![(self.delay, x)]);
        let motor = Polynomial::new(vec![p.k_s, p.b_m, p.j_m]);
        // Motor row, multiplied by `clear`.
        let a11 = QuasiPolynomial::from_polynomial(&motor * &clear).add(&delayed(gs - &gt));
        let a12 = QuasiPolynomial::from_polynomial(clear.scale(-p.k_s)).add(&delayed(gc - gs));
        let a13 = delayed(-gc);
        let a21 = Polynomial::constant(-p.k_s);
        let a22 = Polynomial::new(vec![p.k_s + p.k_c, 0.0, p.j_j]);
        let a23 = Polynomial::constant(-p.k_c);
        let a32 = Polynomial::constant(-p.k_c);
        let a33 = Polynomial::new(vec![k_h + p.k_c, b_h, j_h]);
        let m1 = &(&a22 * &a33) - &(&a23 * &a32);
        let m2 = &a21 * &a33;
        let m3 = &a21 * &a32;
        Ok(a11.mul_poly(&m1).add(&a12.mul_poly(&m2).neg()).add(&a13.mul_poly(&m3)))
    }
}

/// `[K_h, B_h, J_h]`; the prescribed-motion human has no impedance.
fn human_impedance(h: &HumanModel) -> Result<[f64; 3], AnalysisError> {
    if h.kind == HumanKind::PrescribedMotion {
        return Err(AnalysisError::NoImpedance(h.kind));
    }
    Ok(h.impedance_coeffs())
}

/// Loop gain `Z_h(s) s C7(s) = (J_h s^2 + B_h s + K_h) C7(s)` at `jw`.
fn loop_gain(c7: &DelayedTf, imp: [f64; 3], w: f64) -> Result<Complex64, TfError> {
    let s = Complex64::new(0.0, w);
    let z = imp[0] + imp[1] * s + imp[2] * s * s;
    Ok(z * c7.eval(w)?)
}

/// Roots of `q` with real part above `shift`.
pub fn count_roots(q: &QuasiPolynomial, shift: f64, method: StabilityMethod, points_per_decade: usize) -> Result<usize, AnalysisError> {
    match method {
        StabilityMethod::Nyquist => Ok(q.count_rhp_roots(shift, points_per_decade)?),
        StabilityMethod::Pade3 => {
            let poly = pade_expand(q, 3)?;
            if poly.degree().unwrap_or(0) == 0 {
                return Ok(0);
            }
            Ok(find_roots(&poly)?.iter().filter(|r| r.re > shift).count())
        }
    }
}

/// Polynomial whose roots approximate those of `q`, each delay replaced by
/// a Padé approximant of order `order`.
pub fn pade_expand(q: &QuasiPolynomial, order: usize) -> Result<Polynomial, AnalysisError> {
    let pades: Vec<Tf> = q.terms().iter().map(|(d, _)| pade_delay(*d, order)).collect();
    let mut acc = Polynomial::zero();
    for (k, (_, p)) in q.terms().iter().enumerate() {
        let mut term = p * pades[k].num();
        for (j, pd) in pades.iter().enumerate() {
            if j != k {
                term = &term * pd.den();
            }
        }
        acc = &acc + &term;
    }
    Ok(acc)
}

/// Roots with real part above `shift` of `1 + L` for a delay-free rational
/// `L`, by the argument principle on `den + num`.
pub fn closed_loop_rhp(l: &Tf, shift: f64, points_per_decade: usize) -> Result<usize, AnalysisError> {
    let q = QuasiPolynomial::from_polynomial(l.den() + l.num());
    Ok(q.count_rhp_roots(shift, points_per_decade)?)
}

fn bisect_log(f: &impl Fn(f64) -> Result<f64, TfError>, mut a: f64, mut b: f64, fa: f64) -> Result<f64, TfError> {
    let sa = fa.signum();
    for _ in 0..60 {
        let m = (a * b).sqrt();
        if f(m)?.signum() == sa {
            a = m;
        } else {
            b = m;
        }
        if b / a - 1.0 < 1e-12 {
            break;
        }
    }
    Ok((a * b).sqrt())
}

pub fn coupled_stability_margin(
    model: &ExoModel,
    human: &HumanModel,
    opts: &StabilityOptions,
) -> Result<StabilityReport, AnalysisError> {
    let imp = human_impedance(human)?;
    let q = model.characteristic(human)?;
    let mut warnings = Vec::new();
    let rhp = match opts.method {
        StabilityMethod::Nyquist => {
            let coarse = count_roots(&q, opts.shift, opts.method, opts.points_per_decade)?;
            let fine = count_roots(&q, opts.shift, opts.method, 2 * opts.points_per_decade)?;
            if coarse != fine {
                warnings.push(format!(
                    "GridResolution: root count {coarse} at {} points/decade, {fine} at {}",
                    opts.points_per_decade,
                    2 * opts.points_per_decade
                ));
            }
            fine
        }
        StabilityMethod::Pade3 => count_roots(&q, opts.shift, opts.method, opts.points_per_decade)?,
    };
    let near_axis = count_roots(&q, -opts.shift, opts.method, opts.points_per_decade)?;
    let verdict = if rhp > 0 {
        StabilityVerdict::Unstable
    } else if near_axis > 0 {
        StabilityVerdict::Marginal
    } else {
        StabilityVerdict::Stable
    };

    let grid = decade_grid(opts.omega_min, opts.omega_max, opts.points_per_decade)?;
    let mut crossovers = Vec::new();
    let mut pm: Option<f64> = None;
    let mut gm: Option<f64> = None;
    let is_zero = imp.iter().all(|c| *c == 0.0);
    if !is_zero {
        let lmag = |w: f64| loop_gain(&model.c7, imp, w).map(|l| l.norm().ln());
        let lim = |w: f64| loop_gain(&model.c7, imp, w).map(|l| l.im);
        let mut prev: Option<(f64, Complex64)> = None;
        for &w in &grid {
            let l = match loop_gain(&model.c7, imp, w) {
                Ok(l) => l,
                Err(TfError::PoleOnAxis(_)) => {
                    prev = None;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            if let Some((w0, l0)) = prev {
                let (m0, m1) = (l0.norm().ln(), l.norm().ln());
                if m0.signum() != m1.signum() {
                    let wc = bisect_log(&lmag, w0, w, m0)?;
                    let lc = loop_gain(&model.c7, imp, wc)?;
                    let margin = wrap_deg(lc.arg().to_degrees() + 180.0);
                    crossovers.push(wc);
                    pm = Some(pm.map_or(margin, |p: f64| p.min(margin)));
                }
                if l0.im.signum() != l.im.signum() && (l0.re < 0.0 || l.re < 0.0) {
                    let wp = bisect_log(&lim, w0, w, l0.im)?;
                    let lp = loop_gain(&model.c7, imp, wp)?;
                    if lp.re < 0.0 {
                        let margin = -20.0 * lp.norm().log10();
                        gm = Some(gm.map_or(margin, |g: f64| g.min(margin)));
                    }
                }
            }
            prev = Some((w, l));
        }
    }
    Ok(StabilityReport {
        verdict,
        rhp_roots: rhp,
        crossover_freqs: crossovers,
        phase_margin_deg: pm,
        gain_margin_db: gm,
        passivity_violations: passivity_phase_check(&model.c7, &grid),
        warnings,
    })
}

/// Result of a one-parameter stability boundary search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum CriticalValue {
    Finite(f64),
    /// Stable over the whole searched range; the bound is its far end.
    NotReached(f64),
}

impl CriticalValue {
    pub fn finite(&self) -> Option<f64> {
        match self {
            CriticalValue::Finite(v) => Some(*v),
            CriticalValue::NotReached(_) => None,
        }
    }

    /// The value, or the range end when no boundary was found.
    pub fn bound(&self) -> f64 {
        match self {
            CriticalValue::Finite(v) | CriticalValue::NotReached(v) => *v,
        }
    }
}

/// Relative resolution of the boundary searches.
pub const CRITICAL_REL_TOL: f64 = 1e-3;

fn unstable(model: &ExoModel, h: &HumanModel, opts: &StabilityOptions) -> Result<bool, AnalysisError> {
    let q = model.characteristic(h)?;
    Ok(count_roots(&q, opts.shift, opts.method, opts.points_per_decade)? > 0)
}

/// Walks `from -> to` geometrically and bisects the first stable/unstable
/// transition.
fn boundary_search(
    is_unstable: &dyn Fn(f64) -> Result<bool, AnalysisError>,
    from: f64,
    to: f64,
) -> Result<CriticalValue, AnalysisError> {
    if !(from > 0.0 && to > 0.0 && from != to && from.is_finite() && to.is_finite()) {
        return Err(AnalysisError::InvalidRange(from, to));
    }
    if is_unstable(from)? {
        return Ok(CriticalValue::Finite(from));
    }
    let steps = ((to / from).log10().abs() * 8.0).ceil().max(1.0) as usize;
    let ratio = (to / from).powf(1.0 / steps as f64);
    let mut ok = from;
    for k in 1..=steps {
        let x = if k == steps { to } else { from * ratio.powi(k as i32) };
        if is_unstable(x)? {
            let (mut a, mut b) = (ok, x);
            while (b / a).ln().abs() > CRITICAL_REL_TOL {
                let m = (a * b).sqrt();
                if is_unstable(m)? {
                    b = m;
                } else {
                    a = m;
                }
            }
            return Ok(CriticalValue::Finite((a * b).sqrt()));
        }
        ok = x;
    }
    Ok(CriticalValue::NotReached(to))
}

/// Smallest spring stiffness `K_h` in `[lo, hi]` that destabilizes the loop.
pub fn critical_human_stiffness(
    model: &ExoModel,
    lo: f64,
    hi: f64,
    opts: &StabilityOptions,
) -> Result<CriticalValue, AnalysisError> {
    boundary_search(&|k| unstable(model, &HumanModel::spring(k), opts), lo, hi)
}

/// Largest inertia `J_h` in `[lo, hi]` that destabilizes the loop, scanning
/// down from `hi`.
pub fn critical_human_inertia(
    model: &ExoModel,
    lo: f64,
    hi: f64,
    opts: &StabilityOptions,
) -> Result<CriticalValue, AnalysisError> {
    boundary_search(&|j| unstable(model, &HumanModel::pure_inertia(j), opts), hi, lo)
}

/// Which human parameter a boundary search varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HumanSweep {
    Stiffness,
    Inertia,
}

impl HumanSweep {
    pub fn human(&self, value: f64) -> HumanModel {
        match self {
            HumanSweep::Stiffness => HumanModel::spring(value),
            HumanSweep::Inertia => HumanModel::pure_inertia(value),
        }
    }
}

/// Same boundary as [`critical_human_stiffness`] / [`critical_human_inertia`]
/// found by simulating the impulse response: a run counts as unstable unless
/// its envelope decays.
pub fn critical_human_time_domain(
    bundle: &ControllerBundle,
    sweep: HumanSweep,
    lo: f64,
    hi: f64,
    cfg: &SimConfig,
    duration: f64,
) -> Result<CriticalValue, SimError> {
    let is_unstable = |x: f64| -> Result<bool, AnalysisError> {
        let r = run_coupled_human(bundle, &sweep.human(x), cfg, None, duration)
            .map_err(|e| AnalysisError::Sim(Box::new(e)))?;
        Ok(r.verdict != Verdict::Stable)
    };
    let (from, to) = match sweep {
        HumanSweep::Stiffness => (lo, hi),
        HumanSweep::Inertia => (hi, lo),
    };
    boundary_search(&is_unstable, from, to).map_err(|e| match e {
        AnalysisError::Sim(e) => *e,
        other => SimError::InvalidConfig(other.to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_gain_bode() {
        let t = bode_table(&Tf::gain(1.0), 0.1, 100.0, 7).unwrap();
        assert_eq!(t.rows.len(), 7);
        for r in &t.rows {
            assert!(r.mag_db.abs() < 1e-12 && r.phase_deg.abs() < 1e-12);
        }
    }

    #[test]
    fn integrator_bode() {
        let t = bode_table(&Tf::from_coeffs(&[1.0], &[0.0, 1.0]).unwrap(), 0.01, 100.0, 41).unwrap();
        for w in t.rows.windows(2) {
            let decades = (w[1].freq_hz / w[0].freq_hz).log10();
            assert!(((w[1].mag_db - w[0].mag_db) / decades + 20.0).abs() < 1e-9);
        }
        assert!(t.rows.iter().all(|r| (r.phase_deg + 90.0).abs() < 1e-9));
    }

    #[test]
    fn delay_phase_is_unwrapped() {
        let t = bode_table(&Tf::pure_delay(0.01), 0.1, 1000.0, 201).unwrap();
        for r in &t.rows {
            assert!((r.phase_deg + 360.0 * r.freq_hz * 0.01).abs() < 1e-6, "{r:?}");
        }
    }

    #[test]
    fn pole_rows_are_marked() {
        let w = 2.0 * std::f64::consts::PI * log_grid(0.1, 10.0, 3).unwrap()[1];
        let tf = Tf::from_coeffs(&[1.0], &[w * w, 0.0, 1.0]).unwrap();
        let t = bode_table(&tf, 0.1, 10.0, 3).unwrap();
        assert!(t.rows[1].is_pole());
        assert!(!t.rows[2].is_pole());
        let back = BodeTable::read_csv(t.to_csv_string().as_bytes()).unwrap();
        assert!(back.rows[1].is_pole() && back.rows[1].mag_db.is_infinite());
    }

    #[test]
    fn two_point_grid() {
        let t = bode_table(&Tf::from_coeffs(&[1.0], &[1.0, 1.0]).unwrap(), 1.0, 2.0, 2).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!(t.rows.iter().all(|r| r.mag_db.is_finite() && r.phase_deg.is_finite()));
        assert!(bode_table(&Tf::gain(1.0), 1.0, 2.0, 1).is_err());
        assert!(bode_table(&Tf::gain(1.0), 2.0, 1.0, 5).is_err());
    }

    #[test]
    fn inertia_damper_is_passive() {
        let c = Tf::from_coeffs(&[1.0], &[0.0, 3.0, 2.0]).unwrap();
        let grid = decade_grid(1e-2, 1e4, 50).unwrap();
        assert!(passivity_phase_check(&c, &grid).is_empty());
        // double integrator sits on the band edge
        let c = Tf::from_coeffs(&[1.0], &[0.0, 0.0, 2.0]).unwrap();
        assert!(passivity_phase_check(&c, &grid).is_empty());
    }

    #[test]
    fn delay_breaks_passivity() {
        let c = Tf::from_coeffs(&[1.0], &[0.0, 3.0, 2.0]).unwrap().with_delay(0.01);
        let grid = decade_grid(1e-2, 1e4, 50).unwrap();
        let v = passivity_phase_check(&c, &grid);
        assert!(!v.is_empty());
        assert!(v[0].omega_start > 1.0 && v[0].omega_start < 1e3);
    }

    #[test]
    fn bandwidth_of_first_order() {
        // |8 / (1 + s/10)| drops 10% below 8 at w = 10 sqrt(1/0.81 - 1)
        let r = Tf::from_coeffs(&[80.0], &[10.0, 1.0]).unwrap();
        let w = amplification_bandwidth(&r, 8.0, 0.1, 1e-3, 1e4).unwrap().unwrap();
        assert!((w - 10.0 * (1.0 / 0.81 - 1.0f64).sqrt()).abs() < 1e-6);
        assert_eq!(amplification_bandwidth(&Tf::gain(8.0), 8.0, 0.1, 1e-3, 1e4).unwrap(), None);
    }

    #[test]
    fn pade_expansion_of_delay_free() {
        let q = QuasiPolynomial::from_polynomial(Polynomial::new(vec![2.0, 3.0, 1.0]));
        assert_eq!(pade_expand(&q, 3).unwrap(), Polynomial::new(vec![2.0, 3.0, 1.0]));
    }

    #[test]
    fn closed_loop_count_simple() {
        // 1 + k/(s-1): pole at 1 - k
        let l = Tf::from_coeffs(&[0.5], &[-1.0, 1.0]).unwrap();
        assert_eq!(closed_loop_rhp(&l, 0.0, 100).unwrap(), 1);
        let l = Tf::from_coeffs(&[2.0], &[-1.0, 1.0]).unwrap();
        assert_eq!(closed_loop_rhp(&l, 0.0, 100).unwrap(), 0);
    }

    #[test]
    fn critical_value_serializes() {
        let s = serde_json::to_string(&CriticalValue::NotReached(1e7)).unwrap();
        assert_eq!(s, r#"{"kind":"not-reached","value":10000000.0}"#);
    }
}
