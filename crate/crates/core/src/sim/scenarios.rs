//! Experiment drivers built on one fixed-step loop.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::controller::{build_dob_for, Actuator, ExoController, PdController};
use super::human::HumanModel;
use super::plant::{Boundary, Plant, PlantOutputs, PlantState};
use super::trace::{SimTrace, TraceRow};
use super::{HysteresisSetup, SimConfig, SimError};
use crate::dob::ObserverSettings;
use crate::interconnect::PlantParams;
use crate::shaping::{schedule_gains, ControllerBundle, DesignSpec};

/// What the controller hands back each sample.
struct Command {
    applied: f64,
    tau_ctrl: f64,
    delta_hat: f64,
}

type StepFn<'a> = dyn FnMut(f64, &PlantState, &PlantOutputs, &mut Plant<'_>) -> Result<Command, SimError> + 'a;

/// Runs `n` control samples. On divergence the partial trace is kept.
fn run_loop(
    plant: &mut Plant<'_>,
    cfg: &SimConfig,
    n: usize,
    scale: f64,
    u: &dyn Fn(f64) -> f64,
    ctrl: &mut StepFn<'_>,
) -> (SimTrace, Option<SimError>) {
    let dt = cfg.dt_ctrl;
    let h = dt / cfg.substeps as f64;
    let bound = cfg.instability_factor * scale;
    let mut x = PlantState::default();
    let mut trace = SimTrace {
        dt,
        rows: Vec::with_capacity(n),
    };
    for k in 0..n {
        let t = k as f64 * dt;
        let o = plant.outputs(&x, t, u(t));
        let cmd = match ctrl(t, &x, &o, plant) {
            Ok(c) => c,
            Err(e) => return (trace, Some(e)),
        };
        trace.rows.push(TraceRow {
            t,
            theta_m: x.theta_m,
            theta_j: x.theta_j,
            theta_h: o.theta_h,
            tau_s: o.tau_s,
            tau_c: o.tau_c,
            tau_m: cmd.applied,
            delta_f: o.delta_f,
            delta_hat: cmd.delta_hat,
            tau_ctrl: cmd.tau_ctrl,
        });
        for (signal, value) in [("tau_s", o.tau_s), ("tau_c", o.tau_c), ("tau_m", cmd.applied)] {
            if !value.is_finite() {
                return (trace, Some(SimError::NonFinite(t)));
            }
            if value.abs() > bound {
                return (trace, Some(SimError::InstabilityDetected { t, signal, value }));
            }
        }
        for i in 0..cfg.substeps {
            x = plant.step(&x, t + i as f64 * h, h, cmd.applied, u);
        }
        if !x.is_finite() {
            return (trace, Some(SimError::NonFinite(t + dt)));
        }
    }
    (trace, None)
}

/// Jacobian-driven redesign during a run.
pub struct Schedule<'a> {
    pub spec: DesignSpec,
    pub base: PlantParams,
    /// Transmission ratio as a function of `(t, theta_j)`.
    pub jacobian: &'a dyn Fn(f64, f64) -> f64,
}

/// The exoskeleton controller wired to an actuator, optionally rescheduled.
struct ExoLoop<'a> {
    ctrl: ExoController,
    act: Actuator,
    observer: Option<ObserverSettings>,
    schedule: Option<&'a Schedule<'a>>,
    last_scale: f64,
    tau_c_bias: f64,
    dt: f64,
}

impl<'a> ExoLoop<'a> {
    fn new(
        bundle: &ControllerBundle,
        cfg: &SimConfig,
        observer: Option<&ObserverSettings>,
        schedule: Option<&'a Schedule<'a>>,
    ) -> Result<Self, SimError> {
        let p = &bundle.plant;
        Ok(ExoLoop {
            ctrl: ExoController::new(bundle, cfg.dt_ctrl)?,
            act: Actuator::new(
                cfg.delay_steps_for(p.delay),
                cfg.torque_limit,
                build_dob_for(observer, p, cfg.dt_ctrl)?,
            ),
            observer: observer.copied(),
            schedule,
            last_scale: f64::NAN,
            tau_c_bias: cfg.tau_c_bias,
            dt: cfg.dt_ctrl,
        })
    }

    fn step(&mut self, t: f64, x: &PlantState, o: &PlantOutputs, plant: &mut Plant<'_>) -> Result<Command, SimError> {
        if let Some(s) = self.schedule {
            let j = (s.jacobian)(t, x.theta_j);
            if j != self.last_scale {
                let b = schedule_gains(&s.spec, &s.base, j)?;
                self.ctrl.retune(&b)?;
                if let (Some(d), Some(obs)) = (self.act.dob_mut(), self.observer.as_ref()) {
                    d.retune(&obs.q, b.plant.j_m, b.plant.b_m, self.dt)?;
                }
                plant.params = b.plant;
                self.last_scale = j;
            }
        }
        let tau_ctrl = self.ctrl.torque(x.theta_m, o.tau_s, o.tau_c + self.tau_c_bias);
        let out = self.act.step(tau_ctrl, x.theta_m, o.tau_s);
        Ok(Command {
            applied: out.applied,
            tau_ctrl,
            delta_hat: out.delta_hat,
        })
    }
}

fn finish(trace: SimTrace, err: Option<SimError>) -> Result<SimTrace, SimError> {
    match err {
        Some(e) => Err(e),
        None => Ok(trace),
    }
}

/// Triangle wave: 0 at `t = 0`, `+a` at a quarter period, `-a` at three quarters.
pub fn triangle(t: f64, amplitude: f64, period: f64) -> f64 {
    let ph = (t / period).rem_euclid(1.0);
    let v = if ph < 0.25 {
        4.0 * ph
    } else if ph < 0.75 {
        2.0 - 4.0 * ph
    } else {
        4.0 * ph - 4.0
    };
    amplitude * v
}

/// Slope of the least-squares line `y = a + b x`.
fn regression_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone)]
pub struct LockedOutputResult {
    pub trace: SimTrace,
    /// Regression slope of `-tau_s` on `tau_c` after `settle` seconds:
    /// the environment-side torque per unit cuff torque carried by the SEA.
    pub tau_ratio_steady: f64,
}

/// Output clamped, cuff torque prescribed by `profile`.
pub fn run_locked_output(
    bundle: &ControllerBundle,
    cfg: &SimConfig,
    observer: Option<&ObserverSettings>,
    profile: &dyn Fn(f64) -> f64,
    settle: f64,
    duration: f64,
) -> Result<LockedOutputResult, SimError> {
    run_locked_inner(bundle, cfg, observer, profile, settle, duration, None)
}

/// Locked-output run whose gains are regenerated from the Jacobian each sample.
pub fn run_scheduled_locked_output(
    schedule: &Schedule<'_>,
    cfg: &SimConfig,
    observer: Option<&ObserverSettings>,
    profile: &dyn Fn(f64) -> f64,
    settle: f64,
    duration: f64,
) -> Result<LockedOutputResult, SimError> {
    let j0 = (schedule.jacobian)(0.0, 0.0);
    let bundle = schedule_gains(&schedule.spec, &schedule.base, j0)?;
    run_locked_inner(&bundle, cfg, observer, profile, settle, duration, Some(schedule))
}

fn run_locked_inner(
    bundle: &ControllerBundle,
    cfg: &SimConfig,
    observer: Option<&ObserverSettings>,
    profile: &dyn Fn(f64) -> f64,
    settle: f64,
    duration: f64,
    schedule: Option<&Schedule<'_>>,
) -> Result<LockedOutputResult, SimError> {
    let mut plant = Plant {
        params: bundle.plant,
        friction: cfg.friction,
        boundary: Boundary::Locked,
    };
    let n = cfg.samples(duration);
    let scale = (0..n)
        .map(|k| profile(k as f64 * cfg.dt_ctrl).abs())
        .fold(1e-3, f64::max);
    let mut lp = ExoLoop::new(bundle, cfg, observer, schedule)?;
    let (trace, err) = run_loop(&mut plant, cfg, n, scale, profile, &mut |t, x, o, pl| lp.step(t, x, o, pl));
    let trace = finish(trace, err)?;
    let (tc, ts): (Vec<f64>, Vec<f64>) = trace
        .rows
        .iter()
        .filter(|r| r.t >= settle)
        .map(|r| (r.tau_c, -r.tau_s))
        .unzip();
    let tau_ratio_steady = if tc.len() >= 2 { regression_slope(&tc, &ts) } else { f64::NAN };
    Ok(LockedOutputResult {
        trace,
        tau_ratio_steady,
    })
}

/// Output free, cuff torque prescribed.
pub fn run_cuff_torque(
    bundle: &ControllerBundle,
    cfg: &SimConfig,
    observer: Option<&ObserverSettings>,
    input: &dyn Fn(f64) -> f64,
    scale: f64,
    duration: f64,
    schedule: Option<&Schedule<'_>>,
) -> Result<SimTrace, SimError> {
    let mut plant = Plant {
        params: bundle.plant,
        friction: cfg.friction,
        boundary: Boundary::CuffTorque,
    };
    let mut lp = ExoLoop::new(bundle, cfg, observer, schedule)?;
    let (trace, err) = run_loop(&mut plant, cfg, cfg.samples(duration), scale, input, &mut |t, x, o, pl| {
        lp.step(t, x, o, pl)
    });
    finish(trace, err)
}

/// Amplitudes `(a, b)` of `a sin(wt) + b cos(wt)` in a fit that also
/// absorbs an offset and a linear drift.
pub fn fit_sinusoid(t: &[f64], y: &[f64], omega: f64) -> (f64, f64) {
    let n = t.len();
    let t0 = t[0];
    let span = (t[n - 1] - t0).max(1e-12);
    let a = DMatrix::from_fn(n, 4, |i, j| match j {
        0 => (omega * t[i]).sin(),
        1 => (omega * t[i]).cos(),
        2 => 1.0,
        _ => (t[i] - t0) / span,
    });
    let b = DVector::from_column_slice(y);
    let sol = a.svd(true, true).solve(&b, 1e-14).expect("svd solve");
    (sol[0], sol[1])
}

/// Measured `theta_j / tau_c` at one frequency from a sinusoidal cuff torque.
pub fn sine_sweep_point(
    bundle: &ControllerBundle,
    cfg: &SimConfig,
    observer: Option<&ObserverSettings>,
    freq_hz: f64,
    amplitude: f64,
) -> Result<Complex64, SimError> {
    let w = 2.0 * std::f64::consts::PI * freq_hz;
    let period = 1.0 / freq_hz;
    let settle = (2.0 * period).max(1.5);
    let settle = (settle / period).ceil() * period;
    let fit = ((2.0f64).max(2.0 * period) / period).ceil() * period;
    let input = move |t: f64| amplitude * (w * t).sin();
    let trace = run_cuff_torque(bundle, cfg, observer, &input, amplitude, settle + fit, None)?;
    let rows: Vec<_> = trace.rows.iter().filter(|r| r.t >= settle - 1e-9).collect();
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.theta_j).collect();
    let (a, b) = fit_sinusoid(&t, &y, w);
    Ok(Complex64::new(a, b) / amplitude)
}

#[derive(Debug, Clone)]
pub struct HysteresisResult {
    pub trace: SimTrace,
    /// `∮ tau_ctrl d theta_j` over the last full cycle, N·m·rad.
    pub loop_area: f64,
}

/// Slow sinusoidal position tracking with a PD loop on the motor angle.
/// The loop area uses the PD torque, i.e. before observer compensation.
pub fn run_dob_hysteresis_test(
    p: &PlantParams,
    cfg: &SimConfig,
    setup: &HysteresisSetup,
    observer: Option<&ObserverSettings>,
    derivative_cutoff_hz: f64,
) -> Result<HysteresisResult, SimError> {
    let period = 1.0 / setup.freq_hz;
    let n = cfg.samples(2.0 * period);
    let t_end = n as f64 * cfg.dt_ctrl;
    let cycles = (t_end / period + 1e-9).floor();
    if cycles < 1.0 {
        return Err(SimError::InvalidConfig(format!(
            "duration {t_end} s is shorter than one {period} s cycle"
        )));
    }
    let end = cycles * period;
    let start = end - period;
    let mut plant = Plant {
        params: *p,
        friction: cfg.friction,
        boundary: Boundary::CuffTorque,
    };
    let w = 2.0 * std::f64::consts::PI * setup.freq_hz;
    let a = setup.amplitude;
    let mut pd = PdController::new(setup.kp, setup.kd, derivative_cutoff_hz, cfg.dt_ctrl)?;
    let mut act = Actuator::new(
        cfg.delay_steps_for(p.delay),
        cfg.torque_limit,
        build_dob_for(observer, p, cfg.dt_ctrl)?,
    );
    let scale = (setup.kp * a).max(cfg.friction.f_c).max(1.0);
    let zero = |_t: f64| 0.0;
    let (trace, err) = run_loop(&mut plant, cfg, n + 1, scale, &zero, &mut |t, x, o, _| {
        let tau_ctrl = pd.torque(a * (w * t).sin(), a * w * (w * t).cos(), x.theta_m);
        let out = act.step(tau_ctrl, x.theta_m, o.tau_s);
        Ok(Command {
            applied: out.applied,
            tau_ctrl,
            delta_hat: out.delta_hat,
        })
    });
    let trace = finish(trace, err)?;
    let mut area = 0.0;
    for pair in trace.rows.windows(2) {
        let (r0, r1) = (&pair[0], &pair[1]);
        if r0.t >= start - 1e-9 && r1.t <= end + 1e-9 {
            area += 0.5 * (r0.tau_ctrl + r1.tau_ctrl) * (r1.theta_j - r0.theta_j);
        }
    }
    Ok(HysteresisResult {
        trace,
        loop_area: area,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Oscillatory,
    Unstable,
}

/// Growth-rate thresholds, 1/s.
pub const GROWTH_THRESHOLD: f64 = 0.05;

impl Verdict {
    pub fn from_growth_rate(sigma: f64) -> Self {
        if sigma < -GROWTH_THRESHOLD {
            Verdict::Stable
        } else if sigma > GROWTH_THRESHOLD {
            Verdict::Unstable
        } else {
            Verdict::Oscillatory
        }
    }
}

/// Exponential rate fitted to per-window peak magnitudes of `x` after `start`.
/// Windows below `1e-10` of the overall peak are ignored as numerical floor.
pub fn envelope_growth_rate(t: &[f64], x: &[f64], window: f64, start: f64) -> f64 {
    let mut centers = Vec::new();
    let mut peaks = Vec::new();
    let peak_all = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut w0 = start;
    let t_end = t.last().copied().unwrap_or(0.0);
    while w0 + window <= t_end + 1e-12 {
        let peak = t
            .iter()
            .zip(x)
            .filter(|(ti, _)| **ti >= w0 && **ti < w0 + window)
            .fold(0.0f64, |m, (_, v)| m.max(v.abs()));
        if peak > 1e-10 * peak_all && peak > 0.0 {
            centers.push(w0 + 0.5 * window);
            peaks.push(peak.ln());
        }
        w0 += window;
    }
    if centers.len() < 3 {
        return 0.0;
    }
    regression_slope(&centers, &peaks)
}

#[derive(Debug, Clone)]
pub struct CoupledResult {
    pub trace: SimTrace,
    pub growth_rate: f64,
    pub verdict: Verdict,
}

/// Impulse at the human node with the exoskeleton output free.
pub fn run_coupled_human(
    bundle: &ControllerBundle,
    human: &HumanModel,
    cfg: &SimConfig,
    observer: Option<&ObserverSettings>,
    duration: f64,
) -> Result<CoupledResult, SimError> {
    let mut plant = Plant {
        params: bundle.plant,
        friction: cfg.friction,
        boundary: Boundary::Human(human),
    };
    let dt = cfg.dt_ctrl;
    let height = cfg.coupled_human.impulse / dt;
    let input = move |t: f64| if t < dt { height } else { 0.0 };
    let mut lp = ExoLoop::new(bundle, cfg, observer, None)?;
    let (trace, err) = run_loop(&mut plant, cfg, cfg.samples(duration), height.abs(), &input, &mut |t, x, o, pl| {
        lp.step(t, x, o, pl)
    });
    let t = trace.column(|r| r.t);
    let tc = trace.column(|r| r.tau_c);
    let window = cfg.coupled_human.window;
    match err {
        Some(SimError::InstabilityDetected { .. }) | Some(SimError::NonFinite(_)) => {
            let sigma = envelope_growth_rate(&t, &tc, window, 2.0 * dt);
            Ok(CoupledResult {
                trace,
                growth_rate: sigma.max(GROWTH_THRESHOLD * 2.0),
                verdict: Verdict::Unstable,
            })
        }
        Some(e) => Err(e),
        None => {
            let sigma = envelope_growth_rate(&t, &tc, window, window.max(2.0 * dt));
            Ok(CoupledResult {
                trace,
                growth_rate: sigma,
                verdict: Verdict::from_growth_rate(sigma),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_shape() {
        assert_eq!(triangle(0.0, 2.0, 4.0), 0.0);
        assert!((triangle(1.0, 2.0, 4.0) - 2.0).abs() < 1e-12);
        assert!((triangle(3.0, 2.0, 4.0) + 2.0).abs() < 1e-12);
        assert!((triangle(2.0, 2.0, 4.0)).abs() < 1e-12);
    }

    #[test]
    fn sinusoid_fit_recovers_phase() {
        let w = 3.0;
        let t: Vec<f64> = (0..2000).map(|k| k as f64 * 0.005).collect();
        let y: Vec<f64> = t.iter().map(|&t| 2.0 * (w * t + 0.4).sin() + 0.3 + 0.01 * t).collect();
        let (a, b) = fit_sinusoid(&t, &y, w);
        let z = Complex64::new(a, b);
        assert!((z.norm() - 2.0).abs() < 1e-9);
        assert!((z.arg() - 0.4).abs() < 1e-9);
    }

    #[test]
    fn growth_rate_of_exponential() {
        let t: Vec<f64> = (0..3000).map(|k| k as f64 * 0.001).collect();
        let x: Vec<f64> = t.iter().map(|&t| (0.7 * t).exp() * (60.0 * t).sin()).collect();
        let s = envelope_growth_rate(&t, &x, 0.1, 0.0);
        assert!((s - 0.7).abs() < 0.05, "{s}");
        assert_eq!(Verdict::from_growth_rate(s), Verdict::Unstable);
        assert_eq!(Verdict::from_growth_rate(-1.0), Verdict::Stable);
        assert_eq!(Verdict::from_growth_rate(0.0), Verdict::Oscillatory);
    }
}
