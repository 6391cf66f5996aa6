//! Command implementations; `main` only parses arguments and writes files.

use exoshape::analysis::{
    amplification_bandwidth, amplification_ratio, bode_table, coupled_stability_margin, critical_human_inertia,
    critical_human_stiffness, decade_grid, passivity_phase_check, BodeTable, ExoModel, StabilityOptions,
};
use exoshape::dob::{dob_loop_gain, dob_stability_margin};
use exoshape::interconnect::SystemChain;
use exoshape::shaping::{double_compliance_design, ControllerBundle};
use exoshape::sim::{
    run_coupled_human, run_cuff_torque, run_dob_hysteresis_test, run_locked_output, triangle, HumanKind, Scenario,
    SimTrace,
};
use exoshape::tf::{DelayedTf, Lti, Tf};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Loaded, ProjectConfig};
use crate::error::CliError;
use crate::gains::GainsFile;
use crate::summary::RunSummary;

/// Search ranges for the critical human parameters.
pub const KH_RANGE: (f64, f64) = (1.0, 1e7);
pub const JH_RANGE: (f64, f64) = (1e-4, 10.0);
/// Relative band for the amplification bandwidth.
pub const BANDWIDTH_TOL: f64 = 0.1;

pub fn design_bundle(cfg: &ProjectConfig) -> Result<ControllerBundle, CliError> {
    double_compliance_design(&cfg.design, &cfg.plant).map_err(|e| CliError::from(e).context("design"))
}

/// Half a control period, standing in for the zero-order hold.
pub fn hold(cfg: &ProjectConfig) -> f64 {
    0.5 * cfg.sim.dt_ctrl
}

fn dc_amplification(bundle: &ControllerBundle) -> Result<f64, CliError> {
    Ok(amplification_ratio(&bundle.nominal_chain()?)?.dc)
}

#[derive(Serialize)]
struct PassivityReport {
    violations: Vec<exoshape::analysis::PhaseViolation>,
    onset_rad_s: Option<f64>,
}

fn passivity<T: Lti>(c7: &T) -> Result<PassivityReport, CliError> {
    let grid = decade_grid(1e-2, 1e4, 200)?;
    let violations = passivity_phase_check(c7, &grid);
    Ok(PassivityReport {
        onset_rad_s: violations.first().map(|v| v.omega_start),
        violations,
    })
}

pub fn cmd_design(loaded: &Loaded) -> Result<(GainsFile, RunSummary), CliError> {
    let cfg = &loaded.config;
    let bundle = design_bundle(cfg)?;
    let gains = GainsFile::new(cfg, &bundle)?;
    let mut summary = RunSummary::new("design", loaded);
    for w in &bundle.warnings {
        summary.warn(w.clone());
    }
    summary.gains = Some((&bundle).into());

    let ratio = amplification_ratio(&bundle.nominal_chain()?)?;
    summary.metric("dc_amplification", ratio.dc);
    summary.metric(
        "amplification_bandwidth_rad_s",
        amplification_bandwidth(&ratio.ratio, cfg.design.alpha, BANDWIDTH_TOL, 1e-3, 1e5)?,
    );
    let realized = bundle.realized_chain(hold(cfg))?;
    summary.metric("dc_amplification_realized", amplification_ratio(&realized)?.dc);

    summary.report("nominal_c7_passivity", passivity(&bundle.nominal_c7)?);
    summary.report("realized_c7_passivity", passivity(realized.c7())?);
    if cfg.plant.delay > 0.0 {
        summary.report("dob", dob_stability_margin(&cfg.dob.q(), cfg.plant.delay)?);
    }
    if let Some(h) = &cfg.human {
        if h.kind != HumanKind::PrescribedMotion {
            let model = ExoModel::realized(&bundle, hold(cfg))?;
            summary.report("coupled_human", coupled_stability_margin(&model, h, &StabilityOptions::default())?);
        }
    }
    Ok((gains, summary))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BodeSystem {
    C4,
    C5,
    C6,
    C7,
    Ratio,
    Gv,
    LDob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BodeMode {
    Nominal,
    Realized,
}

fn chain_system<T: Lti>(chain: &SystemChain<T>, system: BodeSystem) -> Result<Option<T>, CliError> {
    Ok(match system {
        BodeSystem::C4 => Some(chain.c4().clone()),
        BodeSystem::C5 => Some(chain.c5().clone()),
        BodeSystem::C6 => Some(chain.c6().clone()),
        BodeSystem::C7 => Some(chain.c7().clone()),
        BodeSystem::Ratio => Some(amplification_ratio(chain)?.ratio),
        BodeSystem::Gv | BodeSystem::LDob => None,
    })
}

pub fn cmd_bode(
    loaded: &Loaded,
    system: BodeSystem,
    mode: BodeMode,
    fmin: f64,
    fmax: f64,
    points: usize,
) -> Result<(BodeTable, RunSummary), CliError> {
    let cfg = &loaded.config;
    let bundle = design_bundle(cfg)?;
    let table = match (system, mode) {
        (BodeSystem::Gv, BodeMode::Nominal) => bode_table(&bundle.gv_nominal, fmin, fmax, points)?,
        (BodeSystem::Gv, BodeMode::Realized) => bode_table(&bundle.gv_causal, fmin, fmax, points)?,
        (BodeSystem::LDob, BodeMode::Nominal) => {
            bode_table(&dob_loop_gain(&cfg.dob.q(), 0.0), fmin, fmax, points)?
        }
        (BodeSystem::LDob, BodeMode::Realized) => {
            bode_table(&dob_loop_gain(&cfg.dob.q(), cfg.plant.delay), fmin, fmax, points)?
        }
        (_, BodeMode::Nominal) => {
            let tf: Tf = chain_system(&bundle.nominal_chain()?, system)?.expect("chain system");
            bode_table(&tf, fmin, fmax, points)?
        }
        (_, BodeMode::Realized) => {
            let tf: DelayedTf = chain_system(&bundle.realized_chain(hold(cfg))?, system)?.expect("chain system");
            bode_table(&tf, fmin, fmax, points)?
        }
    };
    let mut summary = RunSummary::new("bode", loaded);
    summary.metric("rows", table.rows.len());
    summary.metric("pole_rows", table.rows.iter().filter(|r| r.is_pole()).count());
    Ok((table, summary))
}

pub fn cmd_simulate(loaded: &Loaded, scenario: Option<Scenario>) -> Result<(SimTrace, RunSummary), CliError> {
    let cfg = &loaded.config;
    let sim = &cfg.sim;
    let scenario = scenario.unwrap_or(sim.scenario);
    let mut summary = RunSummary::new("simulate", loaded);
    summary.metric("scenario", scenario);
    let observer = cfg.dob.observer();
    let trace = match scenario {
        Scenario::LockedOutput => {
            let bundle = design_bundle(cfg)?;
            let lo = sim.locked_output;
            let profile = move |t: f64| triangle(t, lo.amplitude, lo.period);
            let duration = sim.duration.unwrap_or(3.0 * lo.period);
            let r = run_locked_output(&bundle, sim, observer.as_ref(), &profile, lo.period, duration)?;
            summary.metric("tau_ratio_steady", r.tau_ratio_steady);
            summary.metric("expected_tau_ratio", cfg.design.alpha - 1.0);
            r.trace
        }
        Scenario::DobHysteresis => {
            let setup = sim.dob_hysteresis;
            let cutoff = cfg.design.derivative_cutoff_hz;
            let settings = cfg.dob.settings();
            let off = run_dob_hysteresis_test(&cfg.plant, sim, &setup, None, cutoff)?;
            let on = run_dob_hysteresis_test(&cfg.plant, sim, &setup, Some(&settings), cutoff)?;
            summary.metric("loop_area_off", off.loop_area);
            summary.metric("loop_area_on", on.loop_area);
            summary.metric("loop_area_ratio", on.loop_area / off.loop_area);
            summary.metric("loop_area_coulomb", 4.0 * sim.friction.f_c * setup.amplitude);
            if setup.dob_enabled {
                on.trace
            } else {
                off.trace
            }
        }
        Scenario::CoupledHuman => {
            let human = cfg
                .human
                .as_ref()
                .ok_or_else(|| CliError::Validation("coupled-human scenario needs a `human` section".into()))?;
            if human.kind == HumanKind::PrescribedMotion {
                return Err(CliError::Validation("coupled-human scenario needs an impedance human".into()));
            }
            let bundle = design_bundle(cfg)?;
            let r = run_coupled_human(&bundle, human, sim, observer.as_ref(), sim.duration.unwrap_or(4.0))?;
            summary.metric("growth_rate", r.growth_rate);
            summary.metric("verdict", r.verdict);
            let model = ExoModel::realized(&bundle, hold(cfg))?;
            summary.report("coupled_human", coupled_stability_margin(&model, human, &StabilityOptions::default())?);
            r.trace
        }
        Scenario::Free => {
            let bundle = design_bundle(cfg)?;
            let f = sim.free;
            let w = 2.0 * std::f64::consts::PI * f.freq_hz;
            let input = move |t: f64| f.amplitude * (w * t).sin();
            run_cuff_torque(&bundle, sim, observer.as_ref(), &input, f.amplitude, sim.duration.unwrap_or(5.0), None)?
        }
    };
    summary.metric("samples", trace.len());
    if trace.is_empty() {
        summary.warn("zero samples simulated");
    }
    Ok((trace, summary))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepMetric {
    #[value(name = "dc_amplification")]
    DcAmplification,
    #[value(name = "phase_margin")]
    PhaseMargin,
    #[value(name = "critical_Kh")]
    CriticalKh,
    #[value(name = "critical_Jh")]
    CriticalJh,
    #[value(name = "loop_area")]
    LoopArea,
    #[value(name = "critical_omega_q")]
    CriticalOmegaQ,
}

impl SweepMetric {
    pub fn name(&self) -> &'static str {
        match self {
            SweepMetric::DcAmplification => "dc_amplification",
            SweepMetric::PhaseMargin => "phase_margin",
            SweepMetric::CriticalKh => "critical_Kh",
            SweepMetric::CriticalJh => "critical_Jh",
            SweepMetric::LoopArea => "loop_area",
            SweepMetric::CriticalOmegaQ => "critical_omega_q",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CliError> {
        <Self as clap::ValueEnum>::from_str(s, false).map_err(|_| CliError::UnknownMetric(s.to_string()))
    }
}

/// One metric on one config. Critical values that are not reached inside
/// the search range report the range end.
pub fn sweep_metric(cfg: &ProjectConfig, metric: SweepMetric) -> Result<f64, CliError> {
    let opts = StabilityOptions::default();
    match metric {
        SweepMetric::DcAmplification => dc_amplification(&design_bundle(cfg)?),
        SweepMetric::PhaseMargin => {
            let human = cfg
                .human
                .as_ref()
                .ok_or_else(|| CliError::Validation("phase_margin needs a `human` section".into()))?;
            let model = ExoModel::realized(&design_bundle(cfg)?, hold(cfg))?;
            Ok(coupled_stability_margin(&model, human, &opts)?
                .phase_margin_deg
                .unwrap_or(f64::INFINITY))
        }
        SweepMetric::CriticalKh => {
            let model = ExoModel::realized(&design_bundle(cfg)?, hold(cfg))?;
            Ok(critical_human_stiffness(&model, KH_RANGE.0, KH_RANGE.1, &opts)?.bound())
        }
        SweepMetric::CriticalJh => {
            let model = ExoModel::realized(&design_bundle(cfg)?, hold(cfg))?;
            Ok(critical_human_inertia(&model, JH_RANGE.0, JH_RANGE.1, &opts)?.bound())
        }
        SweepMetric::LoopArea => {
            let setup = cfg.sim.dob_hysteresis;
            let settings = cfg.dob.settings();
            let observer = setup.dob_enabled.then_some(&settings);
            Ok(run_dob_hysteresis_test(&cfg.plant, &cfg.sim, &setup, observer, cfg.design.derivative_cutoff_hz)?
                .loop_area)
        }
        SweepMetric::CriticalOmegaQ => Ok(dob_stability_margin(&cfg.dob.q(), cfg.plant.delay)?.critical_omega_q),
    }
}

pub fn parse_values(text: &str) -> Result<Vec<f64>, CliError> {
    let values: Vec<f64> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| CliError::Validation(format!("not a number: {s}"))))
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(CliError::Validation("values nonempty".into()));
    }
    Ok(values)
}

/// `(value, metric)` rows in input order.
pub fn cmd_sweep(
    loaded: &Loaded,
    param: &str,
    values: &[f64],
    metric: SweepMetric,
) -> Result<Vec<(f64, f64)>, CliError> {
    if values.is_empty() {
        return Err(CliError::Validation("values nonempty".into()));
    }
    // Resolve the path once so a typo fails before any work.
    loaded.config.with_param(param, values[0])?;
    values
        .par_iter()
        .map(|&v| {
            let cfg = loaded.config.with_param(param, v)?;
            sweep_metric(&cfg, metric)
                .map(|m| (v, m))
                .map_err(|e| e.context(&format!("{param} = {v}")))
        })
        .collect()
}

pub fn write_sweep_csv<W: std::io::Write>(
    w: W,
    param: &str,
    metric: SweepMetric,
    rows: &[(f64, f64)],
) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([param, metric.name()])?;
    for (v, m) in rows {
        wtr.serialize((v, m))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn cmd_dob_check(loaded: &Loaded) -> Result<RunSummary, CliError> {
    let cfg = &loaded.config;
    let mut summary = RunSummary::new("dob-check", loaded);
    let q = cfg.dob.q();
    let margin = dob_stability_margin(&q, cfg.plant.delay)?;
    if q.omega_q >= margin.critical_omega_q {
        summary.warn(format!(
            "omega_q = {} rad/s is at or above the critical {} rad/s for T = {} s",
            q.omega_q, margin.critical_omega_q, cfg.plant.delay
        ));
    }
    summary.metric("omega_q", q.omega_q);
    summary.metric("critical_omega_q", margin.critical_omega_q);
    summary.metric("phase_margin_deg", margin.phase_margin_deg);
    summary.report("dob", margin);
    Ok(summary)
}
