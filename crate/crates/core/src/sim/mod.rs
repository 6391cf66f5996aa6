//! Fixed-step nonlinear simulation of the exoskeleton with a sampled,
//! delayed controller.

mod controller;
mod human;
mod plant;
mod scenarios;
mod trace;

pub use controller::{build_dob_for, derivative_filter, Actuator, ActuatorOutput, ExoController, PdController};
pub use human::{HumanKind, HumanModel, MotionSample};
pub use plant::{step_plant, Boundary, FrictionModel, Plant, PlantOutputs, PlantState};
pub use scenarios::{
    envelope_growth_rate, fit_sinusoid, run_coupled_human, run_cuff_torque, run_dob_hysteresis_test,
    run_locked_output, run_scheduled_locked_output, sine_sweep_point, triangle, CoupledResult,
    HysteresisResult, LockedOutputResult, Schedule, Verdict, GROWTH_THRESHOLD,
};
pub use trace::{SimTrace, TraceRow};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dob::DobError;
use crate::shaping::ShapingError;
use crate::tf::TfError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("{signal} reached {value} at t = {t} s, beyond the divergence bound")]
    InstabilityDetected { t: f64, signal: &'static str, value: f64 },
    #[error("state became non-finite at t = {0} s")]
    NonFinite(f64),
    #[error("invalid simulation setup: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dob(#[from] DobError),
    #[error(transparent)]
    Shaping(#[from] ShapingError),
    #[error(transparent)]
    Tf(#[from] TfError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    #[default]
    LockedOutput,
    DobHysteresis,
    CoupledHuman,
    Free,
}

pub fn default_dt() -> f64 {
    0.001
}
pub fn default_substeps() -> usize {
    10
}
pub fn default_torque_limit() -> f64 {
    500.0
}
pub fn default_instability_factor() -> f64 {
    1e6
}

/// Triangle cuff-torque profile for the locked-output test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockedOutputSetup {
    #[serde(default = "LockedOutputSetup::default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "LockedOutputSetup::default_period")]
    pub period: f64,
}

impl LockedOutputSetup {
    fn default_amplitude() -> f64 {
        5.0
    }
    fn default_period() -> f64 {
        4.0
    }
}

impl Default for LockedOutputSetup {
    fn default() -> Self {
        LockedOutputSetup {
            amplitude: Self::default_amplitude(),
            period: Self::default_period(),
        }
    }
}

/// Slow sinusoidal position test under a PD loop on the motor angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HysteresisSetup {
    #[serde(default = "HysteresisSetup::default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "HysteresisSetup::default_freq")]
    pub freq_hz: f64,
    #[serde(default = "HysteresisSetup::default_kp")]
    pub kp: f64,
    #[serde(default = "HysteresisSetup::default_kd")]
    pub kd: f64,
    #[serde(default = "HysteresisSetup::default_dob_enabled")]
    pub dob_enabled: bool,
}

impl HysteresisSetup {
    fn default_amplitude() -> f64 {
        0.5
    }
    fn default_freq() -> f64 {
        0.05
    }
    fn default_kp() -> f64 {
        3000.0
    }
    fn default_kd() -> f64 {
        80.0
    }
    fn default_dob_enabled() -> bool {
        true
    }
}

impl Default for HysteresisSetup {
    fn default() -> Self {
        HysteresisSetup {
            amplitude: Self::default_amplitude(),
            freq_hz: Self::default_freq(),
            kp: Self::default_kp(),
            kd: Self::default_kd(),
            dob_enabled: Self::default_dob_enabled(),
        }
    }
}

/// Impulse at the human node, then free response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupledSetup {
    /// N·m·s
    #[serde(default = "CoupledSetup::default_impulse")]
    pub impulse: f64,
    /// Envelope window for the growth-rate fit, s.
    #[serde(default = "CoupledSetup::default_window")]
    pub window: f64,
}

impl CoupledSetup {
    fn default_impulse() -> f64 {
        0.01
    }
    fn default_window() -> f64 {
        0.1
    }
}

impl Default for CoupledSetup {
    fn default() -> Self {
        CoupledSetup {
            impulse: Self::default_impulse(),
            window: Self::default_window(),
        }
    }
}

/// Sinusoidal cuff torque with the output free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeSetup {
    #[serde(default = "FreeSetup::default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "FreeSetup::default_freq")]
    pub freq_hz: f64,
}

impl FreeSetup {
    fn default_amplitude() -> f64 {
        1.0
    }
    fn default_freq() -> f64 {
        1.0
    }
}

impl Default for FreeSetup {
    fn default() -> Self {
        FreeSetup {
            amplitude: Self::default_amplitude(),
            freq_hz: Self::default_freq(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_dt")]
    pub dt_ctrl: f64,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    /// Scenario default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    /// `round(T / dt_ctrl)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_steps: Option<usize>,
    #[serde(default)]
    pub scenario: Scenario,
    #[serde(default = "default_torque_limit")]
    pub torque_limit: f64,
    #[serde(default)]
    pub friction: FrictionModel,
    /// Constant offset added to the measured cuff torque.
    #[serde(default)]
    pub tau_c_bias: f64,
    #[serde(default = "default_instability_factor")]
    pub instability_factor: f64,
    #[serde(default)]
    pub locked_output: LockedOutputSetup,
    #[serde(default)]
    pub dob_hysteresis: HysteresisSetup,
    #[serde(default)]
    pub coupled_human: CoupledSetup,
    #[serde(default)]
    pub free: FreeSetup,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt_ctrl: default_dt(),
            substeps: default_substeps(),
            duration: None,
            delay_steps: None,
            scenario: Scenario::default(),
            torque_limit: default_torque_limit(),
            friction: FrictionModel::default(),
            tau_c_bias: 0.0,
            instability_factor: default_instability_factor(),
            locked_output: LockedOutputSetup::default(),
            dob_hysteresis: HysteresisSetup::default(),
            coupled_human: CoupledSetup::default(),
            free: FreeSetup::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.dt_ctrl > 0.0 && self.dt_ctrl.is_finite()) {
            return Err(format!("sim.dt_ctrl must be positive, got {}", self.dt_ctrl));
        }
        if self.substeps == 0 {
            return Err("sim.substeps must be at least 1".into());
        }
        if let Some(d) = self.duration {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(format!("sim.duration must be nonnegative, got {d}"));
            }
        }
        if !(self.torque_limit > 0.0) {
            return Err(format!("sim.torque_limit must be positive, got {}", self.torque_limit));
        }
        if !(self.instability_factor > 0.0) {
            return Err("sim.instability_factor must be positive".into());
        }
        self.friction.validate()?;
        let l = &self.locked_output;
        if !(l.amplitude > 0.0 && l.period > 0.0) {
            return Err("sim.locked_output amplitude and period must be positive".into());
        }
        let h = &self.dob_hysteresis;
        if !(h.amplitude > 0.0 && h.freq_hz > 0.0 && h.kp >= 0.0 && h.kd >= 0.0) {
            return Err("sim.dob_hysteresis amplitude and freq_hz must be positive, gains nonnegative".into());
        }
        if !(self.coupled_human.window > 0.0) {
            return Err("sim.coupled_human.window must be positive".into());
        }
        if !(self.free.amplitude > 0.0 && self.free.freq_hz > 0.0) {
            return Err("sim.free amplitude and freq_hz must be positive".into());
        }
        Ok(())
    }

    pub fn delay_steps_for(&self, delay: f64) -> usize {
        self.delay_steps
            .unwrap_or_else(|| (delay / self.dt_ctrl).round() as usize)
    }

    pub fn samples(&self, default_duration: f64) -> usize {
        let d = self.duration.unwrap_or(default_duration);
        (d / self.dt_ctrl + 1e-9).floor() as usize
    }
}
