//! Project configuration: one JSON document, unknown keys rejected.

use std::collections::BTreeMap;
use std::path::Path;

use exoshape::dob::{default_omega_q, default_zeta_q, ObserverSettings, QFilter};
use exoshape::interconnect::PlantParams;
use exoshape::shaping::{
    default_derivative_cutoff_hz, default_filter_omega, default_filter_zeta, default_zeta, default_zeta_hat,
    DesignSpec, JacobianTable,
};
use exoshape::sim::{HumanModel, SimConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Design section as written; missing knobs get defaults from the plant.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDesign {
    #[serde(rename = "J_hat")]
    j_hat: Option<f64>,
    #[serde(rename = "B_hat")]
    b_hat: Option<f64>,
    alpha: f64,
    #[serde(default = "default_zeta")]
    zeta: f64,
    #[serde(default = "default_zeta_hat")]
    zeta_hat: f64,
    #[serde(default = "default_filter_omega")]
    filter_omega: f64,
    #[serde(default = "default_filter_zeta")]
    filter_zeta: f64,
    #[serde(default = "default_derivative_cutoff_hz")]
    derivative_cutoff_hz: f64,
}

pub fn default_rated_torque() -> f64 {
    100.0
}

fn default_true() -> bool {
    true
}

/// Observer section. `saturation` defaults to twice `rated_torque`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DobConfig {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_omega_q")]
    pub omega_q: f64,
    #[serde(default = "default_zeta_q")]
    pub zeta_q: f64,
    #[serde(default = "default_rated_torque")]
    pub rated_torque: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation: Option<f64>,
}

impl Default for DobConfig {
    fn default() -> Self {
        DobConfig {
            enabled: true,
            omega_q: default_omega_q(),
            zeta_q: default_zeta_q(),
            rated_torque: default_rated_torque(),
            saturation: None,
        }
    }
}

impl DobConfig {
    pub fn q(&self) -> QFilter {
        QFilter::new(self.omega_q, self.zeta_q)
    }

    pub fn observer(&self) -> Option<ObserverSettings> {
        self.enabled.then(|| ObserverSettings {
            q: self.q(),
            saturation: self.saturation.unwrap_or(2.0 * self.rated_torque),
        })
    }

    /// Settings regardless of `enabled`.
    pub fn settings(&self) -> ObserverSettings {
        ObserverSettings {
            q: self.q(),
            saturation: self.saturation.unwrap_or(2.0 * self.rated_torque),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    plant: PlantParams,
    design: RawDesign,
    #[serde(default)]
    dob: DobConfig,
    #[serde(default)]
    sim: SimConfig,
    #[serde(default)]
    human: Option<HumanModel>,
    #[serde(default)]
    jacobian_table: Option<JacobianTable>,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub plant: PlantParams,
    pub design: DesignSpec,
    pub dob: DobConfig,
    pub sim: SimConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human: Option<HumanModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jacobian_table: Option<JacobianTable>,
}

/// A loaded config plus what loading filled in.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ProjectConfig,
    /// Dotted path to value for every field the file left out.
    pub applied_defaults: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
}

impl ProjectConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.plant.validate()?;
        self.design.validate()?;
        self.dob.q().validate()?;
        if !(self.dob.rated_torque > 0.0) {
            return Err(format!("dob.rated_torque must be positive, got {}", self.dob.rated_torque));
        }
        if let Some(s) = self.dob.saturation {
            if !(s > 0.0) {
                return Err(format!("dob.saturation must be positive, got {s}"));
            }
        }
        self.sim.validate()?;
        if let Some(h) = &self.human {
            h.validate()?;
        }
        if let Some(j) = &self.jacobian_table {
            j.validate()?;
        }
        Ok(())
    }

    pub fn warnings(&self) -> Vec<String> {
        self.design.warnings(&self.plant)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Copy with one dotted-path value replaced, revalidated.
    pub fn with_param(&self, path: &str, value: f64) -> Result<ProjectConfig, CliError> {
        let mut doc = serde_json::to_value(self).expect("config serializes");
        let mut slot = &mut doc;
        for key in path.split('.') {
            slot = slot
                .get_mut(key)
                .ok_or_else(|| CliError::UnknownParam(path.to_string()))?;
        }
        if !slot.is_number() {
            return Err(CliError::UnknownParam(path.to_string()));
        }
        *slot = serde_json::json!(value);
        let cfg: ProjectConfig =
            serde_json::from_value(doc).map_err(|e| CliError::Validation(format!("{path} = {value}: {e}")))?;
        cfg.validate().map_err(CliError::Validation)?;
        Ok(cfg)
    }
}

fn resolve(raw: RawConfig) -> ProjectConfig {
    let d = raw.design;
    ProjectConfig {
        plant: raw.plant,
        design: DesignSpec {
            j_hat: d.j_hat.unwrap_or(2.0 * raw.plant.j_m),
            b_hat: d.b_hat.unwrap_or(2.0 * raw.plant.b_m),
            alpha: d.alpha,
            zeta: d.zeta,
            zeta_hat: d.zeta_hat,
            filter_omega: d.filter_omega,
            filter_zeta: d.filter_zeta,
            derivative_cutoff_hz: d.derivative_cutoff_hz,
        },
        dob: raw.dob,
        sim: raw.sim,
        human: raw.human,
        jacobian_table: raw.jacobian_table,
    }
}

/// Leaves of `resolved` with no counterpart in `given`.
fn missing_leaves(given: Option<&Value>, resolved: &Value, prefix: &str, out: &mut BTreeMap<String, Value>) {
    match (resolved, given) {
        (Value::Object(r), Some(Value::Object(g))) => {
            for (k, v) in r {
                missing_leaves(g.get(k), v, &join(prefix, k), out);
            }
        }
        (Value::Object(r), None) => {
            for (k, v) in r {
                missing_leaves(None, v, &join(prefix, k), out);
            }
        }
        (v, None) => {
            out.insert(prefix.to_string(), v.clone());
        }
        _ => {}
    }
}

fn join(prefix: &str, k: &str) -> String {
    if prefix.is_empty() {
        k.to_string()
    } else {
        format!("{prefix}.{k}")
    }
}

pub fn parse_config(text: &str) -> Result<Loaded, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        CliError::Parse {
            line: inner.line(),
            field: e.path().to_string(),
            message: inner.to_string(),
        }
    })?;
    let config = resolve(raw);
    config.validate().map_err(CliError::Validation)?;
    let given: Value = serde_json::from_str(text).expect("already parsed");
    let mut applied_defaults = BTreeMap::new();
    let resolved = serde_json::to_value(&config).expect("config serializes");
    missing_leaves(Some(&given), &resolved, "", &mut applied_defaults);
    if config.dob.saturation.is_none() {
        applied_defaults.insert("dob.saturation".into(), serde_json::json!(2.0 * config.dob.rated_torque));
    }
    let warnings = config.warnings();
    Ok(Loaded {
        config,
        applied_defaults,
        warnings,
    })
}

pub fn load_config(path: &Path) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}
