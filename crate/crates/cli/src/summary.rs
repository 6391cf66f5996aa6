//! Run summary JSON shared by every command.

use std::collections::BTreeMap;

use exoshape::shaping::{ComplianceShape, ControllerBundle, MetaGains, SeaGains};
use serde::Serialize;
use serde_json::Value;

use crate::config::Loaded;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedGains {
    pub sea: SeaGains,
    pub meta: MetaGains,
    pub shape_c4: ComplianceShape,
}

impl From<&ControllerBundle> for ResolvedGains {
    fn from(b: &ControllerBundle) -> Self {
        ResolvedGains {
            sea: b.sea,
            meta: b.meta,
            shape_c4: b.shape_c4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub tool_version: String,
    pub command: String,
    pub config_digest: String,
    pub applied_defaults: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gains: Option<ResolvedGains>,
    pub metrics: BTreeMap<String, Value>,
    pub stability: BTreeMap<String, Value>,
}

impl RunSummary {
    pub fn new(command: &str, loaded: &Loaded) -> Self {
        RunSummary {
            tool_version: crate::TOOL_VERSION.to_string(),
            command: command.to_string(),
            config_digest: loaded.config.digest(),
            applied_defaults: loaded.applied_defaults.clone(),
            warnings: loaded.warnings.clone(),
            gains: None,
            metrics: BTreeMap::new(),
            stability: BTreeMap::new(),
        }
    }

    pub fn metric(&mut self, key: &str, value: impl Serialize) {
        self.metrics
            .insert(key.to_string(), serde_json::to_value(value).expect("metric serializes"));
    }

    pub fn report(&mut self, key: &str, value: impl Serialize) {
        self.stability
            .insert(key.to_string(), serde_json::to_value(value).expect("report serializes"));
    }

    pub fn warn(&mut self, w: impl Into<String>) {
        let w = w.into();
        if !self.warnings.contains(&w) {
            self.warnings.push(w);
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}
