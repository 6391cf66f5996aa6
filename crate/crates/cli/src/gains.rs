//! Gains file written by `design`.

use exoshape::interconnect::PlantParams;
use exoshape::shaping::{ComplianceShape, ControllerBundle, DesignSpec, MetaGains, SeaGains};
use exoshape::sim::derivative_filter;
use exoshape::tf::{discretize_tustin, DiscreteTf, Polynomial, Tf};
use serde::{Deserialize, Serialize};

use crate::config::ProjectConfig;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteGains {
    pub dt: f64,
    /// Filtered derivative shared by the three channels.
    pub derivative: DiscreteTf,
    pub gv: DiscreteTf,
    pub q: DiscreteTf,
    /// `Q (J_m s^2 + B_m s)` on the motor angle.
    pub dob_inverse_plant: DiscreteTf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsFile {
    pub tool_version: String,
    pub config_digest: String,
    pub plant: PlantParams,
    pub design: DesignSpec,
    pub shape_c4: ComplianceShape,
    pub sea: SeaGains,
    pub meta: MetaGains,
    pub gv_nominal: Tf,
    pub gv_causal: Tf,
    pub nominal_c7: Tf,
    pub q: Tf,
    pub discrete: DiscreteGains,
}

impl GainsFile {
    pub fn new(cfg: &ProjectConfig, bundle: &ControllerBundle) -> Result<Self, CliError> {
        let dt = cfg.sim.dt_ctrl;
        let q = cfg.dob.q().tf();
        let inverse = q.mul(&Tf::polynomial(Polynomial::new(vec![0.0, cfg.plant.b_m, cfg.plant.j_m])));
        Ok(GainsFile {
            tool_version: crate::TOOL_VERSION.to_string(),
            config_digest: cfg.digest(),
            plant: bundle.plant,
            design: bundle.spec,
            shape_c4: bundle.shape_c4,
            sea: bundle.sea,
            meta: bundle.meta,
            gv_nominal: bundle.gv_nominal.clone(),
            gv_causal: bundle.gv_causal.clone(),
            nominal_c7: bundle.nominal_c7.clone(),
            discrete: DiscreteGains {
                dt,
                derivative: derivative_filter(bundle.spec.derivative_cutoff_hz, dt)?,
                gv: discretize_tustin(&bundle.gv_causal, dt)?,
                q: discretize_tustin(&q, dt)?,
                dob_inverse_plant: discretize_tustin(&inverse, dt)?,
            },
            q,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("gains serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Parse {
            line: e.line(),
            field: String::new(),
            message: e.to_string(),
        })
    }

    /// True when every feedback gain of the composite law is zero up to
    /// rounding.
    pub fn feedback_is_zero(&self) -> bool {
        let s = &self.sea;
        [s.k1, s.b1, s.k2_theta, s.b2_theta, s.k2_tau, s.b2_tau, self.meta.k2_hat, self.meta.b2_hat]
            .iter()
            .all(|g| g.abs() <= 1e-9)
    }
}
