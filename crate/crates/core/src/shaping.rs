//! Gain synthesis: compliance shapes to SEA gains, the virtual motor, the
//! meta-SEA cuff gains and the `G_v` compensator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interconnect::{
    build_realized_chain, build_system_chain, Feedback, PlantParams, SystemChain, VirtualMotor,
};
use crate::tf::{DelayedTf, Polynomial, Tf, TfError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapingError {
    #[error("G_v realization needs Ktilde1 = 0, got {0}")]
    DegenerateShape(f64),
    #[error("invalid design: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Tf(#[from] TfError),
}

/// Biquadratic compliance target
/// `(s^2 + Btilde2 s + Ktilde2) / ((s^2 + Btilde1 s + Ktilde1) K_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplianceShape {
    #[serde(rename = "Ktilde1")]
    pub k1: f64,
    #[serde(rename = "Btilde1")]
    pub b1: f64,
    #[serde(rename = "Ktilde2")]
    pub k2: f64,
    #[serde(rename = "Btilde2")]
    pub b2: f64,
}

impl ComplianceShape {
    /// The shape the uncontrolled SEA already has.
    pub fn open_loop(p: &PlantParams) -> Self {
        ComplianceShape {
            k1: 0.0,
            b1: p.b_m / p.j_m,
            k2: p.k_s / p.j_m,
            b2: p.b_m / p.j_m,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.k2 > 0.0 && self.b1 >= 0.0 && self.b2 >= 0.0 && self.k1 >= 0.0
    }

    pub fn to_tf(&self, k_s: f64) -> Result<Tf, TfError> {
        Tf::from_coeffs(
            &[self.k2, self.b2, 1.0],
            &[self.k1 * k_s, self.b1 * k_s, k_s],
        )
    }
}

/// SEA feedback gains in deflection form and torque form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeaGains {
    #[serde(rename = "K1")]
    pub k1: f64,
    #[serde(rename = "B1")]
    pub b1: f64,
    #[serde(rename = "K2_theta")]
    pub k2_theta: f64,
    #[serde(rename = "B2_theta")]
    pub b2_theta: f64,
    #[serde(rename = "K2_tau")]
    pub k2_tau: f64,
    #[serde(rename = "B2_tau")]
    pub b2_tau: f64,
}

impl SeaGains {
    pub fn zero() -> Self {
        SeaGains {
            k1: 0.0,
            b1: 0.0,
            k2_theta: 0.0,
            b2_theta: 0.0,
            k2_tau: 0.0,
            b2_tau: 0.0,
        }
    }

    pub fn negative_damping(&self) -> bool {
        self.b1 < 0.0
    }
}

pub fn extract_sea_gains(shape: &ComplianceShape, p: &PlantParams) -> SeaGains {
    let k1 = p.j_m * shape.k1;
    let k2_theta = p.j_m * (shape.k2 - shape.k1) - p.k_s;
    let b1 = p.j_m * shape.b1 - p.b_m;
    let b2_theta = p.j_m * (shape.b2 - shape.b1);
    SeaGains {
        k1,
        b1,
        k2_theta,
        b2_theta,
        k2_tau: k2_theta / p.k_s,
        b2_tau: b2_theta / p.k_s,
    }
}

pub fn default_zeta() -> f64 {
    1.0
}
pub fn default_zeta_hat() -> f64 {
    0.8
}
pub fn default_filter_omega() -> f64 {
    2.0 * std::f64::consts::PI * 50.0
}
pub fn default_filter_zeta() -> f64 {
    0.7
}
pub fn default_derivative_cutoff_hz() -> f64 {
    200.0
}

/// Designer knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    #[serde(rename = "J_hat")]
    pub j_hat: f64,
    #[serde(rename = "B_hat")]
    pub b_hat: f64,
    pub alpha: f64,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    #[serde(default = "default_zeta_hat")]
    pub zeta_hat: f64,
    #[serde(default = "default_filter_omega")]
    pub filter_omega: f64,
    #[serde(default = "default_filter_zeta")]
    pub filter_zeta: f64,
    /// First-order cutoff of every realized derivative, Hz.
    #[serde(default = "default_derivative_cutoff_hz")]
    pub derivative_cutoff_hz: f64,
}

impl DesignSpec {
    /// Demo-style spec with the default filters.
    pub fn new(j_hat: f64, b_hat: f64, alpha: f64) -> Self {
        DesignSpec {
            j_hat,
            b_hat,
            alpha,
            zeta: default_zeta(),
            zeta_hat: default_zeta_hat(),
            filter_omega: default_filter_omega(),
            filter_zeta: default_filter_zeta(),
            derivative_cutoff_hz: default_derivative_cutoff_hz(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return Err(format!("design.alpha must satisfy alpha >= 1, got {}", self.alpha));
        }
        for (name, v) in [
            ("J_hat", self.j_hat),
            ("B_hat", self.b_hat),
            ("zeta", self.zeta),
            ("zeta_hat", self.zeta_hat),
            ("filter_omega", self.filter_omega),
            ("filter_zeta", self.filter_zeta),
            ("derivative_cutoff_hz", self.derivative_cutoff_hz),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("design.{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    pub fn virtual_motor(&self) -> VirtualMotor {
        VirtualMotor {
            j_hat: self.j_hat,
            b_hat: self.b_hat,
        }
    }

    /// Warnings that do not block synthesis.
    pub fn warnings(&self, p: &PlantParams) -> Vec<String> {
        let mut w = Vec::new();
        if self.j_hat < 10.0 * p.j_j {
            w.push(format!(
                "J_hat = {} is below 10 J_j = {}; the virtual motor approximation degrades",
                self.j_hat,
                10.0 * p.j_j
            ));
        }
        w
    }
}

/// Cuff torque gains of the meta-SEA, torque form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaGains {
    #[serde(rename = "K2_hat")]
    pub k2_hat: f64,
    #[serde(rename = "B2_hat")]
    pub b2_hat: f64,
}

pub fn virtual_motor_shape(spec: &DesignSpec, p: &PlantParams) -> ComplianceShape {
    let k2 = p.k_s / spec.j_hat;
    ComplianceShape {
        k1: 0.0,
        b1: spec.b_hat / spec.j_hat,
        k2,
        b2: 2.0 * spec.zeta * k2.sqrt(),
    }
}

pub fn design_meta_gains(spec: &DesignSpec, p: &PlantParams) -> MetaGains {
    MetaGains {
        k2_hat: spec.alpha - 1.0,
        b2_hat: (2.0 * spec.zeta_hat * (p.k_c * spec.j_hat * spec.alpha).sqrt() - spec.b_hat) / p.k_c,
    }
}

/// `G_v` as designed (improper) and its causal realization, in that order.
///
/// Only the second-derivative part is low-passed; the static part is kept.
pub fn build_gv(
    spec: &DesignSpec,
    p: &PlantParams,
    shape: &ComplianceShape,
) -> Result<(Tf, Tf), ShapingError> {
    if shape.k1 != 0.0 {
        return Err(ShapingError::DegenerateShape(shape.k1));
    }
    let static_part = Tf::gain(p.j_m / spec.j_hat);
    // s^2 (s^2 + B2 s + K2) / (s (s + B1))
    let inertial = Tf::new(
        Polynomial::new(vec![0.0, 0.0, shape.k2, shape.b2, 1.0]),
        Polynomial::new(vec![0.0, shape.b1, 1.0]),
        0.0,
    )?
    .scale(p.j_j / p.k_s * p.j_m / spec.j_hat);
    let nominal = static_part.add(&inertial)?;
    let lp = Tf::low_pass2(spec.filter_omega, spec.filter_zeta)?;
    let causal = static_part.add(&inertial.mul(&lp))?;
    Ok((nominal, causal))
}

/// `(s^2 + 2 zeta_hat sqrt(alpha K_c / J_hat) s + alpha K_c / J_hat) / (K_c (s^2 + B_hat / J_hat s))`.
pub fn nominal_c7(spec: &DesignSpec, p: &PlantParams) -> Result<Tf, TfError> {
    let wn2 = spec.alpha * p.k_c / spec.j_hat;
    Tf::from_coeffs(
        &[wn2, 2.0 * spec.zeta_hat * wn2.sqrt(), 1.0],
        &[0.0, p.k_c * spec.b_hat / spec.j_hat, p.k_c],
    )
}

/// Everything the simulator and the analyses need from one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerBundle {
    pub plant: PlantParams,
    pub spec: DesignSpec,
    pub sea: SeaGains,
    pub meta: MetaGains,
    pub shape_c4: ComplianceShape,
    pub gv_nominal: Tf,
    pub gv_causal: Tf,
    pub nominal_c7: Tf,
    pub warnings: Vec<String>,
}

pub fn double_compliance_design(
    spec: &DesignSpec,
    p: &PlantParams,
) -> Result<ControllerBundle, ShapingError> {
    spec.validate().map_err(ShapingError::InvalidSpec)?;
    p.validate().map_err(ShapingError::InvalidSpec)?;
    let mut warnings = spec.warnings(p);
    let c7 = nominal_c7(spec, p)?;
    let meta = design_meta_gains(spec, p);
    if meta.b2_hat < 0.0 {
        warnings.push(format!("B2_hat = {} is negative", meta.b2_hat));
    }
    let shape = virtual_motor_shape(spec, p);
    let sea = extract_sea_gains(&shape, p);
    if sea.negative_damping() {
        warnings.push(format!("B1 = {} is negative", sea.b1));
    }
    let (gv_nominal, gv_causal) = build_gv(spec, p, &shape)?;
    Ok(ControllerBundle {
        plant: *p,
        spec: *spec,
        sea,
        meta,
        shape_c4: shape,
        gv_nominal,
        gv_causal,
        nominal_c7: c7,
        warnings,
    })
}

/// Redesigns for a transmission ratio `j`: motor-side quantities scale by `j^2`.
pub fn schedule_gains(
    spec: &DesignSpec,
    p: &PlantParams,
    jacobian_scale: f64,
) -> Result<ControllerBundle, ShapingError> {
    if !(jacobian_scale > 0.0 && jacobian_scale.is_finite()) {
        return Err(ShapingError::InvalidSpec(format!(
            "jacobian scale must be positive, got {jacobian_scale}"
        )));
    }
    double_compliance_design(spec, &p.reflected(jacobian_scale))
}

impl ControllerBundle {
    fn derivative(&self, k: f64) -> Tf {
        // k s / (s / w_d + 1)
        let wd = 2.0 * std::f64::consts::PI * self.spec.derivative_cutoff_hz;
        Tf::from_coeffs(&[0.0, k * wd], &[wd, 1.0]).expect("nonzero denominator")
    }

    /// Feedback with exact derivatives and the improper `G_v`.
    pub fn nominal_feedback(&self) -> Feedback<Tf> {
        let g_theta = Tf::from_coeffs(&[-self.sea.k1, -self.sea.b1], &[1.0]).expect("valid");
        let g_s = Tf::from_coeffs(&[self.sea.k2_tau, self.sea.b2_tau], &[1.0]).expect("valid");
        let cuff = Tf::from_coeffs(&[self.meta.k2_hat, self.meta.b2_hat], &[1.0]).expect("valid");
        Feedback {
            g_theta,
            g_s,
            g_c: self.gv_nominal.mul(&cuff),
        }
    }

    /// Feedback as implemented: filtered derivatives and the causal `G_v`.
    pub fn realized_feedback(&self) -> Feedback<Tf> {
        let g_theta = Tf::gain(-self.sea.k1)
            .add(&self.derivative(-self.sea.b1))
            .expect("equal delays");
        let g_s = Tf::gain(self.sea.k2_tau)
            .add(&self.derivative(self.sea.b2_tau))
            .expect("equal delays");
        let cuff = Tf::gain(self.meta.k2_hat)
            .add(&self.derivative(self.meta.b2_hat))
            .expect("equal delays");
        Feedback {
            g_theta,
            g_s,
            g_c: self.gv_causal.mul(&cuff),
        }
    }

    pub fn nominal_chain(&self) -> Result<SystemChain<Tf>, TfError> {
        build_system_chain(&self.plant, &self.nominal_feedback(), self.spec.virtual_motor())
    }

    /// Realized chain with delay `plant.T + hold`, where `hold` stands for
    /// the half-sample lag of a zero-order hold (pass 0 for none).
    pub fn realized_chain(&self, hold: f64) -> Result<SystemChain<DelayedTf>, TfError> {
        build_realized_chain(
            &self.plant,
            &self.realized_feedback(),
            self.spec.virtual_motor(),
            self.plant.delay + hold,
        )
    }

    /// Same gains acting on a plant whose cuff spring differs from the one
    /// used in the design.
    pub fn with_physical_cuff(&self, k_c: f64) -> ControllerBundle {
        let mut b = self.clone();
        b.plant.k_c = k_c;
        b
    }
}

/// Piecewise-linear transmission ratio as a function of joint angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianPoint {
    pub angle_rad: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JacobianTable {
    pub points: Vec<JacobianPoint>,
}

impl JacobianTable {
    pub fn validate(&self) -> Result<(), String> {
        if self.points.is_empty() {
            return Err("jacobian_table must not be empty".into());
        }
        for w in self.points.windows(2) {
            if !(w[1].angle_rad > w[0].angle_rad) {
                return Err("jacobian_table angles must be strictly increasing".into());
            }
        }
        if self.points.iter().any(|p| !(p.scale > 0.0 && p.scale.is_finite())) {
            return Err("jacobian_table scales must be positive".into());
        }
        Ok(())
    }

    /// Linear interpolation, held constant outside the table.
    pub fn scale_at(&self, angle: f64) -> f64 {
        let pts = &self.points;
        if angle <= pts[0].angle_rad {
            return pts[0].scale;
        }
        let last = &pts[pts.len() - 1];
        if angle >= last.angle_rad {
            return last.scale;
        }
        let i = pts.partition_point(|p| p.angle_rad <= angle);
        let (a, b) = (&pts[i - 1], &pts[i]);
        let t = (angle - a.angle_rad) / (b.angle_rad - a.angle_rad);
        a.scale + t * (b.scale - a.scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_plant() -> PlantParams {
        PlantParams {
            j_m: 1.0,
            b_m: 6.0,
            k_s: 500.0,
            j_j: 0.15,
            k_c: 300.0,
            delay: 0.002,
        }
    }

    fn demo_spec() -> DesignSpec {
        DesignSpec::new(2.0, 20.0, 8.0)
    }

    #[test]
    fn open_loop_shape_needs_no_gains() {
        let p = demo_plant();
        let g = extract_sea_gains(&ComplianceShape::open_loop(&p), &p);
        for v in [g.k1, g.b1, g.k2_theta, g.b2_theta, g.k2_tau, g.b2_tau] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn demo_gains() {
        let p = demo_plant();
        let shape = virtual_motor_shape(&demo_spec(), &p);
        assert_eq!(shape.k1, 0.0);
        assert!((shape.k2 - 250.0).abs() < 1e-12);
        assert!((shape.b1 - 10.0).abs() < 1e-12);
        assert!((shape.b2 - 2.0 * 250f64.sqrt()).abs() < 1e-12);
        let g = extract_sea_gains(&shape, &p);
        assert_eq!(g.k1, 0.0);
        assert!((g.b1 - 4.0).abs() < 1e-12);
        assert!((g.k2_theta + 250.0).abs() < 1e-12);
        assert!((g.b2_theta - 21.6228).abs() < 1e-4);
        assert!((g.k2_tau + 0.5).abs() < 1e-12);
        assert!((g.b2_tau - 0.043246).abs() < 1e-6);
        assert!((g.k2_tau * p.k_s - g.k2_theta).abs() < 1e-12);
    }

    #[test]
    fn matched_damping_cancels_b2() {
        let p = demo_plant();
        let mut spec = demo_spec();
        spec.zeta = spec.b_hat / (2.0 * (p.k_s * spec.j_hat).sqrt());
        let g = extract_sea_gains(&virtual_motor_shape(&spec, &p), &p);
        assert!(g.b2_theta.abs() < 1e-12);
    }

    #[test]
    fn meta_gains() {
        let p = demo_plant();
        let m = design_meta_gains(&demo_spec(), &p);
        assert_eq!(m.k2_hat, 7.0);
        assert!((m.b2_hat - (1.6 * 4800f64.sqrt() - 20.0) / 300.0).abs() < 1e-15);
        assert!((m.b2_hat - 0.30284).abs() < 1e-5);
        let mut s1 = demo_spec();
        s1.alpha = 1.0;
        assert_eq!(design_meta_gains(&s1, &p).k2_hat, 0.0);
    }

    #[test]
    fn gv_without_joint_inertia_is_a_gain() {
        let mut p = demo_plant();
        p.j_j = 0.0;
        let spec = demo_spec();
        let (n, c) = build_gv(&spec, &p, &virtual_motor_shape(&spec, &p)).unwrap();
        assert_eq!(n, Tf::gain(0.5));
        assert_eq!(c, Tf::gain(0.5));
        let spec = DesignSpec::new(1.0, 6.0, 2.0);
        let (n, _) = build_gv(&spec, &p, &virtual_motor_shape(&spec, &p)).unwrap();
        assert_eq!(n, Tf::gain(1.0));
    }

    #[test]
    fn gv_demo_causal() {
        let p = demo_plant();
        let spec = demo_spec();
        let (n, c) = build_gv(&spec, &p, &virtual_motor_shape(&spec, &p)).unwrap();
        assert!(!n.is_proper());
        assert_eq!(n.excess_degree(), Some(2));
        assert!(c.is_proper());
        assert!((c.dc_gain().unwrap() - 0.5).abs() < 1e-12);
        assert!((c.dc_gain().unwrap() - n.dc_gain().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn gv_rejects_nonzero_k1() {
        let p = demo_plant();
        let mut shape = virtual_motor_shape(&demo_spec(), &p);
        shape.k1 = 1.0;
        assert!(matches!(
            build_gv(&demo_spec(), &p, &shape),
            Err(ShapingError::DegenerateShape(_))
        ));
    }

    #[test]
    fn identity_design() {
        let p = demo_plant();
        let mut spec = DesignSpec::new(p.j_m, p.b_m, 1.0);
        spec.zeta = p.b_m / (2.0 * (p.k_s * p.j_m).sqrt());
        let b = double_compliance_design(&spec, &p).unwrap();
        for v in [b.sea.k1, b.sea.b1, b.sea.k2_tau, b.sea.b2_tau, b.meta.k2_hat] {
            assert!(v.abs() < 1e-12);
        }
        assert!(b.gv_causal.is_proper());
    }

    #[test]
    fn demo_dc_amplification() {
        let b = double_compliance_design(&demo_spec(), &demo_plant()).unwrap();
        let chain = b.nominal_chain().unwrap();
        let r = chain.c6().eval(1e-3).unwrap() / chain.c5().eval(1e-3).unwrap();
        assert!((r.norm() - 8.0).abs() < 0.08);
    }

    #[test]
    fn nominal_c7_zero_damping() {
        let b = double_compliance_design(&demo_spec(), &demo_plant()).unwrap();
        let z = b.nominal_c7.zeros().unwrap();
        assert_eq!(z.len(), 2);
        let wn = z[0].norm();
        assert!((wn - (8.0f64 * 300.0 / 2.0).sqrt()).abs() < 1e-9);
        assert!((-z[0].re / wn - 0.8).abs() < 1e-9);
    }

    #[test]
    fn torque_form_matches_closed_form() {
        let p = demo_plant();
        let spec = demo_spec();
        let g = extract_sea_gains(&virtual_motor_shape(&spec, &p), &p);
        assert!((g.k2_tau - (p.j_m / spec.j_hat - 1.0)).abs() < 1e-15);
        let b2 = (2.0 * spec.zeta * (p.k_s / spec.j_hat).sqrt() - spec.b_hat / spec.j_hat) * p.j_m / p.k_s;
        assert!((g.b2_tau - b2).abs() < 1e-15);
    }

    #[test]
    fn schedule_identity_and_meta_invariance() {
        let p = demo_plant();
        let spec = demo_spec();
        let a = double_compliance_design(&spec, &p).unwrap();
        assert_eq!(schedule_gains(&spec, &p, 1.0).unwrap(), a);
        let h = schedule_gains(&spec, &p, 0.5).unwrap();
        assert_ne!(h.sea.k2_tau, a.sea.k2_tau);
        assert_eq!(h.meta, a.meta);
        assert_eq!(h.nominal_c7, a.nominal_c7);
    }

    #[test]
    fn jacobian_table_interpolates() {
        let t = JacobianTable {
            points: vec![
                JacobianPoint { angle_rad: 0.0, scale: 1.0 },
                JacobianPoint { angle_rad: 1.0, scale: 2.0 },
            ],
        };
        assert!(t.validate().is_ok());
        assert_eq!(t.scale_at(-1.0), 1.0);
        assert_eq!(t.scale_at(0.25), 1.25);
        assert_eq!(t.scale_at(3.0), 2.0);
    }

    #[test]
    fn realized_feedback_is_proper() {
        let b = double_compliance_design(&demo_spec(), &demo_plant()).unwrap();
        let f = b.realized_feedback();
        assert!(f.g_theta.is_proper() && f.g_s.is_proper() && f.g_c.is_proper());
        let n = b.nominal_feedback();
        assert!((f.g_c.dc_gain().unwrap() - n.g_c.dc_gain().unwrap()).abs() < 1e-12);
    }
}
