//! Human operator models terminating the cuff.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HumanKind {
    Spring,
    Inertia,
    SpringDamper,
    PrescribedMotion,
}

/// One sample of a prescribed human angle trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionSample {
    pub t: f64,
    pub theta: f64,
}

/// Human impedance `J_h s^2 + B_h s + K_h` acting on the human-side angle.
/// Only the fields that belong to `kind` are consulted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanModel {
    pub kind: HumanKind,
    #[serde(rename = "K_h", default)]
    pub k_h: f64,
    #[serde(rename = "B_h", default)]
    pub b_h: f64,
    #[serde(rename = "J_h", default)]
    pub j_h: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub motion: Vec<MotionSample>,
}

impl HumanModel {
    pub fn spring(k_h: f64) -> Self {
        HumanModel {
            kind: HumanKind::Spring,
            k_h,
            b_h: 0.0,
            j_h: 0.0,
            motion: Vec::new(),
        }
    }

    pub fn pure_inertia(j_h: f64) -> Self {
        HumanModel {
            kind: HumanKind::Inertia,
            k_h: 0.0,
            b_h: 0.0,
            j_h,
            motion: Vec::new(),
        }
    }

    pub fn spring_damper(k_h: f64, b_h: f64) -> Self {
        HumanModel {
            kind: HumanKind::SpringDamper,
            k_h,
            b_h,
            j_h: 0.0,
            motion: Vec::new(),
        }
    }

    pub fn prescribed(motion: Vec<MotionSample>) -> Self {
        HumanModel {
            kind: HumanKind::PrescribedMotion,
            k_h: 0.0,
            b_h: 0.0,
            j_h: 0.0,
            motion,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let check = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("human.{name} must be nonnegative, got {v}"))
            }
        };
        match self.kind {
            HumanKind::Spring => check("K_h", self.k_h),
            HumanKind::Inertia => check("J_h", self.j_h).and_then(|_| {
                if self.j_h > 0.0 {
                    Ok(())
                } else {
                    Err("human.J_h must be positive for an inertia human".into())
                }
            }),
            HumanKind::SpringDamper => check("K_h", self.k_h).and(check("B_h", self.b_h)),
            HumanKind::PrescribedMotion => {
                if self.motion.is_empty() {
                    return Err("human.motion must not be empty".into());
                }
                if self.motion.windows(2).any(|w| !(w[1].t > w[0].t)) {
                    return Err("human.motion times must be strictly increasing".into());
                }
                Ok(())
            }
        }
    }

    pub fn stiffness(&self) -> f64 {
        match self.kind {
            HumanKind::Spring | HumanKind::SpringDamper => self.k_h,
            _ => 0.0,
        }
    }

    pub fn damping(&self) -> f64 {
        match self.kind {
            HumanKind::SpringDamper => self.b_h,
            _ => 0.0,
        }
    }

    pub fn inertia(&self) -> f64 {
        match self.kind {
            HumanKind::Inertia => self.j_h,
            _ => 0.0,
        }
    }

    pub fn has_inertia(&self) -> bool {
        self.inertia() > 0.0
    }

    pub fn has_damping(&self) -> bool {
        self.damping() > 0.0
    }

    /// Coefficients `[K_h, B_h, J_h]` of the impedance polynomial.
    pub fn impedance_coeffs(&self) -> [f64; 3] {
        [self.stiffness(), self.damping(), self.inertia()]
    }

    /// Linear interpolation of the prescribed trajectory, held at the ends.
    pub fn prescribed_angle(&self, t: f64) -> Option<f64> {
        if self.kind != HumanKind::PrescribedMotion {
            return None;
        }
        let m = &self.motion;
        if t <= m[0].t {
            return Some(m[0].theta);
        }
        if t >= m[m.len() - 1].t {
            return Some(m[m.len() - 1].theta);
        }
        let i = m.partition_point(|s| s.t <= t);
        let (a, b) = (m[i - 1], m[i]);
        Some(a.theta + (t - a.t) / (b.t - a.t) * (b.theta - a.theta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn only_kind_fields_are_used() {
        let mut h = HumanModel::spring(100.0);
        h.j_h = 5.0;
        assert_eq!(h.inertia(), 0.0);
        assert_eq!(h.impedance_coeffs(), [100.0, 0.0, 0.0]);
    }

    #[test]
    fn prescribed_interpolates() {
        let h = HumanModel::prescribed(vec![
            MotionSample { t: 0.0, theta: 0.0 },
            MotionSample { t: 1.0, theta: 2.0 },
        ]);
        assert_eq!(h.prescribed_angle(0.5), Some(1.0));
        assert_eq!(h.prescribed_angle(5.0), Some(2.0));
        assert_eq!(HumanModel::spring(1.0).prescribed_angle(0.5), None);
    }

    #[test]
    fn kind_parses_kebab_case() {
        let h: HumanModel = serde_json::from_str(r#"{"kind":"spring-damper","K_h":10,"B_h":2}"#).unwrap();
        assert_eq!(h.kind, HumanKind::SpringDamper);
        assert!(h.validate().is_ok());
        assert!(serde_json::from_str::<HumanModel>(r#"{"kind":"spring","Kh":1}"#).is_err());
    }
}
