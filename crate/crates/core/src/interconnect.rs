//! Compliance pairs and their series/parallel interconnection.
//!
//! A system is a pair `(C, H)`: `C` maps external torque to position and `H`
//! maps motor torque to the same position. The exoskeleton is assembled in
//! seven steps, from the bare motor up to the human-side cuff angle.

use serde::{Deserialize, Serialize};

use crate::tf::{DelayedTf, Lti, Polynomial, Tf, TfError};

/// Reflected plant constants, all expressed at the joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantParams {
    /// Reflected motor inertia, kg·m².
    #[serde(rename = "J_m")]
    pub j_m: f64,
    /// Reflected motor damping, N·m·s/rad.
    #[serde(rename = "B_m")]
    pub b_m: f64,
    /// SEA spring stiffness, N·m/rad.
    #[serde(rename = "K_s")]
    pub k_s: f64,
    /// Joint inertia, kg·m².
    #[serde(rename = "J_j")]
    pub j_j: f64,
    /// Cuff spring stiffness, N·m/rad.
    #[serde(rename = "K_c")]
    pub k_c: f64,
    /// Control delay, s.
    #[serde(rename = "T", default = "default_delay")]
    pub delay: f64,
}

pub fn default_delay() -> f64 {
    0.002
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("J_m", self.j_m),
            ("B_m", self.b_m),
            ("K_s", self.k_s),
            ("J_j", self.j_j),
            ("K_c", self.k_c),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("plant.{name} must be positive, got {v}"));
            }
        }
        if !(self.delay >= 0.0 && self.delay.is_finite()) {
            return Err(format!("plant.T must be nonnegative, got {}", self.delay));
        }
        Ok(())
    }

    /// Motor compliance `1 / (J_m s^2 + B_m s)`.
    pub fn motor_compliance(&self) -> Tf {
        Tf::second_order_compliance(self.j_m, self.b_m, 0.0).expect("positive inertia")
    }

    /// Reflects the motor-side quantities through a transmission ratio `j`.
    pub fn reflected(&self, j: f64) -> PlantParams {
        let j2 = j * j;
        PlantParams {
            j_m: self.j_m * j2,
            b_m: self.b_m * j2,
            k_s: self.k_s * j2,
            ..*self
        }
    }
}

/// Virtual motor inertia and damping the inner SEA loop is shaped to mimic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualMotor {
    pub j_hat: f64,
    pub b_hat: f64,
}

impl VirtualMotor {
    pub fn compliance(&self) -> Tf {
        Tf::second_order_compliance(self.j_hat, self.b_hat, 0.0).expect("positive inertia")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompliancePair<T> {
    /// Position per external torque.
    pub external: T,
    /// Position per motor torque.
    pub motor: T,
    pub label: String,
}

impl<T: Lti> CompliancePair<T> {
    pub fn new(external: T, motor: T, label: impl Into<String>) -> Self {
        CompliancePair {
            external,
            motor,
            label: label.into(),
        }
    }

    fn relabel(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }
}

/// Parallel interconnection with a compliance `c2`.
///
/// Evaluated as `C1 / (1 + C1 C2^-1)` and `H1 / (1 + C1 C2^-1)`, which equal
/// `[C1^-1 + C2^-1]^-1` and `[C1^-1 + C2^-1]^-1 C1^-1 H1` without inverting `C1`.
pub fn parallel_interconnect<T: Lti>(
    s1: &CompliancePair<T>,
    c2: &T,
) -> Result<CompliancePair<T>, TfError> {
    parallel_with_stiffness(s1, &c2.inv()?)
}

/// Parallel interconnection given the inverse compliance `k2 = C2^-1` directly.
pub fn parallel_with_stiffness<T: Lti>(
    s1: &CompliancePair<T>,
    k2: &T,
) -> Result<CompliancePair<T>, TfError> {
    let loop_gain = s1.external.mul(k2).simplify()?;
    let denom = T::gain(1.0).add(&loop_gain)?;
    Ok(CompliancePair::new(
        s1.external.div(&denom)?.simplify()?,
        s1.motor.div(&denom)?.simplify()?,
        format!("Parallel({})", s1.label),
    ))
}

/// Series interconnection: compliances add, the motor compliance is unchanged.
pub fn series_interconnect<T: Lti>(
    s1: &CompliancePair<T>,
    c2: &T,
) -> Result<CompliancePair<T>, TfError> {
    Ok(CompliancePair::new(
        s1.external.add(c2)?.simplify()?,
        s1.motor.clone(),
        format!("Series({})", s1.label),
    ))
}

/// Equivalent parallel compliance `-C1 / (H1 G)` of position feedback `G`.
///
/// With a delayed `H1` this object needs a negative delay; [`Tf`] reports
/// `NonInvertibleDelay`, [`DelayedTf`] carries it for pointwise evaluation.
pub fn virtual_parallel<T: Lti>(s1: &CompliancePair<T>, g: &T) -> Result<T, TfError> {
    s1.external.div(&s1.motor.mul(g))?.neg().simplify()
}

/// Equivalent series compliance `G H1` of force feedback `G`.
pub fn virtual_series<T: Lti>(s1: &CompliancePair<T>, g: &T) -> Result<T, TfError> {
    s1.motor.mul(g).simplify()
}

/// Closes position feedback `G` around `s1`: the parallel interconnection with
/// [`virtual_parallel`], evaluated without forming the negative-delay element.
pub fn close_position_feedback<T: Lti>(
    s1: &CompliancePair<T>,
    g: &T,
) -> Result<CompliancePair<T>, TfError> {
    let denom = T::gain(1.0).sub(&s1.motor.mul(g).simplify()?)?;
    Ok(CompliancePair::new(
        s1.external.div(&denom)?.simplify()?,
        s1.motor.div(&denom)?.simplify()?,
        format!("Parallel({}, virtual)", s1.label),
    ))
}

/// The three torque-normalized feedback paths of the controller.
#[derive(Debug, Clone, PartialEq)]
pub struct Feedback<T> {
    /// Motor position feedback `G_θ` (applied as `τ_m += G_θ θ_m`).
    pub g_theta: T,
    /// Spring torque feedback `G_s` acting on `τ_s`.
    pub g_s: T,
    /// Complete cuff torque feedback acting on `τ_c`, including the
    /// virtual-motor filter `G_v`.
    pub g_c: T,
}

impl Feedback<Tf> {
    pub fn zero() -> Self {
        Feedback {
            g_theta: Tf::zero(),
            g_s: Tf::zero(),
            g_c: Tf::zero(),
        }
    }

    pub fn to_delayed(&self) -> Feedback<DelayedTf> {
        Feedback {
            g_theta: DelayedTf::from(&self.g_theta),
            g_s: DelayedTf::from(&self.g_s),
            g_c: DelayedTf::from(&self.g_c),
        }
    }
}

/// S1 … S7 plus the virtual motor target.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemChain<T> {
    pub s1: CompliancePair<T>,
    pub s2: CompliancePair<T>,
    pub s3: CompliancePair<T>,
    pub s4: CompliancePair<T>,
    pub s5: CompliancePair<T>,
    pub s6: CompliancePair<T>,
    pub s7: CompliancePair<T>,
    pub virtual_target: CompliancePair<Tf>,
}

impl<T> SystemChain<T> {
    pub fn c4(&self) -> &T {
        &self.s4.external
    }
    pub fn c5(&self) -> &T {
        &self.s5.external
    }
    pub fn h5(&self) -> &T {
        &self.s5.motor
    }
    pub fn c6(&self) -> &T {
        &self.s6.external
    }
    pub fn c7(&self) -> &T {
        &self.s7.external
    }
}

fn assemble<T: Lti>(
    s1: CompliancePair<T>,
    fb: &Feedback<T>,
    k_s: f64,
    k_c: f64,
    vm: VirtualMotor,
    joint_stiffness: T,
) -> Result<SystemChain<T>, TfError> {
    let s2 = close_position_feedback(&s1, &fb.g_theta)?.relabel("S2");
    let s3 = series_interconnect(&s2, &virtual_series(&s2, &fb.g_s)?)?.relabel("S3");
    let s4 = series_interconnect(&s3, &T::gain(1.0 / k_s))?.relabel("S4");
    let s5 = parallel_with_stiffness(&s4, &joint_stiffness)?.relabel("S5");
    let s6 = series_interconnect(&s5, &virtual_series(&s5, &fb.g_c)?)?.relabel("S6");
    let s7 = series_interconnect(&s6, &T::gain(1.0 / k_c))?.relabel("S7");
    let c_hat = vm.compliance();
    Ok(SystemChain {
        s1,
        s2,
        s3,
        s4,
        s5,
        s6,
        s7,
        virtual_target: CompliancePair::new(c_hat.clone(), c_hat, "S5_hat"),
    })
}

/// Nominal chain: the actuator delay is dropped and improper feedbacks are
/// allowed, so every entry is an exact rational.
pub fn build_system_chain(
    p: &PlantParams,
    fb: &Feedback<Tf>,
    vm: VirtualMotor,
) -> Result<SystemChain<Tf>, TfError> {
    let c1 = p.motor_compliance();
    let s1 = CompliancePair::new(c1.clone(), c1, "S1");
    let joint = Tf::polynomial(Polynomial::new(vec![0.0, 0.0, p.j_j]));
    assemble(s1, fb, p.k_s, p.k_c, vm, joint)
}

/// Realized chain: the motor torque path keeps the delay `delay`.
pub fn build_realized_chain(
    p: &PlantParams,
    fb: &Feedback<Tf>,
    vm: VirtualMotor,
    delay: f64,
) -> Result<SystemChain<DelayedTf>, TfError> {
    let c1 = p.motor_compliance();
    let s1 = CompliancePair::new(
        DelayedTf::from(&c1),
        DelayedTf::from(&c1.clone().with_delay(delay)),
        "S1",
    );
    let joint = DelayedTf::from(&Tf::polynomial(Polynomial::new(vec![0.0, 0.0, p.j_j])));
    assemble(s1, &fb.to_delayed(), p.k_s, p.k_c, vm, joint)
}
