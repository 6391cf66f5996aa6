//! Double compliance shaping for strength-amplification exoskeletons with
//! elastic cuffs: transfer-function algebra, interconnection of compliance
//! pairs, gain synthesis, a transmission disturbance observer, frequency-domain
//! analysis and a nonlinear time-domain simulator.

pub mod analysis;
pub mod dob;
pub mod interconnect;
pub mod shaping;
pub mod sim;
pub mod tf;
