//! Built-in example systems with their parameters, feedbacks and certificates.

mod arm;
mod ball;
mod planar;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hybrid::{FeedbackPair, HybridSystemUW};
use crate::rclf::{GridSpec, RclfCertificate};
use crate::scalar::Real;
use crate::sets::{BoxSet, ConstraintSet};

pub use arm::{arm_initial_conditions, robot_arm, ArmParams};
pub use ball::{bouncing_ball, peak_heights, BouncingBallParams};
pub use planar::{planar_initial_conditions, planar_system, rotate, PlanarParams};

pub const SYSTEM_IDS: [&str; 3] = ["bouncing-ball", "robot-arm", "planar"];

/// A system together with everything the checks and the simulator need by default.
#[derive(Clone)]
pub struct BuiltinSystem<T> {
    pub id: String,
    pub system: Arc<HybridSystemUW<T>>,
    pub certificate: Option<RclfCertificate<T>>,
    /// Named feedback pairs; the first is the default.
    pub feedbacks: Vec<FeedbackPair<T>>,
    /// Target set for the generic-set conditions.
    pub k: Option<ConstraintSet<T>>,
    pub bbox: BoxSet<T>,
    /// Endpoints of lower-dimensional pieces that a lattice would miss.
    pub anchors: Vec<Vec<T>>,
    pub default_x0: Vec<T>,
}

impl<T: Real> BuiltinSystem<T> {
    pub fn feedback(&self, name: &str) -> Result<&FeedbackPair<T>> {
        self.feedbacks.iter().find(|f| f.name == name).ok_or_else(|| {
            let names: Vec<&str> = self.feedbacks.iter().map(|f| f.name.as_str()).collect();
            Error::Config(format!("system `{}` has no feedback `{}` (known: {})", self.id, name, names.join(", ")))
        })
    }

    pub fn default_feedback(&self) -> &FeedbackPair<T> {
        &self.feedbacks[0]
    }

    pub fn grid(&self, resolution: T) -> GridSpec<T> {
        GridSpec::new(self.bbox.clone(), resolution).with_anchors(self.anchors.clone())
    }
}

/// Built-in system by id with default parameters.
pub fn builtin<T: Real>(id: &str) -> Result<BuiltinSystem<T>> {
    match id {
        "bouncing-ball" => bouncing_ball(&BouncingBallParams::default()),
        "robot-arm" => robot_arm(&ArmParams::default()),
        "planar" => planar_system(&PlanarParams::default()),
        _ => Err(Error::Config(format!("unknown system `{}` (known: {})", id, SYSTEM_IDS.join(", ")))),
    }
}

fn check(violations: &mut Vec<String>, ok: bool, msg: impl FnOnce() -> String) {
    if !ok {
        violations.push(msg());
    }
}

fn finish(violations: Vec<String>) -> Result<()> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidParams(violations.join("; ")))
    }
}
