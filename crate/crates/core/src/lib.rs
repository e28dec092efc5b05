//! Hybrid systems with inputs and disturbances: simulation, robust control Lyapunov
//! function checks and pointwise min-norm feedback synthesis.
//!
//! Everything is generic over the scalar type through [`Real`]; the `f64`
//! instantiations are re-exported at the crate root.

// NaN-rejecting checks are written as negated comparisons on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod config;
pub mod error;
pub mod expr;
pub mod hybrid;
pub mod rclf;
pub mod scalar;
pub mod sets;
pub mod simulator;
pub mod synthesis;
pub mod systems;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` instantiations of the generic types.
pub type HybridSystemUW = hybrid::HybridSystemUW<f64>;
pub type HybridSystemW = hybrid::HybridSystemW<f64>;
pub type FeedbackPair = hybrid::FeedbackPair<f64>;
pub type SolutionPair = hybrid::SolutionPair<f64>;
pub type HybridArc = hybrid::HybridArc<f64>;
pub type ConstraintSet = sets::ConstraintSet<f64>;
pub type BoxSet = sets::BoxSet<f64>;
pub type RclfCertificate = rclf::RclfCertificate<f64>;
pub type RclfContext = rclf::RclfContext<f64>;
pub type GridSpec = rclf::GridSpec<f64>;
pub type BuiltinSystem = systems::BuiltinSystem<f64>;
pub type RegulationSample = synthesis::RegulationSample<f64>;
