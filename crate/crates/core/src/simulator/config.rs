use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid::{JumpSelector, Selector};
use crate::scalar::{vec, Real};

/// Which motion wins on `Pi_c ∩ Pi_d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Priority {
    #[default]
    JumpFirst,
    FlowFirst,
}

/// How a disturbance channel is drawn. Draws are uniform over `Phi_w` at the
/// current state, so they are admissible by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisturbancePolicy {
    Constant(Vec<f64>),
    UniformPerJump,
    UniformPerInterval,
}

/// Element of a set-valued flow map followed by the integrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowSelector {
    /// i-th applicable selection at the centre of its parameter box.
    Named(usize),
    /// First applicable selection at this parameter value.
    Param(Vec<f64>),
}

impl FlowSelector {
    pub fn to_selector<T: Real>(&self) -> Selector<T> {
        match self {
            FlowSelector::Named(i) => Selector::Index(*i),
            FlowSelector::Param(p) => Selector::Param(vec::from_f64(p)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpChoice {
    First,
    Uniform,
}

impl From<JumpChoice> for JumpSelector {
    fn from(c: JumpChoice) -> Self {
        match c {
            JumpChoice::First => JumpSelector::First,
            JumpChoice::Uniform => JumpSelector::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub horizon_t: f64,
    pub horizon_j: usize,
    pub step_init: f64,
    pub step_max: f64,
    pub step_min: f64,
    /// Absolute and relative local error per step (step doubling estimate).
    pub atol: f64,
    pub rtol: f64,
    /// State-space width of event brackets and the membership tolerance at events.
    pub event_tol: f64,
    pub priority: Priority,
    pub seed: u64,
    pub w_c: DisturbancePolicy,
    pub w_d: DisturbancePolicy,
    pub flow_selector: FlowSelector,
    pub jump_selector: JumpChoice,
    /// States with a coordinate beyond this magnitude count as a finite escape.
    pub escape_radius: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            horizon_t: 20.0,
            horizon_j: 10_000,
            step_init: 1e-3,
            step_max: 1e-2,
            step_min: 1e-12,
            atol: 1e-10,
            rtol: 1e-10,
            event_tol: 1e-9,
            priority: Priority::JumpFirst,
            seed: 0,
            w_c: DisturbancePolicy::UniformPerInterval,
            w_d: DisturbancePolicy::UniformPerJump,
            flow_selector: FlowSelector::Named(0),
            jump_selector: JumpChoice::First,
            escape_radius: 1e12,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSimConfig(m));
        if !(self.step_min > 0.0 && self.step_min <= self.step_init && self.step_init <= self.step_max) {
            return bad(format!(
                "need 0 < step_min <= step_init <= step_max, got {} / {} / {}",
                self.step_min, self.step_init, self.step_max
            ));
        }
        if !(self.event_tol > 0.0) {
            return bad(format!("event_tol = {} must be positive", self.event_tol));
        }
        if !(self.horizon_t >= 0.0 && self.horizon_t.is_finite()) {
            return bad(format!("horizon_t = {} must be finite and nonnegative", self.horizon_t));
        }
        if self.horizon_j == 0 {
            return bad("horizon_j must be positive".into());
        }
        if !(self.atol > 0.0 && self.rtol >= 0.0) {
            return bad("atol must be positive and rtol nonnegative".into());
        }
        Ok(())
    }
}
