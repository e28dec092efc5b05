use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hybrid::{HybridSystemW, Phase, SolutionPair};
use crate::scalar::{vec, Real};
use crate::sets::{ConstraintSet, SublevelSet};

/// A set whose membership along a solution is checked sample by sample.
/// `residual <= 0` inside.
pub trait Target<T> {
    fn residual(&self, x: &[T]) -> T;
}

impl<T: Real> Target<T> for ConstraintSet<T> {
    fn residual(&self, x: &[T]) -> T {
        self.violation(x)
    }
}

impl<T: Real> Target<T> for SublevelSet<T> {
    fn residual(&self, x: &[T]) -> T {
        self.v.value(x) - self.r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub name: String,
    pub ok: bool,
    pub worst_violation: f64,
    pub at_t: f64,
    pub at_j: usize,
}

/// Largest target residual over every stored sample of the solution.
pub fn check_invariance<T: Real>(name: &str, sol: &SolutionPair<T>, target: &dyn Target<T>, tol: T) -> InvarianceReport {
    let mut worst = T::neg_infinity();
    let mut at = (T::zero(), 0);
    for (ht, x) in sol.arc.iter() {
        let r = target.residual(x);
        if r > worst || r.is_nan() {
            worst = r;
            at = (ht.t, ht.j);
        }
    }
    InvarianceReport {
        name: name.to_string(),
        ok: worst <= tol,
        worst_violation: worst.as_f64(),
        at_t: at.0.as_f64(),
        at_j: at.1,
    }
}

/// Residuals of the two solution conditions: flow samples in `C_w` with the
/// interval's `w_c`, and each jump pair consistent with `D_w` and `G_w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionCheck {
    pub flow_residual: f64,
    pub jump_residual: f64,
}

impl SolutionCheck {
    pub fn ok(&self, tol: f64) -> bool {
        self.flow_residual <= tol && self.jump_residual <= tol
    }
}

pub fn check_solution<T: Real>(sys: &HybridSystemW<T>, sol: &SolutionPair<T>, tol: T) -> Result<SolutionCheck> {
    let mut flow = T::zero();
    for (k, iv) in sol.arc.domain.intervals.iter().enumerate() {
        if iv.t_end <= iv.t_start {
            continue;
        }
        let w = &sol.disturbance.w_c[k];
        for (_, x) in &sol.arc.samples[k] {
            flow = flow.max(sys.violation(Phase::Flow, x, w)?);
        }
    }
    let mut jump = T::zero();
    for k in 0..sol.jumps() {
        let (pre, post) = sol.arc.jump_pair(k);
        let w = &sol.disturbance.w_d[k];
        jump = jump.max(sys.violation(Phase::Jump, pre, w)?);
        let u = sys.kappa(Phase::Jump, pre)?;
        let z = sys.open.z(pre, &u, w);
        let dist = sys
            .open
            .jump
            .map
            .sampled_values(&z, tol, 5)
            .iter()
            .map(|g| vec::norm_inf(&vec::sub(g, post)))
            .fold(T::infinity(), |a, b| a.min(b));
        jump = jump.max(dist);
    }
    Ok(SolutionCheck { flow_residual: flow.as_f64(), jump_residual: jump.as_f64() })
}
