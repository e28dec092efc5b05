//! Closed loop `H_w` obtained by substituting a feedback pair into `H_{u,w}`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{vec, Real};
use crate::sets::{numeric_field, BoxUnion, ConstraintSet, ScalarConstraint};

use super::feedback::{FeedbackLaw, FeedbackPair};
use super::maps::Selector;
use super::system::{factor, interval_of, restrict, HybridSystemUW};
use super::time::Phase;

#[derive(Clone)]
pub struct HybridSystemW<T> {
    pub open: Arc<HybridSystemUW<T>>,
    pub feedback: FeedbackPair<T>,
    flow_states: ConstraintSet<T>,
    jump_states: ConstraintSet<T>,
}

pub fn close_loop<T: Real>(sys: Arc<HybridSystemUW<T>>, fb: FeedbackPair<T>) -> Result<HybridSystemW<T>> {
    let d = sys.dims();
    if fb.kappa_c.dim() != d.m_c || fb.kappa_d.dim() != d.m_d {
        return Err(Error::Dimension(format!(
            "feedback ({}, {}) for inputs ({}, {})",
            fb.kappa_c.dim(),
            fb.kappa_d.dim(),
            d.m_c,
            d.m_d
        )));
    }
    let flow_states = closed_states(&sys, fb.kappa_c.clone(), Phase::Flow)?;
    let jump_states = closed_states(&sys, fb.kappa_d.clone(), Phase::Jump)?;
    Ok(HybridSystemW { open: sys, feedback: fb, flow_states, jump_states })
}

/// `Pi(C_w) = {x : exists w, (x, kappa(x), w) in C_uw}` as a constraint set over `x`.
fn closed_states<T: Real>(sys: &HybridSystemUW<T>, kappa: Arc<dyn FeedbackLaw<T>>, p: Phase) -> Result<ConstraintSet<T>> {
    let n = sys.n;
    let d = sys.phase(p);
    let w0 = d.w.center();
    if d.projection.is_some() {
        // Only an indicator is available; tangent tests at its boundary are unsupported.
        let open = sys.clone();
        let set = ConstraintSet::single(
            n,
            vec![ScalarConstraint::new(
                "closed-loop feasibility",
                numeric_field(move |x: &[T]| match kappa.eval(x) {
                    Ok(u) if !open.phi_w(p, x, &u, T::zero()).map(|b| b.is_empty()).unwrap_or(true) => -T::one(),
                    _ => T::one(),
                }),
            )],
        );
        return Ok(set);
    }
    let mut out = ConstraintSet::empty(n);
    let fill = vec::concat(&[&d.u.center(), &w0]);
    for clause in &d.set.clauses {
        let f = factor(clause, d, &sys.name)?;
        let mut cs: Vec<ScalarConstraint<T>> = f.state.iter().map(|c| restrict(c, n, fill.clone())).collect();
        for c in &f.input {
            let (c, k, w0) = ((*c).clone(), kappa.clone(), w0.clone());
            let name = c.name.clone();
            let scale = c.scale;
            cs.push(
                ScalarConstraint::new(
                    name,
                    numeric_field(move |x: &[T]| match k.eval(x) {
                        Ok(u) => c.value(&vec::concat(&[x, &u, &w0])),
                        Err(_) => T::infinity(),
                    }),
                )
                .with_scale(scale),
            );
        }
        if !f.dist.is_empty() {
            let dist: Vec<ScalarConstraint<T>> = f.dist.iter().map(|c| (*c).clone()).collect();
            let scale = dist.iter().fold(T::zero(), |m, c| m.max(c.scale));
            let (k, wb, w0) = (kappa.clone(), d.w.clone(), w0.clone());
            let slot = n + d.u.dim();
            cs.push(
                ScalarConstraint::new(
                    "disturbance interval nonempty",
                    numeric_field(move |x: &[T]| match k.eval(x) {
                        Ok(u) => {
                            let z = vec::concat(&[x, &u, &w0]);
                            let refs: Vec<&ScalarConstraint<T>> = dist.iter().collect();
                            interval_of(&refs, &z, slot, &wb, T::zero()).margin()
                        }
                        Err(_) => T::infinity(),
                    }),
                )
                .with_scale(scale),
            );
        }
        if d.u.dim() > 0 {
            let (k, ub) = (kappa.clone(), d.u.clone());
            cs.push(ScalarConstraint::new(
                "kappa in U",
                numeric_field(move |x: &[T]| match k.eval(x) {
                    Ok(u) => u
                        .iter()
                        .zip(ub.lo.iter().zip(&ub.hi))
                        .fold(T::neg_infinity(), |m, (v, (l, h))| m.max(*l - *v).max(*v - *h)),
                    Err(_) => T::infinity(),
                }),
            ));
        }
        out = out.with_clause(cs);
    }
    Ok(out)
}

impl<T: Real> HybridSystemW<T> {
    pub fn n(&self) -> usize {
        self.open.n
    }

    pub fn kappa(&self, p: Phase, x: &[T]) -> Result<Vec<T>> {
        self.feedback.law(p).eval(x)
    }

    pub fn contains(&self, p: Phase, x: &[T], w: &[T], tol: T) -> Result<bool> {
        let u = self.kappa(p, x)?;
        Ok(self.open.contains(p, x, &u, w, tol))
    }

    pub fn violation(&self, p: Phase, x: &[T], w: &[T]) -> Result<T> {
        let u = self.kappa(p, x)?;
        Ok(self.open.violation(p, x, &u, w))
    }

    pub fn map_extremes(&self, p: Phase, x: &[T], w: &[T], tol: T) -> Result<Vec<Vec<T>>> {
        let u = self.kappa(p, x)?;
        Ok(self.open.map_extremes(p, x, &u, w, tol))
    }

    pub fn map_select(&self, p: Phase, x: &[T], w: &[T], tol: T, sel: &Selector<T>) -> Result<Option<Vec<T>>> {
        let u = self.kappa(p, x)?;
        Ok(self.open.map_select(p, x, &u, w, tol, sel))
    }

    /// `Phi^w(x, kappa(x))`.
    pub fn phi_w(&self, p: Phase, x: &[T], tol: T) -> Result<BoxUnion<T>> {
        let u = self.kappa(p, x)?;
        self.open.phi_w(p, x, &u, tol)
    }

    /// `Pi_c(C_w)` or `Pi_d(D_w)` over `x`.
    pub fn state_set(&self, p: Phase) -> &ConstraintSet<T> {
        match p {
            Phase::Flow => &self.flow_states,
            Phase::Jump => &self.jump_states,
        }
    }

    /// `Pi_c(C_w) union Pi_d(D_w)`.
    pub fn either_states(&self) -> ConstraintSet<T> {
        self.flow_states.union(&self.jump_states)
    }
}
