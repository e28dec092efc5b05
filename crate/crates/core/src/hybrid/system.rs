//! Open-loop hybrid system `H_{u,w}` and the interval projections `Pi`, `Psi`, `Phi`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{vec, Real};
use crate::sets::{numeric_field, BoxSet, BoxUnion, Clause, ConstraintSet, Dependence, ScalarConstraint};

use super::maps::{Selector, SetValuedMap};
use super::time::Phase;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub n: usize,
    pub m_c: usize,
    pub m_d: usize,
    pub d_c: usize,
    pub d_d: usize,
}

impl Dims {
    pub fn m(&self, p: Phase) -> usize {
        match p {
            Phase::Flow => self.m_c,
            Phase::Jump => self.m_d,
        }
    }

    pub fn d(&self, p: Phase) -> usize {
        match p {
            Phase::Flow => self.d_c,
            Phase::Jump => self.d_d,
        }
    }
}

/// Projection data supplied by hand for sets outside the interval-factorable class.
#[derive(Clone)]
pub struct ExplicitProjection<T> {
    /// `Pi(set)` over `x`.
    pub states: ConstraintSet<T>,
    pub psi: Arc<dyn Fn(&[T]) -> BoxUnion<T> + Send + Sync>,
    pub phi: Arc<dyn Fn(&[T], &[T]) -> BoxUnion<T> + Send + Sync>,
}

/// Flow-side or jump-side data: set over `(x, u, w)`, map, input and disturbance boxes.
#[derive(Clone)]
pub struct PhaseData<T> {
    pub set: ConstraintSet<T>,
    pub map: SetValuedMap<T>,
    pub u: BoxSet<T>,
    pub w: BoxSet<T>,
    pub projection: Option<ExplicitProjection<T>>,
}

impl<T: Real> PhaseData<T> {
    pub fn new(set: ConstraintSet<T>, map: SetValuedMap<T>, u: BoxSet<T>, w: BoxSet<T>) -> Self {
        PhaseData { set, map, u, w, projection: None }
    }
}

/// Exact `Theta_d` for systems whose jump image is monotone in `u_d`; `None` falls
/// back to grid filtering.
pub type ThetaRule<T> = Arc<dyn Fn(&[T]) -> Option<BoxUnion<T>> + Send + Sync>;

#[derive(Clone)]
pub struct HybridSystemUW<T> {
    pub name: String,
    pub n: usize,
    pub flow: PhaseData<T>,
    pub jump: PhaseData<T>,
    pub theta_d_rule: Option<ThetaRule<T>>,
}

impl<T: Real> HybridSystemUW<T> {
    pub fn new(name: impl Into<String>, n: usize, flow: PhaseData<T>, jump: PhaseData<T>) -> Result<Self> {
        let s = HybridSystemUW { name: name.into(), n, flow, jump, theta_d_rule: None };
        s.validate()?;
        Ok(s)
    }

    pub fn dims(&self) -> Dims {
        Dims {
            n: self.n,
            m_c: self.flow.u.dim(),
            m_d: self.jump.u.dim(),
            d_c: self.flow.w.dim(),
            d_d: self.jump.w.dim(),
        }
    }

    pub fn phase(&self, p: Phase) -> &PhaseData<T> {
        match p {
            Phase::Flow => &self.flow,
            Phase::Jump => &self.jump,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in [Phase::Flow, Phase::Jump] {
            let d = self.phase(p);
            let len = self.n + d.u.dim() + d.w.dim();
            if d.set.dim != len {
                return Err(Error::Dimension(format!(
                    "{:?} set over R^{} but (x,u,w) has length {}",
                    p, d.set.dim, len
                )));
            }
            if d.u.is_empty() || d.w.is_empty() {
                return Err(Error::Dimension(format!("{:?} input or disturbance box is empty", p)));
            }
            if let Some(pr) = &d.projection {
                if pr.states.dim != self.n {
                    return Err(Error::Dimension(format!("{:?} explicit projection not over R^{}", p, self.n)));
                }
            }
        }
        Ok(())
    }

    pub fn z(&self, x: &[T], u: &[T], w: &[T]) -> Vec<T> {
        vec::concat(&[x, u, w])
    }

    /// `(x, u, w)` in the set, with `u` and `w` in their boxes.
    pub fn contains(&self, p: Phase, x: &[T], u: &[T], w: &[T], tol: T) -> bool {
        let d = self.phase(p);
        d.u.contains(u, tol) && d.w.contains(w, tol) && d.set.contains(&self.z(x, u, w), tol)
    }

    /// Set violation at `(x, u, w)`, box excess included.
    pub fn violation(&self, p: Phase, x: &[T], u: &[T], w: &[T]) -> T {
        let d = self.phase(p);
        let excess = |v: &[T], b: &BoxSet<T>| {
            v.iter()
                .zip(b.lo.iter().zip(&b.hi))
                .fold(T::neg_infinity(), |m, (x, (l, h))| m.max(*l - *x).max(*x - *h))
        };
        d.set
            .violation(&self.z(x, u, w))
            .max(excess(u, &d.u))
            .max(excess(w, &d.w))
    }

    pub fn map_extremes(&self, p: Phase, x: &[T], u: &[T], w: &[T], tol: T) -> Vec<Vec<T>> {
        self.phase(p).map.extreme_points(&self.z(x, u, w), tol)
    }

    pub fn map_select(&self, p: Phase, x: &[T], u: &[T], w: &[T], tol: T, sel: &Selector<T>) -> Option<Vec<T>> {
        self.phase(p).map.select(&self.z(x, u, w), tol, sel)
    }

    /// `Psi^u(x)`: inputs for which some disturbance keeps `(x, u, w)` in the set.
    pub fn psi_u(&self, p: Phase, x: &[T], tol: T) -> Result<BoxUnion<T>> {
        let d = self.phase(p);
        if let Some(pr) = &d.projection {
            return Ok((pr.psi)(x));
        }
        let (u0, w0) = (d.u.center(), d.w.center());
        let mut out = BoxUnion::empty(d.u.dim());
        for clause in &d.set.clauses {
            let f = factor(clause, d, &self.name)?;
            let z0 = self.z(x, &u0, &w0);
            if !f.state.iter().all(|c| c.admits(&z0, tol)) {
                continue;
            }
            if !f.dist.is_empty() && !interval_of(&f.dist, &z0, self.n + d.u.dim(), &d.w, tol).feasible() {
                continue;
            }
            if f.input.is_empty() {
                out.push(d.u.clone());
            } else {
                let b = interval_of(&f.input, &z0, self.n, &d.u, tol);
                if b.feasible() {
                    out.push(BoxSet::interval(b.lo, b.hi));
                }
            }
        }
        Ok(out)
    }

    /// `Phi^w(x, u)`: disturbances keeping `(x, u, w)` in the set.
    pub fn phi_w(&self, p: Phase, x: &[T], u: &[T], tol: T) -> Result<BoxUnion<T>> {
        let d = self.phase(p);
        if let Some(pr) = &d.projection {
            return Ok((pr.phi)(x, u));
        }
        let mut out = BoxUnion::empty(d.w.dim());
        if !d.u.contains(u, tol) {
            return Ok(out);
        }
        let w0 = d.w.center();
        let z0 = self.z(x, u, &w0);
        for clause in &d.set.clauses {
            let f = factor(clause, d, &self.name)?;
            if !f.state.iter().chain(&f.input).all(|c| c.admits(&z0, tol)) {
                continue;
            }
            if f.dist.is_empty() {
                out.push(d.w.clone());
            } else {
                let b = interval_of(&f.dist, &z0, self.n + d.u.dim(), &d.w, tol);
                if b.feasible() {
                    out.push(BoxSet::interval(b.lo, b.hi));
                }
            }
        }
        Ok(out)
    }

    /// `Pi(set)` as a constraint set over `x`.
    pub fn project_states(&self, p: Phase) -> Result<ConstraintSet<T>> {
        let d = self.phase(p);
        if let Some(pr) = &d.projection {
            return Ok(pr.states.clone());
        }
        let n = self.n;
        let fill = vec::concat(&[&d.u.center(), &d.w.center()]);
        let mut out = ConstraintSet::empty(n);
        for clause in &d.set.clauses {
            let f = factor(clause, d, &self.name)?;
            let mut cs: Vec<ScalarConstraint<T>> = f.state.iter().map(|c| restrict(c, n, fill.clone())).collect();
            if !f.input.is_empty() {
                cs.push(margin_constraint("input interval nonempty", owned(&f.input), fill.clone(), n, d.u.clone()));
            }
            if !f.dist.is_empty() {
                let slot = n + d.u.dim();
                cs.push(margin_constraint("disturbance interval nonempty", owned(&f.dist), fill.clone(), slot, d.w.clone()));
            }
            out = out.with_clause(cs);
        }
        Ok(out)
    }
}

fn owned<T: Real>(cs: &[&ScalarConstraint<T>]) -> Vec<ScalarConstraint<T>> {
    cs.iter().map(|c| (*c).clone()).collect()
}

pub(crate) struct Factored<'a, T> {
    pub state: Vec<&'a ScalarConstraint<T>>,
    pub input: Vec<&'a ScalarConstraint<T>>,
    pub dist: Vec<&'a ScalarConstraint<T>>,
}

pub(crate) fn factor<'a, T: Real>(clause: &'a Clause<T>, d: &PhaseData<T>, name: &str) -> Result<Factored<'a, T>> {
    let mut f = Factored { state: Vec::new(), input: Vec::new(), dist: Vec::new() };
    for c in &clause.constraints {
        match c.dep {
            Dependence::State => f.state.push(c),
            Dependence::InputAffine => f.input.push(c),
            Dependence::DisturbanceAffine => f.dist.push(c),
            Dependence::General => {
                return Err(Error::NonFactorable(format!("{}: constraint `{}` couples u and w", name, c.name)))
            }
        }
    }
    if !f.input.is_empty() && d.u.dim() != 1 {
        return Err(Error::NonFactorable(format!("{}: input-affine constraints need a scalar input", name)));
    }
    if !f.dist.is_empty() && d.w.dim() != 1 {
        return Err(Error::NonFactorable(format!("{}: disturbance-affine constraints need a scalar disturbance", name)));
    }
    Ok(f)
}

/// Interval cut out of a box by constraints affine in the scalar `z[slot]`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct AffineBounds<T> {
    pub lo: T,
    pub hi: T,
    /// Largest residual among constraints that do not depend on the slot at this point.
    pub slack: T,
}

impl<T: Real> AffineBounds<T> {
    pub fn feasible(&self) -> bool {
        self.lo <= self.hi && self.slack <= T::zero()
    }

    pub fn margin(&self) -> T {
        (self.lo - self.hi).max(self.slack)
    }
}

pub(crate) fn interval_of<T: Real>(
    cs: &[&ScalarConstraint<T>],
    z: &[T],
    slot: usize,
    bounds: &BoxSet<T>,
    tol: T,
) -> AffineBounds<T> {
    let mut out = AffineBounds { lo: bounds.lo[0], hi: bounds.hi[0], slack: T::neg_infinity() };
    let mut p = z.to_vec();
    for c in cs {
        p[slot] = T::zero();
        let b = c.value(&p);
        p[slot] = T::one();
        let a = c.value(&p) - b;
        let t = c.tol(tol);
        let tiny = T::epsilon() * T::lit(64.0) * (T::one() + b.abs() + (a + b).abs());
        if a.abs() <= tiny {
            out.slack = out.slack.max(b - t);
        } else if a > T::zero() {
            out.hi = out.hi.min((t - b) / a);
        } else {
            out.lo = out.lo.max((t - b) / a);
        }
    }
    out
}

/// State constraint evaluated with the `(u, w)` block fixed; gradient keeps the `x` part.
pub(crate) fn restrict<T: Real>(c: &ScalarConstraint<T>, n: usize, fill: Vec<T>) -> ScalarConstraint<T> {
    let (f1, f2) = (c.field.clone(), c.field.clone());
    let (fill1, fill2) = (fill.clone(), fill);
    ScalarConstraint {
        name: c.name.clone(),
        field: crate::sets::field(
            move |x| f1.value(&vec::concat(&[x, &fill1])),
            move |x| {
                let mut g = f2.gradient(&vec::concat(&[x, &fill2]));
                g.truncate(n);
                g
            },
        ),
        dep: Dependence::State,
        scale: c.scale,
    }
}

/// `lo - hi` of the interval cut by `cs` in slot `slot`, as a constraint over `x`.
pub(crate) fn margin_constraint<T: Real>(
    name: &str,
    cs: Vec<ScalarConstraint<T>>,
    fill: Vec<T>,
    slot: usize,
    bounds: BoxSet<T>,
) -> ScalarConstraint<T> {
    let scale = cs.iter().fold(T::zero(), |m, c| m.max(c.scale));
    ScalarConstraint::new(
        name,
        numeric_field(move |x: &[T]| {
            let z = vec::concat(&[x, &fill]);
            let refs: Vec<&ScalarConstraint<T>> = cs.iter().collect();
            interval_of(&refs, &z, slot, &bounds, T::zero()).margin()
        }),
    )
    .with_scale(scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid::maps::Selection;
    use crate::sets::{c, field};

    /// x in R, u in [-1,1], w in [0,2]: flow set {x <= u, w >= x}.
    fn toy() -> HybridSystemUW<f64> {
        let flow = ConstraintSet::single(
            3,
            vec![
                ScalarConstraint::new("x - u", field(|z: &[f64]| z[0] - z[1], |_| vec![1.0, -1.0, 0.0]))
                    .with_dep(Dependence::InputAffine),
                ScalarConstraint::new("x - w", field(|z: &[f64]| z[0] - z[2], |_| vec![1.0, 0.0, -1.0]))
                    .with_dep(Dependence::DisturbanceAffine),
            ],
        );
        let jump = ConstraintSet::single(1, vec![c::ge("x >= 5", 1, 0, 5.0)]);
        HybridSystemUW::new(
            "toy",
            1,
            PhaseData::new(flow, SetValuedMap::single(Selection::new("f", |z: &[f64]| vec![z[1]])), BoxSet::interval(-1.0, 1.0), BoxSet::interval(0.0, 2.0)),
            PhaseData::new(jump, SetValuedMap::single(Selection::new("g", |_: &[f64]| vec![0.0])), BoxSet::zero_dim(), BoxSet::zero_dim()),
        )
        .unwrap()
    }

    #[test]
    fn psi_and_phi_intervals() {
        let s = toy();
        let psi = s.psi_u(Phase::Flow, &[0.5], 0.0).unwrap();
        assert_eq!(psi.intervals(), vec![(0.5, 1.0)]);
        let phi = s.phi_w(Phase::Flow, &[0.5], &[0.7], 0.0).unwrap();
        assert_eq!(phi.intervals(), vec![(0.5, 2.0)]);
        assert!(s.phi_w(Phase::Flow, &[0.5], &[0.2], 0.0).unwrap().is_empty());
        assert!(s.psi_u(Phase::Flow, &[1.5], 0.0).unwrap().is_empty());
        assert!(!s.psi_u(Phase::Jump, &[6.0], 0.0).unwrap().is_empty());
        assert!(s.psi_u(Phase::Jump, &[4.0], 0.0).unwrap().is_empty());
    }

    #[test]
    fn projection_matches_brute_force() {
        let s = toy();
        let pi = s.project_states(Phase::Flow).unwrap();
        for k in 0..=40 {
            let x = -2.0 + 0.1 * k as f64;
            let brute = (0..=200).any(|i| {
                (0..=200).any(|j| s.contains(Phase::Flow, &[x], &[-1.0 + 0.01 * i as f64], &[0.01 * j as f64], 1e-12))
            });
            assert_eq!(pi.contains(&[x], 1e-9), brute, "x = {}", x);
        }
    }

    #[test]
    fn general_dependence_is_not_factorable() {
        let mut s = toy();
        s.flow.set.clauses[0].constraints[0].dep = Dependence::General;
        assert!(matches!(s.project_states(Phase::Flow), Err(Error::NonFactorable(_))));
        assert!(s.psi_u(Phase::Flow, &[0.0], 0.0).is_err());
    }

    #[test]
    fn dimension_checks() {
        let mut s = toy();
        s.jump.u = BoxSet::interval(0.0, 1.0);
        assert!(matches!(s.validate(), Err(Error::Dimension(_))));
    }
}
