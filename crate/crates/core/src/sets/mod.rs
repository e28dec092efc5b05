//! Constraint-described sets: disjunctions of conjunctions of `h(z) <= 0`.

mod boxes;
mod sample;

use std::fmt;
use std::sync::Arc;

pub use boxes::{BoxSet, BoxUnion};
pub use sample::{lattice, lattice_filter_map, sample, sample_level_boundary, sample_with, Provenance, SampleGrid, SampleMode, SampleOptions};

use crate::error::{Error, Result};
use crate::scalar::{vec, Real};

/// Default membership tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Scalar field with gradient.
pub trait ScalarField<T: Real>: Send + Sync {
    fn value(&self, z: &[T]) -> T;
    fn gradient(&self, z: &[T]) -> Vec<T>;
}

pub type Field<T> = Arc<dyn ScalarField<T>>;
pub type ScalarFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
pub type GradFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;

/// Field from closures. Without an analytic gradient, central differences are used.
pub struct FnField<T> {
    f: ScalarFn<T>,
    g: Option<GradFn<T>>,
}

impl<T: Real> ScalarField<T> for FnField<T> {
    fn value(&self, z: &[T]) -> T {
        (self.f)(z)
    }

    fn gradient(&self, z: &[T]) -> Vec<T> {
        match &self.g {
            Some(g) => g(z),
            None => fd_gradient(&*self.f, z),
        }
    }
}

pub fn field<T: Real>(
    f: impl Fn(&[T]) -> T + Send + Sync + 'static,
    g: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
) -> Field<T> {
    Arc::new(FnField { f: Arc::new(f), g: Some(Arc::new(g)) })
}

pub fn numeric_field<T: Real>(f: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Field<T> {
    Arc::new(FnField { f: Arc::new(f), g: None })
}

/// Central finite differences with a step scaled to each coordinate.
pub fn fd_gradient<T: Real>(f: &dyn Fn(&[T]) -> T, z: &[T]) -> Vec<T> {
    let base = T::epsilon().cbrt();
    let mut p = z.to_vec();
    (0..z.len())
        .map(|i| {
            let h = base * T::one().max(z[i].abs());
            let zi = z[i];
            p[i] = zi + h;
            let fp = f(&p);
            p[i] = zi - h;
            let fm = f(&p);
            p[i] = zi;
            (fp - fm) / (h + h)
        })
        .collect()
}

/// How a constraint over `(x, u, w)` depends on the input and disturbance blocks.
/// Drives the interval projection; irrelevant for sets over `x` alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dependence {
    State,
    InputAffine,
    DisturbanceAffine,
    General,
}

#[derive(Clone)]
pub struct ScalarConstraint<T> {
    pub name: String,
    pub field: Field<T>,
    pub dep: Dependence,
    /// Typical magnitude of `h`; the membership tolerance is `tol * (1 + scale)`.
    pub scale: T,
}

impl<T: Real> ScalarConstraint<T> {
    pub fn new(name: impl Into<String>, field: Field<T>) -> Self {
        ScalarConstraint { name: name.into(), field, dep: Dependence::State, scale: T::zero() }
    }

    pub fn with_dep(mut self, dep: Dependence) -> Self {
        self.dep = dep;
        self
    }

    pub fn with_scale(mut self, scale: T) -> Self {
        self.scale = scale;
        self
    }

    pub fn value(&self, z: &[T]) -> T {
        self.field.value(z)
    }

    pub fn tol(&self, tol: T) -> T {
        tol * (T::one() + self.scale)
    }

    pub fn admits(&self, z: &[T], tol: T) -> bool {
        self.value(z) <= self.tol(tol)
    }
}

impl<T> fmt::Debug for ScalarConstraint<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <= 0 ({:?})", self.name, self.dep)
    }
}

#[derive(Clone, Debug)]
pub struct Clause<T> {
    pub constraints: Vec<ScalarConstraint<T>>,
}

impl<T: Real> Clause<T> {
    pub fn contains(&self, z: &[T], tol: T) -> bool {
        self.constraints.iter().all(|c| c.admits(z, tol))
    }

    /// Largest constraint value; `-inf` for the empty conjunction.
    pub fn violation(&self, z: &[T]) -> T {
        self.constraints
            .iter()
            .fold(T::neg_infinity(), |m, c| m.max(c.value(z)))
    }
}

/// Union over clauses of the intersection of each clause's constraints.
#[derive(Clone, Debug)]
pub struct ConstraintSet<T> {
    pub dim: usize,
    pub clauses: Vec<Clause<T>>,
}

impl<T: Real> ConstraintSet<T> {
    pub fn empty(dim: usize) -> Self {
        ConstraintSet { dim, clauses: Vec::new() }
    }

    pub fn universe(dim: usize) -> Self {
        ConstraintSet { dim, clauses: vec![Clause { constraints: Vec::new() }] }
    }

    pub fn single(dim: usize, constraints: Vec<ScalarConstraint<T>>) -> Self {
        ConstraintSet { dim, clauses: vec![Clause { constraints }] }
    }

    pub fn with_clause(mut self, constraints: Vec<ScalarConstraint<T>>) -> Self {
        self.clauses.push(Clause { constraints });
        self
    }

    pub fn is_trivially_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn contains(&self, z: &[T], tol: T) -> bool {
        self.clauses.iter().any(|c| c.contains(z, tol))
    }

    pub fn satisfied_clauses(&self, z: &[T], tol: T) -> Vec<usize> {
        (0..self.clauses.len())
            .filter(|&i| self.clauses[i].contains(z, tol))
            .collect()
    }

    /// `min_clause max_i h_i(z)`: nonpositive exactly on the set (tolerance aside).
    /// `+inf` for the empty set.
    pub fn violation(&self, z: &[T]) -> T {
        self.clauses
            .iter()
            .fold(T::infinity(), |m, c| m.min(c.violation(z)))
    }

    /// Like [`violation`](Self::violation) with each `h` divided by `1 + scale`, so
    /// that membership at tolerance `tol` reads `scaled_violation <= tol`.
    pub fn scaled_violation(&self, z: &[T]) -> T {
        self.clauses.iter().fold(T::infinity(), |m, c| {
            m.min(
                c.constraints
                    .iter()
                    .fold(T::neg_infinity(), |a, h| a.max(h.value(z) / (T::one() + h.scale))),
            )
        })
    }

    pub fn union(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "union of sets of different dimension");
        let mut clauses = self.clauses.clone();
        clauses.extend(other.clauses.iter().cloned());
        ConstraintSet { dim: self.dim, clauses }
    }

    /// Intersection, distributing clauses (the result has `|A| * |B|` clauses).
    pub fn intersect(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "intersection of sets of different dimension");
        let mut clauses = Vec::new();
        for a in &self.clauses {
            for b in &other.clauses {
                let mut cs = a.constraints.clone();
                cs.extend(b.constraints.iter().cloned());
                clauses.push(Clause { constraints: cs });
            }
        }
        ConstraintSet { dim: self.dim, clauses }
    }

    /// Points where at least one constraint of a satisfied clause is active.
    pub fn on_boundary(&self, z: &[T], tol: T) -> bool {
        self.clauses.iter().any(|c| {
            c.contains(z, tol) && c.constraints.iter().any(|h| h.value(z).abs() <= h.tol(tol))
        })
    }

    /// Boundary of the set as seen by the constraint description: member points with
    /// an active constraint and no satisfied clause that is inactive (interior).
    pub fn on_topological_boundary(&self, z: &[T], tol: T) -> bool {
        let sat = self.satisfied_clauses(z, tol);
        !sat.is_empty()
            && sat.iter().all(|&i| {
                self.clauses[i]
                    .constraints
                    .iter()
                    .any(|h| h.value(z).abs() <= h.tol(tol))
            })
    }
}

/// `{x : V(x) <= r}`.
#[derive(Clone)]
pub struct SublevelSet<T> {
    pub v: Field<T>,
    pub r: T,
}

impl<T: Real> SublevelSet<T> {
    pub fn new(v: Field<T>, r: T) -> Self {
        SublevelSet { v, r }
    }

    pub fn contains(&self, x: &[T], tol: T) -> bool {
        self.v.value(x) <= self.r + tol
    }

    pub fn on_boundary(&self, x: &[T], tol: T) -> bool {
        (self.v.value(x) - self.r).abs() <= tol
    }

    pub fn constraint(&self, name: &str) -> ScalarConstraint<T> {
        let v = self.v.clone();
        let g = self.v.clone();
        let r = self.r;
        ScalarConstraint::new(name, field(move |z| v.value(z) - r, move |z| g.gradient(z)))
            .with_scale(r.abs())
    }

    pub fn to_set(&self, dim: usize) -> ConstraintSet<T> {
        ConstraintSet::single(dim, vec![self.constraint("V - r")])
    }
}

/// Halfspace residual `min over satisfied clauses of max over active <grad h, v>`.
/// A constraint is active when `|h| <= tol (1 + scale)` and its first-order distance
/// `|h| / |grad h|` is within the same bound.
///
/// `-inf` when some satisfied clause has no active constraint (interior point).
/// Clauses with an active constraint of vanishing gradient cannot be handled; they
/// produce an error unless another clause already passes.
pub fn tangent_residual<T: Real>(set: &ConstraintSet<T>, x: &[T], v: &[T], tol: T) -> Result<T> {
    let sat = set.satisfied_clauses(x, tol);
    if sat.is_empty() {
        return Err(Error::NotInSet(vec::to_f64(x)));
    }
    let mut best: Option<T> = None;
    let mut corner: Option<Error> = None;
    for i in sat {
        let mut worst = T::neg_infinity();
        let mut ok = true;
        for h in &set.clauses[i].constraints {
            let hv = h.value(x).abs();
            if hv > h.tol(tol) {
                continue;
            }
            let g = h.field.gradient(x);
            let gn = vec::norm(&g);
            if gn <= tol {
                corner = Some(Error::NonsmoothCorner { x: vec::to_f64(x), constraint: h.name.clone() });
                ok = false;
                break;
            }
            // farther than tol from the surface {h = 0}: not active
            if hv > h.tol(tol) * gn {
                continue;
            }
            worst = worst.max(vec::dot(&g, v));
        }
        if ok {
            best = Some(best.map_or(worst, |b| b.min(worst)));
        }
    }
    match (best, corner) {
        (Some(b), None) => Ok(b),
        (Some(b), Some(_)) if b <= tol => Ok(b),
        (_, Some(e)) => Err(e),
        (None, None) => unreachable!("at least one satisfied clause"),
    }
}

/// Tangent cone test through active-constraint halfspaces: `v` passes when
/// `<grad h_i(x), v> <= tol` for every active `h_i` of some satisfied clause.
pub fn tangent_halfspace_test<T: Real>(set: &ConstraintSet<T>, x: &[T], v: &[T], tol: T) -> Result<bool> {
    Ok(tangent_residual(set, x, v, tol)? <= tol)
}

/// Handy constraint constructors for sets over a concatenated vector.
pub mod c {
    use super::*;

    /// `sign * z[i] - bound <= 0`, i.e. `z[i] <= bound` (sign = 1) or `z[i] >= -bound` (sign = -1).
    pub fn coord<T: Real>(name: &str, dim: usize, i: usize, sign: T, bound: T) -> ScalarConstraint<T> {
        ScalarConstraint::new(
            name,
            field(
                move |z| sign * z[i] - bound,
                move |_| {
                    let mut g = vec![T::zero(); dim];
                    g[i] = sign;
                    g
                },
            ),
        )
        .with_scale(bound.abs())
    }

    /// `z[i] <= b`.
    pub fn le<T: Real>(name: &str, dim: usize, i: usize, b: T) -> ScalarConstraint<T> {
        coord(name, dim, i, T::one(), b)
    }

    /// `z[i] >= b`.
    pub fn ge<T: Real>(name: &str, dim: usize, i: usize, b: T) -> ScalarConstraint<T> {
        coord(name, dim, i, -T::one(), -b)
    }

    /// `z[i] == b` as two inequalities.
    pub fn eq<T: Real>(name: &str, dim: usize, i: usize, b: T) -> [ScalarConstraint<T>; 2] {
        [le(&format!("{name} (upper)"), dim, i, b), ge(&format!("{name} (lower)"), dim, i, b)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halfplane() -> ConstraintSet<f64> {
        ConstraintSet::single(2, vec![c::le("x1 <= 0", 2, 0, 0.0)])
    }

    fn norm_sq() -> Field<f64> {
        field(|x| x[0] * x[0] + x[1] * x[1], |x| vec![2.0 * x[0], 2.0 * x[1]])
    }

    fn annulus() -> ConstraintSet<f64> {
        let n1 = norm_sq();
        let n2 = norm_sq();
        ConstraintSet::single(
            2,
            vec![
                ScalarConstraint::new("1 - |x|^2", field(move |x| 1.0 - n1.value(x), |x| vec![-2.0 * x[0], -2.0 * x[1]])),
                ScalarConstraint::new("|x|^2 - 2", field(move |x| n2.value(x) - 2.0, |x| vec![2.0 * x[0], 2.0 * x[1]])),
            ],
        )
    }

    #[test]
    fn halfplane_inward_direction_is_tangent() {
        assert!(tangent_halfspace_test(&halfplane(), &[0.0, 1.0], &[-1.0, 0.0], 1e-9).unwrap());
        assert!(!tangent_halfspace_test(&halfplane(), &[0.0, 1.0], &[1.0, 0.0], 1e-9).unwrap());
    }

    #[test]
    fn annulus_tangential_direction() {
        assert!(tangent_halfspace_test(&annulus(), &[1.0, 0.0], &[0.0, 1.0], 1e-9).unwrap());
        assert!(!tangent_halfspace_test(&annulus(), &[1.0, 0.0], &[-1.0, 0.0], 1e-9).unwrap());
    }

    #[test]
    fn interior_point_accepts_everything() {
        let r = tangent_residual(&annulus(), &[1.2, 0.0], &[100.0, -3.0], 1e-9).unwrap();
        assert_eq!(r, f64::NEG_INFINITY);
    }

    #[test]
    fn vanishing_gradient_is_an_error() {
        let s = ConstraintSet::single(1, vec![ScalarConstraint::new("x^2", field(|x: &[f64]| x[0] * x[0], |x| vec![2.0 * x[0]]))]);
        let e = tangent_halfspace_test(&s, &[0.0], &[1.0], 1e-9).unwrap_err();
        assert!(e.to_string().contains("nonsmooth corner unsupported"));
    }

    #[test]
    fn outside_point_is_rejected() {
        assert!(matches!(tangent_residual(&halfplane(), &[1.0, 0.0], &[0.0, 0.0], 1e-9), Err(Error::NotInSet(_))));
    }

    #[test]
    fn union_intersection_and_violation() {
        let a = halfplane();
        let b = ConstraintSet::single(2, vec![c::ge("x1 >= 1", 2, 0, 1.0)]);
        let u = a.union(&b);
        assert!(u.contains(&[-1.0, 0.0], 1e-9) && u.contains(&[2.0, 0.0], 1e-9));
        assert!(!u.contains(&[0.5, 0.0], 1e-9));
        assert!((u.violation(&[0.5, 0.0]) - 0.5).abs() < 1e-15);
        let i = a.intersect(&b);
        assert!(!i.contains(&[0.0, 0.0], 1e-9) && !i.contains(&[1.0, 0.0], 1e-9));
        assert_eq!(ConstraintSet::<f64>::empty(2).violation(&[0.0, 0.0]), f64::INFINITY);
        assert_eq!(ConstraintSet::<f64>::universe(2).violation(&[0.0, 0.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn sublevel_membership_and_boundary() {
        let s = SublevelSet::new(norm_sq(), 1.0);
        assert!(s.contains(&[1.0, 0.0], 1e-9));
        assert!(s.on_boundary(&[0.0, 1.0], 1e-9));
        assert!(!s.contains(&[1.0, 0.1], 1e-9));
        assert!(s.to_set(2).contains(&[0.6, 0.8], 1e-9));
    }

    #[test]
    fn fd_gradient_matches_analytic() {
        let f = numeric_field(|x: &[f64]| x[0].sin() * x[1] + x[1].powi(3));
        let g = f.gradient(&[0.3, -1.2]);
        assert!((g[0] - 0.3f64.cos() * -1.2).abs() < 1e-8);
        assert!((g[1] - (0.3f64.sin() + 3.0 * 1.44)).abs() < 1e-8);
    }
}
