//! Set-valued maps given as finite families of parameterised selections.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::scalar::Real;
use crate::sets::BoxSet;

/// `(z, p) -> R^n` where `z = (x, u, w)` and `p` lies in the selection's parameter box.
pub type MapFn<T> = Arc<dyn Fn(&[T], &[T]) -> Vec<T> + Send + Sync>;
/// Whether a selection applies at `z`, given the membership tolerance.
pub type Guard<T> = Arc<dyn Fn(&[T], T) -> bool + Send + Sync>;

#[derive(Clone)]
pub struct Selection<T> {
    pub name: String,
    pub guard: Option<Guard<T>>,
    pub params: BoxSet<T>,
    pub map: MapFn<T>,
}

impl<T: Real> Selection<T> {
    pub fn new(name: impl Into<String>, f: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        Selection {
            name: name.into(),
            guard: None,
            params: BoxSet::zero_dim(),
            map: Arc::new(move |z, _| f(z)),
        }
    }

    /// Selection family affine in a parameter ranging over `params`.
    pub fn with_params(
        name: impl Into<String>,
        params: BoxSet<T>,
        f: impl Fn(&[T], &[T]) -> Vec<T> + Send + Sync + 'static,
    ) -> Self {
        Selection { name: name.into(), guard: None, params, map: Arc::new(f) }
    }

    pub fn guarded(mut self, g: impl Fn(&[T], T) -> bool + Send + Sync + 'static) -> Self {
        self.guard = Some(Arc::new(g));
        self
    }

    pub fn applies(&self, z: &[T], tol: T) -> bool {
        self.guard.as_ref().is_none_or(|g| g(z, tol))
    }

    pub fn eval(&self, z: &[T], p: &[T]) -> Vec<T> {
        (self.map)(z, p)
    }
}

impl<T> fmt::Debug for Selection<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Selection({})", self.name)
    }
}

/// Rule for integrating a set-valued flow map along one element.
#[derive(Debug, Clone, PartialEq)]
pub enum Selector<T> {
    /// The i-th applicable selection (clamped), parameter at the box centre.
    Index(usize),
    /// First applicable selection at the given parameter (clamped into its box).
    Param(Vec<T>),
}

impl<T> Default for Selector<T> {
    fn default() -> Self {
        Selector::Index(0)
    }
}

/// Rule for choosing a jump-map element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JumpSelector {
    #[default]
    First,
    /// Uniformly random applicable selection, parameter uniform in its box.
    Uniform,
}

/// Union (or convex hull, when `convex`) of the applicable selections' images.
#[derive(Clone, Debug)]
pub struct SetValuedMap<T> {
    pub selections: Vec<Selection<T>>,
    pub convex: bool,
}

impl<T: Real> SetValuedMap<T> {
    pub fn single(s: Selection<T>) -> Self {
        SetValuedMap { selections: vec![s], convex: true }
    }

    pub fn new(selections: Vec<Selection<T>>, convex: bool) -> Self {
        SetValuedMap { selections, convex }
    }

    /// Selections whose guard holds at `z`.
    pub fn active(&self, z: &[T], tol: T) -> Vec<&Selection<T>> {
        self.selections.iter().filter(|s| s.applies(z, tol)).collect()
    }

    fn active_or_all(&self, z: &[T], tol: T) -> Vec<&Selection<T>> {
        let a = self.active(z, tol);
        if a.is_empty() {
            self.selections.iter().collect()
        } else {
            a
        }
    }

    /// Values at every parameter-box vertex of every applicable selection. For maps
    /// affine in the parameter this is a superset of the extreme points of the hull.
    pub fn extreme_points(&self, z: &[T], tol: T) -> Vec<Vec<T>> {
        self.active(z, tol)
            .into_iter()
            .flat_map(|s| s.params.vertices().into_iter().map(move |p| s.eval(z, &p)))
            .collect()
    }

    /// Element chosen by `sel`. Falls back to the full family where no guard holds,
    /// so integrators can evaluate slightly outside the set.
    pub fn select(&self, z: &[T], tol: T, sel: &Selector<T>) -> Option<Vec<T>> {
        let act = self.active_or_all(z, tol);
        match sel {
            Selector::Index(i) => {
                let s = act.get((*i).min(act.len().checked_sub(1)?))?;
                Some(s.eval(z, &s.params.center()))
            }
            Selector::Param(p) => {
                let s = act.iter().find(|s| s.params.dim() == p.len()).or(act.first())?;
                let q = if s.params.dim() == p.len() { s.params.clamp(p) } else { s.params.center() };
                Some(s.eval(z, &q))
            }
        }
    }

    pub fn select_jump<R: Rng + ?Sized>(&self, z: &[T], tol: T, sel: JumpSelector, rng: &mut R) -> Option<Vec<T>> {
        let act = self.active(z, tol);
        match sel {
            JumpSelector::First => {
                let s = act.first()?;
                Some(s.eval(z, &s.params.center()))
            }
            JumpSelector::Uniform => {
                if act.is_empty() {
                    return None;
                }
                let s = act[rng.gen_range(0..act.len())];
                let p = s.params.sample(rng);
                Some(s.eval(z, &p))
            }
        }
    }

    /// Sampled elements of the image: every applicable selection at a parameter
    /// lattice with `per_dim` points per direction.
    pub fn sampled_values(&self, z: &[T], tol: T, per_dim: usize) -> Vec<Vec<T>> {
        self.active(z, tol)
            .into_iter()
            .flat_map(|s| s.params.lattice(per_dim).into_iter().map(move |p| s.eval(z, &p)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filippov() -> SetValuedMap<f64> {
        SetValuedMap::new(
            vec![
                Selection::new("neg", |z: &[f64]| vec![0.0 * z[0]]).guarded(|z, _| z[0] < 0.0),
                Selection::with_params("hull", BoxSet::interval(0.0, 1.0), |z: &[f64], p: &[f64]| vec![p[0] * z[1]])
                    .guarded(|z, _| z[0] == 0.0),
                Selection::new("pos", |z: &[f64]| vec![z[0] + z[1]]).guarded(|z, _| z[0] > 0.0),
            ],
            true,
        )
    }

    #[test]
    fn guards_pick_branches() {
        let m = filippov();
        assert_eq!(m.extreme_points(&[1.0, 2.0], 0.0), vec![vec![3.0]]);
        assert_eq!(m.extreme_points(&[0.0, 2.0], 0.0), vec![vec![0.0], vec![2.0]]);
        assert_eq!(m.select(&[0.0, 2.0], 0.0, &Selector::Index(0)), Some(vec![1.0]));
        assert_eq!(m.select(&[0.0, 2.0], 0.0, &Selector::Param(vec![0.25])), Some(vec![0.5]));
        assert_eq!(m.select(&[-1.0, 2.0], 0.0, &Selector::Index(5)), Some(vec![0.0]));
    }
}
