use std::sync::Arc;

use crate::error::Result;
use crate::scalar::{vec, Real};

use super::system::HybridSystemUW;
use super::time::Phase;

/// State feedback `x -> u`. Evaluation may fail (an empty regulation map, say).
pub trait FeedbackLaw<T: Real>: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[T]) -> Result<Vec<T>>;
    fn name(&self) -> String;
}

pub struct ClosedFormLaw<T> {
    pub name: String,
    pub dim: usize,
    f: Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>,
}

impl<T: Real> ClosedFormLaw<T> {
    pub fn new(name: impl Into<String>, dim: usize, f: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        ClosedFormLaw { name: name.into(), dim, f: Arc::new(f) }
    }
}

impl<T: Real> FeedbackLaw<T> for ClosedFormLaw<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[T]) -> Result<Vec<T>> {
        Ok((self.f)(x))
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

/// Constant zero input of the given dimension (also the "no input" law for `m = 0`).
pub struct ZeroLaw(pub usize);

impl<T: Real> FeedbackLaw<T> for ZeroLaw {
    fn dim(&self) -> usize {
        self.0
    }

    fn eval(&self, _: &[T]) -> Result<Vec<T>> {
        Ok(vec![T::zero(); self.0])
    }

    fn name(&self) -> String {
        "zero".into()
    }
}

#[derive(Clone)]
pub struct FeedbackPair<T> {
    pub name: String,
    pub kappa_c: Arc<dyn FeedbackLaw<T>>,
    pub kappa_d: Arc<dyn FeedbackLaw<T>>,
}

impl<T: Real> FeedbackPair<T> {
    pub fn new(name: impl Into<String>, kappa_c: Arc<dyn FeedbackLaw<T>>, kappa_d: Arc<dyn FeedbackLaw<T>>) -> Self {
        FeedbackPair { name: name.into(), kappa_c, kappa_d }
    }

    pub fn zero(m_c: usize, m_d: usize) -> Self {
        FeedbackPair::new("zero", Arc::new(ZeroLaw(m_c)), Arc::new(ZeroLaw(m_d)))
    }

    pub fn law(&self, p: Phase) -> &Arc<dyn FeedbackLaw<T>> {
        match p {
            Phase::Flow => &self.kappa_c,
            Phase::Jump => &self.kappa_d,
        }
    }
}

/// Points of `Pi(set)` among `xs` where `kappa(x)` is not in `Psi^u(x)`.
pub fn admissibility_violations<T: Real>(
    sys: &HybridSystemUW<T>,
    fb: &FeedbackPair<T>,
    p: Phase,
    xs: &[Vec<T>],
    tol: T,
) -> Result<Vec<Vec<f64>>> {
    let pi = sys.project_states(p)?;
    let mut bad = Vec::new();
    for x in xs {
        if !pi.contains(x, tol) {
            continue;
        }
        let u = fb.law(p).eval(x)?;
        if !sys.psi_u(p, x, tol)?.contains(&u, tol) {
            bad.push(vec::to_f64(x));
        }
    }
    Ok(bad)
}
