//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the core is generic over (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only for values the type cannot hold.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Small vector helpers over slices. States, inputs and disturbances are plain `Vec<T>`.
pub mod vec {
    use super::Real;

    pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
        a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
    }

    pub fn norm<T: Real>(a: &[T]) -> T {
        dot(a, a).sqrt()
    }

    pub fn norm_inf<T: Real>(a: &[T]) -> T {
        a.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
        a.iter().zip(b).map(|(x, y)| *x - *y).collect()
    }

    pub fn axpy<T: Real>(a: &[T], s: T, b: &[T]) -> Vec<T> {
        a.iter().zip(b).map(|(x, y)| *x + s * *y).collect()
    }

    pub fn concat<T: Real>(parts: &[&[T]]) -> Vec<T> {
        let mut out = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
        for p in parts {
            out.extend_from_slice(p);
        }
        out
    }

    pub fn all_finite<T: Real>(a: &[T]) -> bool {
        a.iter().all(|x| x.is_finite())
    }

    pub fn to_f64<T: Real>(a: &[T]) -> Vec<f64> {
        a.iter().map(|x| x.as_f64()).collect()
    }

    pub fn from_f64<T: Real>(a: &[f64]) -> Vec<T> {
        a.iter().map(|x| T::lit(*x)).collect()
    }
}
