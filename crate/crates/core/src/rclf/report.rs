use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{vec, Real};

/// Outcome of one condition over a sampled grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub condition: String,
    pub grid_size: usize,
    /// `null` in JSON when infinite (an empty input set, for instance).
    pub worst_residual: f64,
    pub worst_point: Vec<f64>,
    pub pass: bool,
    pub required: bool,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn with_required(mut self, required: bool) -> Self {
        self.required = required;
        self
    }

    pub fn note(mut self, s: impl Into<String>) -> Self {
        self.notes.push(s.into());
        self
    }

    /// Attestation-only report (checked by the user, not by sampling).
    pub fn attested(condition: &str, holds: bool, note: &str) -> Self {
        VerificationReport {
            condition: condition.into(),
            grid_size: 0,
            worst_residual: if holds { 0.0 } else { 1.0 },
            worst_point: Vec::new(),
            pass: holds,
            required: true,
            notes: vec![note.into()],
        }
    }
}

/// Per-point result of a residual evaluation.
#[derive(Debug, Clone)]
pub enum Residual<T> {
    Value(T),
    /// Nothing is quantified at this point (it lies outside the relevant region).
    Vacuous,
    /// The point cannot be checked (a nonsmooth corner, say).
    Skip(String),
}

/// How the worst residual is compared with the tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    /// `worst <= tol`.
    NonStrict,
    /// `worst < -tol`.
    Strict,
}

/// Evaluates `f` on every point in parallel and reduces deterministically: the
/// worst residual is the maximum, ties going to the earliest point.
pub fn reduce<T: Real>(
    condition: &str,
    points: &[Vec<T>],
    strict: Strictness,
    tol: T,
    f: impl Fn(&[T]) -> Result<Residual<T>> + Sync + Send,
) -> VerificationReport {
    let results: Vec<Result<Residual<T>>> = points.par_iter().map(|p| f(p)).collect();
    let mut worst: Option<(T, usize)> = None;
    let (mut count, mut vacuous) = (0usize, 0usize);
    let mut skipped: Vec<String> = Vec::new();
    let mut errors: Vec<String> = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        let v = match r {
            Ok(Residual::Value(v)) => {
                if v.is_nan() {
                    T::infinity()
                } else {
                    v
                }
            }
            Ok(Residual::Vacuous) => {
                vacuous += 1;
                continue;
            }
            Ok(Residual::Skip(why)) => {
                skipped.push(why);
                continue;
            }
            Err(e @ Error::NonsmoothCorner { .. }) => {
                skipped.push(e.to_string());
                continue;
            }
            Err(e) => {
                errors.push(format!("{} at {:?}", e, vec::to_f64(&points[i])));
                T::infinity()
            }
        };
        count += 1;
        if worst.is_none_or(|(w, _)| v > w) {
            worst = Some((v, i));
        }
    }
    let mut notes = Vec::new();
    if !skipped.is_empty() {
        notes.push(format!("skipped {} point(s): {}", skipped.len(), skipped[0]));
    }
    if vacuous > 0 {
        notes.push(format!("{} point(s) outside the quantified region", vacuous));
    }
    for e in errors.iter().take(3) {
        notes.push(e.clone());
    }
    let (worst_residual, worst_point, pass) = match worst {
        Some((w, i)) => {
            let pass = match strict {
                Strictness::NonStrict => w <= tol,
                Strictness::Strict => w < -tol,
            };
            (w.as_f64(), vec::to_f64(&points[i]), pass)
        }
        None if vacuous > 0 && skipped.is_empty() => {
            notes.push("vacuously true".into());
            (0.0, Vec::new(), true)
        }
        None => {
            notes.push("inconclusive: empty grid".into());
            (f64::NAN, Vec::new(), false)
        }
    };
    VerificationReport {
        condition: condition.into(),
        grid_size: count,
        worst_residual,
        worst_point,
        pass,
        required: true,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worst_is_max_with_first_tie() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let r = reduce("t", &pts, Strictness::NonStrict, 1e-9, |x| {
            Ok(Residual::Value(if x[0] == 3.0 || x[0] == 7.0 { 1.0 } else { 0.0 }))
        });
        assert_eq!(r.worst_residual, 1.0);
        assert_eq!(r.worst_point, vec![3.0]);
        assert!(!r.pass);
        assert_eq!(r.grid_size, 10);
    }

    #[test]
    fn strict_needs_negative_margin() {
        let pts = vec![vec![0.0]];
        assert!(!reduce("t", &pts, Strictness::Strict, 1e-9, |_| Ok(Residual::Value(0.0))).pass);
        assert!(reduce("t", &pts, Strictness::Strict, 1e-9, |_| Ok(Residual::Value(-1.0))).pass);
    }

    #[test]
    fn empty_grid_is_inconclusive() {
        let r = reduce::<f64>("t", &[], Strictness::NonStrict, 1e-9, |_| Ok(Residual::Value(0.0)));
        assert!(!r.pass);
        assert!(r.notes[0].contains("inconclusive"));
    }

    #[test]
    fn corners_are_skipped_and_noted() {
        let pts = vec![vec![0.0], vec![1.0]];
        let r = reduce("t", &pts, Strictness::NonStrict, 1e-9, |x| {
            if x[0] == 0.0 {
                Err(Error::NonsmoothCorner { x: vec![0.0], constraint: "h".into() })
            } else {
                Ok(Residual::Value(-1.0))
            }
        });
        assert!(r.pass);
        assert_eq!(r.grid_size, 1);
        assert!(r.notes[0].contains("nonsmooth corner unsupported"));
    }
}
