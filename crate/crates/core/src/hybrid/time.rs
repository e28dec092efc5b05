//! Hybrid time domains, arcs and solution pairs.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Flow or jump; also used to pick the flow-side or jump-side data of a system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Flow,
    Jump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HybridTime<T> {
    pub t: T,
    pub j: usize,
}

impl<T: Real> HybridTime<T> {
    pub fn new(t: T, j: usize) -> Self {
        HybridTime { t, j }
    }
}

impl<T: Real> PartialOrd for HybridTime<T> {
    /// Ordered by `t + j`, then by `j`.
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        let a = self.t + T::lit(self.j as f64);
        let b = other.t + T::lit(other.j as f64);
        match a.partial_cmp(&b)? {
            Ordering::Equal => Some(self.j.cmp(&other.j)),
            o => Some(o),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowInterval<T> {
    pub j: usize,
    pub t_start: T,
    pub t_end: T,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HybridTimeDomain<T> {
    pub intervals: Vec<FlowInterval<T>>,
}

impl<T: Real> HybridTimeDomain<T> {
    pub fn validate(&self) -> Result<(), String> {
        let first = self.intervals.first().ok_or("empty domain")?;
        if first.j != 0 || first.t_start != T::zero() {
            return Err("domain must start at (0, 0)".into());
        }
        for (k, iv) in self.intervals.iter().enumerate() {
            if !(iv.t_start <= iv.t_end) {
                return Err(format!("interval {} has t_start > t_end", k));
            }
            if k > 0 {
                let prev = &self.intervals[k - 1];
                if iv.j != prev.j + 1 {
                    return Err(format!("interval {} does not increment j", k));
                }
                if iv.t_start != prev.t_end {
                    return Err(format!("interval {} does not start where {} ends", k, k - 1));
                }
            }
        }
        Ok(())
    }

    pub fn jumps(&self) -> usize {
        self.intervals.len().saturating_sub(1)
    }

    pub fn end(&self) -> HybridTime<T> {
        let last = self.intervals.last().expect("nonempty domain");
        HybridTime::new(last.t_end, last.j)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HybridArc<T> {
    pub domain: HybridTimeDomain<T>,
    /// `samples[j]` lists `(t, x)` on interval `j`, endpoints included.
    pub samples: Vec<Vec<(T, Vec<T>)>>,
}

impl<T: Real> HybridArc<T> {
    pub fn state_dim(&self) -> usize {
        self.samples.first().and_then(|s| s.first()).map_or(0, |(_, x)| x.len())
    }

    pub fn validate(&self) -> Result<(), String> {
        self.domain.validate()?;
        if self.samples.len() != self.domain.intervals.len() {
            return Err("one sample list per interval required".into());
        }
        let n = self.state_dim();
        for (iv, s) in self.domain.intervals.iter().zip(&self.samples) {
            let (first, last) = match (s.first(), s.last()) {
                (Some(f), Some(l)) => (f, l),
                _ => return Err(format!("interval {} has no samples", iv.j)),
            };
            if first.0 != iv.t_start || last.0 != iv.t_end {
                return Err(format!("interval {} samples miss an endpoint", iv.j));
            }
            for w in s.windows(2) {
                if !(w[0].0 <= w[1].0) {
                    return Err(format!("interval {} samples out of order", iv.j));
                }
            }
            if s.iter().any(|(_, x)| x.len() != n) {
                return Err("state dimension changes along the arc".into());
            }
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (HybridTime<T>, &Vec<T>)> + '_ {
        self.samples
            .iter()
            .enumerate()
            .flat_map(|(j, s)| s.iter().map(move |(t, x)| (HybridTime::new(*t, j), x)))
    }

    pub fn last_state(&self) -> &Vec<T> {
        &self.samples.last().and_then(|s| s.last()).expect("nonempty arc").1
    }

    /// Pre- and post-jump states for jump `k` (from interval `k` to `k+1`).
    pub fn jump_pair(&self, k: usize) -> (&Vec<T>, &Vec<T>) {
        (&self.samples[k].last().unwrap().1, &self.samples[k + 1].first().unwrap().1)
    }
}

/// Disturbance on the arc's domain: one `w_c` per flow interval, one `w_d` per jump.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DisturbanceSignal<T> {
    pub w_c: Vec<Vec<T>>,
    pub w_d: Vec<Vec<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TerminationReason {
    Complete,
    EndedFlowBoundary,
    EndedFlowNoContinuation,
    EndedFlowFiniteEscape,
    EndedJumpOutside,
    EndedJumpNoContinuation,
    HorizonReached,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPair<T> {
    pub arc: HybridArc<T>,
    pub disturbance: DisturbanceSignal<T>,
    pub termination: TerminationReason,
    /// Index of the jump-set clause containing the pre-jump state, per jump.
    pub jump_components: Vec<usize>,
    pub diagnostic: Option<String>,
}

impl<T: Real> SolutionPair<T> {
    pub fn jumps(&self) -> usize {
        self.arc.domain.jumps()
    }

    pub fn flow_time(&self) -> T {
        self.arc.domain.end().t
    }

    /// Jump counts per jump-set clause, `components` entries long.
    pub fn jumps_per_component(&self, components: usize) -> Vec<usize> {
        let mut out = vec![0; components];
        for &c in &self.jump_components {
            if c < components {
                out[c] += 1;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn domain(iv: &[(usize, f64, f64)]) -> HybridTimeDomain<f64> {
        HybridTimeDomain {
            intervals: iv.iter().map(|&(j, a, b)| FlowInterval { j, t_start: a, t_end: b }).collect(),
        }
    }

    #[test]
    fn hybrid_time_order() {
        let a = HybridTime::new(1.0, 1);
        let b = HybridTime::new(1.0, 2);
        let c = HybridTime::new(2.5, 0);
        assert!(a < b);
        assert!(c > a);
        assert!(HybridTime::new(2.0, 1) > HybridTime::new(3.0, 0));
    }

    #[test]
    fn domain_validation() {
        assert!(domain(&[(0, 0.0, 1.0), (1, 1.0, 1.0), (2, 1.0, 3.0)]).validate().is_ok());
        assert!(domain(&[(0, 0.5, 1.0)]).validate().is_err());
        assert!(domain(&[(0, 0.0, 1.0), (2, 1.0, 2.0)]).validate().is_err());
        assert!(domain(&[(0, 0.0, 1.0), (1, 1.5, 2.0)]).validate().is_err());
        assert!(domain(&[(0, 0.0, 1.0), (1, 1.0, 0.5)]).validate().is_err());
    }

    #[test]
    fn arc_requires_endpoints() {
        let arc = HybridArc {
            domain: domain(&[(0, 0.0, 1.0)]),
            samples: vec![vec![(0.0, vec![1.0]), (0.5, vec![2.0])]],
        };
        assert!(arc.validate().is_err());
    }
}
