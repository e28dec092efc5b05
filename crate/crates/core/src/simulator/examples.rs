//! Three one-dimensional systems whose maximal solutions end in known ways.

use std::sync::Arc;

use crate::hybrid::{close_loop, FeedbackPair, HybridSystemUW, HybridSystemW, PhaseData, Selection, SetValuedMap, TerminationReason};
use crate::sets::{c, BoxSet, ConstraintSet};

use super::config::SimConfig;

pub struct MicroExample {
    pub name: &'static str,
    pub system: HybridSystemW<f64>,
    pub x0: Vec<f64>,
    pub config: SimConfig,
    pub expected: TerminationReason,
}

fn build(name: &str, flow_set: ConstraintSet<f64>, f: f64, jump_set: ConstraintSet<f64>, g: f64) -> HybridSystemW<f64> {
    let flow = PhaseData::new(
        flow_set,
        SetValuedMap::single(Selection::new("f", move |_: &[f64]| vec![f])),
        BoxSet::zero_dim(),
        BoxSet::zero_dim(),
    );
    let jump = PhaseData::new(
        jump_set,
        SetValuedMap::single(Selection::new("g", move |_: &[f64]| vec![g])),
        BoxSet::zero_dim(),
        BoxSet::zero_dim(),
    );
    let sys = HybridSystemUW::new(name, 1, flow, jump).expect("micro system");
    close_loop(Arc::new(sys), FeedbackPair::zero(0, 0)).expect("micro closed loop")
}

fn wall() -> HybridSystemW<f64> {
    build("wall", ConstraintSet::single(1, vec![c::le("x <= 0", 1, 0, 0.0)]), 1.0, ConstraintSet::empty(1), 0.0)
}

pub fn micro_examples() -> Vec<MicroExample> {
    let short = SimConfig { horizon_t: 1.0, ..Default::default() };
    vec![
        // x' = 1 on the whole line, nothing to jump from
        MicroExample {
            name: "drift",
            system: build("drift", ConstraintSet::universe(1), 1.0, ConstraintSet::empty(1), 0.0),
            x0: vec![0.0],
            config: short.clone(),
            expected: TerminationReason::HorizonReached,
        },
        // C = (-inf, 1], D = {0}, G = 5
        MicroExample {
            name: "overshoot",
            system: build(
                "overshoot",
                ConstraintSet::single(1, vec![c::le("x <= 1", 1, 0, 1.0)]),
                0.0,
                ConstraintSet::single(1, c::eq("x = 0", 1, 0, 0.0).to_vec()),
                5.0,
            ),
            x0: vec![0.0],
            config: short.clone(),
            expected: TerminationReason::EndedJumpOutside,
        },
        // x' = 1 points out of C = (-inf, 0] at x = 0, D empty
        MicroExample {
            name: "wall",
            system: wall(),
            x0: vec![0.0],
            config: short,
            expected: TerminationReason::EndedFlowNoContinuation,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::simulate;

    #[test]
    fn micro_systems_end_as_expected() {
        let got: Vec<_> = micro_examples()
            .iter()
            .map(|m| (m.name, simulate(&m.system, &m.x0, &m.config).unwrap().termination))
            .collect();
        let want: Vec<_> = micro_examples().iter().map(|m| (m.name, m.expected)).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn wall_ends_immediately() {
        let m = &micro_examples()[2];
        let sol = simulate(&m.system, &m.x0, &m.config).unwrap();
        assert_eq!(sol.arc.samples, vec![vec![(0.0, vec![0.0])]]);
    }

    #[test]
    fn flow_stops_at_the_wall() {
        let sol = simulate(&wall(), &[-0.5], &SimConfig::default()).unwrap();
        assert_eq!(sol.termination, TerminationReason::EndedFlowNoContinuation);
        assert!(sol.arc.last_state()[0].abs() < 1e-8, "{:?}", sol.arc.last_state());
        assert!((sol.flow_time() - 0.5).abs() < 1e-8);
    }
}
