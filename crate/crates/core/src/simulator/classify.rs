use crate::hybrid::{Phase, TerminationReason};

/// What the solver knows about the state where it stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopState {
    pub budget_exhausted: bool,
    pub finite: bool,
    /// In `Pi_c(C_w)` at the membership tolerance.
    pub in_flow_set: bool,
    /// In the closure of `Pi_c(C_w)` (a looser tolerance).
    pub in_flow_closure: bool,
    pub in_jump_set: bool,
    /// Phase of the last motion: `Jump` right after a jump.
    pub last_phase: Phase,
}

/// Maps a stop to the case of the basic existence result. The `(T, J)` budget
/// stands in for completeness.
pub fn classify_termination(s: &StopState) -> TerminationReason {
    if s.budget_exhausted {
        return TerminationReason::HorizonReached;
    }
    if !s.finite {
        return TerminationReason::EndedFlowFiniteEscape;
    }
    match s.last_phase {
        Phase::Jump if !s.in_flow_closure && !s.in_jump_set => TerminationReason::EndedJumpOutside,
        Phase::Jump => TerminationReason::EndedJumpNoContinuation,
        Phase::Flow if s.in_jump_set => TerminationReason::EndedJumpNoContinuation,
        Phase::Flow if s.in_flow_closure && !s.in_flow_set => TerminationReason::EndedFlowBoundary,
        Phase::Flow => TerminationReason::EndedFlowNoContinuation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stop(last_phase: Phase) -> StopState {
        StopState {
            budget_exhausted: false,
            finite: true,
            in_flow_set: true,
            in_flow_closure: true,
            in_jump_set: false,
            last_phase,
        }
    }

    #[test]
    fn cases() {
        assert_eq!(
            classify_termination(&StopState { budget_exhausted: true, ..stop(Phase::Jump) }),
            TerminationReason::HorizonReached
        );
        let outside = StopState { in_flow_set: false, in_flow_closure: false, ..stop(Phase::Jump) };
        assert_eq!(classify_termination(&outside), TerminationReason::EndedJumpOutside);
        assert_eq!(classify_termination(&stop(Phase::Flow)), TerminationReason::EndedFlowNoContinuation);
        let bd = StopState { in_flow_set: false, ..stop(Phase::Flow) };
        assert_eq!(classify_termination(&bd), TerminationReason::EndedFlowBoundary);
        let esc = StopState { finite: false, ..stop(Phase::Flow) };
        assert_eq!(classify_termination(&esc), TerminationReason::EndedFlowFiniteEscape);
    }
}
