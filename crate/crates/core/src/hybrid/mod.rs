//! Hybrid systems with inputs and disturbances, time domains and solution pairs.

mod closed_loop;
mod feedback;
mod maps;
mod system;
mod time;

pub use closed_loop::{close_loop, HybridSystemW};
pub use feedback::{admissibility_violations, ClosedFormLaw, FeedbackLaw, FeedbackPair, ZeroLaw};
pub use maps::{Guard, JumpSelector, MapFn, Selection, Selector, SetValuedMap};
pub use system::{Dims, ExplicitProjection, HybridSystemUW, PhaseData, ThetaRule};
pub use time::{
    DisturbanceSignal, FlowInterval, HybridArc, HybridTime, HybridTimeDomain, Phase, SolutionPair, TerminationReason,
};
