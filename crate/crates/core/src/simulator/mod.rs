//! Event-located simulation of closed-loop hybrid systems.

mod classify;
mod config;
mod engine;
mod examples;
mod invariance;
mod io;

pub use classify::{classify_termination, StopState};
pub use config::{DisturbancePolicy, FlowSelector, JumpChoice, Priority, SimConfig};
pub use engine::simulate;
pub use examples::{micro_examples, MicroExample};
pub use invariance::{check_invariance, check_solution, InvarianceReport, SolutionCheck, Target};
pub use io::{read_csv, write_csv, CsvSolution, RunSummary};
