//! Gamma functions, regulation maps and pointwise minimum-norm feedback.

mod gamma;
mod law;
mod regulation;

pub use gamma::{gamma, gamma_c, gamma_d};
pub use law::{lipschitz_probe, synthesize, MinNormLaw, SynthesisConfig, SynthesisDescriptor, Synthesized};
pub use regulation::{base_set, min_norm_in_hull, min_norm_select, regulation_set, RegulationKind, RegulationSample, SRepr};
