//! Sampled verification of RCLF certificates and of the invariance conditions.

mod certificate;
mod checks;
mod report;
mod theta;

pub use certificate::{CertificateRegions, RclfCertificate};
pub use checks::{
    all_required_pass, bounded_in_box, run_suite, verify_clf_flow, verify_clf_jump, verify_generic_set,
    verify_rho_positivity, ClosedLoopCheck, GridSpec, Theorem, VerifyOptions,
};
pub use report::{reduce, Residual, Strictness, VerificationReport};
pub use theta::{w_points, InputSet, RclfContext};
