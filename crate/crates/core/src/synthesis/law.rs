use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hybrid::{FeedbackLaw, FeedbackPair, Phase};
use crate::rclf::{all_required_pass, verify_clf_flow, verify_clf_jump, verify_rho_positivity, GridSpec, RclfContext, Theorem, VerificationReport};
use crate::scalar::{vec, Real};

use super::regulation::{base_set, min_norm_select, regulation_set, RegulationKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    /// `pre-invariance` selects from `Psi_c`, `invariance` from `Theta_c`.
    pub theorem: Theorem,
    /// Skip the certificate checks.
    pub force: bool,
    pub root_tol: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig { theorem: Theorem::PreInvariance, force: false, root_tol: 1e-10 }
    }
}

/// Pointwise min-norm law: on `M` the min-norm element of the closed regulation
/// set, elsewhere the min-norm element of the base set (`Psi`/`Theta`), clamped to `U`.
pub struct MinNormLaw<T> {
    ctx: Arc<RclfContext<T>>,
    kind: RegulationKind,
    root_tol: T,
}

impl<T: Real> MinNormLaw<T> {
    pub fn new(ctx: Arc<RclfContext<T>>, kind: RegulationKind, root_tol: T) -> Self {
        MinNormLaw { ctx, kind, root_tol }
    }

    fn input_box(&self) -> &crate::sets::BoxSet<T> {
        &self.ctx.sys.phase(self.kind.phase()).u
    }
}

impl<T: Real> FeedbackLaw<T> for MinNormLaw<T> {
    fn dim(&self) -> usize {
        self.input_box().dim()
    }

    fn eval(&self, x: &[T]) -> Result<Vec<T>> {
        let m = self.dim();
        if m == 0 {
            return Ok(Vec::new());
        }
        let ctx = &self.ctx;
        let u = if ctx.regions.m(self.kind.phase()).contains(x, ctx.tol) {
            min_norm_select(&regulation_set(ctx, x, self.kind, self.root_tol)?)?
        } else {
            match base_set(ctx, x, self.kind).ok().and_then(|b| b.min_norm_point()) {
                Some(u) => u,
                None => vec![T::zero(); m],
            }
        };
        Ok(self.input_box().clamp(&u))
    }

    fn name(&self) -> String {
        match self.kind.phase() {
            Phase::Flow => "min-norm kappa_c".into(),
            Phase::Jump => "min-norm kappa_d".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisDescriptor {
    pub method: String,
    pub sigma: f64,
    pub which_theorem: Theorem,
    pub forced: bool,
    /// SHA-256 of the JSON-serialised verification reports.
    pub verification_digest: String,
}

pub struct Synthesized<T> {
    pub feedback: FeedbackPair<T>,
    pub reports: Vec<VerificationReport>,
    pub descriptor: SynthesisDescriptor,
}

/// Builds the min-norm feedback pair. Unless `cfg.force` is set, the certificate
/// conditions CLF-rC/rD and CLF-C/D are checked on `grid` first (registered
/// feedbacks in `hints` join the input lattice of the inf) and must pass.
pub fn synthesize<T: Real>(
    ctx: RclfContext<T>,
    cfg: &SynthesisConfig,
    grid: &GridSpec<T>,
    hints: &[FeedbackPair<T>],
) -> Result<Synthesized<T>> {
    let use_theta = cfg.theorem == Theorem::Invariance;
    let mut reports = Vec::new();
    if cfg.force {
        log::warn!("synthesis forced: certificate checks skipped");
    } else {
        let [rc, rd] = verify_rho_positivity(&ctx, grid);
        reports.push(rc.with_required(ctx.cert.rho_c_required));
        reports.push(rd);
        reports.push(verify_clf_flow(&ctx, grid, hints, use_theta));
        reports.push(verify_clf_jump(&ctx, grid, hints));
        if !all_required_pass(&reports) {
            let failed: Vec<String> = reports
                .iter()
                .filter(|r| r.required && !r.pass)
                .map(|r| format!("{} (worst {} at {:?})", r.condition, r.worst_residual, r.worst_point))
                .collect();
            return Err(Error::NotVerified(failed.join("; ")));
        }
    }
    let digest = Sha256::digest(serde_json::to_vec(&reports).unwrap_or_default());
    let descriptor = SynthesisDescriptor {
        method: "pointwise-min-norm".into(),
        sigma: ctx.cert.sigma.as_f64(),
        which_theorem: cfg.theorem,
        forced: cfg.force,
        verification_digest: digest.iter().map(|b| format!("{b:02x}")).collect(),
    };
    let ctx = Arc::new(ctx);
    let root_tol = T::lit(cfg.root_tol);
    let flow_kind = if use_theta { RegulationKind::FlowTheta } else { RegulationKind::FlowPsi };
    let feedback = FeedbackPair::new(
        "min-norm",
        Arc::new(MinNormLaw::new(ctx.clone(), flow_kind, root_tol)),
        Arc::new(MinNormLaw::new(ctx, RegulationKind::Jump, root_tol)),
    );
    Ok(Synthesized { feedback, reports, descriptor })
}

/// Largest `|f(a) - f(b)| / |a - b|` over consecutive points.
pub fn lipschitz_probe<T: Real>(law: &dyn FeedbackLaw<T>, pts: &[Vec<T>]) -> Result<T> {
    let mut worst = T::zero();
    let mut prev: Option<(&Vec<T>, Vec<T>)> = None;
    for p in pts {
        let u = law.eval(p)?;
        if let Some((q, v)) = &prev {
            let dx = vec::norm(&vec::sub(p, q));
            if dx > T::zero() {
                worst = worst.max(vec::norm(&vec::sub(&u, v)) / dx);
            }
        }
        prev = Some((p, u));
    }
    Ok(worst)
}
