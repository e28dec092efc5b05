use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid::{close_loop, FeedbackPair, HybridSystemUW, HybridSystemW, Phase};
use crate::scalar::{vec, Real};
use crate::sets::{
    lattice_filter_map, sample_level_boundary, sample_with, tangent_halfspace_test, tangent_residual, BoxSet,
    ConstraintSet, SampleMode, SampleOptions, DEFAULT_TOL,
};

use super::certificate::{CertificateRegions, RclfCertificate};
use super::report::{reduce, Residual, Strictness, VerificationReport};
use super::theta::{w_points, RclfContext};

/// Sampling box, lattice resolution and extra points (analytic endpoints of
/// one-dimensional pieces) for the quantified regions.
#[derive(Debug, Clone)]
pub struct GridSpec<T> {
    pub bbox: BoxSet<T>,
    pub resolution: T,
    pub anchors: Vec<Vec<T>>,
    pub tol: T,
}

impl<T: Real> GridSpec<T> {
    pub fn new(bbox: BoxSet<T>, resolution: T) -> Self {
        GridSpec { bbox, resolution, anchors: Vec::new(), tol: T::lit(DEFAULT_TOL) }
    }

    pub fn with_anchors(mut self, anchors: Vec<Vec<T>>) -> Self {
        self.anchors = anchors;
        self
    }

    fn opts(&self) -> SampleOptions<T> {
        SampleOptions { tol: self.tol, ..Default::default() }
    }

    pub fn interior(&self, set: &ConstraintSet<T>) -> Vec<Vec<T>> {
        sample_with(set, &self.bbox, self.resolution, SampleMode::Interior, &self.opts())
            .with_anchors(set, &self.anchors, self.tol)
            .points
    }

    pub fn boundary(&self, set: &ConstraintSet<T>) -> Vec<Vec<T>> {
        // the sampling band is scaled per constraint, so re-check membership at `tol`
        let mut pts: Vec<Vec<T>> = sample_with(set, &self.bbox, self.resolution, SampleMode::Boundary, &self.opts())
            .points
            .into_iter()
            .filter(|p| set.contains(p, self.tol))
            .collect();
        for a in &self.anchors {
            if set.on_boundary(a, self.tol) && !pts.contains(a) {
                pts.push(a.clone());
            }
        }
        pts
    }
}

/// Which invariance theorem the suite certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    /// `ly1`, `ly2`, `lyJump` (plus `Ly1`, `Ly4`).
    PreInvariance,
    /// Additionally `Ly2`, `Ly3`, and the `Theta_c` form of CLF-C.
    Invariance,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions<T> {
    pub theorem: Theorem,
    /// Records linear growth of `F_w` as attested, which passes Ly4/rcFI4 on unbounded regions.
    pub attest_linear_growth: bool,
    pub input_per_dim: usize,
    pub w_per_dim: usize,
    pub map_per_dim: usize,
    pub tol: T,
}

impl<T: Real> Default for VerifyOptions<T> {
    fn default() -> Self {
        VerifyOptions {
            theorem: Theorem::PreInvariance,
            attest_linear_growth: false,
            input_per_dim: 41,
            w_per_dim: 2,
            map_per_dim: 3,
            tol: T::lit(DEFAULT_TOL),
        }
    }
}

impl<T: Real> VerifyOptions<T> {
    pub fn context(&self, sys: Arc<HybridSystemUW<T>>, cert: &RclfCertificate<T>) -> Result<RclfContext<T>> {
        let mut ctx = RclfContext::new(sys, cert.clone())?;
        ctx.tol = self.tol;
        ctx.input_per_dim = self.input_per_dim;
        ctx.w_per_dim = self.w_per_dim;
        ctx.map_per_dim = self.map_per_dim;
        Ok(ctx)
    }
}

fn min_note(r: VerificationReport, what: &str) -> VerificationReport {
    if r.grid_size > 0 && r.worst_residual.is_finite() {
        let m = -r.worst_residual;
        r.note(format!("min {} = {}", what, m))
    } else {
        r
    }
}

/// (CLF-rC) on `I(r, r*)` and (CLF-rD) on `L_V(r)`: strict positivity of the margins.
pub fn verify_rho_positivity<T: Real>(ctx: &RclfContext<T>, grid: &GridSpec<T>) -> [VerificationReport; 2] {
    let cert = &ctx.cert;
    let pts = grid.interior(&ctx.regions.i_band);
    let rc = reduce("CLF-rC", &pts, Strictness::Strict, ctx.tol, |x| Ok(Residual::Value(-(cert.rho_c)(x))));
    let pts = grid.interior(&ctx.regions.l_v);
    let rd = reduce("CLF-rD", &pts, Strictness::Strict, ctx.tol, |x| Ok(Residual::Value(-(cert.rho_d)(x))));
    [min_note(rc, "rho_c"), min_note(rd, "rho_d")]
}

fn candidates<T: Real>(
    set: &super::theta::InputSet<T>,
    per_dim: usize,
    feedbacks: &[FeedbackPair<T>],
    p: Phase,
    x: &[T],
    tol: T,
) -> Vec<Vec<T>> {
    let mut out = set.candidates(per_dim);
    for fb in feedbacks {
        if let Ok(u) = fb.law(p).eval(x) {
            if set.contains(&u, tol) && !out.contains(&u) {
                out.push(u);
            }
        }
    }
    out
}

/// (CLF-C): `inf_u sup_w sup_xi <grad V, xi> + rho_c <= 0` on `M_c`. The inf runs
/// over an input lattice plus the registered feedback values, so a pass is sound.
pub fn verify_clf_flow<T: Real>(
    ctx: &RclfContext<T>,
    grid: &GridSpec<T>,
    feedbacks: &[FeedbackPair<T>],
    use_theta: bool,
) -> VerificationReport {
    let pts = grid.interior(&ctx.regions.m_c);
    let name = if use_theta { "CLF-C(Theta_c)" } else { "CLF-C" };
    reduce(name, &pts, Strictness::NonStrict, ctx.tol, |x| {
        let set = ctx.flow_inputs(x, use_theta)?;
        let rho = (ctx.cert.rho_c)(x);
        let mut best = T::infinity();
        for u in candidates(&set, ctx.input_per_dim, feedbacks, Phase::Flow, x, ctx.tol) {
            if let Some(s) = ctx.flow_sup(x, &u)? {
                best = best.min(s + rho);
            }
        }
        Ok(Residual::Value(best))
    })
}

/// (CLF-D): `inf_{u in Theta_d} sup_w sup_xi V(xi) + rho_d - r <= 0` on `M_d`.
pub fn verify_clf_jump<T: Real>(ctx: &RclfContext<T>, grid: &GridSpec<T>, feedbacks: &[FeedbackPair<T>]) -> VerificationReport {
    let pts = grid.interior(&ctx.regions.m_d);
    reduce("CLF-D", &pts, Strictness::NonStrict, ctx.tol, |x| {
        let set = ctx.theta_d(x)?;
        let rho = (ctx.cert.rho_d)(x);
        let mut best = T::infinity();
        for u in candidates(&set, ctx.input_per_dim, feedbacks, Phase::Jump, x, ctx.tol) {
            if let Some(s) = ctx.jump_sup(x, &u)? {
                best = best.min(s + rho - ctx.cert.r);
            }
        }
        Ok(Residual::Value(best))
    })
}

/// Closed loop with certificate regions computed from its own projections.
pub struct ClosedLoopCheck<'a, T> {
    pub sysw: &'a HybridSystemW<T>,
    pub cert: &'a RclfCertificate<T>,
    pub regions: CertificateRegions<T>,
    pub grid: &'a GridSpec<T>,
    pub opts: &'a VerifyOptions<T>,
}

impl<'a, T: Real> ClosedLoopCheck<'a, T> {
    pub fn new(sysw: &'a HybridSystemW<T>, cert: &'a RclfCertificate<T>, grid: &'a GridSpec<T>, opts: &'a VerifyOptions<T>) -> Self {
        ClosedLoopCheck { sysw, cert, regions: CertificateRegions::closed(sysw, cert), grid, opts }
    }

    fn ws(&self, p: Phase, x: &[T]) -> Result<Vec<Vec<T>>> {
        Ok(w_points(&self.sysw.phi_w(p, x, self.opts.tol)?, self.opts.w_per_dim))
    }

    /// Max of `f(w, xi)` over admissible `w` and map extreme points; vacuous if none.
    fn sup_over(&self, p: Phase, x: &[T], f: impl Fn(&[T]) -> T) -> Result<Residual<T>> {
        let mut best: Option<T> = None;
        for w in self.ws(p, x)? {
            for xi in self.sysw.map_extremes(p, x, &w, self.opts.tol)? {
                let v = f(&xi);
                best = Some(best.map_or(v, |b: T| b.max(v)));
            }
        }
        Ok(best.map_or(Residual::Vacuous, Residual::Value))
    }

    /// (ly1), (ly2), (lyJump).
    pub fn lyapunov(&self) -> [VerificationReport; 3] {
        let tol = self.opts.tol;
        let flow_pts = self.grid.interior(&self.regions.m_c);
        let ly1 = reduce("ly1", &flow_pts, Strictness::NonStrict, tol, |x| {
            let g = self.cert.gradient(x);
            self.sup_over(Phase::Flow, x, |xi| vec::dot(&g, xi))
        });
        let jump_pts = self.grid.interior(&self.regions.m_d);
        let r = self.cert.r;
        let ly2 = reduce("ly2", &jump_pts, Strictness::NonStrict, tol, |x| {
            self.sup_over(Phase::Jump, x, |xi| self.cert.value(xi) - r)
        });
        let either = self.sysw.either_states();
        let ly_jump = reduce("lyJump", &jump_pts, Strictness::NonStrict, tol, |x| {
            self.sup_over(Phase::Jump, x, |xi| either.scaled_violation(xi))
        });
        [ly1, ly2, ly_jump]
    }

    fn zero_w(&self, x: &[T]) -> Result<Vec<T>> {
        let wb = &self.sysw.open.flow.w;
        let zero = vec![T::zero(); wb.dim()];
        if wb.contains(&zero, self.opts.tol) {
            Ok(zero)
        } else {
            Err(Error::ZeroDisturbanceInadmissible(vec::to_f64(x)))
        }
    }

    /// Items Ly1 to Ly4.
    pub fn invariance_extras(&self) -> [VerificationReport; 4] {
        let tol = self.opts.tol;
        let pi_c = self.sysw.state_set(Phase::Flow);
        let pi_d = self.sysw.state_set(Phase::Jump);

        let level_pts: Vec<Vec<T>> =
            self.grid.boundary(&self.regions.l_v).into_iter().filter(|x| pi_c.contains(x, tol)).collect();
        let ly1 = reduce("Ly1", &level_pts, Strictness::Strict, tol, |x| {
            Ok(Residual::Value(-vec::norm(&self.cert.gradient(x))))
        });

        let bd_pts: Vec<Vec<T>> = self
            .grid
            .boundary(pi_c)
            .into_iter()
            .filter(|x| self.regions.l_v.contains(x, tol) && !pi_d.contains(x, tol))
            .collect();
        let ly2 = reduce("Ly2", &bd_pts, Strictness::NonStrict, tol, |x| {
            let zero = self.zero_w(x)?;
            let mut best = T::infinity();
            for xi in self.sysw.map_extremes(Phase::Flow, x, &zero, tol)? {
                best = best.min(tangent_residual(pi_c, x, &xi, tol)?);
            }
            Ok(if best == T::neg_infinity() { Residual::Vacuous } else { Residual::Value(best) })
        });

        let level = self.cert.level_constraint();
        let corner_pts: Vec<Vec<T>> =
            sample_level_boundary(pi_c, &level, &self.grid.bbox, self.grid.resolution, tol)
                .points
                .into_iter()
                .filter(|x| !pi_d.contains(x, tol))
                .collect();
        let ly3 = reduce("Ly3", &corner_pts, Strictness::Strict, tol, |x| {
            let zero = self.zero_w(x)?;
            let g = self.cert.gradient(x);
            let mut best = T::infinity();
            for xi in self.sysw.map_extremes(Phase::Flow, x, &zero, tol)? {
                if tangent_halfspace_test(pi_c, x, &xi, tol)? {
                    best = best.min(vec::dot(&g, &xi));
                }
            }
            Ok(Residual::Value(best))
        })
        .note(format!("covered {} sampled point(s) of V^-1(r) on the flow-set boundary", corner_pts.len()));

        let region = self.regions.l_v.intersect(pi_c);
        let ly4 = bounded_in_box("Ly4", &region, self.grid, self.opts);
        [ly1, ly2, ly3, ly4]
    }
}

/// Compactness of `region` as seen by sampling: no member on a lattice over the
/// box enlarged by 10% lies outside the box. Linear growth can be attested instead.
pub fn bounded_in_box<T: Real>(name: &str, region: &ConstraintSet<T>, grid: &GridSpec<T>, opts: &VerifyOptions<T>) -> VerificationReport {
    let b = &grid.bbox;
    let pad: Vec<T> = b.lo.iter().zip(&b.hi).map(|(l, h)| (*h - *l) * T::lit(0.1)).collect();
    let big = BoxSet::new(
        b.lo.iter().zip(&pad).map(|(l, p)| *l - *p).collect(),
        b.hi.iter().zip(&pad).map(|(h, p)| *h + *p).collect(),
    );
    let tol = grid.tol;
    let escapes: Vec<(T, Vec<T>)> = lattice_filter_map(&big, grid.resolution, |p| {
        let excess = p
            .iter()
            .zip(b.lo.iter().zip(&b.hi))
            .fold(T::zero(), |m, (x, (l, h))| m.max(*l - *x).max(*x - *h));
        (excess > tol && region.contains(&p, tol)).then_some((excess, p))
    });
    let worst = escapes
        .iter()
        .fold(None::<&(T, Vec<T>)>, |m, e| if m.is_none_or(|w| e.0 > w.0) { Some(e) } else { m });
    let mut rep = VerificationReport {
        condition: name.into(),
        grid_size: escapes.len(),
        worst_residual: worst.map_or(0.0, |w| w.0.as_f64()),
        worst_point: worst.map_or(Vec::new(), |w| vec::to_f64(&w.1)),
        pass: escapes.is_empty(),
        required: true,
        notes: Vec::new(),
    };
    if escapes.is_empty() {
        rep.notes.push("sampled region stays inside the bounding box (compact)".into());
    } else if opts.attest_linear_growth {
        rep.pass = true;
        rep.notes.push("region leaves the bounding box; linear growth of F_w attested by the user".into());
    } else {
        rep.notes.push(format!("{} sampled point(s) outside the bounding box", escapes.len()));
    }
    rep
}

/// Generic-set conditions for a constraint-described `K`: rcFI1 (attested),
/// rcFI2, rcFI3, rcFI4, rcFI5.
pub fn verify_generic_set<T: Real>(
    sysw: &HybridSystemW<T>,
    k: &ConstraintSet<T>,
    grid: &GridSpec<T>,
    opts: &VerifyOptions<T>,
) -> Vec<VerificationReport> {
    let tol = opts.tol;
    let pi_c = sysw.state_set(Phase::Flow);
    let pi_d = sysw.state_set(Phase::Jump);
    let ws = |p: Phase, x: &[T]| -> Result<Vec<Vec<T>>> { Ok(w_points(&sysw.phi_w(p, x, tol)?, opts.w_per_dim)) };
    // (x, w) in L_w: x on the boundary of Pi_c and no element of F_w(x, w) is tangent
    let in_lw = |x: &[T], w: &[T]| -> Result<bool> {
        if !pi_c.on_topological_boundary(x, tol) {
            return Ok(false);
        }
        for xi in sysw.map_extremes(Phase::Flow, x, w, tol)? {
            if tangent_halfspace_test(pi_c, x, &xi, tol)? {
                return Ok(false);
            }
        }
        Ok(true)
    };

    let rc1 = VerificationReport::attested(
        "rcFI1",
        true,
        "attested, not sampled: local inclusion of Psi^w_c near the boundary of K and Lipschitz F_w",
    )
    .with_required(false);

    let kd = k.intersect(pi_d);
    let jump_pts = grid.interior(&kd);
    let rc2 = reduce("rcFI2", &jump_pts, Strictness::NonStrict, tol, |x| {
        let mut best: Option<T> = None;
        for w in ws(Phase::Jump, x)? {
            for xi in sysw.map_extremes(Phase::Jump, x, &w, tol)? {
                let v = k.scaled_violation(&xi);
                best = Some(best.map_or(v, |b: T| b.max(v)));
            }
        }
        Ok(best.map_or(Residual::Vacuous, Residual::Value))
    });

    let kc = k.intersect(pi_c);
    let bd = grid.boundary(&kc);
    let rc3 = reduce("rcFI3", &bd, Strictness::NonStrict, tol, |x| {
        let mut best = T::neg_infinity();
        let mut any = false;
        for w in ws(Phase::Flow, x)? {
            if in_lw(x, &w)? {
                continue;
            }
            for xi in sysw.map_extremes(Phase::Flow, x, &w, tol)? {
                any = true;
                best = best.max(tangent_residual(&kc, x, &xi, tol)?);
            }
        }
        Ok(if !any || best == T::neg_infinity() { Residual::Vacuous } else { Residual::Value(best) })
    });

    let rc4 = bounded_in_box("rcFI4", &kc, grid, opts);

    let bd_c: Vec<Vec<T>> = grid.boundary(pi_c).into_iter().filter(|x| k.contains(x, tol)).collect();
    let rc5 = reduce("rcFI5", &bd_c, Strictness::NonStrict, tol, |x| {
        if pi_d.contains(x, tol) {
            return Ok(Residual::Value(pi_d.scaled_violation(x)));
        }
        for w in ws(Phase::Flow, x)? {
            if in_lw(x, &w)? {
                return Ok(Residual::Value(pi_d.scaled_violation(x)));
            }
        }
        Ok(Residual::Vacuous)
    });
    vec![rc1, rc2, rc3, rc4, rc5]
}

/// Every check applicable to the given data, with `required` set per the theorem.
/// With a certificate: CLF-rC/rD and CLF-C/D. With a certificate and a feedback:
/// ly1, ly2, lyJump and Ly1 to Ly4. With a target `K` and a feedback: rcFI1 to rcFI5.
pub fn run_suite<T: Real>(
    sys: Arc<HybridSystemUW<T>>,
    cert: Option<&RclfCertificate<T>>,
    fb: Option<&FeedbackPair<T>>,
    k: Option<&ConstraintSet<T>>,
    grid: &GridSpec<T>,
    opts: &VerifyOptions<T>,
) -> Result<Vec<VerificationReport>> {
    let invariance = opts.theorem == Theorem::Invariance;
    let feedbacks: Vec<FeedbackPair<T>> = fb.into_iter().cloned().collect();
    let mut out = Vec::new();
    if let Some(cert) = cert {
        let ctx = opts.context(sys.clone(), cert)?;
        let [rc, rd] = verify_rho_positivity(&ctx, grid);
        out.push(if cert.rho_c_required {
            rc
        } else {
            rc.with_required(false).note("not required: no flow input, V is constant along flows")
        });
        out.push(rd);
        out.push(verify_clf_flow(&ctx, grid, &feedbacks, invariance));
        out.push(verify_clf_jump(&ctx, grid, &feedbacks));
    }
    let sysw = match fb {
        Some(fb) => Some(close_loop(sys, fb.clone())?),
        None => None,
    };
    if let (Some(cert), Some(sysw)) = (cert, &sysw) {
        let chk = ClosedLoopCheck::new(sysw, cert, grid, opts);
        out.extend(chk.lyapunov());
        let [l1, l2, l3, l4] = chk.invariance_extras();
        out.push(l1);
        out.push(l2.with_required(invariance));
        out.push(l3.with_required(invariance));
        out.push(l4);
    }
    if let (Some(k), Some(sysw)) = (k, &sysw) {
        out.extend(verify_generic_set(sysw, k, grid, opts));
    }
    Ok(out)
}

/// `true` when every required report passes.
pub fn all_required_pass(reports: &[VerificationReport]) -> bool {
    reports.iter().all(|r| r.pass || !r.required)
}
