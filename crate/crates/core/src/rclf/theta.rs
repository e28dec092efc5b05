use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hybrid::{HybridSystemUW, Phase};
use crate::scalar::{vec, Real};
use crate::sets::{tangent_halfspace_test, BoxSet, BoxUnion, ConstraintSet, DEFAULT_TOL};

use super::certificate::{CertificateRegions, RclfCertificate};

/// Input set produced by `Psi`, `Theta_c` or `Theta_d`. Scalar inputs give exact
/// interval unions; multi-input filters fall back to the surviving lattice points.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSet<T> {
    Boxes(BoxUnion<T>),
    Points { dim: usize, points: Vec<Vec<T>> },
}

impl<T: Real> InputSet<T> {
    pub fn dim(&self) -> usize {
        match self {
            InputSet::Boxes(b) => b.dim,
            InputSet::Points { dim, .. } => *dim,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            InputSet::Boxes(b) => b.is_empty(),
            InputSet::Points { points, .. } => points.is_empty(),
        }
    }

    pub fn contains(&self, u: &[T], tol: T) -> bool {
        match self {
            InputSet::Boxes(b) => b.contains(u, tol),
            InputSet::Points { points, .. } => points.iter().any(|p| vec::norm_inf(&vec::sub(p, u)) <= tol),
        }
    }

    /// Lattice (`per_dim` values per direction) plus box vertices, or the points.
    pub fn candidates(&self, per_dim: usize) -> Vec<Vec<T>> {
        match self {
            InputSet::Boxes(b) => {
                let mut out = b.lattice(per_dim);
                for v in b.vertices() {
                    if !out.contains(&v) {
                        out.push(v);
                    }
                }
                out
            }
            InputSet::Points { points, .. } => points.clone(),
        }
    }

    pub fn min_norm_point(&self) -> Option<Vec<T>> {
        match self {
            InputSet::Boxes(b) => b.min_norm_point(),
            InputSet::Points { points, .. } => points
                .iter()
                .min_by(|a, b| vec::norm(a).partial_cmp(&vec::norm(b)).unwrap_or(std::cmp::Ordering::Equal))
                .cloned(),
        }
    }
}

/// Open-loop system, certificate and derived regions, plus the sampling knobs
/// shared by verification and synthesis.
#[derive(Clone)]
pub struct RclfContext<T> {
    pub sys: Arc<HybridSystemUW<T>>,
    pub cert: RclfCertificate<T>,
    pub regions: CertificateRegions<T>,
    pub tol: T,
    /// Lattice size per input direction for the inner inf and for filters.
    pub input_per_dim: usize,
    /// Lattice size per disturbance direction (2 means box vertices only).
    pub w_per_dim: usize,
    /// Parameter lattice size when sampling map images for containment filters.
    pub map_per_dim: usize,
}

impl<T: Real> RclfContext<T> {
    pub fn new(sys: Arc<HybridSystemUW<T>>, cert: RclfCertificate<T>) -> Result<Self> {
        let regions = CertificateRegions::open(&sys, &cert)?;
        Ok(RclfContext { sys, cert, regions, tol: T::lit(DEFAULT_TOL), input_per_dim: 41, w_per_dim: 2, map_per_dim: 3 })
    }

    pub fn pi(&self, p: Phase) -> &ConstraintSet<T> {
        match p {
            Phase::Flow => &self.regions.pi_c,
            Phase::Jump => &self.regions.pi_d,
        }
    }

    pub fn w_points(&self, b: &BoxUnion<T>) -> Vec<Vec<T>> {
        w_points(b, self.w_per_dim)
    }

    /// `sup_{w in Phi_c(x,u)} sup_{xi in F(x,u,w)} <grad V(x), xi>`; `None` when `Phi` is empty.
    pub fn flow_sup(&self, x: &[T], u: &[T]) -> Result<Option<T>> {
        let g = self.cert.gradient(x);
        let phi = self.sys.phi_w(Phase::Flow, x, u, self.tol)?;
        let mut best: Option<T> = None;
        for w in self.w_points(&phi) {
            for xi in self.sys.map_extremes(Phase::Flow, x, u, &w, self.tol) {
                let v = vec::dot(&g, &xi);
                best = Some(best.map_or(v, |b: T| b.max(v)));
            }
        }
        Ok(best)
    }

    /// `sup_{w in Phi_d(x,u)} sup_{xi in G(x,u,w)} V(xi)`; `None` when `Phi` is empty.
    pub fn jump_sup(&self, x: &[T], u: &[T]) -> Result<Option<T>> {
        let phi = self.sys.phi_w(Phase::Jump, x, u, self.tol)?;
        let mut best: Option<T> = None;
        for w in self.w_points(&phi) {
            for xi in self.sys.map_extremes(Phase::Jump, x, u, &w, self.tol) {
                let v = self.cert.value(&xi);
                best = Some(best.map_or(v, |b: T| b.max(v)));
            }
        }
        Ok(best)
    }

    pub fn psi(&self, p: Phase, x: &[T]) -> Result<InputSet<T>> {
        Ok(InputSet::Boxes(self.sys.psi_u(p, x, self.tol)?))
    }

    /// `Theta_d(x)`: inputs of `Psi_d(x)` whose jump images land in `Pi_c union Pi_d`
    /// for every admissible disturbance. Uses the system's exact rule when declared.
    pub fn theta_d(&self, x: &[T]) -> Result<InputSet<T>> {
        let psi = self.sys.psi_u(Phase::Jump, x, self.tol)?;
        if let Some(rule) = &self.sys.theta_d_rule {
            if let Some(r) = rule(x) {
                let mut out = BoxUnion::empty(psi.dim);
                for a in &psi.boxes {
                    for b in &r.boxes {
                        out.push(a.intersect(b));
                    }
                }
                return Ok(InputSet::Boxes(out));
            }
        }
        let either = self.regions.pi_c.union(&self.regions.pi_d);
        filter_inputs(&psi, self.input_per_dim, |u| {
            let phi = self.sys.phi_w(Phase::Jump, x, u, self.tol)?;
            if phi.is_empty() {
                return Ok(false);
            }
            for w in w_points(&phi, self.w_per_dim.max(self.map_per_dim)) {
                let z = self.sys.z(x, u, &w);
                for xi in self.sys.jump.map.sampled_values(&z, self.tol, self.map_per_dim) {
                    if !either.contains(&xi, self.tol) {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        })
    }

    /// `Theta_c(x)`: `Psi_c(x)` off `bd Pi_c \ Pi_d`; on it, inputs for which some
    /// element of `F(x, u, 0)` passes the tangent halfspace test.
    pub fn theta_c(&self, x: &[T]) -> Result<InputSet<T>> {
        let zero = vec![T::zero(); self.sys.flow.w.dim()];
        if !self.sys.flow.w.contains(&zero, self.tol) {
            return Err(Error::ZeroDisturbanceInadmissible(vec::to_f64(x)));
        }
        let psi = self.sys.psi_u(Phase::Flow, x, self.tol)?;
        let pi_c = &self.regions.pi_c;
        if !pi_c.on_topological_boundary(x, self.tol) || self.regions.pi_d.contains(x, self.tol) {
            return Ok(InputSet::Boxes(psi));
        }
        filter_inputs(&psi, self.input_per_dim, |u| {
            for xi in self.sys.map_extremes(Phase::Flow, x, u, &zero, self.tol) {
                if tangent_halfspace_test(pi_c, x, &xi, self.tol)? {
                    return Ok(true);
                }
            }
            Ok(false)
        })
    }

    /// Input set for the flow side: `Theta_c` under the invariance theorem, else `Psi_c`.
    pub fn flow_inputs(&self, x: &[T], use_theta: bool) -> Result<InputSet<T>> {
        if use_theta {
            self.theta_c(x)
        } else {
            self.psi(Phase::Flow, x)
        }
    }
}

/// Box vertices plus a `per_dim` lattice, without repeats.
pub fn w_points<T: Real>(b: &BoxUnion<T>, per_dim: usize) -> Vec<Vec<T>> {
    let mut out = b.vertices();
    if per_dim > 2 {
        for p in b.lattice(per_dim) {
            if !out.contains(&p) {
                out.push(p);
            }
        }
    }
    out
}

/// Keeps the inputs of `psi` passing `keep`. Scalar inputs are scanned on a lattice
/// and each surviving run is widened to its exact ends by bisection.
pub(crate) fn filter_inputs<T: Real>(
    psi: &BoxUnion<T>,
    per_dim: usize,
    keep: impl Fn(&[T]) -> Result<bool>,
) -> Result<InputSet<T>> {
    if psi.is_empty() {
        return Ok(InputSet::Boxes(psi.clone()));
    }
    if psi.dim == 1 {
        let mut out = BoxUnion::empty(1);
        let mut all = true;
        for b in &psi.boxes {
            let pts = b.lattice(per_dim.max(2));
            let mask = pts.iter().map(|p| keep(p)).collect::<Result<Vec<bool>>>()?;
            let mut k = 0;
            while k < pts.len() {
                if !mask[k] {
                    all = false;
                    k += 1;
                    continue;
                }
                let start = k;
                while k + 1 < pts.len() && mask[k + 1] {
                    k += 1;
                }
                let lo = if start > 0 { bisect(pts[start - 1][0], pts[start][0], &keep) } else { pts[start][0] };
                let hi = if k + 1 < pts.len() { bisect(pts[k + 1][0], pts[k][0], &keep) } else { pts[k][0] };
                out.push(BoxSet::interval(lo, hi));
                k += 1;
            }
        }
        return Ok(InputSet::Boxes(if all { psi.clone() } else { out }));
    }
    let cands = InputSet::Boxes(psi.clone()).candidates(per_dim);
    let mut kept = Vec::new();
    for u in &cands {
        if keep(u)? {
            kept.push(u.clone());
        }
    }
    if kept.len() == cands.len() {
        Ok(InputSet::Boxes(psi.clone()))
    } else {
        Ok(InputSet::Points { dim: psi.dim, points: kept })
    }
}

/// Boundary between a rejected and an accepted scalar; returns the accepted side.
fn bisect<T: Real>(mut bad: T, mut good: T, keep: &impl Fn(&[T]) -> Result<bool>) -> T {
    for _ in 0..80 {
        let mid = (bad + good) * T::lit(0.5);
        if mid == bad || mid == good {
            break;
        }
        if keep(&[mid]).unwrap_or(false) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    good
}
