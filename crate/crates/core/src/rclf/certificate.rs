use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hybrid::{HybridSystemUW, HybridSystemW, Phase};
use crate::scalar::Real;
use crate::sets::{field, ConstraintSet, Field, ScalarConstraint, ScalarFn, SublevelSet};

/// `(V, r, r*, rho_c, rho_d, sigma)`.
#[derive(Clone)]
pub struct RclfCertificate<T> {
    pub v: Field<T>,
    pub r: T,
    pub r_star: T,
    pub rho_c: ScalarFn<T>,
    pub rho_d: ScalarFn<T>,
    pub sigma: T,
    /// Whether strict positivity of `rho_c` is part of the certificate. Systems
    /// without flow inputs rely on `V` being constant along flows instead.
    pub rho_c_required: bool,
}

impl<T: Real> RclfCertificate<T> {
    pub fn new(
        v: Field<T>,
        r: T,
        r_star: T,
        rho_c: impl Fn(&[T]) -> T + Send + Sync + 'static,
        rho_d: impl Fn(&[T]) -> T + Send + Sync + 'static,
        sigma: T,
    ) -> Result<Self> {
        let c = RclfCertificate {
            v,
            r,
            r_star,
            rho_c: Arc::new(rho_c),
            rho_d: Arc::new(rho_d),
            sigma,
            rho_c_required: true,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r < self.r_star) {
            return Err(Error::InvalidParams(format!("need r < r*, got r = {}, r* = {}", self.r, self.r_star)));
        }
        if !(self.sigma > T::zero() && self.sigma < T::one()) {
            return Err(Error::InvalidParams(format!("sigma = {} is not in (0, 1)", self.sigma)));
        }
        Ok(())
    }

    pub fn value(&self, x: &[T]) -> T {
        self.v.value(x)
    }

    pub fn gradient(&self, x: &[T]) -> Vec<T> {
        self.v.gradient(x)
    }

    pub fn sublevel(&self) -> SublevelSet<T> {
        SublevelSet::new(self.v.clone(), self.r)
    }

    /// `V - r <= 0`.
    pub fn level_constraint(&self) -> ScalarConstraint<T> {
        self.sublevel().constraint("V - r")
    }

    /// `L_V(r)` over `R^n`.
    pub fn l_v(&self, n: usize) -> ConstraintSet<T> {
        self.sublevel().to_set(n)
    }

    /// `I(r, r*) = {r <= V <= r*}`.
    pub fn band(&self, n: usize) -> ConstraintSet<T> {
        let (v1, g1, v2, g2) = (self.v.clone(), self.v.clone(), self.v.clone(), self.v.clone());
        let (r, rs) = (self.r, self.r_star);
        let scale = r.abs().max(rs.abs());
        ConstraintSet::single(
            n,
            vec![
                ScalarConstraint::new(
                    "r - V",
                    field(move |x| r - v1.value(x), move |x| g1.gradient(x).into_iter().map(|g| -g).collect()),
                )
                .with_scale(scale),
                ScalarConstraint::new("V - r*", field(move |x| v2.value(x) - rs, move |x| g2.gradient(x))).with_scale(scale),
            ],
        )
    }
}

/// `M_r`, `M_c`, `M_d` and the band `I(r, r*)` as state-space constraint sets.
#[derive(Clone)]
pub struct CertificateRegions<T> {
    pub m_r: ConstraintSet<T>,
    pub m_c: ConstraintSet<T>,
    pub m_d: ConstraintSet<T>,
    pub i_band: ConstraintSet<T>,
    pub l_v: ConstraintSet<T>,
    pub pi_c: ConstraintSet<T>,
    pub pi_d: ConstraintSet<T>,
}

impl<T: Real> CertificateRegions<T> {
    fn build(n: usize, cert: &RclfCertificate<T>, pi_c: ConstraintSet<T>, pi_d: ConstraintSet<T>) -> Self {
        let l_v = cert.l_v(n);
        let i_band = cert.band(n);
        CertificateRegions {
            m_r: l_v.intersect(&pi_c.union(&pi_d)),
            m_c: i_band.intersect(&pi_c),
            m_d: l_v.intersect(&pi_d),
            i_band,
            l_v,
            pi_c,
            pi_d,
        }
    }

    /// Regions of the open-loop system (projections of `C_uw`, `D_uw`).
    pub fn open(sys: &HybridSystemUW<T>, cert: &RclfCertificate<T>) -> Result<Self> {
        Ok(Self::build(sys.n, cert, sys.project_states(Phase::Flow)?, sys.project_states(Phase::Jump)?))
    }

    /// Regions of a closed loop (projections of `C_w`, `D_w`).
    pub fn closed(sys: &HybridSystemW<T>, cert: &RclfCertificate<T>) -> Self {
        Self::build(sys.n(), cert, sys.state_set(Phase::Flow).clone(), sys.state_set(Phase::Jump).clone())
    }

    pub fn m(&self, p: Phase) -> &ConstraintSet<T> {
        match p {
            Phase::Flow => &self.m_c,
            Phase::Jump => &self.m_d,
        }
    }
}
