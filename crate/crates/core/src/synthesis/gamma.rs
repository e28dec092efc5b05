use crate::error::Result;
use crate::hybrid::Phase;
use crate::rclf::RclfContext;
use crate::scalar::Real;

/// `Gamma_c(x, u_c)`: worst flow decrease plus `sigma rho_c(x)` on `Delta_c`,
/// `-inf` off it.
pub fn gamma_c<T: Real>(ctx: &RclfContext<T>, x: &[T], u: &[T]) -> Result<T> {
    if !ctx.regions.m_c.contains(x, ctx.tol) || !ctx.sys.flow.u.contains(u, ctx.tol) {
        return Ok(T::neg_infinity());
    }
    Ok(match ctx.flow_sup(x, u)? {
        Some(s) => s + ctx.cert.sigma * (ctx.cert.rho_c)(x),
        None => T::neg_infinity(),
    })
}

/// `Gamma_d(x, u_d)`: worst post-jump value plus `sigma rho_d(x) - r` on `Delta_d`,
/// `-inf` off it.
pub fn gamma_d<T: Real>(ctx: &RclfContext<T>, x: &[T], u: &[T]) -> Result<T> {
    if !ctx.regions.m_d.contains(x, ctx.tol) || !ctx.sys.jump.u.contains(u, ctx.tol) {
        return Ok(T::neg_infinity());
    }
    Ok(match ctx.jump_sup(x, u)? {
        Some(s) => s + ctx.cert.sigma * (ctx.cert.rho_d)(x) - ctx.cert.r,
        None => T::neg_infinity(),
    })
}

pub fn gamma<T: Real>(ctx: &RclfContext<T>, p: Phase, x: &[T], u: &[T]) -> Result<T> {
    match p {
        Phase::Flow => gamma_c(ctx, x, u),
        Phase::Jump => gamma_d(ctx, x, u),
    }
}
