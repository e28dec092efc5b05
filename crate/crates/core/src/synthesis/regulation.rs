use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid::Phase;
use crate::rclf::{InputSet, RclfContext};
use crate::scalar::{vec, Real};

use super::gamma::gamma;

/// Which regulation map: flow over `Psi_c`, flow over `Theta_c`, or jump over `Theta_d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegulationKind {
    FlowPsi,
    FlowTheta,
    Jump,
}

impl RegulationKind {
    pub fn phase(self) -> Phase {
        match self {
            RegulationKind::Jump => Phase::Jump,
            _ => Phase::Flow,
        }
    }
}

/// Closure of a regulation set at one state.
#[derive(Debug, Clone, PartialEq)]
pub enum SRepr<T> {
    /// Scalar input: one closed interval per piece of the base set that meets `Gamma < 0`.
    Intervals(Vec<(T, T)>),
    /// Multi-input: lattice points with `Gamma < 0`; the set is their hull.
    PolytopeHull(Vec<Vec<T>>),
    Empty,
    /// Outside `M`, where the map is the whole input space.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegulationSample<T> {
    pub x: Vec<T>,
    pub dim: usize,
    pub gamma_values: Vec<(Vec<T>, T)>,
    pub repr: SRepr<T>,
}

/// `Psi_c`, `Theta_c` or `Theta_d` at `x`.
pub fn base_set<T: Real>(ctx: &RclfContext<T>, x: &[T], kind: RegulationKind) -> Result<InputSet<T>> {
    match kind {
        RegulationKind::FlowPsi => ctx.psi(Phase::Flow, x),
        RegulationKind::FlowTheta => ctx.theta_c(x),
        RegulationKind::Jump => ctx.theta_d(x),
    }
}

/// Closure of `{u in base(x) : Gamma(x, u) < 0}`. Scalar inputs: `Gamma(x, .)` is
/// sampled on each base interval, the minimum refined by golden section, and the
/// endpoints located by bisection to `root_tol`. Assumes quasi-convexity in `u`.
pub fn regulation_set<T: Real>(ctx: &RclfContext<T>, x: &[T], kind: RegulationKind, root_tol: T) -> Result<RegulationSample<T>> {
    let p = kind.phase();
    let dim = ctx.sys.phase(p).u.dim();
    let mut sample = RegulationSample { x: x.to_vec(), dim, gamma_values: Vec::new(), repr: SRepr::Empty };
    if !ctx.regions.m(p).contains(x, ctx.tol) {
        sample.repr = SRepr::Unbounded;
        return Ok(sample);
    }
    let base = base_set(ctx, x, kind)?;
    let n = ctx.input_per_dim.max(3);
    match &base {
        InputSet::Boxes(b) if dim == 1 => {
            let mut pieces = Vec::new();
            for (a, hi) in b.intervals() {
                let mut g = |u: T| -> Result<T> {
                    let v = gamma(ctx, p, x, &[u])?;
                    sample.gamma_values.push((vec![u], v));
                    Ok(v)
                };
                if let Some(iv) = interval_piece(&mut g, a, hi, n, root_tol)? {
                    pieces.push(iv);
                }
            }
            if !pieces.is_empty() {
                sample.repr = SRepr::Intervals(pieces);
            }
        }
        _ => {
            let mut inside = Vec::new();
            for u in base.candidates(n) {
                let v = gamma(ctx, p, x, &u)?;
                if v < T::zero() {
                    inside.push(u.clone());
                }
                sample.gamma_values.push((u, v));
            }
            if !inside.is_empty() {
                sample.repr = SRepr::PolytopeHull(inside);
            }
        }
    }
    Ok(sample)
}

fn interval_piece<T: Real>(g: &mut dyn FnMut(T) -> Result<T>, a: T, b: T, n: usize, root_tol: T) -> Result<Option<(T, T)>> {
    if b - a <= root_tol {
        return Ok((g(a)? < T::zero()).then_some((a, b)));
    }
    let us: Vec<T> = (0..n).map(|i| a + (b - a) * T::lit(i as f64 / (n - 1) as f64)).collect();
    let mut gs = Vec::with_capacity(n);
    for &u in &us {
        gs.push(g(u)?);
    }
    let k = (0..n).fold(0, |k, i| if gs[i] < gs[k] { i } else { k });
    let (mut m, mut gm) = (us[k], gs[k]);
    if !(gm < T::zero()) {
        let (l, r) = (us[k.saturating_sub(1)], us[(k + 1).min(n - 1)]);
        let (um, v) = golden_min(g, l, r, root_tol)?;
        if !(v < T::zero()) {
            return Ok(None);
        }
        m = um;
        gm = v;
    }
    debug_assert!(gm < T::zero());
    let left = (0..n).rev().find(|&i| us[i] < m && gs[i] > T::zero());
    let lo = match left {
        Some(i) => bisect(g, us[i], m, root_tol)?,
        None => a,
    };
    let right = (0..n).find(|&i| us[i] > m && gs[i] > T::zero());
    let hi = match right {
        Some(i) => bisect(g, us[i], m, root_tol)?,
        None => b,
    };
    Ok(Some((lo, hi)))
}

/// Boundary between `pos` (`Gamma > 0`) and `neg` (`Gamma <= 0`), returned on the `neg` side.
fn bisect<T: Real>(g: &mut dyn FnMut(T) -> Result<T>, mut pos: T, mut neg: T, tol: T) -> Result<T> {
    for _ in 0..200 {
        if (pos - neg).abs() <= tol {
            break;
        }
        let mid = (pos + neg) * T::lit(0.5);
        if g(mid)? > T::zero() {
            pos = mid;
        } else {
            neg = mid;
        }
    }
    Ok(neg)
}

fn golden_min<T: Real>(g: &mut dyn FnMut(T) -> Result<T>, mut l: T, mut r: T, tol: T) -> Result<(T, T)> {
    let phi = T::lit(0.5 * (5f64.sqrt() - 1.0));
    let mut c = r - phi * (r - l);
    let mut d = l + phi * (r - l);
    let (mut gc, mut gd) = (g(c)?, g(d)?);
    for _ in 0..200 {
        if r - l <= tol {
            break;
        }
        if gc < gd {
            r = d;
            d = c;
            gd = gc;
            c = r - phi * (r - l);
            gc = g(c)?;
        } else {
            l = c;
            c = d;
            gc = gd;
            d = l + phi * (r - l);
            gd = g(d)?;
        }
    }
    Ok(if gc < gd { (c, gc) } else { (d, gd) })
}

/// Minimum-norm element of the closed regulation set; zero when unbounded.
pub fn min_norm_select<T: Real>(s: &RegulationSample<T>) -> Result<Vec<T>> {
    match &s.repr {
        SRepr::Intervals(pieces) => Ok(pieces
            .iter()
            .map(|&(lo, hi)| T::zero().max(lo).min(hi))
            .fold(None, |best: Option<T>, u| Some(best.map_or(u, |b| if u.abs() < b.abs() { u } else { b })))
            .map(|u| vec![u])
            .unwrap_or_default()),
        SRepr::PolytopeHull(pts) => Ok(min_norm_in_hull(pts, T::lit(1e-10))),
        SRepr::Unbounded => Ok(vec![T::zero(); s.dim]),
        SRepr::Empty => Err(Error::RegulationEmpty(vec::to_f64(&s.x))),
    }
}

/// Projection of the origin onto the convex hull of `pts` (Wolfe's min-norm-point
/// method; `tol` is relative to the largest squared norm).
pub fn min_norm_in_hull<T: Real>(pts: &[Vec<T>], tol: T) -> Vec<T> {
    let Some(first) = (0..pts.len()).min_by(|&a, &b| {
        vec::norm(&pts[a]).partial_cmp(&vec::norm(&pts[b])).unwrap_or(std::cmp::Ordering::Equal)
    }) else {
        return Vec::new();
    };
    let scale = pts.iter().map(|p| vec::dot(p, p)).fold(T::zero(), |a, b| a.max(b)).max(T::one());
    let eps = tol * scale;
    let combo = |s: &[usize], l: &[T]| {
        let mut y = vec![T::zero(); pts[first].len()];
        for (&i, &w) in s.iter().zip(l) {
            y = vec::axpy(&y, w, &pts[i]);
        }
        y
    };
    let (mut s, mut lam) = (vec![first], vec![T::one()]);
    let mut y = pts[first].clone();
    for _ in 0..10 * pts.len() + 100 {
        let j = (0..pts.len())
            .min_by(|&a, &b| vec::dot(&y, &pts[a]).partial_cmp(&vec::dot(&y, &pts[b])).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap();
        if vec::dot(&y, &y) - vec::dot(&y, &pts[j]) <= eps || s.contains(&j) {
            return y;
        }
        s.push(j);
        lam.push(T::zero());
        for _ in 0..s.len() + 1 {
            let Some(alpha) = affine_min_norm(pts, &s) else { return y };
            if alpha.iter().all(|&a| a > T::zero()) {
                lam = alpha;
                break;
            }
            let mut theta = T::one();
            for (i, &a) in alpha.iter().enumerate() {
                if a <= T::zero() && lam[i] - a > T::zero() {
                    theta = theta.min(lam[i] / (lam[i] - a));
                }
            }
            for i in 0..lam.len() {
                lam[i] = lam[i] + theta * (alpha[i] - lam[i]);
            }
            let keep: Vec<usize> = (0..s.len()).filter(|&i| lam[i] > T::lit(1e-14)).collect();
            s = keep.iter().map(|&i| s[i]).collect();
            lam = keep.iter().map(|&i| lam[i]).collect();
            let total = lam.iter().fold(T::zero(), |a, &b| a + b);
            lam.iter_mut().for_each(|l| *l = *l / total);
        }
        y = combo(&s, &lam);
    }
    y
}

/// Weights summing to one that minimise the norm over the affine hull of `pts[s]`.
fn affine_min_norm<T: Real>(pts: &[Vec<T>], s: &[usize]) -> Option<Vec<T>> {
    let k = s.len();
    let mut a = vec![vec![T::zero(); k + 2]; k + 1];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = vec::dot(&pts[s[i]], &pts[s[j]]);
        }
        a[i][k] = T::one();
        a[k][i] = T::one();
    }
    a[k][k + 1] = T::one();
    let sol = solve(a)?;
    Some(sol[..k].to_vec())
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve<T: Real>(mut a: Vec<Vec<T>>) -> Option<Vec<T>> {
    let n = a.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap_or(std::cmp::Ordering::Equal))?;
        if a[p][c].abs() <= T::lit(1e-300) {
            return None;
        }
        a.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=n {
                    let v = a[c][k];
                    a[r][k] = a[r][k] - f * v;
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{builtin, BouncingBallParams};
    use approx::assert_abs_diff_eq;

    fn ball_ctx() -> RclfContext<f64> {
        let b = builtin::<f64>("bouncing-ball").unwrap();
        RclfContext::new(b.system.clone(), b.certificate.clone().unwrap()).unwrap()
    }

    #[test]
    fn ball_jump_interval_matches_closed_form() {
        let ctx = ball_ctx();
        let p = BouncingBallParams::default();
        let x2 = -(2.0 * p.gamma * p.h_min).sqrt();
        let s = regulation_set(&ctx, &[0.0, x2], RegulationKind::Jump, 1e-10).unwrap();
        let (lo, hi) = p.regulation_interval(x2);
        match s.repr {
            SRepr::Intervals(ref v) => {
                assert_eq!(v.len(), 1);
                assert_abs_diff_eq!(v[0].0, lo, epsilon = 1e-9);
                assert_abs_diff_eq!(v[0].1, hi, epsilon = 1e-9);
            }
            ref r => panic!("{r:?}"),
        }
        assert_abs_diff_eq!(min_norm_select(&s).unwrap()[0], p.kappa_md(&[0.0, x2]), epsilon = 1e-9);
    }

    #[test]
    fn lowest_impact_speed_gives_zero_input() {
        let ctx = ball_ctx();
        let p = BouncingBallParams::default();
        let x2 = -p.u_max();
        let s = regulation_set(&ctx, &[0.0, x2], RegulationKind::Jump, 1e-10).unwrap();
        assert_eq!(min_norm_select(&s).unwrap(), vec![0.0]);
        if let SRepr::Intervals(v) = &s.repr {
            assert_abs_diff_eq!(v[0].1, p.u_max() * (1.0 - p.e2), epsilon = 1e-9);
        }
    }

    #[test]
    fn outside_m_is_unbounded() {
        let ctx = ball_ctx();
        let s = regulation_set(&ctx, &[0.0, -5.0], RegulationKind::Jump, 1e-10).unwrap();
        assert_eq!(s.repr, SRepr::Unbounded);
        assert_eq!(min_norm_select(&s).unwrap(), vec![0.0]);
    }

    #[test]
    fn empty_set_is_an_error() {
        let s = RegulationSample::<f64> { x: vec![1.0], dim: 1, gamma_values: vec![], repr: SRepr::Empty };
        assert!(matches!(min_norm_select(&s), Err(Error::RegulationEmpty(_))));
    }

    #[test]
    fn interval_containing_zero_selects_zero() {
        let s = RegulationSample { x: vec![0.0], dim: 1, gamma_values: vec![], repr: SRepr::Intervals(vec![(-1.0, 1.0)]) };
        assert_eq!(min_norm_select(&s).unwrap(), vec![0.0]);
    }

    #[test]
    fn hull_projection() {
        let pts = vec![vec![1.0, -1.0], vec![1.0, 1.0], vec![3.0, 0.0]];
        let y = min_norm_in_hull(&pts, 1e-12);
        assert_abs_diff_eq!(y[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y[1], 0.0, epsilon = 1e-12);
        let inside = vec![vec![-1.0, -1.0], vec![2.0, -1.0], vec![0.0, 2.0]];
        assert!(vec::norm(&min_norm_in_hull(&inside, 1e-12)) < 1e-12);
        let y = min_norm_in_hull(&[vec![2.0, 1.0]], 1e-12);
        assert_eq!(y, vec![2.0, 1.0]);
    }
}
