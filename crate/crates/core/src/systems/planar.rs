use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid::{ClosedFormLaw, FeedbackPair, HybridSystemUW, PhaseData, Selection, SetValuedMap};
use crate::scalar::Real;
use crate::sets::{c, field, BoxSet, ConstraintSet, Dependence, ScalarConstraint};

use super::BuiltinSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanarParams {
    pub gamma_range: [f64; 2],
    pub u_d_range: [f64; 2],
    pub w_c_range: [f64; 2],
    pub w_d_range: [f64; 2],
    /// Flow input box; the constraints keep `|u_c| <= |x1|`, so it never binds near `K`.
    pub u_c_bound: f64,
    pub kappa_d: f64,
}

impl Default for PlanarParams {
    fn default() -> Self {
        PlanarParams {
            gamma_range: [3.0, 4.0],
            u_d_range: [PI / 4.0, PI / 2.0],
            w_c_range: [0.0, 1.0],
            w_d_range: [-1.1, 1.1],
            u_c_bound: 10.0,
            kappa_d: PI / 3.0,
        }
    }
}

/// Rotation `R(s) x` with `R(s) = [[cos s, sin s], [-sin s, cos s]]`.
pub fn rotate<T: Real>(s: T, x: &[T]) -> Vec<T> {
    let (sn, cs) = s.sin_cos();
    vec![cs * x[0] + sn * x[1], -sn * x[0] + cs * x[1]]
}

/// Nonlinear planar system whose jumps rotate the state; target set the annulus
/// `1 <= |x| <= sqrt 2`.
pub fn planar_system<T: Real>(p: &PlanarParams) -> Result<BuiltinSystem<T>> {
    let [ud0, ud1] = p.u_d_range;
    if !(ud0 <= p.kappa_d && p.kappa_d <= ud1) {
        return Err(Error::InvalidParams(format!("kappa_d = {} is not in [{}, {}]", p.kappa_d, ud0, ud1)));
    }
    let lit = T::lit;
    let two = lit(2.0);
    let sq = |x: &[T]| x[0] * x[0] + x[1] * x[1];

    // z = (x1, x2, u_c, w_c)
    let outside_unit = ScalarConstraint::new("1 - |x|^2", field(move |z: &[T]| T::one() - sq(z), move |z| {
        vec![-two * z[0], -two * z[1], T::zero(), T::zero()]
    }));
    let sgn = |v: T| if v > T::zero() { T::one() } else if v < T::zero() { -T::one() } else { T::zero() };
    let flow_set = ConstraintSet::single(
        4,
        vec![
            outside_unit,
            ScalarConstraint::new("u - |x1|", field(|z: &[T]| z[2] - z[0].abs(), move |z| vec![-sgn(z[0]), T::zero(), T::one(), T::zero()]))
                .with_dep(Dependence::InputAffine),
            ScalarConstraint::new("-u - |x1|", field(|z: &[T]| -z[2] - z[0].abs(), move |z| vec![-sgn(z[0]), T::zero(), -T::one(), T::zero()]))
                .with_dep(Dependence::InputAffine),
            ScalarConstraint::new(
                "(|x|^2 - 2) x1^2 - u x1",
                field(
                    move |z: &[T]| (sq(z) - two) * z[0] * z[0] - z[2] * z[0],
                    move |z| {
                        let s = sq(z);
                        vec![
                            two * z[0] * z[0] * z[0] + (s - two) * two * z[0] - z[2],
                            two * z[1] * z[0] * z[0],
                            -z[0],
                            T::zero(),
                        ]
                    },
                ),
            )
            .with_dep(Dependence::InputAffine),
            ScalarConstraint::new(
                "u x1 - (|x|^2 - 1) x1^2",
                field(
                    move |z: &[T]| z[2] * z[0] - (sq(z) - T::one()) * z[0] * z[0],
                    move |z| {
                        let s = sq(z);
                        vec![
                            z[2] - two * z[0] * z[0] * z[0] - (s - T::one()) * two * z[0],
                            -two * z[1] * z[0] * z[0],
                            z[0],
                            T::zero(),
                        ]
                    },
                ),
            )
            .with_dep(Dependence::InputAffine),
        ],
    );
    let flow_map = SetValuedMap::single(Selection::with_params(
        "gamma family",
        BoxSet::interval(lit(p.gamma_range[0]), lit(p.gamma_range[1])),
        |z: &[T], g: &[T]| {
            let s = z[2] * z[3];
            vec![(z[0] * z[0] - g[0]) * s, z[0] * z[1] * s]
        },
    ));
    let ub = lit(p.u_c_bound);
    let flow = PhaseData::new(
        flow_set,
        flow_map,
        BoxSet::interval(-ub, ub),
        BoxSet::interval(lit(p.w_c_range[0]), lit(p.w_c_range[1])),
    );

    // z = (x1, x2, u_d, w_d)
    let jump_set = ConstraintSet::single(
        4,
        c::eq("x1 = 0", 4, 0, T::zero())
            .into_iter()
            .chain([ScalarConstraint::new("1 - |x|^2", field(move |z: &[T]| T::one() - sq(z), move |z| {
                vec![-two * z[0], -two * z[1], T::zero(), T::zero()]
            }))])
            .collect(),
    );
    let jump_map = SetValuedMap::new(
        vec![
            Selection::new("-R(uw)x", |z: &[T]| rotate(z[2] * z[3], z).into_iter().map(|v| -v).collect()),
            Selection::new("R(uw)x", |z: &[T]| rotate(z[2] * z[3], z)),
        ],
        false,
    );
    let jump = PhaseData::new(
        jump_set,
        jump_map,
        BoxSet::interval(lit(ud0), lit(ud1)),
        BoxSet::interval(lit(p.w_d_range[0]), lit(p.w_d_range[1])),
    );
    let sys = HybridSystemUW::new("planar", 2, flow, jump)?;

    let k = ConstraintSet::single(
        2,
        vec![
            ScalarConstraint::new("1 - |x|^2", field(move |x: &[T]| T::one() - sq(x), move |x| vec![-two * x[0], -two * x[1]])),
            ScalarConstraint::new("|x|^2 - 2", field(move |x: &[T]| sq(x) - two, move |x| vec![two * x[0], two * x[1]])),
        ],
    );
    let kd = lit(p.kappa_d);
    let feedbacks = vec![FeedbackPair::new(
        "annulus",
        Arc::new(ClosedFormLaw::new("kappa_c", 1, move |x: &[T]| vec![(sq(x) - lit(1.5)) * x[0]])),
        Arc::new(ClosedFormLaw::new("kappa_d", 1, move |_: &[T]| vec![kd])),
    )];
    let r2 = lit(2.0f64.sqrt());
    Ok(BuiltinSystem {
        id: "planar".into(),
        system: Arc::new(sys),
        certificate: None,
        feedbacks,
        k: Some(k),
        bbox: BoxSet::new(vec![lit(-1.6), lit(-1.6)], vec![lit(1.6), lit(1.6)]),
        anchors: vec![vec![T::zero(), T::one()], vec![T::zero(), -T::one()], vec![T::zero(), r2], vec![T::zero(), -r2]],
        default_x0: vec![lit(1.2), T::zero()],
    })
}

/// `count` states spread over the annulus `1 <= |x| <= sqrt 2`. Angles start at
/// `pi/2`, so index 0 (and `count/2` for even counts) lies on the jump line `x1 = 0`.
pub fn planar_initial_conditions(count: usize) -> Vec<Vec<f64>> {
    let r_out = 2f64.sqrt();
    (0..count)
        .map(|k| {
            let rad = 1.0 + (r_out - 1.0) * (k as f64 + 0.5) / count as f64;
            let th = std::f64::consts::FRAC_PI_2 + std::f64::consts::TAU * k as f64 / count as f64;
            vec![rad * th.cos(), rad * th.sin()]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid::Phase;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rotation_example() {
        let y = rotate(PI / 3.0, &[0.0, 1.2]);
        assert_abs_diff_eq!(y[0], 1.03923, epsilon = 1e-5);
        assert_abs_diff_eq!(y[1], 0.6, epsilon = 1e-12);
    }

    #[test]
    fn jumps_preserve_norm() {
        let s = planar_system::<f64>(&PlanarParams::default()).unwrap();
        for x2 in [1.0, 1.2, 1.4, -1.3] {
            for w in [-1.1, 0.3, 1.1] {
                for xi in s.system.map_extremes(Phase::Jump, &[0.0, x2], &[PI / 3.0], &[w], 1e-9) {
                    assert!((xi[0].hypot(xi[1]) - x2.abs()).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn psi_c_interval() {
        let s = planar_system::<f64>(&PlanarParams::default()).unwrap();
        let iv = s.system.psi_u(Phase::Flow, &[1.2, 0.0], 0.0).unwrap().intervals();
        assert_eq!(iv.len(), 1);
        assert_abs_diff_eq!(iv[0].0, -0.672, epsilon = 1e-12);
        assert_abs_diff_eq!(iv[0].1, 0.528, epsilon = 1e-12);
        let u = (1.44 - 1.5) * 1.2;
        assert!(iv[0].0 <= u && u <= iv[0].1);
    }

    #[test]
    fn inner_circle_is_not_left() {
        // <grad |x|^2, xi> = (gamma - 1) x1^2 w_c at |x| = 1 under kappa_c
        let s = planar_system::<f64>(&PlanarParams::default()).unwrap();
        for k in 0..36 {
            let th = k as f64 * PI / 18.0;
            let x = [th.cos(), th.sin()];
            let u = (1.0 - 1.5) * x[0];
            for w in [0.0, 1.0] {
                for xi in s.system.map_extremes(Phase::Flow, &x, &[u], &[w], 1e-9) {
                    assert!(2.0 * (x[0] * xi[0] + x[1] * xi[1]) >= -1e-12);
                }
            }
        }
    }
}
