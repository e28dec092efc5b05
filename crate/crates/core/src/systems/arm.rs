use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hybrid::{ClosedFormLaw, FeedbackPair, HybridSystemUW, PhaseData, Selection, SetValuedMap, ZeroLaw};
use crate::rclf::RclfCertificate;
use crate::scalar::Real;
use crate::sets::{c, field, BoxSet, ConstraintSet};

use super::{check, finish, BuiltinSystem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmParams {
    /// `[[a, c], [c, b]]`.
    pub p: [[f64; 2]; 2],
    pub k_c: f64,
    pub b_c: f64,
    pub v_bar: f64,
    pub e1: f64,
    pub e2: f64,
    pub f_max: f64,
    pub k_p: f64,
    pub k_d: f64,
    /// Defaults to `4/5 r*`.
    pub r: Option<f64>,
    /// Defaults to `b v_bar^2`.
    pub r_star: Option<f64>,
}

impl Default for ArmParams {
    fn default() -> Self {
        ArmParams {
            p: [[5.0, 1.0], [1.0, 2.0]],
            k_c: 0.1,
            b_c: 0.02,
            v_bar: 0.6,
            e1: 0.8,
            e2: 0.9,
            f_max: 10.0,
            k_p: 0.5,
            k_d: 2.0,
            r: None,
            r_star: None,
        }
    }
}

impl ArmParams {
    pub fn abc(&self) -> (f64, f64, f64) {
        (self.p[0][0], self.p[1][1], self.p[0][1])
    }

    pub fn r_star(&self) -> f64 {
        self.r_star.unwrap_or(self.abc().1 * self.v_bar * self.v_bar)
    }

    pub fn r(&self) -> f64 {
        self.r.unwrap_or(0.8 * self.r_star())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let (a, b, c) = self.abc();
        0.5 * (a * x[0] * x[0] + 2.0 * c * x[0] * x[1] + b * x[1] * x[1])
    }

    /// Bound matrix for `<grad V, eta>` under `u_c = -k_p x1 - k_d x2`.
    pub fn q(&self) -> [[f64; 2]; 2] {
        let (a, b, c) = self.abc();
        let off = a - b * self.k_p - c * self.k_d;
        [[-2.0 * c * self.k_p, off], [off, 2.0 * c - 2.0 * b * self.k_d]]
    }

    pub fn quad_q(&self, x: &[f64]) -> f64 {
        let q = self.q();
        q[0][0] * x[0] * x[0] + 2.0 * q[0][1] * x[0] * x[1] + q[1][1] * x[1] * x[1]
    }

    /// Jump margin `(1 - e2^2) b v_bar^2 / 2`.
    pub fn rho_d(&self) -> f64 {
        (1.0 - self.e2 * self.e2) * self.abc().1 * self.v_bar * self.v_bar / 2.0
    }

    pub fn kappa_c(&self, x: &[f64]) -> f64 {
        -self.k_p * x[0] - self.k_d * x[1]
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        let (a, b, c) = self.abc();
        check(&mut v, self.p[0][1] == self.p[1][0], || format!("P is not symmetric: {:?}", self.p));
        check(&mut v, a > 0.0 && a * b - c * c > 0.0, || {
            format!("P is not positive definite: a = {}, det = {}", a, a * b - c * c)
        });
        check(&mut v, self.k_c > 0.0 && self.b_c > 0.0, || "contact parameters must be positive".into());
        check(&mut v, c > 0.0 && a / c >= self.k_c / self.b_c, || {
            format!("a/c >= k_c/b_c fails: {} < {}", a / c, self.k_c / self.b_c)
        });
        check(&mut v, 0.0 < self.e1 && self.e1 < self.e2 && self.e2 < 1.0, || {
            format!("need 0 < e1 < e2 < 1, got e1 = {}, e2 = {}", self.e1, self.e2)
        });
        check(&mut v, self.v_bar > 0.0 && self.f_max > 0.0, || "v_bar and f_max must be positive".into());
        let lhs = 4.0 * b * c * self.k_p * self.k_d - 4.0 * c * c * self.k_p;
        let rhs = (a - b * self.k_p - c * self.k_d).powi(2);
        check(&mut v, lhs > rhs, || format!("4bc k_p k_d - 4c^2 k_p > (a - b k_p - c k_d)^2 fails: {} <= {}", lhs, rhs));
        let rhs = 1.0 - b / c * self.k_d;
        check(&mut v, self.k_p > rhs, || format!("k_p > 1 - (b/c) k_d fails: {} <= {}", self.k_p, rhs));
        let q = self.q();
        let det = q[0][0] * q[1][1] - q[0][1] * q[1][0];
        let tr = q[0][0] + q[1][1];
        check(&mut v, det > 0.0 && tr < 0.0, || format!("Q is not negative definite: det = {}, trace = {}", det, tr));
        check(&mut v, self.r() < self.r_star(), || format!("need r < r*, got {} >= {}", self.r(), self.r_star()));
        finish(v)
    }
}

/// Point mass pushing against an elastic surface at `x1 = 0`. Flow input `u_c`
/// bounded by `f_max`; flow disturbance the singleton `{0}`; impact restitution
/// `w_d` in `[e1, e2]` once the velocity reaches `v_bar` inside the surface.
pub fn robot_arm<T: Real>(p: &ArmParams) -> Result<BuiltinSystem<T>> {
    p.validate()?;
    let lit = T::lit;
    let (k_c, b_c, v_bar, f_max) = (lit(p.k_c), lit(p.b_c), lit(p.v_bar), lit(p.f_max));

    // z = (x1, x2, u_c, w_c)
    let flow_set = ConstraintSet::single(4, vec![c::le("x1 <= 0", 4, 0, T::zero())])
        .with_clause(vec![c::ge("x1 >= 0", 4, 0, T::zero()), c::le("x2 <= v_bar", 4, 1, v_bar)]);
    // Filippov regularisation of the contact force: the hull {0, b_c x2} on x1 = 0
    let flow_map = SetValuedMap::new(
        vec![
            Selection::new("free", |z: &[T]| vec![z[1], z[2]]).guarded(|z, tol| z[0] < -tol),
            Selection::with_params("contact hull", BoxSet::interval(T::zero(), T::one()), move |z: &[T], l: &[T]| {
                vec![z[1], z[2] - l[0] * b_c * z[1]]
            })
            .guarded(|z, tol| z[0].abs() <= tol),
            Selection::new("contact", move |z: &[T]| vec![z[1], z[2] - k_c * z[0] - b_c * z[1]]).guarded(|z, tol| z[0] > tol),
        ],
        true,
    );
    let flow = PhaseData::new(flow_set, flow_map, BoxSet::interval(-f_max, f_max), BoxSet::point(vec![T::zero()]));

    // z = (x1, x2, w_d)
    let jump_set = ConstraintSet::single(3, vec![c::ge("x1 >= 0", 3, 0, T::zero()), c::ge("x2 >= v_bar", 3, 1, v_bar)]);
    let jump = PhaseData::new(
        jump_set,
        SetValuedMap::single(Selection::new("impact", |z: &[T]| vec![z[0], -z[2] * z[1]])),
        BoxSet::zero_dim(),
        BoxSet::interval(lit(p.e1), lit(p.e2)),
    );
    let sys = HybridSystemUW::new("robot-arm", 2, flow, jump)?;

    let (a, b, cc) = p.abc();
    let (a, b, cc) = (lit(a), lit(b), lit(cc));
    let half = lit(0.5);
    let v = field(
        move |x: &[T]| half * (a * x[0] * x[0] + lit(2.0) * cc * x[0] * x[1] + b * x[1] * x[1]),
        move |x| vec![a * x[0] + cc * x[1], cc * x[0] + b * x[1]],
    );
    let q = p.q();
    let (q00, q01, q11) = (lit(q[0][0]), lit(q[0][1]), lit(q[1][1]));
    // a quarter of -x'Qx: the contact force eats part of the margin (see the tests)
    let rho_c = move |x: &[T]| -lit(0.25) * (q00 * x[0] * x[0] + lit(2.0) * q01 * x[0] * x[1] + q11 * x[1] * x[1]);
    let rho_d = lit(p.rho_d());
    let cert = RclfCertificate::new(v, lit(p.r()), lit(p.r_star()), rho_c, move |_| rho_d, half)?;

    let (kp, kd) = (lit(p.k_p), lit(p.k_d));
    let law = ClosedFormLaw::new("kappa_c", 1, move |x: &[T]| vec![-kp * x[0] - kd * x[1]]);
    let feedbacks = vec![FeedbackPair::new("hmass", Arc::new(law), Arc::new(ZeroLaw(0)))];

    Ok(BuiltinSystem {
        id: "robot-arm".into(),
        system: Arc::new(sys),
        certificate: Some(cert),
        feedbacks,
        k: None,
        bbox: BoxSet::new(vec![lit(-1.2), lit(-1.2)], vec![lit(1.2), lit(1.2)]),
        anchors: vec![vec![T::zero(), v_bar]],
        default_x0: vec![lit(0.3), lit(0.55)],
    })
}

/// Six states inside `M_r` at `V = 0.9 r`, spread around the ellipse.
pub fn arm_initial_conditions(p: &ArmParams) -> Vec<Vec<f64>> {
    (0..6)
        .map(|k| {
            let th = std::f64::consts::PI * (2.0 * k as f64 + 0.5) / 6.0;
            let d = [th.cos(), th.sin()];
            let s = (0.9 * p.r() / p.value(&d)).sqrt();
            vec![s * d[0], s * d[1]]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid::Phase;
    use approx::assert_abs_diff_eq;

    #[test]
    fn default_gains_give_q() {
        let p = ArmParams::default();
        assert_eq!(p.q(), [[-1.0, 2.0], [2.0, -6.0]]);
        assert_abs_diff_eq!(p.r_star(), 0.72, epsilon = 1e-12);
        assert_abs_diff_eq!(p.r(), 0.576, epsilon = 1e-12);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn gain_violations_report_both_sides() {
        let p = ArmParams { k_p: 0.0, k_d: 0.0, ..Default::default() };
        let err = p.validate().unwrap_err().to_string();
        assert!(err.contains("0 <= 25"), "{}", err);
        assert!(err.contains("k_p > 1 - (b/c) k_d fails: 0 <= 1"), "{}", err);
    }

    #[test]
    fn impact_map() {
        let s = robot_arm::<f64>(&ArmParams::default()).unwrap();
        let xi = s.system.map_extremes(Phase::Jump, &[0.1, 0.7], &[], &[0.9], 1e-9);
        assert_abs_diff_eq!(xi[0][0], 0.1);
        assert_abs_diff_eq!(xi[0][1], -0.63, epsilon = 1e-12);
    }

    /// `<grad V, eta> <= 1/2 x'Qx - f_c^r (c x1 + b x2) <= 1/4 x'Qx` on both Filippov branches.
    #[test]
    fn flow_decrease_bound() {
        let p = ArmParams::default();
        let s = robot_arm::<f64>(&p).unwrap();
        let cert = s.certificate.unwrap();
        for i in -20..=20 {
            for j in -20..=20 {
                let x = [0.05 * i as f64, 0.05 * j as f64];
                let u = [p.kappa_c(&x)];
                let g = cert.gradient(&x);
                for eta in s.system.map_extremes(Phase::Flow, &x, &u, &[0.0], 1e-12) {
                    let d = g[0] * eta[0] + g[1] * eta[1];
                    assert!(d <= 0.25 * p.quad_q(&x) + 1e-12, "x = {:?}: {} > {}", x, d, 0.25 * p.quad_q(&x));
                }
            }
        }
    }

    #[test]
    fn initial_conditions_inside_level_set() {
        let p = ArmParams::default();
        for x in arm_initial_conditions(&p) {
            assert_abs_diff_eq!(p.value(&x), 0.9 * p.r(), epsilon = 1e-12);
        }
    }
}
