use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hybrid::{ClosedFormLaw, FeedbackPair, HybridSystemUW, PhaseData, Selection, SetValuedMap, SolutionPair, ZeroLaw};
use crate::rclf::RclfCertificate;
use crate::scalar::Real;
use crate::sets::{c, field, BoxSet, BoxUnion, ConstraintSet, ScalarConstraint};

use super::{check, finish, BuiltinSystem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BouncingBallParams {
    pub gamma: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Defaults to `6 sqrt(gamma)`.
    pub v_max: Option<f64>,
    pub e1: f64,
    pub e2: f64,
    pub e_p: f64,
    pub eps: f64,
    pub delta_p: f64,
}

impl Default for BouncingBallParams {
    fn default() -> Self {
        BouncingBallParams {
            gamma: 9.81,
            h_min: 10.0,
            h_max: 12.0,
            v_max: None,
            e1: 0.8,
            e2: 0.9,
            e_p: 0.95,
            eps: 0.1,
            delta_p: 0.01,
        }
    }
}

impl BouncingBallParams {
    pub fn v_max(&self) -> f64 {
        self.v_max.unwrap_or(6.0 * self.gamma.sqrt())
    }

    pub fn energy(&self, x: &[f64]) -> f64 {
        0.5 * x[1] * x[1] + self.gamma * x[0]
    }

    pub fn e_max(&self) -> f64 {
        self.energy(&[self.h_max, self.v_max()])
    }

    pub fn u_max(&self) -> f64 {
        (2.0 * self.e_max()).sqrt()
    }

    /// `gamma (eps/2 + h_min)`, the energy level the controlled impact aims above.
    pub fn target_energy(&self) -> f64 {
        self.gamma * (0.5 * self.eps + self.h_min)
    }

    /// Continuous selection of the closed regulation interval, affine in `x2`.
    pub fn kappa_d(&self, x: &[f64]) -> f64 {
        let t = self.target_energy();
        (t / self.e_max()).sqrt() * x[1] + (2.0 * t).sqrt()
    }

    /// Min-norm element of the closed regulation interval.
    pub fn kappa_md(&self, x: &[f64]) -> f64 {
        ((2.0 * self.target_energy()).sqrt() + self.e1 * x[1]).max(0.0)
    }

    /// Closed regulation interval at an impact state `(0, x2)`.
    pub fn regulation_interval(&self, x2: f64) -> (f64, f64) {
        (((2.0 * self.target_energy()).sqrt() + self.e1 * x2).max(0.0), self.u_max() + self.e2 * x2)
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        let (vm, em) = (self.v_max(), self.e_max());
        check(&mut v, self.gamma > 0.0, || format!("gamma = {} must be positive", self.gamma));
        check(&mut v, 0.0 < self.h_min && self.h_min < self.h_max, || {
            format!("need 0 < h_min < h_max, got h_min = {}, h_max = {}", self.h_min, self.h_max)
        });
        check(&mut v, 0.0 < self.e1 && self.e1 < self.e2 && self.e2 < 1.0, || {
            format!("need 0 < e1 < e2 < 1, got e1 = {}, e2 = {}", self.e1, self.e2)
        });
        check(&mut v, 0.0 < self.e_p && self.e_p <= 1.0, || format!("e_p = {} is not in (0, 1]", self.e_p));
        check(&mut v, 0.0 < self.delta_p && self.delta_p < vm, || {
            format!("need 0 < delta_p < v_max, got delta_p = {}, v_max = {}", self.delta_p, vm)
        });
        check(&mut v, self.eps > 0.0, || format!("eps = {} must be positive", self.eps));
        let lhs = self.gamma * (self.h_min + self.eps);
        let rhs = 0.5 * (1.0 + self.e1 - self.e2).powi(2) * em;
        check(&mut v, lhs <= rhs, || {
            format!("gamma (h_min + eps) <= (1 + e1 - e2)^2 E_max / 2 fails: {} > {}", lhs, rhs)
        });
        let lhs = self.target_energy().sqrt();
        let rhs = self.e1 * em.sqrt();
        check(&mut v, lhs < rhs, || {
            format!("sqrt(gamma (h_min + eps/2)) < e1 sqrt(E_max) fails: {} >= {}", lhs, rhs)
        });
        finish(v)
    }
}

/// Ball with a controlled surface at height 0 and a string at `h_max`.
/// State `(height, velocity)`; no flow input, impact input `u_d` in `[0, u_max]`,
/// restitution `w_d` in `[e1, e2]`.
pub fn bouncing_ball<T: Real>(p: &BouncingBallParams) -> Result<BuiltinSystem<T>> {
    p.validate()?;
    let g = T::lit(p.gamma);
    let (h_max, v_max, e_max, u_max) = (T::lit(p.h_max), T::lit(p.v_max()), T::lit(p.e_max()), T::lit(p.u_max()));
    let half = T::lit(0.5);
    let energy = move |x: &[T]| half * x[1] * x[1] + g * x[0];

    let flow_set = ConstraintSet::single(
        2,
        vec![
            c::ge("x1 >= 0", 2, 0, T::zero()),
            c::le("x1 <= h_max", 2, 0, h_max),
            ScalarConstraint::new("E - E_max", field(move |x| energy(x) - e_max, move |x| vec![g, x[1]])).with_scale(e_max),
        ],
    );
    let flow = PhaseData::new(
        flow_set,
        SetValuedMap::single(Selection::new("F", move |z: &[T]| vec![z[1], -g])),
        BoxSet::zero_dim(),
        BoxSet::zero_dim(),
    );

    // z = (x1, x2, u_d, w_d)
    let d1: Vec<ScalarConstraint<T>> = c::eq("x1 = 0", 4, 0, T::zero())
        .into_iter()
        .chain([c::ge("x2 >= -sqrt(2 E_max)", 4, 1, -u_max), c::le("x2 <= 0", 4, 1, T::zero())])
        .collect();
    let d2: Vec<ScalarConstraint<T>> = c::eq("x1 = h_max", 4, 0, h_max)
        .into_iter()
        .chain([c::ge("x2 >= 0", 4, 1, T::zero()), c::le("x2 <= v_max", 4, 1, v_max)])
        .collect();
    let jump_set = ConstraintSet::single(4, d1).with_clause(d2);
    let (e_p, delta_p) = (T::lit(p.e_p), T::lit(p.delta_p));
    let mid = h_max * half;
    let jump_map = SetValuedMap::new(
        vec![
            Selection::new("G1 impact", |z: &[T]| vec![z[0], z[2] - z[3] * z[1]]).guarded(move |z, _| z[0] < mid),
            Selection::new("G2 pull", move |z: &[T]| vec![z[0], (-e_p * z[1]).min(-delta_p)])
                .guarded(move |z, _| z[0] >= mid),
        ],
        false,
    );
    let jump = PhaseData::new(jump_set, jump_map, BoxSet::interval(T::zero(), u_max), BoxSet::interval(T::lit(p.e1), T::lit(p.e2)));
    let mut sys = HybridSystemUW::new("bouncing-ball", 2, flow, jump)?;

    // Theta_d on the impact piece: G1 lands in C iff u - e2 x2 <= sqrt(2 E_max).
    let e2 = T::lit(p.e2);
    sys.theta_d_rule = Some(Arc::new(move |x: &[T]| {
        (x[0] < mid && x[1] <= T::zero())
            .then(|| BoxUnion::single(BoxSet::interval(T::zero(), u_max.min(u_max + e2 * x[1]))))
    }));

    let v = field(move |x: &[T]| -energy(x), move |x| vec![-g, -x[1]]);
    let r = -g * T::lit(p.h_min);
    let r_star = -g * T::lit(p.h_min - p.eps);
    let rho_d = g * T::lit(p.eps);
    let mut cert = RclfCertificate::new(v, r, r_star, |_| T::zero(), move |_| rho_d, T::lit(0.5))?;
    cert.rho_c_required = false;

    let clamp = move |u: T| u.max(T::zero()).min(u_max);
    let pk = p.clone();
    let kd = ClosedFormLaw::new("kappa_d", 1, move |x: &[T]| {
        vec![clamp(T::lit(pk.kappa_d(&[x[0].as_f64(), x[1].as_f64()])))]
    });
    let pk = p.clone();
    let kmd = ClosedFormLaw::new("kappa_md", 1, move |x: &[T]| {
        vec![clamp(T::lit(pk.kappa_md(&[x[0].as_f64(), x[1].as_f64()])))]
    });
    let feedbacks = vec![
        FeedbackPair::new("bkd", Arc::new(ZeroLaw(0)), Arc::new(kd)),
        FeedbackPair::new("kmd", Arc::new(ZeroLaw(0)), Arc::new(kmd)),
    ];

    let lit = T::lit;
    let anchors = vec![
        vec![T::zero(), -u_max],
        vec![T::zero(), lit(-(2.0 * p.gamma * p.h_min).sqrt())],
        vec![T::zero(), T::zero()],
        vec![h_max, T::zero()],
        vec![h_max, v_max],
    ];
    Ok(BuiltinSystem {
        id: "bouncing-ball".into(),
        system: Arc::new(sys),
        certificate: Some(cert),
        feedbacks,
        k: None,
        bbox: BoxSet::new(vec![lit(-1.0), lit(-26.0)], vec![lit(13.0), lit(26.0)]),
        anchors,
        default_x0: vec![lit(11.0), T::zero()],
    })
}

/// Apex height of every flow interval that ends in a jump. Where the velocity
/// changes sign inside the interval the apex is `x1 + x2^2 / (2 gamma)` at the last
/// sample before the sign change; otherwise the highest sample.
pub fn peak_heights<T: Real>(sol: &SolutionPair<T>, gamma: T) -> Vec<T> {
    let two_g = gamma + gamma;
    sol.arc.samples[..sol.jumps()]
        .iter()
        .map(|s| {
            let top = s.iter().map(|p| p.1[0]).fold(T::neg_infinity(), |a, b| a.max(b));
            s.windows(2)
                .find(|w| w[0].1[1] >= T::zero() && w[1].1[1] < T::zero())
                .map_or(top, |w| top.max(w[0].1[0] + w[0].1[1] * w[0].1[1] / two_g))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid::Phase;
    use approx::assert_abs_diff_eq;

    #[test]
    fn derived_constants() {
        let p = BouncingBallParams::default();
        assert_abs_diff_eq!(p.e_max(), 30.0 * 9.81, epsilon = 1e-9);
        assert_abs_diff_eq!(p.u_max(), 24.2610, epsilon = 1e-4);
        assert_abs_diff_eq!(p.kappa_d(&[0.0, -14.007]), 5.935, epsilon = 1e-3);
        assert_abs_diff_eq!(p.kappa_d(&[0.0, -p.u_max()]), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn impact_lands_in_flow_set() {
        let p = BouncingBallParams::default();
        let b = bouncing_ball::<f64>(&p).unwrap();
        let x = [0.0, -14.007];
        let u = p.kappa_d(&x);
        let xi = b.system.map_extremes(Phase::Jump, &x, &[u], &[0.9], 1e-9);
        assert_eq!(xi.len(), 1);
        assert_abs_diff_eq!(xi[0][1], 18.541, epsilon = 1e-3);
        assert!(p.energy(&xi[0]) <= p.e_max());
        assert!(b.system.flow.set.contains(&xi[0], 1e-9));
    }

    #[test]
    fn jump_set_projection() {
        let b = bouncing_ball::<f64>(&BouncingBallParams::default()).unwrap();
        let pd = b.system.project_states(Phase::Jump).unwrap();
        assert!(pd.contains(&[0.0, -20.0], 1e-9));
        assert!(!pd.contains(&[0.0, 1.0], 1e-9));
        assert!(pd.contains(&[12.0, 5.0], 1e-9));
        assert!(!pd.contains(&[12.0, 19.0], 1e-9));
        assert!(!pd.contains(&[5.0, -1.0], 1e-9));
    }

    #[test]
    fn validity_conditions_fail_independently() {
        let only_second = BouncingBallParams { e1: 0.55, e2: 0.6, ..Default::default() };
        let err = only_second.validate().unwrap_err().to_string();
        assert!(err.contains("e1 sqrt(E_max)") && !err.contains("(1 + e1 - e2)^2"), "{}", err);
        let only_first = BouncingBallParams { e1: 0.7, e2: 0.95, ..Default::default() };
        let err = only_first.validate().unwrap_err().to_string();
        assert!(err.contains("(1 + e1 - e2)^2") && !err.contains("e1 sqrt(E_max)"), "{}", err);
        assert!(BouncingBallParams { e1: 0.9, e2: 0.8, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn feedbacks_stay_in_input_box() {
        let p = BouncingBallParams::default();
        let b = bouncing_ball::<f64>(&p).unwrap();
        for fb in &b.feedbacks {
            for x in [[12.0, p.v_max()], [0.0, -p.u_max()], [0.0, 0.0]] {
                let u = fb.kappa_d.eval(&x).unwrap()[0];
                assert!((0.0..=p.u_max()).contains(&u), "{} at {:?}: {}", fb.name, x, u);
            }
        }
    }
}
