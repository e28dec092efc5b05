use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use invhyb::hybrid::{close_loop, Phase, Selector};
use invhyb::rclf::VerifyOptions;
use invhyb::sets::{BoxSet, BoxUnion};
use invhyb::synthesis::{min_norm_in_hull, min_norm_select, regulation_set, RegulationKind};
use invhyb::systems::{builtin, rotate, BouncingBallParams};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn boxes() -> impl Strategy<Value = BoxSet<f64>> {
    prop::collection::vec((-10.0..10.0f64, 0.0..5.0f64), 1..4)
        .prop_map(|v| BoxSet::new(v.iter().map(|p| p.0).collect(), v.iter().map(|p| p.0 + p.1).collect()))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn box_samples_stay_inside(b in boxes(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..8 {
            let p = b.sample(&mut rng);
            prop_assert!(b.contains(&p, 0.0));
        }
        for v in b.vertices() {
            prop_assert!(b.contains(&v, 0.0));
        }
        prop_assert!(b.contains(&b.center(), 0.0));
    }

    #[test]
    fn clamp_is_an_idempotent_projection(b in boxes(), p in prop::collection::vec(-20.0..20.0f64, 3)) {
        let p = &p[..b.dim()];
        let q = b.clamp(p);
        prop_assert!(b.contains(&q, 0.0));
        prop_assert_eq!(b.clamp(&q), q.clone());
        if b.contains(p, 0.0) {
            prop_assert_eq!(q.clone(), p.to_vec());
        }
        // no box point is closer to p than its clamp
        for v in b.vertices() {
            prop_assert!(norm(&sub(p, &q)) <= norm(&sub(p, &v)) + 1e-12);
        }
    }

    #[test]
    fn interval_unions_are_disjoint_and_sorted(iv in prop::collection::vec((-10.0..10.0f64, 0.0..3.0f64), 1..6), probe in -12.0..12.0f64) {
        let mut u = BoxUnion::empty(1);
        for (a, w) in &iv {
            u.push(BoxSet::interval(*a, a + w));
        }
        let list = u.intervals();
        for pair in list.windows(2) {
            prop_assert!(pair[0].1 < pair[1].0);
        }
        let inside = iv.iter().any(|(a, w)| probe >= *a && probe <= a + w);
        prop_assert_eq!(u.contains(&[probe], 0.0), inside);
    }

    #[test]
    fn hull_projection_is_optimal(pts in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 2), 1..7)) {
        let x = min_norm_in_hull(&pts, 1e-12);
        // first-order optimality: <p - x, x> >= 0 for every generator
        for p in &pts {
            prop_assert!(dot(&sub(p, &x), &x) >= -1e-8, "p = {:?}, x = {:?}", p, x);
            prop_assert!(norm(&x) <= norm(p) + 1e-9);
        }
    }

    #[test]
    fn rotation_preserves_norm(s in -10.0..10.0f64, x in prop::collection::vec(-3.0..3.0f64, 2)) {
        let y = rotate(s, &x);
        prop_assert!((norm(&y) - norm(&x)).abs() <= 1e-12 * (1.0 + norm(&x)));
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    #[test]
    fn closed_loop_composes_with_the_feedback(x1 in -0.6..0.6f64, x2 in -0.8..0.8f64, w in 0.8..0.9f64) {
        let b = builtin::<f64>("robot-arm").unwrap();
        let sysw = close_loop(b.system.clone(), b.default_feedback().clone()).unwrap();
        let x = [x1, x2];
        let u = sysw.kappa(Phase::Flow, &x).unwrap();
        for (p, ww) in [(Phase::Flow, vec![0.0]), (Phase::Jump, vec![w])] {
            let uu = if p == Phase::Flow { u.clone() } else { vec![] };
            prop_assert_eq!(sysw.contains(p, &x, &ww, 1e-9).unwrap(), b.system.contains(p, &x, &uu, &ww, 1e-9));
            prop_assert_eq!(sysw.violation(p, &x, &ww).unwrap(), b.system.violation(p, &x, &uu, &ww));
            let sel = Selector::Index(0);
            prop_assert_eq!(
                sysw.map_select(p, &x, &ww, 1e-9, &sel).unwrap(),
                b.system.map_select(p, &x, &uu, &ww, 1e-9, &sel)
            );
        }
    }

    #[test]
    fn min_norm_is_dominated(x2 in -24.2..-14.01f64) {
        let p = BouncingBallParams::default();
        let b = builtin::<f64>("bouncing-ball").unwrap();
        let ctx = VerifyOptions::<f64>::default().context(b.system.clone(), b.certificate.as_ref().unwrap()).unwrap();
        let x = [0.0, x2];
        let s = regulation_set(&ctx, &x, RegulationKind::Jump, 1e-10).unwrap();
        let u = min_norm_select(&s).unwrap();
        let kd = b.feedback("bkd").unwrap().law(Phase::Jump).eval(&x).unwrap();
        prop_assert!(u[0].abs() <= kd[0].abs() + 1e-9);
        prop_assert!((u[0] - p.kappa_md(&x)).abs() <= 1e-9);
        let (lo, hi) = p.regulation_interval(x2);
        for k in 0..=10 {
            let v = lo + (hi - lo) * k as f64 / 10.0;
            prop_assert!(u[0].abs() <= v.abs() + 1e-9);
        }
    }
}
