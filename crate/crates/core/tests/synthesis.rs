use invhyb::hybrid::{close_loop, Phase};
use invhyb::rclf::{ClosedLoopCheck, RclfContext, VerifyOptions};
use invhyb::simulator::{simulate, SimConfig};
use invhyb::synthesis::*;
use invhyb::systems::{builtin, BouncingBallParams};

fn ball() -> (invhyb::systems::BuiltinSystem<f64>, RclfContext<f64>) {
    let b = builtin::<f64>("bouncing-ball").unwrap();
    let ctx = RclfContext::new(b.system.clone(), b.certificate.clone().unwrap()).unwrap();
    (b, ctx)
}

fn impact_grid(p: &BouncingBallParams, n: usize) -> Vec<Vec<f64>> {
    let (a, b) = (-p.u_max(), -(2.0 * p.gamma * p.h_min).sqrt());
    (0..n).map(|i| vec![0.0, a + (b - a) * i as f64 / (n - 1) as f64]).collect()
}

#[test]
fn ball_min_norm_matches_closed_form_on_200_points() {
    let (b, ctx) = ball();
    let p = BouncingBallParams::default();
    let syn = synthesize(ctx, &SynthesisConfig::default(), &b.grid(0.05), &b.feedbacks).unwrap();
    let law = syn.feedback.law(Phase::Jump);
    let mut worst: f64 = 0.0;
    for x in impact_grid(&p, 200) {
        worst = worst.max((law.eval(&x).unwrap()[0] - p.kappa_md(&x)).abs());
    }
    assert!(worst <= 1e-9, "max deviation {worst}");
}

#[test]
fn ball_min_norm_is_lipschitz_with_slope_e1() {
    let (b, ctx) = ball();
    let p = BouncingBallParams::default();
    let syn = synthesize(ctx, &SynthesisConfig::default(), &b.grid(0.05), &b.feedbacks).unwrap();
    let l = lipschitz_probe(syn.feedback.law(Phase::Jump).as_ref(), &impact_grid(&p, 400)).unwrap();
    assert!(l <= p.e1 + 1e-6, "L = {l}");
}

#[test]
fn min_norm_is_dominated_by_the_affine_feedback() {
    let (b, ctx) = ball();
    let p = BouncingBallParams::default();
    for x in impact_grid(&p, 50) {
        let s = regulation_set(&ctx, &x, RegulationKind::Jump, 1e-10).unwrap();
        let m = min_norm_select(&s).unwrap()[0];
        let kd = b.feedback("bkd").unwrap().kappa_d.eval(&x).unwrap()[0];
        assert!(m.abs() <= kd.abs() + 1e-9, "x = {x:?}: {m} > {kd}");
    }
}

#[test]
fn arm_min_norm_flow_law() {
    let a = builtin::<f64>("robot-arm").unwrap();
    let ctx = RclfContext::new(a.system.clone(), a.certificate.clone().unwrap()).unwrap();
    let grid = a.grid(0.05);
    let pts = grid.interior(&ctx.regions.m_c);
    assert!(pts.len() > 50);
    let syn = synthesize(ctx.clone(), &SynthesisConfig::default(), &grid, &a.feedbacks).unwrap();
    let law = syn.feedback.law(Phase::Flow);
    for x in &pts {
        let u = law.eval(x).unwrap();
        let g = gamma_c(&ctx, x, &u).unwrap();
        assert!(g <= 1e-9, "x = {x:?}: Gamma_c = {g}");
        let hand = -0.5 * x[0] - 2.0 * x[1];
        assert!(u[0].abs() <= hand.abs() + 1e-9, "x = {x:?}: |{}| > |{hand}|", u[0]);
    }
}

#[test]
fn synthesized_laws_pass_closed_loop_checks() {
    for (id, res) in [("bouncing-ball", 0.05), ("robot-arm", 0.02)] {
        let b = builtin::<f64>(id).unwrap();
        let cert = b.certificate.clone().unwrap();
        let ctx = RclfContext::new(b.system.clone(), cert.clone()).unwrap();
        let grid = b.grid(res);
        let syn = synthesize(ctx, &SynthesisConfig::default(), &grid, &b.feedbacks).unwrap();
        let sysw = close_loop(b.system.clone(), syn.feedback).unwrap();
        let opts = VerifyOptions::default();
        for r in ClosedLoopCheck::new(&sysw, &cert, &grid, &opts).lyapunov() {
            assert!(r.pass, "{id}: {r:?}");
        }
    }
}

#[test]
fn ball_simulates_under_the_synthesized_law() {
    let (b, ctx) = ball();
    let p = BouncingBallParams::default();
    let syn = synthesize(ctx, &SynthesisConfig::default(), &b.grid(0.05), &b.feedbacks).unwrap();
    let sysw = close_loop(b.system.clone(), syn.feedback).unwrap();
    let sol = simulate(&sysw, &b.default_x0, &SimConfig { seed: 3, ..Default::default() }).unwrap();
    for (_, x) in sol.arc.iter() {
        assert!(p.energy(x) >= p.gamma * p.h_min - 1e-6, "{x:?}");
    }
    assert!(sol.jumps() > 0);
}

#[test]
fn forced_synthesis_skips_checks() {
    let (b, ctx) = ball();
    let cfg = SynthesisConfig { force: true, ..Default::default() };
    let syn = synthesize(ctx, &cfg, &b.grid(0.05), &[]).unwrap();
    assert!(syn.reports.is_empty());
    assert!(syn.descriptor.forced);
    assert_eq!(syn.descriptor.verification_digest.len(), 64);
}
