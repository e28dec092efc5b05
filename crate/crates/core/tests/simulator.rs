use std::sync::Arc;

use invhyb::hybrid::{close_loop, ClosedFormLaw, FeedbackPair, Phase, TerminationReason, ZeroLaw};
use invhyb::simulator::{check_invariance, check_solution, read_csv, simulate, write_csv, JumpChoice, SimConfig};
use invhyb::systems::{arm_initial_conditions, builtin, peak_heights, ArmParams, BouncingBallParams};

#[test]
fn ball_stays_in_energy_band_across_seeds() {
    let b = builtin::<f64>("bouncing-ball").unwrap();
    let p = BouncingBallParams::default();
    let sysw = close_loop(b.system.clone(), b.feedback("bkd").unwrap().clone()).unwrap();
    for seed in 0..20 {
        let sol = simulate(&sysw, &[11.0, 0.0], &SimConfig { seed, ..Default::default() }).unwrap();
        assert_eq!(sol.termination, TerminationReason::HorizonReached, "seed {seed}");
        for (_, x) in sol.arc.iter() {
            let e = p.energy(x);
            assert!(e >= p.gamma * p.h_min - 1e-6 && e <= p.e_max() + 1e-6, "seed {seed}: E = {e}");
            assert!(x[0] >= -1e-6 && x[0] <= p.h_max + 1e-6, "seed {seed}: x = {x:?}");
        }
        for h in peak_heights(&sol, p.gamma) {
            assert!((p.h_min - 1e-6..=p.h_max + 1e-6).contains(&h), "seed {seed}: peak {h}");
        }
        let chk = check_solution(&sysw, &sol, 1e-9).unwrap();
        assert!(chk.ok(1e-6), "seed {seed}: {chk:?}");
    }
}

#[test]
fn arm_jumps_satisfy_the_jump_condition() {
    let b = builtin::<f64>("robot-arm").unwrap();
    let sysw = close_loop(b.system.clone(), b.default_feedback().clone()).unwrap();
    let sol = simulate(&sysw, &[0.0, 0.9], &SimConfig { horizon_t: 10.0, ..Default::default() }).unwrap();
    assert!(sol.jumps() >= 1);
    for k in 0..sol.jumps() {
        let (pre, post) = sol.arc.jump_pair(k);
        assert!(pre[0] >= -1e-6 && pre[1] >= 0.6 - 1e-6, "{pre:?}");
        let w = sol.disturbance.w_d[k][0];
        assert!((0.8..=0.9).contains(&w));
        assert!((post[1] + w * pre[1]).abs() < 1e-12);
    }
    let chk = check_solution(&sysw, &sol, 1e-9).unwrap();
    assert!(chk.ok(1e-6), "{chk:?}");
}

#[test]
fn wrong_sign_gains_leave_the_level_set() {
    let b = builtin::<f64>("robot-arm").unwrap();
    let cert = b.certificate.clone().unwrap();
    let law = ClosedFormLaw::new("flipped", 1, |x: &[f64]| vec![(0.5 * x[0] + 2.0 * x[1]).clamp(-10.0, 10.0)]);
    let fb = FeedbackPair::new("flipped", Arc::new(law), Arc::new(ZeroLaw(0)));
    let sysw = close_loop(b.system.clone(), fb).unwrap();
    let x0 = &arm_initial_conditions(&ArmParams::default())[2];
    let sol = simulate(&sysw, x0, &SimConfig { horizon_t: 10.0, ..Default::default() }).unwrap();
    let rep = check_invariance("M_r", &sol, &cert.sublevel(), 1e-6);
    assert!(!rep.ok && rep.worst_violation > 1e-3, "{rep:?}");

    let good = close_loop(b.system.clone(), b.default_feedback().clone()).unwrap();
    let sol = simulate(&good, x0, &SimConfig { horizon_t: 10.0, ..Default::default() }).unwrap();
    assert!(check_invariance("M_r", &sol, &cert.sublevel(), 1e-6).ok);
}

#[test]
fn csv_round_trip_preserves_the_solution() {
    let b = builtin::<f64>("bouncing-ball").unwrap();
    let sysw = close_loop(b.system.clone(), b.default_feedback().clone()).unwrap();
    let sol = simulate(&sysw, &[11.0, 0.0], &SimConfig { horizon_t: 8.0, seed: 4, ..Default::default() }).unwrap();
    let mut buf = Vec::new();
    write_csv(&sol, &mut buf).unwrap();
    let back = read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.arc.domain, sol.arc.domain);
    for (a, b) in back.arc.iter().zip(sol.arc.iter()) {
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
    assert_eq!(back.disturbance.w_d, sol.disturbance.w_d);
    let again = invhyb::SolutionPair { arc: back.arc, disturbance: back.disturbance, ..sol.clone() };
    assert!(check_solution(&sysw, &again, 1e-9).unwrap().ok(1e-6));
}

#[test]
fn same_seed_same_solution() {
    let p = builtin::<f64>("planar").unwrap();
    let sysw = close_loop(p.system.clone(), p.default_feedback().clone()).unwrap();
    let cfg = SimConfig { seed: 11, horizon_t: 6.0, jump_selector: JumpChoice::Uniform, ..Default::default() };
    let x0 = [0.0, 1.2];
    let a = simulate(&sysw, &x0, &cfg).unwrap();
    let b = simulate(&sysw, &x0, &cfg).unwrap();
    assert_eq!(a, b);
    let ball = builtin::<f64>("bouncing-ball").unwrap();
    let sysw = close_loop(ball.system.clone(), ball.default_feedback().clone()).unwrap();
    let a = simulate(&sysw, &[11.0, 0.0], &SimConfig { seed: 1, ..Default::default() }).unwrap();
    let b = simulate(&sysw, &[11.0, 0.0], &SimConfig { seed: 2, ..Default::default() }).unwrap();
    assert_ne!(a.disturbance.w_d, b.disturbance.w_d);
}

#[test]
fn solutions_have_valid_domains() {
    for id in ["bouncing-ball", "robot-arm", "planar"] {
        let b = builtin::<f64>(id).unwrap();
        let sysw = close_loop(b.system.clone(), b.default_feedback().clone()).unwrap();
        let sol = simulate(&sysw, &b.default_x0, &SimConfig { horizon_t: 5.0, ..Default::default() }).unwrap();
        sol.arc.domain.validate().unwrap();
        sol.arc.validate().unwrap();
        assert_eq!(sol.disturbance.w_d.len(), sol.jumps());
        assert_eq!(sol.disturbance.w_c.len(), sol.jumps() + 1);
        assert_eq!(sol.jump_components.len(), sol.jumps());
        // jumps happen from the jump set
        let d = sysw.state_set(Phase::Jump);
        for k in 0..sol.jumps() {
            assert!(d.contains(sol.arc.jump_pair(k).0, 1e-6), "{id} jump {k}");
        }
    }
}

#[test]
fn initial_state_outside_is_rejected() {
    let b = builtin::<f64>("bouncing-ball").unwrap();
    let sysw = close_loop(b.system.clone(), b.default_feedback().clone()).unwrap();
    assert!(matches!(simulate(&sysw, &[-1.0, 0.0], &SimConfig::default()), Err(invhyb::Error::InvalidInitialState(_))));
    assert!(matches!(simulate(&sysw, &[1.0], &SimConfig::default()), Err(invhyb::Error::Dimension(_))));
    let bad = SimConfig { step_min: -1.0, ..Default::default() };
    assert!(matches!(simulate(&sysw, &[11.0, 0.0], &bad), Err(invhyb::Error::InvalidSimConfig(_))));
}
