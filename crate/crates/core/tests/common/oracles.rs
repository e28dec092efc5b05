//! Oracle equivalence: closed-form or reduced computations against dense scans.
//! Each check panics with the first mismatch.

use std::sync::Arc;

use rayon::prelude::*;

use invhyb::config::RunConfig;
use invhyb::hybrid::{HybridSystemUW, Phase};
use invhyb::rclf::VerifyOptions;
use invhyb::rclf::InputSet;
use invhyb::synthesis::{base_set, gamma, regulation_set, RegulationKind, SRepr};
use invhyb::systems::{builtin, BouncingBallParams};

const SCAN: f64 = 1e-3;

/// Two clauses, each coupling the state with the input and the disturbance.
const COUPLED: &str = r#"
[system.custom]
name = "coupled"
n = 2
bbox = { lo = [-2, -2], hi = [2, 2] }

[system.custom.flow]
set = [["x1 >= -1", "u1 <= x1 + 0.5", "u1 >= x2 - 1", "w1 >= 0.3 * x1", "w1 <= x2 + 1"],
       ["x1 <= -0.5", "u1 >= 1 + x2", "w1 <= -0.5"]]
map = [["x2 + u1 * w1", "-x1 + w1"]]
u = { lo = [-2], hi = [2] }
w = { lo = [-1], hi = [1] }

[system.custom.jump]
set = [["x1 == 0", "u1 <= -x2", "w1 >= x2"]]
map = [["x1", "-w1 * x2 + u1"]]
u = { lo = [-1], hi = [1] }
w = { lo = [-1], hi = [1] }
"#;

fn coupled() -> Arc<HybridSystemUW<f64>> {
    RunConfig::from_toml_str(COUPLED).unwrap().build::<f64>().unwrap().system
}

fn scan(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if hi - lo < step {
        return if hi > lo { vec![lo, hi] } else { vec![lo] };
    }
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

fn near_edge(v: f64, edges: &[(f64, f64)]) -> bool {
    edges.iter().any(|&(a, b)| (v - a).abs() <= SCAN || (v - b).abs() <= SCAN)
}

fn states() -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for x1 in scan(-1.5, 1.5, 0.5) {
        for x2 in scan(-1.5, 1.5, 0.5) {
            out.push(vec![x1, x2]);
        }
    }
    out.push(vec![0.0, -0.4]);
    out.push(vec![0.0, 0.3]);
    out
}

fn check_projections(sys: &HybridSystemUW<f64>, p: Phase, xs: &[Vec<f64>]) -> usize {
    let d = sys.phase(p);
    let tol = 1e-9;
    let (ulo, uhi) = (d.u.lo[0], d.u.hi[0]);
    let (wlo, whi) = (d.w.lo[0], d.w.hi[0]);
    let ws = scan(wlo, whi, SCAN);
    // existence over w only needs to be as fine as the narrowest Phi interval
    let ws_coarse = scan(wlo, whi, 5.0 * SCAN);
    xs.par_iter().map(|x| {
        let mut compared = 0;
        let psi = sys.psi_u(p, x, tol).unwrap();
        let psi_iv = psi.intervals();
        for u in scan(ulo, uhi, SCAN) {
            let dense = ws_coarse.iter().any(|&w| sys.contains(p, x, &[u], &[w], tol));
            let closed = psi.contains(&[u], tol);
            if dense != closed && !near_edge(u, &psi_iv) {
                panic!("psi_u mismatch at x = {x:?}, u = {u}: dense {dense}, closed {closed}, {psi_iv:?}");
            }
            compared += 1;
            if (u * 1e3).round() as i64 % 50 == 0 {
                let phi = sys.phi_w(p, x, &[u], tol).unwrap();
                let phi_iv = phi.intervals();
                for &w in &ws {
                    let dense = sys.contains(p, x, &[u], &[w], tol);
                    let closed = phi.contains(&[w], tol);
                    if dense != closed && !near_edge(w, &phi_iv) {
                        panic!("phi_w mismatch at x = {x:?}, u = {u}, w = {w}: dense {dense}, closed {closed}, {phi_iv:?}");
                    }
                }
            }
        }
        compared
    })
    .sum()
}

pub fn psi_and_phi_match_dense_scans() {
    let sys = coupled();
    assert!(check_projections(&sys, Phase::Flow, &states()) > 50_000);
    let xs: Vec<Vec<f64>> = scan(-1.0, 1.0, 0.1).into_iter().map(|x2| vec![0.0, x2]).collect();
    check_projections(&sys, Phase::Jump, &xs);
}

pub fn builtin_projections_match_dense_scans() {
    let ball = builtin::<f64>("bouncing-ball").unwrap();
    let xs: Vec<Vec<f64>> = scan(-20.0, 0.0, 1.0).into_iter().map(|x2| vec![0.0, x2]).chain([vec![12.0, 3.0], vec![5.0, -1.0]]).collect();
    check_projections(&ball.system, Phase::Jump, &xs);
    let arm = builtin::<f64>("robot-arm").unwrap();
    let xs: Vec<Vec<f64>> = [[-0.3, 0.2], [0.0, 0.5], [0.2, 0.59], [0.2, 0.7]].iter().map(|x| x.to_vec()).collect();
    check_projections(&arm.system, Phase::Flow, &xs);
}

pub fn extreme_points_match_dense_disturbance_scan() {
    for id in ["bouncing-ball", "robot-arm"] {
        let b = builtin::<f64>(id).unwrap();
        let cert = b.certificate.clone().unwrap();
        let ctx = VerifyOptions::<f64>::default().context(b.system.clone(), &cert).unwrap();
        let sys = &b.system;
        let grid = b.grid(0.1);
        for p in [Phase::Flow, Phase::Jump] {
            let d = sys.phase(p);
            let pts = grid.interior(ctx.pi(p));
            let us = if d.u.dim() == 0 { vec![vec![]] } else { d.u.lattice(9) };
            let mut compared = 0;
            for x in pts.iter().step_by(7) {
                for u in &us {
                    let reduced = match p {
                        Phase::Flow => ctx.flow_sup(x, u).unwrap(),
                        Phase::Jump => ctx.jump_sup(x, u).unwrap(),
                    };
                    let phi = sys.phi_w(p, x, u, ctx.tol).unwrap();
                    let mut dense: Option<f64> = None;
                    for w in phi.lattice(1001) {
                        for xi in sys.map_extremes(p, x, u, &w, ctx.tol) {
                            let v = match p {
                                Phase::Flow => cert.gradient(x).iter().zip(&xi).map(|(a, b)| a * b).sum(),
                                Phase::Jump => cert.value(&xi),
                            };
                            dense = Some(dense.map_or(v, |m: f64| m.max(v)));
                        }
                    }
                    match (reduced, dense) {
                        (Some(r), Some(s)) => {
                            assert!(r >= s - 1e-9, "{id} {p:?} x = {x:?} u = {u:?}: reduced {r} < dense {s}");
                            assert!(r <= s + 1e-6 * (1.0 + s.abs()), "{id} {p:?} x = {x:?}: reduced {r} > dense {s}");
                            compared += 1;
                        }
                        (None, None) => {}
                        other => panic!("{id} {p:?} x = {x:?}: {other:?}"),
                    }
                }
            }
            assert!(compared > 0, "{id} {p:?}");
        }
    }
}

/// Sign changes of `Gamma(x, .)` on a fine scan, as intervals where `Gamma < 0`.
fn negative_runs(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut start: Option<f64> = None;
    let mut last = lo;
    for u in scan(lo, hi, step) {
        let neg = f(u) < 0.0;
        match (neg, start) {
            (true, None) => start = Some(u),
            (false, Some(s)) => {
                out.push((s, last));
                start = None;
            }
            _ => {}
        }
        last = u;
    }
    if let Some(s) = start {
        out.push((s, hi));
    }
    out
}

/// Negative runs of `g` on each interval of the base input set.
fn base_runs(ctx: &invhyb::RclfContext, x: &[f64], kind: RegulationKind, g: impl Fn(f64) -> f64, step: f64) -> Vec<(f64, f64)> {
    match base_set(ctx, x, kind).unwrap() {
        InputSet::Boxes(b) => b.intervals().into_iter().flat_map(|(lo, hi)| negative_runs(&g, lo, hi, step)).collect(),
        other => panic!("{other:?}"),
    }
}

fn compare_endpoints(got: &[(f64, f64)], scanned: &[(f64, f64)], step: f64, what: &str) {
    assert_eq!(got.len(), scanned.len(), "{what}: {got:?} vs {scanned:?}");
    for (a, b) in got.iter().zip(scanned) {
        assert!((a.0 - b.0).abs() <= step + 1e-9 && (a.1 - b.1).abs() <= step + 1e-9, "{what}: {a:?} vs {b:?}");
    }
}

pub fn regulation_endpoints_match_gamma_sign_changes() {
    let b = builtin::<f64>("bouncing-ball").unwrap();
    let p = BouncingBallParams::default();
    let ctx = VerifyOptions::<f64>::default().context(b.system.clone(), b.certificate.as_ref().unwrap()).unwrap();
    let step = 1e-4;
    let top = -(2.0 * p.gamma * p.h_min).sqrt();
    for x2 in scan(-p.u_max(), top, (top + p.u_max()) / 12.0) {
        let x = [0.0, x2];
        let g = |u: f64| gamma(&ctx, Phase::Jump, &x, &[u]).unwrap();
        let scanned = base_runs(&ctx, &x, RegulationKind::Jump, g, step);
        match regulation_set(&ctx, &x, RegulationKind::Jump, 1e-10).unwrap().repr {
            SRepr::Intervals(iv) => compare_endpoints(&iv, &scanned, step, &format!("ball x2 = {x2}")),
            other => panic!("{other:?}"),
        }
    }

    let arm = builtin::<f64>("robot-arm").unwrap();
    let ctx = VerifyOptions::<f64>::default().context(arm.system.clone(), arm.certificate.as_ref().unwrap()).unwrap();
    let pts = arm.grid(0.05).interior(&ctx.regions.m_c);
    assert!(!pts.is_empty());
    for x in pts.iter().step_by(5) {
        let g = |u: f64| gamma(&ctx, Phase::Flow, x, &[u]).unwrap();
        let scanned = base_runs(&ctx, x, RegulationKind::FlowPsi, g, step);
        match regulation_set(&ctx, x, RegulationKind::FlowPsi, 1e-10).unwrap().repr {
            SRepr::Intervals(iv) => compare_endpoints(&iv, &scanned, step, &format!("arm x = {x:?}")),
            SRepr::Empty => assert!(scanned.is_empty(), "arm x = {x:?}: {scanned:?}"),
            other => panic!("{other:?}"),
        }
    }
}

pub const ALL: [(&str, fn()); 4] = [
    ("psi_u/phi_w vs dense scans (coupled system)", psi_and_phi_match_dense_scans),
    ("psi_u/phi_w vs dense scans (built-ins)", builtin_projections_match_dense_scans),
    ("extreme points vs dense w-scan", extreme_points_match_dense_disturbance_scan),
    ("regulation endpoints vs Gamma sign changes", regulation_endpoints_match_gamma_sign_changes),
];
