use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use invhyb::config::{build_builtin, RunConfig};
use invhyb::hybrid::{close_loop, FeedbackPair, HybridSystemW, Phase, SolutionPair};
use invhyb::rclf::{all_required_pass, run_suite, RclfContext, Theorem, VerificationReport};
use invhyb::simulator::{check_invariance, simulate, write_csv, InvarianceReport, JumpChoice, RunSummary, SimConfig};
use invhyb::synthesis::{synthesize, Synthesized};
use invhyb::systems::{
    arm_initial_conditions, peak_heights, planar_initial_conditions, ArmParams, BouncingBallParams, BuiltinSystem,
    SYSTEM_IDS,
};
use invhyb::Error;

use crate::output::{OutDir, RunManifest};
use crate::{Cli, Command, Experiment, Global, JumpArg, SystemArgs, TheoremArg};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(m: impl Into<String>) -> Self {
        CliError { code: 2, message: m.into() }
    }

    pub fn runtime(m: impl Into<String>) -> Self {
        CliError { code: 3, message: m.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_)
            | Error::InvalidParams(_)
            | Error::InvalidSimConfig(_)
            | Error::InvalidInitialState(_)
            | Error::Expr(_)
            | Error::Dimension(_) => 2,
            Error::NotVerified(_) => 1,
            _ => 3,
        };
        CliError { code, message: e.to_string() }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Invariance tolerance used by `reproduce`.
const INV_TOL: f64 = 1e-6;

pub fn run(cli: &Cli) -> CliResult<u8> {
    let g = &cli.global;
    match &cli.command {
        Command::ListSystems => list_systems(),
        Command::Simulate { sys, x0, horizon_t, horizon_j, jump_selector, require_invariant, inv_tol } => {
            let mut cfg = resolve(g, sys)?;
            if let Some(t) = horizon_t {
                cfg.simulation.horizon_t = *t;
            }
            if let Some(j) = horizon_j {
                cfg.simulation.horizon_j = *j;
            }
            if let Some(j) = jump_selector {
                cfg.simulation.jump_selector = jump_choice(*j);
            }
            if let Some(x0) = x0 {
                cfg.system.x0 = Some(x0.clone());
            }
            cfg.validate()?;
            cmd_simulate(g, &cfg, *require_invariant, *inv_tol)
        }
        Command::Verify { sys, theorem, attest_linear_growth } => {
            let mut cfg = resolve(g, sys)?;
            if let Some(t) = theorem {
                cfg.verification.theorem = theorem_of(*t);
            }
            cfg.verification.attest_linear_growth |= attest_linear_growth;
            cmd_verify(g, &cfg)
        }
        Command::Synthesize { sys, theorem, force } => {
            let mut cfg = resolve(g, sys)?;
            if let Some(t) = theorem {
                cfg.synthesis.theorem = theorem_of(*t);
            }
            cfg.synthesis.force |= force;
            cmd_synthesize(g, &cfg)
        }
        Command::Reproduce { experiment, feedbacks, runs } => {
            let cfg = resolve(g, &SystemArgs::default())?;
            match experiment {
                Experiment::BouncingBall => reproduce_ball(g, &cfg, feedbacks.as_deref()),
                Experiment::RobotArm => reproduce_arm(g, &cfg),
                Experiment::Planar => reproduce_planar(g, &cfg, *runs),
            }
        }
    }
}

fn theorem_of(t: TheoremArg) -> Theorem {
    match t {
        TheoremArg::PreInvariance => Theorem::PreInvariance,
        TheoremArg::Invariance => Theorem::Invariance,
    }
}

fn jump_choice(j: JumpArg) -> JumpChoice {
    match j {
        JumpArg::First => JumpChoice::First,
        JumpArg::Uniform => JumpChoice::Uniform,
    }
}

/// Config file, then command-line overrides.
fn resolve(g: &Global, sys: &SystemArgs) -> CliResult<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = &sys.system {
        if cfg.system.custom.is_some() {
            return Err(CliError::config("--system conflicts with the custom system in the config file"));
        }
        if cfg.system.builtin.as_deref() != Some(s.as_str()) {
            cfg.system.params = None;
            cfg.system.x0 = None;
        }
        cfg.system.builtin = Some(s.clone());
    }
    if let Some(f) = &sys.feedback {
        cfg.system.feedback = Some(f.clone());
    }
    if let Some(s) = g.seed {
        cfg.simulation.seed = s;
    }
    if let Some(t) = g.tol {
        cfg.verification.tol = t;
        cfg.simulation.event_tol = t;
    }
    if let Some(r) = g.grid {
        cfg.verification.grid = r;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// The system, without resolving the feedback name (which may be `min-norm`).
fn build(cfg: &RunConfig) -> CliResult<BuiltinSystem<f64>> {
    let mut c = cfg.clone();
    c.system.feedback = None;
    Ok(c.build::<f64>()?)
}

fn synthesized(cfg: &RunConfig, b: &BuiltinSystem<f64>) -> CliResult<Synthesized<f64>> {
    let cert = b
        .certificate
        .clone()
        .ok_or_else(|| CliError::config(format!("system `{}` has no certificate to synthesize from", b.id)))?;
    let ctx = cfg.verification.options::<f64>().context(b.system.clone(), &cert)?;
    Ok(synthesize(ctx, &cfg.synthesis, &b.grid(cfg.verification.grid), &b.feedbacks)?)
}

fn feedback(cfg: &RunConfig, b: &BuiltinSystem<f64>) -> CliResult<FeedbackPair<f64>> {
    match cfg.system.feedback.as_deref() {
        None => Ok(b.default_feedback().clone()),
        Some("min-norm") => Ok(synthesized(cfg, b)?.feedback),
        Some(n) => Ok(b.feedback(n)?.clone()),
    }
}

fn list_systems() -> CliResult<u8> {
    for id in SYSTEM_IDS {
        let b = build_builtin::<f64>(id, None)?;
        let fbs: Vec<&str> = b.feedbacks.iter().map(|f| f.name.as_str()).collect();
        println!(
            "{id:<14} n={}  feedbacks: {}, min-norm  certificate: {}  target K: {}",
            b.system.n,
            fbs.join(", "),
            if b.certificate.is_some() { "yes" } else { "no" },
            if b.k.is_some() { "yes" } else { "no" },
        );
    }
    Ok(0)
}

struct Run {
    sol: SolutionPair<f64>,
    summary: RunSummary,
}

fn run_one(b: &BuiltinSystem<f64>, sysw: &HybridSystemW<f64>, fb: &str, x0: &[f64], sim: &SimConfig, inv_tol: f64) -> CliResult<Run> {
    let sol = simulate(sysw, x0, sim)?;
    let comps = sysw.state_set(Phase::Jump).clauses.len();
    let mut summary = RunSummary::new(&b.id, fb, &sol, comps);
    if let Some(cert) = &b.certificate {
        summary = summary.with_check(check_invariance("M_r", &sol, &cert.sublevel(), inv_tol));
    }
    if let Some(k) = &b.k {
        summary = summary.with_check(check_invariance("K", &sol, k, inv_tol));
    }
    Ok(Run { sol, summary })
}

fn csv_file(out: &OutDir, name: &str, sol: &SolutionPair<f64>) -> CliResult<PathBuf> {
    out.write_with(name, |w| write_csv(sol, w).map_err(CliError::from))
}

fn print_summary(s: &RunSummary) {
    println!(
        "{} [{}]: {:?}, {} jumps (per jump-set component {:?}), flow time {:.6}",
        s.system, s.feedback, s.termination, s.jumps, s.impact_count_per_jumpset, s.flow_time
    );
    for c in &s.invariance_checks {
        println!(
            "  invariance {}: {} (worst {:.3e} at t = {:.6}, j = {})",
            c.name,
            if c.ok { "ok" } else { "VIOLATED" },
            c.worst_violation,
            c.at_t,
            c.at_j
        );
    }
    if let Some(d) = &s.diagnostic {
        println!("  note: {d}");
    }
}

fn cmd_simulate(g: &Global, cfg: &RunConfig, require_invariant: bool, inv_tol: f64) -> CliResult<u8> {
    let b = build(cfg)?;
    let fb = feedback(cfg, &b)?;
    let sysw = close_loop(b.system.clone(), fb.clone())?;
    let run = run_one(&b, &sysw, &fb.name, &b.default_x0, &cfg.simulation, inv_tol)?;
    print_summary(&run.summary);
    let out = OutDir::create(&g.out)?;
    let stem = format!("{}_{}", b.id, fb.name);
    let files = vec![
        csv_file(&out, &format!("{stem}.csv"), &run.sol)?,
        out.write_json(&format!("{stem}_summary.json"), &run.summary)?,
    ];
    out.finish(RunManifest::new("simulate", &b.id, cfg.digest(), cfg.simulation.seed), files)?;
    Ok(if require_invariant && !run.summary.invariant { 1 } else { 0 })
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    system: &'a str,
    feedback: &'a str,
    theorem: Theorem,
    grid: f64,
    all_required_pass: bool,
    reports: &'a [VerificationReport],
}

fn print_reports(reports: &[VerificationReport]) {
    println!("{:<18} {:>6} {:>9} {:>8} {:>14}  worst point", "condition", "pass", "required", "points", "worst");
    for r in reports {
        println!(
            "{:<18} {:>6} {:>9} {:>8} {:>14.6e}  {:?}",
            r.condition, r.pass, r.required, r.grid_size, r.worst_residual, r.worst_point
        );
        for n in &r.notes {
            println!("{:<18} {n}", "");
        }
    }
}

fn cmd_verify(g: &Global, cfg: &RunConfig) -> CliResult<u8> {
    let b = build(cfg)?;
    let fb = feedback(cfg, &b)?;
    let opts = cfg.verification.options::<f64>();
    let grid = b.grid(cfg.verification.grid);
    let reports = run_suite(b.system.clone(), b.certificate.as_ref(), Some(&fb), b.k.as_ref(), &grid, &opts)?;
    print_reports(&reports);
    let ok = all_required_pass(&reports);
    println!("{}: {}", b.id, if ok { "all required checks pass" } else { "REQUIRED CHECKS FAIL" });
    let out = OutDir::create(&g.out)?;
    let doc = VerifyOutput {
        system: &b.id,
        feedback: &fb.name,
        theorem: cfg.verification.theorem,
        grid: cfg.verification.grid,
        all_required_pass: ok,
        reports: &reports,
    };
    let files = vec![out.write_json(&format!("verify_{}.json", b.id), &doc)?];
    out.finish(RunManifest::new("verify", &b.id, cfg.digest(), cfg.simulation.seed), files)?;
    Ok(if ok { 0 } else { 1 })
}

fn cmd_synthesize(g: &Global, cfg: &RunConfig) -> CliResult<u8> {
    let b = build(cfg)?;
    let syn = synthesized(cfg, &b)?;
    print_reports(&syn.reports);
    let ctx: RclfContext<f64> = cfg.verification.options::<f64>().context(b.system.clone(), b.certificate.as_ref().unwrap())?;
    let grid = b.grid(cfg.verification.grid);
    let mut rows = Vec::new();
    for (p, tag) in [(Phase::Flow, "flow"), (Phase::Jump, "jump")] {
        let law = syn.feedback.law(p);
        if law.dim() == 0 {
            continue;
        }
        for x in grid.interior(ctx.regions.m(p)) {
            rows.push((tag, x.clone(), law.eval(&x)?));
        }
    }
    let out = OutDir::create(&g.out)?;
    let n = b.system.n;
    let table = out.write_with(&format!("synthesize_{}_table.csv", b.id), |w| {
        let mut head = vec!["phase".to_string()];
        head.extend((1..=n).map(|i| format!("x{i}")));
        let m = rows.iter().map(|r| r.2.len()).max().unwrap_or(0);
        head.extend((1..=m).map(|i| format!("u{i}")));
        let io = |e: std::io::Error| CliError::runtime(e.to_string());
        writeln!(w, "{}", head.join(",")).map_err(io)?;
        for (tag, x, u) in &rows {
            let cells: Vec<String> = x.iter().chain(u).map(|v| v.to_string()).collect();
            writeln!(w, "{tag},{}", cells.join(",")).map_err(io)?;
        }
        Ok(())
    })?;
    let desc = out.write_json(&format!("synthesize_{}.json", b.id), &syn.descriptor)?;
    println!("{} table rows written; digest {}", rows.len(), syn.descriptor.verification_digest);
    out.finish(RunManifest::new("synthesize", &b.id, cfg.digest(), cfg.simulation.seed), vec![table, desc])?;
    Ok(0)
}

#[derive(Serialize)]
struct BallComparison {
    seed: u64,
    feedbacks: [String; 2],
    impacts_kd: usize,
    impacts_kmd: usize,
    all_peaks_in_range: bool,
    peaks: [Vec<f64>; 2],
    runs: Vec<RunSummary>,
}

/// Config restricted to one built-in, keeping its overrides when it is the configured system.
fn for_builtin(cfg: &RunConfig, id: &str) -> RunConfig {
    let mut c = cfg.clone();
    if c.system.custom.is_some() || c.system.builtin.as_deref() != Some(id) {
        c.system = Default::default();
        c.system.builtin = Some(id.into());
    }
    c.system.feedback = None;
    c
}

fn reproduce_ball(g: &Global, cfg: &RunConfig, names: Option<&[String]>) -> CliResult<u8> {
    let cfg = for_builtin(cfg, "bouncing-ball");
    let p: BouncingBallParams = cfg.builtin_params("bouncing-ball")?;
    let b = build(&cfg)?;
    let names: Vec<String> = names.map_or(vec!["bkd".into(), "kmd".into()], |n| n.to_vec());
    if names.len() != 2 {
        return Err(CliError::config("--feedbacks takes exactly two names"));
    }
    let fbs = names
        .iter()
        .map(|n| if n == "min-norm" { Ok(synthesized(&cfg, &b)?.feedback) } else { Ok(b.feedback(n)?.clone()) })
        .collect::<CliResult<Vec<_>>>()?;
    let runs = fbs
        .par_iter()
        .map(|fb| {
            let sysw = close_loop(b.system.clone(), fb.clone())?;
            run_one(&b, &sysw, &fb.name, &b.default_x0, &cfg.simulation, INV_TOL)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let peaks: Vec<Vec<f64>> = runs.iter().map(|r| peak_heights(&r.sol, p.gamma)).collect();
    let in_range = peaks.iter().flatten().all(|&h| h >= p.h_min - INV_TOL && h <= p.h_max + INV_TOL);
    let out = OutDir::create(&g.out)?;
    let mut files = Vec::new();
    for (r, n) in runs.iter().zip(&names) {
        print_summary(&r.summary);
        files.push(csv_file(&out, &format!("reproduce_bouncing-ball_{n}.csv"), &r.sol)?);
    }
    let doc = BallComparison {
        seed: cfg.simulation.seed,
        feedbacks: [names[0].clone(), names[1].clone()],
        impacts_kd: runs[0].summary.impact_count_per_jumpset[0],
        impacts_kmd: runs[1].summary.impact_count_per_jumpset[0],
        all_peaks_in_range: in_range,
        peaks: [peaks[0].clone(), peaks[1].clone()],
        runs: runs.iter().map(|r| r.summary.clone()).collect(),
    };
    println!(
        "ground impacts: {} = {}, {} = {}; all peaks in [{}, {}]: {}",
        names[0], doc.impacts_kd, names[1], doc.impacts_kmd, p.h_min, p.h_max, in_range
    );
    let ok = in_range && runs.iter().all(|r| r.summary.invariant);
    files.push(out.write_json("reproduce_bouncing-ball.json", &doc)?);
    out.finish(RunManifest::new("reproduce", "bouncing-ball", cfg.digest(), cfg.simulation.seed), files)?;
    Ok(if ok { 0 } else { 1 })
}

#[derive(Serialize)]
struct Verdict {
    x0: Vec<f64>,
    seed: u64,
    invariant: bool,
    checks: Vec<InvarianceReport>,
    jumps: usize,
    final_norm: f64,
    /// Arm: smallest pre-jump velocity. Planar: largest change of `|x|` over a jump.
    jump_statistic: Option<f64>,
}

fn fan_out(
    b: &BuiltinSystem<f64>,
    cfg: &RunConfig,
    x0s: &[Vec<f64>],
    sim_for: impl Fn(usize) -> SimConfig + Sync,
    stat: impl Fn(&SolutionPair<f64>) -> Option<f64> + Sync,
) -> CliResult<Vec<(Run, Verdict)>> {
    let fb = b.default_feedback().clone();
    let sysw = Arc::new(close_loop(b.system.clone(), fb.clone())?);
    let _ = cfg;
    x0s.par_iter()
        .enumerate()
        .map(|(i, x0)| {
            let sim = sim_for(i);
            let run = run_one(b, &sysw, &fb.name, x0, &sim, INV_TOL)?;
            let v = Verdict {
                x0: x0.clone(),
                seed: sim.seed,
                invariant: run.summary.invariant,
                checks: run.summary.invariance_checks.clone(),
                jumps: run.sol.jumps(),
                final_norm: run.sol.arc.last_state().iter().map(|v| v * v).sum::<f64>().sqrt(),
                jump_statistic: stat(&run.sol),
            };
            Ok((run, v))
        })
        .collect()
}

fn write_fan(g: &Global, cfg: &RunConfig, id: &str, results: Vec<(Run, Verdict)>) -> CliResult<u8> {
    let out = OutDir::create(&g.out)?;
    let mut files = Vec::new();
    let mut verdicts = Vec::new();
    for (i, (run, v)) in results.into_iter().enumerate() {
        println!(
            "{id} #{i} x0 = {:?}: {:?}, {} jumps, invariant: {}, final |x| = {:.4e}",
            v.x0, run.summary.termination, v.jumps, v.invariant, v.final_norm
        );
        files.push(csv_file(&out, &format!("reproduce_{id}_{i}.csv"), &run.sol)?);
        verdicts.push(v);
    }
    let ok = verdicts.iter().all(|v| v.invariant);
    files.push(out.write_json(&format!("reproduce_{id}.json"), &verdicts)?);
    out.finish(RunManifest::new("reproduce", id, cfg.digest(), cfg.simulation.seed), files)?;
    Ok(if ok { 0 } else { 1 })
}

fn reproduce_arm(g: &Global, cfg: &RunConfig) -> CliResult<u8> {
    let mut cfg = for_builtin(cfg, "robot-arm");
    cfg.simulation.horizon_t = 30.0;
    let p: ArmParams = cfg.builtin_params("robot-arm")?;
    let b = build(&cfg)?;
    let x0s = arm_initial_conditions(&p);
    let sim = cfg.simulation.clone();
    let res = fan_out(&b, &cfg, &x0s, |_| sim.clone(), |sol| {
        (0..sol.jumps()).map(|k| sol.arc.jump_pair(k).0[1]).reduce(f64::min)
    })?;
    write_fan(g, &cfg, "robot-arm", res)
}

fn reproduce_planar(g: &Global, cfg: &RunConfig, runs: usize) -> CliResult<u8> {
    let mut cfg = for_builtin(cfg, "planar");
    cfg.simulation.horizon_t = 10.0;
    cfg.simulation.jump_selector = JumpChoice::Uniform;
    let b = build(&cfg)?;
    let x0s = planar_initial_conditions(runs);
    let base = cfg.simulation.clone();
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let res = fan_out(&b, &cfg, &x0s, |i| SimConfig { seed: base.seed + i as u64, ..base.clone() }, |sol| {
        (0..sol.jumps())
            .map(|k| {
                let (a, c) = sol.arc.jump_pair(k);
                (norm(a) - norm(c)).abs()
            })
            .reduce(f64::max)
    })?;
    write_fan(g, &cfg, "planar", res)
}
