use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hybrid::{
    DisturbanceSignal, FlowInterval, HybridArc, HybridSystemW, HybridTimeDomain, JumpSelector, Phase, Selector,
    SolutionPair, TerminationReason,
};
use crate::scalar::{vec, Real};
use crate::sets::{tangent_halfspace_test, BoxUnion};

use super::classify::{classify_termination, StopState};
use super::config::{DisturbancePolicy, Priority, SimConfig};

/// Looser tolerance standing in for the closure of `Pi_c`.
const CLOSURE_FACTOR: f64 = 100.0;
/// Consecutive flow attempts with negligible progress before giving up.
const MAX_STALLS: usize = 3;

/// Simulates the closed loop from `x0` until the `(T, J)` budget runs out or no
/// continuation exists. RNG is ChaCha8 seeded from `cfg.seed`.
pub fn simulate<T: Real>(sys: &HybridSystemW<T>, x0: &[T], cfg: &SimConfig) -> Result<SolutionPair<T>> {
    cfg.validate()?;
    if x0.len() != sys.n() {
        return Err(Error::Dimension(format!("x0 has length {}, state dimension is {}", x0.len(), sys.n())));
    }
    let e = Engine::new(sys, cfg);
    let closure = e.tol * T::lit(CLOSURE_FACTOR);
    if !(sys.state_set(Phase::Flow).contains(x0, closure) || sys.state_set(Phase::Jump).contains(x0, e.tol)) {
        return Err(Error::InvalidInitialState(vec::to_f64(x0)));
    }
    e.run(x0)
}

enum Flow {
    /// Moved forward; the interval continues or an event was reached.
    Moved,
    /// No flow possible from the current state.
    Blocked,
    Escape,
    Failed(String),
}

struct Engine<'a, T> {
    sys: &'a HybridSystemW<T>,
    cfg: &'a SimConfig,
    tol: T,
    selector: Selector<T>,
    jump_sel: JumpSelector,
    rng: ChaCha8Rng,
    t: T,
    x: Vec<T>,
    h: T,
    intervals: Vec<FlowInterval<T>>,
    samples: Vec<Vec<(T, Vec<T>)>>,
    w_c: Vec<Vec<T>>,
    w_d: Vec<Vec<T>>,
    components: Vec<usize>,
    diagnostic: Option<String>,
}

impl<'a, T: Real> Engine<'a, T> {
    fn new(sys: &'a HybridSystemW<T>, cfg: &'a SimConfig) -> Self {
        Engine {
            sys,
            cfg,
            tol: T::lit(cfg.event_tol),
            selector: cfg.flow_selector.to_selector(),
            jump_sel: cfg.jump_selector.into(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            t: T::zero(),
            x: Vec::new(),
            h: T::lit(cfg.step_init),
            intervals: Vec::new(),
            samples: Vec::new(),
            w_c: Vec::new(),
            w_d: Vec::new(),
            components: Vec::new(),
            diagnostic: None,
        }
    }

    fn run(mut self, x0: &[T]) -> Result<SolutionPair<T>> {
        let t_end = T::lit(self.cfg.horizon_t);
        self.x = x0.to_vec();
        self.start_interval();
        let pi_c = self.sys.state_set(Phase::Flow);
        let pi_d = self.sys.state_set(Phase::Jump);
        let mut last_phase = Phase::Flow;
        let mut stalls = 0;
        let termination = loop {
            if self.t >= t_end {
                break TerminationReason::HorizonReached;
            }
            let in_d = pi_d.contains(&self.x, self.tol);
            if in_d && self.cfg.priority == Priority::JumpFirst
                && self.jump()? {
                    if let Some(r) = self.after_jump() {
                        break r;
                    }
                    last_phase = Phase::Jump;
                    stalls = 0;
                    continue;
                }
            let t_before = self.t;
            let outcome = if pi_c.contains(&self.x, self.tol) { self.flow(t_end, in_d) } else { Flow::Blocked };
            match outcome {
                Flow::Moved => {
                    last_phase = Phase::Flow;
                    if self.t - t_before <= T::lit(10.0 * self.cfg.step_min) {
                        stalls += 1;
                        if stalls >= MAX_STALLS {
                            self.note(format!("flow stalls at the flow-set boundary near t = {}", self.t));
                            break TerminationReason::EndedFlowNoContinuation;
                        }
                    } else {
                        stalls = 0;
                    }
                }
                Flow::Escape => {
                    self.note(format!("state left every bounded region near t = {}", self.t));
                    break TerminationReason::EndedFlowFiniteEscape;
                }
                Flow::Failed(msg) => {
                    self.note(msg);
                    break TerminationReason::EndedFlowNoContinuation;
                }
                Flow::Blocked => {
                    if in_d && self.cfg.priority == Priority::FlowFirst && self.jump()? {
                        if let Some(r) = self.after_jump() {
                            break r;
                        }
                        last_phase = Phase::Jump;
                        continue;
                    }
                    let closure = self.tol * T::lit(CLOSURE_FACTOR);
                    break classify_termination(&StopState {
                        budget_exhausted: false,
                        finite: vec::all_finite(&self.x),
                        in_flow_set: pi_c.contains(&self.x, self.tol),
                        in_flow_closure: pi_c.contains(&self.x, closure),
                        in_jump_set: in_d,
                        last_phase,
                    });
                }
            }
        };
        self.intervals.last_mut().unwrap().t_end = self.t;
        Ok(SolutionPair {
            arc: HybridArc { domain: HybridTimeDomain { intervals: self.intervals }, samples: self.samples },
            disturbance: DisturbanceSignal { w_c: self.w_c, w_d: self.w_d },
            termination,
            jump_components: self.components,
            diagnostic: self.diagnostic,
        })
    }

    fn note(&mut self, msg: String) {
        log::debug!("{}: {}", self.sys.open.name, msg);
        self.diagnostic = Some(msg);
    }

    fn draw(&mut self, policy: &DisturbancePolicy, phi: &BoxUnion<T>) -> Option<Vec<T>> {
        match policy {
            DisturbancePolicy::Constant(v) => {
                let w = vec::from_f64(v);
                phi.contains(&w, self.tol).then_some(w)
            }
            DisturbancePolicy::UniformPerJump | DisturbancePolicy::UniformPerInterval => phi.sample(&mut self.rng),
        }
    }

    /// Opens interval `j` at the current state and draws its `w_c`.
    fn start_interval(&mut self) {
        let j = self.intervals.len();
        self.intervals.push(FlowInterval { j, t_start: self.t, t_end: self.t });
        self.samples.push(vec![(self.t, self.x.clone())]);
        let wb = &self.sys.open.flow.w;
        let w = match self.sys.phi_w(Phase::Flow, &self.x, self.tol) {
            Ok(phi) => self.draw(&self.cfg.w_c.clone(), &phi),
            Err(_) => None,
        };
        self.w_c.push(w.unwrap_or_else(|| wb.center()));
    }

    /// Applies one jump if some `w_d` and jump-map element exist. Kappa failures are
    /// recorded as a diagnostic and treated as "no jump".
    fn jump(&mut self) -> Result<bool> {
        let x = self.x.clone();
        let u = match self.sys.kappa(Phase::Jump, &x) {
            Ok(u) => u,
            Err(e) => {
                self.note(format!("kappa_d failed at {:?}: {}", vec::to_f64(&x), e));
                return Ok(false);
            }
        };
        let phi = self.sys.open.phi_w(Phase::Jump, &x, &u, self.tol)?;
        let wd = match self.draw(&self.cfg.w_d.clone(), &phi) {
            Some(w) => w,
            None => return Ok(false),
        };
        let z = self.sys.open.z(&x, &u, &wd);
        let next = match self.sys.open.jump.map.select_jump(&z, self.tol, self.jump_sel, &mut self.rng) {
            Some(v) => v,
            None => return Ok(false),
        };
        let comp = self.sys.state_set(Phase::Jump).satisfied_clauses(&x, self.tol).first().copied().unwrap_or(0);
        self.intervals.last_mut().unwrap().t_end = self.t;
        self.w_d.push(wd);
        self.components.push(comp);
        self.x = next;
        self.start_interval();
        Ok(true)
    }

    fn after_jump(&mut self) -> Option<TerminationReason> {
        if self.intervals.len() > self.cfg.horizon_j {
            return Some(TerminationReason::HorizonReached);
        }
        if !vec::all_finite(&self.x) {
            return Some(TerminationReason::EndedFlowFiniteEscape);
        }
        let closure = self.tol * T::lit(CLOSURE_FACTOR);
        let inside = self.sys.state_set(Phase::Flow).contains(&self.x, closure)
            || self.sys.state_set(Phase::Jump).contains(&self.x, self.tol);
        (!inside).then_some(TerminationReason::EndedJumpOutside)
    }

    fn field(&self, y: &[T]) -> Option<Vec<T>> {
        let w = self.w_c.last().unwrap();
        self.sys.map_select(Phase::Flow, y, w, self.tol, &self.selector).ok().flatten()
    }

    fn in_flow(&self, y: &[T]) -> bool {
        let w = self.w_c.last().unwrap();
        self.sys.contains(Phase::Flow, y, w, self.tol).unwrap_or(false)
    }

    fn rk4(&self, x: &[T], h: T) -> Option<Vec<T>> {
        let half = h * T::lit(0.5);
        let k1 = self.field(x)?;
        let k2 = self.field(&vec::axpy(x, half, &k1))?;
        let k3 = self.field(&vec::axpy(x, half, &k2))?;
        let k4 = self.field(&vec::axpy(x, h, &k3))?;
        let six = h / T::lit(6.0);
        Some(
            (0..x.len())
                .map(|i| x[i] + six * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]))
                .collect(),
        )
    }

    fn escaped(&self, y: &[T]) -> bool {
        !vec::all_finite(y) || vec::norm_inf(y) > T::lit(self.cfg.escape_radius)
    }

    /// Flows from the current state until an event, the horizon, or a failure.
    /// Events: leaving the flow set, and (jump-first, when not starting in the jump
    /// set) entering the jump set. Events are bracketed to `event_tol / 10` in state.
    fn flow(&mut self, t_end: T, started_in_d: bool) -> Flow {
        let watch_d = self.cfg.priority == Priority::JumpFirst && !started_in_d;
        let pi_c = self.sys.state_set(Phase::Flow);
        let pi_d = self.sys.state_set(Phase::Jump);
        match self.field(&self.x) {
            Some(f) => {
                if let Ok(false) = tangent_halfspace_test(pi_c, &self.x, &f, self.tol) {
                    return Flow::Blocked;
                }
            }
            None => return Flow::Blocked,
        }
        let event = |e: &Self, y: &[T]| !e.in_flow(y) || (watch_d && pi_d.contains(y, e.tol));
        let (h_min, h_max) = (T::lit(self.cfg.step_min), T::lit(self.cfg.step_max));
        let (atol, rtol) = (T::lit(self.cfg.atol), T::lit(self.cfg.rtol));
        let t0 = self.t;
        while self.t < t_end {
            let h = self.h.min(t_end - self.t);
            let full = self.rk4(&self.x, h);
            let halfway = self.rk4(&self.x, h * T::lit(0.5));
            let two = halfway.as_ref().and_then(|m| self.rk4(m, h * T::lit(0.5)));
            let (full, two) = match (full, two) {
                (Some(a), Some(b)) => (a, b),
                _ => return if self.t > t0 { Flow::Moved } else { Flow::Blocked },
            };
            if self.escaped(&two) {
                return Flow::Escape;
            }
            let err = vec::norm_inf(&vec::sub(&full, &two));
            let scale = atol + rtol * vec::norm_inf(&self.x);
            let factor = if err > T::zero() {
                (T::lit(0.9) * (scale / err).powf(T::lit(0.2))).max(T::lit(0.2)).min(T::lit(2.0))
            } else {
                T::lit(2.0)
            };
            if err > scale {
                self.h = h * factor;
                if self.h < h_min {
                    return Flow::Failed(format!("step underflow at t = {} (local error {})", self.t, err));
                }
                continue;
            }
            if !event(self, &two) {
                self.t = self.t + h;
                self.x = two;
                self.push();
                if h == self.h {
                    self.h = (h * factor).min(h_max);
                }
                continue;
            }
            // bracket the event inside [0, h]
            let start = self.x.clone();
            let (mut lo, mut hi) = (T::zero(), h);
            let (mut x_lo, mut x_hi) = (start.clone(), two);
            let width = self.tol * T::lit(0.1);
            for _ in 0..200 {
                if vec::norm_inf(&vec::sub(&x_hi, &x_lo)) <= width {
                    break;
                }
                let mid = (lo + hi) * T::lit(0.5);
                if mid <= lo || mid >= hi {
                    break;
                }
                match self.rk4(&start, mid) {
                    Some(xm) if event(self, &xm) => {
                        hi = mid;
                        x_hi = xm;
                    }
                    Some(xm) => {
                        lo = mid;
                        x_lo = xm;
                    }
                    None => {
                        hi = mid;
                    }
                }
            }
            let (s, y) = if watch_d && pi_d.contains(&x_hi, self.tol) { (hi, x_hi) } else { (lo, x_lo) };
            if s > T::zero() {
                self.t = self.t + s;
                self.x = y;
                self.push();
            }
            return if self.t > t0 { Flow::Moved } else { Flow::Blocked };
        }
        Flow::Moved
    }

    fn push(&mut self) {
        let s = (self.t, self.x.clone());
        self.samples.last_mut().unwrap().push(s);
    }
}
