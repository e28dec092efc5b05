//! TOML run configuration: a built-in system with parameter overrides, or a custom
//! system written with the expression grammar of [`crate::expr`].
//!
//! ```toml
//! [system]
//! builtin = "bouncing-ball"
//! feedback = "kmd"
//! params = { h_min = 9.5 }
//!
//! [simulation]
//! horizon_t = 20.0
//! seed = 7
//! ```
//!
//! A custom system replaces `builtin` with `[system.custom]`. Constraints are
//! strings `"lhs <= rhs"`, `"lhs >= rhs"`, `"lhs == rhs"` or a bare `"h"` meaning
//! `h <= 0`, over `x1..xn`, `u1..um`, `w1..wd` (plain `x`, `u`, `w` when the block
//! has one entry) and user constants.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::expr::{Expr, Scope};
use crate::hybrid::{ClosedFormLaw, FeedbackPair, HybridSystemUW, PhaseData, Selection, SetValuedMap};
use crate::rclf::{RclfCertificate, Theorem, VerifyOptions};
use crate::scalar::Real;
use crate::sets::{BoxSet, ConstraintSet, Dependence, ScalarConstraint};
use crate::simulator::SimConfig;
use crate::synthesis::SynthesisConfig;
use crate::systems::{bouncing_ball, planar_system, robot_arm, BuiltinSystem, SYSTEM_IDS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSection,
    pub simulation: SimConfig,
    pub verification: VerificationSection,
    pub synthesis: SynthesisConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub builtin: Option<String>,
    /// Registered feedback name; the system's default when absent.
    pub feedback: Option<String>,
    /// Overrides of the built-in's parameter struct.
    pub params: Option<toml::Table>,
    pub custom: Option<CustomSystem>,
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerificationSection {
    pub theorem: Theorem,
    /// Grid spacing in every state direction.
    pub grid: f64,
    pub tol: f64,
    pub attest_linear_growth: bool,
    pub input_per_dim: usize,
    pub w_per_dim: usize,
    pub map_per_dim: usize,
}

impl Default for VerificationSection {
    fn default() -> Self {
        let o = VerifyOptions::<f64>::default();
        VerificationSection {
            theorem: o.theorem,
            grid: 0.01,
            tol: o.tol,
            attest_linear_growth: o.attest_linear_growth,
            input_per_dim: o.input_per_dim,
            w_per_dim: o.w_per_dim,
            map_per_dim: o.map_per_dim,
        }
    }
}

impl VerificationSection {
    pub fn options<T: Real>(&self) -> VerifyOptions<T> {
        VerifyOptions {
            theorem: self.theorem,
            attest_linear_growth: self.attest_linear_growth,
            input_per_dim: self.input_per_dim,
            w_per_dim: self.w_per_dim,
            map_per_dim: self.map_per_dim,
            tol: T::lit(self.tol),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxSpec {
    fn build<T: Real>(&self, what: &str) -> Result<BoxSet<T>> {
        if self.lo.len() != self.hi.len() {
            return Err(Error::Config(format!("{what}: lo has {} entries, hi has {}", self.lo.len(), self.hi.len())));
        }
        if let Some(i) = (0..self.lo.len()).find(|&i| !(self.lo[i] <= self.hi[i])) {
            return Err(Error::Config(format!("{what}: lo[{i}] = {} exceeds hi[{i}] = {}", self.lo[i], self.hi[i])));
        }
        Ok(BoxSet::new(self.lo.iter().map(|&v| T::lit(v)).collect(), self.hi.iter().map(|&v| T::lit(v)).collect()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseSpec {
    /// Disjunction of conjunctions.
    pub set: Vec<Vec<String>>,
    /// Selections of the map, each `n` expressions; the map is their hull when `convex`.
    pub map: Vec<Vec<String>>,
    pub convex: bool,
    pub u: BoxSpec,
    pub w: BoxSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackSpec {
    #[serde(default = "custom_name")]
    pub name: String,
    #[serde(default)]
    pub kappa_c: Vec<String>,
    #[serde(default)]
    pub kappa_d: Vec<String>,
}

fn custom_name() -> String {
    "custom".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSpec {
    pub v: String,
    pub r: f64,
    pub r_star: f64,
    pub rho_c: String,
    pub rho_d: String,
    #[serde(default = "half")]
    pub sigma: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSystem {
    #[serde(default = "custom_name")]
    pub name: String,
    pub n: usize,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
    pub flow: PhaseSpec,
    pub jump: PhaseSpec,
    #[serde(default)]
    pub feedback: Vec<FeedbackSpec>,
    pub certificate: Option<CertificateSpec>,
    /// Target set `K` over `x`.
    pub target: Option<Vec<Vec<String>>>,
    /// Sampling box for the grid checks.
    pub bbox: BoxSpec,
    pub x0: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(p: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn validate(&self) -> Result<()> {
        self.simulation.validate()?;
        let v = &self.verification;
        if !(v.grid > 0.0) || !(v.tol > 0.0) {
            return Err(Error::Config(format!("verification grid ({}) and tol ({}) must be positive", v.grid, v.tol)));
        }
        match (&self.system.builtin, &self.system.custom) {
            (Some(_), Some(_)) => Err(Error::Config("give either system.builtin or system.custom, not both".into())),
            (None, Some(_)) if self.system.params.is_some() => {
                Err(Error::Config("system.params applies to built-in systems only".into()))
            }
            _ => Ok(()),
        }
    }

    /// SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).unwrap_or_default();
        Sha256::digest(json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn system_id(&self) -> String {
        match (&self.system.builtin, &self.system.custom) {
            (_, Some(c)) => c.name.clone(),
            (Some(b), _) => b.clone(),
            _ => SYSTEM_IDS[0].to_string(),
        }
    }

    /// Parameter struct of built-in `id`: the configured overrides when the config
    /// names that system, defaults otherwise.
    pub fn builtin_params<P: serde::de::DeserializeOwned + Default>(&self, id: &str) -> Result<P> {
        if self.system.custom.is_none() && self.system.builtin.as_deref() == Some(id) {
            params(self.system.params.as_ref())
        } else {
            Ok(P::default())
        }
    }

    /// Builds the configured system; the first built-in when nothing is named.
    pub fn build<T: Real>(&self) -> Result<BuiltinSystem<T>> {
        let mut b = match &self.system.custom {
            Some(c) => c.build()?,
            None => build_builtin(&self.system_id(), self.system.params.as_ref())?,
        };
        if let Some(x0) = &self.system.x0 {
            if x0.len() != b.system.n {
                return Err(Error::Config(format!("x0 has {} entries, the state has {}", x0.len(), b.system.n)));
            }
            b.default_x0 = x0.iter().map(|&v| T::lit(v)).collect();
        }
        if let Some(name) = &self.system.feedback {
            let fb = b.feedback(name)?.clone();
            b.feedbacks.retain(|f| f.name != *name);
            b.feedbacks.insert(0, fb);
        }
        Ok(b)
    }
}

fn params<P: serde::de::DeserializeOwned + Default>(t: Option<&toml::Table>) -> Result<P> {
    match t {
        None => Ok(P::default()),
        Some(t) => toml::Value::Table(t.clone()).try_into().map_err(|e| Error::Config(format!("system.params: {e}"))),
    }
}

pub fn build_builtin<T: Real>(id: &str, p: Option<&toml::Table>) -> Result<BuiltinSystem<T>> {
    match id {
        "bouncing-ball" => bouncing_ball(&params(p)?),
        "robot-arm" => robot_arm(&params(p)?),
        "planar" => planar_system(&params(p)?),
        _ => Err(Error::Config(format!("unknown system `{}` (known: {})", id, SYSTEM_IDS.join(", ")))),
    }
}

/// `"a <= b"`, `"a >= b"`, `"a == b"` or `"h"` as `h <= 0` expressions.
fn split_relation(s: &str) -> Vec<String> {
    for (op, flip) in [("<=", false), (">=", true)] {
        if let Some((a, b)) = s.split_once(op) {
            let (a, b) = (a.trim(), b.trim());
            return vec![if flip { format!("({b}) - ({a})") } else { format!("({a}) - ({b})") }];
        }
    }
    if let Some((a, b)) = s.split_once("==") {
        let (a, b) = (a.trim(), b.trim());
        return vec![format!("({a}) - ({b})"), format!("({b}) - ({a})")];
    }
    vec![s.to_string()]
}

struct Blocks {
    n: usize,
    m: usize,
    d: usize,
}

impl Blocks {
    fn dependence(&self, e: &Expr) -> Dependence {
        let u: Vec<usize> = (self.n..self.n + self.m).collect();
        let w: Vec<usize> = (self.n + self.m..self.n + self.m + self.d).collect();
        match (e.depends_on(&u), e.depends_on(&w)) {
            (false, false) => Dependence::State,
            (true, false) if e.is_affine_in(&u) => Dependence::InputAffine,
            (false, true) if e.is_affine_in(&w) => Dependence::DisturbanceAffine,
            _ => Dependence::General,
        }
    }
}

impl CustomSystem {
    fn scope(&self, m: usize, d: usize) -> Scope {
        let mut s = Scope::new();
        s.push_block("x", self.n, Some("x")).push_block("u", m, Some("u")).push_block("w", d, Some("w"));
        for (k, v) in &self.constants {
            s.constant(k, *v);
        }
        s
    }

    fn constraint_set<T: Real>(&self, clauses: &[Vec<String>], scope: &Scope, blocks: &Blocks) -> Result<ConstraintSet<T>> {
        let mut set = ConstraintSet::empty(scope.len());
        for clause in clauses {
            let mut cs = Vec::new();
            for src in clause {
                for h in split_relation(src) {
                    let e = Expr::parse(&h, scope).map_err(|e| Error::Config(format!("constraint `{src}`: {e}")))?;
                    let dep = blocks.dependence(&e);
                    cs.push(ScalarConstraint::new(src.clone(), Arc::new(e)).with_dep(dep));
                }
            }
            set = set.with_clause(cs);
        }
        Ok(set)
    }

    fn phase<T: Real>(&self, spec: &PhaseSpec, what: &str) -> Result<PhaseData<T>> {
        let (u, w) = (spec.u.build::<T>(&format!("{what}.u"))?, spec.w.build::<T>(&format!("{what}.w"))?);
        let blocks = Blocks { n: self.n, m: u.dim(), d: w.dim() };
        let scope = self.scope(u.dim(), w.dim());
        let set = self.constraint_set(&spec.set, &scope, &blocks)?;
        if spec.map.is_empty() {
            return Err(Error::Config(format!("{what}.map needs at least one selection")));
        }
        let mut sels = Vec::new();
        for (k, comps) in spec.map.iter().enumerate() {
            if comps.len() != self.n {
                return Err(Error::Config(format!("{what}.map[{k}] has {} components, n = {}", comps.len(), self.n)));
            }
            let es = comps
                .iter()
                .map(|c| Expr::parse(c, &scope).map_err(|e| Error::Config(format!("{what}.map[{k}] `{c}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            sels.push(Selection::new(format!("{what}[{k}]"), move |z: &[T]| es.iter().map(|e| e.eval(z)).collect()));
        }
        Ok(PhaseData::new(set, SetValuedMap::new(sels, spec.convex), u, w))
    }

    fn state_exprs(&self, srcs: &[String], what: &str) -> Result<Vec<Expr>> {
        let scope = self.scope(0, 0);
        srcs.iter()
            .map(|s| Expr::parse(s, &scope).map_err(|e| Error::Config(format!("{what} `{s}`: {e}"))))
            .collect()
    }

    pub fn build<T: Real>(&self) -> Result<BuiltinSystem<T>> {
        let flow = self.phase::<T>(&self.flow, "flow")?;
        let jump = self.phase::<T>(&self.jump, "jump")?;
        let (m_c, m_d) = (flow.u.dim(), jump.u.dim());
        let sys = Arc::new(HybridSystemUW::new(self.name.clone(), self.n, flow, jump)?);

        let mut feedbacks = Vec::new();
        for fb in &self.feedback {
            let kc = self.state_exprs(&fb.kappa_c, "kappa_c")?;
            let kd = self.state_exprs(&fb.kappa_d, "kappa_d")?;
            if kc.len() != m_c || kd.len() != m_d {
                return Err(Error::Config(format!(
                    "feedback `{}`: kappa_c/kappa_d have {}/{} components, inputs are {}/{}",
                    fb.name,
                    kc.len(),
                    kd.len(),
                    m_c,
                    m_d
                )));
            }
            let lc = ClosedFormLaw::new("kappa_c", m_c, move |x: &[T]| kc.iter().map(|e| e.eval(x)).collect());
            let ld = ClosedFormLaw::new("kappa_d", m_d, move |x: &[T]| kd.iter().map(|e| e.eval(x)).collect());
            feedbacks.push(FeedbackPair::new(fb.name.clone(), Arc::new(lc), Arc::new(ld)));
        }
        if feedbacks.is_empty() {
            feedbacks.push(FeedbackPair::zero(m_c, m_d));
        }

        let certificate = match &self.certificate {
            None => None,
            Some(c) => {
                let mut es = self.state_exprs(&[c.v.clone(), c.rho_c.clone(), c.rho_d.clone()], "certificate")?;
                let rd = es.pop().unwrap();
                let rc = es.pop().unwrap();
                let v = es.pop().unwrap();
                Some(RclfCertificate::new(
                    Arc::new(v),
                    T::lit(c.r),
                    T::lit(c.r_star),
                    move |x: &[T]| rc.eval(x),
                    move |x: &[T]| rd.eval(x),
                    T::lit(c.sigma),
                )?)
            }
        };
        let k = match &self.target {
            None => None,
            Some(cl) => Some(self.constraint_set(cl, &self.scope(0, 0), &Blocks { n: self.n, m: 0, d: 0 })?),
        };
        let bbox = self.bbox.build::<T>("bbox")?;
        if bbox.dim() != self.n {
            return Err(Error::Config(format!("bbox has dimension {}, n = {}", bbox.dim(), self.n)));
        }
        let default_x0 = match &self.x0 {
            Some(v) if v.len() == self.n => v.iter().map(|&a| T::lit(a)).collect(),
            Some(v) => return Err(Error::Config(format!("x0 has {} entries, n = {}", v.len(), self.n))),
            None => bbox.center(),
        };
        Ok(BuiltinSystem {
            id: self.name.clone(),
            system: sys,
            certificate,
            feedbacks,
            k,
            bbox,
            anchors: Vec::new(),
            default_x0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid::{close_loop, Phase, TerminationReason};
    use crate::simulator::simulate;

    const BALL_TOML: &str = r#"
[system.custom]
name = "plain-ball"
n = 2
constants = { g = 9.81, e = 0.8 }
bbox = { lo = [-1, -20], hi = [13, 20] }
x0 = [5, 0]

[system.custom.flow]
set = [["x1 >= 0"]]
map = [["x2", "-g"]]

[system.custom.jump]
set = [["x1 == 0", "x2 <= 0"]]
map = [["x1", "-w * x2"]]
w = { lo = [0.8], hi = [0.9] }

[simulation]
horizon_t = 3.0
seed = 1
"#;

    #[test]
    fn custom_ball_simulates() {
        let cfg = RunConfig::from_toml_str(BALL_TOML).unwrap();
        let b = cfg.build::<f64>().unwrap();
        assert_eq!(b.id, "plain-ball");
        let sysw = close_loop(b.system.clone(), b.default_feedback().clone()).unwrap();
        let sol = simulate(&sysw, &b.default_x0, &cfg.simulation).unwrap();
        assert_eq!(sol.termination, TerminationReason::HorizonReached);
        assert!(sol.jumps() >= 1);
        let (pre, post) = sol.arc.jump_pair(0);
        let w = sol.disturbance.w_d[0][0];
        assert!((post[1] + w * pre[1]).abs() < 1e-12);
        let phi = b.system.phi_w(Phase::Jump, &[0.0, -3.0], &[], 1e-9).unwrap();
        assert_eq!(phi.intervals(), vec![(0.8, 0.9)]);
    }

    #[test]
    fn builtin_overrides() {
        let cfg = RunConfig::from_toml_str("[system]\nbuiltin = \"bouncing-ball\"\nfeedback = \"kmd\"\nparams = { h_min = 9.5 }\n").unwrap();
        let b = cfg.build::<f64>().unwrap();
        assert_eq!(b.default_feedback().name, "kmd");
        let bad = RunConfig::from_toml_str("[system]\nbuiltin = \"bouncing-ball\"\nparams = { e1 = 0.7, e2 = 0.95 }\n").unwrap();
        assert!(matches!(bad.build::<f64>(), Err(Error::InvalidParams(_))));
        let typo = RunConfig::from_toml_str("[system]\nbuiltin = \"bouncing-ball\"\nparams = { hmin = 9.5 }\n").unwrap();
        assert!(matches!(typo.build::<f64>(), Err(Error::Config(_))));
    }

    #[test]
    fn config_errors() {
        assert!(RunConfig::from_toml_str("[simulation]\nstep_min = -1.0\n").is_err());
        assert!(RunConfig::from_toml_str("[nope]\n").is_err());
        let unknown = RunConfig::from_toml_str("[system]\nbuiltin = \"pendulum\"\n").unwrap();
        assert!(matches!(unknown.build::<f64>(), Err(Error::Config(_))));
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        assert_eq!(a.digest(), b.digest());
        b.simulation.seed = 9;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn relations() {
        assert_eq!(split_relation("x1 >= 0"), vec!["(0) - (x1)"]);
        assert_eq!(split_relation("a == b").len(), 2);
        assert_eq!(split_relation("x1 - 2"), vec!["x1 - 2"]);
    }
}
