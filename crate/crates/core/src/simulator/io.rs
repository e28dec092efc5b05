use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid::{DisturbanceSignal, FlowInterval, HybridArc, HybridTimeDomain, SolutionPair, TerminationReason};
use crate::scalar::Real;

use super::invariance::InvarianceReport;

fn bad(msg: String) -> Error {
    Error::Config(format!("solution csv: {msg}"))
}

/// Writes `t,j,x1..xn,phase,wc1..,wd1..`. The last row of an interval that ends
/// in a jump has phase `jump` and carries that jump's `w_d`.
pub fn write_csv<T: Real, W: Write>(sol: &SolutionPair<T>, out: W) -> Result<()> {
    let n = sol.arc.state_dim();
    let nc = sol.disturbance.w_c.first().map_or(0, |w| w.len());
    let nd = sol.disturbance.w_d.first().map_or(0, |w| w.len());
    let mut wr = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string(), "j".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.push("phase".into());
    header.extend((1..=nc).map(|i| format!("wc{i}")));
    header.extend((1..=nd).map(|i| format!("wd{i}")));
    wr.write_record(&header)?;
    let jumps = sol.jumps();
    for (k, samples) in sol.arc.samples.iter().enumerate() {
        for (s, (t, x)) in samples.iter().enumerate() {
            let is_jump = k < jumps && s + 1 == samples.len();
            let mut row = vec![format!("{}", t.as_f64()), k.to_string()];
            row.extend(x.iter().map(|v| format!("{}", v.as_f64())));
            row.push(if is_jump { "jump" } else { "flow" }.into());
            row.extend(sol.disturbance.w_c[k].iter().map(|v| format!("{}", v.as_f64())));
            if is_jump {
                row.extend(sol.disturbance.w_d[k].iter().map(|v| format!("{}", v.as_f64())));
            } else {
                row.extend(std::iter::repeat_n(String::new(), nd));
            }
            wr.write_record(&row)?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Arc and disturbance read back from [`write_csv`] output.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSolution {
    pub arc: HybridArc<f64>,
    pub disturbance: DisturbanceSignal<f64>,
}

pub fn read_csv<R: Read>(input: R) -> Result<CsvSolution> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    let col = |p: &str| header.iter().filter(|h| h.starts_with(p) && h[p.len()..].parse::<usize>().is_ok()).count();
    let (n, nc, nd) = (col("x"), col("wc"), col("wd"));
    if header.len() != 3 + n + nc + nd || &header[0] != "t" || &header[1] != "j" {
        return Err(bad(format!("unexpected csv header {:?}", header)));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("bad number {s:?}: {e}")));
    let mut samples: Vec<Vec<(f64, Vec<f64>)>> = Vec::new();
    let mut w_c = Vec::new();
    let mut w_d = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let t = num(&rec[0])?;
        let j: usize = rec[1].parse().map_err(|e| bad(format!("bad j {:?}: {e}", &rec[1])))?;
        let x = (0..n).map(|i| num(&rec[2 + i])).collect::<Result<Vec<_>>>()?;
        if j == samples.len() {
            samples.push(Vec::new());
            w_c.push((0..nc).map(|i| num(&rec[3 + n + i])).collect::<Result<Vec<_>>>()?);
        } else if j + 1 != samples.len() {
            return Err(bad(format!("jump counter goes from {} to {j}", samples.len().saturating_sub(1))));
        }
        samples[j].push((t, x));
        if &rec[2 + n] == "jump" {
            w_d.push((0..nd).map(|i| num(&rec[3 + n + nc + i])).collect::<Result<Vec<_>>>()?);
        }
    }
    let intervals = samples
        .iter()
        .enumerate()
        .map(|(j, s)| FlowInterval { j, t_start: s[0].0, t_end: s[s.len() - 1].0 })
        .collect();
    Ok(CsvSolution {
        arc: HybridArc { domain: HybridTimeDomain { intervals }, samples },
        disturbance: DisturbanceSignal { w_c, w_d },
    })
}

/// Per-run JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub system: String,
    pub feedback: String,
    pub termination: TerminationReason,
    pub jumps: usize,
    pub flow_time: f64,
    pub impact_count_per_jumpset: Vec<usize>,
    /// Every invariance check passed (vacuously true without checks).
    pub invariant: bool,
    pub invariance_checks: Vec<InvarianceReport>,
    pub diagnostic: Option<String>,
}

impl RunSummary {
    pub fn new<T: Real>(system: &str, feedback: &str, sol: &SolutionPair<T>, components: usize) -> Self {
        RunSummary {
            system: system.to_string(),
            feedback: feedback.to_string(),
            termination: sol.termination,
            jumps: sol.jumps(),
            flow_time: sol.flow_time().as_f64(),
            impact_count_per_jumpset: sol.jumps_per_component(components),
            invariant: true,
            invariance_checks: Vec::new(),
            diagnostic: sol.diagnostic.clone(),
        }
    }

    pub fn with_check(mut self, r: InvarianceReport) -> Self {
        self.invariant &= r.ok;
        self.invariance_checks.push(r);
        self
    }
}
