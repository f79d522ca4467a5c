use anyhow::{anyhow, Result};
use fracemb::exponents::classify_potentials;
use fracemb::{PotentialFamily, SpaceParams};
use serde::Serialize;

use crate::config::Settings;
use crate::output::{cell, Output};
use crate::UsageError;

/// Exponent ranges at one fractional order; `null` marks an absent or
/// unbounded endpoint.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub s: f64,
    pub two_star: f64,
    pub q1_lo: Option<f64>,
    pub q1_hi: Option<f64>,
    pub q2_lower: Option<f64>,
    pub single_lo: Option<f64>,
    pub single_hi: Option<f64>,
    pub delta0: Option<f64>,
    pub delta_inf: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutput {
    pub command: &'static str,
    #[serde(rename = "N")]
    pub n: usize,
    pub family: PotentialFamily,
    pub rows: Vec<SweepRow>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn run(settings: &Settings, out: &mut Output) -> Result<SweepOutput> {
    let family = settings.family_or(PotentialFamily::example_exponential());
    let grid = settings.s_grid.clone().unwrap_or_else(|| (1..10).map(|i| 0.5 + 0.05 * i as f64).collect());
    let mut rows = Vec::new();
    for &s in &grid {
        let p = SpaceParams::new(settings.n, s).map_err(|e| anyhow!(UsageError(e.to_string())))?;
        let rep = classify_potentials(&family, &p).map_err(|e| anyhow!(UsageError(e.to_string())))?;
        rows.push(SweepRow {
            s,
            two_star: p.two_star,
            q1_lo: rep.q1_interval.map(|i| i.lo),
            q1_hi: rep.q1_interval.and_then(|i| finite(i.hi)),
            q2_lower: rep.q2_lower,
            single_lo: rep.q_single_interval.map(|i| i.lo),
            single_hi: rep.q_single_interval.and_then(|i| finite(i.hi)),
            delta0: rep.delta0,
            delta_inf: rep.delta_inf,
        });
    }
    let opt = |x: Option<f64>| x.map_or(String::new(), cell);
    let csv: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                cell(r.s),
                cell(r.two_star),
                opt(r.q1_lo),
                opt(r.q1_hi),
                opt(r.q2_lower),
                opt(r.single_lo),
                opt(r.single_hi),
                opt(r.delta0),
                opt(r.delta_inf),
            ]
        })
        .collect();
    out.csv("sweep.csv", &["s", "two_star", "q1_lo", "q1_hi", "q2_lower", "single_lo", "single_hi", "delta0", "delta_inf"], &csv)?;
    let result = SweepOutput { command: "sweep", n: settings.n, family, rows };
    out.json("sweep.json", &result)?;
    Ok(result)
}
