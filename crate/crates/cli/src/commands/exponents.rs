use anyhow::{anyhow, Result};
use fracemb::exponents::{classify_potentials, EmbeddingReport, Interval};
use fracemb::{PotentialFamily, SpaceParams};
use serde::Serialize;

use crate::config::Settings;
use crate::output::Output;
use crate::UsageError;

/// Closed-form ranges stated for the four worked examples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PublishedRanges {
    pub example: u8,
    pub q1_interval: Interval,
    pub q2_lower: f64,
    pub single_interval: Option<Interval>,
    pub statement: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExponentsOutput {
    pub command: &'static str,
    #[serde(rename = "N")]
    pub n: usize,
    pub s: f64,
    pub example: Option<u8>,
    pub family: PotentialFamily,
    pub report: EmbeddingReport,
    pub published: Option<PublishedRanges>,
    pub matches_published: Option<bool>,
    pub q: Option<f64>,
    pub q_admitted: Option<bool>,
}

pub fn example_family(example: u8, settings: &Settings, a: Option<f64>, b: Option<f64>, d: Option<f64>) -> Result<PotentialFamily> {
    Ok(match example {
        1 => PotentialFamily::Power { a: a.unwrap_or(0.0), b: b.unwrap_or(0.0) },
        2 => {
            let b = b.unwrap_or(0.0);
            PotentialFamily::ZeroV { alpha0: b, alpha_inf: b }
        }
        3 => PotentialFamily::example_exponential(),
        4 => PotentialFamily::Mixed { a: a.unwrap_or(1.0), b: b.unwrap_or(1.0), d: d.unwrap_or(0.0) },
        k => return Err(anyhow!(UsageError(format!("--example must be 1, 2, 3 or 4, got {k} (N = {})", settings.n)))),
    })
}

/// The ranges as printed in the examples, evaluated directly from their
/// closed forms.
pub fn published_ranges(example: u8, family: &PotentialFamily, p: &SpaceParams) -> Option<PublishedRanges> {
    let n = p.nf();
    let s = p.s;
    let ns = n - 2.0 * s;
    let open = |lo: f64, hi: f64| Interval { lo, hi };
    match (example, family) {
        (1, PotentialFamily::Power { a, b }) => {
            let hi1 = 2.0 * (1.0 + (b + 2.0 * s) / ns);
            let lo2 = 1f64.max(2.0 * (1.0 + (b - a) / ns));
            let single = (*a > -2.0 * s).then(|| open(lo2, hi1));
            Some(PublishedRanges {
                example,
                q1_interval: open(1.0, hi1),
                q2_lower: lo2,
                single_interval: single,
                statement: match single {
                    Some(i) => format!("compact into L^q_K for every {} < q < {}", i.lo, i.hi),
                    None => format!("compact into L^q1_K + L^q2_K for 1 < q1 < {hi1} and q2 > {lo2}"),
                },
            })
        }
        (2, PotentialFamily::ZeroV { alpha0, alpha_inf }) => {
            let hi1 = 2.0 * (n + alpha0) / ns;
            let lo2 = 1f64.max(2.0 * (n + alpha_inf) / ns);
            let single = (alpha_inf < alpha0).then(|| open(lo2, hi1));
            Some(PublishedRanges {
                example,
                q1_interval: open(1.0, hi1),
                q2_lower: lo2,
                single_interval: single,
                statement: format!("compact into L^q1_K + L^q2_K for 1 < q1 < {hi1} and q2 > {lo2}"),
            })
        }
        (3, _) => Some(PublishedRanges {
            example,
            q1_interval: open(1.0, p.two_star),
            q2_lower: 2.0,
            single_interval: Some(open(2.0, p.two_star)),
            statement: format!("compact into L^q_K for every 2 < q < {}", p.two_star),
        }),
        (4, _) => Some(PublishedRanges {
            example,
            q1_interval: open(1.0, f64::INFINITY),
            q2_lower: 1.0,
            single_interval: Some(open(1.0, f64::INFINITY)),
            statement: "compact for every q > 1".into(),
        }),
        _ => None,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a.is_infinite() && a == b) || (a - b).abs() <= 1e-12 * a.abs().max(1.0)
}

fn interval_close(a: Option<Interval>, b: Option<Interval>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => close(x.lo, y.lo) && close(x.hi, y.hi),
        (None, None) => true,
        _ => false,
    }
}

pub fn matches(report: &EmbeddingReport, published: &PublishedRanges) -> bool {
    interval_close(report.q1_interval, Some(published.q1_interval))
        && report.q2_lower.is_some_and(|l| close(l, published.q2_lower))
        && interval_close(report.q_single_interval, published.single_interval)
}

pub fn run(settings: &Settings, example: Option<u8>, a: Option<f64>, b: Option<f64>, d: Option<f64>, out: &mut Output) -> Result<ExponentsOutput> {
    let p = settings.space()?;
    let family = match example {
        Some(k) => example_family(k, settings, a, b, d)?,
        None => settings.family.clone().ok_or_else(|| anyhow!(UsageError("give --example or --family".into())))?,
    };
    let report = classify_potentials(&family, &p).map_err(|e| anyhow!(UsageError(e.to_string())))?;
    let published = example.and_then(|k| published_ranges(k, &family, &p));
    let matches_published = published.as_ref().map(|pr| matches(&report, pr));
    let q = settings.q;
    let q_admitted = q.map(|q| report.admits(q, q));
    let result = ExponentsOutput {
        command: "exponents",
        n: p.n,
        s: p.s,
        example,
        family,
        report,
        published,
        matches_published,
        q,
        q_admitted,
    };
    out.json("exponents.json", &result)?;
    Ok(result)
}
