use std::collections::BTreeMap;
use std::sync::Arc;

use anyhow::{anyhow, Result};
use clap::ValueEnum;
use fracemb::exponents::{classify_potentials, delta_inf, delta_zero};
use fracemb::report::VerifyReport;
use fracemb::verify::{self, BoundContext, End, NormSphere, Region, SupremumEstimate};
use fracemb::{spaces, Extrapolation, PotentialFamily, RadialFunction, RadialGrid, SpaceParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::Settings;
use crate::output::{cell, Output};
use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Campaign {
    Strauss,
    S0Decay,
    SinfDecay,
    Lemma41,
    Annulus,
}

impl Campaign {
    pub fn name(&self) -> &'static str {
        match self {
            Campaign::Strauss => "strauss",
            Campaign::S0Decay => "s0-decay",
            Campaign::SinfDecay => "sinf-decay",
            Campaign::Lemma41 => "lemma41",
            Campaign::Annulus => "annulus",
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub unconverged: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOutput {
    pub command: &'static str,
    pub campaign: Campaign,
    #[serde(rename = "N")]
    pub n: usize,
    pub s: f64,
    pub inputs: serde_json::Value,
    pub reports: Vec<VerifyReport>,
    pub summary: Summary,
    pub warnings: Vec<String>,
}

impl VerifyOutput {
    fn new(campaign: Campaign, p: &SpaceParams, inputs: serde_json::Value, reports: Vec<VerifyReport>) -> Self {
        let mut summary = Summary { total: reports.len(), ..Default::default() };
        let mut warnings = Vec::new();
        for r in &reports {
            if r.passed() {
                summary.passed += 1;
            } else {
                summary.failed += 1;
                warnings.push(format!("{} failed: value {} against bound {:?}", r.operation, r.value, r.bound));
            }
            if !r.converged {
                summary.unconverged += 1;
                warnings.push(format!("{} at {} did not converge", r.operation, r.inputs));
            }
        }
        VerifyOutput { command: "verify", campaign, n: p.n, s: p.s, inputs, reports, summary, warnings }
    }
}

pub fn run(campaign: Campaign, settings: &Settings, out: &mut Output) -> Result<VerifyOutput> {
    let p = settings.space()?;
    let result = match campaign {
        Campaign::Strauss => strauss(settings, &p, out)?,
        Campaign::S0Decay => decay(End::Zero, settings, &p, out)?,
        Campaign::SinfDecay => decay(End::Infinity, settings, &p, out)?,
        Campaign::Lemma41 => lemma41(settings, &p, out)?,
        Campaign::Annulus => annulus(settings, &p, out)?,
    };
    out.json("verify.json", &result)?;
    Ok(result)
}

fn grid(settings: &Settings, p: &SpaceParams) -> Result<Arc<RadialGrid>> {
    settings.solver.grid.build(p.n).map_err(|e| anyhow!(UsageError(e.to_string())))
}

fn gaussian(g: &Arc<RadialGrid>, a: f64, c: f64, w: f64) -> Result<RadialFunction> {
    Ok(RadialFunction::from_fn(g, |r| a * (-((r - c) / w).powi(2)).exp(), Extrapolation::ZeroBeyond)?)
}

fn random_bump(g: &Arc<RadialGrid>, rng: &mut ChaCha8Rng) -> Result<RadialFunction> {
    let a = 0.1 * 50f64.powf(rng.random::<f64>());
    let c = rng.random_range(0.0..3.0);
    let w = rng.random_range(0.5..1.5);
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    gaussian(g, sign * a, c, w)
}

/// Largest relative spread of the Strauss quotient tolerated across dilations.
pub const SCALE_INVARIANCE_TOL: f64 = 1e-2;

fn strauss(settings: &Settings, p: &SpaceParams, out: &mut Output) -> Result<VerifyOutput> {
    let v = settings.family_or(PotentialFamily::constant());
    let g = grid(settings, p)?;
    let c_disc = NormSphere::new(&g, &v, p)?.strauss_constant();
    let widths: Vec<f64> = (0..10).map(|i| 0.5 * 4f64.powf(i as f64 / 9.0)).collect();
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    let mut quotients = Vec::new();
    for &w in &widths {
        let u = gaussian(&g, 1.0, 0.0, w)?;
        let rep = spaces::strauss_check(&u, &v, p)?;
        quotients.push(rep.c_emp);
        rows.push(vec![cell(w), cell(rep.c_emp), cell(rep.c_hsv), cell(rep.r_max)]);
        reports.push(VerifyReport::new("strauss_check", json!({"width": w}), rep.c_hsv).upper(c_disc));
    }
    let (lo, hi) = quotients.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    reports.push(VerifyReport::new("strauss_scale_invariance", json!({"widths": widths}), hi / lo - 1.0).upper(SCALE_INVARIANCE_TOL));
    out.csv("strauss.csv", &["width", "c_emp", "c_hsv", "r_peak"], &rows)?;
    let inputs = json!({"family": v, "discrete_constant": c_disc});
    Ok(VerifyOutput::new(Campaign::Strauss, p, inputs, reports))
}

/// Allowance of the decay fit against the theoretical rate.
pub const SLOPE_TOL: f64 = 0.1;

fn decay(end: End, settings: &Settings, p: &SpaceParams, out: &mut Output) -> Result<VerifyOutput> {
    let (campaign, default_family, default_q, default_radii) = match end {
        End::Zero => (Campaign::S0Decay, PotentialFamily::constant(), 3.0, vec![0.1, 0.2, 0.4]),
        End::Infinity => (Campaign::SinfDecay, PotentialFamily::example_exponential(), 2.5, vec![2.0, 4.0, 8.0]),
    };
    let fam = settings.family_or(default_family);
    let q = settings.q.unwrap_or(default_q);
    let radii = settings.radii.clone().unwrap_or(default_radii);
    if radii.iter().any(|r| !(*r > 0.0)) {
        return Err(anyhow!(UsageError("radii must be positive".into())));
    }
    let series = verify::supremum_series(end, q, &radii, &fam, &fam, p, &settings.ascent)?;
    let op = match end {
        End::Zero => "estimate_S0",
        End::Infinity => "estimate_Sinf",
    };
    let mut reports: Vec<VerifyReport> = Vec::new();
    let mut order: Vec<&SupremumEstimate> = series.iter().collect();
    order.sort_by(|a, b| a.r.total_cmp(&b.r));
    for (i, est) in order.iter().enumerate() {
        let rep = VerifyReport::supremum(op, est, json!({}));
        // monotone in R: S0 nondecreasing, S∞ nonincreasing, with 1e-3 slack
        let rep = match (end, i) {
            (_, 0) => rep,
            (End::Zero, _) => rep.lower(order[i - 1].value * (1.0 - 1e-3)),
            (End::Infinity, _) => rep.upper(order[i - 1].value * (1.0 + 1e-3)),
        };
        reports.push(rep);
    }
    let rows: Vec<Vec<String>> =
        order.iter().map(|e| vec![cell(e.r), cell(e.value), e.converged.to_string(), e.iterations.to_string()]).collect();
    out.csv(&format!("{}.csv", campaign.name()), &["R", "estimate", "converged", "iterations"], &rows)?;

    let exps = classify_potentials(&fam, p).ok().map(|r| r.exponents);
    let delta = match (end, exps) {
        (End::Zero, Some(we)) => delta_zero(q, &we, p).ok(),
        (End::Infinity, Some(we)) => delta_inf(q, &we, p).ok(),
        _ => None,
    };
    let mut warnings = Vec::new();
    match verify::decay_rate_fit(&series, end) {
        Ok(fit) => {
            let inputs = json!({"end": end, "delta": delta, "points": fit.points, "intercept": fit.intercept});
            let rep = match end {
                End::Zero => VerifyReport::decay(&fit, delta, SLOPE_TOL, inputs),
                End::Infinity => VerifyReport::new("decay_rate_fit", inputs, fit.slope).upper(0.0),
            };
            reports.push(rep);
        }
        Err(e) => warnings.push(format!("decay fit skipped: {e}")),
    }
    let inputs = json!({"family": fam, "q": q, "radii": radii, "delta": delta, "ascent": settings.ascent});
    let mut result = VerifyOutput::new(campaign, p, inputs, reports);
    result.warnings.extend(warnings);
    Ok(result)
}

/// Region and weight exponent `α` for which `K / (|x|^α V^β)` stays bounded.
pub fn lemma41_scenario(which: usize, beta: f64) -> (PotentialFamily, Region, f64, f64) {
    match which {
        0 => (PotentialFamily::constant(), Region::Ball { r: 1.0 }, 0.0, 0.0),
        1 => (PotentialFamily::Power { a: 1.0, b: 0.5 }, Region::Annulus { inner: 0.25, outer: 4.0 }, 0.5 - beta, 0.5),
        _ => (PotentialFamily::example_exponential(), Region::Complement { r: 1.0 }, 0.0, 0.75),
    }
}

pub const LEMMA41_BETAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

fn lemma41(settings: &Settings, p: &SpaceParams, out: &mut Output) -> Result<VerifyOutput> {
    let q = settings.q.unwrap_or(3.0);
    let g = grid(settings, p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for beta in LEMMA41_BETAS {
        for which in 0..3 {
            let (pot, region, alpha, nu) = lemma41_scenario(which, beta);
            for index in 0..10 {
                let u = random_bump(&g, &mut rng)?;
                let ctx = BoundContext::fitted(&u, region, alpha, beta, nu, &pot, &pot)?;
                let rep = verify::check_lemma41(&u, &ctx, q, p)?;
                let inputs = json!({
                    "beta": beta, "alpha": alpha, "nu": nu, "m": ctx.m, "Lambda": ctx.lambda,
                    "region": region, "family": pot, "bump": index, "case": rep.case,
                });
                rows.push(vec![
                    cell(beta),
                    which.to_string(),
                    index.to_string(),
                    cell(rep.lhs),
                    cell(rep.rhs),
                    cell(rep.ratio),
                    rep.passed.to_string(),
                ]);
                reports.push(VerifyReport::lemma41(&rep, inputs));
            }
        }
    }
    out.csv("lemma41.csv", &["beta", "scenario", "bump", "lhs", "rhs", "ratio", "passed"], &rows)?;
    Ok(VerifyOutput::new(Campaign::Lemma41, p, json!({"q": q, "seed": settings.seed}), reports))
}

fn annulus(settings: &Settings, p: &SpaceParams, out: &mut Output) -> Result<VerifyOutput> {
    let q = settings.q.unwrap_or(3.0);
    let radii = settings.radii.clone().unwrap_or(vec![0.5, 2.0]);
    if radii.len() != 2 {
        return Err(anyhow!(UsageError("the annulus campaign takes --R-grid r,R".into())));
    }
    let (r, big_r) = (radii[0], radii[1]);
    let fam = settings.family_or(PotentialFamily::example_exponential());
    let g = grid(settings, p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for index in 0..5 {
        let u = random_bump(&g, &mut rng)?;
        let rep = verify::check_annulus_bound(&u, r, big_r, q, &fam, &fam, p)?;
        rows.push(vec![index.to_string(), cell(rep.t), cell(rep.q_tilde), cell(rep.empirical_constant), cell(rep.proof_constant)]);
        reports.push(VerifyReport::annulus(&rep, json!({"r": r, "R": big_r, "q": q, "bump": index})));
    }
    out.csv("annulus.csv", &["bump", "t", "q_tilde", "empirical_constant", "proof_constant"], &rows)?;
    let mut inputs = BTreeMap::new();
    inputs.insert("family", json!(fam));
    inputs.insert("r", json!(r));
    inputs.insert("R", json!(big_r));
    inputs.insert("q", json!(q));
    Ok(VerifyOutput::new(Campaign::Annulus, p, json!(inputs), reports))
}
