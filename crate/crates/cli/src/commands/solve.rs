use anyhow::{anyhow, Result};
use fracemb::solve::{self, compactness_warning, mountain_pass, solve_many, Nonlinearity, Solution};
use fracemb::{PotentialFamily, SpaceParams};
use serde::Serialize;

use crate::config::Settings;
use crate::output::Output;
use crate::UsageError;

#[derive(Debug, Clone, Serialize)]
pub struct SolutionRecord {
    pub file: String,
    pub energy: f64,
    pub grad_norm: f64,
    pub pde_residual: f64,
    /// Residual with the Fourier-side operator.
    pub spectral_residual: f64,
    pub nehari_residual: f64,
    pub nonneg: bool,
    pub norm: f64,
    pub newton_steps: usize,
    pub sign_changes: usize,
    pub path_history: Option<Vec<(usize, f64)>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveOutput {
    pub command: &'static str,
    #[serde(rename = "N")]
    pub n: usize,
    pub s: f64,
    pub family: PotentialFamily,
    pub nonlinearity: Nonlinearity,
    pub count: usize,
    pub config: solve::MountainPassConfig,
    pub warnings: Vec<String>,
    pub solutions: Vec<SolutionRecord>,
}

pub fn sign_changes(values: &[f64]) -> usize {
    let scale = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let signs: Vec<f64> = values.iter().filter(|x| x.abs() > 1e-6 * scale).map(|x| x.signum()).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

fn record(sol: &Solution, file: String, v: &PotentialFamily, f: &Nonlinearity, p: &SpaceParams) -> Result<SolutionRecord> {
    Ok(SolutionRecord {
        file,
        energy: sol.energy,
        grad_norm: sol.grad_norm,
        pde_residual: sol.pde_residual,
        spectral_residual: sol.spectral_residual(v, v, f, p)?,
        nehari_residual: sol.nehari_residual,
        nonneg: sol.nonneg,
        norm: sol.norm,
        newton_steps: sol.newton_steps,
        sign_changes: sign_changes(&sol.profile().values),
        path_history: sol.path_history.clone(),
    })
}

pub fn run(settings: &Settings, out: &mut Output) -> Result<SolveOutput> {
    let p = settings.space()?;
    let family = settings.family_or(PotentialFamily::example_exponential());
    family.validate(&p).map_err(|e| anyhow!(UsageError(e.to_string())))?;
    let f = settings.build_nonlinearity()?;
    let mut warnings = Vec::new();
    if let Some(w) = compactness_warning(&family, &f, &p) {
        eprintln!("warning: {w}");
        warnings.push(w);
    }
    let count = settings.count;
    let mut config = settings.solver.clone();
    let solutions = if count == 1 {
        vec![mountain_pass(&family, &family, &f, &p, &config)?]
    } else {
        if !f.is_odd() {
            return Err(anyhow!(UsageError("--count > 1 needs an odd nonlinearity".into())));
        }
        config.nonneg = false;
        solve_many(&family, &family, &f, &p, &config, count)?
    };
    let mut records = Vec::new();
    for (i, sol) in solutions.iter().enumerate() {
        let name = format!("solution_{i}.csv");
        if let Some(dir) = out.dir() {
            sol.profile().write_csv(&dir.join(&name), p.s)?;
            out.adopt(&name)?;
            out.adopt(&format!("{name}.json"))?;
        }
        let f_used = if config.nonneg { f.truncated() } else { f };
        records.push(record(sol, name, &family, &f_used, &p)?);
    }
    let result = SolveOutput {
        command: "solve",
        n: p.n,
        s: p.s,
        family,
        nonlinearity: f,
        count,
        config,
        warnings,
        solutions: records,
    };
    out.json("solve.json", &result)?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_sign_changes_ignoring_noise() {
        assert_eq!(sign_changes(&[1.0, 0.5, -0.2, -1.0, 1e-9, -1e-9, 0.3]), 2);
        assert_eq!(sign_changes(&[0.0, 0.0]), 0);
    }
}
