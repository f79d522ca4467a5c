use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use clap::{Args, ValueEnum};
use fracemb::solve::{GridSpec, MountainPassConfig, Nonlinearity, NonlinearityKind};
use fracemb::verify::AscentConfig;
use fracemb::{PotentialFamily, SpaceParams};
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Power,
    Exponential,
    Mixed,
    ZeroV,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum NonlinearityChoice {
    Pure,
    Min,
    Rational,
}

/// Flags shared by every subcommand. Flags override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Space dimension.
    #[arg(long = "N", global = true)]
    pub n: Option<usize>,
    /// Fractional order, in (1/2, 1).
    #[arg(long, global = true)]
    pub s: Option<f64>,
    /// Potential family; its parameters come from --a, --b, --d.
    #[arg(long, global = true, value_enum)]
    pub family: Option<FamilyKind>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub a: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub b: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub d: Option<f64>,
    #[arg(long, global = true)]
    pub q: Option<f64>,
    #[arg(long, global = true)]
    pub q1: Option<f64>,
    #[arg(long, global = true)]
    pub q2: Option<f64>,
    /// Ambrosetti–Rabinowitz exponent.
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    /// Nonlinearity model.
    #[arg(long, global = true, value_enum)]
    pub nonlinearity: Option<NonlinearityChoice>,
    /// Comma-separated radii.
    #[arg(long = "R-grid", global = true, value_delimiter = ',')]
    pub r_grid: Option<Vec<f64>>,
    /// Comma-separated fractional orders for `sweep`.
    #[arg(long = "s-grid", global = true, value_delimiter = ',')]
    pub s_grid: Option<Vec<f64>>,
    /// Number of grid nodes.
    #[arg(long, global = true)]
    pub nodes: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Treat warnings as failures.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Number of solutions to compute.
    #[arg(long, global = true)]
    pub count: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub space: SpaceSection,
    pub grid: Option<GridSpec>,
    pub solver: SolverSection,
    pub path: PathSection,
    pub deflation: DeflationSection,
    pub nonlinearity: NonlinearitySection,
    pub potentials: Option<PotentialsSection>,
    pub verify: VerifySection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceSection {
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub s: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tol: Option<f64>,
    pub max_outer: Option<usize>,
    pub count: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathSection {
    pub nodes: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeflationSection {
    pub separation: Option<f64>,
    pub attempts: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonlinearitySection {
    pub kind: Option<String>,
    pub q: Option<f64>,
    pub q1: Option<f64>,
    pub q2: Option<f64>,
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialsSection {
    pub kind: String,
    #[serde(default)]
    pub params: toml::Table,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub budget: Option<usize>,
    pub starts: Option<usize>,
    pub seed: Option<u64>,
    pub q: Option<f64>,
    pub radii: Option<Vec<f64>>,
}

pub fn read_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow!(UsageError(format!("reading config {}: {e}", path.display()))))?;
    toml::from_str(&text).map_err(|e| anyhow!(UsageError(format!("invalid config {}: {e}", path.display()))))
}

/// Everything a run depends on, after merging defaults, config and flags.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    #[serde(rename = "N")]
    pub n: usize,
    pub s: f64,
    pub family: Option<PotentialFamily>,
    pub nonlinearity: Option<NonlinearityKind>,
    pub mu: Option<f64>,
    pub q: Option<f64>,
    pub radii: Option<Vec<f64>>,
    pub s_grid: Option<Vec<f64>>,
    pub seed: u64,
    pub strict: bool,
    pub count: usize,
    pub solver: MountainPassConfig,
    pub ascent: AscentConfig,
}

pub const DEFAULT_SEED: u64 = 7;

impl Settings {
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let file = match &args.config {
            Some(p) => read_config(p)?,
            None => FileConfig::default(),
        };
        let n = args.n.or(file.space.n).unwrap_or(3);
        let s = args.s.or(file.space.s).unwrap_or(0.75);

        let mut grid = file.grid.unwrap_or_default();
        if let Some(m) = args.nodes {
            grid.nodes = m;
        }

        let family = match args.family {
            Some(kind) => Some(family_from_flags(kind, args)),
            None => match &file.potentials {
                Some(sec) => Some(family_from_config(sec)?),
                None => None,
            },
        };

        let nl = &file.nonlinearity;
        let q = args.q.or(nl.q);
        let q1 = args.q1.or(nl.q1);
        let q2 = args.q2.or(nl.q2);
        let choice = match args.nonlinearity {
            Some(c) => Some(c),
            None => nl.kind.as_deref().map(parse_nonlinearity_kind).transpose()?,
        };
        let nonlinearity = nonlinearity_kind(choice, q, q1, q2)?;

        let mut solver = MountainPassConfig { grid, ..Default::default() };
        if let Some(t) = file.solver.tol {
            solver.tol = t;
        }
        if let Some(m) = file.solver.max_outer {
            solver.max_outer = m;
        }
        if let Some(p) = file.path.nodes {
            solver.path_nodes = p;
        }
        if let Some(sep) = file.deflation.separation {
            solver.separation = sep;
        }
        if let Some(a) = file.deflation.attempts {
            solver.deflation_attempts = a;
        }

        let seed = args.seed.or(file.verify.seed).unwrap_or(DEFAULT_SEED);
        let mut ascent = AscentConfig { grid, seed, ..Default::default() };
        if let Some(b) = file.verify.budget {
            ascent.budget = b;
        }
        if let Some(st) = file.verify.starts {
            ascent.starts = st;
        }

        let count = args.count.or(file.solver.count).unwrap_or(1);
        if count == 0 {
            return Err(anyhow!(UsageError("--count must be at least 1".into())));
        }
        Ok(Settings {
            n,
            s,
            family,
            nonlinearity,
            mu: args.mu.or(nl.mu),
            q: q.or(file.verify.q),
            radii: args.r_grid.clone().or(file.verify.radii),
            s_grid: args.s_grid.clone(),
            seed,
            strict: args.strict,
            count,
            solver,
            ascent,
        })
    }

    pub fn space(&self) -> Result<SpaceParams> {
        SpaceParams::new(self.n, self.s).map_err(|e| anyhow!(UsageError(e.to_string())))
    }

    pub fn family_or(&self, default: PotentialFamily) -> PotentialFamily {
        self.family.clone().unwrap_or(default)
    }

    /// The nonlinearity, `|t|^{q-2} t` with `q = 3` unless configured.
    pub fn build_nonlinearity(&self) -> Result<Nonlinearity> {
        let kind = self.nonlinearity.unwrap_or(NonlinearityKind::PurePower { q: 3.0 });
        let f = match self.mu {
            Some(mu) => Nonlinearity::with_mu(kind, mu),
            None => Nonlinearity::new(kind),
        };
        f.map_err(|e| anyhow!(UsageError(e.to_string())))
    }
}

fn family_from_flags(kind: FamilyKind, args: &CommonArgs) -> PotentialFamily {
    match kind {
        FamilyKind::Power => PotentialFamily::Power { a: args.a.unwrap_or(0.0), b: args.b.unwrap_or(0.0) },
        FamilyKind::Exponential => PotentialFamily::Exponential { c_v: args.a.unwrap_or(2.0), c_k: args.b.unwrap_or(1.0) },
        FamilyKind::Mixed => PotentialFamily::Mixed { a: args.a.unwrap_or(1.0), b: args.b.unwrap_or(1.0), d: args.d.unwrap_or(0.0) },
        FamilyKind::ZeroV => {
            let alpha0 = args.a.unwrap_or(0.0);
            PotentialFamily::ZeroV { alpha0, alpha_inf: args.b.unwrap_or(alpha0) }
        }
    }
}

fn family_from_config(sec: &PotentialsSection) -> Result<PotentialFamily> {
    let mut map = serde_json::Map::new();
    map.insert("kind".into(), serde_json::Value::String(sec.kind.replace('-', "_")));
    for (k, v) in &sec.params {
        let v = serde_json::to_value(v).context("potential parameters")?;
        map.insert(k.clone(), v);
    }
    serde_json::from_value(serde_json::Value::Object(map))
        .map_err(|e| anyhow!(UsageError(format!("invalid potentials section: {e}"))))
}

fn parse_nonlinearity_kind(s: &str) -> Result<NonlinearityChoice> {
    match s {
        "pure" | "pure_power" => Ok(NonlinearityChoice::Pure),
        "min" | "min_power" => Ok(NonlinearityChoice::Min),
        "rational" | "rational_power" => Ok(NonlinearityChoice::Rational),
        other => Err(anyhow!(UsageError(format!("unknown nonlinearity kind '{other}'")))),
    }
}

fn nonlinearity_kind(choice: Option<NonlinearityChoice>, q: Option<f64>, q1: Option<f64>, q2: Option<f64>) -> Result<Option<NonlinearityKind>> {
    let choice = match (choice, q1.or(q2)) {
        (Some(c), _) => c,
        (None, Some(_)) => NonlinearityChoice::Min,
        (None, None) => return Ok(q.map(|q| NonlinearityKind::PurePower { q })),
    };
    let pair = || -> Result<(f64, f64)> {
        match (q1, q2) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(anyhow!(UsageError("two-exponent nonlinearities need --q1 and --q2".into()))),
        }
    };
    Ok(Some(match choice {
        NonlinearityChoice::Pure => NonlinearityKind::PurePower { q: q.or(q1).unwrap_or(3.0) },
        NonlinearityChoice::Min => {
            let (q1, q2) = pair()?;
            NonlinearityKind::MinPower { q1, q2 }
        }
        NonlinearityChoice::Rational => {
            let (q1, q2) = pair()?;
            NonlinearityKind::RationalPower { q1, q2 }
        }
    }))
}
