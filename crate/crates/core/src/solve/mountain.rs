use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Nonlinearity, Problem};
use crate::error::{domain, Error, Result};
use crate::exponents::{classify_potentials, SpaceParams};
use crate::fraclap::{self, FracLapOperator, Mode};
use crate::grid::{Extrapolation, RadialFunction, RadialGrid};
use crate::potentials::PotentialFamily;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub r1: f64,
    pub r_max: f64,
    pub nodes: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { r1: RadialGrid::DEFAULT_R1, r_max: RadialGrid::DEFAULT_RM, nodes: RadialGrid::DEFAULT_M }
    }
}

impl GridSpec {
    pub fn build(&self, n: usize) -> Result<Arc<RadialGrid>> {
        Ok(Arc::new(RadialGrid::geometric(n, self.r1, self.r_max, self.nodes)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MountainPassConfig {
    pub grid: GridSpec,
    /// Tolerance on `‖ℰ'(u)‖` in the dual norm.
    pub tol: f64,
    pub max_outer: usize,
    pub path_nodes: usize,
    /// Outer iterations without a decrease of the path maximum before giving up.
    pub patience: usize,
    /// Solve with `f(t) = 0` for `t < 0` and require `u ≥ 0`.
    pub nonneg: bool,
    /// Descent stops and Newton takes over once `‖ℰ'(u)‖ < polish_switch ‖u‖`.
    pub polish_switch: f64,
    pub max_newton: usize,
    /// Tail used for the iterates; `None` selects the Strauss rate.
    pub tail: Option<Extrapolation>,
    /// Minimal `H^s_V` distance between distinct solutions.
    pub separation: f64,
    pub deflation_attempts: usize,
}

impl Default for MountainPassConfig {
    fn default() -> Self {
        MountainPassConfig {
            grid: GridSpec::default(),
            tol: 1e-8,
            max_outer: 4000,
            path_nodes: 32,
            patience: 200,
            nonneg: true,
            polish_switch: 1e-3,
            max_newton: 60,
            tail: None,
            separation: 0.1,
            deflation_attempts: 24,
        }
    }
}

impl MountainPassConfig {
    pub fn extrapolation(&self, params: &SpaceParams) -> Extrapolation {
        self.tail.unwrap_or(Extrapolation::PowerTail(-params.strauss_rate()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    #[serde(skip)]
    pub u: Option<RadialFunction>,
    pub energy: f64,
    pub grad_norm: f64,
    /// Real-space `L²` residual of the equation at the nodes.
    pub pde_residual: f64,
    pub nehari_residual: f64,
    pub path_history: Option<Vec<(usize, f64)>>,
    pub nonneg: bool,
    pub norm: f64,
    pub newton_steps: usize,
}

impl Solution {
    pub fn profile(&self) -> &RadialFunction {
        self.u.as_ref().expect("solution profile")
    }

    pub(crate) fn from_state(problem: &Problem, u: Vec<f64>, history: Option<Vec<(usize, f64)>>, newton_steps: usize) -> Self {
        let (_, grad_norm) = problem.gradient(&u);
        let nonneg = u.iter().all(|x| *x >= -NEGATIVE_PART_TOL);
        Solution {
            energy: problem.energy(&u),
            grad_norm,
            pde_residual: problem.strong_residual(&u),
            nehari_residual: problem.nehari_residual(&u),
            path_history: history,
            nonneg,
            norm: problem.norm(&u),
            newton_steps,
            u: Some(problem.function(u)),
        }
    }

    /// Residual of the equation with the Fourier-side operator, an
    /// independent discretization of `(-Δ)^s`.
    pub fn spectral_residual(&self, v: &PotentialFamily, k: &PotentialFamily, f: &Nonlinearity, params: &SpaceParams) -> Result<f64> {
        let u = self.profile();
        let op = FracLapOperator::new(&u.grid, params, Mode::Spectral, Extrapolation::ZeroBeyond)?;
        fraclap::pde_residual_with(&op, u, v, k, f)
    }
}

/// Gaussian bump `e^{-r²}` scaled to height `2 t0`.
pub fn initial_bump(grid: &Arc<RadialGrid>, f: &Nonlinearity, extrapolation: Extrapolation) -> Result<RadialFunction> {
    RadialFunction::from_fn(grid, |r| 2.0 * f.t0 * (-r * r).exp(), extrapolation)
}

pub const ENDPOINT_LEVEL: f64 = -1.0;
const MAX_DOUBLINGS: usize = 60;

/// Doubles `λ` from 1 until `ℰ(λ u0) < -1`.
pub fn find_endpoint(
    u0: &RadialFunction,
    v: &PotentialFamily,
    k: &PotentialFamily,
    f: &Nonlinearity,
    params: &SpaceParams,
) -> Result<(f64, RadialFunction)> {
    let problem = Problem::new(&u0.grid, params, v, k, f, u0.extrapolation)?;
    let (lambda, e, _) = endpoint_on(&problem, &u0.values)?;
    Ok((lambda, u0.with_values(e)))
}

pub(crate) fn endpoint_on(problem: &Problem, u0: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if u0.iter().any(|x| *x < 0.0) {
        return domain("the endpoint search needs u0 ≥ 0");
    }
    if !u0.iter().any(|x| *x >= problem.f.t0) {
        return domain(format!("u0 must reach t0 = {} on a set of positive measure", problem.f.t0));
    }
    let mut lambda = 1.0;
    let mut energies = Vec::new();
    for _ in 0..=MAX_DOUBLINGS {
        let e: Vec<f64> = u0.iter().map(|x| lambda * x).collect();
        let en = problem.energy(&e);
        energies.push(en);
        if en < ENDPOINT_LEVEL {
            return Ok((lambda, e, energies));
        }
        lambda *= 2.0;
    }
    Err(Error::Solver {
        message: "no negative energy along λ u0 up to λ = 2^60; check the growth conditions".into(),
        history: energies.into_iter().enumerate().collect(),
    })
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| a * xi + yi).collect()
}

/// A path from 0 along the ray through `v` to a point of energy below
/// [`ENDPOINT_LEVEL`], sampled at equally spaced nodes (equal `H^s_V` arc
/// length), with its maximum refined between the nodes.
pub(crate) struct RayPath {
    pub top: Vec<f64>,
    pub max: f64,
}

pub(crate) fn ray_path(problem: &Problem, v: &[f64], nodes: usize) -> Option<RayPath> {
    let n2 = problem.norm_sq(v);
    let at = |t: f64| -> f64 {
        let tv: Vec<f64> = v.iter().map(|x| t * x).collect();
        0.5 * t * t * n2 - problem.nonlinear_energy(&tv)
    };
    let mut end = 1.0;
    let mut found = false;
    for _ in 0..=MAX_DOUBLINGS {
        if at(end) < ENDPOINT_LEVEL {
            found = true;
            break;
        }
        end *= 2.0;
    }
    if !found {
        return None;
    }
    let ts: Vec<f64> = (0..nodes).map(|j| end * j as f64 / (nodes - 1) as f64).collect();
    let es: Vec<f64> = ts.iter().map(|&t| at(t)).collect();
    let j = (1..nodes - 1).fold(1, |b, j| if es[j] > es[b] { j } else { b });
    // golden-section search between the neighbors of the sampled maximum
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (ts[j - 1], ts[j + 1]);
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let (mut fc, mut fd) = (at(c), at(d));
    while hi - lo > 1e-13 * hi {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = at(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = at(d);
        }
    }
    let t = 0.5 * (lo + hi);
    let top: Vec<f64> = v.iter().map(|x| t * x).collect();
    let max = problem.energy(&top);
    Some(RayPath { top, max })
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Outcome of the descent before polishing.
struct Descent {
    u: Vec<f64>,
    history: Vec<(usize, f64)>,
}

fn descend(problem: &Problem, e: &[f64], config: &MountainPassConfig) -> Result<Descent> {
    let nodes = config.path_nodes.max(3);
    let lost = |history: Vec<(usize, f64)>| Error::Solver {
        message: "no negative energy along the path direction: mountain-pass geometry lost".into(),
        history,
    };
    let Some(mut path) = ray_path(problem, e, nodes) else {
        return Err(lost(Vec::new()));
    };
    let mut history = vec![(0, path.max)];
    let mut step = 1.0f64;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut since_progress = 0;
    for it in 1..=config.max_outer {
        let u = path.top.clone();
        let nu = problem.norm(&u);
        if nu < 1e-8 {
            return Err(Error::Solver { message: "path maximum collapsed to 0: mountain-pass geometry lost".into(), history });
        }
        let (g, gn) = problem.gradient(&u);
        let g = g.as_slice().to_vec();
        if gn < config.polish_switch * nu || gn < config.tol {
            return Ok(Descent { u, history });
        }
        if let Some((pu, pg)) = &prev {
            let s = diff(&u, pu);
            let y = diff(&g, pg);
            let sy = problem.inner(&s, &y);
            if sy > 0.0 {
                step = (problem.norm_sq(&s) / sy).clamp(1e-6, 1e3);
            }
        }
        let mut tau = step;
        let mut next = None;
        for _ in 0..50 {
            let cand = axpy(-tau, &g, &u);
            if let Some(p) = ray_path(problem, &cand, nodes) {
                if p.max <= path.max - 1e-4 * tau * gn * gn {
                    next = Some(p);
                    break;
                }
            }
            tau *= 0.5;
        }
        let Some(p) = next else {
            // no sufficient decrease left at double precision: hand over to Newton
            return Ok(Descent { u, history });
        };
        step = tau;
        prev = Some((u, g));
        let progress = p.max < path.max - 1e-13 * path.max.abs();
        path = p;
        history.push((it, path.max));
        since_progress = if progress { 0 } else { since_progress + 1 };
        if since_progress > config.patience {
            return Err(Error::Solver { message: "path maximum stagnated".into(), history });
        }
    }
    Ok(Descent { u: path.top, history })
}

/// Damped Newton iteration on `ℰ'(u) = 0`, starting near a critical point.
pub(crate) fn newton(problem: &Problem, mut u: Vec<f64>, tol: f64, max_steps: usize) -> Result<(Vec<f64>, usize)> {
    let (_, mut gn) = problem.gradient(&u);
    let mut steps = 0;
    while gn >= tol && steps < max_steps {
        let r = problem.functional(&u);
        let jac = problem.jacobian(&u);
        let delta = jac
            .lu()
            .solve(&(-r))
            .ok_or_else(|| Error::Numeric("singular Jacobian in the Newton polish".into()))?;
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let cand = axpy(t, delta.as_slice(), &u);
            let (_, cn) = problem.gradient(&cand);
            if cn < (1.0 - 1e-4 * t) * gn {
                u = cand;
                gn = cn;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        steps += 1;
        if !improved {
            break;
        }
    }
    Ok((u, steps))
}

/// Largest negative part tolerated for a nonnegative solution.
pub const NEGATIVE_PART_TOL: f64 = 1e-10;

/// Mountain-pass solution of `(-Δ)^s u + V u = K f(u)`.
pub fn mountain_pass(
    v: &PotentialFamily,
    k: &PotentialFamily,
    f: &Nonlinearity,
    params: &SpaceParams,
    config: &MountainPassConfig,
) -> Result<Solution> {
    let grid = config.grid.build(params.n)?;
    let f = if config.nonneg { f.truncated() } else { *f };
    let problem = Problem::new(&grid, params, v, k, &f, config.extrapolation(params))?;
    mountain_pass_on(&problem, config)
}

/// Compactness of the embedding for the exponents of `f`, when decidable.
pub fn compactness_warning(v: &PotentialFamily, f: &Nonlinearity, params: &SpaceParams) -> Option<String> {
    let (q1, q2) = f.exponents();
    match classify_potentials(v, params) {
        Ok(rep) if rep.admits(q1, q2) => None,
        Ok(rep) => Some(match (rep.q_single_interval, q1 == q2) {
            (Some(i), true) => format!("q = {q1} outside admissible range ({}, {})", i.lo, fmt_bound(i.hi)),
            _ => {
                let q1_range = rep.q1_interval.map_or("none".to_string(), |i| format!("({}, {})", i.lo, fmt_bound(i.hi)));
                let q2_range = rep.q2_lower.map_or("none".to_string(), |l| format!("q2 > {l}"));
                format!("(q1, q2) = ({q1}, {q2}) outside admissible ranges q1 in {q1_range}, {q2_range}")
            }
        }),
        Err(e) => Some(format!("compactness not decided: {e}")),
    }
}

fn fmt_bound(x: f64) -> String {
    if x.is_finite() {
        x.to_string()
    } else {
        "inf".into()
    }
}

pub fn mountain_pass_on(problem: &Problem, config: &MountainPassConfig) -> Result<Solution> {
    let u0 = initial_bump(&problem.grid, &problem.f, problem.extrapolation)?;
    let (_, e, _) = endpoint_on(problem, &u0.values)?;
    let descent = descend(problem, &e, config)?;
    let (u, steps) = newton(problem, descent.u, config.tol, config.max_newton)?;
    let sol = Solution::from_state(problem, u, Some(descent.history.clone()), steps);
    if !(sol.grad_norm < config.tol) {
        return Err(Error::Solver {
            message: format!("gradient norm {:.3e} above tolerance {:.1e} after polishing", sol.grad_norm, config.tol),
            history: descent.history,
        });
    }
    if sol.norm < 1e-8 {
        return Err(Error::Solver { message: "converged to u = 0: mountain-pass geometry lost".into(), history: descent.history });
    }
    if config.nonneg && !sol.nonneg {
        let min = sol.profile().values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        return Err(Error::Solver { message: format!("nonnegative solution requested but min u = {min:.3e}"), history: descent.history });
    }
    Ok(sol)
}
