//! Numerical checks of the embedding estimates: lower bounds for the suprema
//! `S0(q, R)` and `S∞(q, R)`, their decay rates, the annulus estimate and
//! the weighted Hölder bounds used to control `∫ K |u|^q`.
//!
//! Every function is continued by zero beyond the last node. Such functions
//! belong to `H^s_{V,rad}`, so a maximizer found among them gives a valid
//! lower bound for the supremum over the whole space.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exponents::SpaceParams;
use crate::fraclap;
use crate::grid::{Extrapolation, RadialFunction, RadialGrid};
use crate::potentials::PotentialFamily;
use crate::quad::{adaptive, gauss_legendre};
use crate::solve::GridSpec;
use crate::spaces;
use crate::special::sphere_area;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Ball { r: f64 },
    Complement { r: f64 },
    Annulus { inner: f64, outer: f64 },
}

impl Region {
    /// Radial interval `[lo, hi]` covered by the region.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Region::Ball { r } => (0.0, r),
            Region::Complement { r } => (r, f64::INFINITY),
            Region::Annulus { inner, outer } => (inner, outer),
        }
    }

    pub fn contains(&self, r: f64) -> bool {
        let (lo, hi) = self.bounds();
        r >= lo && r <= hi
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Region::Ball { r } | Region::Complement { r } => r > 0.0 && r.is_finite(),
            Region::Annulus { inner, outer } => inner > 0.0 && outer > inner && outer.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            domain(format!("invalid region {self:?}"))
        }
    }
}

/// Gauss points of the piecewise-linear interpolant restricted to a region:
/// `∫_Ω g(|x|, u(|x|)) dx ≈ Σ_p w_p g(r_p, (1-t_p) u_j + t_p u_{j+1})`.
#[derive(Debug, Clone)]
pub struct RegionRule {
    points: Vec<(usize, f64, f64, f64)>,
}

impl RegionRule {
    pub fn new(grid: &RadialGrid, region: &Region) -> Self {
        let (lo, hi) = region.bounds();
        let nodes = grid.nodes();
        let n = grid.dim() as i32;
        let area = sphere_area(grid.dim());
        let rule = gauss_legendre(4);
        let mut points = Vec::new();
        let mut push_piece = |j: usize, a: f64, b: f64, cell: (f64, f64)| {
            let (a, b) = (a.max(lo), b.min(hi));
            if b <= a {
                return;
            }
            for (r, w) in rule.mapped(a, b).iter() {
                let t = if cell.1 > cell.0 { (r - cell.0) / (cell.1 - cell.0) } else { 0.0 };
                points.push((j, t, r, area * w * r.powi(n - 1)));
            }
        };
        push_piece(0, 0.0, nodes[0], (0.0, 0.0));
        for j in 0..nodes.len() - 1 {
            push_piece(j, nodes[j], nodes[j + 1], (nodes[j], nodes[j + 1]));
        }
        RegionRule { points }
    }

    fn value_at(&self, u: &[f64], p: usize) -> f64 {
        let (j, t, _, _) = self.points[p];
        if t == 0.0 {
            u[j]
        } else {
            (1.0 - t) * u[j] + t * u[j + 1]
        }
    }

    /// `∫_Ω g(r, u(r)) dx`.
    pub fn integrate(&self, u: &[f64], g: impl Fn(f64, f64) -> f64) -> f64 {
        (0..self.points.len()).map(|p| self.points[p].3 * g(self.points[p].2, self.value_at(u, p))).sum()
    }

    /// `∫_Ω K |u|^q` and its gradient with respect to the nodal values.
    fn power_objective(&self, u: &[f64], kq: &[f64], q: f64) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; u.len()];
        let mut total = 0.0;
        for (p, &(j, t, _, _)) in self.points.iter().enumerate() {
            let x = self.value_at(u, p);
            let ax = x.abs();
            if ax == 0.0 {
                continue;
            }
            let w = kq[p];
            total += w * ax.powf(q);
            let d = w * q * ax.powf(q - 1.0) * x.signum();
            grad[j] += (1.0 - t) * d;
            if t != 0.0 {
                grad[j + 1] += t * d;
            }
        }
        (total, grad)
    }

    fn weighted(&self, k: &PotentialFamily) -> Vec<f64> {
        self.points.iter().map(|&(_, _, r, w)| w * k.k(r)).collect()
    }
}

/// `∫_Ω K |u|^q` for the piecewise-linear interpolant of `u`.
pub fn region_integral(u: &RadialFunction, region: &Region, k: &PotentialFamily, q: f64) -> Result<f64> {
    region.validate()?;
    let rule = RegionRule::new(&u.grid, region);
    Ok(rule.integrate(&u.values, |r, x| k.k(r) * x.abs().powf(q)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AscentConfig {
    pub grid: GridSpec,
    /// Iterations per start.
    pub budget: usize,
    pub starts: usize,
    pub seed: u64,
    /// Stationarity threshold on `1 - cos∠(u, H⁻¹∇J)`.
    pub tol: f64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        AscentConfig { grid: GridSpec::default(), budget: 3000, starts: 8, seed: 7, tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupremumEstimate {
    pub q: f64,
    pub r: f64,
    pub region: Region,
    /// Lower bound on the supremum.
    pub value: f64,
    #[serde(skip)]
    pub maximizer: Option<RadialFunction>,
    pub iterations: usize,
    pub converged: bool,
}

impl SupremumEstimate {
    pub fn maximizer(&self) -> &RadialFunction {
        self.maximizer.as_ref().expect("maximizer")
    }
}

/// The discrete unit sphere of `H^s_V`: `uᵀ H u = ‖u‖²_{H^s_V}` exactly as
/// computed by [`spaces::hsv_norm`] for zero-continued functions.
pub struct NormSphere {
    pub grid: Arc<RadialGrid>,
    pub params: SpaceParams,
    pub v: PotentialFamily,
    h: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl NormSphere {
    pub fn new(grid: &Arc<RadialGrid>, v: &PotentialFamily, params: &SpaceParams) -> Result<Self> {
        if grid.dim() != params.n {
            return Err(Error::Usage(format!("grid dimension {} but N = {}", grid.dim(), params.n)));
        }
        let vn = v.v_on(grid.nodes());
        if let Some(i) = vn.iter().position(|x| !(*x >= 0.0 && x.is_finite())) {
            return domain(format!("V is negative or infinite at r = {}", grid.nodes()[i]));
        }
        let st = fraclap::stiffness(grid, params, Extrapolation::ZeroBeyond);
        let area = sphere_area(params.n);
        let mut h = st.matrix.clone();
        for (i, w) in grid.weights().iter().enumerate() {
            h[(i, i)] += area * w * vn[i];
        }
        let chol = Cholesky::new(h.clone()).ok_or_else(|| Error::Numeric("H^s_V form is not positive definite".into()))?;
        Ok(NormSphere { grid: grid.clone(), params: *params, v: v.clone(), h, chol })
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        let x = DVector::from_column_slice(u);
        x.dot(&(&self.h * &x)).max(0.0).sqrt()
    }

    fn normalized(&self, u: &[f64]) -> Option<Vec<f64>> {
        let n = self.norm(u);
        (n > 0.0 && n.is_finite()).then(|| u.iter().map(|x| x / n).collect())
    }

    /// `sup_i r_i^{(N-2s)/2} sqrt((H⁻¹)_{ii})`: the smallest constant with
    /// `|u(r_i)| ≤ C r_i^{-(N-2s)/2} ‖u‖` for every discrete `u`.
    pub fn strauss_constant(&self) -> f64 {
        let m = self.h.nrows();
        let inv = self.chol.inverse();
        let rate = self.params.strauss_rate();
        (0..m).map(|i| self.grid.nodes()[i].powf(rate) * inv[(i, i)].max(0.0).sqrt()).fold(0.0, f64::max)
    }

    fn function(&self, values: Vec<f64>) -> RadialFunction {
        RadialFunction { grid: self.grid.clone(), values, extrapolation: Extrapolation::ZeroBeyond }
    }

    /// Nonlinear power iteration `u ← H⁻¹∇J(u) / ‖H⁻¹∇J(u)‖`, which never
    /// decreases the convex objective `J(u) = ∫_Ω K|u|^q`.
    fn ascend(&self, rule: &RegionRule, kq: &[f64], q: f64, start: &[f64], budget: usize, tol: f64) -> Option<(Vec<f64>, f64, usize, bool)> {
        let mut u = self.normalized(start)?;
        let (mut val, mut grad) = rule.power_objective(&u, kq, q);
        if val == 0.0 {
            return None;
        }
        for it in 0..budget {
            let g = self.chol.solve(&DVector::from_vec(grad));
            let gn = self.norm(g.as_slice());
            let cos = DVector::from_column_slice(&u).dot(&(&self.h * &g)) / gn;
            if 1.0 - cos < tol {
                return Some((u, val, it, true));
            }
            let next = self.normalized(g.as_slice())?;
            let (nv, ng) = rule.power_objective(&next, kq, q);
            if nv <= val {
                return Some((u, val, it, 1.0 - cos < tol.sqrt()));
            }
            u = next;
            val = nv;
            grad = ng;
        }
        Some((u, val, budget, false))
    }

    /// Best lower bound for `sup_{‖u‖=1} ∫_Ω K |u|^q` from random starts and
    /// the given warm starts.
    pub fn supremum(&self, region: &Region, q: f64, k: &PotentialFamily, cfg: &AscentConfig, warm: &[RadialFunction]) -> Result<SupremumEstimate> {
        if !(q > 1.0) {
            return domain(format!("q = {q} must exceed 1"));
        }
        region.validate()?;
        let nodes = self.grid.nodes();
        let (lo, hi) = region.bounds();
        if !nodes.iter().any(|&r| r >= lo && r <= hi) {
            return domain(format!("region {region:?} contains no grid node"));
        }
        let rule = RegionRule::new(&self.grid, region);
        let kq = rule.weighted(k);
        let mut starts: Vec<Vec<f64>> = warm.iter().map(|w| w.values.clone()).collect();
        starts.extend(random_starts(nodes, region, cfg.starts, cfg.seed));
        let runs: Vec<Option<(Vec<f64>, f64, usize, bool)>> =
            starts.par_iter().map(|s| self.ascend(&rule, &kq, q, s, cfg.budget, cfg.tol)).collect();
        let mut best: Option<(Vec<f64>, f64, usize, bool)> = None;
        for run in runs.into_iter().flatten() {
            if best.as_ref().map_or(true, |b| run.1 > b.1) {
                best = Some(run);
            }
        }
        let (u, value, iterations, converged) =
            best.ok_or_else(|| Error::Numeric("every ascent start vanished on the region".into()))?;
        Ok(SupremumEstimate {
            q,
            r: match *region {
                Region::Ball { r } | Region::Complement { r } => r,
                Region::Annulus { outer, .. } => outer,
            },
            region: *region,
            value,
            maximizer: Some(self.function(u)),
            iterations,
            converged,
        })
    }
}

fn random_starts(nodes: &[f64], region: &Region, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let (lo, hi) = region.bounds();
    let lo = lo.max(nodes[0]);
    let hi = hi.min(nodes[nodes.len() - 1]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let bumps = 1 + rng.random_range(0..2);
            let mut u = vec![0.0; nodes.len()];
            for _ in 0..bumps {
                let c = (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp();
                let w = c * (0.1 + 0.9 * rng.random::<f64>());
                let a = 0.5 + rng.random::<f64>();
                for (x, &r) in u.iter_mut().zip(nodes) {
                    *x += a * (-((r - c) / w).powi(2)).exp();
                }
            }
            u
        })
        .collect()
}

/// Lower bound for `S0(q, R) = sup_{‖u‖=1} ∫_{B_R} K |u|^q`.
pub fn estimate_s0(q: f64, r: f64, v: &PotentialFamily, k: &PotentialFamily, params: &SpaceParams, cfg: &AscentConfig) -> Result<SupremumEstimate> {
    let sphere = NormSphere::new(&cfg.grid.build(params.n)?, v, params)?;
    sphere.supremum(&Region::Ball { r }, q, k, cfg, &[])
}

/// Lower bound for `S∞(q, R) = sup_{‖u‖=1} ∫_{B_R^c} K |u|^q`.
pub fn estimate_sinf(q: f64, r: f64, v: &PotentialFamily, k: &PotentialFamily, params: &SpaceParams, cfg: &AscentConfig) -> Result<SupremumEstimate> {
    let sphere = NormSphere::new(&cfg.grid.build(params.n)?, v, params)?;
    sphere.supremum(&Region::Complement { r }, q, k, cfg, &[])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum End {
    Zero,
    Infinity,
}

/// Estimates at each radius, warm-started from the neighbor that makes the
/// monotonicity exact: increasing `R` for `S0`, decreasing `R` for `S∞`.
/// Returned in the order of `radii`.
pub fn supremum_series(
    end: End,
    q: f64,
    radii: &[f64],
    v: &PotentialFamily,
    k: &PotentialFamily,
    params: &SpaceParams,
    cfg: &AscentConfig,
) -> Result<Vec<SupremumEstimate>> {
    let sphere = NormSphere::new(&cfg.grid.build(params.n)?, v, params)?;
    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]));
    if end == End::Infinity {
        order.reverse();
    }
    let mut out: Vec<Option<SupremumEstimate>> = vec![None; radii.len()];
    let mut warm: Vec<RadialFunction> = Vec::new();
    for i in order {
        let region = match end {
            End::Zero => Region::Ball { r: radii[i] },
            End::Infinity => Region::Complement { r: radii[i] },
        };
        let est = sphere.supremum(&region, q, k, cfg, &warm)?;
        warm = vec![est.maximizer().clone()];
        out[i] = Some(est);
    }
    Ok(out.into_iter().map(|e| e.expect("every radius estimated")).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub end: End,
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Least-squares slope of `ln value` against `ln R`.
pub fn decay_rate_fit(estimates: &[SupremumEstimate], end: End) -> Result<DecayFit> {
    if estimates.len() < 3 {
        return domain(format!("a decay fit needs at least 3 estimates, got {}", estimates.len()));
    }
    if let Some(e) = estimates.iter().find(|e| !e.converged) {
        return domain(format!("estimate at R = {} did not converge", e.r));
    }
    let mut rs: Vec<f64> = estimates.iter().map(|e| e.r).collect();
    rs.sort_by(f64::total_cmp);
    if rs.windows(2).any(|w| w[0] == w[1]) {
        return domain("decay fit radii must be distinct");
    }
    if estimates.iter().any(|e| !(e.value > 0.0)) {
        return domain("decay fit needs positive estimates");
    }
    let pts: Vec<(f64, f64)> = estimates.iter().map(|e| (e.r.ln(), e.value.ln())).collect();
    let (slope, intercept) = least_squares(&pts);
    Ok(DecayFit { end, slope, intercept, points: pts.len() })
}

pub fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Outcome of the annulus estimate
/// `∫_{B_R∖B_r} K|u|^q ≤ C ‖K‖_{L^t} (∫_{B_R∖B_r} u²)^{(q̃-1)/2} ‖u‖^{1+q-q̃}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusReport {
    pub t: f64,
    pub q_tilde: f64,
    pub lhs: f64,
    pub k_norm: f64,
    pub l2_annulus: f64,
    pub norm: f64,
    /// `lhs` divided by the right-hand side without its constant.
    pub empirical_constant: f64,
    /// `S (C_St r^{-(N-2s)/2})^{q-q̃}` with the discrete Strauss constant.
    pub proof_constant: f64,
    pub ratio: f64,
}

/// Feasible window for `t`: `(2*_s)' < t` and `q̃ = 2(1 + s/N - 1/t) < q`.
pub fn annulus_window(q: f64, params: &SpaceParams) -> Result<(f64, Option<f64>)> {
    let n = params.nf();
    let s = params.s;
    let lower = 2.0 * n / (n + 2.0 * s);
    let d = 2.0 * n + 2.0 * s - n * q;
    let upper = (d > 0.0).then(|| 2.0 * n / d);
    if let Some(u) = upper {
        if !(u > lower) {
            return domain(format!("no admissible t for q = {q}: window ({lower}, {u}) is empty"));
        }
    }
    Ok((lower, upper))
}

/// Log-scale midpoint of the window; an unbounded window is cut at `4 (2*_s)'`.
pub fn annulus_t(q: f64, params: &SpaceParams) -> Result<f64> {
    let (lo, hi) = annulus_window(q, params)?;
    let hi = hi.unwrap_or(4.0 * lo);
    Ok((lo * hi).sqrt())
}

pub fn check_annulus_bound(
    u: &RadialFunction,
    r: f64,
    big_r: f64,
    q: f64,
    k: &PotentialFamily,
    v: &PotentialFamily,
    params: &SpaceParams,
) -> Result<AnnulusReport> {
    if !(r > 0.0 && big_r > r) {
        return domain(format!("annulus needs 0 < r < R, got r = {r}, R = {big_r}"));
    }
    if !(q > 1.0) {
        return domain(format!("q = {q} must exceed 1"));
    }
    if u.is_zero() {
        return domain("the annulus estimate needs u ≠ 0");
    }
    let t = annulus_t(q, params)?;
    let q_tilde = 2.0 * (1.0 + params.s / params.nf() - 1.0 / t);
    if !(q_tilde > 1.0 && q_tilde < q) {
        return Err(Error::Numeric(format!("q̃ = {q_tilde} outside (1, {q}) for t = {t}")));
    }
    let region = Region::Annulus { inner: r, outer: big_r };
    let rule = RegionRule::new(&u.grid, &region);
    let lhs = rule.integrate(&u.values, |x, y| k.k(x) * y.abs().powf(q));
    let l2 = rule.integrate(&u.values, |_, y| y * y);
    if !(l2 > 0.0) {
        return domain("u vanishes on the annulus");
    }
    let area = sphere_area(params.n);
    let nm1 = params.n as i32 - 1;
    let (kt, _) = adaptive(|x| k.k(x).powf(t) * x.powi(nm1), r, big_r, 1e-12, 0.0);
    let k_norm = (area * kt).powf(1.0 / t);
    let norm = spaces::hsv_norm(&u.with_values(u.values.clone()), v, params)?;
    let rhs_shape = k_norm * l2.powf((q_tilde - 1.0) / 2.0) * norm.powf(1.0 + q - q_tilde);
    let empirical_constant = lhs / rhs_shape;
    let sphere = NormSphere::new(&u.grid, v, params)?;
    let c_st = sphere.strauss_constant();
    let proof_constant = spaces::sobolev_embedding_constant(params) * (c_st * r.powf(-params.strauss_rate())).powf(q - q_tilde);
    Ok(AnnulusReport { t, q_tilde, lhs, k_norm, l2_annulus: l2, norm, empirical_constant, proof_constant, ratio: empirical_constant / proof_constant })
}

/// The symbols of the weighted Hölder bound: region `Ω`, exponents `α`, `β`,
/// envelope `|u| ≤ m |x|^{-ν}` and `Λ = sup_Ω K / (|x|^α V^β)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundContext {
    pub region: Region,
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
    pub m: f64,
    pub lambda: f64,
    pub v: PotentialFamily,
    pub k: PotentialFamily,
}

impl BoundContext {
    /// Computes `Λ` as the maximum over the grid nodes in the region.
    pub fn new(
        grid: &RadialGrid,
        region: Region,
        alpha: f64,
        beta: f64,
        nu: f64,
        m: f64,
        v: &PotentialFamily,
        k: &PotentialFamily,
    ) -> Result<Self> {
        region.validate()?;
        if !(0.0..=1.0).contains(&beta) {
            return domain(format!("β = {beta} must lie in [0, 1]"));
        }
        if !(m > 0.0) {
            return domain(format!("envelope constant m = {m} must be positive"));
        }
        let mut lambda: f64 = 0.0;
        for &r in grid.nodes().iter().filter(|&&r| region.contains(r)) {
            let vb = if beta == 0.0 { 1.0 } else { v.v(r).powf(beta) };
            lambda = lambda.max(k.k(r) / (r.powf(alpha) * vb));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return domain(format!("Λ = {lambda} is not finite and positive on {region:?}"));
        }
        Ok(BoundContext { region, alpha, beta, nu, m, lambda, v: v.clone(), k: k.clone() })
    }

    /// Context whose envelope is the tightest one through the nodes of `u`.
    pub fn fitted(u: &RadialFunction, region: Region, alpha: f64, beta: f64, nu: f64, v: &PotentialFamily, k: &PotentialFamily) -> Result<Self> {
        let m = u
            .grid
            .nodes()
            .iter()
            .zip(&u.values)
            .filter(|(r, _)| region.contains(**r))
            .map(|(r, x)| x.abs() * r.powf(nu))
            .fold(0.0, f64::max);
        Self::new(&u.grid, region, alpha, beta, nu, m * (1.0 + 1e-12), v, k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HolderCase {
    /// `0 ≤ β ≤ 1/2`.
    Low,
    /// `1/2 < β < 1`.
    High,
    /// `β = 1`.
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma41Report {
    pub case: HolderCase,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub passed: bool,
}

/// Slack for quadrature error in the inequality checks.
pub const INEQUALITY_SLACK: f64 = 5e-2;

/// `∫_{Ω ∩ (0, r_M]} |x|^γ dx` in closed form; infinite when divergent at 0.
fn power_integral(region: &Region, gamma: f64, n: usize, r_max: f64) -> f64 {
    let (lo, hi) = region.bounds();
    let hi = hi.min(r_max);
    if hi <= lo {
        return 0.0;
    }
    let e = gamma + n as f64;
    let radial = if e.abs() < 1e-14 {
        if lo == 0.0 {
            f64::INFINITY
        } else {
            (hi / lo).ln()
        }
    } else if lo == 0.0 && e < 0.0 {
        f64::INFINITY
    } else {
        (hi.powf(e) - lo.powf(e)) / e
    };
    sphere_area(n) * radial
}

/// Checks `∫_Ω K|u|^q ≤ RHS` for the case of the weighted Hölder bound
/// selected by `β`.
pub fn check_lemma41(u: &RadialFunction, ctx: &BoundContext, q: f64, params: &SpaceParams) -> Result<Lemma41Report> {
    let beta = ctx.beta;
    if !(q > 1f64.max(2.0 * beta)) {
        return domain(format!("q = {q} must exceed max(1, 2β) = {}", 1f64.max(2.0 * beta)));
    }
    for (i, (&r, &x)) in u.grid.nodes().iter().zip(&u.values).enumerate() {
        if ctx.region.contains(r) && x.abs() > ctx.m * r.powf(-ctx.nu) {
            return domain(format!("envelope |u| ≤ m r^(-ν) fails at node {i} (r = {r}): |u| = {}", x.abs()));
        }
    }
    let rule = RegionRule::new(&u.grid, &ctx.region);
    let lhs = rule.integrate(&u.values, |r, x| ctx.k.k(r) * x.abs().powf(q));
    let norm = spaces::hsv_norm(u, &ctx.v, params)?;
    let (n, s, nf) = (params.n, params.s, params.nf());
    let (alpha, nu, m, lambda) = (ctx.alpha, ctx.nu, ctx.m, ctx.lambda);
    let r_max = u.grid.r_max();
    let (case, rhs) = if beta <= 0.5 {
        let d = nf + 2.0 * s * (1.0 - 2.0 * beta);
        let gamma = 2.0 * nf / d * (alpha - nu * (q - 1.0));
        let integral = power_integral(&ctx.region, gamma, n, r_max);
        let sob = spaces::sobolev_embedding_constant(params);
        (HolderCase::Low, lambda * m.powf(q - 1.0) * integral.powf(d / (2.0 * nf)) * sob.powf(1.0 - 2.0 * beta) * norm)
    } else if beta < 1.0 {
        let gamma = (alpha - nu * (q - 2.0 * beta)) / (1.0 - beta);
        let integral = power_integral(&ctx.region, gamma, n, r_max);
        (HolderCase::High, lambda * m.powf(q - 2.0 * beta) * integral.powf(1.0 - beta) * norm.powf(2.0 * beta))
    } else {
        let e = 2.0 * (alpha - nu * (q - 2.0));
        let weighted = rule.integrate(&u.values, |r, x| r.powf(e) * ctx.v.v(r) * x * x);
        (HolderCase::One, lambda * m.powf(q - 2.0) * weighted.sqrt() * norm)
    };
    let ratio = lhs / rhs;
    Ok(Lemma41Report { case, lhs, rhs, ratio, passed: lhs <= rhs * (1.0 + INEQUALITY_SLACK) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::{delta_zero, WeightExponents};

    fn params() -> SpaceParams {
        SpaceParams::new(3, 0.75).unwrap()
    }

    fn quick() -> AscentConfig {
        AscentConfig { starts: 4, ..Default::default() }
    }

    #[test]
    fn region_rule_integrates_constants() {
        let g = RadialGrid::default_for(3);
        let one = vec![1.0; g.len()];
        let ball = RegionRule::new(&g, &Region::Ball { r: 0.7 }).integrate(&one, |_, x| x);
        assert!((ball / (4.0 / 3.0 * std::f64::consts::PI * 0.343) - 1.0).abs() < 1e-12);
        let ann = RegionRule::new(&g, &Region::Annulus { inner: 0.5, outer: 2.0 }).integrate(&one, |r, _| r);
        let exact = std::f64::consts::PI * (16.0 - 0.0625);
        assert!((ann / exact - 1.0).abs() < 1e-12);
    }

    #[test]
    fn maximizer_is_normalized_and_value_is_its_integral() {
        let p = params();
        let v = PotentialFamily::constant();
        let est = estimate_s0(3.0, 0.5, &v, &v, &p, &quick()).unwrap();
        let u = est.maximizer();
        assert!((spaces::hsv_norm(u, &v, &p).unwrap() - 1.0).abs() < 1e-8);
        let direct = region_integral(u, &Region::Ball { r: 0.5 }, &v, 3.0).unwrap();
        assert!((direct - est.value).abs() < 1e-12 * est.value);
        assert!(est.converged);
    }

    #[test]
    fn l2_supremum_is_at_most_one_for_unit_potential() {
        let p = params();
        let v = PotentialFamily::constant();
        let est = estimate_s0(2.0, 40.0, &v, &v, &p, &quick()).unwrap();
        assert!(est.value <= 1.0 + 1e-10, "{}", est.value);
        assert!(est.value > 0.5);
    }

    #[test]
    fn objective_is_linear_in_k() {
        let p = params();
        let g = GridSpec::default().build(3).unwrap();
        let radii = g.nodes().to_vec();
        let tab = |c: f64| PotentialFamily::Tabulated {
            radii: radii.clone(),
            v: vec![1.0; radii.len()],
            k: vec![c; radii.len()],
            envelope: None,
        };
        let a = estimate_s0(3.0, 1.0, &tab(1.0), &tab(1.0), &p, &quick()).unwrap();
        let b = estimate_s0(3.0, 1.0, &tab(1.0), &tab(1e-12), &p, &quick()).unwrap();
        assert!((b.value / a.value / 1e-12 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn complement_maximizer_sits_outside() {
        let p = params();
        let v = PotentialFamily::example_exponential();
        let est = estimate_sinf(2.5, 2.0, &v, &v, &p, &quick()).unwrap();
        let u = est.maximizer();
        let inside = region_integral(u, &Region::Ball { r: 2.0 }, &v, 2.5).unwrap();
        assert!(est.value > 10.0 * inside, "{} vs {inside}", est.value);
    }

    #[test]
    fn series_are_monotone_and_s0_slope_respects_delta() {
        let p = params();
        let v = PotentialFamily::constant();
        let radii = [0.1, 0.2, 0.4];
        let s0 = supremum_series(End::Zero, 3.0, &radii, &v, &v, &p, &quick()).unwrap();
        for w in s0.windows(2) {
            assert!(w[0].value <= w[1].value * (1.0 + 1e-3));
        }
        let fit = decay_rate_fit(&s0, End::Zero).unwrap();
        let we = WeightExponents::new(0.0, 0.0, 0.0, 1.0).unwrap();
        let d0 = delta_zero(3.0, &we, &p).unwrap();
        assert!(fit.slope >= d0 - 0.1, "slope {} vs δ0 {d0}", fit.slope);
    }

    #[test]
    fn decay_fit_of_exact_power_law() {
        let g = Arc::new(RadialGrid::default_for(3));
        let mk = |r: f64| SupremumEstimate {
            q: 2.0,
            r,
            region: Region::Ball { r },
            value: r,
            maximizer: Some(RadialFunction::zeros(&g)),
            iterations: 1,
            converged: true,
        };
        let fit = decay_rate_fit(&[mk(1.0), mk(2.0), mk(5.0)], End::Zero).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-9);
        assert!(decay_rate_fit(&[mk(1.0), mk(2.0)], End::Zero).is_err());
        let mut bad = mk(3.0);
        bad.converged = false;
        assert!(decay_rate_fit(&[mk(1.0), mk(2.0), bad], End::Zero).is_err());
    }

    #[test]
    fn annulus_window_for_q3() {
        let p = params();
        let (lo, hi) = annulus_window(3.0, &p).unwrap();
        assert!((lo - 4.0 / 3.0).abs() < 1e-14);
        // 2N + 2s - Nq = 6 + 1.5 - 9 < 0: no upper limit
        assert!(hi.is_none());
        let (_, hi) = annulus_window(1.5, &p).unwrap();
        assert!((hi.unwrap() - 6.0 / 3.0).abs() < 1e-14);
        let t = annulus_t(1.5, &p).unwrap();
        let qt = 2.0 * (1.0 + 0.25 - 1.0 / t);
        assert!(qt > 1.0 && qt < 1.5);
    }

    #[test]
    fn annulus_constant_is_stable_under_refinement() {
        let p = params();
        let v = PotentialFamily::constant();
        let k = PotentialFamily::example_exponential();
        let bump = |r: f64| (-(r - 1.0).powi(2) * 4.0).exp();
        let coarse = Arc::new(RadialGrid::default_for(3));
        let fine = Arc::new(coarse.refined().unwrap());
        let c = |g: &Arc<RadialGrid>| {
            let u = RadialFunction::from_fn(g, bump, Extrapolation::ZeroBeyond).unwrap();
            check_annulus_bound(&u, 0.5, 2.0, 3.0, &k, &v, &p).unwrap()
        };
        let (a, b) = (c(&coarse), c(&fine));
        assert!((a.empirical_constant / b.empirical_constant - 1.0).abs() < 0.05);
        assert!(b.empirical_constant <= b.proof_constant);
    }

    #[test]
    fn lemma41_rejects_bad_inputs() {
        let p = params();
        let g = Arc::new(RadialGrid::default_for(3));
        let v = PotentialFamily::constant();
        let u = RadialFunction::from_fn(&g, |r| (-r * r).exp(), Extrapolation::ZeroBeyond).unwrap();
        let ctx = BoundContext::fitted(&u, Region::Ball { r: 1.0 }, 0.0, 0.75, 0.0, &v, &v).unwrap();
        assert!(check_lemma41(&u, &ctx, 1.4, &p).is_err());
        let tight = BoundContext::new(&g, Region::Ball { r: 1.0 }, 0.0, 0.0, 0.0, 0.5, &v, &v).unwrap();
        let err = check_lemma41(&u, &tight, 3.0, &p).unwrap_err();
        assert!(err.to_string().contains("node"));
    }

    #[test]
    fn strauss_constant_bounds_unit_functions() {
        let p = params();
        let v = PotentialFamily::constant();
        let g = GridSpec::default().build(3).unwrap();
        let sphere = NormSphere::new(&g, &v, &p).unwrap();
        let c = sphere.strauss_constant();
        let est = sphere.supremum(&Region::Ball { r: 1.0 }, 3.0, &v, &quick(), &[]).unwrap();
        let rate = p.strauss_rate();
        for (r, x) in g.nodes().iter().zip(&est.maximizer().values) {
            assert!(x.abs() * r.powf(rate) <= c * (1.0 + 1e-10));
        }
    }
}
