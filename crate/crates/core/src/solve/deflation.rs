use nalgebra::{DMatrix, DVector};

use super::mountain::{mountain_pass_on, newton, MountainPassConfig, Solution};
use super::{default_samples, Nonlinearity, Problem};
use crate::error::{domain, Error, Result};
use crate::exponents::SpaceParams;
use crate::potentials::PotentialFamily;

const ODD_TOL: f64 = 1e-12;
const MAX_DEFLATED_STEPS: usize = 200;

/// Deflation operator `M(u) = Π_k (1 + 1/‖u − u_k‖²)` over the known roots.
struct Deflation<'a> {
    problem: &'a Problem,
    roots: Vec<Vec<f64>>,
}

impl Deflation<'_> {
    fn distances(&self, u: &[f64]) -> Vec<(Vec<f64>, f64)> {
        self.roots
            .iter()
            .map(|r| {
                let d: Vec<f64> = u.iter().zip(r).map(|(a, b)| a - b).collect();
                let d2 = self.problem.norm_sq(&d);
                (d, d2)
            })
            .collect()
    }

    fn factor(&self, u: &[f64]) -> f64 {
        self.distances(u).iter().map(|(_, d2)| 1.0 + 1.0 / d2).product()
    }

    /// `∇ ln M(u) · δ` in the `H^s_V` pairing.
    fn log_derivative(&self, u: &[f64], delta: &[f64]) -> f64 {
        self.distances(u)
            .iter()
            .map(|(d, d2)| -2.0 * self.problem.inner(d, delta) / (d2 * (d2 + 1.0)))
            .sum()
    }
}

/// Laguerre–Gaussian profile `L_m^{(N/2-1)}(c r²) e^{-c r²/2}` with `m`
/// interior sign changes.
fn nodal_profile(problem: &Problem, m: usize, c: f64) -> Vec<f64> {
    let alpha = problem.params.n as f64 / 2.0 - 1.0;
    problem
        .grid
        .nodes()
        .iter()
        .map(|&r| {
            let x = c * r * r;
            laguerre(m, alpha, x) * (-0.5 * x).exp()
        })
        .collect()
}

fn laguerre(m: usize, alpha: f64, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 1.0 + alpha - x);
    if m == 0 {
        return prev;
    }
    for k in 1..m {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Gaussian rate `c` whose profile has the same second moment as `u`.
fn matching_rate(problem: &Problem, u: &[f64]) -> f64 {
    let nodes = problem.grid.nodes();
    let u2: Vec<f64> = u.iter().map(|x| x * x).collect();
    let r2u2: Vec<f64> = u2.iter().zip(nodes).map(|(a, r)| a * r * r).collect();
    let second = problem.grid.integrate(&r2u2) / problem.grid.integrate(&u2);
    problem.params.n as f64 / (2.0 * second)
}

/// Splits `u` into its nodal components. Sign domains whose amplitude is
/// negligible are merged into their neighbor so that round-off in the tail
/// does not create components.
fn nodal_components(u: &[f64]) -> Vec<Vec<f64>> {
    let amp = u.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let floor = 1e-6 * amp;
    let mut label = vec![0usize; u.len()];
    let mut current = 0;
    let mut sign = 0.0;
    for (i, &x) in u.iter().enumerate() {
        if x.abs() > floor {
            let sg = x.signum();
            if sign != 0.0 && sg != sign {
                current += 1;
            }
            sign = sg;
        }
        label[i] = current;
    }
    (0..=current)
        .map(|c| u.iter().zip(&label).map(|(x, l)| if *l == c { *x } else { 0.0 }).collect())
        .collect()
}

/// Maximum of `ℰ(Σ a_j w_j)` over `a_j > 0`: the point of the nodal Nehari
/// set spanned by the components of `v`.
struct NodalTop {
    top: Vec<f64>,
    max: f64,
}

fn nodal_top(problem: &Problem, v: &[f64], pieces: usize) -> Option<NodalTop> {
    let w = nodal_components(v);
    if w.len() != pieces {
        return None;
    }
    let p = w.len();
    let gram = DMatrix::from_fn(p, p, |i, j| problem.inner(&w[i], &w[j]));
    let masses = problem.masses();
    let (_, kn) = problem.potential_nodes();
    let f = problem.f;
    let combine = |a: &[f64]| -> Vec<f64> {
        (0..v.len()).map(|i| (0..p).map(|j| a[j] * w[j][i]).sum()).collect()
    };
    let value = |a: &[f64]| -> f64 {
        let av = DVector::from_column_slice(a);
        0.5 * av.dot(&(&gram * &av)) - problem.nonlinear_energy(&combine(a))
    };
    let derivatives = |a: &[f64]| -> (DVector<f64>, DMatrix<f64>) {
        let u = combine(a);
        let av = DVector::from_column_slice(a);
        let mut grad = &gram * &av;
        let mut hess = gram.clone();
        for i in 0..u.len() {
            let mk = masses[i] * kn[i];
            let (fu, fp) = (f.f(u[i]), f.fprime(u[i]));
            for j in 0..p {
                if w[j][i] == 0.0 {
                    continue;
                }
                grad[j] -= mk * fu * w[j][i];
                hess[(j, j)] -= mk * fp * w[j][i] * w[j][i];
            }
        }
        (grad, hess)
    };
    // each component on its own ray first, then Newton on the coupled system
    let mut a = vec![0.0; p];
    for j in 0..p {
        let mut e = vec![0.0; p];
        e[j] = 1.0;
        let along = |t: f64| -> f64 {
            e[j] = t;
            value(&e)
        };
        a[j] = ray_argmax(along)?;
    }
    let mut current = value(&a);
    for _ in 0..100 {
        let (grad, hess) = derivatives(&a);
        let scale = grad.iter().zip(&a).map(|(g, x)| (g * x).abs()).fold(0.0, f64::max);
        if scale <= 1e-14 * current.abs().max(1.0) {
            break;
        }
        let neg = -&hess;
        let dir = match neg.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => grad.component_div(&neg.diagonal().map(|d| d.abs().max(1e-300))),
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let cand: Vec<f64> = a.iter().zip(dir.iter()).map(|(x, d)| x + t * d).collect();
            if cand.iter().all(|x| *x > 0.0) {
                let cv = value(&cand);
                if cv >= current {
                    a = cand;
                    current = cv;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let top = combine(&a);
    let max = problem.energy(&top);
    Some(NodalTop { top, max })
}

/// Positive maximizer of a function that is positive near 0 and tends to
/// `-∞`, by doubling and golden-section search.
fn ray_argmax(mut phi: impl FnMut(f64) -> f64) -> Option<f64> {
    let mut end = 1e-3;
    let mut prev = phi(end);
    loop {
        end *= 2.0;
        let cur = phi(end);
        if cur < prev && cur < 0.0 {
            break;
        }
        prev = cur;
        if end > 1e30 {
            return None;
        }
    }
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, end);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (phi(c), phi(d));
    while hi - lo > 1e-13 * hi {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = phi(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = phi(d);
        }
    }
    Some(0.5 * (lo + hi))
}

/// Steepest descent of the nodal maximum, the sign-changing analogue of the
/// ray-path iteration.
fn nodal_descent(problem: &Problem, start: &[f64], pieces: usize, config: &MountainPassConfig) -> Option<Vec<f64>> {
    let mut cur = nodal_top(problem, start, pieces)?;
    let mut step = 1.0f64;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    for _ in 0..config.max_outer {
        let u = cur.top.clone();
        let nu = problem.norm(&u);
        let (g, gn) = problem.gradient(&u);
        let g = g.as_slice().to_vec();
        if gn < config.polish_switch * nu {
            break;
        }
        if let Some((pu, pg)) = &prev {
            let s: Vec<f64> = u.iter().zip(pu).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g.iter().zip(pg).map(|(a, b)| a - b).collect();
            let sy = problem.inner(&s, &y);
            if sy > 0.0 {
                step = (problem.norm_sq(&s) / sy).clamp(1e-6, 1e3);
            }
        }
        let mut tau = step;
        let mut next = None;
        for _ in 0..50 {
            let cand: Vec<f64> = u.iter().zip(&g).map(|(a, b)| a - tau * b).collect();
            if let Some(t) = nodal_top(problem, &cand, pieces) {
                if t.max <= cur.max - 1e-4 * tau * gn * gn {
                    next = Some(t);
                    break;
                }
            }
            tau *= 0.5;
        }
        let Some(t) = next else {
            break;
        };
        step = tau;
        prev = Some((u, g));
        cur = t;
    }
    Some(cur.top)
}

/// Checks `f(-t) = -f(t)` on the default samples.
pub fn is_odd_on_samples(f: &Nonlinearity) -> bool {
    default_samples().iter().all(|&t| {
        let (a, b) = (f.f(-t), -f.f(t));
        (a - b).abs() <= ODD_TOL * a.abs().max(1.0)
    })
}

/// Newton's method on `M(u) ℰ'(u) = 0`, damped on the deflated residual.
fn deflated_newton(defl: &Deflation, mut u: Vec<f64>, tol: f64) -> (Vec<f64>, f64) {
    let problem = defl.problem;
    let (_, mut gn) = problem.gradient(&u);
    let mut merit = defl.factor(&u) * gn;
    for _ in 0..MAX_DEFLATED_STEPS {
        if gn < tol {
            break;
        }
        let r = problem.functional(&u);
        let Some(step) = problem.jacobian(&u).lu().solve(&(-r)) else {
            break;
        };
        let denom = 1.0 - defl.log_derivative(&u, step.as_slice());
        let step: DVector<f64> = if denom.abs() > 1e-12 { step / denom } else { step };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let cand: Vec<f64> = u.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            let (_, cn) = problem.gradient(&cand);
            let cm = defl.factor(&cand) * cn;
            if cm.is_finite() && cm < (1.0 - 1e-4 * t) * merit {
                u = cand;
                gn = cn;
                merit = cm;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (u, gn)
}

fn finish(problem: &Problem, u: Vec<f64>, tol: f64, max_newton: usize) -> Result<Solution> {
    let (u, steps) = newton(problem, u, tol, max_newton)?;
    Ok(Solution::from_state(problem, u, None, steps))
}

/// Finds a critical point distinct from `found` and their negatives.
///
/// The known solutions (and `0`) are removed by deflation and Newton's method
/// is restarted from nodal profiles until it converges to a new root at
/// `H^s_V` distance above `config.separation` from every `±u_k`.
pub fn deflate_and_continue(
    found: &[Solution],
    v: &PotentialFamily,
    k: &PotentialFamily,
    f: &Nonlinearity,
    params: &SpaceParams,
    config: &MountainPassConfig,
) -> Result<Solution> {
    if found.is_empty() {
        return domain("deflation needs at least one known solution");
    }
    let f = if config.nonneg { f.truncated() } else { *f };
    if !is_odd_on_samples(&f) {
        return domain("deflation needs an odd nonlinearity (nonneg truncation breaks oddness)");
    }
    let grid = found[0].profile().grid.clone();
    if found.iter().any(|s| s.profile().grid.fingerprint() != grid.fingerprint()) {
        return Err(Error::Usage("known solutions live on different grids".into()));
    }
    let problem = Problem::new(&grid, params, v, k, &f, found[0].profile().extrapolation)?;
    deflate_on(&problem, found, config)
}

pub(crate) fn deflate_on(problem: &Problem, found: &[Solution], config: &MountainPassConfig) -> Result<Solution> {
    let mut roots = vec![vec![0.0; problem.dim()]];
    for s in found {
        let u = &s.profile().values;
        roots.push(u.clone());
        roots.push(u.iter().map(|x| -x).collect());
    }
    let defl = Deflation { problem, roots };
    let c0 = matching_rate(problem, &found[0].profile().values);
    let scales = [1.0, 2.0, 0.5, 4.0];
    let mut near_misses = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    for attempt in 0..config.deflation_attempts {
        let m = 1 + attempt % 3;
        let c = c0 * scales[(attempt / 3) % scales.len()];
        let Some(start) = nodal_descent(problem, &nodal_profile(problem, m, c), m + 1, config) else {
            continue;
        };
        let (u, gn) = deflated_newton(&defl, start, config.tol);
        near_misses.push((attempt, gn));
        let sol = match finish(problem, u, config.tol, config.max_newton) {
            Ok(s) => s,
            Err(_) => continue,
        };
        let sep = defl
            .roots
            .iter()
            .map(|r| {
                let d: Vec<f64> = sol.profile().values.iter().zip(r).map(|(a, b)| a - b).collect();
                problem.norm(&d)
            })
            .fold(f64::INFINITY, f64::min);
        if sol.grad_norm < config.tol && sep > config.separation {
            return Ok(sol);
        }
        if best.map_or(true, |(g, _)| sol.grad_norm < g) {
            best = Some((sol.grad_norm, sep));
        }
    }
    let detail = match best {
        Some((g, sep)) => format!("; best near-miss: gradient norm {g:.3e} at distance {sep:.3e}"),
        None => String::new(),
    };
    Err(Error::Solver {
        message: format!("no new solution after {} deflated restarts{detail}", config.deflation_attempts),
        history: near_misses,
    })
}

/// Up to `count` distinct solutions, sorted by energy: the mountain-pass
/// solution followed by deflated ones.
pub fn solve_many(
    v: &PotentialFamily,
    k: &PotentialFamily,
    f: &Nonlinearity,
    params: &SpaceParams,
    config: &MountainPassConfig,
    count: usize,
) -> Result<Vec<Solution>> {
    let grid = config.grid.build(params.n)?;
    let f = if config.nonneg { f.truncated() } else { *f };
    let problem = Problem::new(&grid, params, v, k, &f, config.extrapolation(params))?;
    let mut out = vec![mountain_pass_on(&problem, config)?];
    while out.len() < count {
        out.push(deflate_on(&problem, &out, config)?);
    }
    out.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(out)
}
