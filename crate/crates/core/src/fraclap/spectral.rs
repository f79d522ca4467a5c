//! Fourier-side discretization: transform a cubic-spline interpolant,
//! multiply by `k^{2s}` and transform back at the nodes.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::grid::RadialGrid;
use crate::quad::{gauss_legendre, Rule};
use crate::special::radial_fourier_kernel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    pub k_max: f64,
    /// Width of the Gauss–Legendre panels in `k`.
    pub panel: f64,
    pub panel_points: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig { k_max: 128.0, panel: 0.1, panel_points: 8 }
    }
}

/// Frequencies and weights of the inverse transform.
pub fn frequency_rule(cfg: &SpectralConfig) -> Rule {
    let base = gauss_legendre(cfg.panel_points);
    let panels = (cfg.k_max / cfg.panel).ceil() as usize;
    let mut nodes = Vec::with_capacity(panels * cfg.panel_points);
    let mut weights = Vec::with_capacity(panels * cfg.panel_points);
    for p in 0..panels {
        let r = base.mapped(p as f64 * cfg.panel, (p + 1) as f64 * cfg.panel);
        nodes.extend(r.nodes);
        weights.extend(r.weights);
    }
    Rule { nodes, weights }
}

/// Second derivatives `M = S u` of the cubic spline through the nodes,
/// clamped to slope 0 at `r_1` (radial symmetry) and to the last secant slope
/// at `r_M`.
fn spline_moments(nodes: &[f64]) -> DMatrix<f64> {
    let m = nodes.len();
    let h: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
    let mut tri = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DMatrix::<f64>::zeros(m, m);
    tri[(0, 0)] = 2.0 * h[0];
    tri[(0, 1)] = h[0];
    rhs[(0, 0)] = -6.0 / h[0];
    rhs[(0, 1)] = 6.0 / h[0];
    for j in 1..m - 1 {
        tri[(j, j - 1)] = h[j - 1];
        tri[(j, j)] = 2.0 * (h[j - 1] + h[j]);
        tri[(j, j + 1)] = h[j];
        rhs[(j, j + 1)] = 6.0 / h[j];
        rhs[(j, j)] = -6.0 / h[j] - 6.0 / h[j - 1];
        rhs[(j, j - 1)] = 6.0 / h[j - 1];
    }
    tri[(m - 1, m - 2)] = h[m - 2];
    tri[(m - 1, m - 1)] = 2.0 * h[m - 2];
    tri.lu().solve(&rhs).expect("spline system is diagonally dominant")
}

/// Matrix `T` with `û(k_m) = Σ_j T[m, j] u_j` for the clamped cubic spline
/// through the nodal values, constant inside `r_1` and continued by the
/// zero-beyond drop.
///
/// A smooth interpolant matters here: for `s > 1/2` the pointwise
/// `(-Δ)^s` of a function with kinks is singular at the kinks.
pub fn forward_matrix(grid: &RadialGrid, freqs: &[f64]) -> DMatrix<f64> {
    let n = grid.dim();
    let nodes = grid.nodes();
    let m = nodes.len();
    let rm = nodes[m - 1];
    let end = grid.zero_end();
    let max_h = nodes.windows(2).fold(end - rm, |a, w| a.max(w[1] - w[0]));
    let max_k = freqs.iter().fold(0.0f64, |a, &k| a.max(k));
    let rules: Vec<Rule> = (0..=points_for(max_k * max_h)).map(|p| gauss_legendre(p.max(1))).collect();
    let core = gauss_legendre(8);
    let rows: Vec<(Vec<f64>, Vec<f64>)> = freqs
        .par_iter()
        .map(|&k| {
            let mut direct = vec![0.0; m];
            let mut moment = vec![0.0; m];
            for (r, w) in core.mapped(0.0, nodes[0]).iter() {
                direct[0] += w * radial_fourier_kernel(n, k, r);
            }
            for j in 0..m - 1 {
                let (a, b) = (nodes[j], nodes[j + 1]);
                let h = b - a;
                for (r, w) in rules[points_for(k * h)].mapped(a, b).iter() {
                    let kern = w * radial_fourier_kernel(n, k, r);
                    let t = (r - a) / h;
                    let s = 1.0 - t;
                    direct[j] += kern * s;
                    direct[j + 1] += kern * t;
                    moment[j] += kern * h * h / 6.0 * (s * s * s - s);
                    moment[j + 1] += kern * h * h / 6.0 * (t * t * t - t);
                }
            }
            for (r, w) in rules[points_for(k * (end - rm))].mapped(rm, end).iter() {
                direct[m - 1] += w * radial_fourier_kernel(n, k, r) * (end - r) / (end - rm);
            }
            (direct, moment)
        })
        .collect();
    let direct = DMatrix::from_fn(freqs.len(), m, |i, j| rows[i].0[j]);
    let moment = DMatrix::from_fn(freqs.len(), m, |i, j| rows[i].1[j]);
    direct + moment * spline_moments(nodes)
}

fn points_for(kh: f64) -> usize {
    6 + (0.6 * kh).ceil() as usize
}

/// Nodal action of `(-Δ)^s` on nodal values.
pub fn spectral_matrix(grid: &RadialGrid, s: f64, cfg: &SpectralConfig) -> DMatrix<f64> {
    let rule = frequency_rule(cfg);
    let t = forward_matrix(grid, &rule.nodes);
    let n = grid.dim();
    let scale = (2.0 * PI).powi(-(n as i32));
    let nodes = grid.nodes();
    let back = DMatrix::from_fn(nodes.len(), rule.len(), |i, m| {
        let k = rule.nodes[m];
        scale * rule.weights[m] * k.powf(2.0 * s) * radial_fourier_kernel(n, nodes[i], k)
    });
    back * t
}
