//! Radial grids, radial functions and their CSV/JSON serialization.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quad::{gauss_legendre, gregory_weights};

/// Nodes `r_1 < … < r_M` together with weights for `∫_0^{r_M} g(r) r^{N-1} dr`.
///
/// The piece `[0, r_1]` is integrated by freezing `g` at `r_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    n: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Constant ratio `r_{i+1}/r_i` for geometric grids.
    ratio: Option<f64>,
}

impl RadialGrid {
    pub const DEFAULT_R1: f64 = 1e-3;
    pub const DEFAULT_RM: f64 = 50.0;
    pub const DEFAULT_M: usize = 512;

    pub fn geometric(n: usize, r1: f64, rm: f64, m: usize) -> Result<Self> {
        if !(r1 > 0.0 && rm > r1 && m >= 4) {
            return domain(format!("invalid geometric grid r1={r1}, rM={rm}, M={m}"));
        }
        let delta = (rm / r1).ln() / (m - 1) as f64;
        let mut nodes: Vec<f64> = (0..m).map(|i| r1 * (delta * i as f64).exp()).collect();
        nodes[m - 1] = rm;
        let gamma = gregory_weights(m, 8);
        let nf = n as f64;
        let mut weights: Vec<f64> = nodes.iter().zip(&gamma).map(|(r, g)| delta * g * r.powi(n as i32)).collect();
        weights[0] += r1.powi(n as i32) / nf;
        Ok(RadialGrid { n, nodes, weights, ratio: Some(delta.exp()) })
    }

    pub fn default_for(n: usize) -> Self {
        Self::geometric(n, Self::DEFAULT_R1, Self::DEFAULT_RM, Self::DEFAULT_M).expect("default grid is valid")
    }

    /// Arbitrary nodes; weights from the trapezoid rule on `g r^{N-1}`.
    /// Geometric node sets are detected and get the high-order weights.
    pub fn from_nodes(n: usize, nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 4 {
            return domain("a radial grid needs at least four nodes");
        }
        if nodes[0] <= 0.0 || nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|x| !x.is_finite()) {
            return domain("grid nodes must be positive, finite and strictly increasing");
        }
        let m = nodes.len();
        let q0 = nodes[1] / nodes[0];
        if nodes.windows(2).all(|w| ((w[1] / w[0]) / q0 - 1.0).abs() < 1e-9) {
            let g = Self::geometric(n, nodes[0], nodes[m - 1], m)?;
            if g.nodes.iter().zip(&nodes).all(|(a, b)| ((a - b) / b).abs() < 1e-9) {
                return Ok(RadialGrid { nodes, ..g });
            }
        }
        let p = n as i32 - 1;
        let mut weights = vec![0.0; m];
        for j in 0..m - 1 {
            let h = nodes[j + 1] - nodes[j];
            weights[j] += 0.5 * h * nodes[j].powi(p);
            weights[j + 1] += 0.5 * h * nodes[j + 1].powi(p);
        }
        weights[0] += nodes[0].powi(n as i32) / n as f64;
        Ok(RadialGrid { n, nodes, weights, ratio: None })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn ratio(&self) -> Option<f64> {
        self.ratio
    }

    pub fn r_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// `∫_{R^N} g(|x|) dx` over the ball of radius `r_M`.
    pub fn integrate(&self, g: &[f64]) -> f64 {
        crate::special::sphere_area(self.n) * self.integrate_radial(g)
    }

    /// `∫_0^{r_M} g(r) r^{N-1} dr`.
    pub fn integrate_radial(&self, g: &[f64]) -> f64 {
        debug_assert_eq!(g.len(), self.len());
        g.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    /// Lumped masses `∫ φ_i(r) r^{N-1} dr` of the piecewise-linear hat
    /// functions, with `u = u_0` on `[0, r_1]` folded into the first node.
    /// The last node only carries its inner half hat.
    pub fn lumped_masses(&self) -> Vec<f64> {
        let m = self.len();
        let rule = gauss_legendre(self.n / 2 + 2);
        let mut out = vec![0.0; m];
        out[0] = self.nodes[0].powi(self.n as i32) / self.n as f64;
        for j in 0..m - 1 {
            let (a, b) = (self.nodes[j], self.nodes[j + 1]);
            for (r, w) in rule.mapped(a, b).iter() {
                let t = (r - a) / (b - a);
                let rn = r.powi(self.n as i32 - 1);
                out[j] += w * (1.0 - t) * rn;
                out[j + 1] += w * t * rn;
            }
        }
        out
    }

    /// Refined grid with the same endpoints and twice the number of cells.
    pub fn refined(&self) -> Result<Self> {
        let m = self.len();
        match self.ratio {
            Some(_) => Self::geometric(self.n, self.nodes[0], self.r_max(), 2 * m - 1),
            None => {
                let mut nodes = Vec::with_capacity(2 * m - 1);
                for w in self.nodes.windows(2) {
                    nodes.push(w[0]);
                    nodes.push((w[0] * w[1]).sqrt());
                }
                nodes.push(self.r_max());
                Self::from_nodes(self.n, nodes)
            }
        }
    }

    /// Where a `ZeroBeyond` function reaches zero: one more cell of the
    /// last cell's ratio past `r_M`.
    pub fn zero_end(&self) -> f64 {
        let m = self.nodes.len();
        self.nodes[m - 1] * (self.nodes[m - 1] / self.nodes[m - 2])
    }

    /// Bit-level fingerprint used to key operator caches.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.n.hash(&mut h);
        for x in &self.nodes {
            x.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

/// How a radial function continues beyond the last node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "exponent", rename_all = "snake_case")]
pub enum Extrapolation {
    /// Linear drop to zero over one more grid cell, zero afterwards.
    ZeroBeyond,
    /// `u(r) = u(r_M) (r/r_M)^{exponent}` for `r > r_M`.
    PowerTail(f64),
}

impl Extrapolation {
    pub fn tail_exponent(&self) -> Option<f64> {
        match self {
            Extrapolation::ZeroBeyond => None,
            Extrapolation::PowerTail(e) => Some(*e),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialFunction {
    pub grid: Arc<RadialGrid>,
    pub values: Vec<f64>,
    pub extrapolation: Extrapolation,
}

impl RadialFunction {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>, extrapolation: Extrapolation) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Usage(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite value at node {i}")));
        }
        if let Extrapolation::PowerTail(e) = extrapolation {
            if !e.is_finite() || e > 0.0 {
                return domain(format!("power tail exponent {e} must be finite and nonpositive"));
            }
        }
        Ok(RadialFunction { grid, values, extrapolation })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: &Arc<RadialGrid>, f: F, extrapolation: Extrapolation) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid.clone(), values, extrapolation)
    }

    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        RadialFunction { grid: grid.clone(), values: vec![0.0; grid.len()], extrapolation: Extrapolation::ZeroBeyond }
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        RadialFunction { grid: self.grid.clone(), values, extrapolation: self.extrapolation }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.with_values(self.values.iter().map(|v| c * v).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Point evaluation of the piecewise-linear interpolant and its tail.
    pub fn eval(&self, r: f64) -> f64 {
        let nodes = self.grid.nodes();
        let m = nodes.len();
        if r <= nodes[0] {
            return self.values[0];
        }
        if r >= nodes[m - 1] {
            let um = self.values[m - 1];
            let rm = nodes[m - 1];
            return match self.extrapolation {
                Extrapolation::PowerTail(e) => um * (r / rm).powf(e),
                Extrapolation::ZeroBeyond => {
                    let end = self.grid.zero_end();
                    if r >= end {
                        0.0
                    } else {
                        um * (end - r) / (end - rm)
                    }
                }
            };
        }
        let j = nodes.partition_point(|&x| x <= r) - 1;
        let t = (r - nodes[j]) / (nodes[j + 1] - nodes[j]);
        self.values[j] + t * (self.values[j + 1] - self.values[j])
    }

    /// Writes `path` as CSV with header `r,value` and `path.json` as sidecar.
    pub fn write_csv(&self, path: &Path, s: f64) -> Result<()> {
        let mut text = String::from("r,value\n");
        for (r, v) in self.grid.nodes().iter().zip(&self.values) {
            text.push_str(&format!("{r:e},{v:e}\n"));
        }
        fs::write(path, text)?;
        let meta = Sidecar {
            n: self.grid.dim(),
            s,
            extrapolation: match self.extrapolation {
                Extrapolation::ZeroBeyond => "zero_beyond".into(),
                Extrapolation::PowerTail(_) => "power_tail".into(),
            },
            tail_exponent: self.extrapolation.tail_exponent(),
        };
        fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    /// Reads a function written by [`RadialFunction::write_csv`]; returns it with `s`.
    pub fn read_csv(path: &Path) -> Result<(Self, f64)> {
        let meta: Sidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("r,value") {
            return Err(Error::Usage(format!("{}: expected header r,value", path.display())));
        }
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |p: Option<&str>| -> Result<f64> {
                p.and_then(|x| x.trim().parse().ok())
                    .ok_or_else(|| Error::Usage(format!("{}: bad row {}", path.display(), i + 2)))
            };
            nodes.push(parse(parts.next())?);
            values.push(parse(parts.next())?);
        }
        let extrapolation = match (meta.extrapolation.as_str(), meta.tail_exponent) {
            ("zero_beyond", _) => Extrapolation::ZeroBeyond,
            ("power_tail", Some(e)) => Extrapolation::PowerTail(e),
            (other, _) => return Err(Error::Usage(format!("unknown extrapolation {other}"))),
        };
        let grid = Arc::new(RadialGrid::from_nodes(meta.n, nodes)?);
        Ok((RadialFunction::new(grid, values, extrapolation)?, meta.s))
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    #[serde(rename = "N")]
    n: usize,
    s: f64,
    extrapolation: String,
    tail_exponent: Option<f64>,
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    p.into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_reproduce_volume() {
        for n in 2..=4 {
            let g = RadialGrid::default_for(n);
            let total: f64 = g.weights().iter().sum();
            let r1 = g.nodes()[0];
            let rm = g.r_max();
            let nf = n as f64;
            let exact = (rm.powf(nf) - r1.powf(nf)) / nf;
            let got = total - r1.powf(nf) / nf;
            assert!(((got - exact) / exact).abs() < 1e-10, "n={n}");
            assert!(g.weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn gaussian_moment() {
        let g = RadialGrid::default_for(3);
        let vals: Vec<f64> = g.nodes().iter().map(|r| (-r * r).exp()).collect();
        let exact = std::f64::consts::PI.powf(1.5);
        assert!((g.integrate(&vals) / exact - 1.0).abs() < 1e-9);
    }

    #[test]
    fn nongeometric_grid_is_accepted() {
        let nodes: Vec<f64> = (1..=200).map(|i| i as f64 * 0.05).collect();
        let g = RadialGrid::from_nodes(3, nodes).unwrap();
        assert!(g.ratio().is_none());
        let vals: Vec<f64> = g.nodes().iter().map(|r| (-r * r).exp()).collect();
        assert!((g.integrate(&vals) / std::f64::consts::PI.powf(1.5) - 1.0).abs() < 1e-3);
        assert!(RadialGrid::from_nodes(3, vec![1.0, 0.5, 2.0, 3.0]).is_err());
    }

    #[test]
    fn eval_interpolates_and_extrapolates() {
        let g = Arc::new(RadialGrid::geometric(3, 0.1, 10.0, 50).unwrap());
        let u = RadialFunction::from_fn(&g, |r| 2.0 * r, Extrapolation::PowerTail(-1.0)).unwrap();
        assert!((u.eval(1.234) - 2.468).abs() < 1e-12);
        assert!((u.eval(20.0) - 10.0).abs() < 1e-12);
        assert_eq!(u.eval(0.01), u.values[0]);
        let z = u.with_values(u.values.clone());
        let z = RadialFunction { extrapolation: Extrapolation::ZeroBeyond, ..z };
        assert_eq!(z.eval(100.0), 0.0);
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        let g = Arc::new(RadialGrid::default_for(3));
        let u = RadialFunction::from_fn(&g, |r| (-r).exp(), Extrapolation::PowerTail(-0.75)).unwrap();
        u.write_csv(&path, 0.75).unwrap();
        let (back, s) = RadialFunction::read_csv(&path).unwrap();
        assert_eq!(s, 0.75);
        assert_eq!(back.extrapolation, u.extrapolation);
        assert_eq!(back.grid.ratio().is_some(), true);
        for (a, b) in back.values.iter().zip(&u.values) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1e-300));
        }
    }
}
