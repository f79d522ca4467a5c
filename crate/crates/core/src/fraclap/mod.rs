//! Discrete fractional Laplacian on radial grids.
//!
//! Two independent discretizations are provided. `DirectIntegral` is the
//! Galerkin form of the singular integral, `A u · u = [u]²`, turned into a
//! nodal action `M⁻¹ A` with the lumped masses `M` of the hat functions. `Spectral`
//! applies the multiplier `|ξ|^{2s}` through radial Fourier transforms.

mod assembly;
mod spectral;

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use assembly::{assemble, Stiffness};
pub use spectral::{forward_matrix, frequency_rule, spectral_matrix, SpectralConfig};

use crate::error::{Error, Result};
use crate::exponents::SpaceParams;
use crate::grid::{Extrapolation, RadialFunction, RadialGrid};
use crate::potentials::PotentialFamily;
use crate::solve::Nonlinearity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Spectral,
    DirectIntegral,
}

const CACHE_LIMIT: usize = 24;

type Key = (u64, u64, u64);

fn key(grid: &RadialGrid, s: f64, extrapolation: Extrapolation) -> Key {
    let tail = match extrapolation {
        Extrapolation::ZeroBeyond => u64::MAX,
        Extrapolation::PowerTail(e) => e.to_bits(),
    };
    (grid.fingerprint(), s.to_bits(), tail)
}

fn cached<T: Send + Sync + 'static>(
    cache: &'static OnceLock<Mutex<HashMap<Key, Arc<T>>>>,
    k: Key,
    build: impl FnOnce() -> T,
) -> Arc<T> {
    let map = cache.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = map.lock().expect("operator cache").get(&k) {
        return v.clone();
    }
    let v = Arc::new(build());
    let mut guard = map.lock().expect("operator cache");
    if guard.len() >= CACHE_LIMIT {
        guard.clear();
    }
    guard.entry(k).or_insert(v).clone()
}

/// Galerkin stiffness for `(grid, s, extrapolation)`, assembled once per process.
pub fn stiffness(grid: &RadialGrid, params: &SpaceParams, extrapolation: Extrapolation) -> Arc<Stiffness> {
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<Stiffness>>>> = OnceLock::new();
    cached(&CACHE, key(grid, params.s, extrapolation), || {
        assemble(grid, params.s, params.norm_c, extrapolation)
    })
}

fn spectral_cached(grid: &RadialGrid, s: f64) -> Arc<DMatrix<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<DMatrix<f64>>>>> = OnceLock::new();
    cached(&CACHE, key(grid, s, Extrapolation::ZeroBeyond), || {
        spectral_matrix(grid, s, &SpectralConfig::default())
    })
}

#[derive(Debug, Clone)]
pub struct FracLapOperator {
    grid: Arc<RadialGrid>,
    s: f64,
    mode: Mode,
    extrapolation: Extrapolation,
    action: Arc<DMatrix<f64>>,
    stiffness: Option<Arc<Stiffness>>,
}

impl FracLapOperator {
    /// The spectral mode always continues functions by the zero-beyond drop:
    /// power tails slower than `r^{-N/2}` have no Fourier transform.
    pub fn new(grid: &Arc<RadialGrid>, params: &SpaceParams, mode: Mode, extrapolation: Extrapolation) -> Result<Self> {
        if grid.dim() != params.n {
            return Err(Error::Usage(format!("grid dimension {} but N = {}", grid.dim(), params.n)));
        }
        match mode {
            Mode::DirectIntegral => {
                let st = stiffness(grid, params, extrapolation);
                let w = grid.lumped_masses();
                let m = grid.len();
                let action = DMatrix::from_fn(m, m, |i, j| st.matrix[(i, j)] / (sphere(grid) * w[i]));
                Ok(FracLapOperator {
                    grid: grid.clone(),
                    s: params.s,
                    mode,
                    extrapolation,
                    action: Arc::new(action),
                    stiffness: Some(st),
                })
            }
            Mode::Spectral => Ok(FracLapOperator {
                grid: grid.clone(),
                s: params.s,
                mode,
                extrapolation: Extrapolation::ZeroBeyond,
                action: spectral_cached(grid, params.s),
                stiffness: None,
            }),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn extrapolation(&self) -> Extrapolation {
        self.extrapolation
    }

    /// Nodal action matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.action
    }

    pub fn stiffness(&self) -> Option<&Stiffness> {
        self.stiffness.as_deref()
    }

    pub fn apply(&self, u: &RadialFunction) -> Result<RadialFunction> {
        if u.grid.fingerprint() != self.grid.fingerprint() {
            return Err(Error::Usage("function and operator live on different grids".into()));
        }
        Ok(u.with_values(self.apply_values(&u.values)))
    }

    pub fn apply_values(&self, u: &[f64]) -> Vec<f64> {
        let m = u.len();
        (0..m).map(|i| (0..m).map(|j| self.action[(i, j)] * u[j]).sum()).collect()
    }

    /// Writes the action matrix: `u32` LE size, `f32` LE `s`, then row-major `f64` LE.
    pub fn export_binary(&self, path: &Path) -> Result<()> {
        let m = self.grid.len();
        let mut bytes = Vec::with_capacity(8 + 8 * m * m);
        bytes.extend_from_slice(&(m as u32).to_le_bytes());
        bytes.extend_from_slice(&(self.s as f32).to_le_bytes());
        for i in 0..m {
            for j in 0..m {
                bytes.extend_from_slice(&self.action[(i, j)].to_le_bytes());
            }
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }
}

fn sphere(grid: &RadialGrid) -> f64 {
    crate::special::sphere_area(grid.dim())
}

/// Reads a file written by [`FracLapOperator::export_binary`].
pub fn read_binary(path: &Path) -> Result<(f32, DMatrix<f64>)> {
    let bytes = fs::read(path)?;
    if bytes.len() < 8 {
        return Err(Error::Usage("operator file too short".into()));
    }
    let m = u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes")) as usize;
    let s = f32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if bytes.len() != 8 + 8 * m * m {
        return Err(Error::Usage(format!("operator file size does not match M = {m}")));
    }
    let data = &bytes[8..];
    let mat = DMatrix::from_fn(m, m, |i, j| {
        let o = 8 * (i * m + j);
        f64::from_le_bytes(data[o..o + 8].try_into().expect("8 bytes"))
    });
    Ok((s, mat))
}

/// `‖(-Δ)^s u + V u - K f(u)‖` in `L²(R^N)` with the operator `op`.
pub fn pde_residual_with(
    op: &FracLapOperator,
    u: &RadialFunction,
    v: &PotentialFamily,
    k: &PotentialFamily,
    f: &Nonlinearity,
) -> Result<f64> {
    let lu = op.apply(u)?;
    let nodes = u.grid.nodes();
    let res: Vec<f64> = (0..nodes.len())
        .map(|i| {
            let r = nodes[i];
            let e = lu.values[i] + v.v(r) * u.values[i] - k.k(r) * f.f(u.values[i]);
            e * e
        })
        .collect();
    Ok(u.grid.integrate(&res).sqrt())
}

/// PDE residual with the real-space operator for `u`'s own extrapolation.
pub fn pde_residual(
    u: &RadialFunction,
    v: &PotentialFamily,
    k: &PotentialFamily,
    f: &Nonlinearity,
    params: &SpaceParams,
) -> Result<f64> {
    let op = FracLapOperator::new(&u.grid, params, Mode::DirectIntegral, u.extrapolation)?;
    pde_residual_with(&op, u, v, k, f)
}
