//! Radial reduction of the kernel `|x-y|^{-(N+2s)}`.
//!
//! For radial `u`,
//! `∬ |u(x)-u(y)|² |x-y|^{-N-2s} dx dy = ∫_0^∞∫_0^∞ (u(r)-u(ρ))² k(r,ρ) dr dρ`
//! with `k(r,ρ) = r^{N-1} ρ^{N-1} ∫_{S^{N-1}}∫_{S^{N-1}} |rθ-ρω|^{-N-2s} dθ dω`.
//! The kernel is homogeneous, so `k(r,ρ) |r-ρ|^{1+2s} = r^{N-1} g(ln(ρ/r))` with a
//! bounded profile `g`, which is what [`AngularKernel::reduced`] returns.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::quad::adaptive;
use crate::special::{ln_gamma, sphere_area};

/// The profile is tabulated in `y = √x` on `[0, TABLE_Y_MAX]`, which makes the
/// `x^{1+2s}` term at the diagonal smooth enough for cubic interpolation.
const TABLE_Y_MAX: f64 = 4.0;
const TABLE_STEPS_PER_UNIT: usize = 1024;

#[derive(Debug)]
pub struct AngularKernel {
    n: usize,
    s: f64,
    /// `|S^{N-1}| |S^{N-2}|`
    c: f64,
    g0: f64,
    /// Samples of `g` at `x = (j h)²`; `None` when a closed form exists.
    table: Option<Vec<f64>>,
}

impl AngularKernel {
    /// Shared instance for `(N, s)`; the profile table is built once.
    pub fn shared(n: usize, s: f64) -> Arc<AngularKernel> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, u64), Arc<AngularKernel>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = (n, s.to_bits());
        if let Some(k) = cache.lock().expect("kernel cache").get(&key) {
            return k.clone();
        }
        let k = Arc::new(AngularKernel::new(n, s));
        cache.lock().expect("kernel cache").entry(key).or_insert(k).clone()
    }

    pub fn new(n: usize, s: f64) -> Self {
        assert!(n >= 2 && s > 0.0 && s < 1.0);
        let c = sphere_area(n) * sphere_area(n - 1);
        let a = (n as f64 - 1.0) / 2.0;
        let b = 0.5 + s;
        let beta = (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp();
        let g0 = c * 0.5 * beta;
        let mut kernel = AngularKernel { n, s, c, g0, table: None };
        if n != 3 {
            let steps = TABLE_Y_MAX as usize * TABLE_STEPS_PER_UNIT;
            let h = 1.0 / TABLE_STEPS_PER_UNIT as f64;
            let table: Vec<f64> = (0..=steps)
                .into_par_iter()
                .map(|j| {
                    let y = j as f64 * h;
                    kernel.profile_direct(y * y)
                })
                .collect();
            kernel.table = Some(table);
        }
        kernel
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> f64 {
        self.s
    }

    /// `k(r,ρ)`; infinite on the diagonal.
    pub fn eval(&self, r: f64, rho: f64) -> f64 {
        self.reduced(r, rho) / (r - rho).abs().powf(1.0 + 2.0 * self.s)
    }

    /// `k(r,ρ) |r-ρ|^{1+2s}`, bounded and continuous up to the diagonal.
    pub fn reduced(&self, r: f64, rho: f64) -> f64 {
        if self.n == 3 {
            let e = 1.0 + 2.0 * self.s;
            let ratio = (r - rho).abs() / (r + rho);
            return self.c * r * rho * (1.0 - ratio.powf(e)) / e;
        }
        // reference the smaller radius so that the result is exactly symmetric
        let (lo, hi) = if r <= rho { (r, rho) } else { (rho, r) };
        lo.powi(self.n as i32 - 1) * self.profile((hi / lo).ln())
    }

    /// Coefficient of the diagonal singularity:
    /// `k(r,ρ) ≈ local_coefficient(r) |r-ρ|^{-1-2s}` as `ρ → r`.
    pub fn local_coefficient(&self, r: f64) -> f64 {
        r.powi(self.n as i32 - 1) * self.g0
    }

    /// The profile `g(x)` with `ρ = r e^x`.
    pub fn profile(&self, x: f64) -> f64 {
        match &self.table {
            None => {
                let t = x.exp();
                self.reduced(1.0, t)
            }
            Some(_) if x < 0.0 => {
                // g(-x) = e^{-(N-1)x} g(x) by the symmetry of k
                (x * (self.n as f64 - 1.0)).exp() * self.profile(-x)
            }
            Some(tab) => {
                let y = x.sqrt();
                if y >= TABLE_Y_MAX - 2.0 / TABLE_STEPS_PER_UNIT as f64 {
                    return self.profile_direct(x);
                }
                let pos = y * TABLE_STEPS_PER_UNIT as f64;
                let j = (pos.floor() as usize).clamp(1, tab.len() - 3);
                let t = pos - j as f64;
                // cubic Lagrange through j-1 .. j+2
                let (f0, f1, f2, f3) = (tab[j - 1], tab[j], tab[j + 1], tab[j + 2]);
                let w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
                let w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
                let w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
                let w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
                w0 * f0 + w1 * f1 + w2 * f2 + w3 * f3
            }
        }
    }

    /// Profile by direct angular quadrature, used to build the table.
    pub fn profile_direct(&self, x: f64) -> f64 {
        if x == 0.0 {
            return self.g0;
        }
        let t = x.exp();
        let p = (self.n as f64 + 2.0 * self.s) / 2.0;
        let m = self.n as i32 - 2;
        let d = (1.0 - t) * (1.0 - t);
        let integrand = |phi: f64| {
            let h = (0.5 * phi).sin();
            (d + 4.0 * t * h * h).powf(-p) * phi.sin().powi(m)
        };
        // The integrand has a peak of width |1-t|/√t at φ = 0.
        let phi0 = (1.0 - t).abs() / t.sqrt();
        let mut breaks = vec![0.0];
        let mut b = phi0;
        while b < PI {
            breaks.push(b);
            b *= 4.0;
        }
        breaks.push(PI);
        let mut total = 0.0;
        for w in breaks.windows(2) {
            total += adaptive(integrand, w[0], w[1], 1e-13, 0.0).0;
        }
        self.c * t.powi(self.n as i32 - 1) * (1.0 - t).abs().powf(1.0 + 2.0 * self.s) * total
    }
}
