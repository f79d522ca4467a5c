use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::quad::adaptive;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonlinearityKind {
    PurePower { q: f64 },
    MinPower { q1: f64, q2: f64 },
    /// `|t|^{q2-2} t / (1 + |t|^{q2-q1})` with `q1 ≤ q2`.
    RationalPower { q1: f64, q2: f64 },
}

/// Scalar nonlinearity `f` with primitive `F(t) = ∫₀ᵗ f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    pub kind: NonlinearityKind,
    pub mu: f64,
    pub truncated_below_zero: bool,
    /// A point with `F(t0) > 0`.
    pub t0: f64,
}

impl Nonlinearity {
    /// Builds `kind` with the largest Ambrosetti–Rabinowitz exponent valid for
    /// the family, `μ = min{q1, q2}`.
    pub fn new(kind: NonlinearityKind) -> Result<Self> {
        let (lo, _) = exponents_of(&kind);
        Self::with_mu(kind, lo)
    }

    pub fn with_mu(kind: NonlinearityKind, mu: f64) -> Result<Self> {
        let (lo, hi) = exponents_of(&kind);
        if !(lo.is_finite() && hi.is_finite()) || lo <= 2.0 {
            return domain(format!("growth exponents must exceed 2, got ({lo}, {hi})"));
        }
        if let NonlinearityKind::RationalPower { q1, q2 } = kind {
            if q1 > q2 {
                return domain(format!("rational power needs q1 ≤ q2, got ({q1}, {q2})"));
            }
        }
        if !(mu > 2.0) {
            return domain(format!("μ must exceed 2, got {mu}"));
        }
        Ok(Nonlinearity { kind, mu, truncated_below_zero: false, t0: 1.0 })
    }

    pub fn pure(q: f64) -> Result<Self> {
        Self::new(NonlinearityKind::PurePower { q })
    }

    pub fn min_power(q1: f64, q2: f64) -> Result<Self> {
        Self::new(NonlinearityKind::MinPower { q1, q2 })
    }

    pub fn rational(q1: f64, q2: f64) -> Result<Self> {
        Self::new(NonlinearityKind::RationalPower { q1, q2 })
    }

    /// Sets `f(t) = 0` for `t < 0`.
    pub fn truncated(mut self) -> Self {
        self.truncated_below_zero = true;
        self
    }

    /// `(q1, q2)` as used by the embedding `L^{q1}_K + L^{q2}_K`.
    pub fn exponents(&self) -> (f64, f64) {
        match self.kind {
            NonlinearityKind::PurePower { q } => (q, q),
            NonlinearityKind::MinPower { q1, q2 } | NonlinearityKind::RationalPower { q1, q2 } => (q1, q2),
        }
    }

    pub fn is_odd(&self) -> bool {
        !self.truncated_below_zero
    }

    pub fn f(&self, t: f64) -> f64 {
        if t < 0.0 && self.truncated_below_zero {
            return 0.0;
        }
        t.signum() * self.magnitude(t.abs())
    }

    /// The primitive `F(t)`.
    pub fn primitive(&self, t: f64) -> f64 {
        if t < 0.0 && self.truncated_below_zero {
            return 0.0;
        }
        let x = t.abs();
        if x == 0.0 {
            return 0.0;
        }
        match self.kind {
            NonlinearityKind::PurePower { q } => x.powf(q) / q,
            NonlinearityKind::MinPower { q1, q2 } => {
                let (lo, hi) = (q1.min(q2), q1.max(q2));
                if x <= 1.0 {
                    x.powf(hi) / hi
                } else {
                    1.0 / hi + (x.powf(lo) - 1.0) / lo
                }
            }
            NonlinearityKind::RationalPower { q1, q2 } => {
                // F(x) = x^{q2} ∫₀¹ y^{q2-1} / (1 + (x y)^{q2-q1}) dy
                let p = q2 - q1;
                let g = |y: f64| y.powf(q2 - 1.0) / (1.0 + (x * y).powf(p));
                let (v, _) = adaptive(g, 0.0, 1.0, 1e-14, 1e-300);
                x.powf(q2) * v
            }
        }
    }

    pub fn fprime(&self, t: f64) -> f64 {
        if t < 0.0 && self.truncated_below_zero {
            return 0.0;
        }
        let x = t.abs();
        match self.kind {
            NonlinearityKind::PurePower { q } => (q - 1.0) * x.powf(q - 2.0),
            NonlinearityKind::MinPower { q1, q2 } => {
                let e = if x <= 1.0 { q1.max(q2) } else { q1.min(q2) };
                (e - 1.0) * x.powf(e - 2.0)
            }
            NonlinearityKind::RationalPower { q1, q2 } => {
                let p = q2 - q1;
                let d = 1.0 + x.powf(p);
                ((q2 - 1.0) * x.powf(q2 - 2.0) * d - p * x.powf(q2 + p - 2.0)) / (d * d)
            }
        }
    }

    fn magnitude(&self, x: f64) -> f64 {
        match self.kind {
            NonlinearityKind::PurePower { q } => x.powf(q - 1.0),
            NonlinearityKind::MinPower { q1, q2 } => x.powf(q1 - 1.0).min(x.powf(q2 - 1.0)),
            NonlinearityKind::RationalPower { q1, q2 } => x.powf(q2 - 1.0) / (1.0 + x.powf(q2 - q1)),
        }
    }

    /// Largest ratio `|f(t)| / min{|t|^{q1-1}, |t|^{q2-1}}` over the samples.
    pub fn growth_constant(&self, samples: &[f64]) -> f64 {
        let (q1, q2) = self.exponents();
        samples
            .iter()
            .filter(|t| **t != 0.0)
            .map(|&t| {
                let x = t.abs();
                self.f(t).abs() / x.powf(q1 - 1.0).min(x.powf(q2 - 1.0))
            })
            .fold(0.0, f64::max)
    }

    /// Largest ratio `F(t) / min{|t|^{q1}, |t|^{q2}}` over the samples.
    pub fn primitive_growth_constant(&self, samples: &[f64]) -> f64 {
        let (q1, q2) = self.exponents();
        samples
            .iter()
            .filter(|t| **t != 0.0)
            .map(|&t| {
                let x = t.abs();
                self.primitive(t).abs() / x.powf(q1).min(x.powf(q2))
            })
            .fold(0.0, f64::max)
    }
}

fn exponents_of(kind: &NonlinearityKind) -> (f64, f64) {
    match *kind {
        NonlinearityKind::PurePower { q } => (q, q),
        NonlinearityKind::MinPower { q1, q2 } | NonlinearityKind::RationalPower { q1, q2 } => (q1.min(q2), q1.max(q2)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArReport {
    pub mu: f64,
    /// `max(-μF(t), μF(t) - f(t)t)` over the samples; nonpositive when the
    /// condition holds.
    pub max_violation: f64,
    pub worst_t: f64,
    pub passed: bool,
}

pub const AR_TOLERANCE: f64 = 1e-12;

/// Checks `0 ≤ μF(t) ≤ f(t)t` for arbitrary `f`, `F`.
pub fn ar_check_with(mu: f64, f: impl Fn(f64) -> f64, big_f: impl Fn(f64) -> f64, samples: &[f64]) -> ArReport {
    let mut worst = (f64::NEG_INFINITY, f64::NAN);
    for &t in samples {
        let mf = mu * big_f(t);
        let ft = f(t) * t;
        let scale = 1.0f64.max(ft.abs());
        let v = (-mf).max(mf - ft) / scale;
        if v > worst.0 {
            worst = (v, t);
        }
    }
    ArReport { mu, max_violation: worst.0, worst_t: worst.1, passed: worst.0 <= AR_TOLERANCE }
}

pub fn ar_check(f: &Nonlinearity, samples: &[f64]) -> Result<ArReport> {
    if samples.is_empty() {
        return domain("ar_check needs at least one sample");
    }
    Ok(ar_check_with(f.mu, |t| f.f(t), |t| f.primitive(t), samples))
}

/// Symmetric sample grid `±10^k` on a log scale plus zero.
pub fn default_samples() -> Vec<f64> {
    let mut v = vec![0.0];
    for i in 0..=80 {
        let t = 10f64.powf(-4.0 + 8.0 * i as f64 / 80.0);
        v.push(t);
        v.push(-t);
    }
    v
}
