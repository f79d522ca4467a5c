//! Radial potentials `V` and weights `K`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::exponents::{SpaceParams, WeightExponents};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialFamily {
    /// `V = r^a`, `K = r^b`.
    Power { a: f64, b: f64 },
    /// `V = e^{c_v r}`, `K = e^{c_k r}`.
    Exponential { c_v: f64, c_k: f64 },
    /// `V = e^{-a r}`, `K = r^d e^{-b r}`.
    Mixed { a: f64, b: f64, d: f64 },
    /// `V = 0`, `K = r^{alpha0}` on `(0,1]` and `r^{alpha_inf}` beyond.
    ZeroV { alpha0: f64, alpha_inf: f64 },
    /// Samples of `V` and `K`, interpolated linearly in `ln r` and held
    /// constant outside the sampled range.
    Tabulated {
        radii: Vec<f64>,
        v: Vec<f64>,
        k: Vec<f64>,
        envelope: Option<WeightExponents>,
    },
}

impl PotentialFamily {
    pub fn validate(&self, params: &SpaceParams) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match self {
            PotentialFamily::Power { a, b } => {
                if !finite(&[*a, *b]) {
                    return domain("power exponents must be finite");
                }
                let bound = -params.nf() / 2.0 - params.s;
                if *b <= bound {
                    return domain(format!("power family needs b > -N/2 - s = {bound}, got b = {b}"));
                }
            }
            PotentialFamily::Exponential { c_v, c_k } => {
                if !finite(&[*c_v, *c_k]) {
                    return domain("exponential rates must be finite");
                }
            }
            PotentialFamily::Mixed { a, b, d } => {
                if !finite(&[*a, *b, *d]) || *a <= 0.0 || *b <= 0.0 {
                    return domain("mixed family needs a > 0 and b > 0");
                }
            }
            PotentialFamily::ZeroV { alpha0, alpha_inf } => {
                if !finite(&[*alpha0, *alpha_inf]) {
                    return domain("zero-V envelope exponents must be finite");
                }
            }
            PotentialFamily::Tabulated { radii, v, k, .. } => {
                if radii.len() < 2 || radii.len() != v.len() || radii.len() != k.len() {
                    return domain("tabulated potentials need matching radii, V and K with at least two samples");
                }
                if radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= 0.0 {
                    return domain("tabulated radii must be positive and strictly increasing");
                }
                if let Some(i) = v.iter().position(|&x| !(x >= 0.0 && x.is_finite())) {
                    return domain(format!("V must be nonnegative, sample {i} is {}", v[i]));
                }
                if let Some(i) = k.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
                    return domain(format!("K must be positive, sample {i} is {}", k[i]));
                }
            }
        }
        Ok(())
    }

    pub fn v(&self, r: f64) -> f64 {
        match self {
            PotentialFamily::Power { a, .. } => r.powf(*a),
            PotentialFamily::Exponential { c_v, .. } => (c_v * r).exp(),
            PotentialFamily::Mixed { a, .. } => (-a * r).exp(),
            PotentialFamily::ZeroV { .. } => 0.0,
            PotentialFamily::Tabulated { radii, v, .. } => log_interp(radii, v, r),
        }
    }

    pub fn k(&self, r: f64) -> f64 {
        match self {
            PotentialFamily::Power { b, .. } => r.powf(*b),
            PotentialFamily::Exponential { c_k, .. } => (c_k * r).exp(),
            PotentialFamily::Mixed { b, d, .. } => r.powf(*d) * (-b * r).exp(),
            PotentialFamily::ZeroV { alpha0, alpha_inf } => {
                if r <= 1.0 {
                    r.powf(*alpha0)
                } else {
                    r.powf(*alpha_inf)
                }
            }
            PotentialFamily::Tabulated { radii, k, .. } => log_interp(radii, k, r),
        }
    }

    pub fn v_on(&self, nodes: &[f64]) -> Vec<f64> {
        nodes.iter().map(|&r| self.v(r)).collect()
    }

    pub fn k_on(&self, nodes: &[f64]) -> Vec<f64> {
        nodes.iter().map(|&r| self.k(r)).collect()
    }

    /// The exponential pair `V = e^{2r}`, `K = e^r`.
    pub fn example_exponential() -> Self {
        PotentialFamily::Exponential { c_v: 2.0, c_k: 1.0 }
    }

    /// `V = K = 1`.
    pub fn constant() -> Self {
        PotentialFamily::Power { a: 0.0, b: 0.0 }
    }
}

fn log_interp(radii: &[f64], vals: &[f64], r: f64) -> f64 {
    let n = radii.len();
    if r <= radii[0] {
        return vals[0];
    }
    if r >= radii[n - 1] {
        return vals[n - 1];
    }
    let j = radii.partition_point(|&x| x <= r) - 1;
    let t = (r.ln() - radii[j].ln()) / (radii[j + 1].ln() - radii[j].ln());
    vals[j] + t * (vals[j + 1] - vals[j])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluations() {
        let p = PotentialFamily::Power { a: 2.0, b: -1.0 };
        assert_eq!(p.v(3.0), 9.0);
        assert!((p.k(4.0) - 0.25).abs() < 1e-15);
        let e = PotentialFamily::example_exponential();
        assert!((e.v(1.0) - 2f64.exp()).abs() < 1e-12);
        let z = PotentialFamily::ZeroV { alpha0: 1.0, alpha_inf: -2.0 };
        assert_eq!(z.v(5.0), 0.0);
        assert_eq!(z.k(0.5), 0.5);
        assert_eq!(z.k(2.0), 0.25);
    }

    #[test]
    fn tabulated_interpolates_in_log_radius() {
        let t = PotentialFamily::Tabulated {
            radii: vec![1.0, 100.0],
            v: vec![0.0, 2.0],
            k: vec![1.0, 1.0],
            envelope: None,
        };
        let sp = SpaceParams::new(3, 0.75).unwrap();
        t.validate(&sp).unwrap();
        assert!((t.v(10.0) - 1.0).abs() < 1e-12);
        assert_eq!(t.v(0.1), 0.0);
        assert_eq!(t.v(1e3), 2.0);
        let bad = PotentialFamily::Tabulated {
            radii: vec![1.0, 2.0],
            v: vec![-1.0, 0.0],
            k: vec![1.0, 1.0],
            envelope: None,
        };
        assert!(bad.validate(&sp).is_err());
    }

    #[test]
    fn serde_roundtrip() {
        let m = PotentialFamily::Mixed { a: 1.0, b: 2.0, d: 0.5 };
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"kind\":\"mixed\""));
        let back: PotentialFamily = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
