//! Exponent calculus for the embedding `H^s_{V,rad} ↪ L^{q1}_K + L^{q2}_K`.
//!
//! The weights enter only through the envelope exponents
//! `K(r) ≲ r^{α} V(r)^{β}` near the origin and near infinity. Everything in
//! this module is a closed-form function of those exponents and `(N, s)`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::potentials::PotentialFamily;
use crate::spaces;

/// Dimension, fractional order and the constants derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceParams {
    pub n: usize,
    pub s: f64,
    /// Critical exponent `2N/(N-2s)`.
    pub two_star: f64,
    /// Interpolation exponent `(N-2s)/(2sN-2s)` of the Strauss inequality.
    pub theta: f64,
    pub sobolev_s: f64,
    /// Normalization constant of the fractional Laplacian.
    pub norm_c: f64,
}

impl SpaceParams {
    pub fn new(n: usize, s: f64) -> Result<Self> {
        if n < 2 {
            return domain(format!("dimension N = {n} must be at least 2"));
        }
        if !(s > 0.5 && s < 1.0) {
            return domain(format!("fractional order s = {s} must lie in (1/2, 1)"));
        }
        let nf = n as f64;
        Ok(SpaceParams {
            n,
            s,
            two_star: 2.0 * nf / (nf - 2.0 * s),
            theta: (nf - 2.0 * s) / (2.0 * s * nf - 2.0 * s),
            sobolev_s: spaces::sobolev_constant_formula(n, s),
            norm_c: spaces::norm_constant_integral(n, s)?,
        })
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    /// Strauss decay rate `(N-2s)/2`.
    pub fn strauss_rate(&self) -> f64 {
        (self.nf() - 2.0 * self.s) / 2.0
    }
}

/// Envelope exponents at the origin (`alpha0`, `beta0`, valid on `(0, r1)`)
/// and at infinity (`alpha_inf`, `beta_inf`, valid on `(r2, ∞)`).
///
/// `alpha0 = +∞` encodes "arbitrarily large", which happens when `K` vanishes
/// faster than any power at the origin relative to `V^β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightExponents {
    #[serde(with = "inf_as_null")]
    pub alpha0: f64,
    pub beta0: f64,
    #[serde(with = "inf_as_null")]
    pub alpha_inf: f64,
    pub beta_inf: f64,
    pub r1: f64,
    pub r2: f64,
}

impl WeightExponents {
    pub fn new(alpha0: f64, beta0: f64, alpha_inf: f64, beta_inf: f64) -> Result<Self> {
        let we = WeightExponents { alpha0, beta0, alpha_inf, beta_inf, r1: 1.0, r2: 1.0 };
        we.validate()?;
        Ok(we)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, b) in [("beta0", self.beta0), ("beta_inf", self.beta_inf)] {
            if !(0.0..=1.0).contains(&b) {
                return domain(format!("{name} = {b} must lie in [0, 1]"));
            }
        }
        if !(self.r1 > 0.0 && self.r2 > 0.0) {
            return domain("radii r1, r2 must be positive");
        }
        if self.alpha0.is_nan() || self.alpha_inf.is_nan() {
            return domain("alpha exponents must not be NaN");
        }
        Ok(())
    }
}

/// Open interval `(lo, hi)`; `hi = +∞` is allowed and serialized as `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    #[serde(with = "inf_as_null")]
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, q: f64) -> bool {
        q > self.lo && q < self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }
}

/// Admissible exponent ranges for the embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub exponents: WeightExponents,
    /// `(max{1,2β0}, q*(α0,β0,s))`, absent when empty.
    pub q1_interval: Option<Interval>,
    /// The embedding near infinity holds for every `q2` above this bound.
    /// Absent when no envelope at infinity is available.
    pub q2_lower: Option<f64>,
    pub single_space: bool,
    pub q_single_interval: Option<Interval>,
    /// Representative exponents used for the decay rates.
    pub q1_chosen: Option<f64>,
    pub q2_chosen: Option<f64>,
    pub delta0: Option<f64>,
    pub delta_inf: Option<f64>,
}

impl EmbeddingReport {
    /// True when the report admits `(q1, q2)` for the compact embedding.
    pub fn admits(&self, q1: f64, q2: f64) -> bool {
        let ok1 = self.q1_interval.map_or(false, |i| i.contains(q1));
        let ok2 = self.q2_lower.map_or(false, |l| q2 > l);
        ok1 && ok2
    }
}

pub fn alpha_star(beta: f64, params: &SpaceParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return domain(format!("beta = {beta} must lie in [0, 1]"));
    }
    let n = params.nf();
    Ok(if beta <= 0.5 {
        -n / 2.0 - (1.0 - 2.0 * beta) * params.s
    } else {
        -(1.0 - beta) * n
    })
}

pub fn q_star(alpha: f64, beta: f64, params: &SpaceParams) -> f64 {
    let n = params.nf();
    let s = params.s;
    2.0 * (alpha - 2.0 * s * beta + n) / (n - 2.0 * s)
}

/// The three-case prefactor shared by both decay exponents.
fn decay_prefactor(beta: f64, params: &SpaceParams) -> f64 {
    let n = params.nf();
    let s = params.s;
    if beta <= 0.5 {
        (n - 2.0 * s) / (n + 2.0 * s * (1.0 - 2.0 * beta))
    } else if beta < 1.0 {
        (n - 2.0 * s) / (2.0 * (1.0 - beta))
    } else {
        (n - 2.0 * s) / 2.0
    }
}

/// Decay exponent of `S0(q1, R) ≤ C R^{δ0}` as `R → 0`.
pub fn delta_zero(q1: f64, we: &WeightExponents, params: &SpaceParams) -> Result<f64> {
    let qs = q_star(we.alpha0, we.beta0, params);
    let lo = 1f64.max(2.0 * we.beta0);
    if !(q1 > lo && q1 < qs) {
        return domain(format!("q1 = {q1} outside the admissible interval ({lo}, {qs})"));
    }
    Ok(decay_prefactor(we.beta0, params) * (qs - q1))
}

/// Decay exponent of `S∞(q2, R) ≤ C R^{δ∞}` as `R → ∞`.
pub fn delta_inf(q2: f64, we: &WeightExponents, params: &SpaceParams) -> Result<f64> {
    let qs = q_star(we.alpha_inf, we.beta_inf, params);
    let lower = 1f64.max(2.0 * we.beta_inf).max(qs);
    if !(q2 > lower) {
        return domain(format!("q2 = {q2} must exceed {lower}"));
    }
    let mut factor = decay_prefactor(we.beta_inf, params);
    if we.beta_inf <= 0.5 {
        factor *= params.nf();
    }
    Ok(factor * (qs - q2))
}

fn rational(x: f64) -> Option<BigRational> {
    if x.is_finite() {
        BigRational::from_f64(x)
    } else {
        None
    }
}

/// `q*` in exact rational arithmetic; `None` for `α = +∞`.
fn q_star_exact(alpha: f64, beta: f64, params: &SpaceParams) -> Option<BigRational> {
    let a = rational(alpha)?;
    let b = rational(beta)?;
    let s = rational(params.s)?;
    let n = BigRational::from_integer(BigInt::from(params.n));
    let two = BigRational::from_integer(BigInt::from(2));
    let den = &n - &two * &s;
    Some(&two * (a - &two * &s * b + &n) / den)
}

fn max_exact(values: &[BigRational]) -> BigRational {
    values.iter().cloned().fold(values[0].clone(), |m, v| if v > m { v } else { m })
}

pub fn admissible_ranges(we: &WeightExponents, params: &SpaceParams) -> Result<EmbeddingReport> {
    we.validate()?;
    let qs0 = q_star(we.alpha0, we.beta0, params);
    let lo1 = 1f64.max(2.0 * we.beta0);
    let q1_interval = if qs0 > lo1 { Some(Interval { lo: lo1, hi: qs0 }) } else { None };
    let q2_lower = if we.alpha_inf == f64::NEG_INFINITY {
        1f64.max(2.0 * we.beta_inf)
    } else if we.alpha_inf == f64::INFINITY {
        return domain("alpha_inf = +inf gives no embedding at infinity");
    } else {
        1f64.max(2.0 * we.beta_inf).max(q_star(we.alpha_inf, we.beta_inf, params))
    };

    // single-space decision in exact arithmetic on the dyadic inputs
    let one = BigRational::from_integer(BigInt::from(1));
    let two = BigRational::from_integer(BigInt::from(2));
    let single_space = match q1_interval {
        None => false,
        Some(_) => {
            let beta_inf = rational(we.beta_inf).expect("finite beta");
            let mut cands = vec![one.clone(), &two * beta_inf];
            if let Some(q) = q_star_exact(we.alpha_inf, we.beta_inf, params) {
                cands.push(q);
            }
            let lower2 = max_exact(&cands);
            let beta0 = rational(we.beta0).expect("finite beta");
            let lower1 = max_exact(&[one.clone(), &two * beta0]);
            let lower = if lower1 > lower2 { lower1 } else { lower2 };
            match q_star_exact(we.alpha0, we.beta0, params) {
                None => true,
                Some(hi) => hi > lower,
            }
        }
    };
    let q_single_interval = if single_space {
        q1_interval.map(|i| Interval { lo: i.lo.max(q2_lower), hi: i.hi })
    } else {
        None
    };

    let q1_chosen = q1_interval.map(|i| if i.hi.is_finite() { 0.5 * (i.lo + i.hi) } else { i.lo + 1.0 });
    let q2_chosen = Some(q2_lower + 1.0);
    let delta0 = match (q1_chosen, we.alpha0.is_finite()) {
        (Some(q), true) => Some(delta_zero(q, we, params)?),
        _ => None,
    };
    let delta_inf_v = match (q2_chosen, we.alpha_inf.is_finite()) {
        (Some(q), true) => Some(delta_inf(q, we, params)?),
        _ => None,
    };
    Ok(EmbeddingReport {
        exponents: *we,
        q1_interval,
        q2_lower: Some(q2_lower),
        single_space,
        q_single_interval,
        q1_chosen,
        q2_chosen,
        delta0,
        delta_inf: delta_inf_v,
    })
}

/// Picks the envelope exponents that give the widest ranges for each
/// standard family, then delegates to [`admissible_ranges`].
pub fn classify_potentials(family: &PotentialFamily, params: &SpaceParams) -> Result<EmbeddingReport> {
    family.validate(params)?;
    let n = params.nf();
    let we = match *family {
        PotentialFamily::Power { a, b } => WeightExponents::new(b, 0.0, b - a, 1.0)?,
        PotentialFamily::ZeroV { alpha0, alpha_inf } => WeightExponents::new(alpha0, 0.0, alpha_inf, 0.0)?,
        PotentialFamily::Exponential { c_v, c_k } => {
            // Near the origin both exponentials are bounded: α0 = β0 = 0.
            // At infinity e^{(cK - β cV) r} r^{-α} is bounded with β = 1 and
            // α = 0 whenever cK ≤ cV; otherwise no β in [0,1] works.
            if c_k <= c_v {
                WeightExponents::new(0.0, 0.0, 0.0, 1.0)?
            } else {
                let we = WeightExponents::new(0.0, 0.0, 0.0, 1.0)?;
                let mut report = admissible_ranges(&we, params)?;
                report.q2_lower = None;
                report.single_space = false;
                report.q_single_interval = None;
                report.q2_chosen = None;
                report.delta_inf = None;
                return Ok(report);
            }
        }
        PotentialFamily::Mixed { .. } => WeightExponents::new(f64::INFINITY, 0.0, -n, 0.0)?,
        PotentialFamily::Tabulated { envelope, .. } => match envelope {
            Some(we) => we,
            None => return domain("tabulated potentials need explicit envelope exponents"),
        },
    };
    admissible_ranges(&we, params)
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            ser.serialize_f64(*x)
        } else {
            ser.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(de)?.unwrap_or(f64::INFINITY))
    }
}

#[allow(dead_code)]
fn is_zero(x: &BigRational) -> bool {
    x.is_zero()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(n: usize, s: f64) -> SpaceParams {
        SpaceParams::new(n, s).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(SpaceParams::new(1, 0.75).is_err());
        assert!(SpaceParams::new(3, 0.5).is_err());
        assert!(SpaceParams::new(3, 1.0).is_err());
        let sp = p(3, 0.75);
        assert_eq!(sp.two_star, 4.0);
        assert!(sp.theta > 0.0 && sp.theta < 1.0);
    }

    #[test]
    fn alpha_star_values() {
        let sp = p(3, 0.75);
        assert_eq!(alpha_star(1.0, &sp).unwrap(), 0.0);
        assert_eq!(alpha_star(0.5, &sp).unwrap(), -1.5);
        assert_eq!(alpha_star(0.0, &sp).unwrap(), -2.25);
        assert!(alpha_star(1.2, &sp).is_err());
        assert!(alpha_star(-0.1, &sp).is_err());
    }

    #[test]
    fn alpha_star_branches_meet() {
        for &(n, s) in &[(2, 0.6), (3, 0.75), (5, 0.9)] {
            let sp = p(n, s);
            let nf = n as f64;
            let left = -nf / 2.0 - (1.0 - 2.0 * 0.5) * s;
            let right = -(1.0 - 0.5) * nf;
            assert!((left - right).abs() < 1e-12);
            assert!((alpha_star(0.5, &sp).unwrap() + nf / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn q_star_values() {
        let sp = p(3, 0.75);
        assert_eq!(q_star(0.0, 0.0, &sp), 4.0);
        assert_eq!(q_star(0.0, 0.5, &sp), 3.0);
        assert_eq!(q_star(0.0, 1.0, &sp), 2.0);
        for &b0 in &[0.0, 0.2, 0.5, 0.7, 1.0] {
            let a = alpha_star(b0, &sp).unwrap();
            let expect = 1f64.max(2.0 * b0);
            assert!((q_star(a, b0, &sp) - expect).abs() < 1e-12, "b0={b0}");
        }
    }

    #[test]
    fn delta_zero_values() {
        let sp = p(3, 0.75);
        let we = WeightExponents::new(0.0, 0.0, 0.0, 1.0).unwrap();
        // (N-2s)/(N+2s) (q* - q1) = 1.5/4.5 * 2
        assert!((delta_zero(2.0, &we, &sp).unwrap() - 2.0 / 3.0).abs() < 1e-14);
        let near = delta_zero(4.0 - 1e-9, &we, &sp).unwrap();
        assert!(near > 0.0 && near < 1e-8);
        let we1 = WeightExponents::new(0.0, 1.0, 0.0, 1.0).unwrap();
        assert!(delta_zero(3.0, &we1, &sp).is_err());
    }

    #[test]
    fn delta_inf_values() {
        let sp = p(3, 0.75);
        let we = WeightExponents::new(0.0, 0.0, 0.0, 1.0).unwrap();
        assert!((delta_inf(2.5, &we, &sp).unwrap() + 0.375).abs() < 1e-14);
        let near = delta_inf(2.0 + 1e-9, &we, &sp).unwrap();
        assert!(near < 0.0 && near > -1e-8);
        let we_half = WeightExponents::new(0.0, 0.0, 0.0, 0.5).unwrap();
        assert!((delta_inf(5.0, &we_half, &sp).unwrap() + 3.0).abs() < 1e-14);
        assert!(delta_inf(1.5, &we, &sp).is_err());
    }

    #[test]
    fn example_three_ranges() {
        let sp = p(3, 0.75);
        let we = WeightExponents::new(0.0, 0.0, 0.0, 1.0).unwrap();
        let r = admissible_ranges(&we, &sp).unwrap();
        assert_eq!(r.q1_interval, Some(Interval { lo: 1.0, hi: 4.0 }));
        assert_eq!(r.q2_lower, Some(2.0));
        assert!(r.single_space);
        assert_eq!(r.q_single_interval, Some(Interval { lo: 2.0, hi: 4.0 }));
    }

    #[test]
    fn boundary_alpha_gives_empty_interval() {
        let sp = p(3, 0.75);
        for &b0 in &[0.0, 0.3, 0.5, 0.8, 1.0] {
            let a0 = alpha_star(b0, &sp).unwrap();
            let we = WeightExponents::new(a0, b0, 0.0, 1.0).unwrap();
            let r = admissible_ranges(&we, &sp).unwrap();
            assert!(r.q1_interval.is_none(), "b0={b0}");
            assert!(!r.single_space);
        }
    }

    #[test]
    fn power_family_single_and_sum_space() {
        let sp = p(3, 0.75);
        let r = classify_potentials(&PotentialFamily::Power { a: 0.0, b: 0.0 }, &sp).unwrap();
        assert!(r.single_space);
        assert_eq!(r.q_single_interval, Some(Interval { lo: 2.0, hi: 4.0 }));

        // a ≤ -2s: sum space with q1 < 2(1+(b+2s)/(N-2s)) ≤ 2(1+(b-a)/(N-2s)) < q2
        let (a, b) = (-2.0, 0.5);
        let r = classify_potentials(&PotentialFamily::Power { a, b }, &sp).unwrap();
        assert!(!r.single_space);
        let hi1 = 2.0 * (1.0 + (b + 1.5) / 1.5);
        let lo2 = 2.0 * (1.0 + (b - a) / 1.5);
        assert!((r.q1_interval.unwrap().hi - hi1).abs() < 1e-12);
        assert!((r.q2_lower.unwrap() - lo2).abs() < 1e-12);
        assert!(hi1 <= lo2);

        assert!(classify_potentials(&PotentialFamily::Power { a: 0.0, b: -3.0 }, &sp).is_err());
    }

    #[test]
    fn mixed_family_every_q_above_one() {
        let sp = p(3, 0.75);
        let r = classify_potentials(&PotentialFamily::Mixed { a: 1.0, b: 1.0, d: 0.0 }, &sp).unwrap();
        assert!(r.single_space);
        let i = r.q_single_interval.unwrap();
        assert_eq!(i.lo, 1.0);
        assert!(i.hi.is_infinite());
        let json = serde_json::to_string(&i).unwrap();
        assert_eq!(json, r#"{"lo":1.0,"hi":null}"#);
    }

    #[test]
    fn exponential_family_growing_k_has_no_infinity_range() {
        let sp = p(3, 0.75);
        let r = classify_potentials(&PotentialFamily::Exponential { c_v: 1.0, c_k: 2.0 }, &sp).unwrap();
        assert!(r.q2_lower.is_none());
        assert!(!r.single_space);
    }

    proptest! {
        #[test]
        fn q_star_monotone(alpha in -5.0f64..5.0, beta in 0.0f64..0.9, h in 1e-3f64..0.1,
                           n in 2usize..6, s in 0.51f64..0.99) {
            let sp = p(n, s);
            prop_assert!(q_star(alpha + h, beta, &sp) > q_star(alpha, beta, &sp));
            prop_assert!(q_star(alpha, beta + h, &sp) < q_star(alpha, beta, &sp));
        }

        #[test]
        fn alpha_star_equivalence(alpha in -6.0f64..3.0, beta in 0.0f64..=1.0,
                                  n in 2usize..6, s in 0.51f64..0.99) {
            let sp = p(n, s);
            let a = alpha_star(beta, &sp).unwrap();
            let q = q_star(alpha, beta, &sp);
            let m = 1f64.max(2.0 * beta);
            // stay away from the boundary where rounding decides
            prop_assume!((alpha - a).abs() > 1e-9);
            prop_assert_eq!(alpha > a, q > m);
        }

        #[test]
        fn delta_signs(alpha0 in -1.0f64..3.0, beta0 in 0.0f64..=1.0, t in 0.01f64..0.99,
                       beta_inf in 0.0f64..=1.0, alpha_inf in -3.0f64..3.0, extra in 0.01f64..3.0) {
            let sp = p(3, 0.75);
            let we = WeightExponents::new(alpha0, beta0, alpha_inf, beta_inf).unwrap();
            let lo = 1f64.max(2.0 * beta0);
            let hi = q_star(alpha0, beta0, &sp);
            if hi > lo {
                let q1 = lo + t * (hi - lo);
                prop_assert!(delta_zero(q1, &we, &sp).unwrap() > 0.0);
            }
            let l2 = 1f64.max(2.0 * beta_inf).max(q_star(alpha_inf, beta_inf, &sp));
            let d = delta_inf(l2 + extra, &we, &sp);
            // when q* is not the active bound the factor (q* - q2) is still negative
            prop_assert!(d.unwrap() < 0.0);
        }

        #[test]
        fn power_classification_matches_hand_exponents(a in -3.0f64..3.0, bt in 0.01f64..4.0,
                                                     n in 2usize..5, s in 0.51f64..0.99) {
            let sp = p(n, s);
            let b = -(n as f64) / 2.0 - s + bt;
            let fam = PotentialFamily::Power { a, b };
            let r1 = classify_potentials(&fam, &sp).unwrap();
            let we = WeightExponents::new(b, 0.0, b - a, 1.0).unwrap();
            let r2 = admissible_ranges(&we, &sp).unwrap();
            prop_assert_eq!(r1, r2);
        }
    }
}
