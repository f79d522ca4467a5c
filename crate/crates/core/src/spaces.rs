//! Constants and norms of the weighted fractional spaces on radial grids.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exponents::SpaceParams;
use crate::fraclap;
use crate::grid::RadialFunction;
use crate::potentials::PotentialFamily;
use crate::quad::{gauss_jacobi_pm1, gauss_legendre};
use crate::special::{gamma, sphere_area};

/// `C(N,s) = (∫_{R^N} (1 - cos ζ_1) |ζ|^{-N-2s} dζ)^{-1}` from the integral.
pub fn norm_constant_integral(n: usize, s: f64) -> Result<f64> {
    norm_constant_integral_at(n, s, 1)
}

/// [`norm_constant_integral`] with all quadrature resolutions multiplied by `level`.
pub fn norm_constant_integral_at(n: usize, s: f64, level: usize) -> Result<f64> {
    if n < 2 {
        return domain(format!("dimension N = {n} must be at least 2"));
    }
    if !(s > 0.0 && s < 1.0) {
        return domain(format!("s = {s} must lie in (0, 1)"));
    }
    Ok(1.0 / (sphere_area(n - 1) * radial_factor(s, level)? * angular_factor(n, s, level)))
}

/// `∫_0^π |cos φ|^{2s} sin^{N-2} φ dφ` by Gauss–Jacobi in `u = cos φ`.
fn angular_factor(n: usize, s: f64, level: usize) -> f64 {
    let alpha = (n as f64 - 3.0) / 2.0;
    let beta = 2.0 * s;
    let rule = gauss_jacobi_pm1(20 * level, alpha, beta);
    let scale = 2f64.powf(-alpha - beta - 1.0);
    let half: f64 = rule.iter().map(|(t, w)| w * (1.0 + 0.5 * (1.0 + t)).powf(alpha)).sum();
    2.0 * scale * half
}

/// `∫_0^∞ t^{-1-2s} (1 - cos t) dt`: series on `[0,1]`, Gauss panels on
/// `[1,T]` and an asymptotic expansion of the oscillatory tail.
fn radial_factor(s: f64, level: usize) -> Result<f64> {
    let mut head = 0.0;
    let mut fact = 1.0;
    for k in 1..30 {
        let kk = 2 * k;
        fact *= ((kk - 1) * kk) as f64;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        head += sign / (fact * (kk as f64 - 2.0 * s));
    }

    let panels = 64 * level;
    let base = gauss_legendre(16);
    let t_end = 1.0 + panels as f64 * PI;
    let mut middle = 0.0;
    for p in 0..panels {
        let a = 1.0 + p as f64 * PI;
        for (t, w) in base.mapped(a, a + PI).iter() {
            middle += w * t.powf(-1.0 - 2.0 * s) * (1.0 - t.cos());
        }
    }

    let a = 1.0 + 2.0 * s;
    let (sin_t, cos_t) = t_end.sin_cos();
    let mut osc = 0.0;
    let mut deriv = t_end.powf(-a);
    let mut last = f64::INFINITY;
    let mut converged = false;
    for m in 0..60 {
        // deriv = g^{(m)}(T) for g(t) = t^{-a}
        let term = if m % 2 == 0 {
            let sign = if (m / 2) % 2 == 0 { -1.0 } else { 1.0 };
            sign * deriv * sin_t
        } else {
            let sign = if ((m - 1) / 2) % 2 == 0 { -1.0 } else { 1.0 };
            sign * deriv * cos_t
        };
        if deriv.abs() > last {
            break;
        }
        osc += term;
        last = deriv.abs();
        if deriv.abs() < 1e-18 {
            converged = true;
            break;
        }
        deriv *= -(a + m as f64) / t_end;
    }
    if !converged {
        return Err(Error::Numeric(format!("tail expansion did not converge, last term {last:e}")));
    }
    let tail = t_end.powf(-2.0 * s) / (2.0 * s) - osc;
    Ok(head + middle + tail)
}

pub fn norm_constant_c(params: &SpaceParams) -> f64 {
    params.norm_c
}

/// A commonly quoted closed form `2^{1-(N+2s)/2} π^{-N/2} 2^{2s} s(1-s)/Γ(2-s)`.
/// It does not agree with the integral and is kept only to report the gap.
pub fn norm_constant_printed(n: usize, s: f64) -> f64 {
    let nf = n as f64;
    2f64.powf(-(nf + 2.0 * s) / 2.0 + 1.0) * PI.powf(-nf / 2.0) * 2f64.powf(2.0 * s) * s * (1.0 - s) / gamma(2.0 - s)
}

/// Standard value `s 2^{2s} Γ((N+2s)/2) / (π^{N/2} Γ(1-s))`.
pub fn norm_constant_standard(n: usize, s: f64) -> f64 {
    let nf = n as f64;
    s * 2f64.powf(2.0 * s) * gamma((nf + 2.0 * s) / 2.0) / (PI.powf(nf / 2.0) * gamma(1.0 - s))
}

/// Relative deviation of [`norm_constant_printed`] from the integral value.
pub fn printed_constant_deviation(params: &SpaceParams) -> f64 {
    norm_constant_printed(params.n, params.s) / params.norm_c - 1.0
}

/// The Cotsiolis–Tavoularis quotient
/// `2^{-2s} π^{-s} Γ((N-2s)/2)/Γ((N+2s)/2) [Γ(N)/Γ(N/2)]^{2s/N}`,
/// the sharp constant in `‖u‖²_{L^{2*}} ≤ S [u]²`.
fn sharp_quotient(n: usize, s: f64) -> f64 {
    let nf = n as f64;
    2f64.powf(-2.0 * s) * PI.powf(-s) * gamma((nf - 2.0 * s) / 2.0) / gamma((nf + 2.0 * s) / 2.0)
        * (gamma(nf) / gamma(nf / 2.0)).powf(2.0 * s / nf)
}

/// `S(N,s)`: the sharp quotient raised to `2*_s/2`.
pub fn sobolev_constant_formula(n: usize, s: f64) -> f64 {
    let nf = n as f64;
    sharp_quotient(n, s).powf(nf / (nf - 2.0 * s))
}

pub fn sobolev_constant_s(params: &SpaceParams) -> f64 {
    params.sobolev_s
}

/// Constant `S` with `‖u‖_{L^{2*}} ≤ S [u]_{H^s}` for the seminorm
/// normalized by `C(N,s)`: the square root of the sharp quotient.
pub fn sobolev_embedding_constant(params: &SpaceParams) -> f64 {
    sharp_quotient(params.n, params.s).sqrt()
}

/// Largest share of `[u]²` that may come from the same-cell terms before
/// the grid is declared too coarse for `u`.
pub const LOCAL_SHARE_LIMIT: f64 = 0.5;

fn check_params(u: &RadialFunction, params: &SpaceParams) -> Result<()> {
    if u.grid.dim() != params.n {
        return Err(Error::Usage(format!("grid dimension {} but N = {}", u.grid.dim(), params.n)));
    }
    Ok(())
}

/// Squared Gagliardo seminorm `[u]²` of the piecewise-linear function.
pub fn gagliardo_squared(u: &RadialFunction, params: &SpaceParams) -> Result<f64> {
    check_params(u, params)?;
    let st = fraclap::stiffness(&u.grid, params, u.extrapolation);
    let total = st.form(&u.values).max(0.0);
    if total > 0.0 {
        let local = st.local_form(&u.values);
        if local > LOCAL_SHARE_LIMIT * total {
            return Err(Error::Numeric(format!(
                "grid too coarse: same-cell terms carry {:.1}% of the seminorm (limit {:.0}%)",
                100.0 * local / total,
                100.0 * LOCAL_SHARE_LIMIT
            )));
        }
    }
    Ok(total)
}

pub fn gagliardo_seminorm(u: &RadialFunction, params: &SpaceParams) -> Result<f64> {
    Ok(gagliardo_squared(u, params)?.sqrt())
}

fn potential_samples(v: &PotentialFamily, u: &RadialFunction) -> Result<Vec<f64>> {
    let vals = v.v_on(u.grid.nodes());
    if let Some(i) = vals.iter().position(|&x| !(x >= 0.0)) {
        return domain(format!("V is negative at node {i} (r = {})", u.grid.nodes()[i]));
    }
    Ok(vals)
}

fn weight_samples(k: &PotentialFamily, u: &RadialFunction) -> Result<Vec<f64>> {
    let vals = k.k_on(u.grid.nodes());
    if let Some(i) = vals.iter().position(|&x| !(x > 0.0)) {
        return domain(format!("K is not positive at node {i} (r = {})", u.grid.nodes()[i]));
    }
    Ok(vals)
}

/// `∫ V |u|²`.
pub fn potential_energy(u: &RadialFunction, v: &PotentialFamily) -> Result<f64> {
    let vs = potential_samples(v, u)?;
    let g: Vec<f64> = vs.iter().zip(&u.values).map(|(a, b)| a * b * b).collect();
    Ok(u.grid.integrate(&g))
}

pub fn hsv_norm(u: &RadialFunction, v: &PotentialFamily, params: &SpaceParams) -> Result<f64> {
    let pot = potential_energy(u, v)?;
    Ok((gagliardo_squared(u, params)? + pot).sqrt())
}

/// `∫ K |u|^q`.
pub fn lqk_integral(u: &RadialFunction, k: &PotentialFamily, q: f64) -> Result<f64> {
    if !(q > 1.0) {
        return domain(format!("q = {q} must exceed 1"));
    }
    let ks = weight_samples(k, u)?;
    let g: Vec<f64> = ks.iter().zip(&u.values).map(|(a, b)| a * b.abs().powf(q)).collect();
    Ok(u.grid.integrate(&g))
}

pub fn lqk_norm(u: &RadialFunction, k: &PotentialFamily, q: f64) -> Result<f64> {
    Ok(lqk_integral(u, k, q)?.powf(1.0 / q))
}

/// Unweighted `‖u‖_{L^q(R^N)}`.
pub fn lq_norm(u: &RadialFunction, q: f64) -> f64 {
    let g: Vec<f64> = u.values.iter().map(|b| b.abs().powf(q)).collect();
    u.grid.integrate(&g).powf(1.0 / q)
}

/// Upper bound on the sum-space norm from radial splittings `u = u 1_{B_R} + u 1_{B_R^c}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumSpaceBound {
    pub value: f64,
    /// The optimal split radius; `0` means everything sits in the outer piece.
    pub split_radius: f64,
    /// Always true: splittings only bound the infimum from above.
    pub upper_bound: bool,
}

pub fn sum_space_norm(u: &RadialFunction, k: &PotentialFamily, q1: f64, q2: f64) -> Result<SumSpaceBound> {
    if !(q1 > 1.0 && q2 > 1.0) {
        return domain("sum-space exponents must exceed 1");
    }
    let ks = weight_samples(k, u)?;
    let w = u.grid.weights();
    let area = sphere_area(u.grid.dim());
    let m = u.values.len();
    let piece = |q: f64, j: usize| area * w[j] * ks[j] * u.values[j].abs().powf(q);
    let mut outer: f64 = (0..m).map(|j| piece(q2, j)).sum();
    let mut inner = 0.0;
    let mut best = SumSpaceBound { value: outer.powf(1.0 / q2), split_radius: 0.0, upper_bound: true };
    for j in 0..m {
        inner += piece(q1, j);
        outer -= piece(q2, j);
        let val = inner.powf(1.0 / q1).max(outer.max(0.0).powf(1.0 / q2));
        if val < best.value {
            best = SumSpaceBound { value: val, split_radius: u.grid.nodes()[j], upper_bound: true };
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StraussReport {
    /// `sup |u(r)| r^{(N-2s)/2} / ([u]^θ ‖u‖_{L^{2*}}^{1-θ})`.
    pub c_emp: f64,
    /// `sup |u(r)| r^{(N-2s)/2} / ‖u‖_{H^s_V}`.
    pub c_hsv: f64,
    pub theta: f64,
    /// Radius where the first supremum is attained.
    pub r_max: f64,
}

pub fn strauss_check(u: &RadialFunction, v: &PotentialFamily, params: &SpaceParams) -> Result<StraussReport> {
    if u.is_zero() {
        return domain("the Strauss quotient is undefined for u = 0");
    }
    let semi = gagliardo_seminorm(u, params)?;
    let crit = lq_norm(u, params.two_star);
    let hsv = hsv_norm(u, v, params)?;
    let rate = params.strauss_rate();
    let (r_max, peak) = u
        .grid
        .nodes()
        .iter()
        .zip(&u.values)
        .map(|(&r, &x)| (r, x.abs() * r.powf(rate)))
        .fold((0.0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    let denom = semi.powf(params.theta) * crit.powf(1.0 - params.theta);
    Ok(StraussReport { c_emp: peak / denom, c_hsv: peak / hsv, theta: params.theta, r_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Extrapolation, RadialGrid};
    use crate::quad::adaptive;
    use crate::special::ln_gamma;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn params() -> SpaceParams {
        SpaceParams::new(3, 0.75).unwrap()
    }

    #[test]
    fn norm_constant_matches_standard_value() {
        for n in 2..=4 {
            for &s in &[0.55, 0.6, 0.75, 0.9] {
                let c = norm_constant_integral(n, s).unwrap();
                let lit = norm_constant_standard(n, s);
                assert!(((c - lit) / lit).abs() < 1e-10, "n={n} s={s}: {c} vs {lit}");
            }
        }
    }

    #[test]
    fn norm_constant_refinement_is_stable() {
        let a = norm_constant_integral_at(3, 0.75, 1).unwrap();
        let b = norm_constant_integral_at(3, 0.75, 2).unwrap();
        assert!(((a - b) / a).abs() < 1e-12);
    }

    #[test]
    fn radial_factor_closed_form() {
        // ∫ t^{-1-2s}(1 - cos t) dt = -Γ(-2s) cos(πs)
        for &s in &[0.6, 0.75, 0.9] {
            let j = radial_factor(s, 1).unwrap();
            let exact = -gamma(-2.0 * s) * (PI * s).cos();
            assert!(((j - exact) / exact).abs() < 1e-12, "s={s}");
        }
    }

    #[test]
    fn angular_factor_is_a_beta_function() {
        for n in 2..=5 {
            let s = 0.7;
            let a = angular_factor(n, s, 1);
            let b = (ln_gamma(s + 0.5) + ln_gamma((n as f64 - 1.0) / 2.0) - ln_gamma(s + n as f64 / 2.0)).exp();
            assert!(((a - b) / b).abs() < 1e-12, "n={n}");
        }
    }

    /// Stirling series for ln Γ with upward shift, independent of the library gamma.
    fn ln_gamma_stirling(x: f64) -> f64 {
        let mut shift = 0.0;
        let mut z = x;
        while z < 20.0 {
            shift -= z.ln();
            z += 1.0;
        }
        let z2 = z * z;
        let series = 1.0 / (12.0 * z) - 1.0 / (360.0 * z * z2) + 1.0 / (1260.0 * z * z2 * z2)
            - 1.0 / (1680.0 * z * z2 * z2 * z2);
        shift + (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + series
    }

    #[test]
    fn sobolev_constant_against_stirling_oracle() {
        for &(n, s) in &[(2usize, 0.6), (3, 0.75), (3, 0.9), (5, 0.55)] {
            let nf = n as f64;
            let g = |x: f64| ln_gamma_stirling(x);
            let inner = -2.0 * s * 2f64.ln() - s * PI.ln() + g((nf - 2.0 * s) / 2.0) - g((nf + 2.0 * s) / 2.0)
                + (2.0 * s / nf) * (g(nf) - g(nf / 2.0));
            let oracle = (inner * nf / (nf - 2.0 * s)).exp();
            let got = sobolev_constant_formula(n, s);
            assert!(((got - oracle) / oracle).abs() < 1e-10, "n={n} s={s}: {got} vs {oracle}");
            assert!(got > 0.0);
        }
    }

    #[test]
    fn classical_limit_of_sharp_constant() {
        // s → 1 in N = 3 recovers the sharp Sobolev constant 4/(3 (2π²)^{2/3})
        let q = sharp_quotient(3, 1.0 - 1e-12);
        let classical = 4.0 / (3.0 * (2.0 * PI * PI).powf(2.0 / 3.0));
        assert!((q - classical).abs() < 1e-9);
    }

    fn gaussian(grid: &Arc<RadialGrid>, a: f64) -> RadialFunction {
        RadialFunction::from_fn(grid, |r| (-a * r * r).exp(), Extrapolation::ZeroBeyond).unwrap()
    }

    /// `[e^{-a r²}]²` from the Fourier side, by one-dimensional quadrature.
    fn gaussian_seminorm_fourier(n: usize, s: f64, a: f64) -> f64 {
        let nf = n as f64;
        let amp = (PI / a).powf(nf / 2.0);
        let f = |k: f64| k.powf(2.0 * s + nf - 1.0) * amp * amp * (-k * k / (2.0 * a)).exp();
        let integral = adaptive(f, 0.0, 60.0 * a.sqrt(), 1e-13, 0.0).0;
        (2.0 * PI).powf(-nf) * sphere_area(n) * integral
    }

    #[test]
    fn gaussian_seminorm_matches_fourier_side() {
        let p = params();
        let grid = Arc::new(RadialGrid::default_for(3));
        let u = gaussian(&grid, 1.0);
        let got = gagliardo_squared(&u, &p).unwrap();
        let exact = gaussian_seminorm_fourier(3, 0.75, 1.0);
        assert!(((got - exact) / exact).abs() < 1e-3, "{got} vs {exact}");
    }

    #[test]
    fn zero_function_norms_vanish() {
        let p = params();
        let grid = Arc::new(RadialGrid::default_for(3));
        let z = RadialFunction::zeros(&grid);
        assert_eq!(gagliardo_seminorm(&z, &p).unwrap(), 0.0);
        assert_eq!(hsv_norm(&z, &PotentialFamily::constant(), &p).unwrap(), 0.0);
        assert_eq!(lqk_norm(&z, &PotentialFamily::constant(), 2.0).unwrap(), 0.0);
        assert_eq!(sum_space_norm(&z, &PotentialFamily::constant(), 2.0, 3.0).unwrap().value, 0.0);
        assert!(strauss_check(&z, &PotentialFamily::constant(), &p).is_err());
    }

    #[test]
    fn weighted_norms_of_gaussian() {
        let p = params();
        let grid = Arc::new(RadialGrid::default_for(3));
        let u = gaussian(&grid, 1.0);
        let l2 = lqk_norm(&u, &PotentialFamily::constant(), 2.0).unwrap();
        let exact = (PI / 2.0).powf(0.75);
        assert!(((l2 - exact) / exact).abs() < 1e-8);
        let h = hsv_norm(&u, &PotentialFamily::constant(), &p).unwrap();
        let g = gagliardo_seminorm(&u, &p).unwrap();
        assert!((h * h - g * g - exact * exact).abs() < 1e-8 * h * h);
        let zero_v = PotentialFamily::ZeroV { alpha0: 0.0, alpha_inf: 0.0 };
        assert!((hsv_norm(&u, &zero_v, &p).unwrap() - g).abs() < 1e-14);
        let neg = u.scaled(-3.0);
        let a = lqk_norm(&neg, &PotentialFamily::constant(), 3.0).unwrap();
        let b = lqk_norm(&u, &PotentialFamily::constant(), 3.0).unwrap();
        assert!((a - 3.0 * b).abs() < 1e-12 * a);
        let bad_v = PotentialFamily::Tabulated { radii: vec![1.0, 2.0], v: vec![-1.0, -1.0], k: vec![1.0, 1.0], envelope: None };
        assert!(hsv_norm(&u, &bad_v, &p).is_err());
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let p = params();
        let grid = Arc::new(RadialGrid::geometric(3, 0.5, 3.0, 5).unwrap());
        let u = RadialFunction::from_fn(&grid, |r| if r < 1.0 { 1.0 } else { 0.0 }, Extrapolation::ZeroBeyond).unwrap();
        assert!(matches!(gagliardo_seminorm(&u, &p), Err(Error::Numeric(_))));
    }

    #[test]
    fn sum_space_bounds() {
        let grid = Arc::new(RadialGrid::default_for(3));
        let k = PotentialFamily::constant();
        let u = gaussian(&grid, 0.5);
        let q = 3.0;
        let full = lqk_norm(&u, &k, q).unwrap();
        let b = sum_space_norm(&u, &k, q, q).unwrap();
        assert!(b.value <= full * (1.0 + 1e-12));
        assert!(b.value >= 2f64.powf(-1.0 / q) * full * (1.0 - 1e-12));
        let bump = RadialFunction::from_fn(&grid, |r| (1.0 - r).max(0.0), Extrapolation::ZeroBeyond).unwrap();
        let b = sum_space_norm(&bump, &k, 2.5, 4.0).unwrap();
        let inner = lqk_norm(&bump, &k, 2.5).unwrap();
        assert!(b.value <= inner * (1.0 + 1e-12));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sum_space_monotone_under_domination(c in 0.1f64..1.0, a in 0.2f64..3.0, q1 in 1.5f64..3.0, q2 in 3.0f64..5.0) {
            let grid = Arc::new(RadialGrid::geometric(3, 1e-2, 20.0, 120).unwrap());
            let k = PotentialFamily::constant();
            let u = gaussian(&grid, a);
            let small = u.scaled(c);
            let bu = sum_space_norm(&u, &k, q1, q2).unwrap().value;
            let bs = sum_space_norm(&small, &k, q1, q2).unwrap().value;
            prop_assert!(bs <= bu * (1.0 + 1e-12));
        }
    }
}
