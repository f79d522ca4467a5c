//! Special functions: Bessel functions of the orders that occur in radial
//! Fourier transforms (`N/2 - 1` for integer `N`) and sphere areas.

use std::f64::consts::PI;

pub use statrs::function::gamma::{gamma, ln_gamma};

/// Surface area of the unit sphere `S^{n-1}` in `R^n`.
pub fn sphere_area(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// `J_{m/2}(x)` for a nonnegative integer `m` and `x >= 0`.
pub fn bessel_j_half_order(m: u32, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if m % 2 == 0 {
        bessel_j_int(m / 2, x)
    } else {
        let l = (m - 1) / 2;
        if x == 0.0 {
            return 0.0;
        }
        (2.0 * x / PI).sqrt() * spherical_j(l, x)
    }
}

/// Spherical Bessel function `j_l(x)`.
pub fn spherical_j(l: u32, x: f64) -> f64 {
    if x < (l as f64) + 1.0 {
        // power series
        let mut dfact = 1.0;
        for k in 1..=l {
            dfact *= (2 * k + 1) as f64;
        }
        let lead = x.powi(l as i32) / dfact;
        let z = -0.5 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            term *= z / (k as f64 * (2 * l + 2 * k + 1) as f64);
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        return lead * sum;
    }
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    if l == 0 {
        return j0;
    }
    let mut jm = j0;
    let mut jl = s / (x * x) - c / x;
    for k in 1..l {
        let next = (2 * k + 1) as f64 / x * jl - jm;
        jm = jl;
        jl = next;
    }
    jl
}

fn bessel_j_int(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x > 25.0 + (n as f64) * (n as f64) / 2.0 {
        return bessel_j_asymptotic(n as f64, x);
    }
    // Miller's backward recurrence normalized by J0 + 2 sum J_{2k} = 1.
    let start = 2 * ((x as u32 + n + 40) / 2);
    let mut jp = 0.0;
    let mut j = 1e-30;
    let mut norm = 0.0;
    let mut result = 0.0;
    for k in (1..=start).rev() {
        let jm = 2.0 * k as f64 / x * j - jp;
        jp = j;
        j = jm;
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp *= 1e-250;
            norm *= 1e-250;
            result *= 1e-250;
        }
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * j;
        }
        if k - 1 == n {
            result = j;
        }
    }
    norm += j;
    result / norm
}

fn bessel_j_asymptotic(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..40 {
        let odd = (2 * k - 1) as f64;
        a *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if a.abs() > last {
            break;
        }
        last = a.abs();
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - (0.5 * nu + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Kernel of the radial Fourier transform in `R^n`:
/// `û(k) = ∫_0^∞ u(r) kernel(k, r) dr` with `û(ξ) = ∫ e^{-i x·ξ} u(x) dx`.
///
/// The inverse transform is `u(r) = (2π)^{-n} ∫_0^∞ û(k) kernel(r, k) dk`.
pub fn radial_fourier_kernel(n: usize, k: f64, r: f64) -> f64 {
    let h = n as f64 / 2.0;
    let z = k * r;
    if n == 3 {
        // (2π)^{3/2} k^{-1/2} r^{3/2} J_{1/2}(kr) = 4π r sin(kr)/k
        if z < 1e-8 {
            return 4.0 * PI * r * r * (1.0 - z * z / 6.0);
        }
        return 4.0 * PI * r * z.sin() / k;
    }
    let nu = h - 1.0;
    if z < 1e-8 {
        // J_ν(z) ≈ (z/2)^ν / Γ(ν+1)
        return (2.0 * PI).powf(h) * r.powi(n as i32 - 1) * 0.5f64.powf(nu) / gamma(nu + 1.0);
    }
    (2.0 * PI).powf(h) * k.powf(1.0 - h) * r.powf(h) * bessel_j_half_order(n as u32 - 2, z)
}
