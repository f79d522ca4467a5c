//! Quadrature rules shared by the kernel tables, the stiffness assembly and
//! the constant evaluations.

use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

/// Nodes and weights of a one-dimensional rule.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// Affinely maps a rule on `[0, 1]` onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> Rule {
        let h = b - a;
        Rule {
            nodes: self.nodes.iter().map(|&x| a + h * x).collect(),
            weights: self.weights.iter().map(|&w| w * h).collect(),
        }
    }
}

/// Gauss–Jacobi rule for `∫_{-1}^{1} (1-t)^alpha (1+t)^beta g(t) dt`
/// by the Golub–Welsch eigenvalue method.
pub fn gauss_jacobi_pm1(n: usize, alpha: f64, beta: f64) -> Rule {
    assert!(n >= 1 && alpha > -1.0 && beta > -1.0);
    let ab = alpha + beta;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    for (k, d) in diag.iter_mut().enumerate() {
        let kf = k as f64;
        *d = if k == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
    }
    for (k, o) in off.iter_mut().enumerate() {
        let kf = (k + 1) as f64;
        let num = 4.0 * kf * (kf + alpha) * (kf + beta) * (kf + ab);
        let den = (2.0 * kf + ab).powi(2) * (2.0 * kf + ab + 1.0) * (2.0 * kf + ab - 1.0);
        *o = (num / den).sqrt();
    }
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        jac[(k, k)] = diag[k];
        if k + 1 < n {
            jac[(k, k + 1)] = off[k];
            jac[(k + 1, k)] = off[k];
        }
    }
    let mu0 = ((ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0)
        - ln_gamma(ab + 2.0))
    .exp();
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Gauss–Legendre rule on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Rule {
    gauss_jacobi_01(n, 0.0)
}

/// Rule for `∫_0^1 x^power g(x) dx` with `power > -1`.
pub fn gauss_jacobi_01(n: usize, power: f64) -> Rule {
    let r = gauss_jacobi_pm1(n, 0.0, power);
    let scale = 0.5f64.powf(power + 1.0);
    Rule {
        nodes: r.nodes.iter().map(|&t| 0.5 * (1.0 + t)).collect(),
        weights: r.weights.iter().map(|&w| w * scale).collect(),
    }
}

const GK_XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * GK_WK[7];
    let mut gauss = fc * GK_WG[3];
    let mut pairs = [(0.0, 0.0); 7];
    for j in 0..7 {
        let x = h * GK_XK[j];
        let (fl, fr) = (f(c - x), f(c + x));
        pairs[j] = (fl, fr);
        kron += GK_WK[j] * (fl + fr);
        if j % 2 == 1 {
            gauss += GK_WG[j / 2] * (fl + fr);
        }
    }
    // QUADPACK's pessimistic scaling of |K - G|
    let mean = 0.5 * kron;
    let mut asc = GK_WK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += GK_WK[j] * ((pairs[j].0 - mean).abs() + (pairs[j].1 - mean).abs());
    }
    let raw = (kron - gauss).abs();
    let err = if asc > 0.0 && raw > 0.0 { asc * (200.0 * raw / asc).powf(1.5).min(1.0) } else { raw };
    (kron * h, err * h.abs())
}

struct Piece {
    lo: f64,
    hi: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err).is_eq()
    }
}

impl Eq for Piece {}

impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

const MAX_SPLITS: usize = 20_000;

/// Globally adaptive Gauss–Kronrod (7/15) integration on `[a, b]`: the
/// piece with the largest error estimate is bisected until the total error
/// meets `max(rel_tol |I|, abs_tol)`.
///
/// Returns the integral estimate and the accumulated error estimate.
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> (f64, f64) {
    let (val, err) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { lo: a, hi: b, val, err });
    let (mut total, mut total_err) = (val, err);
    for _ in 0..MAX_SPLITS {
        if total_err <= (rel_tol * total.abs()).max(abs_tol) {
            break;
        }
        let worst = heap.pop().expect("nonempty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid == worst.lo || mid == worst.hi {
            heap.push(worst);
            break;
        }
        let (lv, le) = gk15(&f, worst.lo, mid);
        let (rv, re) = gk15(&f, mid, worst.hi);
        total += lv + rv - worst.val;
        total_err += le + re - worst.err;
        heap.push(Piece { lo: worst.lo, hi: mid, val: lv, err: le });
        heap.push(Piece { lo: mid, hi: worst.hi, val: rv, err: re });
    }
    // re-sum to shed the drift of the running updates
    let (mut sum, mut esum) = (0.0, 0.0);
    for p in heap.iter() {
        sum += p.val;
        esum += p.err;
    }
    (sum, esum)
}

/// Weights of the endpoint-corrected trapezoid rule (Gregory type) on `n`
/// equally spaced unit-step points, exact for polynomials up to degree
/// `order - 1`.
pub fn gregory_weights(n: usize, order: usize) -> Vec<f64> {
    assert!(n >= 2);
    let mut w = vec![1.0; n];
    w[0] = 0.5;
    w[n - 1] = 0.5;
    let p = order.min(n / 2);
    if p < 2 {
        return w;
    }
    // Euler–Maclaurin left-end terms: B_{k+1}/(k+1) for odd k.
    let bern = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0];
    let mut mat = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    for k in 0..p {
        for j in 0..p {
            mat[(k, j)] = (j as f64).powi(k as i32);
        }
        if k % 2 == 1 {
            rhs[k] = bern[(k - 1) / 2] / (k as f64 + 1.0);
        }
    }
    let c = mat.lu().solve(&rhs).expect("Vandermonde system is nonsingular");
    for j in 0..p {
        w[j] += c[j];
        w[n - 1 - j] += c[j];
    }
    w
}
