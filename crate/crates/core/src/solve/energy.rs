use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::Nonlinearity;
use crate::error::{domain, Error, Result};
use crate::exponents::SpaceParams;
use crate::fraclap::{self, Stiffness};
use crate::grid::{Extrapolation, RadialFunction, RadialGrid};
use crate::potentials::PotentialFamily;
use crate::spaces;
use crate::special::sphere_area;

/// Discrete energy landscape on a fixed grid.
///
/// With `A` the Galerkin stiffness and `m_i = |S^{N-1}| ∫ φ_i r^{N-1} dr` the
/// lumped masses of the hat functions, `‖u‖² = uᵀ H u` where `H = A + diag(m V)`, and
/// `ℰ(u) = ½ uᵀ H u − Σ m_i K_i F(u_i)`.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Arc<RadialGrid>,
    pub params: SpaceParams,
    pub v: PotentialFamily,
    pub k: PotentialFamily,
    pub f: Nonlinearity,
    pub extrapolation: Extrapolation,
    stiffness: Arc<Stiffness>,
    mass: Vec<f64>,
    vn: Vec<f64>,
    kn: Vec<f64>,
    h: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl Problem {
    pub fn new(
        grid: &Arc<RadialGrid>,
        params: &SpaceParams,
        v: &PotentialFamily,
        k: &PotentialFamily,
        f: &Nonlinearity,
        extrapolation: Extrapolation,
    ) -> Result<Self> {
        if grid.dim() != params.n {
            return Err(Error::Usage(format!("grid dimension {} but N = {}", grid.dim(), params.n)));
        }
        v.validate(params)?;
        k.validate(params)?;
        let nodes = grid.nodes();
        let vn = v.v_on(nodes);
        let kn = k.k_on(nodes);
        if let Some(i) = vn.iter().position(|x| !(*x >= 0.0 && x.is_finite())) {
            return domain(format!("V is negative or infinite at r = {}", nodes[i]));
        }
        if let Some(i) = kn.iter().position(|x| !(*x > 0.0 && x.is_finite())) {
            return domain(format!("K is not positive and finite at r = {}", nodes[i]));
        }
        let area = sphere_area(params.n);
        let mass: Vec<f64> = grid.lumped_masses().iter().map(|w| area * w).collect();
        let stiffness = fraclap::stiffness(grid, params, extrapolation);
        let mut h = stiffness.matrix.clone();
        for i in 0..h.nrows() {
            h[(i, i)] += mass[i] * vn[i];
        }
        let chol = Cholesky::new(h.clone())
            .ok_or_else(|| Error::Numeric("the discrete H^s_V form is not positive definite".into()))?;
        Ok(Problem {
            grid: grid.clone(),
            params: *params,
            v: v.clone(),
            k: k.clone(),
            f: *f,
            extrapolation,
            stiffness,
            mass,
            vn,
            kn,
            h,
            chol,
        })
    }

    /// Same landscape with another nonlinearity.
    pub fn with_nonlinearity(&self, f: &Nonlinearity) -> Self {
        Problem { f: *f, ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    pub fn stiffness(&self) -> &Stiffness {
        &self.stiffness
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn function(&self, values: Vec<f64>) -> RadialFunction {
        RadialFunction { grid: self.grid.clone(), values, extrapolation: self.extrapolation }
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let m = a.len();
        let mut total = 0.0;
        for j in 0..m {
            let col = self.h.column(j);
            let mut s = 0.0;
            for i in 0..m {
                s += a[i] * col[i];
            }
            total += s * b[j];
        }
        total
    }

    pub fn norm_sq(&self, u: &[f64]) -> f64 {
        self.inner(u, u)
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        self.norm_sq(u).max(0.0).sqrt()
    }

    /// `∫ K F(u)`.
    pub fn nonlinear_energy(&self, u: &[f64]) -> f64 {
        (0..u.len()).map(|i| self.mass[i] * self.kn[i] * self.f.primitive(u[i])).sum()
    }

    /// `∫ K f(u) u`.
    pub fn nonlinear_pairing(&self, u: &[f64]) -> f64 {
        (0..u.len()).map(|i| self.mass[i] * self.kn[i] * self.f.f(u[i]) * u[i]).sum()
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        0.5 * self.norm_sq(u) - self.nonlinear_energy(u)
    }

    /// The derivative `ℰ'(u)` as a vector of nodal components: `ℰ'(u)[v] = r·v`.
    pub fn functional(&self, u: &[f64]) -> DVector<f64> {
        let uv = DVector::from_column_slice(u);
        let mut r = &self.h * uv;
        for i in 0..u.len() {
            r[i] -= self.mass[i] * self.kn[i] * self.f.f(u[i]);
        }
        r
    }

    /// Riesz representative `H⁻¹ r` of a functional.
    pub fn riesz(&self, r: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(r)
    }

    /// Riesz gradient and its norm `‖ℰ'(u)‖_{H^{-s}_V}`.
    pub fn gradient(&self, u: &[f64]) -> (DVector<f64>, f64) {
        let r = self.functional(u);
        let g = self.riesz(&r);
        let n = r.dot(&g).max(0.0).sqrt();
        (g, n)
    }

    /// Jacobian of `ℰ'`: `H − diag(m K f'(u))`.
    pub fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let mut j = self.h.clone();
        for i in 0..u.len() {
            j[(i, i)] -= self.mass[i] * self.kn[i] * self.f.fprime(u[i]);
        }
        j
    }

    /// `|‖u‖² − ∫K f(u) u| / ‖u‖²`.
    pub fn nehari_residual(&self, u: &[f64]) -> f64 {
        let n2 = self.norm_sq(u);
        (n2 - self.nonlinear_pairing(u)).abs() / n2
    }

    /// Nodal `L²(R^N)` norm of `(-Δ)^s u + V u − K f(u)` with the action of
    /// the stiffness used here.
    pub fn strong_residual(&self, u: &[f64]) -> f64 {
        let r = self.functional(u);
        let g: Vec<f64> = (0..u.len()).map(|i| (r[i] / self.mass[i]).powi(2)).collect();
        self.grid.integrate(&g).sqrt()
    }

    pub fn potential_nodes(&self) -> (&[f64], &[f64]) {
        (&self.vn, &self.kn)
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }
}

/// `ℰ(u) = ½‖u‖²_{H^s_V} − ∫ K F(u)` with the solver's quadrature; errors
/// from the seminorm checks propagate.
pub fn energy(
    u: &RadialFunction,
    v: &PotentialFamily,
    k: &PotentialFamily,
    f: &Nonlinearity,
    params: &SpaceParams,
) -> Result<f64> {
    spaces::gagliardo_squared(u, params)?;
    let problem = Problem::new(&u.grid, params, v, k, f, u.extrapolation)?;
    Ok(problem.energy(&u.values))
}

/// Riesz representative of `ℰ'(u)` in the discrete `H^s_V` inner product.
pub fn energy_gradient(
    u: &RadialFunction,
    v: &PotentialFamily,
    k: &PotentialFamily,
    f: &Nonlinearity,
    params: &SpaceParams,
) -> Result<RadialFunction> {
    let problem = Problem::new(&u.grid, params, v, k, f, u.extrapolation)?;
    let (g, _) = problem.gradient(&u.values);
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("gradient solve produced non-finite values".into()));
    }
    Ok(u.with_values(g.as_slice().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solve::NonlinearityKind;

    fn setup() -> (Arc<RadialGrid>, SpaceParams) {
        let p = SpaceParams::new(3, 0.75).unwrap();
        (Arc::new(RadialGrid::default_for(3)), p)
    }

    fn bump(grid: &Arc<RadialGrid>, a: f64) -> RadialFunction {
        RadialFunction::from_fn(grid, |r| a * (-r * r).exp(), Extrapolation::PowerTail(-0.75)).unwrap()
    }

    #[test]
    fn zero_state() {
        let (g, p) = setup();
        let f = Nonlinearity::pure(3.0).unwrap();
        let v = PotentialFamily::constant();
        let z = RadialFunction::zeros(&g);
        assert_eq!(energy(&z, &v, &v, &f, &p).unwrap(), 0.0);
        assert!(energy_gradient(&z, &v, &v, &f, &p).unwrap().is_zero());
    }

    #[test]
    fn small_and_large_multiples() {
        let (g, p) = setup();
        let f = Nonlinearity::pure(3.0).unwrap();
        let v = PotentialFamily::constant();
        let u = bump(&g, 1.0);
        let n = spaces::hsv_norm(&u, &v, &p).unwrap();
        let small = u.scaled(1e-3 / n);
        assert!(energy(&small, &v, &v, &f, &p).unwrap() > 0.25 * 1e-6);
        assert!(energy(&u.scaled(100.0), &v, &v, &f, &p).unwrap() < 0.0);
    }

    #[test]
    fn gradient_pairs_with_directions() {
        let (g, p) = setup();
        let v = PotentialFamily::example_exponential();
        for kind in [
            NonlinearityKind::PurePower { q: 3.0 },
            NonlinearityKind::MinPower { q1: 3.0, q2: 3.5 },
            NonlinearityKind::RationalPower { q1: 3.0, q2: 3.5 },
        ] {
            let f = Nonlinearity::new(kind).unwrap();
            let prob = Problem::new(&g, &p, &v, &v, &f, Extrapolation::PowerTail(-0.75)).unwrap();
            let u = bump(&g, 1.3);
            let dir: Vec<f64> = g.nodes().iter().map(|r| (-(r - 0.7).powi(2)).exp()).collect();
            let (grad, _) = prob.gradient(&u.values);
            let h = 1e-5;
            let plus: Vec<f64> = u.values.iter().zip(&dir).map(|(a, b)| a + h * b).collect();
            let minus: Vec<f64> = u.values.iter().zip(&dir).map(|(a, b)| a - h * b).collect();
            let fd = (prob.energy(&plus) - prob.energy(&minus)) / (2.0 * h);
            let an = prob.inner(grad.as_slice(), &dir);
            assert!(((fd - an) / an).abs() < 1e-6, "{kind:?}: {fd} vs {an}");
        }
    }

    #[test]
    fn lumped_and_high_order_norms_agree() {
        let (g, p) = setup();
        let v = PotentialFamily::example_exponential();
        let f = Nonlinearity::pure(3.0).unwrap();
        let u = bump(&g, 1.0);
        let prob = Problem::new(&g, &p, &v, &v, &f, u.extrapolation).unwrap();
        let n = spaces::hsv_norm(&u, &v, &p).unwrap();
        assert!((prob.norm(&u.values) / n - 1.0).abs() < 1e-3);
    }

    #[test]
    fn public_energy_agrees_with_problem() {
        let (g, p) = setup();
        let f = Nonlinearity::rational(3.0, 3.5).unwrap();
        let v = PotentialFamily::example_exponential();
        let u = bump(&g, 2.0);
        let prob = Problem::new(&g, &p, &v, &v, &f, u.extrapolation).unwrap();
        let a = energy(&u, &v, &v, &f, &p).unwrap();
        assert!((a - prob.energy(&u.values)).abs() < 1e-12 * a.abs().max(1.0));
    }
}
