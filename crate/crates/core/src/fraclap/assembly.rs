//! Galerkin assembly of the Gagliardo form on piecewise-linear radial functions.
//!
//! The half line is split into cells. Each cell carries a shape describing how
//! `u` restricted to it depends on the nodal values; the double integral is
//! then a sum over cell pairs. Same-cell and neighbouring pairs use Duffy-type
//! maps whose Jacobians absorb the diagonal singularity exactly, so every
//! contribution is `w k(r,ρ) d dᵀ` with `w > 0` and the matrix is PSD.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::grid::{Extrapolation, RadialGrid};
use crate::kernel::AngularKernel;
use crate::quad::{gauss_jacobi_01, gauss_legendre, Rule};
use crate::special::sphere_area;

/// Cells inside `r_1` and beyond `r_M` grow geometrically (in `ln r`) by this factor.
const GROWTH: f64 = 1.3;
const CORE_DEPTH: f64 = 1e-9;
const TAIL_REACH: f64 = 1e4;
const SINGULAR_ORDER: usize = 12;

#[derive(Debug, Clone, Copy)]
pub(crate) enum Shape {
    Const(usize),
    Linear(usize),
    Power { dof: usize, anchor: f64, exponent: f64 },
    Drop { dof: usize, start: f64, end: f64 },
    Zero,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Cell {
    pub a: f64,
    pub b: f64,
    pub shape: Shape,
}

/// Up to two `(dof, coefficient)` pairs.
type Coeffs = [(usize, f64); 2];

impl Cell {
    fn width(&self) -> f64 {
        self.b - self.a
    }

    /// `u(r) = Σ coeff · u[dof]` for `r` in the cell.
    pub fn coeffs(&self, r: f64) -> Coeffs {
        match self.shape {
            Shape::Const(d) => [(d, 1.0), (d, 0.0)],
            Shape::Linear(d) => {
                let t = (r - self.a) / self.width();
                [(d, 1.0 - t), (d + 1, t)]
            }
            Shape::Power { dof, anchor, exponent } => [(dof, (r / anchor).powf(exponent)), (dof, 0.0)],
            Shape::Drop { dof, start, end } => [(dof, (end - r) / (end - start)), (dof, 0.0)],
            Shape::Zero => [(0, 0.0), (0, 0.0)],
        }
    }

    /// Divided difference `(u(r) - u(ρ))/(r - ρ)` as coefficients, for `r ≠ ρ` in the cell.
    fn divided(&self, r: f64, rho: f64) -> Coeffs {
        match self.shape {
            Shape::Const(d) => [(d, 0.0), (d, 0.0)],
            Shape::Linear(d) => {
                let h = self.width();
                [(d, -1.0 / h), (d + 1, 1.0 / h)]
            }
            Shape::Power { dof, anchor, exponent } => {
                let v = ((r / anchor).powf(exponent) - (rho / anchor).powf(exponent)) / (r - rho);
                [(dof, v), (dof, 0.0)]
            }
            Shape::Drop { dof, start, end } => [(dof, -1.0 / (end - start)), (dof, 0.0)],
            Shape::Zero => [(0, 0.0), (0, 0.0)],
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self.shape, Shape::Zero)
    }
}

/// Cell decomposition of `(0, R_far)` and the value coefficients beyond `R_far`.
pub(crate) struct Layout {
    pub cells: Vec<Cell>,
    pub far_radius: f64,
    pub far: Coeffs,
}

pub(crate) fn layout(grid: &RadialGrid, extrapolation: Extrapolation) -> Layout {
    let nodes = grid.nodes();
    let m = nodes.len();
    let delta_in = (nodes[1] / nodes[0]).ln();
    let delta_out = (nodes[m - 1] / nodes[m - 2]).ln();

    let mut core = Vec::new();
    let mut b = nodes[0];
    let mut step = delta_in;
    while b > nodes[0] * CORE_DEPTH {
        let a = b * (-step).exp();
        core.push(Cell { a, b, shape: Shape::Const(0) });
        b = a;
        step *= GROWTH;
    }
    core.push(Cell { a: 0.0, b, shape: Shape::Const(0) });
    core.reverse();

    let mut cells = core;
    for j in 0..m - 1 {
        cells.push(Cell { a: nodes[j], b: nodes[j + 1], shape: Shape::Linear(j) });
    }

    let rm = nodes[m - 1];
    let far_radius_target = rm * TAIL_REACH;
    let mut a = rm;
    let mut step = delta_out;
    let far = match extrapolation {
        Extrapolation::PowerTail(exponent) => {
            while a < far_radius_target {
                let b = a * step.exp();
                cells.push(Cell { a, b, shape: Shape::Power { dof: m - 1, anchor: rm, exponent } });
                a = b;
                step *= GROWTH;
            }
            [(m - 1, (a / rm).powf(exponent)), (m - 1, 0.0)]
        }
        Extrapolation::ZeroBeyond => {
            let end = grid.zero_end();
            cells.push(Cell { a: rm, b: end, shape: Shape::Drop { dof: m - 1, start: rm, end } });
            a = end;
            step *= GROWTH;
            while a < far_radius_target {
                let b = a * step.exp();
                cells.push(Cell { a, b, shape: Shape::Zero });
                a = b;
                step *= GROWTH;
            }
            [(0, 0.0), (0, 0.0)]
        }
    };
    Layout { cells, far_radius: a, far }
}

/// Assembled Gagliardo form `uᵀ A u = [u]²` (including the factor `C(N,s)/2`).
#[derive(Debug, Clone)]
pub struct Stiffness {
    pub matrix: DMatrix<f64>,
    /// Same-cell part of the form for each linear cell `[r_j, r_{j+1}]`:
    /// `local[j] (u_{j+1} - u_j)²`.
    pub local: Vec<f64>,
}

impl Stiffness {
    pub fn form(&self, u: &[f64]) -> f64 {
        let m = u.len();
        let mut total = 0.0;
        for i in 0..m {
            let mut row = 0.0;
            for j in 0..m {
                row += self.matrix[(i, j)] * u[j];
            }
            total += u[i] * row;
        }
        total
    }

    pub fn local_form(&self, u: &[f64]) -> f64 {
        self.local.iter().enumerate().map(|(j, k)| k * (u[j + 1] - u[j]).powi(2)).sum()
    }
}

struct Rules {
    x_same: Rule,
    y_same: Rule,
    y_adj: Rule,
    separated: Vec<(f64, Rule)>,
    far: Rule,
}

impl Rules {
    fn new(s: f64) -> Self {
        let separated = [(1.0, 12), (2.0, 10), (4.0, 8), (10.0, 6), (30.0, 4), (f64::INFINITY, 3)]
            .iter()
            .map(|&(q, n)| (q, gauss_legendre(n)))
            .collect();
        Rules {
            x_same: gauss_jacobi_01(SINGULAR_ORDER, 2.0 - 2.0 * s),
            y_same: gauss_jacobi_01(SINGULAR_ORDER, 1.0 - 2.0 * s),
            y_adj: gauss_legendre(SINGULAR_ORDER),
            separated,
            far: gauss_legendre(6),
        }
    }

    fn separated(&self, gap: f64, width: f64) -> &Rule {
        let q = gap / width;
        &self.separated.iter().find(|(lim, _)| q < *lim).expect("last limit is infinite").1
    }
}

/// Local 4×4 accumulator for one pair of cells.
struct Local {
    dofs: [usize; 4],
    mat: [[f64; 4]; 4],
}

impl Local {
    fn new(ci: &Coeffs, cj: &Coeffs) -> Self {
        Local { dofs: [ci[0].0, ci[1].0, cj[0].0, cj[1].0], mat: [[0.0; 4]; 4] }
    }

    fn add(&mut self, w: f64, d: [f64; 4]) {
        for a in 0..4 {
            let wa = w * d[a];
            for b in 0..4 {
                self.mat[a][b] += wa * d[b];
            }
        }
    }

    fn emit(&self, out: &mut Vec<(usize, usize, f64)>) {
        for a in 0..4 {
            for b in 0..4 {
                if self.mat[a][b] != 0.0 {
                    out.push((self.dofs[a], self.dofs[b], self.mat[a][b]));
                }
            }
        }
    }
}

fn diff(ci: &Coeffs, cj: &Coeffs) -> [f64; 4] {
    [ci[0].1, ci[1].1, -cj[0].1, -cj[1].1]
}

pub fn assemble(grid: &RadialGrid, s: f64, norm_c: f64, extrapolation: Extrapolation) -> Stiffness {
    let kernel = AngularKernel::shared(grid.dim(), s);
    let lay = layout(grid, extrapolation);
    let rules = Rules::new(s);
    let m = grid.len();
    let cells = &lay.cells;
    let nc = cells.len();
    let e = 1.0 + 2.0 * s;

    let rows: Vec<(Vec<(usize, usize, f64)>, Option<(usize, f64)>)> = (0..nc)
        .into_par_iter()
        .map(|i| {
            let ci = &cells[i];
            let mut out = Vec::new();
            let mut local_entry = None;

            // same cell, both triangles
            if !matches!(ci.shape, Shape::Const(_) | Shape::Zero) {
                let h = ci.width();
                let probe = ci.coeffs(ci.a);
                let mut loc = Local::new(&probe, &probe);
                for (x, wx) in rules.x_same.iter() {
                    for (y, wy) in rules.y_same.iter() {
                        let r = ci.a + h * x;
                        let rho = ci.a + h * x * (1.0 - y);
                        let dd = ci.divided(r, rho);
                        let w = 2.0 * h.powf(3.0 - 2.0 * s) * wx * wy * kernel.reduced(r, rho);
                        loc.add(w, [dd[0].1, dd[1].1, 0.0, 0.0]);
                    }
                }
                if let Shape::Linear(j) = ci.shape {
                    local_entry = Some((j, 0.5 * norm_c * loc.mat[0][0]));
                }
                loc.emit(&mut out);
            }

            for j in i + 1..nc {
                let cj = &cells[j];
                if ci.is_zero() && cj.is_zero() {
                    continue;
                }
                if let (Shape::Const(a), Shape::Const(b)) = (ci.shape, cj.shape) {
                    if a == b {
                        continue;
                    }
                }
                if j == i + 1 {
                    // common corner at a = ci.b = cj.a
                    let corner = ci.b;
                    let (h1, h2) = (ci.width(), cj.width());
                    let pi = ci.coeffs(ci.a);
                    let pj = cj.coeffs(cj.a);
                    let mut loc = Local::new(&pi, &pj);
                    for (x, wx) in rules.x_same.iter() {
                        for (y, wy) in rules.y_adj.iter() {
                            for tri in 0..2 {
                                let (xx, yy, len) = if tri == 0 {
                                    (h1 * x, h2 * x * y, h1 + h2 * y)
                                } else {
                                    (h1 * x * y, h2 * x, h2 + h1 * y)
                                };
                                let r = corner - xx;
                                let rho = corner + yy;
                                let di = if xx > 0.0 { ci.divided(r, corner) } else { pi };
                                let dj = if yy > 0.0 { cj.divided(rho, corner) } else { pj };
                                // u(r) - u(ρ) = -di·X - dj·Y, divided by x
                                let (fx, fy) = if tri == 0 { (h1, h2 * y) } else { (h1 * y, h2) };
                                let d = [-di[0].1 * fx, -di[1].1 * fx, -dj[0].1 * fy, -dj[1].1 * fy];
                                let w = 2.0 * wx * wy * h1 * h2 * kernel.reduced(r, rho) / len.powf(e);
                                loc.add(w, d);
                            }
                        }
                    }
                    loc.emit(&mut out);
                } else {
                    let gap = cj.a - ci.b;
                    let rule = rules.separated(gap, ci.width().max(cj.width()));
                    let ri = rule.mapped(ci.a, ci.b);
                    let rj = rule.mapped(cj.a, cj.b);
                    let mut loc = Local::new(&ci.coeffs(ci.a), &cj.coeffs(cj.a));
                    for (r, wr) in ri.iter() {
                        let cr = ci.coeffs(r);
                        for (rho, wrho) in rj.iter() {
                            let crho = cj.coeffs(rho);
                            loc.add(2.0 * wr * wrho * kernel.eval(r, rho), diff(&cr, &crho));
                        }
                    }
                    loc.emit(&mut out);
                }
            }

            // interaction with (R_far, ∞), where u is frozen at its value at R_far
            let rf = lay.far_radius;
            let amp = sphere_area(grid.dim()).powi(2) * rf.powf(-2.0 * s) / (2.0 * s);
            let rule = rules.far.mapped(ci.a, ci.b);
            let mut loc = Local::new(&ci.coeffs(ci.a), &lay.far);
            for (r, w) in rule.iter() {
                let d = diff(&ci.coeffs(r), &lay.far);
                loc.add(2.0 * w * amp * r.powi(grid.dim() as i32 - 1), d);
            }
            loc.emit(&mut out);
            (out, local_entry)
        })
        .collect();

    let mut matrix = DMatrix::<f64>::zeros(m, m);
    let mut local = vec![0.0; m - 1];
    for (entries, loc) in rows {
        for (a, b, v) in entries {
            matrix[(a, b)] += v;
        }
        if let Some((j, v)) = loc {
            local[j] = v;
        }
    }
    let half_c = 0.5 * norm_c;
    matrix *= half_c;
    // exact symmetry
    for i in 0..m {
        for j in i + 1..m {
            let v = 0.5 * (matrix[(i, j)] + matrix[(j, i)]);
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }
    Stiffness { matrix, local }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_contiguous() {
        let g = RadialGrid::default_for(3);
        for ex in [Extrapolation::ZeroBeyond, Extrapolation::PowerTail(-0.75)] {
            let lay = layout(&g, ex);
            assert_eq!(lay.cells[0].a, 0.0);
            for w in lay.cells.windows(2) {
                assert_eq!(w[0].b, w[1].a);
            }
            assert!(lay.far_radius >= g.r_max() * TAIL_REACH);
        }
    }

    #[test]
    fn constants_are_in_the_kernel() {
        let g = RadialGrid::geometric(3, 1e-2, 20.0, 80).unwrap();
        let st = assemble(&g, 0.75, 1.0, Extrapolation::PowerTail(0.0));
        let ones = vec![1.0; g.len()];
        let scale = st.matrix.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..g.len() {
            let row: f64 = (0..g.len()).map(|j| st.matrix[(i, j)] * ones[j]).sum();
            assert!(row.abs() < 1e-10 * scale, "row {i}: {row}");
        }
    }

    #[test]
    fn positive_semidefinite() {
        let g = RadialGrid::geometric(2, 1e-2, 20.0, 60).unwrap();
        let st = assemble(&g, 0.6, 1.0, Extrapolation::ZeroBeyond);
        let eig = st.matrix.clone().symmetric_eigenvalues();
        let top = eig.max();
        assert!(eig.iter().all(|&l| l > -1e-12 * top));
    }
}
