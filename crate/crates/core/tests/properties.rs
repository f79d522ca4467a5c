use std::sync::Arc;

use fracemb::fraclap::{FracLapOperator, Mode};
use fracemb::solve::{Nonlinearity, NonlinearityKind, Problem};
use fracemb::special::sphere_area;
use fracemb::{spaces, Extrapolation, PotentialFamily, RadialFunction, RadialGrid, SpaceParams};
use proptest::prelude::*;

fn grid() -> Arc<RadialGrid> {
    Arc::new(RadialGrid::default_for(3))
}

fn params(s: f64) -> SpaceParams {
    SpaceParams::new(3, s).unwrap()
}

fn bump(g: &Arc<RadialGrid>, a: f64, c: f64, w: f64) -> RadialFunction {
    RadialFunction::from_fn(g, |r| a * (-((r - c) / w).powi(2)).exp(), Extrapolation::ZeroBeyond).unwrap()
}

fn kinds() -> [NonlinearityKind; 3] {
    [
        NonlinearityKind::PurePower { q: 3.0 },
        NonlinearityKind::MinPower { q1: 3.0, q2: 3.5 },
        NonlinearityKind::RationalPower { q1: 3.0, q2: 3.5 },
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sobolev_inequality_holds(a in 0.1f64..10.0, c in 0.0f64..3.0, w in 0.6f64..2.0, s in prop::sample::select(vec![0.6, 0.75, 0.9])) {
        let p = params(s);
        let u = bump(&grid(), a, c, w);
        let lhs = spaces::lq_norm(&u, p.two_star);
        let rhs = spaces::sobolev_embedding_constant(&p) * spaces::gagliardo_seminorm(&u, &p).unwrap();
        prop_assert!(lhs <= rhs, "{lhs} > {rhs}");
    }

    #[test]
    fn gagliardo_scales_with_dilation(lambda in 0.5f64..2.0, w in 0.5f64..1.5, s in prop::sample::select(vec![0.6, 0.75, 0.9])) {
        let p = params(s);
        let g = grid();
        let u = bump(&g, 1.0, 0.0, w);
        let ul = bump(&g, 1.0, 0.0, w / lambda);
        let ratio = spaces::gagliardo_squared(&ul, &p).unwrap() / spaces::gagliardo_squared(&u, &p).unwrap();
        let expected = lambda.powf(2.0 * s - 3.0);
        prop_assert!((ratio / expected - 1.0).abs() < 1e-3, "{ratio} vs {expected}");
    }

    #[test]
    fn nodal_operator_is_self_adjoint(c1 in 0.0f64..2.0, c2 in 0.0f64..2.0, w1 in 0.3f64..1.5, w2 in 0.3f64..1.5) {
        let p = params(0.75);
        let g = grid();
        let op = FracLapOperator::new(&g, &p, Mode::DirectIntegral, Extrapolation::ZeroBeyond).unwrap();
        let mass: Vec<f64> = g.lumped_masses().iter().map(|m| m * sphere_area(3)).collect();
        let u = bump(&g, 1.0, c1, w1).values;
        let v = bump(&g, 1.0, c2, w2).values;
        let (lu, lv) = (op.apply_values(&u), op.apply_values(&v));
        let a: f64 = (0..u.len()).map(|i| mass[i] * lu[i] * v[i]).sum();
        let b: f64 = (0..u.len()).map(|i| mass[i] * u[i] * lv[i]).sum();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()), "{a} vs {b}");
    }

    #[test]
    fn energy_is_even_for_odd_nonlinearities(a in -5.0f64..5.0, c in 0.0f64..3.0, w in 0.3f64..2.0) {
        let p = params(0.75);
        let g = grid();
        let v = PotentialFamily::example_exponential();
        let u = bump(&g, a, c, w).values;
        let minus: Vec<f64> = u.iter().map(|x| -x).collect();
        for kind in kinds() {
            let f = Nonlinearity::new(kind).unwrap();
            let prob = Problem::new(&g, &p, &v, &v, &f, Extrapolation::ZeroBeyond).unwrap();
            let (e1, e2) = (prob.energy(&u), prob.energy(&minus));
            prop_assert!((e1 - e2).abs() <= 1e-12 * e1.abs().max(1.0));
        }
    }
}

#[test]
fn gradient_matches_finite_differences_on_random_states() {
    use rand::{Rng, SeedableRng};
    let p = params(0.75);
    let g = grid();
    let v = PotentialFamily::example_exponential();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let h = 1e-5;
    for kind in kinds() {
        let f = Nonlinearity::new(kind).unwrap();
        let prob = Problem::new(&g, &p, &v, &v, &f, Extrapolation::ZeroBeyond).unwrap();
        for _ in 0..20 {
            let u = bump(&g, rng.random_range(0.2..3.0), rng.random_range(0.0..2.0), rng.random_range(0.3..1.5)).values;
            let dir = bump(&g, 1.0, rng.random_range(0.0..2.0), rng.random_range(0.3..1.5)).values;
            let (grad, _) = prob.gradient(&u);
            let plus: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a + h * b).collect();
            let minus: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a - h * b).collect();
            let fd = (prob.energy(&plus) - prob.energy(&minus)) / (2.0 * h);
            let an = prob.inner(grad.as_slice(), &dir);
            assert!(((fd - an) / an).abs() < 1e-6, "{kind:?}: {fd} vs {an}");
        }
    }
}
