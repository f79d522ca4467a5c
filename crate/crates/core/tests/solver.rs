use fracemb::solve::{
    deflate_and_continue, find_endpoint, initial_bump, mountain_pass, solve_many, MountainPassConfig, Nonlinearity, Problem,
};
use fracemb::{PotentialFamily, SpaceParams};

fn params() -> SpaceParams {
    SpaceParams::new(3, 0.75).unwrap()
}

#[test]
fn example_three_ground_state() {
    let p = params();
    let v = PotentialFamily::example_exponential();
    let f = Nonlinearity::pure(3.0).unwrap();
    let cfg = MountainPassConfig::default();
    let sol = mountain_pass(&v, &v, &f, &p, &cfg).unwrap();
    assert!(sol.grad_norm < 1e-6);
    assert!(sol.nehari_residual < 1e-5);
    assert!(sol.energy > 0.0);
    assert!(sol.nonneg);
    assert!(sol.profile().max_abs() > 0.1);
    let hist = sol.path_history.as_ref().unwrap();
    assert!(hist.windows(2).all(|w| w[1].1 <= w[0].1));
    let rel = sol.spectral_residual(&v, &v, &f, &p).unwrap() / sol.profile().max_abs();
    assert!(rel < 5e-2, "{rel}");
}

#[test]
fn endpoint_doubles_until_negative() {
    let p = params();
    let v = PotentialFamily::constant();
    let f = Nonlinearity::pure(3.0).unwrap();
    let cfg = MountainPassConfig::default();
    let g = cfg.grid.build(3).unwrap();
    let u0 = initial_bump(&g, &f, cfg.extrapolation(&p)).unwrap();
    let (lambda, e) = find_endpoint(&u0, &v, &v, &f, &p).unwrap();
    assert!(lambda >= 1.0 && lambda.is_finite());
    let prob = Problem::new(&g, &p, &v, &v, &f, u0.extrapolation).unwrap();
    assert!(prob.energy(&e.values) < -1.0);
    assert!(find_endpoint(&u0.scaled(0.0), &v, &v, &f, &p).is_err());
}

#[test]
fn deflation_finds_distinct_solutions_of_an_odd_problem() {
    let p = params();
    let v = PotentialFamily::example_exponential();
    let f = Nonlinearity::min_power(3.0, 3.5).unwrap();
    let cfg = MountainPassConfig { nonneg: false, ..Default::default() };
    let sols = solve_many(&v, &v, &f, &p, &cfg, 3).unwrap();
    assert_eq!(sols.len(), 3);
    let prob = Problem::new(&sols[0].profile().grid, &p, &v, &v, &f, sols[0].profile().extrapolation).unwrap();
    for w in sols.windows(2) {
        assert!(w[0].energy <= w[1].energy);
    }
    for (i, a) in sols.iter().enumerate() {
        assert!(a.grad_norm < 1e-6);
        let u = &a.profile().values;
        let minus: Vec<f64> = u.iter().map(|x| -x).collect();
        assert!((prob.energy(u) - prob.energy(&minus)).abs() <= 1e-12 * a.energy.abs());
        for b in &sols[i + 1..] {
            let d: Vec<f64> = u.iter().zip(&b.profile().values).map(|(x, y)| x - y).collect();
            let s: Vec<f64> = u.iter().zip(&b.profile().values).map(|(x, y)| x + y).collect();
            assert!(prob.norm(&d) > cfg.separation && prob.norm(&s) > cfg.separation);
        }
    }
}

#[test]
fn deflation_refuses_non_odd_nonlinearities() {
    let p = params();
    let v = PotentialFamily::example_exponential();
    let f = Nonlinearity::pure(3.0).unwrap();
    let cfg = MountainPassConfig::default();
    let first = mountain_pass(&v, &v, &f, &p, &cfg).unwrap();
    assert!(deflate_and_continue(&[first], &v, &v, &f.truncated(), &p, &cfg).is_err());
    assert!(deflate_and_continue(&[], &v, &v, &f, &p, &cfg).is_err());
}
