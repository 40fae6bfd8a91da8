use symfin::expr::{Expr, SymbolTable};
use symfin::models::{catalog_symbolic, EvolutionPDE};
use symfin::numeric::{
    dominant_frequency, dp45, ermakov_suite, expr_field, fig3_scenario, flow_check, discrete_residual, integrate,
    integrate_determining_system, max_rel_error, sample, solve_fd, Boundary, DeterminingSystem, Direction, Exec,
    FdData, Fig3Config, Field, Grid, NumericEnv, NumericError, OdeOptions, Provenance,
};
use symfin::symmetry::VectorField;

fn heat() -> EvolutionPDE {
    catalog_symbolic("heat2d").unwrap()
}

/// Solution of u_t = u_xx + u_yy started as a point mass at t = −1.
fn kernel(t: f64, x: f64, y: f64) -> f64 {
    let s = t + 1.0;
    (-(x * x + y * y) / (4.0 * s)).exp() / (4.0 * std::f64::consts::PI * s)
}

fn grid(n: usize, nt: usize) -> Grid {
    Grid::new((-3.0, 3.0), (-3.0, 3.0), n, n, (0.0, 0.5), nt, Direction::Forward).unwrap()
}

#[test]
fn grid_validation() {
    let bad = Grid::new((-1.0, 1.0), (-1.0, 1.0), 40, 41, (0.0, 1.0), 10, Direction::Forward);
    assert!(matches!(bad, Err(NumericError::Grid(_))));
    let bad = Grid::new((-1.0, 1.0), (-1.0, 1.0), 41, 41, (1.0, 0.0), 10, Direction::Forward);
    assert!(matches!(bad, Err(NumericError::Grid(_))));
    let g = grid(41, 10);
    assert_eq!(g.xs(0), -3.0);
    assert_eq!(g.xs(40), 3.0);
    assert!((g.dt() - 0.05).abs() < 1e-15);
}

#[test]
fn exact_solution_has_small_discrete_residual() {
    let g = grid(61, 100);
    let exact = Field::from_fn(&g, Provenance::ClosedForm, kernel);
    let r = discrete_residual(&exact, &heat(), &NumericEnv::new()).unwrap();
    assert!(r < 2e-3, "residual {r}");

    // deterministic noise of unit size breaks the equation badly
    let noise = Field::from_fn(&g, Provenance::Fd, |t, x, y| ((37.0 * x + 91.0 * y + 53.0 * t).sin() * 1e4).sin());
    let rn = discrete_residual(&noise, &heat(), &NumericEnv::new()).unwrap();
    assert!(rn > 1e3 * r, "noise residual {rn}");
}

#[test]
fn flow_of_a_symmetry_keeps_solutions() {
    let g = grid(61, 100);
    let exact = Field::from_fn(&g, Provenance::ClosedForm, kernel);
    let env = NumericEnv::new();
    let base = discrete_residual(&exact, &heat(), &env).unwrap();
    let moved = flow_check(&heat(), &env, &VectorField::translation(1), 0.3, &exact).unwrap();
    assert!(moved < 3.0 * base + 1e-6, "translated residual {moved} vs {base}");

    let xdx = VectorField::new("x dx", Expr::zero(), Expr::atom(symfin::expr::Atom::var("x")), Expr::zero(), Expr::zero());
    let broken = flow_check(&heat(), &env, &xdx, 0.3, &exact).unwrap();
    assert!(broken > 10.0 * moved, "non-symmetry residual {broken} vs {moved}");
}

#[test]
fn constant_solution_is_preserved() {
    let g = grid(41, 20);
    let one = |_: f64, _: f64| 1.0;
    let bd = |_: f64, _: f64, _: f64| 1.0;
    let data = FdData { initial: &one, boundary: Boundary::Dirichlet(&bd) };
    let f = solve_fd(&heat(), &NumericEnv::new(), &g, &data, Exec::Sequential).unwrap();
    assert!(f.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
}

#[test]
fn heat_kernel_is_reproduced() {
    let g = grid(81, 100);
    let init = |x: f64, y: f64| kernel(0.0, x, y);
    let data = FdData { initial: &init, boundary: Boundary::Dirichlet(&kernel) };
    let f = solve_fd(&heat(), &NumericEnv::new(), &g, &data, Exec::Sequential).unwrap();
    let ex = Field::from_fn(&g, Provenance::ClosedForm, kernel);
    let e = max_rel_error(&f.values, &ex.values);
    assert!(e < 5e-3, "error {e}");
}

#[test]
fn parallel_and_sequential_sweeps_agree() {
    let mut p = symfin::models::Params::symbolic("bs2d_canonical").unwrap();
    p.bind("phi1", "1").unwrap();
    p.bind("phi2", "11/10").unwrap();
    p.bind("k", "1/20").unwrap();
    let pde = symfin::models::catalog(&p).unwrap();
    let g = Grid::new((-2.0, 2.0), (-2.0, 2.0), 41, 41, (0.0, 0.25), 20, Direction::Backward).unwrap();
    let init = |x: f64, y: f64| (-(x * x + y * y)).exp();
    let data = FdData { initial: &init, boundary: Boundary::Linear };
    let env = NumericEnv::new();
    let a = solve_fd(&pde, &env, &g, &data, Exec::Sequential).unwrap();
    let b = solve_fd(&pde, &env, &g, &data, Exec::Parallel).unwrap();
    assert_eq!(a.values, b.values);
}

#[test]
fn tricubic_sampling_is_exact_on_cubics() {
    let g = grid(41, 10);
    let p = |t: f64, x: f64, y: f64| x * x * x - 2.0 * x * y * y + t * t - 0.5 * y + 1.0;
    let f = Field::from_fn(&g, Provenance::ClosedForm, p);
    for (t, x, y) in [(0.123, 0.31, -1.17), (0.4, -2.05, 0.66), (0.25, 0.0, 0.0)] {
        let s = sample(&f, t, x, y).unwrap();
        assert!((s - p(t, x, y)).abs() < 1e-10, "{s} vs {}", p(t, x, y));
    }
    assert!(sample(&f, 0.1, 3.5, 0.0).is_none());
}

#[test]
fn expression_fields_match_closures() {
    let mut t = SymbolTable::new();
    t.var("c");
    let e = t.parse("x^2*y - 3*t*y + exp(1/2*x)").unwrap();
    let g = grid(41, 4);
    let f = expr_field(&e, &NumericEnv::new(), &g, ["x", "y"], Provenance::ClosedForm).unwrap();
    let h = Field::from_fn(&g, Provenance::ClosedForm, |t, x, y| x * x * y - 3.0 * t * y + (0.5 * x).exp());
    assert!(max_rel_error(&f.values, &h.values) < 1e-14);
    let e = t.parse("c*x").unwrap();
    assert!(expr_field(&e, &NumericEnv::new(), &g, ["x", "y"], Provenance::ClosedForm).is_err());
}

#[test]
fn ode_and_quadrature_helpers() {
    let times = [0.5, 1.0, 2.0];
    let ys = dp45(|_, y, d| d[0] = -y[0], 0.0, &[1.0], &times, OdeOptions::default()).unwrap();
    for (t, y) in times.iter().zip(&ys) {
        assert!((y[0] - (-t).exp()).abs() < 1e-9);
    }
    let v = integrate(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
    assert!((v - 2.0).abs() < 1e-10);
    assert_eq!(max_rel_error(&[1.0, 2.0], &[1.0, 4.0]), 0.5);
}

#[test]
fn ermakov_constraint_is_enforced() {
    let r = ermakov_suite(|_| 1.0, [1.0, 1.0, 1.0], (0.0, 1.0), [1.0, 0.0]);
    assert!(matches!(r, Err(NumericError::Constraint(_))));
}

#[test]
fn ermakov_with_unit_frequency() {
    // υ₁ = cos t, υ₂ = sin t, so ρ ≡ 1 and T = t
    let r = ermakov_suite(|_| 1.0, [1.0, 0.0, 1.0], (0.0, 10.0), [0.5, -0.25]).unwrap();
    assert!((r.wronskian - 1.0).abs() < 1e-12);
    assert!(r.pinney_residual < 1e-8);
    assert!(r.invariant_drift < 1e-8);
    assert!(r.canonical_residual < 1e-8);
    assert!(r.time_increasing);
    // I = ½[(x/ρ)² + (ρẋ − ρ′x)²] with ρ = 1
    assert!((r.invariant - 0.5 * (0.25 + 0.0625)).abs() < 1e-12);
}

#[test]
fn zero_initial_data_stay_zero() {
    let table = SymbolTable::new();
    let coeffs: Vec<Expr> = ["1/2", "1 + t", "0", "t^2", "1", "1/3"].iter().map(|s| table.parse(s).unwrap()).collect();
    let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
    let run = integrate_determining_system(DeterminingSystem::TwoFactor, &coeffs, None, 0.0, &[0.0; 8], &times).unwrap();
    assert!(run.states.iter().flatten().all(|v| *v == 0.0));
    assert_eq!(run.max_residual, 0.0);
    assert_eq!(run.state_names.len(), 8);
    assert!(integrate_determining_system(DeterminingSystem::TwoFactor, &coeffs, None, 0.0, &[0.0; 7], &times).is_err());
}

#[test]
fn dominant_frequency_examples() {
    let dt = 0.01;
    let series: Vec<f64> = (0..400).map(|k| 0.3 * k as f64 * dt + 0.01 * (3.0 * k as f64 * dt).sin()).collect();
    let (f, _) = dominant_frequency(&series, dt).unwrap();
    let bin = 2.0 * std::f64::consts::PI / (400.0 * dt);
    assert!((f - 3.0).abs() <= bin);
    let line: Vec<f64> = (0..400).map(|k| 1.0 - 0.2 * k as f64 * dt).collect();
    assert!(dominant_frequency(&line, dt).is_none());
}

#[test]
fn constant_rate_shows_no_oscillation() {
    let cfg = Fig3Config { eps: 0.0, nx: 41, ny: 41, nt: 200, ..Fig3Config::default() };
    let r = fig3_scenario(&cfg, Exec::Parallel).unwrap();
    assert!(r.frequency.is_none(), "{:?}", r.frequency);
    assert!(r.max_rel_error < 1e-2);
}
