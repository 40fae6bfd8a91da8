use symfin::expr::{q, qr, Atom, Expr};
use symfin::models::{apply_transformation, catalog, catalog_symbolic, EvolutionPDE, Params};
use symfin::reduce::{
    bs28_form, invariant_solution, is_maximally_symmetric_1p1, reduce_once, solve_reduced_ode, to_heat,
    translation_with_scaling,
};
use symfin::symmetry::{check_symmetry, VectorField};

fn bs(phi1: &str, phi2: &str, k: &str) -> EvolutionPDE {
    let mut p = Params::symbolic("bs2d_canonical").unwrap();
    p.bind("phi1", phi1).unwrap();
    p.bind("phi2", phi2).unwrap();
    p.bind("k", k).unwrap();
    catalog(&p).unwrap()
}

fn is_heat(p: &EvolutionPDE) -> bool {
    p.same_as(&catalog_symbolic("heat2d").unwrap())
}

fn x() -> Expr {
    Expr::atom(Atom::var("x"))
}

#[test]
fn heat_map_without_drift_or_discount() {
    let pde = bs("0", "0", "0");
    let tr = to_heat(&pde).unwrap();
    assert!(is_heat(&apply_transformation(&pde, &tr).unwrap()));
}

#[test]
fn heat_map_with_symbolic_coefficients() {
    let pde = catalog_symbolic("bs2d_canonical").unwrap();
    let tr = to_heat(&pde).unwrap();
    assert!(is_heat(&apply_transformation(&pde, &tr).unwrap()));
}

#[test]
fn heat_map_with_opaque_drift() {
    let pde = catalog(&Params::time_dependent("bs2d_special_nonauto").unwrap()).unwrap();
    let tr = to_heat(&pde).unwrap();
    assert!(is_heat(&apply_transformation(&pde, &tr).unwrap()));
}

#[test]
fn heat_map_rejects_other_shapes() {
    assert!(to_heat(&catalog_symbolic("heat1d").unwrap()).is_err());
    assert!(bs28_form(&catalog_symbolic("twofactor_canonical").unwrap()).is_err());
}

#[test]
fn invariant_solution_with_zero_wave_vector() {
    let pde = bs("1", "11/10", "1/20");
    let s = invariant_solution(&pde, &q(0), &q(0)).unwrap();
    assert_eq!(s.integrand, Expr::constant(qr(1, 20)));
    assert_eq!(s.u, Expr::exp(&(Expr::atom(Atom::t()).scale(&qr(1, 20)))));
    assert!(s.satisfies(&pde).unwrap());
}

#[test]
fn invariant_solution_plane_wave() {
    let pde = bs("0", "0", "0");
    let s = invariant_solution(&pde, &q(1), &q(0)).unwrap();
    let expected = Expr::exp(&(x() - Expr::atom(Atom::t()).scale(&qr(1, 2))));
    assert_eq!(s.u, expected);
    assert!(s.satisfies(&pde).unwrap());
}

#[test]
fn invariant_solutions_with_opaque_coefficients() {
    let pde = catalog(&Params::time_dependent("bs2d_special_nonauto").unwrap()).unwrap();
    for (c1, c2) in [(q(0), q(0)), (q(1), qr(-1, 2)), (qr(3, 2), q(2))] {
        let s = invariant_solution(&pde, &c1, &c2).unwrap();
        assert!(s.satisfies(&pde).unwrap(), "c = ({c1}, {c2})");
    }
    let mut wrong = invariant_solution(&pde, &q(1), &q(0)).unwrap();
    wrong.u = wrong.u.clone() * x();
    assert!(!wrong.satisfies(&pde).unwrap());
}

#[test]
fn heat_reduces_to_heat() {
    let heat = catalog_symbolic("heat2d").unwrap();
    let r = reduce_once(&heat, &VectorField::translation(1)).unwrap();
    assert_eq!(r.dim(), 1);
    assert_eq!(r.space, [Atom::var("y")]);
    assert_eq!(r.a[0][0], Expr::one());
    assert!(r.b[0].is_zero() && r.source.is_zero());
    assert_eq!(r.s, q(-1));
    assert!(is_maximally_symmetric_1p1(&r).unwrap());
}

#[test]
fn twice_reduced_equation_is_an_ode() {
    let pde = bs("1", "11/10", "1/20");
    let c = qr(1, 3);
    let z = translation_with_scaling(1, &c);
    assert!(check_symmetry(&pde, &z).unwrap().verdict);
    let once = reduce_once(&pde, &z).unwrap();
    assert_eq!(once.dim(), 1);
    let twice = reduce_once(&once, &translation_with_scaling(2, &q(0))).unwrap();
    assert_eq!(twice.dim(), 0);
    let (rate, _) = solve_reduced_ode(&twice).unwrap();
    // matches the invariant solution with c = (1/3, 0)
    let inv = invariant_solution(&pde, &c, &q(0)).unwrap();
    assert!((rate - inv.integrand).is_zero());
}

#[test]
fn reduction_needs_a_symmetry() {
    let heat = catalog_symbolic("heat2d").unwrap();
    let xdx = VectorField::new("x dx", Expr::zero(), x(), Expr::zero(), Expr::zero());
    assert!(reduce_once(&heat, &xdx).is_err());
    assert!(reduce_once(&heat, &VectorField::translation(0)).is_err());
}

fn one_dim(drift: Expr, source: Expr) -> EvolutionPDE {
    let mut p = catalog_symbolic("heat1d").unwrap();
    p.b[0] = drift;
    p.source = source;
    p
}

#[test]
fn maximal_symmetry_in_one_dimension() {
    assert!(is_maximally_symmetric_1p1(&catalog_symbolic("heat1d").unwrap()).unwrap());
    // mean reversion and a harmonic potential keep the full algebra
    assert!(is_maximally_symmetric_1p1(&one_dim(-x(), Expr::zero())).unwrap());
    assert!(is_maximally_symmetric_1p1(&one_dim(Expr::zero(), &x() * &x())).unwrap());
    assert!(!is_maximally_symmetric_1p1(&one_dim(Expr::zero(), &x() * &x() * &x())).unwrap());
    assert!(is_maximally_symmetric_1p1(&one_dim(&x() * &x(), Expr::zero())).is_err());
    assert!(is_maximally_symmetric_1p1(&catalog_symbolic("heat2d").unwrap()).is_err());
}
