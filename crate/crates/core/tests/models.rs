use proptest::prelude::*;

use symfin::expr::{q, qr, Atom, Bindings, Expr, Q};
use symfin::models::{
    apply_transformation, bs2d_nonauto_coeffs, bs2d_params, bs2d_transform, catalog, info, special_lambdas,
    two_factor_nonauto_coeffs, two_factor_params, two_factor_transform, EvolutionPDE, ModelError, Params,
    PointTransformation, MODELS,
};
use symfin::reduce::to_heat;

fn with(model: &str, binds: &[(&str, &str)]) -> Params {
    let mut p = Params::symbolic(model).unwrap();
    for (n, v) in binds {
        p.bind(n, v).unwrap();
    }
    p
}

fn consts(e: &[Expr]) -> Vec<Q> {
    e.iter().map(|c| c.as_rational().unwrap_or_else(|| panic!("{c} is not rational"))).collect()
}

/// Binds each opaque parameter of `td` to the same-named constant symbol of
/// `sym`; derivative atoms of the bound functions vanish.
fn freeze_onto(td: &Params, sym: &Params, names: &[&str]) -> Bindings {
    let mut b = Bindings::new();
    for n in names {
        let from = td.get(n).unwrap();
        if let Some(a) = from.atoms().into_iter().next().filter(|_| from.len() == 1) {
            if from.as_rational().is_none() {
                b.insert(a, sym.get(n).unwrap().clone());
            }
        }
    }
    b
}

const MARKET: &[(&str, &str)] = &[
    ("sigma1", "2"),
    ("sigma2", "1/2"),
    ("rho", "3/5"),
    ("r", "1/10"),
    ("kappa", "3/2"),
    ("alpha", "1/3"),
    ("lambda", "1/4"),
];

#[test]
fn two_factor_parameter_examples() {
    let p = with(
        "twofactor",
        &[("rho", "0"), ("sigma1", "1"), ("sigma2", "1"), ("r", "0"), ("kappa", "1"), ("alpha", "1/3"), ("lambda", "1/3")],
    );
    let v = consts(&two_factor_params(&p).unwrap());
    assert_eq!(v, [q(0), q(2), q(1), q(0), q(2), q(0)]);

    let p = with("twofactor", &[("rho", "1/2"), ("sigma1", "1"), ("sigma2", "1")]);
    let [p1, p2, ..] = two_factor_params(&p).unwrap();
    assert_eq!(p1.as_rational(), Some(q(1)));
    assert_eq!((&p2 * &p2).as_rational(), Some(q(3)));
    assert!(p2.as_rational().is_none());
}

#[test]
fn correlation_must_stay_inside_the_unit_interval() {
    let mut p = Params::symbolic("twofactor").unwrap();
    assert!(matches!(p.bind("rho", "1"), Err(ModelError::Invariant(_))));
    assert!(matches!(p.bind("rho", "-3/2"), Err(ModelError::Invariant(_))));
    assert!(p.bind("rho", "-1/2").is_ok());
}

#[test]
fn nonautonomous_two_factor_reduces_to_autonomous() {
    let td = Params::time_dependent("twofactor").unwrap();
    let mut sym = Params::symbolic("twofactor").unwrap();
    sym.bind("sigma1", "1").unwrap();
    let b = freeze_onto(&td, &sym, &["sigma2", "rho", "w", "r", "kappa", "alpha", "lambda"]);
    let nonauto = two_factor_nonauto_coeffs(&td).unwrap();
    let auto = two_factor_params(&sym).unwrap();
    for (i, (n, a)) in nonauto.iter().zip(&auto).enumerate() {
        let frozen = n.subs(&b).unwrap();
        assert!((&frozen - a).is_zero(), "coefficient {i}: {frozen} vs {a}");
    }
}

#[test]
fn uncorrelated_two_factor_has_no_q1() {
    let mut td = Params::time_dependent("twofactor").unwrap();
    td.bind("rho", "0").unwrap();
    let c = two_factor_nonauto_coeffs(&td).unwrap();
    assert!(c[3].is_zero());
    assert!(c[0].is_zero());
}

#[test]
fn nonautonomous_maps_need_unit_sigma1() {
    let p = Params::symbolic("twofactor").unwrap();
    assert!(two_factor_nonauto_coeffs(&p).is_err());
    let p = Params::symbolic("bs2d").unwrap();
    assert!(bs2d_nonauto_coeffs(&p).is_err());
}

#[test]
fn bs2d_parameter_examples() {
    let base = [("sigma1", "1"), ("sigma2", "1"), ("rho", "0"), ("k", "1/20")];
    let mut p = with("bs2d", &base);
    p.bind("mu1", "0").unwrap();
    p.bind("mu2", "0").unwrap();
    assert_eq!(consts(&bs2d_params(&p).unwrap()), [q(1), q(1)]);
    p.bind("mu1", "1/20").unwrap();
    p.bind("mu2", "1/20").unwrap();
    assert_eq!(consts(&bs2d_params(&p).unwrap()), [qr(11, 10), qr(11, 10)]);

    let mut p = Params::symbolic("bs2d").unwrap();
    assert!(p.bind("sigma2", "0").is_err() || bs2d_params(&p).is_err());
}

#[test]
fn bs2d_nonauto_examples() {
    let mut td = Params::time_dependent("bs2d").unwrap();
    td.bind("sigma2", "3/2").unwrap();
    td.bind("rho", "1/3").unwrap();
    let [p1, q1, q2, q3] = bs2d_nonauto_coeffs(&td).unwrap();
    assert!(q1.is_zero() && q2.is_zero());
    assert!(!p1.atoms().is_empty());

    let mut sp = Params::time_dependent("bs2d_special").unwrap();
    sp.bind("sigma0", "3/2").unwrap();
    sp.bind("rho", "1/3").unwrap();
    let [l1, l2] = special_lambdas(&sp).unwrap();
    assert!((&q3 - &l2).is_zero(), "{q3} vs {l2}");
    assert!((&p1 - &l1).is_zero());

    td.bind("mu1", "0").unwrap();
    td.bind("mu2", "1/5").unwrap();
    let [p1, _, _, q3] = bs2d_nonauto_coeffs(&td).unwrap();
    assert_eq!(p1, Expr::one());
    assert!(q3.atoms().iter().all(|a| !a.depends_on_time()));
}

#[test]
fn nonautonomous_bs2d_reduces_to_autonomous() {
    let td = Params::time_dependent("bs2d").unwrap();
    let mut sym = Params::symbolic("bs2d").unwrap();
    sym.bind("sigma1", "1").unwrap();
    let b = freeze_onto(&td, &sym, &["sigma2", "rho", "w", "mu1", "mu2", "k"]);
    let [p1, q1, q2, q3] = bs2d_nonauto_coeffs(&td).unwrap();
    let [phi1, phi2] = bs2d_params(&sym).unwrap();
    assert!((p1.subs(&b).unwrap() - phi1).is_zero());
    assert!(q1.subs(&b).unwrap().is_zero());
    assert!(q2.subs(&b).unwrap().is_zero());
    assert!((q3.subs(&b).unwrap() - phi2).is_zero());
}

#[test]
fn catalog_examples() {
    let heat = catalog(&Params::symbolic("heat2d").unwrap()).unwrap();
    assert_eq!(heat.a, vec![vec![Expr::one(), Expr::zero()], vec![Expr::zero(), Expr::one()]]);
    assert!(heat.b.iter().all(Expr::is_zero) && heat.source.is_zero());
    assert_eq!(heat.s, q(-1));

    let p = Params::symbolic("bs2d_canonical").unwrap();
    let bs = catalog(&p).unwrap();
    let reference = p.table.parse("u_xx + u_yy - phi1*u_x - phi2*u_y - 2*k*u + 2*u_t").unwrap();
    assert!((bs.theta() - reference).is_zero());
    assert!(bs.is_autonomous());

    let p = Params::symbolic("twofactor_canonical").unwrap();
    let tf = catalog(&p).unwrap();
    let reference = p
        .table
        .parse("u_xx + u_yy - (p1*x + p2*y + p3)*u_x - (q1*x + q2*y + q3)*u_y - 2*u_t")
        .unwrap();
    assert!((tf.theta() - reference).is_zero());

    assert!(!catalog(&Params::symbolic("bs2d_special_nonauto").unwrap()).unwrap().is_autonomous());
}

#[test]
fn model_lookup() {
    assert_eq!(info("twofactor_autonomous").unwrap().id, "twofactor_canonical");
    assert!(matches!(info("nope"), Err(ModelError::UnknownModel(_))));
    for m in MODELS {
        catalog(&Params::symbolic(m.id).unwrap()).unwrap();
    }
}

#[test]
fn identity_transformation_is_neutral() {
    for id in ["heat2d", "bs2d_canonical", "twofactor_canonical", "bs2d_nonauto"] {
        let pde = catalog(&Params::symbolic(id).unwrap()).unwrap();
        let out = apply_transformation(&pde, &PointTransformation::identity(&pde.space)).unwrap();
        assert!(out.same_as(&pde), "{id}");
    }
}

#[test]
fn log_price_coordinates_give_the_canonical_two_factor_equation() {
    let mp = with("twofactor", MARKET);
    let pulled = apply_transformation(&catalog(&mp).unwrap(), &two_factor_transform(&mp).unwrap()).unwrap();
    let pq = consts(&two_factor_params(&mp).unwrap());
    let mut canon = Params::symbolic("twofactor_canonical").unwrap();
    for (n, v) in ["p1", "p2", "p3", "q1", "q2", "q3"].iter().zip(pq) {
        canon.set(n, Expr::constant(v)).unwrap();
    }
    assert!(pulled.same_as(&catalog(&canon).unwrap()), "{}", pulled.theta());
}

#[test]
fn log_price_coordinates_give_the_canonical_bs2d_equation() {
    let mp = with(
        "bs2d",
        &[("sigma1", "2"), ("sigma2", "1/2"), ("rho", "3/5"), ("mu1", "1/10"), ("mu2", "1/5"), ("k", "1/20")],
    );
    let pulled = apply_transformation(&catalog(&mp).unwrap(), &bs2d_transform(&mp).unwrap()).unwrap();
    let phi = consts(&bs2d_params(&mp).unwrap());
    let mut canon = Params::symbolic("bs2d_canonical").unwrap();
    canon.set("phi1", Expr::constant(phi[0].clone())).unwrap();
    canon.set("phi2", Expr::constant(phi[1].clone())).unwrap();
    canon.bind("k", "1/20").unwrap();
    assert!(pulled.same_as(&catalog(&canon).unwrap()), "{}", pulled.theta());
}

#[test]
fn inverse_round_trip() {
    let p = with("bs2d_canonical", &[("phi1", "1"), ("phi2", "11/10"), ("k", "1/20")]);
    let pde = catalog(&p).unwrap();
    let tr = to_heat(&pde).unwrap();
    assert!(tr.inverse_is_exact().unwrap());
    let inv = tr.inverse().unwrap();
    assert!(inv.inverse_is_exact().unwrap());
    let back = apply_transformation(&apply_transformation(&pde, &tr).unwrap(), &inv).unwrap();
    let k = pde.ratio_to(&back).expect("proportional");
    assert!(!num_traits::Zero::is_zero(&k));
}

#[test]
fn singular_jacobian_is_rejected() {
    let pde = catalog(&Params::symbolic("heat2d").unwrap()).unwrap();
    let x = Expr::atom(Atom::var("x"));
    let tr = PointTransformation {
        name: "collapse".into(),
        time_scale: q(1),
        old: vec![(Atom::var("x"), x.clone()), (Atom::var("y"), x.scale(&q(2)))],
        new_space: vec![Atom::var("x"), Atom::var("y")],
        multiplier: Expr::one(),
        inverse: None,
    };
    assert!(matches!(apply_transformation(&pde, &tr), Err(ModelError::NotInvertible(_))));
}

/// Galilean boost x ↦ x + a·t, y ↦ y + b·t with time rescale c and an exponential multiplier.
fn boost(a: Q, b: Q, c: Q, m: [Q; 3]) -> PointTransformation {
    let (x, y, t) = (Expr::atom(Atom::var("x")), Expr::atom(Atom::var("y")), Expr::atom(Atom::t()));
    PointTransformation {
        name: "boost".into(),
        time_scale: c,
        old: vec![(Atom::var("x"), &x + t.scale(&a)), (Atom::var("y"), &y + t.scale(&b))],
        new_space: vec![Atom::var("x"), Atom::var("y")],
        multiplier: Expr::exp(&(x.scale(&m[0]) + y.scale(&m[1]) + t.scale(&m[2]))),
        inverse: Some(vec![&x - t.scale(&a), &y - t.scale(&b)]),
    }
}

fn small_q() -> impl Strategy<Value = Q> {
    (-6i64..=6, 1i64..=4).prop_map(|(n, d)| qr(n, d))
}

fn nonzero_q() -> impl Strategy<Value = Q> {
    (prop_oneof![-4i64..=-1, 1i64..=4], 1i64..=3).prop_map(|(n, d)| qr(n, d))
}

fn arb_boost() -> impl Strategy<Value = PointTransformation> {
    (small_q(), small_q(), nonzero_q(), small_q(), small_q(), small_q()).prop_map(|(a, b, c, m0, m1, m2)| boost(a, b, c, [m0, m1, m2]))
}

fn test_pdes() -> Vec<EvolutionPDE> {
    vec![
        catalog(&Params::symbolic("heat2d").unwrap()).unwrap(),
        catalog(&with("bs2d_canonical", &[("phi1", "1"), ("phi2", "11/10"), ("k", "1/20")])).unwrap(),
        catalog(&with("twofactor_canonical", &[("p1", "0"), ("p2", "2"), ("p3", "1"), ("q1", "0"), ("q2", "2"), ("q3", "0")]))
            .unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pullback_is_functorial(t1 in arb_boost(), t2 in arb_boost()) {
        for pde in test_pdes() {
            let composed = apply_transformation(&pde, &t1.after(&t2).unwrap()).unwrap();
            let stepwise = apply_transformation(&apply_transformation(&pde, &t2).unwrap(), &t1).unwrap();
            prop_assert!(stepwise.same_as(&composed), "{} vs {}", composed.theta(), stepwise.theta());
        }
    }

    #[test]
    fn transformation_then_inverse_is_proportional(t1 in arb_boost()) {
        prop_assert!(t1.inverse_is_exact().unwrap());
        for pde in test_pdes() {
            let there = apply_transformation(&pde, &t1).unwrap();
            let back = apply_transformation(&there, &t1.inverse().unwrap()).unwrap();
            let k = pde.ratio_to(&back);
            prop_assert!(k.is_some_and(|k| !num_traits::Zero::is_zero(&k)));
        }
    }
}
