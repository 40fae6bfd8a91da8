use std::collections::HashMap;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use symfin::expr::{eval_numeric, q, qr, Atom, Bindings, Expr, SymbolTable, Q};
use symfin::models::{catalog, EvolutionPDE, Params};
use symfin::symmetry::{
    catalog_generators, check_coefficient_condition, check_symmetry, determining_residuals_bs2d,
    determining_residuals_twofactor, generic_vector_bs2d, generic_vector_twofactor, prolong2, Conformal,
    GenericCoefficients, VectorField, PROLONGED_JETS,
};

fn var(n: &str) -> Expr {
    Expr::atom(Atom::var(n))
}

fn jet(j: [u8; 3]) -> Expr {
    Expr::atom(Atom::Jet(j))
}

fn model(id: &str, binds: &[(&str, &str)]) -> (Params, EvolutionPDE) {
    let mut p = Params::symbolic(id).unwrap();
    for (n, v) in binds {
        p.bind(n, v).unwrap();
    }
    let pde = catalog(&p).unwrap();
    (p, pde)
}

fn heat2d() -> EvolutionPDE {
    model("heat2d", &[]).1
}

#[test]
fn prolongation_of_translation_vanishes() {
    for k in 0..3 {
        let p = prolong2(&VectorField::translation(k)).unwrap();
        for j in PROLONGED_JETS {
            assert!(p.get(j).is_zero(), "d{k}: {j:?}");
        }
    }
}

#[test]
fn prolongation_of_u_scaling_copies_the_jet() {
    let p = prolong2(&VectorField::scaling()).unwrap();
    for j in PROLONGED_JETS {
        assert_eq!(p.get(j), &jet(j));
    }
}

#[test]
fn prolongation_of_x_scaling() {
    // x∂x: ηˣ = −u_x, ηˣˣ = −2u_xx, ηˣʸ = −u_xy, others zero
    let x = VectorField::new("x dx", Expr::zero(), var("x"), Expr::zero(), Expr::zero());
    let p = prolong2(&x).unwrap();
    assert_eq!(p.get([0, 1, 0]), &-jet([0, 1, 0]));
    assert_eq!(p.get([0, 2, 0]), &jet([0, 2, 0]).scale(&q(-2)));
    assert_eq!(p.get([0, 1, 1]), &-jet([0, 1, 1]));
    assert!(p.get([1, 0, 0]).is_zero() && p.get([0, 0, 2]).is_zero());
}

#[test]
fn check_symmetry_examples() {
    let (_, bs) = model("bs2d_canonical", &[]);
    assert!(check_symmetry(&bs, &VectorField::translation(1)).unwrap().verdict);
    assert!(check_symmetry(&bs, &VectorField::scaling()).unwrap().verdict);

    let xdx = VectorField::new("x dx", Expr::zero(), var("x"), Expr::zero(), Expr::zero());
    let r = check_symmetry(&heat2d(), &xdx).unwrap();
    assert!(!r.verdict);
    assert!(!r.residual.unwrap().is_zero());

    // the scaling symmetry needs its 2t∂t companion
    let x6 = VectorField::new("X6", var("t").scale(&q(2)), var("x"), var("y"), Expr::zero());
    assert!(check_symmetry(&heat2d(), &x6).unwrap().verdict);
}

#[test]
fn symmetry_multiplier_satisfies_on_solution_identity() {
    let (mut p, pde) = model("bs2d_canonical", &[("phi1", "1"), ("phi2", "11/10"), ("k", "1/20")]);
    for g in catalog_generators(&mut p).unwrap() {
        let r = check_symmetry(&pde, &g.field).unwrap();
        assert!(r.verdict, "{}", g.field.name);
        let lambda = r.lambda.unwrap();
        assert!(lambda.atoms().iter().all(|a| !matches!(a, Atom::Jet(_))));
    }
}

#[test]
fn coefficient_condition_examples() {
    let heat = heat2d();
    assert_eq!(check_coefficient_condition(&heat, &VectorField::translation(1)).unwrap(), Conformal::Holds(Expr::zero()));

    let x6 = VectorField::new("X6", var("t").scale(&q(2)), var("x"), var("y"), Expr::zero());
    assert_eq!(check_coefficient_condition(&heat, &x6).unwrap(), Conformal::Holds(Expr::one()));

    let shear = VectorField::new("y dx", Expr::zero(), var("y"), Expr::zero(), Expr::zero());
    match check_coefficient_condition(&heat, &shear).unwrap() {
        Conformal::Fails { component, residual } => {
            assert!(component == (0, 1) || component == (1, 0));
            assert!(!residual.is_zero());
        }
        other => panic!("shear passed: {other:?}"),
    }
    let rotation = VectorField::new("rot", Expr::zero(), var("y"), -var("x"), Expr::zero());
    assert_eq!(check_coefficient_condition(&heat, &rotation).unwrap(), Conformal::Holds(Expr::zero()));
}

#[test]
fn catalogs_verify() {
    let cases: &[(&str, &[(&str, &str)], usize)] = &[
        ("heat2d", &[], 9),
        ("bs2d_canonical", &[], 9),
        ("twofactor_q0", &[], 6),
        ("twofactor_canonical", &[("p1", "0"), ("p2", "2"), ("p3", "1/3"), ("q1", "1"), ("q2", "1"), ("q3", "0")], 6),
    ];
    for (id, binds, n) in cases {
        let (mut p, pde) = model(id, binds);
        let gens = catalog_generators(&mut p).unwrap();
        assert_eq!(gens.len(), *n, "{id}");
        for g in gens {
            assert!(check_symmetry(&pde, &g.field).unwrap().verdict, "{id}: {}", g.field.name);
        }
    }
    let mut p = Params::time_dependent("bs2d_special_nonauto").unwrap();
    let pde = catalog(&p).unwrap();
    let gens = catalog_generators(&mut p).unwrap();
    assert_eq!(gens.len(), 9);
    for g in gens {
        assert!(check_symmetry(&pde, &g.field).unwrap().verdict, "{}", g.field.name);
    }
}

#[test]
fn unsupported_catalogs_are_errors() {
    let mut p = Params::symbolic("bs2d").unwrap();
    assert!(catalog_generators(&mut p).is_err());
    // repeated eigenvalues of the drift matrix
    let mut p = model(
        "twofactor_canonical",
        &[("p1", "1"), ("p2", "0"), ("p3", "0"), ("q1", "0"), ("q2", "1"), ("q3", "0")],
    )
    .0;
    assert!(catalog_generators(&mut p).is_err());
}

struct Generic {
    table: SymbolTable,
    gc: GenericCoefficients,
}

impl Generic {
    fn new() -> Generic {
        let mut table = SymbolTable::new();
        let gc = GenericCoefficients::symbolic(&mut table);
        for n in ["P1", "P2", "P3", "Q1", "Q2", "Q3", "k"] {
            table.fun(n);
        }
        Generic { table, gc }
    }

    fn funs(&self, names: &[&str]) -> Vec<Expr> {
        names.iter().map(|n| self.table.parse(n).unwrap()).collect()
    }

    /// Binds the named generic functions (and B2) to the given texts.
    fn bind(&self, pairs: &[(&str, &str)]) -> Bindings {
        let mut b = Bindings::new();
        for (n, v) in pairs {
            let atom = self.table.lookup(n).unwrap().clone();
            b.insert(atom, self.table.parse(v).unwrap());
        }
        b
    }
}

fn consts(v: &[&str]) -> Vec<Expr> {
    let t = SymbolTable::new();
    v.iter().map(|s| t.parse(s).unwrap()).collect()
}

#[test]
fn generic_two_factor_examples() {
    let g = Generic::new();
    // P₂ = Q₁ removes the rotation offset of a
    let c: [Expr; 6] = consts(&["1/2", "1", "0", "1", "3/2", "1/3"]).try_into().unwrap();
    let v = generic_vector_twofactor(&g.gc, &c).unwrap();
    let zero = [("b1", "0"), ("g", "0"), ("h", "0"), ("B2", "0")];

    let mut b = g.bind(&zero);
    b.extend(g.bind(&[("a", "1")]));
    let x = v.subs(&b).unwrap();
    assert_eq!(x.xi[0], Expr::one());
    assert!(x.xi[1].is_zero() && x.xi[2].is_zero() && x.eta.is_zero(), "{x}");

    let mut b = g.bind(&zero);
    b.extend(g.bind(&[("a", "0"), ("b1", "1")]));
    let x = v.subs(&b).unwrap();
    assert_eq!(x.xi[1], Expr::one());
    let expected = (var("x").scale(&qr(1, 2)) + var("y")) .scale(&qr(1, 2)) * jet([0, 0, 0]);
    // ½(x P₁ + y Q₁) u with P₁ = 1/2, Q₁ = 1
    assert!((x.eta - expected).is_zero());

    let mut b = g.bind(&zero);
    b.extend(g.bind(&[("a", "0"), ("h", "1")]));
    let x = v.subs(&b).unwrap();
    assert_eq!(x, VectorField::scaling().named("generic"));

    let tf = generic_vector_twofactor(&g.gc, &c).unwrap();
    let mut b = g.bind(&zero);
    b.extend(g.bind(&[("a", "0")]));
    assert!(tf.subs(&b).unwrap().is_zero());
}

#[test]
fn generic_bs2d_examples() {
    let g = Generic::new();
    let c: [Expr; 4] = consts(&["1", "0", "1/2", "3/4"]).try_into().unwrap();
    let v = generic_vector_bs2d(&g.gc, &c).unwrap();
    let zero = [("a", "0"), ("b1", "0"), ("f", "0"), ("g", "0"), ("B2", "0")];

    let mut b = g.bind(&zero);
    b.extend(g.bind(&[("B2", "1")]));
    let x = v.subs(&b).unwrap();
    assert_eq!(x.xi[1], var("y"));
    assert_eq!(x.xi[2], -var("x"));
    assert!(x.xi[0].is_zero());

    let mut b = g.bind(&zero);
    b.extend(g.bind(&[("b1", "1")]));
    let x = v.subs(&b).unwrap();
    assert_eq!(x.xi[1], Expr::one());
    assert!(x.xi[2].is_zero());

    assert!(v.subs(&g.bind(&zero)).unwrap().is_zero());
}

#[test]
fn trivial_data_solve_the_two_factor_system() {
    let g = Generic::new();
    let c: [Expr; 6] = consts(&["1/2", "1", "2/3", "1", "3/2", "1/3"]).try_into().unwrap();
    let mut b = g.bind(&[("b1", "0"), ("g", "0"), ("h", "0"), ("B2", "0"), ("a", "7/5")]);
    for r in determining_residuals_twofactor(&g.gc, &c).unwrap() {
        assert!(r.subs(&b).unwrap().is_zero(), "{r}");
    }
    b.extend(g.bind(&[("a", "0"), ("h", "5")]));
    for r in determining_residuals_twofactor(&g.gc, &c).unwrap() {
        assert!(r.subs(&b).unwrap().is_zero());
    }
}

#[test]
fn trivial_data_solve_the_bs2d_system() {
    let g = Generic::new();
    let c: [Expr; 4] = consts(&["1", "0", "0", "3/4"]).try_into().unwrap();
    let k = consts(&["1/20"]).remove(0);
    let b = g.bind(&[("b1", "0"), ("f", "0"), ("g", "0"), ("B2", "0"), ("a", "2")]);
    for r in determining_residuals_bs2d(&g.gc, &c, &k).unwrap() {
        assert!(r.subs(&b).unwrap().is_zero(), "{r}");
    }
}

/// Values of every function and derivative entering the appendix systems.
struct Point {
    a: [f64; 3],
    b1: [f64; 3],
    f: [f64; 3],
    g: [f64; 3],
    h: [f64; 3],
    b2: f64,
    p: [[f64; 3]; 3],
    q: [[f64; 3]; 3],
    k: [f64; 2],
}

impl Point {
    fn random(rng: &mut StdRng) -> Point {
        let mut r3 = || std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        let a = r3();
        let b1 = r3();
        let f = r3();
        let g = r3();
        let h = r3();
        let p = [r3(), r3(), r3()];
        let q = [r3(), r3(), r3()];
        let k = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        Point { a, b1, f, g, h, b2: rng.random_range(-2.0..2.0), p, q, k }
    }

    fn env(&self) -> HashMap<String, f64> {
        let mut env = HashMap::new();
        let mut put = |n: &str, v: &[f64]| {
            for (d, x) in v.iter().enumerate() {
                env.insert(format!("{n}{}", "'".repeat(d)), *x);
            }
        };
        put("a", &self.a);
        put("b1", &self.b1);
        put("f", &self.f);
        put("g", &self.g);
        put("h", &self.h);
        for i in 0..3 {
            put(&format!("P{}", i + 1), &self.p[i]);
            put(&format!("Q{}", i + 1), &self.q[i]);
        }
        put("k", &self.k);
        env.insert("B2".into(), self.b2);
        env
    }

    /// The two-factor system, transcribed term by term.
    fn two_factor(&self) -> [f64; 4] {
        let [a, a1, a2] = self.a;
        let [b1, b1p, b1pp] = self.b1;
        let [g, gp, gpp] = self.g;
        let hp = self.h[1];
        let bb = self.b2;
        let [[p1, p1p, p1pp], [p2, p2p, _], [p3, p3p, p3pp]] = self.p;
        let [[q1, q1p, _], [q2, q2p, q2pp], [q3, q3p, q3pp]] = self.q;
        let e1 = -0.5 * b1 * p1 * p3 - 0.5 * g * p2 * p3 - 0.5 * b1 * q1 * q3 - 0.5 * g * q2 * q3 + 0.5 * p1 * a1
            - 0.25 * p3 * p3 * a1
            + 0.5 * q2 * a1
            - 0.25 * q3 * q3 * a1
            + p3 * b1p
            + q3 * gp
            - 2.0 * hp
            + 0.5 * a * p1p
            - 0.5 * a * p3 * p3p
            + 0.5 * a * q2p
            - 0.5 * a * q3 * q3p
            - a2;
        let e2 = -0.5 * b1 * p1 * p1 - 0.5 * g * p1 * p2 + 0.5 * bb * p2 * p3 + a * p2 * p2 * p3 / 8.0
            - a * p2 * p3 * q1 / 8.0
            - 0.5 * b1 * q1 * q1
            - 0.5 * g * q1 * q2
            + 0.5 * bb * q2 * q3
            + a * p2 * q2 * q3 / 8.0
            - a * q1 * q2 * q3 / 8.0
            - 0.75 * p1 * p3 * a1
            - 0.75 * q1 * q3 * a1
            - p2 * gp
            + q1 * gp
            - b1 * p1p
            - 0.5 * a * p3 * p1p
            - g * p2p
            - 0.5 * a * p1 * p3p
            - 1.5 * a1 * p3p
            - 0.5 * a * q3 * q1p
            + bb * q3p
            + 0.25 * a * p2 * q3p
            - 0.75 * a * q1 * q3p
            + 2.0 * b1pp
            - a * p3pp;
        let e3 = -0.5 * b1 * p1 * p2 - 0.5 * g * p2 * p2 - 0.5 * bb * p1 * p3 - a * p1 * p2 * p3 / 8.0
            + a * p1 * p3 * q1 / 8.0
            - 0.5 * b1 * q1 * q2
            - 0.5 * g * q2 * q2
            - 0.5 * bb * q1 * q3
            - a * p2 * q1 * q3 / 8.0
            + a * q1 * q1 * q3 / 8.0
            - 0.75 * p2 * p3 * a1
            - 0.75 * q2 * q3 * a1
            + p2 * b1p
            - q1 * b1p
            - 0.5 * a * p3 * p2p
            - bb * p3p
            - 0.75 * a * p2 * p3p
            + 0.25 * a * q1 * p3p
            - b1 * q1p
            - g * q2p
            - 0.5 * a * q3 * q2p
            - 0.5 * a * q2 * q3p
            - 1.5 * a1 * q3p
            + 2.0 * gpp
            - a * q3pp;
        let e4 = bb * p1 * p2 + 0.25 * a * p1 * p2 * p2 - 0.25 * a * p1 * p2 * q1 + bb * q1 * q2
            + 0.25 * a * p2 * q1 * q2
            - 0.25 * a * q1 * q1 * q2
            - 0.5 * p1 * p1 * a1
            + 0.5 * p2 * p2 * a1
            - 0.5 * q1 * q1 * a1
            + 0.5 * q2 * q2 * a1
            - 0.5 * a * p1 * p1p
            - a1 * p1p
            + bb * p2p
            + 0.75 * a * p2 * p2p
            - 0.25 * a * q1 * p2p
            + bb * q1p
            + 0.25 * a * p2 * q1p
            - 0.75 * a * q1 * q1p
            + 0.5 * a * q2 * q2p
            + a1 * q2p
            - 0.5 * a * p1pp
            + 0.5 * a * q2pp;
        [e1, e2, e3, e4]
    }

    /// The Black-Scholes system with P = (P₁, Q₁, Q₂, Q₃), transcribed term by term.
    fn bs2d(&self) -> [f64; 5] {
        let [a, a1, a2] = self.a;
        let [b1, b1p, b1pp] = self.b1;
        let [f, fp, fpp] = self.f;
        let gp = self.g[1];
        let bb = self.b2;
        let [k, kp] = self.k;
        let [p1, p1p, p1pp] = self.p[0];
        let [[q1, q1p, q1pp], [q2, q2p, q2pp], [q3, q3p, q3pp]] = self.q;
        let e1 = -0.5 * b1 * q1 * q3 - 0.5 * f * q2 * q3 - 2.0 * k * a1 - 0.25 * p1 * p1 * a1 + 0.5 * q2 * a1
            - 0.25 * q3 * q3 * a1
            - p1 * b1p
            - q3 * fp
            + 2.0 * gp
            - 2.0 * a * kp
            - 0.5 * a * p1 * p1p
            + 0.5 * a * q2p
            - 0.5 * a * q3 * q3p
            + a2;
        let e2 = -0.5 * b1 * q1 * q1 - 0.5 * f * q1 * q2 + 0.5 * bb * q2 * q3 + a * q1 * q2 * q3 / 8.0
            - 0.75 * q1 * q3 * a1
            - q1 * fp
            + 1.5 * a1 * p1p
            - 0.5 * a * q3 * q1p
            - bb * q3p
            - 0.75 * a * q1 * q3p
            + 2.0 * b1pp
            + a * p1pp;
        let e3 = -0.5 * b1 * q1 * q2 - 0.5 * f * q2 * q2 - 0.5 * bb * q1 * q3 - a * q1 * q1 * q3 / 8.0
            - 0.75 * q2 * q3 * a1
            + q1 * b1p
            + bb * p1p
            + 0.25 * a * q1 * p1p
            + b1 * q1p
            + f * q2p
            - 0.5 * a * q3 * q2p
            - 0.5 * a * q2 * q3p
            + 1.5 * a1 * q3p
            + 2.0 * fpp
            + a * q3pp;
        let e4 = -0.5 * bb * q1 * q1 - a * q1 * q1 * q1 / 8.0 + 0.5 * bb * q2 * q2 + a * q1 * q2 * q2 / 8.0
            - q1 * q2 * a1
            - 0.5 * a * q2 * q1p
            + a1 * q1p
            - bb * q2p
            - 0.75 * a * q1 * q2p
            + 0.5 * a * q1pp;
        let e5 = -bb * q1 * q2 - 0.25 * a * q1 * q1 * q2 + 0.5 * q1 * q1 * a1 - 0.5 * q2 * q2 * a1 + bb * q1p
            + 0.75 * a * q1 * q1p
            - 0.5 * a * q2 * q2p
            + a1 * q2p
            + 0.5 * a * q2pp;
        [e1, e2, e3, e4, e5]
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn residuals_match_hand_coded_evaluator() {
    let g = Generic::new();
    let tf: [Expr; 6] = g.funs(&["P1", "P2", "P3", "Q1", "Q2", "Q3"]).try_into().unwrap();
    let bs: [Expr; 4] = g.funs(&["P1", "Q1", "Q2", "Q3"]).try_into().unwrap();
    let k = g.funs(&["k"]).remove(0);
    let tf_res = determining_residuals_twofactor(&g.gc, &tf).unwrap();
    let bs_res = determining_residuals_bs2d(&g.gc, &bs, &k).unwrap();
    let mut rng = StdRng::seed_from_u64(31);
    for _ in 0..50 {
        let pt = Point::random(&mut rng);
        let env = pt.env();
        for (i, (r, want)) in tf_res.iter().zip(pt.two_factor()).enumerate() {
            let got = eval_numeric(r, &env).unwrap();
            assert!(close(got, want), "two-factor equation {}: {got} vs {want}", i + 1);
        }
        for (i, (r, want)) in bs_res.iter().zip(pt.bs2d()).enumerate() {
            let got = eval_numeric(r, &env).unwrap();
            assert!(close(got, want), "Black-Scholes equation {}: {got} vs {want}", i + 1);
        }
    }
}

fn rational() -> impl Strategy<Value = Q> {
    (-9i64..=9, 1i64..=5).prop_map(|(n, d)| qr(n, d))
}

fn catalog_fields() -> Vec<VectorField> {
    let (mut p, _) = model("bs2d_canonical", &[("phi1", "1"), ("phi2", "11/10"), ("k", "1/20")]);
    let mut v: Vec<VectorField> = catalog_generators(&mut p).unwrap().into_iter().map(|g| g.field).collect();
    let (mut p, _) = model("twofactor_q0", &[("p1", "1/2"), ("p2", "1/3"), ("p3", "1/5")]);
    v.extend(catalog_generators(&mut p).unwrap().into_iter().map(|g| g.field));
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn prolongation_is_linear(i in 0usize..15, j in 0usize..15, a in rational(), b in rational()) {
        let fs = catalog_fields();
        let (x, y) = (&fs[i % fs.len()], &fs[j % fs.len()]);
        let lhs = prolong2(&x.scale(&a).add(&y.scale(&b))).unwrap();
        let (px, py) = (prolong2(x).unwrap(), prolong2(y).unwrap());
        for jj in PROLONGED_JETS {
            let rhs = px.get(jj).scale(&a) + py.get(jj).scale(&b);
            prop_assert!((lhs.get(jj) - &rhs).is_zero());
        }
    }

    #[test]
    fn translations_prolong_to_zero(a in rational(), b in rational(), c in rational()) {
        let x = VectorField::combination(&[
            (a, &VectorField::translation(0)),
            (b, &VectorField::translation(1)),
            (c, &VectorField::translation(2)),
        ]);
        let p = prolong2(&x).unwrap();
        for j in PROLONGED_JETS {
            prop_assert!(p.get(j).is_zero());
        }
    }

    #[test]
    fn combinations_of_symmetries_are_symmetries(ws in proptest::collection::vec(rational(), 9)) {
        let (mut p, pde) = model("bs2d_canonical", &[("phi1", "1"), ("phi2", "11/10"), ("k", "1/20")]);
        let fs: Vec<VectorField> = catalog_generators(&mut p).unwrap().into_iter().map(|g| g.field).collect();
        let parts: Vec<(Q, &VectorField)> = ws.into_iter().zip(fs.iter()).collect();
        let x = VectorField::combination(&parts);
        prop_assert!(check_symmetry(&pde, &x).unwrap().verdict);
        let broken = x.add(&VectorField::new("x dx", Expr::zero(), var("x"), Expr::zero(), Expr::zero()));
        prop_assert!(!check_symmetry(&pde, &broken).unwrap().verdict);
    }
}
