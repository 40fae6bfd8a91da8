use proptest::prelude::*;

use symfin::algebra::{classify, commutator, signature, structure_constants, AlgebraError, StructureConstants};
use symfin::expr::{qr, Atom, Expr, SymbolTable, Q};
use symfin::linalg::{self, Matrix};
use symfin::models::Params;
use symfin::symmetry::{catalog_generators, VectorField};

fn var(n: &str) -> Expr {
    Expr::atom(Atom::var(n))
}

fn parse(s: &str) -> Expr {
    let mut t = SymbolTable::new();
    t.var("phi1");
    t.parse(s).unwrap()
}

fn field(name: &str, xt: &str, xx: &str, xy: &str, eta: &str) -> VectorField {
    VectorField::new(name, parse(xt), parse(xx), parse(xy), parse(eta))
}

fn sl2() -> Vec<VectorField> {
    vec![
        field("e", "0", "1", "0", "0"),
        field("h", "0", "x", "0", "0"),
        field("f", "0", "x^2", "0", "0"),
    ]
}

fn heisenberg() -> Vec<VectorField> {
    vec![
        field("dx", "0", "1", "0", "0"),
        field("dy", "0", "0", "1", "0"),
        field("xu", "0", "0", "0", "x*u"),
        field("yu", "0", "0", "0", "y*u"),
        field("u", "0", "0", "0", "u"),
    ]
}

fn bs_fields() -> Vec<VectorField> {
    let mut p = Params::symbolic("bs2d_canonical").unwrap();
    p.bind("phi1", "1").unwrap();
    p.bind("phi2", "11/10").unwrap();
    p.bind("k", "1/20").unwrap();
    catalog_generators(&mut p).unwrap().into_iter().map(|g| g.field).collect()
}

#[test]
fn bracket_with_itself_vanishes() {
    for x in bs_fields() {
        assert!(commutator(&x, &x).unwrap().is_zero(), "{}", x.name);
    }
}

#[test]
fn galilean_bracket() {
    let dx = VectorField::translation(1);
    let boost = field("G", "0", "t", "0", "1/2*(x + phi1*t)*u");
    let b = commutator(&dx, &boost).unwrap();
    assert_eq!(b, field("", "0", "0", "0", "1/2*u").named(&b.name));
}

#[test]
fn time_translation_against_scaling() {
    let dt = VectorField::translation(0);
    let x7 = field("X7", "t^2", "t*x", "t*y", "-t*u - 1/4*(x^2 + y^2)*u");
    let b = commutator(&dt, &x7).unwrap();
    assert_eq!(b.xi[0], var("t").scale(&qr(2, 1)));
    assert_eq!(b.xi[1], var("x"));
    assert_eq!(b.xi[2], var("y"));
}

#[test]
fn abelian_labels() {
    let dx = VectorField::translation(1);
    let dy = VectorField::translation(2);
    assert_eq!(classify(&[dx.clone()]).unwrap(), "A₁");
    let s = signature(&structure_constants(&[dx, dy]).unwrap());
    assert!(s.is_abelian && s.is_nilpotent && s.is_solvable);
    assert_eq!(s.dim, 2);
    assert_eq!(s.label, "A₁⊕A₁ (abelian)");
}

#[test]
fn sl2_is_recognized() {
    let s = signature(&structure_constants(&sl2()).unwrap());
    assert!(s.is_sl2 && !s.is_solvable);
    assert_eq!(s.label, "sl(2,R)");
    assert_eq!(s.derived_series.last(), Some(&3));
    assert_eq!(s.radical_dim, 0);
}

#[test]
fn heisenberg_is_recognized() {
    let s = signature(&structure_constants(&heisenberg()).unwrap());
    assert!(s.is_heisenberg_w && s.is_nilpotent);
    assert_eq!(s.center_dim, 1);
    assert_eq!(s.label, "W₅");
    assert_eq!(s.lower_central_series[..3], [5, 1, 0]);
}

#[test]
fn rotation_is_detected() {
    let mut fs = heisenberg();
    fs.push(field("rot", "0", "y", "-x", "0"));
    let s = signature(&structure_constants(&fs).unwrap());
    assert!(s.has_so2_rotation);
    assert_eq!(s.label, "{so(2)⊕ₛW₅}");
    assert_eq!(s.nilradical_dim, 5);
}

#[test]
fn catalog_structure_satisfies_jacobi() {
    let sc = structure_constants(&bs_fields()).unwrap();
    assert_eq!(sc.dim(), 9);
    assert!(sc.jacobi_holds());
}

#[test]
fn leaving_the_span_is_an_error() {
    let fs = [VectorField::translation(1), field("x2", "0", "x^2", "0", "0")];
    match structure_constants(&fs) {
        Err(AlgebraError::NotClosed { a, b, .. }) => assert_eq!((a.as_str(), b.as_str()), ("dx", "x2")),
        other => panic!("closed: {other:?}"),
    }
    let fs = [VectorField::translation(1), VectorField::translation(1).scale(&qr(2, 1)).named("twice")];
    assert!(matches!(structure_constants(&fs), Err(AlgebraError::Dependent(_))));
}

fn rational() -> impl Strategy<Value = Q> {
    (-6i64..=6, 1i64..=4).prop_map(|(n, d)| qr(n, d))
}

fn coords(n: usize) -> impl Strategy<Value = Vec<Q>> {
    proptest::collection::vec(rational(), n)
}

/// Unit lower triangular times unit upper triangular: integer with determinant one.
fn unimodular(n: usize) -> impl Strategy<Value = Matrix> {
    (proptest::collection::vec(-1i64..=1, n * n), proptest::collection::vec(-1i64..=1, n * n)).prop_map(move |(l, u)| {
        let tri = |v: &[i64], lower: bool| -> Matrix {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| match (i == j, (j < i) == lower) {
                            (true, _) => Q::from_integer(1.into()),
                            (false, true) => Q::from_integer(v[i * n + j].into()),
                            _ => Q::from_integer(0.into()),
                        })
                        .collect()
                })
                .collect()
        };
        linalg::mul(&tri(&l, true), &tri(&u, false))
    })
}

fn bs_constants() -> StructureConstants {
    structure_constants(&bs_fields()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bracket_is_antisymmetric(x in coords(9), y in coords(9)) {
        let sc = bs_constants();
        let xy = sc.bracket(&x, &y);
        let yx = sc.bracket(&y, &x);
        for (a, b) in xy.iter().zip(&yx) {
            prop_assert_eq!(a, &-b);
        }
    }

    #[test]
    fn bracket_is_bilinear(x in coords(9), y in coords(9), z in coords(9), a in rational(), b in rational()) {
        let sc = bs_constants();
        let comb: Vec<Q> = x.iter().zip(&y).map(|(p, q)| &a * p + &b * q).collect();
        let lhs = sc.bracket(&comb, &z);
        let (xz, yz) = (sc.bracket(&x, &z), sc.bracket(&y, &z));
        for k in 0..9 {
            prop_assert_eq!(&lhs[k], &(&a * &xz[k] + &b * &yz[k]));
        }
    }

    #[test]
    fn adjoint_is_the_bracket(x in coords(9), y in coords(9)) {
        let sc = bs_constants();
        prop_assert_eq!(linalg::mul_vec(&sc.ad(&x), &y), sc.bracket(&x, &y));
    }

    #[test]
    fn field_brackets_match_constants(i in 0usize..9, j in 0usize..9) {
        let fs = bs_fields();
        let sc = bs_constants();
        let direct = commutator(&fs[i], &fs[j]).unwrap();
        let parts: Vec<(Q, &VectorField)> = sc.c[i][j].iter().cloned().zip(fs.iter()).collect();
        let rebuilt = VectorField::combination(&parts);
        prop_assert!(direct.add(&rebuilt.scale(&qr(-1, 1))).is_zero());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn label_survives_change_of_basis(p in unimodular(9)) {
        let sc = bs_constants();
        let moved = sc.change_basis(&p).unwrap();
        prop_assert!(moved.jacobi_holds());
        let (a, b) = (signature(&sc), signature(&moved));
        prop_assert_eq!(a.label, b.label);
        prop_assert_eq!(a.derived_series, b.derived_series);
        prop_assert_eq!(a.center_dim, b.center_dim);
    }
}
