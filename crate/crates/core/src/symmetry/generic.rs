//! Generic symmetry vectors of the nonautonomous canonical equations and
//! their determining systems, both hand-entered and regenerated.

use std::collections::BTreeMap;

use crate::expr::{Atom, Bindings, Expr, SymbolTable};
use crate::jet;
use crate::models::{EvolutionPDE, ModelError};

use super::{on_solution_residual, VectorField};

/// Free functions a, b₁, f, g, h of t and the constant B₂.
#[derive(Clone, Debug)]
pub struct GenericCoefficients {
    pub a: Expr,
    pub b1: Expr,
    pub f: Expr,
    pub g: Expr,
    pub h: Expr,
    pub b2: Expr,
}

impl GenericCoefficients {
    /// Declares a, b1, f, g, h as functions of t and B2 as a constant in `table`.
    pub fn symbolic(table: &mut SymbolTable) -> GenericCoefficients {
        GenericCoefficients {
            a: table.fun("a"),
            b1: table.fun("b1"),
            f: table.fun("f"),
            g: table.fun("g"),
            h: table.fun("h"),
            b2: table.var("B2"),
        }
    }
}

const TF_OMEGA: &str = "(B2+a*P2/4-a*Q1/4)";
const BS_OMEGA: &str = "(B2+a*Q1/4)";

const TF_ETA: &str = "1/4*(4*h+2*x*b1*P1+2*x*g*P2+x^2*(-P2-Q1)*om) + 1/4*(2*x*om*(y*P1-y*Q2-Q3)+x^2*P1*a'+2*x*y*P2*a') \
    + 1/4*(x*P3*a'-4*x*b1'+x^2*a*P1'+2*x*y*a*P2'+2*x*a*P3') \
    + 1/4*(-4*x*y*(1/4*P2*a'-1/4*Q1*a'+1/4*a*P2'-1/4*a*Q1')-x^2*a'') \
    + 1/4*(2*y*b1*Q1+2*y*P3*om+y^2*(P2+Q1)*om) \
    + 1/4*(2*y*g*Q2+y^2*Q2*a'+y*Q3*a'-4*y*g'+y^2*a*Q2'+2*y*a*Q3'-y^2*a'')";

const BS_ETA: &str = "1/4*(4*g-x^2*Q1*om-2*x*om*(y*Q2+Q3)) + 1/4*(x*P1*a'+4*x*b1'+2*x*a*P1'+x^2*a''+4*x*y*(1/4*Q1*a'+1/4*a*Q1')) \
    + 1/4*(2*y*b1*Q1+2*y*P1*om+y^2*Q1*om) \
    + 1/4*(2*y*f*Q2+y^2*Q2*a'+y*Q3*a'+4*y*f'+y^2*a*Q2'+2*y*a*Q3'+y^2*a'')";

const TF_SYSTEM: [&str; 4] = [
    "-1/2*b1*P1*P3-1/2*g*P2*P3-1/2*b1*Q1*Q3-1/2*g*Q2*Q3+1/2*P1*a'-1/4*P3^2*a'+1/2*Q2*a'-1/4*Q3^2*a'+P3*b1'+Q3*g'-2*h'+1/2*a*P1'-1/2*a*P3*P3'+1/2*a*Q2'-1/2*a*Q3*Q3'-a''",
    "-1/2*b1*P1^2-1/2*g*P1*P2+1/2*B2*P2*P3+1/8*a*P2^2*P3-1/8*a*P2*P3*Q1-1/2*b1*Q1^2-1/2*g*Q1*Q2+1/2*B2*Q2*Q3+1/8*a*P2*Q2*Q3-1/8*a*Q1*Q2*Q3-3/4*P1*P3*a'-3/4*Q1*Q3*a'-P2*g'+Q1*g'-b1*P1'-1/2*a*P3*P1'-g*P2'-1/2*a*P1*P3'-3/2*a'*P3'-1/2*a*Q3*Q1'+B2*Q3'+1/4*a*P2*Q3'-3/4*a*Q1*Q3'+2*b1''-a*P3''",
    "-1/2*b1*P1*P2-1/2*g*P2^2-1/2*B2*P1*P3-1/8*a*P1*P2*P3+1/8*a*P1*P3*Q1-1/2*b1*Q1*Q2-1/2*g*Q2^2-1/2*B2*Q1*Q3-1/8*a*P2*Q1*Q3+1/8*a*Q1^2*Q3-3/4*P2*P3*a'-3/4*Q2*Q3*a'+P2*b1'-Q1*b1'-1/2*a*P3*P2'-B2*P3'-3/4*a*P2*P3'+1/4*a*Q1*P3'-b1*Q1'-g*Q2'-1/2*a*Q3*Q2'-1/2*a*Q2*Q3'-3/2*a'*Q3'+2*g''-a*Q3''",
    "B2*P1*P2+1/4*a*P1*P2^2-1/4*a*P1*P2*Q1+B2*Q1*Q2+1/4*a*P2*Q1*Q2-1/4*a*Q1^2*Q2-1/2*P1^2*a'+1/2*P2^2*a'-1/2*Q1^2*a'+1/2*Q2^2*a'-1/2*a*P1*P1'-a'*P1'+B2*P2'+3/4*a*P2*P2'-1/4*a*Q1*P2'+B2*Q1'+1/4*a*P2*Q1'-3/4*a*Q1*Q1'+1/2*a*Q2*Q2'+a'*Q2'-1/2*a*P1''+1/2*a*Q2''",
];

const BS_SYSTEM: [&str; 5] = [
    "-1/2*b1*Q1*Q3-1/2*f*Q2*Q3-2*k*a'-1/4*P1^2*a'+1/2*Q2*a'-1/4*Q3^2*a'-P1*b1'-Q3*f'+2*g'-2*a*k'-1/2*a*P1*P1'+1/2*a*Q2'-1/2*a*Q3*Q3'+a''",
    "-1/2*b1*Q1^2-1/2*f*Q1*Q2+1/2*B2*Q2*Q3+1/8*a*Q1*Q2*Q3-3/4*Q1*Q3*a'-Q1*f'+3/2*a'*P1'-1/2*a*Q3*Q1'-B2*Q3'-3/4*a*Q1*Q3'+2*b1''+a*P1''",
    "-1/2*b1*Q1*Q2-1/2*f*Q2^2-1/2*B2*Q1*Q3-1/8*a*Q1^2*Q3-3/4*Q2*Q3*a'+Q1*b1'+B2*P1'+1/4*a*Q1*P1'+b1*Q1'+f*Q2'-1/2*a*Q3*Q2'-1/2*a*Q2*Q3'+3/2*a'*Q3'+2*f''+a*Q3''",
    "-1/2*B2*Q1^2-1/8*a*Q1^3+1/2*B2*Q2^2+1/8*a*Q1*Q2^2-Q1*Q2*a'-1/2*a*Q2*Q1'+a'*Q1'-B2*Q2'-3/4*a*Q1*Q2'+1/2*a*Q1''",
    "-B2*Q1*Q2-1/4*a*Q1^2*Q2+1/2*Q1^2*a'-1/2*Q2^2*a'+B2*Q1'+3/4*a*Q1*Q1'-1/2*a*Q2*Q2'+a'*Q2'+1/2*a*Q2''",
];

const TEMPLATE_FUNS: [&str; 12] = ["P1", "P2", "P3", "Q1", "Q2", "Q3", "k", "a", "b1", "f", "g", "h"];

fn template_table() -> SymbolTable {
    let mut t = SymbolTable::new();
    for n in TEMPLATE_FUNS {
        t.fun(n);
    }
    t.var("B2");
    t.var("om");
    t
}

/// Parses a template and binds its placeholders simultaneously.
fn instantiate(text: &str, omega: &str, vals: &[(&str, &Expr)]) -> Result<Expr, ModelError> {
    let table = template_table();
    let text = text.replace("om", omega);
    let e = table.parse(&text)?;
    let mut b = Bindings::new();
    for (name, v) in vals {
        let atom = table.lookup(name).expect("template symbol").clone();
        b.insert(atom, (*v).clone());
    }
    Ok(e.subs(&b)?)
}

fn tf_bindings<'a>(c: &'a GenericCoefficients, p: &'a [Expr; 6]) -> Vec<(&'static str, &'a Expr)> {
    vec![
        ("P1", &p[0]),
        ("P2", &p[1]),
        ("P3", &p[2]),
        ("Q1", &p[3]),
        ("Q2", &p[4]),
        ("Q3", &p[5]),
        ("a", &c.a),
        ("b1", &c.b1),
        ("g", &c.g),
        ("h", &c.h),
        ("B2", &c.b2),
    ]
}

fn bs_bindings<'a>(c: &'a GenericCoefficients, p: &'a [Expr; 4], k: &'a Expr) -> Vec<(&'static str, &'a Expr)> {
    vec![
        ("P1", &p[0]),
        ("Q1", &p[1]),
        ("Q2", &p[2]),
        ("Q3", &p[3]),
        ("k", k),
        ("a", &c.a),
        ("b1", &c.b1),
        ("f", &c.f),
        ("g", &c.g),
        ("B2", &c.b2),
    ]
}

fn spatial(omega: &str, second: &str, vals: &[(&str, &Expr)]) -> Result<[Expr; 3], ModelError> {
    Ok([
        instantiate("a", omega, vals)?,
        instantiate("b1 + y*om + x*a'/2", omega, vals)?,
        instantiate(&format!("{second} - x*om + y*a'/2"), omega, vals)?,
    ])
}

/// Generic vector of the nonautonomous two-factor equation with coefficients (P₁, P₂, P₃, Q₁, Q₂, Q₃).
pub fn generic_vector_twofactor(c: &GenericCoefficients, coeffs: &[Expr; 6]) -> Result<VectorField, ModelError> {
    let vals = tf_bindings(c, coeffs);
    let [xt, xx, xy] = spatial(TF_OMEGA, "g", &vals)?;
    let eta = instantiate(TF_ETA, TF_OMEGA, &vals)? * jet::u();
    Ok(VectorField::new("generic", xt, xx, xy, eta))
}

/// Generic vector of the nonautonomous Black-Scholes equation with coefficients (P₁, Q₁, Q₂, Q₃).
pub fn generic_vector_bs2d(c: &GenericCoefficients, coeffs: &[Expr; 4]) -> Result<VectorField, ModelError> {
    let zero = Expr::zero();
    let vals = bs_bindings(c, coeffs, &zero);
    let [xt, xx, xy] = spatial(BS_OMEGA, "f", &vals)?;
    let eta = instantiate(BS_ETA, BS_OMEGA, &vals)? * jet::u();
    Ok(VectorField::new("generic", xt, xx, xy, eta))
}

/// The four remaining determining equations of the two-factor generic vector.
pub fn determining_residuals_twofactor(c: &GenericCoefficients, coeffs: &[Expr; 6]) -> Result<Vec<Expr>, ModelError> {
    let vals = tf_bindings(c, coeffs);
    TF_SYSTEM.iter().map(|s| instantiate(s, TF_OMEGA, &vals)).collect()
}

/// The five remaining determining equations of the Black-Scholes generic vector.
pub fn determining_residuals_bs2d(
    c: &GenericCoefficients,
    coeffs: &[Expr; 4],
    k: &Expr,
) -> Result<Vec<Expr>, ModelError> {
    let vals = bs_bindings(c, coeffs, k);
    BS_SYSTEM.iter().map(|s| instantiate(s, BS_OMEGA, &vals)).collect()
}

/// On-solution residual of `x` split by powers (i, j) of x and y in the coefficient of u.
/// Fails if a derivative of u survives.
pub fn engine_system(pde: &EvolutionPDE, x: &VectorField) -> Result<BTreeMap<(i32, i32), Expr>, ModelError> {
    let r = on_solution_residual(pde, x)?;
    let mut atoms = vec![Atom::var("x"), Atom::var("y")];
    atoms.extend(jet::jets_in(&r).into_iter().map(Atom::Jet));
    let mut out = BTreeMap::new();
    for (k, e) in r.split_by(&atoms) {
        if e.is_zero() {
            continue;
        }
        let jets = &k[2..];
        let u_only = atoms[2..]
            .iter()
            .zip(jets)
            .all(|(a, &p)| if *a == Atom::u() { p == 1 } else { p == 0 });
        if !u_only {
            return Err(ModelError::Unsupported(format!(
                "residual keeps a derivative term at exponents {k:?}"
            )));
        }
        out.insert((k[0], k[1]), e);
    }
    Ok(out)
}

/// The combinations of engine coefficients that reproduce the hand-entered systems,
/// in the same order. `family` is "twofactor" or "bs2d".
pub fn appendix_combinations(family: &str, sys: &BTreeMap<(i32, i32), Expr>) -> Vec<Expr> {
    let c = |i, j| sys.get(&(i, j)).cloned().unwrap_or_else(Expr::zero);
    match family {
        "twofactor" => vec![c(0, 0), c(1, 0), c(0, 1), c(2, 0) - c(0, 2)],
        _ => vec![c(0, 0), c(1, 0), c(0, 1), c(1, 1), c(0, 2) - c(2, 0)],
    }
}
