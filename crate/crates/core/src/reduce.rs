//! Maps to the heat equation, the invariant exponential solution and
//! reductions by translation-type symmetries.

use num_traits::{One, Zero};
use serde_json::json;

use crate::expr::{q, qr, Atom, Bindings, Expr, SymbolTable, Q};
use crate::jet;
use crate::models::{apply_transformation, EvolutionPDE, ModelError, PointTransformation};
use crate::symmetry::{check_symmetry, VectorField};

type Result<T> = std::result::Result<T, ModelError>;

fn depends_on_time(e: &Expr) -> bool {
    e.atoms().iter().any(|a| a.depends_on_time())
}

fn free_of_space(e: &Expr, pde: &EvolutionPDE) -> bool {
    pde.space.iter().all(|a| !e.contains(a)) && pde.logs.iter().all(|(l, _)| !e.contains(l))
}

/// ∫e dt: polynomial-in-t terms exactly, everything else through one antiderivative atom.
pub fn integrate_t(e: &Expr, name: &str, table: &mut SymbolTable) -> Expr {
    let t = Atom::t();
    let mut exact = Expr::zero();
    let mut rest = Expr::zero();
    for (m, c) in e.terms() {
        let term = Expr::from_terms([(m.clone(), c.clone())]);
        let k = m.power_of(&t);
        let others_free = m.exp.is_none() && m.pows.iter().all(|(a, _)| a.is_time() || !a.depends_on_time());
        if others_free && k >= 0 {
            let t_atom = Expr::atom(t.clone());
            exact += &(term * t_atom).scale(&Q::from_integer((k + 1).into()).recip());
        } else {
            rest += &term;
        }
    }
    if rest.is_zero() {
        exact
    } else {
        exact + table.anti(name, rest)
    }
}

fn scalar_identity(pde: &EvolutionPDE) -> Result<Q> {
    let n = pde.dim();
    let a = pde.a[0][0]
        .as_rational()
        .filter(|a| !a.is_zero())
        .ok_or_else(|| ModelError::Unsupported("principal part must be a nonzero rational multiple of the identity".into()))?;
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { a.clone() } else { Q::zero() };
            if pde.a[i][j].as_rational() != Some(want) {
                return Err(ModelError::Unsupported(
                    "principal part must be a rational multiple of the identity".into(),
                ));
            }
        }
    }
    Ok(a)
}

/// Removes space-independent drift and source: old xᵢ = x̄ᵢ + ∫Bᵢ/s dt,
/// u = exp(−∫source/s dt)·v, t = (−s/a)·T.
fn drift_removal(pde: &EvolutionPDE) -> Result<PointTransformation> {
    let a = scalar_identity(pde)?;
    for e in pde.b.iter().chain(std::iter::once(&pde.source)) {
        if !free_of_space(e, pde) {
            return Err(ModelError::Unsupported(format!(
                "coefficient `{e}` depends on the space variables"
            )));
        }
    }
    let mut table = pde.symbols.clone();
    let sinv = pde.s.recip();
    let mut old = Vec::new();
    let mut inverse = Vec::new();
    for (i, x) in pde.space.iter().enumerate() {
        let shift = integrate_t(&pde.b[i].scale(&sinv), &format!("IB{}", i + 1), &mut table);
        old.push((x.clone(), Expr::atom(x.clone()) + &shift));
        inverse.push(Expr::atom(x.clone()) - shift);
    }
    let k = integrate_t(&pde.source.scale(&(-sinv.clone())), "IK", &mut table);
    Ok(PointTransformation {
        name: "drift removal".into(),
        time_scale: -(&pde.s / &a),
        old,
        new_space: pde.space.clone(),
        multiplier: Expr::exp(&k),
        inverse: Some(inverse),
    })
}

fn is_heat(p: &EvolutionPDE) -> bool {
    let n = p.dim();
    p.s == q(-1)
        && p.source.is_zero()
        && p.b.iter().all(|e| e.is_zero())
        && (0..n).all(|i| (0..n).all(|j| p.a[i][j].as_rational() == Some(if i == j { Q::one() } else { Q::zero() })))
}

/// Transformation taking a (bs.24)/(bs.28)-type equation
/// u_xx + u_yy − Λ₁u_x − Λ₂u_y − 2ku + 2u_t = 0 to the heat equation v_xx + v_yy − v_t = 0.
pub fn to_heat(pde: &EvolutionPDE) -> Result<PointTransformation> {
    if pde.dim() != 2 {
        return Err(ModelError::Unsupported("to_heat expects two space dimensions".into()));
    }
    let mut tr = drift_removal(pde)?;
    tr.name = "heat map".into();
    let pulled = apply_transformation(pde, &tr)?;
    if !is_heat(&pulled) {
        return Err(ModelError::Unsupported(format!("pullback is {pulled}, not the heat equation")));
    }
    Ok(tr)
}

/// u = w(t)·exp(c₁x + c₂y) with w = exp(W), W' = ½(2k − c₁² − c₂² + Λ₁c₁ + Λ₂c₂).
#[derive(Clone, Debug)]
pub struct ClosedFormSolution {
    pub c1: Q,
    pub c2: Q,
    /// W′
    pub integrand: Expr,
    pub w: Expr,
    pub u: Expr,
    pub k: Expr,
    pub lambda1: Expr,
    pub lambda2: Expr,
}

impl ClosedFormSolution {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "c1": self.c1.to_string(),
            "c2": self.c2.to_string(),
            "w_expression": self.w.to_string(),
            "w_log_derivative": self.integrand.to_string(),
            "k_spec": self.k.to_string(),
            "lambda1_spec": self.lambda1.to_string(),
            "lambda2_spec": self.lambda2.to_string(),
        })
    }

    /// Θ[u] vanishes identically.
    pub fn satisfies(&self, pde: &EvolutionPDE) -> Result<bool> {
        Ok(pde.apply(&self.u)?.is_zero())
    }
}

/// (Λ₁, Λ₂, k) of an equation u_xx + u_yy − Λ₁u_x − Λ₂u_y − 2ku + 2u_t = 0.
pub fn bs28_form(pde: &EvolutionPDE) -> Result<(Expr, Expr, Expr)> {
    let shape = || ModelError::Unsupported(format!("`{}` is not of the form u_xx + u_yy − Λ·∇u − 2ku + 2u_t", pde.id));
    if pde.dim() != 2 || pde.s != q(2) || scalar_identity(pde).ok() != Some(Q::one()) {
        return Err(shape());
    }
    if pde.space != [Atom::var("x"), Atom::var("y")] {
        return Err(shape());
    }
    for e in pde.b.iter().chain(std::iter::once(&pde.source)) {
        if !free_of_space(e, pde) {
            return Err(shape());
        }
    }
    Ok((-pde.b[0].clone(), -pde.b[1].clone(), pde.source.scale(&qr(-1, 2))))
}

pub fn invariant_solution(pde: &EvolutionPDE, c1: &Q, c2: &Q) -> Result<ClosedFormSolution> {
    let (l1, l2, k) = bs28_form(pde)?;
    let (e1, e2) = (Expr::constant(c1.clone()), Expr::constant(c2.clone()));
    let integrand =
        (k.scale(&q(2)) - &e1 * &e1 - &e2 * &e2 + &l1 * &e1 + &l2 * &e2).scale(&qr(1, 2));
    let mut table = pde.symbols.clone();
    let big_w = integrate_t(&integrand, "W", &mut table);
    let w = Expr::exp(&big_w);
    let x = Expr::atom(Atom::var("x"));
    let y = Expr::atom(Atom::var("y"));
    let u = Expr::exp(&(&big_w + &e1 * x + &e2 * y));
    Ok(ClosedFormSolution {
        c1: c1.clone(),
        c2: c2.clone(),
        integrand,
        w,
        u,
        k,
        lambda1: l1,
        lambda2: l2,
    })
}

/// Reduction by X = α∂_z + c·u∂u (z one of the space variables, α, c constants):
/// u = exp((c/α)z)·v with v independent of z.
pub fn reduce_once(pde: &EvolutionPDE, x: &VectorField) -> Result<EvolutionPDE> {
    if !x.xi[0].is_zero() {
        return Err(ModelError::Unsupported("reduction needs a generator with no ∂t part".into()));
    }
    let report = check_symmetry(pde, x)?;
    if !report.verdict {
        return Err(ModelError::Invariant(format!("{} is not a symmetry of {}", x.name, pde.id)));
    }
    let moving: Vec<usize> = (0..pde.dim()).filter(|&i| !x.xi[pde.slot(i)].is_zero()).collect();
    let [i] = moving.as_slice() else {
        return Err(ModelError::Unsupported(
            "only translations along a single space variable are supported".into(),
        ));
    };
    let slot = pde.slot(*i);
    let alpha = x.xi[slot]
        .as_rational()
        .ok_or_else(|| ModelError::Unsupported("translation speed must be a rational constant".into()))?;
    let u = jet::u();
    let c = x.eta.coeff(&Atom::u(), 1).as_rational().filter(|c| (&x.eta - &u.scale(c)).is_zero()).ok_or_else(|| {
        ModelError::Unsupported("η must be a constant multiple of u".into())
    })?;
    let beta = &c / &alpha;
    let z = Expr::atom(pde.space[*i].clone());
    let ansatz = Expr::exp(&(&z * Expr::constant(beta.clone()))) * &u;
    let theta = pde.apply(&ansatz)?;
    // v does not depend on z: drop every jet differentiated along the slot
    let mut kill = Bindings::new();
    for j in jet::jets_in(&theta) {
        if j[slot] > 0 {
            kill.insert(Atom::Jet(j), Expr::zero());
        }
    }
    let reduced = theta.subs(&kill)?.div(&Expr::exp(&(&z * Expr::constant(beta))))?;
    if reduced.contains(&pde.space[*i]) {
        return Err(ModelError::Unsupported(format!(
            "reduced equation still depends on {}",
            pde.space[*i]
        )));
    }
    let space: Vec<Atom> = pde.space.iter().enumerate().filter(|(k, _)| k != i).map(|(_, a)| a.clone()).collect();
    let slots: Vec<usize> = (0..pde.dim()).filter(|k| k != i).map(|k| pde.slot(k)).collect();
    let n = space.len();
    let mut a = vec![vec![Expr::zero(); n]; n];
    let mut b = vec![Expr::zero(); n];
    let mut rebuilt = Expr::zero();
    let source = reduced.coeff(&Atom::u(), 1);
    rebuilt += &(&source * &u);
    let s_expr = reduced.coeff(&Atom::Jet([1, 0, 0]), 1);
    rebuilt += &(&s_expr * jet::jet(1, 0, 0));
    for (p, &sp) in slots.iter().enumerate() {
        let mut e = [0u8; 3];
        e[sp] = 1;
        b[p] = reduced.coeff(&Atom::Jet(e), 1);
        rebuilt += &(&b[p] * Expr::atom(Atom::Jet(e)));
        for (r, &sr) in slots.iter().enumerate().skip(p) {
            let mut e2 = [0u8; 3];
            e2[sp] += 1;
            e2[sr] += 1;
            let coef = reduced.coeff(&Atom::Jet(e2), 1);
            rebuilt += &(&coef * Expr::atom(Atom::Jet(e2)));
            if p == r {
                a[p][p] = coef;
            } else {
                a[p][r] = coef.scale(&qr(1, 2));
                a[r][p] = coef.scale(&qr(1, 2));
            }
        }
    }
    if !(reduced - rebuilt).is_zero() {
        return Err(ModelError::Unsupported("reduced operator is not of evolution form".into()));
    }
    let s = s_expr
        .as_rational()
        .ok_or_else(|| ModelError::NonConstantTime(s_expr.to_string()))?;
    Ok(EvolutionPDE {
        id: format!("{}/{}", pde.id, x.name),
        space,
        a,
        b,
        source,
        s,
        logs: vec![],
        symbols: pde.symbols.clone(),
    })
}

/// w(t) solving s·w′ + source·w = 0 for a reduced equation with no space variables,
/// returned as (w′/w, w).
pub fn solve_reduced_ode(pde: &EvolutionPDE) -> Result<(Expr, Expr)> {
    if pde.dim() != 0 {
        return Err(ModelError::Unsupported("expected an equation in t only".into()));
    }
    let rate = pde.source.scale(&(-pde.s.recip()));
    let mut table = pde.symbols.clone();
    let w = Expr::exp(&integrate_t(&rate, "W", &mut table));
    Ok((rate, w))
}

/// Whether a linear (1+1) equation a·u_zz + β u_z + γ u + s u_t = 0 with constant a
/// is equivalent to the heat equation: β at most linear in z is required, and the
/// potential of the drift-free form must be at most quadratic in z.
pub fn is_maximally_symmetric_1p1(pde: &EvolutionPDE) -> Result<bool> {
    if pde.dim() != 1 {
        return Err(ModelError::Unsupported("expected one space variable".into()));
    }
    let a = scalar_identity(pde)?;
    let z = pde.space[0].clone();
    if !pde.logs.is_empty() {
        return Err(ModelError::Unsupported("logarithmic coefficients".into()));
    }
    // u_t = A u_zz + β u_z + γ u
    let f = -pde.s.recip();
    let big_a = &a * &f;
    let beta = pde.b[0].scale(&f);
    let gamma = pde.source.scale(&f);
    match beta.degree_in(&z) {
        Some(d) if d <= 1 => {}
        _ => {
            return Err(ModelError::Unsupported(format!(
                "drift `{beta}` is not at most linear in {z}"
            )))
        }
    }
    if beta.terms().any(|(m, _)| m.exp.as_ref().is_some_and(|p| p.contains(&z))) {
        return Err(ModelError::Unsupported(format!("drift `{beta}` is not polynomial in {z}")));
    }
    // V = γ − β_z/2 − β²/(4A) + (1/(2A)) ∫β_t dz
    let ia = big_a.recip();
    let bz = beta.diff(&z)?;
    let bt = beta.diff(&Atom::t())?;
    let zz = Expr::atom(z.clone());
    let int_bt = &bt.coeff(&z, 0) * &zz + (&bt.coeff(&z, 1) * &zz * &zz).scale(&qr(1, 2));
    let v = &gamma - bz.scale(&qr(1, 2)) - (&beta * &beta).scale(&(&ia * qr(1, 4))) + int_bt.scale(&(&ia * qr(1, 2)));
    let d3 = v.diff(&z)?.diff(&z)?.diff(&z)?;
    let maximal = d3.is_zero();
    if maximal && free_of_space(&pde.b[0], pde) && free_of_space(&pde.source, pde) {
        // explicit map to the heat equation as a cross-check
        let tr = drift_removal(pde)?;
        let pulled = apply_transformation(pde, &tr)?;
        if !is_heat(&pulled) {
            return Err(ModelError::Invariant(format!(
                "drift-free equation {pulled} is not the heat equation"
            )));
        }
    }
    Ok(maximal)
}

/// The translation-type reduction generators Z + c·X_u of an equation in canonical form.
pub fn translation_with_scaling(slot: usize, c: &Q) -> VectorField {
    let mut v = VectorField::translation(slot);
    v.eta = jet::u().scale(c);
    v.name = format!("d{} + {c}*X_u", ["t", "x", "y"][slot]);
    v
}

/// Whether `e` depends on time through t itself or opaque functions.
pub fn time_dependent(e: &Expr) -> bool {
    depends_on_time(e)
}
