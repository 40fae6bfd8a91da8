//! Second prolongation, on-solution symmetry verification and the
//! conformal condition on the principal part.

mod catalog;
mod generic;

pub use catalog::{catalog_generators, special_antiderivative_relations, two_factor_modes, Generator, TwoFactorMode};
pub use generic::{
    appendix_combinations, determining_residuals_bs2d, determining_residuals_twofactor, engine_system,
    generic_vector_bs2d, generic_vector_twofactor, GenericCoefficients,
};

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_traits::Zero;
use serde_json::json;

use crate::expr::{Atom, Bindings, Expr, ExprError, Q};
use crate::jet;
use crate::models::{EvolutionPDE, ModelError};

/// X = ξᵗ∂t + ξˣ∂x + ξʸ∂y + η∂u, components indexed by jet slot.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub name: String,
    pub xi: [Expr; 3],
    pub eta: Expr,
}

impl VectorField {
    pub fn new(name: &str, xt: Expr, xx: Expr, xy: Expr, eta: Expr) -> VectorField {
        VectorField {
            name: name.to_string(),
            xi: [xt, xx, xy],
            eta,
        }
    }

    pub fn zero() -> VectorField {
        VectorField::new("0", Expr::zero(), Expr::zero(), Expr::zero(), Expr::zero())
    }

    /// ∂ along the coordinate of jet slot `k`.
    pub fn translation(k: usize) -> VectorField {
        let mut v = VectorField::zero();
        v.xi[k] = Expr::one();
        v.name = format!("d{}", ["t", "x", "y"][k]);
        v
    }

    /// u∂u
    pub fn scaling() -> VectorField {
        VectorField::new("u du", Expr::zero(), Expr::zero(), Expr::zero(), jet::u())
    }

    pub fn named(mut self, name: &str) -> VectorField {
        self.name = name.to_string();
        self
    }

    pub fn components(&self) -> [&Expr; 4] {
        [&self.xi[0], &self.xi[1], &self.xi[2], &self.eta]
    }

    pub fn is_zero(&self) -> bool {
        self.components().iter().all(|e| e.is_zero())
    }

    /// Pure f(t,x,y)∂u: the solution-symmetry ideal.
    pub fn is_solution_symmetry_form(&self) -> bool {
        self.xi.iter().all(|e| e.is_zero()) && !self.eta.contains(&Atom::u())
    }

    pub fn eta_is_linear(&self) -> bool {
        self.eta.degree_in(&Atom::u()).is_some_and(|d| d <= 1)
    }

    pub fn scale(&self, c: &Q) -> VectorField {
        VectorField {
            name: self.name.clone(),
            xi: [self.xi[0].scale(c), self.xi[1].scale(c), self.xi[2].scale(c)],
            eta: self.eta.scale(c),
        }
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        VectorField {
            name: format!("{} + {}", self.name, other.name),
            xi: [
                &self.xi[0] + &other.xi[0],
                &self.xi[1] + &other.xi[1],
                &self.xi[2] + &other.xi[2],
            ],
            eta: &self.eta + &other.eta,
        }
    }

    pub fn combination(parts: &[(Q, &VectorField)]) -> VectorField {
        let mut acc = VectorField::zero();
        for (c, v) in parts {
            acc = acc.add(&v.scale(c));
        }
        acc
    }

    pub fn subs(&self, b: &Bindings) -> Result<VectorField, ExprError> {
        Ok(VectorField {
            name: self.name.clone(),
            xi: [self.xi[0].subs(b)?, self.xi[1].subs(b)?, self.xi[2].subs(b)?],
            eta: self.eta.subs(b)?,
        })
    }

    /// The derivation X(f) on functions of (t, x, y, u).
    pub fn apply(&self, f: &Expr) -> Result<Expr, ExprError> {
        let mut out = Expr::zero();
        for k in 0..3 {
            if !self.xi[k].is_zero() {
                out += &(&self.xi[k] * f.diff(&jet::coord(k))?);
            }
        }
        if !self.eta.is_zero() {
            out += &(&self.eta * f.diff(&Atom::u())?);
        }
        Ok(out)
    }

    /// Q = η − ξᵅ u_α.
    pub fn characteristic(&self) -> Expr {
        let mut q = self.eta.clone();
        for k in 0..3 {
            let mut j = [0u8; 3];
            j[k] = 1;
            q = q - &self.xi[k] * Expr::atom(Atom::Jet(j));
        }
        q
    }
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (e, d) in self.components().iter().zip(["dt", "dx", "dy", "du"]) {
            if !e.is_zero() {
                parts.push(format!("({e}) {d}"));
            }
        }
        if parts.is_empty() {
            return f.write_str("0");
        }
        f.write_str(&parts.join(" + "))
    }
}

/// First and second prolonged coefficients η^J, keyed by jet multi-index.
#[derive(Clone, Debug)]
pub struct Prolonged {
    pub coeffs: BTreeMap<[u8; 3], Expr>,
}

impl Prolonged {
    pub fn get(&self, j: [u8; 3]) -> &Expr {
        &self.coeffs[&j]
    }
}

pub const PROLONGED_JETS: [[u8; 3]; 6] = [[1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 2, 0], [0, 1, 1], [0, 0, 2]];

/// η^J = D_J Q + ξᵅ u_{J+α} for J in {t, x, y, xx, xy, yy}.
pub fn prolong2(x: &VectorField) -> Result<Prolonged, ExprError> {
    let q = x.characteristic();
    let mut coeffs = BTreeMap::new();
    for j in PROLONGED_JETS {
        let mut e = jet::total_d_multi(&q, j)?;
        for k in 0..3 {
            if x.xi[k].is_zero() {
                continue;
            }
            let mut jk = j;
            jk[k] += 1;
            e += &(&x.xi[k] * Expr::atom(Atom::Jet(jk)));
        }
        coeffs.insert(j, e);
    }
    Ok(Prolonged { coeffs })
}

fn require_xy(pde: &EvolutionPDE) -> Result<(), ModelError> {
    for a in &pde.space {
        if !matches!(jet::slot_of(a), Some(1) | Some(2)) {
            return Err(ModelError::Unsupported(format!(
                "symmetry analysis needs space variables x, y; found `{a}`"
            )));
        }
    }
    if pde.s.is_zero() {
        return Err(ModelError::NonConstantTime("zero u_t coefficient".into()));
    }
    for c in pde.coefficients() {
        if c.atoms().iter().any(|a| matches!(a, Atom::Jet(_))) {
            return Err(ModelError::Unsupported("nonlinear equation".into()));
        }
    }
    Ok(())
}

/// X⁽²⁾Θ as a polynomial in the jet coordinates.
pub fn prolonged_action(pde: &EvolutionPDE, x: &VectorField) -> Result<Expr, ModelError> {
    let theta = pde.theta();
    let pr = prolong2(x)?;
    let mut r = x.apply(&theta)?;
    for j in PROLONGED_JETS {
        let c = theta.diff(&Atom::Jet(j))?;
        if !c.is_zero() {
            r += &(c * pr.get(j));
        }
    }
    Ok(r)
}

/// Replaces every jet carrying a t-derivative by its value on solutions of Θ = 0.
pub struct OnSolution {
    value_ut: Expr,
    cache: HashMap<[u8; 3], Expr>,
}

impl OnSolution {
    pub fn new(pde: &EvolutionPDE) -> OnSolution {
        let theta = pde.theta();
        let ut = jet::jet(1, 0, 0);
        let rest = theta - ut.scale(&pde.s);
        OnSolution {
            value_ut: rest.scale(&(-pde.s.recip())),
            cache: HashMap::new(),
        }
    }

    fn value(&mut self, j: [u8; 3]) -> Result<Expr, ExprError> {
        if let Some(v) = self.cache.get(&j) {
            return Ok(v.clone());
        }
        let base = jet::total_d_multi(&self.value_ut, [j[0] - 1, j[1], j[2]])?;
        let v = self.reduce(&base)?;
        self.cache.insert(j, v.clone());
        Ok(v)
    }

    pub fn reduce(&mut self, e: &Expr) -> Result<Expr, ExprError> {
        let tj: Vec<[u8; 3]> = jet::jets_in(e).into_iter().filter(|j| j[0] > 0).collect();
        if tj.is_empty() {
            return Ok(e.clone());
        }
        let mut b = Bindings::new();
        for j in tj {
            b.insert(Atom::Jet(j), self.value(j)?);
        }
        e.subs(&b)
    }
}

#[derive(Clone, Debug)]
pub struct SymmetryReport {
    pub model: String,
    pub generator: String,
    pub verdict: bool,
    pub lambda: Option<Expr>,
    pub residual: Option<Expr>,
    pub psi: Option<Expr>,
    pub repairs: Vec<String>,
}

impl SymmetryReport {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "model": self.model,
            "generator": self.generator,
            "verdict": if self.verdict { "symmetry" } else { "not-symmetry" },
            "lambda": self.lambda.as_ref().map(|e| e.to_string()),
            "residual": self.residual.as_ref().map(|e| e.to_string()),
            "psi": self.psi.as_ref().map(|e| e.to_string()),
            "repairs": self.repairs,
        })
    }
}

/// On-solution residual of X⁽²⁾Θ after eliminating t-derivatives.
pub fn on_solution_residual(pde: &EvolutionPDE, x: &VectorField) -> Result<Expr, ModelError> {
    require_xy(pde)?;
    let r = prolonged_action(pde, x)?;
    Ok(OnSolution::new(pde).reduce(&r)?)
}

pub fn check_symmetry(pde: &EvolutionPDE, x: &VectorField) -> Result<SymmetryReport, ModelError> {
    require_xy(pde)?;
    if !x.eta_is_linear() {
        return Err(ModelError::Unsupported(format!("{}: η is not linear in u", x.name)));
    }
    let r = prolonged_action(pde, x)?;
    let lambda = r.coeff(&Atom::Jet([1, 0, 0]), 1).scale(&pde.s.recip());
    let residual = OnSolution::new(pde).reduce(&r)?;
    let verdict = residual.is_zero();
    Ok(SymmetryReport {
        model: pde.id.clone(),
        generator: x.name.clone(),
        verdict,
        lambda: verdict.then_some(lambda),
        residual: (!verdict).then_some(residual),
        psi: None,
        repairs: vec![],
    })
}

/// Outcome of the conformal condition L_ξ Aⁱʲ = −2ψAⁱʲ.
#[derive(Clone, Debug, PartialEq)]
pub enum Conformal {
    Holds(Expr),
    Fails { component: (usize, usize), residual: Expr },
}

pub fn check_coefficient_condition(pde: &EvolutionPDE, x: &VectorField) -> Result<Conformal, ModelError> {
    require_xy(pde)?;
    let n = pde.dim();
    let slots: Vec<usize> = (0..n).map(|i| pde.slot(i)).collect();
    let xi_sp: Vec<&Expr> = slots.iter().map(|&k| &x.xi[k]).collect();
    let mut lie = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let a = &pde.a[i][j];
            let mut e = &x.xi[0] * a.diff(&Atom::t())?;
            for k in 0..n {
                e += &(xi_sp[k] * a.diff(&pde.space[k])?);
                e = e - &pde.a[k][j] * xi_sp[i].diff(&pde.space[k])?;
                e = e - &pde.a[i][k] * xi_sp[j].diff(&pde.space[k])?;
            }
            lie[i][j] = e;
        }
    }
    let lead = (0..n)
        .find(|&i| !pde.a[i][i].is_zero())
        .ok_or_else(|| ModelError::Unsupported("vanishing principal part".into()))?;
    let psi = -(lie[lead][lead].div(&pde.a[lead][lead])?.scale(&Q::from_integer(2.into()).recip()));
    for i in 0..n {
        for j in 0..n {
            let res = &lie[i][j] + (&psi * &pde.a[i][j]).scale(&Q::from_integer(2.into()));
            if !res.is_zero() {
                return Ok(Conformal::Fails {
                    component: (i, j),
                    residual: res,
                });
            }
        }
    }
    Ok(Conformal::Holds(psi))
}

/// Splits an on-solution residual by jet monomials and powers of x, y.
pub fn split_residual(r: &Expr) -> BTreeMap<Vec<i32>, Expr> {
    let mut atoms: Vec<Atom> = vec![Atom::var("x"), Atom::var("y")];
    let mut jets: Vec<[u8; 3]> = jet::jets_in(r);
    jets.sort();
    atoms.extend(jets.into_iter().map(Atom::Jet));
    r.split_by(&atoms)
        .into_iter()
        .filter(|(_, e)| !e.is_zero())
        .collect()
}
