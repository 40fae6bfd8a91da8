//! Equation catalog, parameter maps between financial and canonical
//! coordinates, and point transformations with their pullback.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::expr::{q, qr, sqrt_rational, Atom, Bindings, Expr, ExprError, SymbolTable, Q};
use crate::jet;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("parameter mismatch: {0}")]
    Params(String),
    #[error("invalid parameter value: {0}")]
    Invariant(String),
    #[error("transformation is not invertible: {0}")]
    NotInvertible(String),
    #[error("u_t coefficient is not constant after renormalization: {0}")]
    NonConstantTime(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

type Result<T> = std::result::Result<T, ModelError>;

/// Linear second-order evolution equation
/// Θ = Aⁱʲ u_ij + Bⁱ u_i + source·u + s·u_t.
#[derive(Clone, Debug)]
pub struct EvolutionPDE {
    pub id: String,
    pub space: Vec<Atom>,
    pub a: Vec<Vec<Expr>>,
    pub b: Vec<Expr>,
    pub source: Expr,
    pub s: Q,
    /// Atoms standing for the logarithm of a space variable: (log atom, variable).
    pub logs: Vec<(Atom, Atom)>,
    pub symbols: SymbolTable,
}

impl EvolutionPDE {
    pub fn dim(&self) -> usize {
        self.space.len()
    }

    /// Jet slot of the i-th space variable (x → 1, y → 2, others by position).
    pub fn slot(&self, i: usize) -> usize {
        match jet::slot_of(&self.space[i]) {
            Some(k) if k > 0 => k,
            _ => i + 1,
        }
    }

    pub fn d(&self, f: &Expr, i: usize) -> std::result::Result<Expr, ExprError> {
        let mut out = jet::total_d_wrt(f, &self.space[i], self.slot(i))?;
        for (l, v) in &self.logs {
            if *v == self.space[i] && f.contains(l) {
                out += &(f.diff(l)? * Expr::atom(v.clone()).recip()?);
            }
        }
        Ok(out)
    }

    pub fn dt(&self, f: &Expr) -> std::result::Result<Expr, ExprError> {
        jet::total_d(f, 0)
    }

    /// The operator applied to an expression in the jet coordinates.
    pub fn apply(&self, f: &Expr) -> std::result::Result<Expr, ExprError> {
        let n = self.dim();
        let first: Vec<Expr> = (0..n).map(|i| self.d(f, i)).collect::<std::result::Result<_, _>>()?;
        let mut out = self.source.clone() * f + self.dt(f)?.scale(&self.s);
        for i in 0..n {
            out += &(&self.b[i] * &first[i]);
            for j in i..n {
                if self.a[i][j].is_zero() {
                    continue;
                }
                let dij = self.d(&first[j], i)?;
                let w = if i == j { self.a[i][j].clone() } else { self.a[i][j].scale(&q(2)) };
                out += &(w * dij);
            }
        }
        Ok(out)
    }

    pub fn theta(&self) -> Expr {
        self.apply(&jet::u()).expect("first-order jets never exceed the order cap")
    }

    pub fn coefficients(&self) -> Vec<&Expr> {
        let mut v: Vec<&Expr> = self.a.iter().flatten().collect();
        v.extend(self.b.iter());
        v.push(&self.source);
        v
    }

    pub fn is_autonomous(&self) -> bool {
        self.coefficients()
            .iter()
            .all(|e| e.atoms().iter().all(|a| !a.depends_on_time()))
    }

    /// Returns k with Θ_other = k·Θ_self when the two operators are proportional.
    pub fn ratio_to(&self, other: &EvolutionPDE) -> Option<Q> {
        if self.s.is_zero() {
            return None;
        }
        let k = &other.s / &self.s;
        (other.theta() - self.theta().scale(&k)).is_zero().then_some(k)
    }

    pub fn same_as(&self, other: &EvolutionPDE) -> bool {
        self.ratio_to(other).is_some_and(|k| k.is_one())
    }

    pub fn map_coefficients<F>(&self, mut f: F) -> Result<EvolutionPDE>
    where
        F: FnMut(&Expr) -> Result<Expr>,
    {
        let mut out = self.clone();
        for row in out.a.iter_mut() {
            for e in row.iter_mut() {
                *e = f(e)?;
            }
        }
        for e in out.b.iter_mut() {
            *e = f(e)?;
        }
        out.source = f(&out.source)?;
        Ok(out)
    }
}

impl std::fmt::Display for EvolutionPDE {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} = 0", self.theta())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Plain,
    Positive,
    /// Correlation with the named companion root √(1−ρ²).
    Corr(&'static str),
}

pub struct ModelInfo {
    pub id: &'static str,
    pub title: &'static str,
    pub space: &'static [(&'static str, Kind)],
    pub params: &'static [(&'static str, Kind)],
    /// Parameters that are functions of time in the default declaration.
    pub time_functions: bool,
}

const XY: &[(&str, Kind)] = &[("x", Kind::Plain), ("y", Kind::Plain)];
const TWO_FACTOR: &[(&str, Kind)] = &[
    ("sigma1", Kind::Positive),
    ("sigma2", Kind::Positive),
    ("rho", Kind::Corr("w")),
    ("r", Kind::Plain),
    ("kappa", Kind::Plain),
    ("alpha", Kind::Plain),
    ("lambda", Kind::Plain),
];
const BS2D: &[(&str, Kind)] = &[
    ("sigma1", Kind::Positive),
    ("sigma2", Kind::Positive),
    ("rho", Kind::Corr("w")),
    ("mu1", Kind::Plain),
    ("mu2", Kind::Plain),
    ("k", Kind::Plain),
];

pub const MODELS: &[ModelInfo] = &[
    ModelInfo {
        id: "heat1d",
        title: "heat equation, one space dimension",
        space: &[("x", Kind::Plain)],
        params: &[],
        time_functions: false,
    },
    ModelInfo {
        id: "heat2d",
        title: "heat equation, two space dimensions",
        space: XY,
        params: &[],
        time_functions: false,
    },
    ModelInfo {
        id: "bs1d",
        title: "Black-Scholes equation",
        space: &[("S", Kind::Positive)],
        params: &[("sigma", Kind::Positive), ("r", Kind::Plain)],
        time_functions: false,
    },
    ModelInfo {
        id: "onefactor",
        title: "one-factor commodity futures model",
        space: &[("S", Kind::Positive)],
        params: &[
            ("sigma", Kind::Positive),
            ("kappa", Kind::Plain),
            ("mu", Kind::Plain),
            ("lambda", Kind::Plain),
        ],
        time_functions: false,
    },
    ModelInfo {
        id: "twofactor",
        title: "two-factor commodity model in spot price and convenience yield",
        space: &[("S", Kind::Positive), ("delta", Kind::Plain)],
        params: TWO_FACTOR,
        time_functions: false,
    },
    ModelInfo {
        id: "twofactor_canonical",
        title: "two-factor model in canonical coordinates",
        space: XY,
        params: &[
            ("p1", Kind::Plain),
            ("p2", Kind::Plain),
            ("p3", Kind::Plain),
            ("q1", Kind::Plain),
            ("q2", Kind::Plain),
            ("q3", Kind::Plain),
        ],
        time_functions: false,
    },
    ModelInfo {
        id: "twofactor_q0",
        title: "two-factor model in canonical coordinates with q = 0",
        space: XY,
        params: &[("p1", Kind::Plain), ("p2", Kind::Plain), ("p3", Kind::Plain)],
        time_functions: false,
    },
    ModelInfo {
        id: "twofactor_nonauto",
        title: "nonautonomous two-factor model in canonical coordinates",
        space: XY,
        params: &[
            ("P1", Kind::Plain),
            ("P2", Kind::Plain),
            ("P3", Kind::Plain),
            ("Q1", Kind::Plain),
            ("Q2", Kind::Plain),
            ("Q3", Kind::Plain),
        ],
        time_functions: true,
    },
    ModelInfo {
        id: "bs2d",
        title: "two-dimensional Black-Scholes equation",
        space: &[("S1", Kind::Positive), ("S2", Kind::Positive)],
        params: BS2D,
        time_functions: false,
    },
    ModelInfo {
        id: "bs2d_canonical",
        title: "two-dimensional Black-Scholes equation in canonical coordinates",
        space: XY,
        params: &[("phi1", Kind::Plain), ("phi2", Kind::Plain), ("k", Kind::Plain)],
        time_functions: false,
    },
    ModelInfo {
        id: "bs2d_nonauto",
        title: "nonautonomous two-dimensional Black-Scholes equation in canonical coordinates",
        space: XY,
        params: &[
            ("P1", Kind::Plain),
            ("Q1", Kind::Plain),
            ("Q2", Kind::Plain),
            ("Q3", Kind::Plain),
            ("k", Kind::Plain),
        ],
        time_functions: true,
    },
    ModelInfo {
        id: "bs2d_special",
        title: "two-dimensional Black-Scholes equation with proportional volatilities",
        space: &[("S1", Kind::Positive), ("S2", Kind::Positive)],
        params: &[
            ("sigma0", Kind::Positive),
            ("rho", Kind::Corr("w")),
            ("mu1", Kind::Plain),
            ("mu2", Kind::Plain),
            ("k", Kind::Plain),
        ],
        time_functions: true,
    },
    ModelInfo {
        id: "bs2d_special_nonauto",
        title: "two-dimensional Black-Scholes equation with proportional volatilities, canonical coordinates",
        space: XY,
        params: &[("L1", Kind::Plain), ("L2", Kind::Plain), ("k", Kind::Plain)],
        time_functions: true,
    },
];

pub fn info(id: &str) -> Result<&'static ModelInfo> {
    let id = match id {
        "twofactor_autonomous" => "twofactor_canonical",
        other => other,
    };
    MODELS
        .iter()
        .find(|m| m.id == id)
        .ok_or_else(|| ModelError::UnknownModel(id.to_string()))
}

/// Parameter bindings for one catalog model together with the symbol table they live in.
#[derive(Clone, Debug)]
pub struct Params {
    pub model: &'static str,
    pub table: SymbolTable,
    pub values: BTreeMap<String, Expr>,
    kinds: BTreeMap<String, Kind>,
}

/// Financial parameters are ordinary model parameters under their usual names.
pub type MarketParams = Params;

impl Params {
    /// Every parameter a free symbol; functions of t for the nonautonomous models.
    pub fn symbolic(id: &str) -> Result<Params> {
        let inf = info(id)?;
        Params::declare(inf, inf.time_functions, false)
    }

    /// Every parameter an opaque function of t; σ₁ pinned to 1 where present.
    pub fn time_dependent(id: &str) -> Result<Params> {
        let inf = info(id)?;
        Params::declare(inf, true, true)
    }

    fn declare(inf: &'static ModelInfo, funs: bool, pin_sigma1: bool) -> Result<Params> {
        let mut table = SymbolTable::new();
        for (name, kind) in inf.space {
            match kind {
                Kind::Positive => table.positive(name),
                _ => table.var(name),
            };
        }
        if inf.id == "onefactor" {
            table.var("lnS");
        }
        let mut values = BTreeMap::new();
        let mut kinds = BTreeMap::new();
        for (name, kind) in inf.params {
            kinds.insert(name.to_string(), *kind);
            // the proportional-volatility model keeps σ₀ and ρ constant
            let fun = funs && !(inf.id == "bs2d_special" && matches!(*name, "sigma0" | "rho"));
            match kind {
                Kind::Plain => {
                    let e = if fun { table.fun(name) } else { table.var(name) };
                    values.insert(name.to_string(), e);
                }
                Kind::Positive => {
                    let e = if fun { table.positive_fun(name) } else { table.positive(name) };
                    values.insert(name.to_string(), e);
                }
                Kind::Corr(root) => {
                    let (r, w) = if fun { table.corr_fun(name, root) } else { table.corr(name, root) };
                    values.insert(name.to_string(), r);
                    values.insert(root.to_string(), w);
                }
            }
        }
        let mut p = Params {
            model: inf.id,
            table,
            values,
            kinds,
        };
        if pin_sigma1 && p.kinds.contains_key("sigma1") {
            p.set("sigma1", Expr::one())?;
        }
        Ok(p)
    }

    pub fn get(&self, name: &str) -> Result<&Expr> {
        self.values
            .get(name)
            .ok_or_else(|| ModelError::Params(format!("model `{}` has no parameter `{name}`", self.model)))
    }

    pub fn set(&mut self, name: &str, value: Expr) -> Result<()> {
        let kind = *self
            .kinds
            .get(name)
            .ok_or_else(|| ModelError::Params(format!("model `{}` has no parameter `{name}`", self.model)))?;
        self.table.check(&value)?;
        match kind {
            Kind::Plain => {}
            Kind::Positive => match value.as_rational() {
                Some(c) if !c.is_positive() => {
                    return Err(ModelError::Invariant(format!("{name} must be positive, got {c}")))
                }
                Some(_) => {}
                None => {
                    if value.recip().is_err() {
                        return Err(ModelError::Invariant(format!(
                            "{name} must be a positive constant or a declared positive symbol"
                        )));
                    }
                }
            },
            Kind::Corr(root) => {
                let w = corr_root_of(name, &value)?;
                self.values.insert(root.to_string(), w);
            }
        }
        self.values.insert(name.to_string(), value);
        Ok(())
    }

    /// Parses `text` in the model's symbol table and binds it.
    pub fn bind(&mut self, name: &str, text: &str) -> Result<()> {
        let e = self.table.parse(text)?;
        self.set(name, e)
    }

    /// Declares an extra symbol line `NAME := int(expr)` for later bindings.
    pub fn declare_anti(&mut self, line: &str) -> Result<Expr> {
        Ok(self.table.declare(line)?)
    }

    pub fn is_constant_valued(&self) -> bool {
        self.values
            .values()
            .all(|e| e.atoms().iter().all(|a| !a.depends_on_time()))
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.kinds.keys()
    }
}

fn corr_root_of(name: &str, rho: &Expr) -> Result<Expr> {
    if let Some(c) = rho.as_rational() {
        if c.abs() >= Q::one() {
            return Err(ModelError::Invariant(format!("|{name}| < 1 required, got {c}")));
        }
        return Ok(sqrt_rational(&(Q::one() - &c * &c))?);
    }
    if let Some((c, m)) = rho.as_monomial() {
        if c.is_one() && m.exp.is_none() && m.pows.len() == 1 && m.pows[0].1 == 1 {
            if let Some(w) = m.pows[0].0.corr_root() {
                return Ok(Expr::atom(w));
            }
        }
    }
    Err(ModelError::Invariant(format!(
        "{name} must be a rational in (-1, 1) or a declared correlation symbol"
    )))
}

fn half() -> Q {
    qr(1, 2)
}

fn atom_of(t: &SymbolTable, name: &str) -> Atom {
    t.lookup(name).cloned().unwrap_or_else(|| Atom::var(name))
}

fn diag(a: Expr, b: Expr) -> Vec<Vec<Expr>> {
    vec![vec![a, Expr::zero()], vec![Expr::zero(), b]]
}

fn build(p: &Params, a: Vec<Vec<Expr>>, b: Vec<Expr>, source: Expr, s: Q) -> EvolutionPDE {
    let inf = info(p.model).expect("params are built from catalog entries");
    let space: Vec<Atom> = inf.space.iter().map(|(n, _)| atom_of(&p.table, n)).collect();
    let logs = if p.model == "onefactor" {
        vec![(atom_of(&p.table, "lnS"), space[0].clone())]
    } else {
        vec![]
    };
    EvolutionPDE {
        id: p.model.to_string(),
        space,
        a,
        b,
        source,
        s,
        logs,
        symbols: p.table.clone(),
    }
}

/// The catalog equation for `p.model` with the bound parameters.
pub fn catalog(p: &Params) -> Result<EvolutionPDE> {
    let g = |n: &str| p.get(n).cloned();
    let x = Expr::atom(Atom::var("x"));
    let y = Expr::atom(Atom::var("y"));
    let pde = match p.model {
        "heat1d" => build(p, vec![vec![Expr::one()]], vec![Expr::zero()], Expr::zero(), q(-1)),
        "heat2d" => build(
            p,
            diag(Expr::one(), Expr::one()),
            vec![Expr::zero(), Expr::zero()],
            Expr::zero(),
            q(-1),
        ),
        "bs1d" => {
            let s = Expr::atom(atom_of(&p.table, "S"));
            let (sig, r) = (g("sigma")?, g("r")?);
            build(
                p,
                vec![vec![(&sig * &sig * &s * &s).scale(&half())]],
                vec![&r * &s],
                -r,
                q(1),
            )
        }
        "onefactor" => {
            let s = Expr::atom(atom_of(&p.table, "S"));
            let ln = Expr::atom(atom_of(&p.table, "lnS"));
            let (sig, kap, mu, lam) = (g("sigma")?, g("kappa")?, g("mu")?, g("lambda")?);
            build(
                p,
                vec![vec![(&sig * &sig * &s * &s).scale(&half())]],
                vec![kap * (mu - lam - ln) * &s],
                Expr::zero(),
                q(-1),
            )
        }
        "twofactor" => {
            let s = Expr::atom(atom_of(&p.table, "S"));
            let d = Expr::atom(atom_of(&p.table, "delta"));
            let (s1, s2, rho) = (g("sigma1")?, g("sigma2")?, g("rho")?);
            let (r, kap, al, lam) = (g("r")?, g("kappa")?, g("alpha")?, g("lambda")?);
            let a11 = (&s1 * &s1 * &s * &s).scale(&half());
            let a12 = (&rho * &s1 * &s2 * &s).scale(&half());
            let a22 = (&s2 * &s2).scale(&half());
            build(
                p,
                vec![vec![a11, a12.clone()], vec![a12, a22]],
                vec![(r - &d) * &s, kap * (al - &d) - lam],
                Expr::zero(),
                q(-1),
            )
        }
        "twofactor_canonical" | "twofactor_q0" | "twofactor_nonauto" => {
            let (p1, p2, p3) = if p.model == "twofactor_nonauto" {
                (g("P1")?, g("P2")?, g("P3")?)
            } else {
                (g("p1")?, g("p2")?, g("p3")?)
            };
            let (q1, q2, q3) = match p.model {
                "twofactor_q0" => (Expr::zero(), Expr::zero(), Expr::zero()),
                "twofactor_nonauto" => (g("Q1")?, g("Q2")?, g("Q3")?),
                _ => (g("q1")?, g("q2")?, g("q3")?),
            };
            build(
                p,
                diag(Expr::one(), Expr::one()),
                vec![-(p1 * &x + p2 * &y + p3), -(q1 * &x + q2 * &y + q3)],
                Expr::zero(),
                q(-2),
            )
        }
        "bs2d" | "bs2d_special" => {
            let s1a = Expr::atom(atom_of(&p.table, "S1"));
            let s2a = Expr::atom(atom_of(&p.table, "S2"));
            let (sig1, sig2) = if p.model == "bs2d" {
                (g("sigma1")?, g("sigma2")?)
            } else {
                (Expr::one(), g("sigma0")?)
            };
            let (rho, mu1, mu2, k) = (g("rho")?, g("mu1")?, g("mu2")?, g("k")?);
            let a11 = (&sig1 * &sig1 * &s1a * &s1a).scale(&half());
            let a12 = (&rho * &sig1 * &sig2 * &s1a * &s2a).scale(&half());
            let a22 = (&sig2 * &sig2 * &s2a * &s2a).scale(&half());
            build(
                p,
                vec![vec![a11, a12.clone()], vec![a12, a22]],
                vec![-(mu1 * &s1a), -(mu2 * &s2a)],
                -k,
                q(1),
            )
        }
        "bs2d_canonical" => build(
            p,
            diag(Expr::one(), Expr::one()),
            vec![-g("phi1")?, -g("phi2")?],
            -g("k")?.scale(&q(2)),
            q(2),
        ),
        "bs2d_nonauto" => build(
            p,
            diag(Expr::one(), Expr::one()),
            vec![-g("P1")?, -(g("Q1")? * &x + g("Q2")? * &y + g("Q3")?)],
            -g("k")?.scale(&q(2)),
            q(2),
        ),
        "bs2d_special_nonauto" => build(
            p,
            diag(Expr::one(), Expr::one()),
            vec![-g("L1")?, -g("L2")?],
            -g("k")?.scale(&q(2)),
            q(2),
        ),
        other => return Err(ModelError::UnknownModel(other.to_string())),
    };
    Ok(pde)
}

/// Catalog equation with every parameter left symbolic.
pub fn catalog_symbolic(id: &str) -> Result<EvolutionPDE> {
    catalog(&Params::symbolic(id)?)
}

fn require_constant(mp: &Params, what: &str) -> Result<()> {
    if mp.is_constant_valued() {
        Ok(())
    } else {
        Err(ModelError::Params(format!("{what} needs constant parameters")))
    }
}

fn require_unit_sigma1(mp: &Params) -> Result<()> {
    match mp.get("sigma1")?.as_rational() {
        Some(c) if c.is_one() => Ok(()),
        _ => Err(ModelError::Params("sigma1 must be normalized to 1".into())),
    }
}

fn dt(e: &Expr) -> Result<Expr> {
    Ok(e.diff(&Atom::t())?)
}

/// (p₁, p₂, p₃, q₁, q₂, q₃) of the canonical two-factor equation.
pub fn two_factor_params(mp: &MarketParams) -> Result<[Expr; 6]> {
    require_constant(mp, "two_factor_params")?;
    let g = |n: &str| mp.get(n).cloned();
    let (s1, s2, rho, w) = (g("sigma1")?, g("sigma2")?, g("rho")?, g("w")?);
    let (r, kap, al, lam) = (g("r")?, g("kappa")?, g("alpha")?, g("lambda")?);
    let is1 = s1.recip()?;
    let iw = w.recip()?;
    let two = q(2);
    let p1 = (&rho * &s2 * &is1).scale(&two);
    let p2 = (&w * &s2 * &is1).scale(&two);
    let p3 = (&s1 * &s1 - r.scale(&two)) * &is1;
    let drift = &kap * &s1 - &rho * &s2;
    let q1 = (&rho * &drift * &is1 * &iw).scale(&two);
    let q2 = (&drift * &is1).scale(&two);
    let num = &s1 * &s1 * &s2 * &rho - (&s2 * &rho * &r).scale(&two) + (&s1 * &kap * &al).scale(&two)
        - (&s1 * &lam).scale(&two);
    let q3 = -(num * &is1 * s2.recip()? * &iw);
    Ok([p1, p2, p3, q1, q2, q3])
}

/// (P₁, P₂, P₃, Q₁, Q₂, Q₃) of the nonautonomous two-factor equation, σ₁ ≡ 1.
pub fn two_factor_nonauto_coeffs(mp: &MarketParams) -> Result<[Expr; 6]> {
    require_unit_sigma1(mp)?;
    let g = |n: &str| mp.get(n).cloned();
    let (s2, rho, w) = (g("sigma2")?, g("rho")?, g("w")?);
    let (r, kap, al, lam) = (g("r")?, g("kappa")?, g("alpha")?, g("lambda")?);
    let two = q(2);
    let is2 = s2.recip()?;
    let iw = w.recip()?;
    let rs = &rho * &s2;
    let p1 = rs.scale(&two);
    let p2 = (&s2 * &w).scale(&two);
    let p3 = Expr::one() - r.scale(&two);
    let q1 = -((&rs * &rs + dt(&rs)? - &kap * &rs).scale(&two) * &is2 * &iw);
    let q2 = (kap.clone() - &rs - dt(&s2)? * &is2 + &rho * dt(&rho)? * iw.pow(2)?).scale(&two);
    let num = &s2 * (&rho - (&r * &rho).scale(&two)) + (&kap * &al).scale(&two) - lam.scale(&two);
    let q3 = -(num * &is2 * &iw);
    Ok([p1, p2, p3, q1, q2, q3])
}

/// (φ₁, φ₂) of the canonical two-dimensional Black-Scholes equation.
pub fn bs2d_params(mp: &MarketParams) -> Result<[Expr; 2]> {
    require_constant(mp, "bs2d_params")?;
    let g = |n: &str| mp.get(n).cloned();
    let (s1, s2, rho, w, mu1, mu2) = (g("sigma1")?, g("sigma2")?, g("rho")?, g("w")?, g("mu1")?, g("mu2")?);
    for (n, s) in [("sigma1", &s1), ("sigma2", &s2)] {
        if s.is_zero() {
            return Err(ModelError::Invariant(format!("{n} must be nonzero")));
        }
    }
    let two = q(2);
    let is1 = s1.recip()?;
    let phi1 = (&s1 * &s1 + mu1.scale(&two)) * &is1;
    let num = &s1 * &s2 * &s2 - &rho * &s1 * &s1 * &s2 - (&mu1 * &rho * &s2).scale(&two) + (&mu2 * &s1).scale(&two);
    let phi2 = num * &is1 * s2.recip()? * w.recip()?;
    Ok([phi1, phi2])
}

/// (P₁, Q₁, Q₂, Q₃) of the nonautonomous two-dimensional Black-Scholes equation, σ₁ ≡ 1.
pub fn bs2d_nonauto_coeffs(mp: &MarketParams) -> Result<[Expr; 4]> {
    require_unit_sigma1(mp)?;
    let g = |n: &str| mp.get(n).cloned();
    let (s2, rho, w, mu1, mu2) = (g("sigma2")?, g("rho")?, g("w")?, g("mu1")?, g("mu2")?);
    let two = q(2);
    let is2 = s2.recip()?;
    let iw = w.recip()?;
    let p1 = Expr::one() + mu1.scale(&two);
    let q1 = (dt(&(&rho * &s2))? * &is2 * &iw).scale(&two);
    let ds2 = dt(&s2)?;
    let q2 = -((&ds2 * &rho * &rho + &s2 * &rho * dt(&rho)? - &ds2).scale(&two) * &is2 * iw.pow(2)?);
    let q3 = (&s2 * (&s2 - &rho - (&mu1 * &rho).scale(&two)) + mu2.scale(&two)) * &is2 * &iw;
    Ok([p1, q1, q2, q3])
}

/// (Λ₁, Λ₂) for the proportional-volatility model (σ₁ ≡ 1, σ₂ = σ₀, ρ constant).
pub fn special_lambdas(mp: &MarketParams) -> Result<[Expr; 2]> {
    let g = |n: &str| mp.get(n).cloned();
    let (s0, rho, w, mu1, mu2) = (g("sigma0")?, g("rho")?, g("w")?, g("mu1")?, g("mu2")?);
    let two = q(2);
    let l1 = Expr::one() + mu1.scale(&two);
    let l2 = (&s0 * (&s0 - &rho - (&mu1 * &rho).scale(&two)) + mu2.scale(&two)) * s0.recip()? * w.recip()?;
    Ok([l1, l2])
}

/// Invertible change of variables. Old spatial coordinates are written as
/// functions of the old time t and the new spatial coordinates; old time is
/// `time_scale`·(new time); the old dependent variable is `multiplier`·v.
#[derive(Clone, Debug)]
pub struct PointTransformation {
    pub name: String,
    pub time_scale: Q,
    pub old: Vec<(Atom, Expr)>,
    pub new_space: Vec<Atom>,
    pub multiplier: Expr,
    /// New spatial coordinates as functions of (t, old coordinates), when known.
    pub inverse: Option<Vec<Expr>>,
}

fn no_time_functions(e: &Expr, what: &str) -> Result<()> {
    if e.atoms().iter().any(|a| a.depends_on_time() && !a.is_time()) {
        return Err(ModelError::Unsupported(format!(
            "rescaling time in {what} that contains functions of t"
        )));
    }
    Ok(())
}

fn rescale_time(e: &Expr, c: &Q, what: &str) -> Result<Expr> {
    if c.is_one() || !e.contains(&Atom::t()) && e.atoms().iter().all(|a| !a.depends_on_time()) {
        return Ok(e.clone());
    }
    no_time_functions(e, what)?;
    Ok(e.subs1(&Atom::t(), &Expr::atom(Atom::t()).scale(c))?)
}

impl PointTransformation {
    pub fn identity(space: &[Atom]) -> PointTransformation {
        PointTransformation {
            name: "identity".into(),
            time_scale: Q::one(),
            old: space.iter().map(|a| (a.clone(), Expr::atom(a.clone()))).collect(),
            new_space: space.to_vec(),
            multiplier: Expr::one(),
            inverse: Some(space.iter().map(|a| Expr::atom(a.clone())).collect()),
        }
    }

    /// `self ∘ first`: pull back through `first`, then through `self`.
    pub fn after(&self, first: &PointTransformation) -> Result<PointTransformation> {
        let c2 = &first.time_scale;
        let mut b = Bindings::new();
        for a in &first.new_space {
            let e = self
                .old
                .iter()
                .find(|(o, _)| o == a)
                .map(|(_, e)| e)
                .ok_or_else(|| ModelError::Params(format!("composition: no map for `{a}`")))?;
            b.insert(a.clone(), rescale_time(e, &c2.recip(), "a composed map")?);
        }
        let old = first
            .old
            .iter()
            .map(|(a, e)| Ok((a.clone(), e.subs(&b)?)))
            .collect::<Result<Vec<_>>>()?;
        let multiplier = first.multiplier.subs(&b)? * rescale_time(&self.multiplier, &c2.recip(), "a multiplier")?;
        let inverse = match (&self.inverse, &first.inverse) {
            (Some(si), Some(fi)) => {
                let mut b2 = Bindings::new();
                for (a, e) in first.new_space.iter().zip(fi) {
                    b2.insert(a.clone(), e.clone());
                }
                let mut out = Vec::new();
                for e in si {
                    out.push(rescale_time(e, &c2.recip(), "an inverse map")?.subs(&b2)?);
                }
                Some(out)
            }
            _ => None,
        };
        Ok(PointTransformation {
            name: format!("{} after {}", self.name, first.name),
            time_scale: c2 * &self.time_scale,
            old,
            new_space: self.new_space.clone(),
            multiplier,
            inverse,
        })
    }

    pub fn inverse(&self) -> Result<PointTransformation> {
        let inv = self
            .inverse
            .as_ref()
            .ok_or_else(|| ModelError::Unsupported(format!("{} has no inverse maps", self.name)))?;
        let c = &self.time_scale;
        let mut b = Bindings::new();
        for (a, e) in self.new_space.iter().zip(inv) {
            b.insert(a.clone(), e.clone());
        }
        let old = self
            .new_space
            .iter()
            .zip(inv)
            .map(|(a, e)| Ok((a.clone(), rescale_time(e, c, "an inverse map")?)))
            .collect::<Result<Vec<_>>>()?;
        let m_old = self.multiplier.subs(&b)?.recip().map_err(|_| {
            ModelError::NotInvertible(format!("multiplier {} is not an invertible monomial", self.multiplier))
        })?;
        Ok(PointTransformation {
            name: format!("inverse of {}", self.name),
            time_scale: c.recip(),
            old,
            new_space: self.old.iter().map(|(a, _)| a.clone()).collect(),
            multiplier: rescale_time(&m_old, c, "a multiplier")?,
            inverse: Some(
                self.old
                    .iter()
                    .map(|(_, e)| rescale_time(e, c, "a map"))
                    .collect::<Result<Vec<_>>>()?,
            ),
        })
    }

    /// Checks old(new(old)) = old and new(old(new)) = new symbolically.
    pub fn inverse_is_exact(&self) -> Result<bool> {
        let Some(inv) = &self.inverse else {
            return Ok(false);
        };
        let mut to_new = Bindings::new();
        for (a, e) in self.new_space.iter().zip(inv) {
            to_new.insert(a.clone(), e.clone());
        }
        let mut to_old = Bindings::new();
        for (a, e) in &self.old {
            to_old.insert(a.clone(), e.clone());
        }
        for (a, e) in &self.old {
            if !(e.subs(&to_new)? - Expr::atom(a.clone())).is_zero() {
                return Ok(false);
            }
        }
        for (a, e) in self.new_space.iter().zip(inv) {
            if !(e.subs(&to_old)? - Expr::atom(a.clone())).is_zero() {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Old coordinates S = exp(σ₁x), δ = σ₂(ρx + wy).
pub fn two_factor_transform(mp: &MarketParams) -> Result<PointTransformation> {
    let g = |n: &str| mp.get(n).cloned();
    let (s1, s2, rho, w) = (g("sigma1")?, g("sigma2")?, g("rho")?, g("w")?);
    let (x, y) = (Expr::atom(Atom::var("x")), Expr::atom(Atom::var("y")));
    Ok(PointTransformation {
        name: "log-price coordinates".into(),
        time_scale: Q::one(),
        old: vec![
            (atom_of(&mp.table, "S"), Expr::exp(&(&s1 * &x))),
            (atom_of(&mp.table, "delta"), &s2 * (&rho * &x + &w * &y)),
        ],
        new_space: vec![Atom::var("x"), Atom::var("y")],
        multiplier: Expr::one(),
        inverse: None,
    })
}

/// Old coordinates S₁ = exp(σ₁x), S₂ = exp(σ₂(ρx + wy)).
pub fn bs2d_transform(mp: &MarketParams) -> Result<PointTransformation> {
    let g = |n: &str| mp.get(n).cloned();
    let (s1, s2) = if mp.model == "bs2d_special" {
        (Expr::one(), g("sigma0")?)
    } else {
        (g("sigma1")?, g("sigma2")?)
    };
    let (rho, w) = (g("rho")?, g("w")?);
    let (x, y) = (Expr::atom(Atom::var("x")), Expr::atom(Atom::var("y")));
    Ok(PointTransformation {
        name: "log-price coordinates".into(),
        time_scale: Q::one(),
        old: vec![
            (atom_of(&mp.table, "S1"), Expr::exp(&(&s1 * &x))),
            (atom_of(&mp.table, "S2"), Expr::exp(&(&s2 * (&rho * &x + &w * &y)))),
        ],
        new_space: vec![Atom::var("x"), Atom::var("y")],
        multiplier: Expr::one(),
        inverse: None,
    })
}

fn log_of(e: &Expr) -> Result<Expr> {
    if let Some((c, m)) = e.as_monomial() {
        if c.is_one() && m.pows.is_empty() {
            if let Some(p) = m.exp {
                return Ok(p);
            }
        }
    }
    Err(ModelError::Unsupported(format!("logarithm of {e}")))
}

fn inverse_matrix(j: &[Vec<Expr>]) -> Result<Vec<Vec<Expr>>> {
    let n = j.len();
    let det = match n {
        0 => Expr::one(),
        1 => j[0][0].clone(),
        2 => &j[0][0] * &j[1][1] - &j[0][1] * &j[1][0],
        _ => return Err(ModelError::Unsupported("more than two space dimensions".into())),
    };
    if det.is_zero() {
        return Err(ModelError::NotInvertible("Jacobian vanishes identically".into()));
    }
    let di = det
        .recip()
        .map_err(|_| ModelError::NotInvertible(format!("Jacobian {det} is not an invertible monomial")))?;
    Ok(match n {
        0 => vec![],
        1 => vec![vec![di]],
        _ => vec![
            vec![&j[1][1] * &di, -(&j[0][1] * &di)],
            vec![-(&j[1][0] * &di), &j[0][0] * &di],
        ],
    })
}

/// Pullback of Θ through `tr`, renormalized to constant u_t coefficient
/// and unit leading principal coefficient when that is a constant.
pub fn apply_transformation(pde: &EvolutionPDE, tr: &PointTransformation) -> Result<EvolutionPDE> {
    let n = pde.dim();
    if tr.old.len() != n || tr.new_space.len() != n {
        return Err(ModelError::Params(format!(
            "transformation `{}` has the wrong number of coordinates",
            tr.name
        )));
    }
    let mut binds = Bindings::new();
    let mut xs = Vec::with_capacity(n);
    for a in &pde.space {
        let e = tr
            .old
            .iter()
            .find(|(o, _)| o == a)
            .map(|(_, e)| e.clone())
            .ok_or_else(|| ModelError::Params(format!("transformation `{}` does not map `{a}`", tr.name)))?;
        binds.insert(a.clone(), e.clone());
        xs.push(e);
    }
    for (l, v) in &pde.logs {
        let k = pde.space.iter().position(|a| a == v).expect("log atoms refer to space variables");
        binds.insert(l.clone(), log_of(&xs[k])?);
    }
    let mut slots = Vec::with_capacity(n);
    for a in &tr.new_space {
        match jet::slot_of(a) {
            Some(k) if k > 0 && !slots.contains(&k) => slots.push(k),
            _ => return Err(ModelError::Params(format!("new coordinate `{a}` must be x or y"))),
        }
    }
    let jac: Vec<Vec<Expr>> = xs
        .iter()
        .map(|xi| tr.new_space.iter().map(|z| xi.diff(z)).collect::<std::result::Result<_, _>>())
        .collect::<std::result::Result<_, _>>()?;
    let jinv = inverse_matrix(&jac)?;
    let dtx: Vec<Expr> = xs.iter().map(dt).collect::<Result<_>>()?;
    // velocity of the new coordinates at fixed old coordinates
    let vel: Vec<Expr> = (0..n)
        .map(|j| -(0..n).map(|i| &jinv[j][i] * &dtx[i]).sum::<Expr>())
        .collect();
    let minv = tr.multiplier.recip().map_err(|_| {
        ModelError::NotInvertible(format!("multiplier {} is not an invertible monomial", tr.multiplier))
    })?;
    let dnew = |f: &Expr, j: usize| jet::total_d_wrt(f, &tr.new_space[j], slots[j]);
    let dold = |f: &Expr, i: usize| -> Result<Expr> {
        let mut out = Expr::zero();
        for j in 0..n {
            out += &(&jinv[j][i] * dnew(f, j)?);
        }
        Ok(out)
    };
    let uu = &tr.multiplier * jet::u();
    let first: Vec<Expr> = (0..n).map(|i| dold(&uu, i)).collect::<Result<_>>()?;
    let mut theta = pde.source.subs(&binds)? * &uu;
    let mut tpart = jet::total_d(&uu, 0)?;
    for j in 0..n {
        tpart += &(&vel[j] * dnew(&uu, j)?);
    }
    theta += &tpart.scale(&pde.s);
    for i in 0..n {
        theta += &(pde.b[i].subs(&binds)? * &first[i]);
        for k in 0..n {
            let a = pde.a[i][k].subs(&binds)?;
            if !a.is_zero() {
                theta += &(a * dold(&first[k], i)?);
            }
        }
    }
    let theta = theta * &minv;

    // read off coefficients in the new jets
    let mut a = vec![vec![Expr::zero(); n]; n];
    let mut b = vec![Expr::zero(); n];
    let source = theta.coeff(&Atom::u(), 1);
    let s_expr = theta.coeff(&Atom::Jet([1, 0, 0]), 1);
    let mut rebuilt = &source * jet::u() + &s_expr * jet::jet(1, 0, 0);
    for j in 0..n {
        let mut e = [0u8; 3];
        e[slots[j]] = 1;
        b[j] = theta.coeff(&Atom::Jet(e), 1);
        rebuilt += &(&b[j] * Expr::atom(Atom::Jet(e)));
        for k in j..n {
            let mut e2 = [0u8; 3];
            e2[slots[j]] += 1;
            e2[slots[k]] += 1;
            let c = theta.coeff(&Atom::Jet(e2), 1);
            rebuilt += &(&c * Expr::atom(Atom::Jet(e2)));
            if j == k {
                a[j][j] = c;
            } else {
                let h = c.scale(&half());
                a[j][k] = h.clone();
                a[k][j] = h;
            }
        }
    }
    if !(theta - rebuilt).is_zero() {
        return Err(ModelError::Unsupported("pullback is not a second-order evolution operator".into()));
    }

    let mut out = EvolutionPDE {
        id: format!("{}:{}", pde.id, tr.name),
        space: tr.new_space.clone(),
        a,
        b,
        source,
        s: Q::zero(),
        logs: vec![],
        symbols: pde.symbols.clone(),
    };
    out.symbols.adopt_all(&tr.multiplier);
    for (_, e) in &tr.old {
        out.symbols.adopt_all(e);
    }

    // time rescale: ∂_t(old) = (1/c) ∂_T
    let c = tr.time_scale.clone();
    if c.is_zero() {
        return Err(ModelError::NotInvertible("zero time scale".into()));
    }
    out = out.map_coefficients(|e| rescale_time(e, &c, "the pulled-back coefficients"))?;
    let s_expr = rescale_time(&s_expr, &c, "the u_t coefficient")?.scale(&c.recip());

    // renormalize
    let (s0, m) = s_expr
        .as_monomial()
        .ok_or_else(|| ModelError::NonConstantTime(s_expr.to_string()))?;
    let mut out = if m.is_one() {
        out
    } else {
        let mi = Expr::from_terms([(m.clone(), Q::one())])
            .recip()
            .map_err(|_| ModelError::NonConstantTime(s_expr.to_string()))?;
        out.map_coefficients(|e| Ok(e * &mi))?
    };
    out.s = s0;
    if let Some(lead) = out.a[0].first().and_then(|e| e.as_rational()) {
        if !lead.is_zero() && !lead.is_one() {
            let k = lead.recip();
            out = out.map_coefficients(|e| Ok(e.scale(&k)))?;
            out.s *= k;
        }
    }
    Ok(out)
}
