use std::collections::BTreeMap;

use num_traits::One;

use super::core::{sqrt_rational, Atom, Expr, Mono, RootDef, Q};
use super::ExprError;

pub const DEFAULT_ORDER_CAP: u8 = 3;

pub type Bindings = BTreeMap<Atom, Expr>;

/// Partial derivative with the default derivative-order cap.
pub fn diff(e: &Expr, v: &Atom) -> Result<Expr, ExprError> {
    diff_capped(e, v, DEFAULT_ORDER_CAP)
}

pub fn diff_capped(e: &Expr, v: &Atom, cap: u8) -> Result<Expr, ExprError> {
    let mut parts = Vec::new();
    for (m, c) in e.terms() {
        if let Some(p) = &m.exp {
            let dp = diff_capped(p, v, cap)?;
            if !dp.is_zero() {
                parts.push(Expr::from_terms([(m.clone(), c.clone())]) * dp);
            }
        }
        for (i, (a, k)) in m.pows.iter().enumerate() {
            let da = diff_atom(a, v, cap)?;
            if da.is_zero() {
                continue;
            }
            let mut lower = m.clone();
            lower.pows[i].1 -= 1;
            if lower.pows[i].1 == 0 {
                lower.pows.remove(i);
            }
            parts.push(Expr::from_terms([(lower, c * Q::from_integer((*k).into()))]) * da);
        }
    }
    Ok(parts.into_iter().sum())
}

fn diff_atom(a: &Atom, v: &Atom, cap: u8) -> Result<Expr, ExprError> {
    if a == v {
        return Ok(Expr::one());
    }
    match a {
        Atom::Fun(s, k) if v.is_time() => {
            if *k >= cap {
                return Err(ExprError::OrderCap {
                    name: s.name.to_string(),
                    cap,
                });
            }
            Ok(Expr::atom(Atom::Fun(s.clone(), k + 1)))
        }
        Atom::Anti(def) if v.is_time() => Ok(def.integrand.clone()),
        Atom::Root(r) => match &**r {
            RootDef::Corr { base, .. } => {
                let db = diff_atom(base, v, cap)?;
                if db.is_zero() {
                    return Ok(Expr::zero());
                }
                let winv = Expr::atom(a.clone()).recip()?;
                Ok(-(Expr::atom(base.clone()) * db * winv))
            }
            RootDef::Int(_) => Ok(Expr::zero()),
        },
        _ => Ok(Expr::zero()),
    }
}

/// Simultaneous substitution followed by canonicalization.
///
/// A binding for an opaque function `f` also rewrites its derivative atoms
/// `f'`, `f''`, ... by differentiating the bound expression.
pub fn substitute(e: &Expr, b: &Bindings) -> Result<Expr, ExprError> {
    if b.is_empty() {
        return Ok(e.clone());
    }
    let mut cache: BTreeMap<Atom, Expr> = BTreeMap::new();
    subst_inner(e, b, &mut cache)
}

fn subst_inner(e: &Expr, b: &Bindings, cache: &mut BTreeMap<Atom, Expr>) -> Result<Expr, ExprError> {
    let mut parts = Vec::with_capacity(e.len());
    for (m, c) in e.terms() {
        let mut term = Expr::constant(c.clone());
        let mut untouched = Mono::one();
        for (a, k) in &m.pows {
            let r = resolve(a, b, cache)?;
            match r {
                None => untouched.pows.push((a.clone(), *k)),
                Some(val) => term = term * val.pow(*k)?,
            }
        }
        if let Some(p) = &m.exp {
            let np = subst_inner(p, b, cache)?;
            term = term * Expr::exp(&np);
        }
        if !untouched.is_one() {
            term = term * Expr::from_terms([(untouched, Q::one())]);
        }
        parts.push(term);
    }
    Ok(parts.into_iter().sum())
}

fn resolve(a: &Atom, b: &Bindings, cache: &mut BTreeMap<Atom, Expr>) -> Result<Option<Expr>, ExprError> {
    if let Some(v) = cache.get(a) {
        return Ok(Some(v.clone()));
    }
    let out = match a {
        _ if b.contains_key(a) => Some(b[a].clone()),
        Atom::Fun(s, k) if *k > 0 => match b.get(&Atom::Fun(s.clone(), 0)) {
            Some(base) => {
                let mut d = base.clone();
                for _ in 0..*k {
                    d = diff_capped(&d, &Atom::t(), u8::MAX)?;
                }
                Some(d)
            }
            None => None,
        },
        Atom::Root(r) => match &**r {
            RootDef::Corr { base, .. } => match resolve(base, b, cache)? {
                None => None,
                Some(val) => {
                    if let Some(rv) = val.as_rational() {
                        Some(sqrt_rational(&(Q::one() - &rv * &rv))?)
                    } else if let Some((c, m)) = val.as_monomial() {
                        let renamed = (c.is_one() && m.exp.is_none() && m.pows.len() == 1 && m.pows[0].1 == 1)
                            .then(|| m.pows[0].0.corr_root())
                            .flatten();
                        match renamed {
                            Some(w) => Some(Expr::atom(w)),
                            None => {
                                return Err(ExprError::Substitution(format!(
                                    "root {} of a non-rational binding",
                                    a.name()
                                )))
                            }
                        }
                    } else {
                        return Err(ExprError::Substitution(format!(
                            "root {} of a non-rational binding",
                            a.name()
                        )));
                    }
                }
            },
            RootDef::Int(_) => None,
        },
        Atom::Anti(def) => {
            for (key, val) in b.iter() {
                let time_moved = key.is_time() && *val != Expr::atom(Atom::t());
                let base_hit = match key {
                    Atom::Fun(s, 0) => def
                        .integrand
                        .atoms()
                        .iter()
                        .any(|x| matches!(x, Atom::Fun(s2, _) if s2 == s)),
                    _ => def.integrand.contains(key),
                };
                if time_moved || base_hit {
                    return Err(ExprError::Substitution(format!(
                        "binding `{}` reaches the integrand of antiderivative {}",
                        key.name(),
                        def.name
                    )));
                }
            }
            None
        }
        _ => None,
    };
    if let Some(v) = &out {
        cache.insert(a.clone(), v.clone());
    }
    Ok(out)
}

impl Expr {
    pub fn diff(&self, v: &Atom) -> Result<Expr, ExprError> {
        diff(self, v)
    }

    pub fn subs(&self, b: &Bindings) -> Result<Expr, ExprError> {
        substitute(self, b)
    }

    pub fn subs1(&self, a: &Atom, val: &Expr) -> Result<Expr, ExprError> {
        let mut b = Bindings::new();
        b.insert(a.clone(), val.clone());
        substitute(self, &b)
    }

    /// Sets every derivative atom of the listed functions to zero.
    pub fn freeze_time(&self) -> Result<Expr, ExprError> {
        let mut b = Bindings::new();
        for a in self.atoms() {
            if let Atom::Fun(_, k) = a {
                if k > 0 {
                    b.insert(a.clone(), Expr::zero());
                }
            }
        }
        substitute(self, &b)
    }
}
