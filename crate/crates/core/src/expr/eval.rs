use std::collections::HashMap;

use num_traits::ToPrimitive;

use super::core::{Atom, Expr, RootDef};
use super::ExprError;

pub type Env = HashMap<String, f64>;

fn atom_value(a: &Atom, env: &Env) -> Result<f64, ExprError> {
    if let Some(v) = env.get(&a.name()) {
        return Ok(*v);
    }
    match a {
        Atom::Root(r) => match &**r {
            RootDef::Corr { base, .. } => {
                let b = atom_value(base, env)?;
                let s = 1.0 - b * b;
                if s < 0.0 {
                    return Err(ExprError::NegativeRoot(format!("1-{}^2", base.name())));
                }
                Ok(s.sqrt())
            }
            RootDef::Int(n) => Ok(n.to_f64().unwrap_or(f64::NAN).sqrt()),
        },
        _ => Err(ExprError::Unbound(a.name())),
    }
}

/// Floating-point evaluation; `env` is keyed by printed atom names (`P1'`, `w`, `I1`, ...).
pub fn eval_numeric(e: &Expr, env: &Env) -> Result<f64, ExprError> {
    let mut sum = 0.0;
    for (m, c) in e.terms() {
        let mut v = c.to_f64().unwrap_or(f64::NAN);
        for (a, k) in &m.pows {
            let x = atom_value(a, env)?;
            if *k < 0 && x == 0.0 {
                return Err(ExprError::DivisionByZero);
            }
            v *= x.powi(*k);
        }
        if let Some(p) = &m.exp {
            v *= eval_numeric(p, env)?.exp();
        }
        sum += v;
    }
    Ok(sum)
}

#[derive(Clone, Debug)]
enum Factor {
    Slot(usize),
    CorrOf(usize),
}

#[derive(Clone, Debug)]
struct CTerm {
    coef: f64,
    factors: Vec<(Factor, i32)>,
    exp: Option<Box<Compiled>>,
}

/// An expression lowered to slot-indexed floating-point evaluation.
#[derive(Clone, Debug)]
pub struct Compiled {
    terms: Vec<CTerm>,
}

impl Compiled {
    /// `slots` lists the printed atom names in slot order.
    pub fn new(e: &Expr, slots: &[String]) -> Result<Compiled, ExprError> {
        let find = |a: &Atom| slots.iter().position(|s| *s == a.name());
        let mut terms = Vec::with_capacity(e.len());
        for (m, c) in e.terms() {
            let mut coef = c.to_f64().unwrap_or(f64::NAN);
            let mut factors = Vec::new();
            for (a, k) in &m.pows {
                if let Some(i) = find(a) {
                    factors.push((Factor::Slot(i), *k));
                    continue;
                }
                match a {
                    Atom::Root(r) => match &**r {
                        RootDef::Int(n) => coef *= n.to_f64().unwrap_or(f64::NAN).sqrt().powi(*k),
                        RootDef::Corr { base, .. } => {
                            let i = find(base).ok_or_else(|| ExprError::Unbound(base.name()))?;
                            factors.push((Factor::CorrOf(i), *k));
                        }
                    },
                    _ => return Err(ExprError::Unbound(a.name())),
                }
            }
            let exp = match &m.exp {
                Some(p) => Some(Box::new(Compiled::new(p, slots)?)),
                None => None,
            };
            terms.push(CTerm { coef, factors, exp });
        }
        Ok(Compiled { terms })
    }

    pub fn eval(&self, vals: &[f64]) -> f64 {
        let mut sum = 0.0;
        for t in &self.terms {
            let mut v = t.coef;
            for (f, k) in &t.factors {
                let x = match f {
                    Factor::Slot(i) => vals[*i],
                    Factor::CorrOf(i) => (1.0 - vals[*i] * vals[*i]).sqrt(),
                };
                v *= if *k == 1 { x } else { x.powi(*k) };
            }
            if let Some(p) = &t.exp {
                v *= p.eval(vals).exp();
            }
            sum += v;
        }
        sum
    }

    pub fn is_constant_zero(&self) -> bool {
        self.terms.is_empty()
    }
}
