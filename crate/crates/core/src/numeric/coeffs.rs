use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::expr::{Atom, Compiled, Expr, RootDef};
use crate::models::EvolutionPDE;

use super::grid::{Field, Grid, Provenance};
use super::quad::integrate;
use super::{NumericError, Result};

pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Numeric values for the symbols an expression may contain besides its
/// coordinates: constants by name, and functions of t for opaque time
/// functions, their derivatives and antiderivative atoms.
#[derive(Clone, Default)]
pub struct NumericEnv {
    constants: BTreeMap<String, f64>,
    functions: BTreeMap<String, TimeFn>,
}

impl std::fmt::Debug for NumericEnv {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NumericEnv")
            .field("constants", &self.constants)
            .field("functions", &self.functions.keys().collect::<Vec<_>>())
            .finish()
    }
}

enum Source {
    Lead,
    Const(f64),
    Fun(TimeFn),
}

/// Slot layout for compiled evaluation: the leading coordinates first, then
/// every other atom resolved from a [`NumericEnv`].
pub struct SlotMap {
    pub names: Vec<String>,
    sources: Vec<Source>,
}

impl NumericEnv {
    pub fn new() -> NumericEnv {
        NumericEnv::default()
    }

    pub fn with_constant(mut self, name: &str, v: f64) -> NumericEnv {
        self.set_constant(name, v);
        self
    }

    pub fn with_function<F: Fn(f64) -> f64 + Send + Sync + 'static>(mut self, name: &str, f: F) -> NumericEnv {
        self.set_function(name, f);
        self
    }

    pub fn set_constant(&mut self, name: &str, v: f64) {
        self.constants.insert(name.to_string(), v);
    }

    pub fn set_function<F: Fn(f64) -> f64 + Send + Sync + 'static>(&mut self, name: &str, f: F) {
        self.functions.insert(name.to_string(), Arc::new(f));
    }

    pub fn has(&self, name: &str) -> bool {
        self.constants.contains_key(name) || self.functions.contains_key(name)
    }

    /// Binds every unbound antiderivative atom of `e` to t ↦ ∫₀ᵗ integrand.
    pub fn resolve_antiderivatives(&mut self, e: &Expr) -> Result<()> {
        for a in e.atoms() {
            if let Atom::Anti(def) = &a {
                if self.has(&def.name) {
                    continue;
                }
                self.resolve_antiderivatives(&def.integrand)?;
                let slots = self.slots(&[&def.integrand], &["t"])?;
                let c = slots.compile(&def.integrand)?;
                let f = move |t: f64| integrate(&|s: f64| c.eval(&slots.values(s)), 0.0, t, 1e-13);
                self.set_function(&def.name, f);
            }
        }
        Ok(())
    }

    /// Slots for evaluating `exprs` with `lead` as free coordinates (the first must be t).
    pub fn slots(&self, exprs: &[&Expr], lead: &[&str]) -> Result<SlotMap> {
        let mut names: Vec<String> = lead.iter().map(|s| s.to_string()).collect();
        let mut sources: Vec<Source> = lead.iter().map(|_| Source::Lead).collect();
        let mut pending: Vec<Atom> = exprs.iter().flat_map(|e| e.atoms()).collect();
        while let Some(a) = pending.pop() {
            let name = match &a {
                Atom::Root(r) => match &**r {
                    RootDef::Int(_) => continue,
                    RootDef::Corr { base, .. } => {
                        pending.push(base.clone());
                        continue;
                    }
                },
                Atom::Jet(_) => return Err(NumericError::Unsupported(format!("jet atom {a} in a coefficient"))),
                other => other.name(),
            };
            if names.contains(&name) {
                continue;
            }
            let src = if let Some(v) = self.constants.get(&name) {
                Source::Const(*v)
            } else if let Some(f) = self.functions.get(&name) {
                Source::Fun(f.clone())
            } else {
                return Err(NumericError::Unbound(name));
            };
            names.push(name);
            sources.push(src);
        }
        Ok(SlotMap { names, sources })
    }
}

impl SlotMap {
    /// Slot values at time t; leading slots after t are zero until set.
    pub fn values(&self, t: f64) -> Vec<f64> {
        self.sources
            .iter()
            .enumerate()
            .map(|(k, s)| match s {
                Source::Lead => {
                    if k == 0 {
                        t
                    } else {
                        0.0
                    }
                }
                Source::Const(v) => *v,
                Source::Fun(f) => f(t),
            })
            .collect()
    }

    pub fn compile(&self, e: &Expr) -> Result<Compiled> {
        Ok(Compiled::new(e, &self.names)?)
    }
}

/// Samples an expression in (t, x, y) on every node of `grid`.
pub fn expr_field(e: &Expr, env: &NumericEnv, grid: &Grid, space: [&str; 2], provenance: Provenance) -> Result<Field> {
    let mut env = env.clone();
    env.resolve_antiderivatives(e)?;
    let slots = env.slots(&[e], &["t", space[0], space[1]])?;
    let c = slots.compile(e)?;
    let mut values = Vec::with_capacity((grid.nt + 1) * grid.slab_len());
    for n in 0..=grid.nt {
        let mut v = slots.values(grid.ts(n));
        for i in 0..grid.nx {
            v[1] = grid.xs(i);
            for j in 0..grid.ny {
                v[2] = grid.ys(j);
                values.push(c.eval(&v));
            }
        }
    }
    let f = Field { grid: grid.clone(), values, provenance };
    f.check_finite()?;
    Ok(f)
}

/// Drift, source and time coefficient of an equation Δu + b·∇u + c·u + s·u_t = 0
/// lowered to floating point.
pub struct CompiledPde {
    pub s: f64,
    slots: SlotMap,
    b: [Compiled; 2],
    source: Compiled,
}

impl CompiledPde {
    pub fn new(pde: &EvolutionPDE, env: &NumericEnv) -> Result<CompiledPde> {
        if pde.dim() != 2 {
            return Err(NumericError::Unsupported("finite differences need two space variables".into()));
        }
        for i in 0..2 {
            for j in 0..2 {
                let ok = match pde.a[i][j].as_rational() {
                    Some(v) => if i == j { v.is_one() } else { v.is_zero() },
                    None => false,
                };
                if !ok {
                    return Err(NumericError::Unsupported(format!(
                        "principal part of {} is not the identity",
                        pde.id
                    )));
                }
            }
        }
        let mut env = env.clone();
        let exprs = [&pde.b[0], &pde.b[1], &pde.source];
        for e in exprs {
            env.resolve_antiderivatives(e)?;
        }
        let names = [pde.space[0].name(), pde.space[1].name()];
        let slots = env.slots(&exprs, &["t", &names[0], &names[1]])?;
        let s = num_traits::ToPrimitive::to_f64(&pde.s).unwrap_or(f64::NAN);
        Ok(CompiledPde {
            s,
            b: [slots.compile(&pde.b[0])?, slots.compile(&pde.b[1])?],
            source: slots.compile(&pde.source)?,
            slots,
        })
    }

    pub fn at_time(&self, t: f64) -> Vec<f64> {
        self.slots.values(t)
    }

    /// (b_x, b_y, c) at (x, y); `vals` comes from [`CompiledPde::at_time`].
    #[inline]
    pub fn eval(&self, vals: &mut [f64], x: f64, y: f64) -> [f64; 3] {
        vals[1] = x;
        vals[2] = y;
        [self.b[0].eval(vals), self.b[1].eval(vals), self.source.eval(vals)]
    }
}
