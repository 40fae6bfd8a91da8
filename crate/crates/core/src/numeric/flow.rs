use num_traits::ToPrimitive;

use crate::expr::{Atom, Compiled, Expr};
use crate::jet;
use crate::models::{EvolutionPDE, PointTransformation};
use crate::symmetry::VectorField;

use super::coeffs::{NumericEnv, SlotMap};
use super::grid::{Field, Grid, Provenance};
use super::interp::sample;
use super::residual::masked_residual;
use super::{NumericError, Result};

const SUBSTEPS: usize = 24;

struct CompiledField {
    slots: SlotMap,
    xi: [Compiled; 3],
    phi: Compiled,
    autonomous_t: bool,
}

impl CompiledField {
    fn new(x: &VectorField, env: &NumericEnv) -> Result<CompiledField> {
        let u = Atom::u();
        let phi = x.eta.coeff(&u, 1);
        let unsupported = || NumericError::Unsupported(format!("{} has no closed-form multiplier flow", x.name));
        if !(&x.eta - &(&phi * &jet::u())).is_zero() || !jet::jets_in(&phi).is_empty() {
            return Err(unsupported());
        }
        if x.xi.iter().any(|e| !jet::jets_in(e).is_empty()) {
            return Err(unsupported());
        }
        let mut env = env.clone();
        let exprs: Vec<&Expr> = x.xi.iter().chain(std::iter::once(&phi)).collect();
        for e in &exprs {
            env.resolve_antiderivatives(e)?;
        }
        let slots = env.slots(&exprs, &["t", "x", "y"])?;
        Ok(CompiledField {
            xi: [slots.compile(&x.xi[0])?, slots.compile(&x.xi[1])?, slots.compile(&x.xi[2])?],
            phi: slots.compile(&phi)?,
            autonomous_t: x.xi[0].is_zero(),
            slots,
        })
    }

    /// (−ξ, φ) at z; `vals` is refreshed when t moves.
    fn rhs(&self, z: &[f64; 3], vals: &mut Vec<f64>) -> [f64; 4] {
        if !self.autonomous_t {
            *vals = self.slots.values(z[0]);
        }
        vals[1] = z[1];
        vals[2] = z[2];
        [-self.xi[0].eval(vals), -self.xi[1].eval(vals), -self.xi[2].eval(vals), self.phi.eval(vals)]
    }

    /// Runs the flow backwards by ε from z: returns the preimage and ∫φ.
    fn preimage(&self, z0: [f64; 3], eps: f64) -> ([f64; 3], f64) {
        let mut vals = self.slots.values(z0[0]);
        let h = eps / SUBSTEPS as f64;
        let mut z = [z0[0], z0[1], z0[2], 0.0];
        let at = |z: &[f64; 4], vals: &mut Vec<f64>| self.rhs(&[z[0], z[1], z[2]], vals);
        for _ in 0..SUBSTEPS {
            let k1 = at(&z, &mut vals);
            let z2 = std::array::from_fn(|i| z[i] + 0.5 * h * k1[i]);
            let k2 = at(&z2, &mut vals);
            let z3 = std::array::from_fn(|i| z[i] + 0.5 * h * k2[i]);
            let k3 = at(&z3, &mut vals);
            let z4 = std::array::from_fn(|i| z[i] + h * k3[i]);
            let k4 = at(&z4, &mut vals);
            for i in 0..4 {
                z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        ([z[0], z[1], z[2]], z[3])
    }
}

/// Applies exp(εX) to `field` (u ↦ ũ with ũ(z) = e^{∫φ}·u(preimage of z)),
/// resampling by tricubic interpolation, and returns the discrete residual of
/// the image over the nodes where it is defined.
pub fn flow_check(pde: &EvolutionPDE, env: &NumericEnv, x: &VectorField, eps: f64, field: &Field) -> Result<f64> {
    let cf = CompiledField::new(x, env)?;
    let g = &field.grid;
    let mut image: Vec<Option<f64>> = Vec::with_capacity(field.values.len());
    for n in 0..=g.nt {
        for i in 0..g.nx {
            for j in 0..g.ny {
                let (p, l) = cf.preimage([g.ts(n), g.xs(i), g.ys(j)], eps);
                image.push(sample(field, p[0], p[1], p[2]).map(|v| v * l.exp()));
            }
        }
    }
    let defined = image.iter().filter(|v| v.is_some()).count();
    if defined < image.len() / 4 {
        return Err(NumericError::Unsupported(format!(
            "flow of {} by ε = {eps} moves most nodes off the grid",
            x.name
        )));
    }
    masked_residual(g, pde, env, |n, i, j| image[field.index(n, i, j)])
}

/// A point transformation lowered to floating point.
pub struct NumericTransform {
    pub time_scale: f64,
    slots: SlotMap,
    old: Vec<Compiled>,
    multiplier: Compiled,
    inverse: Vec<Compiled>,
}

impl NumericTransform {
    pub fn new(tr: &PointTransformation, env: &NumericEnv) -> Result<NumericTransform> {
        let inverse = tr
            .inverse
            .as_ref()
            .ok_or_else(|| NumericError::Unsupported(format!("{} has no explicit inverse", tr.name)))?;
        if tr.old.len() != 2 {
            return Err(NumericError::Unsupported("expected two space variables".into()));
        }
        let mut env = env.clone();
        let mut exprs: Vec<&Expr> = tr.old.iter().map(|(_, e)| e).collect();
        exprs.push(&tr.multiplier);
        exprs.extend(inverse.iter());
        for e in &exprs {
            env.resolve_antiderivatives(e)?;
        }
        let names = [tr.old[0].0.name(), tr.old[1].0.name()];
        let slots = env.slots(&exprs, &["t", &names[0], &names[1]])?;
        Ok(NumericTransform {
            time_scale: tr.time_scale.to_f64().unwrap_or(f64::NAN),
            old: tr.old.iter().map(|(_, e)| slots.compile(e)).collect::<Result<_>>()?,
            multiplier: slots.compile(&tr.multiplier)?,
            inverse: inverse.iter().map(|e| slots.compile(e)).collect::<Result<_>>()?,
            slots,
        })
    }

    /// New coordinates (T, x̄, ȳ) of the old point (t, x, y).
    pub fn forward(&self, t: f64, x: f64, y: f64) -> [f64; 3] {
        let mut v = self.slots.values(t);
        v[1] = x;
        v[2] = y;
        [t / self.time_scale, self.inverse[0].eval(&v), self.inverse[1].eval(&v)]
    }

    /// Old coordinates (t, x, y) of the new point (T, x̄, ȳ), with the multiplier there.
    pub fn backward(&self, tn: f64, xb: f64, yb: f64) -> ([f64; 3], f64) {
        let t = self.time_scale * tn;
        let mut v = self.slots.values(t);
        v[1] = xb;
        v[2] = yb;
        ([t, self.old[0].eval(&v), self.old[1].eval(&v)], self.multiplier.eval(&v))
    }

    /// u(t, x, y) = m · v(T, x̄, ȳ) given v in the new variables.
    pub fn old_value(&self, t: f64, x: f64, y: f64, v: impl Fn(f64, f64, f64) -> Option<f64>) -> Option<f64> {
        let [tn, xb, yb] = self.forward(t, x, y);
        let (_, m) = self.backward(tn, xb, yb);
        v(tn, xb, yb).map(|val| m * val)
    }
}

/// Maps a solution `v` of the transformed equation back to the old variables on `grid`.
pub fn transform_field(tr: &NumericTransform, v: &Field, grid: &Grid) -> Result<Field> {
    let mut values = Vec::with_capacity((grid.nt + 1) * grid.slab_len());
    for n in 0..=grid.nt {
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                let (t, x, y) = (grid.ts(n), grid.xs(i), grid.ys(j));
                let val = tr.old_value(t, x, y, |a, b, c| sample(v, a, b, c)).ok_or_else(|| {
                    NumericError::Unsupported(format!("({t}, {x}, {y}) maps outside the transformed grid"))
                })?;
                values.push(val);
            }
        }
    }
    let f = Field { grid: grid.clone(), values, provenance: Provenance::Transformed };
    f.check_finite()?;
    Ok(f)
}
