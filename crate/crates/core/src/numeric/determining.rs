use nalgebra::DMatrix;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::expr::{Atom, Compiled, Expr};
use crate::models::{catalog, Params};
use crate::symmetry::{
    determining_residuals_bs2d, determining_residuals_twofactor, engine_system, generic_vector_bs2d,
    generic_vector_twofactor, GenericCoefficients,
};

use super::ode::{dp45, OdeOptions};
use super::{NumericError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeterminingSystem {
    TwoFactor,
    Bs2d,
}

impl DeterminingSystem {
    fn model(self) -> &'static str {
        match self {
            DeterminingSystem::TwoFactor => "twofactor_nonauto",
            DeterminingSystem::Bs2d => "bs2d_nonauto",
        }
    }

    fn coefficient_names(self) -> &'static [&'static str] {
        match self {
            DeterminingSystem::TwoFactor => &["P1", "P2", "P3", "Q1", "Q2", "Q3"],
            DeterminingSystem::Bs2d => &["P1", "Q1", "Q2", "Q3"],
        }
    }

    /// Names of the integrated state components, in order.
    pub fn state_names(self) -> Vec<String> {
        let last = match self {
            DeterminingSystem::TwoFactor => ["g", "g'", "h"],
            DeterminingSystem::Bs2d => ["f", "f'", "g"],
        };
        ["a", "a'", "a''", "b1", "b1'"].iter().chain(last.iter()).map(|s| s.to_string()).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DeterminingRun {
    pub system: DeterminingSystem,
    pub state_names: Vec<String>,
    pub b2: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Largest |residual| along the trajectory, per equation.
    pub residuals: Vec<(String, f64)>,
    pub max_residual: f64,
}

/// The explicit ODE form of a determining system.
struct Prepared {
    slots: Vec<String>,
    state_slots: Vec<usize>,
    deriv_slots: Vec<usize>,
    b2_slot: usize,
    targets: Vec<(usize, Compiled)>,
    checks: Vec<(String, Compiled)>,
    /// Equations that are not used to define a derivative.
    constraints: Vec<usize>,
}

fn fun_atom(e: &Expr, order: u8) -> Atom {
    match e.atoms().into_iter().next() {
        Some(Atom::Fun(s, _)) => Atom::Fun(s, order),
        _ => unreachable!("generic coefficient is a function atom"),
    }
}

/// E = c·T + R with c a nonzero rational ⇒ T = −R/c.
fn solve_for(e: &Expr, target: &Atom, label: &str) -> Result<Expr> {
    let c = e.coeff(target, 1);
    let c = c
        .as_rational()
        .filter(|c| !c.is_zero())
        .ok_or_else(|| NumericError::Singular(format!("{label}: coefficient of {target} is `{c}`")))?;
    if e.degree_in(target) != Some(1) {
        return Err(NumericError::Singular(format!("{label} is not linear in {target}")));
    }
    let rest = e - &Expr::atom(target.clone()).scale(&c);
    Ok(rest.scale(&(-c.recip())))
}

impl Prepared {
    fn new(system: DeterminingSystem, coeffs: &[Expr], k: &Expr) -> Result<Prepared> {
        let names = system.coefficient_names();
        if coeffs.len() != names.len() {
            return Err(NumericError::Unsupported(format!(
                "{} coefficients expected, got {}",
                names.len(),
                coeffs.len()
            )));
        }
        let mut p = Params::time_dependent(system.model())?;
        for (n, e) in names.iter().zip(coeffs) {
            p.set(n, e.clone())?;
        }
        if system == DeterminingSystem::Bs2d {
            p.set("k", k.clone())?;
        }
        let pde = catalog(&p)?;
        let mut table = pde.symbols.clone();
        let gc = GenericCoefficients::symbolic(&mut table);
        let (appendix, vector) = match system {
            DeterminingSystem::TwoFactor => {
                let c: [Expr; 6] = std::array::from_fn(|i| coeffs[i].clone());
                (determining_residuals_twofactor(&gc, &c)?, generic_vector_twofactor(&gc, &c)?)
            }
            DeterminingSystem::Bs2d => {
                let c: [Expr; 4] = std::array::from_fn(|i| coeffs[i].clone());
                (determining_residuals_bs2d(&gc, &c, k)?, generic_vector_bs2d(&gc, &c)?)
            }
        };
        let engine = engine_system(&pde, &vector)?;
        let get = |key: (i32, i32)| engine.get(&key).cloned().unwrap_or_default();
        // the x² + y² coefficient carries a‴; the printed systems keep only the difference
        let third = get((2, 0)) + get((0, 2));
        let mut equations: Vec<(String, Expr)> =
            appendix.iter().enumerate().map(|(i, e)| (format!("eq{}", i + 1), e.clone())).collect();
        equations.push(("a'''".into(), third));
        if system == DeterminingSystem::TwoFactor {
            equations.push(("xy".into(), get((1, 1))));
        }

        let a = |k| fun_atom(&gc.a, k);
        let b1 = |k| fun_atom(&gc.b1, k);
        let (second, last) = match system {
            DeterminingSystem::TwoFactor => (&gc.g, &gc.h),
            DeterminingSystem::Bs2d => (&gc.f, &gc.g),
        };
        let s2 = |k| fun_atom(second, k);
        let l = |k| fun_atom(last, k);
        let states = [a(0), a(1), a(2), b1(0), b1(1), s2(0), s2(1), l(0)];
        let derivs = [a(1), a(2), a(3), b1(1), b1(2), s2(1), s2(2), l(1)];
        // (equation index, target) in evaluation order
        let plan = [(appendix.len(), a(3)), (1, b1(2)), (2, s2(2)), (0, l(1))];

        let mut slots: Vec<String> = vec!["t".into()];
        for atom in states.iter().chain(derivs.iter()) {
            let n = atom.name();
            if !slots.contains(&n) {
                slots.push(n);
            }
        }
        let b2_slot = slots.len();
        slots.push(gc.b2.to_string());
        let idx = |atom: &Atom| slots.iter().position(|s| *s == atom.name()).unwrap();
        let mut targets = Vec::new();
        for (eq, target) in &plan {
            let r = solve_for(&equations[*eq].1, target, &equations[*eq].0)?;
            targets.push((idx(target), Compiled::new(&r, &slots)?));
        }
        let used: Vec<usize> = plan.iter().map(|(e, _)| *e).collect();
        let constraints = (0..equations.len()).filter(|i| !used.contains(i)).collect();
        let checks = equations
            .iter()
            .map(|(n, e)| Ok((n.clone(), Compiled::new(e, &slots)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Prepared {
            state_slots: states.iter().map(idx).collect(),
            deriv_slots: derivs.iter().map(idx).collect(),
            b2_slot,
            targets,
            checks,
            constraints,
            slots,
        })
    }

    fn fill(&self, t: f64, y: &[f64], b2: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.slots.len()];
        v[0] = t;
        for (s, val) in self.state_slots.iter().zip(y) {
            v[*s] = *val;
        }
        v[self.b2_slot] = b2;
        for (s, c) in &self.targets {
            v[*s] = c.eval(&v);
        }
        v
    }

    fn rhs(&self, t: f64, y: &[f64], b2: f64, dy: &mut [f64]) {
        let v = self.fill(t, y, b2);
        for (d, s) in dy.iter_mut().zip(&self.deriv_slots) {
            *d = v[*s];
        }
    }
}

const RANK_TOL: f64 = 1e-7;

fn options() -> OdeOptions {
    OdeOptions { rtol: 1e-9, atol: 1e-12, ..OdeOptions::default() }
}

/// Integrates the determining system of the generic vector for coefficient
/// functions given as expressions in t. `init` is (a, a′, a″, b₁, b₁′, g, g′, h)
/// for the two-factor system and (a, a′, a″, b₁, b₁′, f, f′, g) for Black-Scholes.
pub fn integrate_determining_system(
    system: DeterminingSystem,
    coeffs: &[Expr],
    k: Option<&Expr>,
    b2: f64,
    init: &[f64],
    times: &[f64],
) -> Result<DeterminingRun> {
    let zero = Expr::zero();
    let prep = Prepared::new(system, coeffs, k.unwrap_or(&zero))?;
    if init.len() != prep.state_slots.len() {
        return Err(NumericError::Unsupported(format!("{} initial values expected", prep.state_slots.len())));
    }
    let t0 = times.first().copied().unwrap_or(0.0);
    let states = dp45(|t, y, d| prep.rhs(t, y, b2, d), t0, init, times, options())?;
    let mut worst = vec![0.0f64; prep.checks.len()];
    for (t, y) in times.iter().zip(&states) {
        let v = prep.fill(*t, y, b2);
        for (w, (_, c)) in worst.iter_mut().zip(&prep.checks) {
            *w = w.max(c.eval(&v).abs());
        }
    }
    let residuals: Vec<(String, f64)> = prep.checks.iter().map(|(n, _)| n.clone()).zip(worst.iter().copied()).collect();
    let max_residual = worst.iter().copied().fold(0.0, f64::max);
    Ok(DeterminingRun {
        system,
        state_names: system.state_names(),
        b2,
        times: times.to_vec(),
        states,
        residuals,
        max_residual,
    })
}

/// Values of every constraint equation sampled on [0, t_end], one column per
/// unit initial datum (state components, then B₂).
fn constraint_matrix(prep: &Prepared, t_end: f64) -> Result<DMatrix<f64>> {
    let n = prep.state_slots.len();
    let samples = 24;
    let times: Vec<f64> = (0..=samples).map(|i| t_end * i as f64 / samples as f64).collect();
    let rows = prep.constraints.len() * times.len();
    let mut m = DMatrix::<f64>::zeros(rows, n + 1);
    for col in 0..=n {
        let mut init = vec![0.0; n];
        let b2 = if col == n { 1.0 } else { 0.0 };
        if col < n {
            init[col] = 1.0;
        }
        let states = dp45(|t, y, d| prep.rhs(t, y, b2, d), 0.0, &init, &times, options())?;
        for (r, (t, y)) in times.iter().zip(&states).enumerate() {
            let v = prep.fill(*t, y, b2);
            for (c, &eq) in prep.constraints.iter().enumerate() {
                m[(r * prep.constraints.len() + c, col)] = prep.checks[eq].1.eval(&v);
            }
        }
    }
    Ok(m)
}

/// Basis of the initial data (state, then B₂) whose trajectories keep every
/// constraint equation at zero on [0, t_end], from the numerical null space
/// of the sampled constraint values.
pub fn admissible_initial_data(
    system: DeterminingSystem,
    coeffs: &[Expr],
    k: Option<&Expr>,
    t_end: f64,
) -> Result<Vec<Vec<f64>>> {
    let zero = Expr::zero();
    let prep = Prepared::new(system, coeffs, k.unwrap_or(&zero))?;
    let m = constraint_matrix(&prep, t_end)?;
    let cols = m.ncols();
    // pad to square so the right singular vectors span the whole space
    let mut sq = DMatrix::<f64>::zeros(m.nrows().max(cols), cols);
    sq.view_mut((0, 0), (m.nrows(), cols)).copy_from(&m);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| NumericError::Integrator("SVD failed".into()))?;
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max).max(1e-300);
    Ok(svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= RANK_TOL * top)
        .map(|(i, _)| vt.row(i).iter().copied().collect())
        .collect())
}

/// Dimension of the space of initial data (state and B₂) whose trajectories
/// keep every constraint equation at zero on [0, t_end].
pub fn solution_dimension(system: DeterminingSystem, coeffs: &[Expr], k: Option<&Expr>, t_end: f64) -> Result<usize> {
    Ok(admissible_initial_data(system, coeffs, k, t_end)?.len())
}
