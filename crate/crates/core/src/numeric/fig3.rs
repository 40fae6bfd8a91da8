use std::sync::{Arc, Mutex};

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::expr::Q;
use crate::models::{catalog, special_lambdas, Params};
use crate::reduce::{invariant_solution, ClosedFormSolution};

use super::adi::{solve_fd, Boundary, Exec, FdData};
use super::coeffs::{expr_field, NumericEnv};
use super::grid::{max_rel_error, Direction, Field, Grid, Provenance};
use super::{NumericError, Result};

/// r(t) = r₀ + ε sin(ωt) with μ₁ = μ₂ = k = r and constant σ₀, ρ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Fig3Config {
    pub r0: f64,
    pub eps: f64,
    pub omega: f64,
    pub c1: f64,
    pub c2: f64,
    pub sigma0: f64,
    pub rho: f64,
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub nx: usize,
    pub ny: usize,
    pub t_end: f64,
    pub nt: usize,
}

impl Default for Fig3Config {
    fn default() -> Self {
        Fig3Config {
            r0: 0.05,
            eps: 0.02,
            omega: 2.0 * std::f64::consts::PI,
            c1: 0.5,
            c2: 0.25,
            sigma0: 1.0,
            rho: 0.0,
            x: (-1.0, 1.0),
            y: (-1.0, 1.0),
            nx: 101,
            ny: 101,
            t_end: 4.0,
            nt: 400,
        }
    }
}

impl Fig3Config {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.x, self.y, self.nx, self.ny, (0.0, self.t_end), self.nt, Direction::Backward)
    }
}

pub struct Fig3Result {
    pub solution: ClosedFormSolution,
    pub fd: Field,
    pub closed_form: Field,
    pub max_rel_error: f64,
    /// Dominant angular frequency of log u(t, x₀, 0) minus its linear trend.
    pub frequency: Option<f64>,
    pub peak_amplitude: f64,
    /// Angular width of one DFT bin.
    pub bin_width: f64,
    /// Node index of x₀ and of y = 0.
    pub probe: (usize, usize),
}

fn to_q(v: f64, what: &str) -> Result<Q> {
    Q::from_float(v).ok_or_else(|| NumericError::Unsupported(format!("{what} = {v} is not finite")))
}

/// Peaks below this amplitude count as no oscillation; it sits above the
/// discretization noise of log u and far below any resolved oscillation.
pub const FLAT_AMPLITUDE: f64 = 1e-5;

/// Peak of the one-sided DFT of `series` after removing its least-squares line.
/// Returns (angular frequency, amplitude), or None for a flat remainder.
pub fn dominant_frequency(series: &[f64], dt: f64) -> Option<(f64, f64)> {
    let n = series.len();
    if n < 4 {
        return None;
    }
    let ts: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
    let (mt, ms) = (ts.iter().sum::<f64>() / n as f64, series.iter().sum::<f64>() / n as f64);
    let sxy: f64 = ts.iter().zip(series).map(|(t, s)| (t - mt) * (s - ms)).sum();
    let sxx: f64 = ts.iter().map(|t| (t - mt).powi(2)).sum();
    let slope = sxy / sxx;
    let mut buf: Vec<Complex<f64>> = ts
        .iter()
        .zip(series)
        .map(|(t, s)| Complex::new(s - ms - slope * (t - mt), 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let (k, amp) = (1..=n / 2)
        .map(|k| (k, buf[k].norm() / n as f64))
        .fold((0, 0.0), |best, c| if c.1 > best.1 { c } else { best });
    if k == 0 || amp < FLAT_AMPLITUDE {
        return None;
    }
    Some((2.0 * std::f64::consts::PI * k as f64 / (n as f64 * dt), amp))
}

/// Solves the proportional-volatility equation in canonical form with the
/// oscillating rate both in closed form and by finite differences.
pub fn fig3_scenario(cfg: &Fig3Config, exec: Exec) -> Result<Fig3Result> {
    let grid = cfg.grid()?;
    let (r0, eps, om) = (cfg.r0, cfg.eps, cfg.omega);
    let r = Arc::new(move |t: f64| r0 + eps * (om * t).sin());

    // Λ₁, Λ₂ from the market parameters
    let mp = Params::time_dependent("bs2d_special")?;
    let lambdas = special_lambdas(&mp)?;
    let mut menv = NumericEnv::new().with_constant("sigma0", cfg.sigma0).with_constant("rho", cfg.rho);
    for name in ["mu1", "mu2", "k"] {
        let r = r.clone();
        menv.set_function(name, move |t| r(t));
    }
    let mut env = NumericEnv::new();
    for (i, l) in lambdas.iter().enumerate() {
        let slots = menv.slots(&[l], &["t"])?;
        let c = slots.compile(l)?;
        env.set_function(&format!("L{}", i + 1), move |t| c.eval(&slots.values(t)));
    }
    {
        let r = r.clone();
        env.set_function("k", move |t| r(t));
    }

    let pde = catalog(&Params::time_dependent("bs2d_special_nonauto")?)?;
    let solution = invariant_solution(&pde, &to_q(cfg.c1, "c1")?, &to_q(cfg.c2, "c2")?)?;
    let closed_form = expr_field(&solution.u, &env, &grid, ["x", "y"], Provenance::ClosedForm)?;

    let mut uenv = env.clone();
    uenv.resolve_antiderivatives(&solution.u)?;
    let slots = uenv.slots(&[&solution.u], &["t", "x", "y"])?;
    let cu = slots.compile(&solution.u)?;
    // boundary nodes of one time level share the quadrature for W
    let cache: Mutex<(f64, Vec<f64>)> = Mutex::new((f64::NAN, Vec::new()));
    let exact = |t: f64, x: f64, y: f64| {
        let mut v = {
            let mut c = cache.lock().unwrap_or_else(|e| e.into_inner());
            if c.0 != t {
                *c = (t, slots.values(t));
            }
            c.1.clone()
        };
        v[1] = x;
        v[2] = y;
        cu.eval(&v)
    };
    let t_end = cfg.t_end;
    let initial = |x: f64, y: f64| exact(t_end, x, y);
    let data = FdData { initial: &initial, boundary: Boundary::Dirichlet(&exact) };
    let fd = solve_fd(&pde, &env, &grid, &data, exec)?;

    let max_rel_error = max_rel_error(&fd.values, &closed_form.values);
    let probe = ((grid.nx - 1) / 2, (grid.ny - 1) / 2);
    let series: Vec<f64> = (0..=grid.nt).map(|n| fd.at(n, probe.0, probe.1).ln()).collect();
    if series.iter().any(|v| !v.is_finite()) {
        return Err(NumericError::NonFinite { step: 0, t: 0.0 });
    }
    let found = dominant_frequency(&series, grid.dt());
    let bin_width = 2.0 * std::f64::consts::PI / ((grid.nt + 1) as f64 * grid.dt());
    Ok(Fig3Result {
        solution,
        fd,
        closed_form,
        max_rel_error,
        frequency: found.map(|f| f.0),
        peak_amplitude: found.map_or(0.0, |f| f.1),
        bin_width,
        probe,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_tone_and_flat_line() {
        let dt = 0.01;
        let s: Vec<f64> = (0..401).map(|k| 0.3 * k as f64 * dt + 0.01 * (6.0 * k as f64 * dt).cos()).collect();
        let (w, _) = dominant_frequency(&s, dt).unwrap();
        let bin = 2.0 * std::f64::consts::PI / (401.0 * dt);
        assert!((w - 6.0).abs() <= bin);
        let flat: Vec<f64> = (0..401).map(|k| 1.0 + 0.05 * k as f64 * dt).collect();
        assert!(dominant_frequency(&flat, dt).is_none());
    }
}
