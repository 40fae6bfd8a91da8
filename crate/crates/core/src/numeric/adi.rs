use crate::models::EvolutionPDE;

use super::coeffs::{CompiledPde, NumericEnv};
use super::grid::{Direction, Field, Grid, Provenance};
use super::{NumericError, Result};

/// Parallel line sweeps, or the sequential fallback (also used when the
/// `parallel` feature is off).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

fn map_lines<F>(exec: Exec, n: usize, f: F) -> Vec<Vec<f64>>
where
    F: Fn(usize) -> Vec<f64> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Exec::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

pub enum Boundary<'a> {
    /// Values g(t, x, y) on the edges.
    Dirichlet(&'a (dyn Fn(f64, f64, f64) -> f64 + Sync)),
    /// Zero second normal derivative, extrapolated from the interior.
    Linear,
}

pub struct FdData<'a> {
    /// Values at the start of the march: t_min going forward, t_max going backward.
    pub initial: &'a (dyn Fn(f64, f64) -> f64 + Sync),
    pub boundary: Boundary<'a>,
}

/// Solves the tridiagonal system with sub-, main and super-diagonals in place of `d`.
fn thomas(lo: &[f64], di: &[f64], up: &[f64], d: &mut [f64]) {
    let n = d.len();
    let mut c = vec![0.0; n];
    let mut beta = di[0];
    d[0] /= beta;
    for i in 1..n {
        c[i - 1] = up[i - 1] / beta;
        beta = di[i] - lo[i] * c[i - 1];
        d[i] = (d[i] - lo[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
}

struct Coef {
    bx: Vec<f64>,
    by: Vec<f64>,
    c: Vec<f64>,
}

/// Peaceman–Rachford ADI for Δu + b·∇u + c·u + s·u_t = 0 with identity
/// principal part. The march runs in τ ≥ 0 with u_τ = α(Δu + b·∇u + c·u),
/// α = ∓1/s by direction, which must be positive.
pub fn solve_fd(pde: &EvolutionPDE, env: &NumericEnv, grid: &Grid, data: &FdData, exec: Exec) -> Result<Field> {
    grid.validate()?;
    let cp = CompiledPde::new(pde, env)?;
    let alpha = match grid.direction {
        Direction::Forward => -1.0 / cp.s,
        Direction::Backward => 1.0 / cp.s,
    };
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(NumericError::Unsupported(format!(
            "{} is ill-posed marching {:?}",
            pde.id, grid.direction
        )));
    }
    let (nx, ny, nt) = (grid.nx, grid.ny, grid.nt);
    let (hx, hy, k) = (grid.hx(), grid.hy(), grid.dt());
    let phys = |tau: f64| match grid.direction {
        Direction::Forward => grid.t.0 + tau,
        Direction::Backward => grid.t.1 - tau,
    };
    let slab_of = |m: usize| match grid.direction {
        Direction::Forward => m,
        Direction::Backward => nt - m,
    };
    let len = grid.slab_len();
    let idx = |i: usize, j: usize| i * ny + j;
    let mut values = vec![0.0; (nt + 1) * len];

    let mut u = vec![0.0; len];
    for i in 0..nx {
        for j in 0..ny {
            u[idx(i, j)] = (data.initial)(grid.xs(i), grid.ys(j));
        }
    }
    let store = |values: &mut Vec<f64>, m: usize, u: &[f64]| {
        let s = slab_of(m);
        values[s * len..(s + 1) * len].copy_from_slice(u);
    };
    store(&mut values, 0, &u);

    let coef_at = |t: f64| -> Coef {
        let rows = map_lines(exec, nx, |i| {
            let mut v = cp.at_time(t);
            let x = grid.xs(i);
            let mut out = Vec::with_capacity(3 * ny);
            for j in 0..ny {
                out.extend_from_slice(&cp.eval(&mut v, x, grid.ys(j)));
            }
            out
        });
        let mut c = Coef { bx: vec![0.0; len], by: vec![0.0; len], c: vec![0.0; len] };
        for (i, r) in rows.iter().enumerate() {
            for j in 0..ny {
                c.bx[idx(i, j)] = r[3 * j];
                c.by[idx(i, j)] = r[3 * j + 1];
                c.c[idx(i, j)] = r[3 * j + 2];
            }
        }
        c
    };
    let boundary_slab = |t: f64, u_old: &[f64]| -> Vec<f64> {
        let mut g = u_old.to_vec();
        match &data.boundary {
            Boundary::Dirichlet(f) => {
                for i in 0..nx {
                    for j in [0, ny - 1] {
                        g[idx(i, j)] = f(t, grid.xs(i), grid.ys(j));
                    }
                }
                for j in 0..ny {
                    for i in [0, nx - 1] {
                        g[idx(i, j)] = f(t, grid.xs(i), grid.ys(j));
                    }
                }
            }
            Boundary::Linear => {
                for i in 1..nx - 1 {
                    g[idx(i, 0)] = 2.0 * u_old[idx(i, 1)] - u_old[idx(i, 2)];
                    g[idx(i, ny - 1)] = 2.0 * u_old[idx(i, ny - 2)] - u_old[idx(i, ny - 3)];
                }
                for j in 0..ny {
                    g[idx(0, j)] = 2.0 * g[idx(1, j)] - g[idx(2, j)];
                    g[idx(nx - 1, j)] = 2.0 * g[idx(nx - 2, j)] - g[idx(nx - 3, j)];
                }
            }
        }
        g
    };

    let (rx, ry) = (0.5 * k * alpha / (hx * hx), 0.5 * k * alpha / (hy * hy));
    let (px, py) = (0.25 * k * alpha / hx, 0.25 * k * alpha / hy);
    let hk = 0.25 * k * alpha;
    // (k/2)·L_y applied at (i, j) to a slab
    let ly = |w: &[f64], co: &Coef, i: usize, j: usize| {
        let n = idx(i, j);
        ry * (w[n + 1] - 2.0 * w[n] + w[n - 1]) + py * co.by[n] * (w[n + 1] - w[n - 1]) + hk * co.c[n] * w[n]
    };
    let lx = |w: &[f64], co: &Coef, i: usize, j: usize| {
        let n = idx(i, j);
        rx * (w[n + ny] - 2.0 * w[n] + w[n - ny]) + px * co.bx[n] * (w[n + ny] - w[n - ny]) + hk * co.c[n] * w[n]
    };

    let mut g_old = boundary_slab(phys(0.0), &u);
    for m in 0..nt {
        let tau = m as f64 * k;
        let co = coef_at(phys(tau + 0.5 * k));
        let g_new = match data.boundary {
            Boundary::Dirichlet(_) => boundary_slab(phys(tau + k), &u),
            Boundary::Linear => g_old.clone(),
        };
        // x-sweep: one line per interior j
        let edge = |i: usize, j: usize| {
            0.5 * (g_old[idx(i, j)] + ly(&g_old, &co, i, j)) + 0.5 * (g_new[idx(i, j)] - ly(&g_new, &co, i, j))
        };
        let cols = map_lines(exec, ny - 2, |jj| {
            let j = jj + 1;
            let n = nx - 2;
            let (mut lo, mut di, mut up, mut d) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            let (left, right) = (edge(0, j), edge(nx - 1, j));
            for ii in 0..n {
                let i = ii + 1;
                let p = idx(i, j);
                lo[ii] = -(rx - px * co.bx[p]);
                up[ii] = -(rx + px * co.bx[p]);
                di[ii] = 1.0 + 2.0 * rx - hk * co.c[p];
                d[ii] = u[p] + ly(&u, &co, i, j);
            }
            d[0] -= lo[0] * left;
            d[n - 1] -= up[n - 1] * right;
            thomas(&lo, &di, &up, &mut d);
            let mut out = Vec::with_capacity(nx);
            out.push(left);
            out.extend_from_slice(&d);
            out.push(right);
            out
        });
        let mut star = g_new.clone();
        for (jj, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                star[idx(i, jj + 1)] = *v;
            }
        }
        // y-sweep: one line per interior i
        let rows = map_lines(exec, nx - 2, |ii| {
            let i = ii + 1;
            let n = ny - 2;
            let (mut lo, mut di, mut up, mut d) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            let (bottom, top) = (g_new[idx(i, 0)], g_new[idx(i, ny - 1)]);
            for jj in 0..n {
                let j = jj + 1;
                let p = idx(i, j);
                lo[jj] = -(ry - py * co.by[p]);
                up[jj] = -(ry + py * co.by[p]);
                di[jj] = 1.0 + 2.0 * ry - hk * co.c[p];
                d[jj] = star[p] + lx(&star, &co, i, j);
            }
            d[0] -= lo[0] * bottom;
            d[n - 1] -= up[n - 1] * top;
            thomas(&lo, &di, &up, &mut d);
            d
        });
        let mut next = g_new.clone();
        for (ii, row) in rows.iter().enumerate() {
            let i = ii + 1;
            next[idx(i, 1)..idx(i, ny - 1)].copy_from_slice(row);
        }
        if let Boundary::Linear = data.boundary {
            g_old = boundary_slab(phys(tau + k), &next);
            next = g_old.clone();
        } else {
            g_old = g_new;
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(NumericError::NonFinite { step: m + 1, t: phys(tau + k) });
        }
        u = next;
        store(&mut values, m + 1, &u);
    }
    Ok(Field { grid: grid.clone(), values, provenance: Provenance::Fd })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense() {
        // [2 1 0; 1 3 1; 0 1 4] x = [3 5 5] → x = 1
        let mut d = vec![3.0, 5.0, 5.0];
        thomas(&[0.0, 1.0, 1.0], &[2.0, 3.0, 4.0], &[1.0, 1.0, 0.0], &mut d);
        for v in d {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }
}
