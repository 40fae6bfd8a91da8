use crate::models::EvolutionPDE;

use super::coeffs::{CompiledPde, NumericEnv};
use super::grid::{Field, Grid};
use super::Result;

/// Max-norm of the centered-difference Θ over interior nodes and interior times.
pub fn discrete_residual(field: &Field, pde: &EvolutionPDE, env: &NumericEnv) -> Result<f64> {
    masked_residual(&field.grid, pde, env, |n, i, j| Some(field.at(n, i, j)))
}

/// As [`discrete_residual`], skipping nodes whose stencil touches an undefined value.
pub(crate) fn masked_residual<F>(grid: &Grid, pde: &EvolutionPDE, env: &NumericEnv, get: F) -> Result<f64>
where
    F: Fn(usize, usize, usize) -> Option<f64>,
{
    let cp = CompiledPde::new(pde, env)?;
    let (hx, hy, k) = (grid.hx(), grid.hy(), grid.dt());
    let mut worst: f64 = 0.0;
    for n in 1..grid.nt {
        let mut v = cp.at_time(grid.ts(n));
        for i in 1..grid.nx - 1 {
            for j in 1..grid.ny - 1 {
                let pts = [
                    get(n, i, j),
                    get(n, i + 1, j),
                    get(n, i - 1, j),
                    get(n, i, j + 1),
                    get(n, i, j - 1),
                    get(n + 1, i, j),
                    get(n - 1, i, j),
                ];
                if pts.iter().any(|p| p.is_none()) {
                    continue;
                }
                let [c, e, w, nn, s, up, dn] = pts.map(|p| p.unwrap());
                let [bx, by, src] = cp.eval(&mut v, grid.xs(i), grid.ys(j));
                let theta = (e - 2.0 * c + w) / (hx * hx)
                    + (nn - 2.0 * c + s) / (hy * hy)
                    + bx * (e - w) / (2.0 * hx)
                    + by * (nn - s) / (2.0 * hy)
                    + src * c
                    + cp.s * (up - dn) / (2.0 * k);
                worst = worst.max(theta.abs());
            }
        }
    }
    Ok(worst)
}
