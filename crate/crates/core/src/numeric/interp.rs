use super::grid::Field;

/// Four-point Lagrange stencil for coordinate `z` on nodes z₀ + k·h, k < n.
/// Returns the first node index and the weights, or None outside the nodes.
pub fn cubic_weights(z: f64, z0: f64, h: f64, n: usize) -> Option<(usize, [f64; 4])> {
    let s = (z - z0) / h;
    let tol = 1e-9;
    if s < -tol || s > (n - 1) as f64 + tol || n < 4 {
        return None;
    }
    let base = (s.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let r = s - base as f64;
    let mut w = [0.0; 4];
    for (a, wa) in w.iter_mut().enumerate() {
        let mut p = 1.0;
        for b in 0..4 {
            if b != a {
                p *= (r - b as f64) / (a as f64 - b as f64);
            }
        }
        *wa = p;
    }
    Some((base, w))
}

/// Tricubic Lagrange resampling of `field` at (t, x, y); None outside the grid.
pub fn sample(field: &Field, t: f64, x: f64, y: f64) -> Option<f64> {
    let g = &field.grid;
    let (bi, wx) = cubic_weights(x, g.x.0, g.hx(), g.nx)?;
    let (bj, wy) = cubic_weights(y, g.y.0, g.hy(), g.ny)?;
    let s = (t - g.t.0) / g.dt();
    let near = s.round();
    let times: Vec<(usize, f64)> = if (s - near).abs() < 1e-9 && near >= 0.0 && near <= g.nt as f64 {
        vec![(near as usize, 1.0)]
    } else {
        let (bn, wt) = cubic_weights(t, g.t.0, g.dt(), g.nt + 1)?;
        (0..4).map(|a| (bn + a, wt[a])).collect()
    };
    let mut acc = 0.0;
    for (n, wn) in times {
        for a in 0..4 {
            for b in 0..4 {
                acc += wn * wx[a] * wy[b] * field.at(n, bi + a, bj + b);
            }
        }
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubics() {
        let f = |z: f64| 1.0 - 2.0 * z + 0.5 * z * z * z;
        let (b, w) = cubic_weights(0.37, 0.0, 0.1, 11).unwrap();
        let v: f64 = (0..4).map(|a| w[a] * f((b + a) as f64 * 0.1)).sum();
        assert!((v - f(0.37)).abs() < 1e-13);
        assert!(cubic_weights(1.2, 0.0, 0.1, 11).is_none());
    }
}
