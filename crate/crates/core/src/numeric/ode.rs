use super::{NumericError, Result};

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-9, atol: 1e-12, max_steps: 2_000_000 }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights are the last row of A; these are fifth minus fourth order
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive Dormand–Prince 5(4). Returns the state at each of `t_out`
/// (ascending, none before `t0`), stepping exactly onto each output time.
pub fn dp45<F>(mut f: F, t0: f64, y0: &[f64], t_out: &[f64], opts: OdeOptions) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut out = Vec::with_capacity(t_out.len());
    let span = t_out.last().map_or(0.0, |e| e - t0).abs().max(1e-12);
    let mut h = 1e-3 * span;
    let mut steps = 0;
    f(t, &y, &mut k[0]);
    for &target in t_out {
        if target < t - 1e-14 * span {
            return Err(NumericError::Integrator("output times must be ascending".into()));
        }
        while target - t > 1e-14 * span {
            steps += 1;
            if steps > opts.max_steps {
                return Err(NumericError::Integrator(format!("step limit reached at t = {t}")));
            }
            let last = h >= target - t;
            let hs = if last { target - t } else { h };
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (r, kr) in k.iter().enumerate().take(s) {
                        acc += hs * A[s][r] * kr[i];
                    }
                    tmp[i] = acc;
                }
                f(t + C[s] * hs, &tmp, &mut k[s]);
            }
            // tmp now holds the fifth-order solution (FSAL row)
            let mut err: f64 = 0.0;
            for i in 0..n {
                let e: f64 = (0..7).map(|s| E[s] * k[s][i]).sum::<f64>() * hs;
                let sc = opts.atol + opts.rtol * y[i].abs().max(tmp[i].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                return Err(NumericError::Integrator(format!("non-finite state near t = {t}")));
            }
            if err <= 1.0 {
                t = if last { target } else { t + hs };
                y.copy_from_slice(&tmp);
                let k6 = k[6].clone();
                k[0] = k6;
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).min(5.0) };
                if !last {
                    h = hs * grow;
                } else {
                    h = h.max(hs * grow.min(1.0));
                }
            } else {
                h = hs * (0.9 * err.powf(-0.2)).max(0.2);
                if h < 1e-14 * span {
                    return Err(NumericError::Integrator(format!("step size underflow at t = {t}")));
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}
