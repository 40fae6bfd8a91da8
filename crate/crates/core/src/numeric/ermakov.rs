use serde::Serialize;

use super::ode::{dp45, OdeOptions};
use super::{NumericError, Result};

#[derive(Clone, Debug, Serialize)]
pub struct ErmakovReport {
    /// (A, B, C) and the Wronskian W of υ₁, υ₂.
    pub abc: [f64; 3],
    pub wronskian: f64,
    /// max |W(t) − W(0)|
    pub wronskian_drift: f64,
    /// max |ρ″ + ω²ρ − 1/ρ³|
    pub pinney_residual: f64,
    /// max |I(t) − I(0)| along the sample solution x(t)
    pub invariant_drift: f64,
    pub invariant: f64,
    /// T(t) = ∫ρ⁻² strictly increasing on the samples
    pub time_increasing: bool,
    /// max |x/ρ − (X₀ cos T + P₀ sin T)| for the canonical variables
    pub canonical_residual: f64,
    pub samples: usize,
}

/// Integrates υ₁ (1, 0), υ₂ (0, 1) and a sample solution x with initial data
/// `x0` of ẍ + ω²x = 0, forms ρ = √(Aυ₁² + 2Bυ₁υ₂ + Cυ₂²) and checks the
/// Pinney equation, the invariant and the canonical time T.
pub fn ermakov_suite<W>(omega: W, abc: [f64; 3], t_span: (f64, f64), x0: [f64; 2]) -> Result<ErmakovReport>
where
    W: Fn(f64) -> f64,
{
    let [a, b, c] = abc;
    // W = 1 for these initial data
    let w0 = 1.0;
    let gap = a * c - b * b - 1.0 / (w0 * w0);
    if gap.abs() > 1e-12 * (1.0 + (a * c).abs() + b * b) || a <= 0.0 {
        return Err(NumericError::Constraint(format!(
            "AC − B² = {} but 1/W² = {}",
            a * c - b * b,
            1.0 / (w0 * w0)
        )));
    }
    let rho = |y: &[f64]| (a * y[0] * y[0] + 2.0 * b * y[0] * y[2] + c * y[2] * y[2]).sqrt();
    let rhs = |t: f64, y: &[f64], d: &mut [f64]| {
        let w2 = omega(t).powi(2);
        d[0] = y[1];
        d[1] = -w2 * y[0];
        d[2] = y[3];
        d[3] = -w2 * y[2];
        d[4] = y[5];
        d[5] = -w2 * y[4];
        let r = rho(y);
        d[6] = 1.0 / (r * r);
    };
    let samples = 2000;
    let (t0, t1) = t_span;
    let times: Vec<f64> = (0..=samples).map(|i| t0 + (t1 - t0) * i as f64 / samples as f64).collect();
    let y0 = [1.0, 0.0, 0.0, 1.0, x0[0], x0[1], 0.0];
    let opts = OdeOptions { rtol: 1e-12, atol: 1e-14, ..OdeOptions::default() };
    let ys = dp45(rhs, t0, &y0, &times, opts)?;

    let mut report = ErmakovReport {
        abc,
        wronskian: w0,
        wronskian_drift: 0.0,
        pinney_residual: 0.0,
        invariant_drift: 0.0,
        invariant: 0.0,
        time_increasing: true,
        canonical_residual: 0.0,
        samples: times.len(),
    };
    let mut last_t = f64::NEG_INFINITY;
    let mut canon0 = None;
    for (t, y) in times.iter().zip(&ys) {
        let (u1, v1, u2, v2, x, xd, tt) = (y[0], y[1], y[2], y[3], y[4], y[5], y[6]);
        let w2 = omega(*t).powi(2);
        let wr = u1 * v2 - v1 * u2;
        report.wronskian_drift = report.wronskian_drift.max((wr - w0).abs());
        let r = rho(y);
        let q1 = a * u1 * v1 + b * (v1 * u2 + u1 * v2) + c * u2 * v2;
        let rd = q1 / r;
        // ½(ρ²)″ with υ″ = −ω²υ
        let half_q2 = a * (v1 * v1 - w2 * u1 * u1) + b * (2.0 * v1 * v2 - 2.0 * w2 * u1 * u2) + c * (v2 * v2 - w2 * u2 * u2);
        let rdd = (half_q2 - rd * rd) / r;
        report.pinney_residual = report.pinney_residual.max((rdd + w2 * r - 1.0 / r.powi(3)).abs());
        let inv = 0.5 * ((r * xd - rd * x).powi(2) + (x / r).powi(2));
        if canon0.is_none() {
            report.invariant = inv;
            // X = x/ρ, dX/dT = ρẋ − ρ̇x
            canon0 = Some((x / r, r * xd - rd * x));
        }
        report.invariant_drift = report.invariant_drift.max((inv - report.invariant).abs());
        let (cx, cp) = canon0.unwrap();
        report.canonical_residual = report.canonical_residual.max((x / r - (cx * tt.cos() + cp * tt.sin())).abs());
        if tt <= last_t {
            report.time_increasing = false;
        }
        last_t = tt;
    }
    Ok(report)
}
