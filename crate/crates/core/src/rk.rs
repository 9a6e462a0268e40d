//! Dormand–Prince 5(4) with an embedded error estimate and step control.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights (same as the last row of `A`).
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
/// Difference between the fifth- and fourth-order weights.
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RkOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; estimated when `None`.
    pub h0: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl RkOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, h0: None, h_max: f64::INFINITY, max_steps: 1_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RkStats {
    pub steps: usize,
    pub rejected: usize,
    /// Largest local error estimate over accepted steps (max norm).
    pub max_local_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub t: f64,
    pub y: Vec<f64>,
    pub stats: RkStats,
}

/// One Dormand–Prince step from `(t, y)` with step `h`; returns the
/// fifth-order solution and the error estimate vector.
pub fn dp5_step<F>(f: &mut F, t: f64, y: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len();
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    for s in 0..7 {
        for i in 0..n {
            tmp[i] = y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
        }
        f(t + C[s] * h, &tmp, &mut k[s])?;
    }
    let y5: Vec<f64> = (0..n).map(|i| y[i] + h * (0..7).map(|s| B[s] * k[s][i]).sum::<f64>()).collect();
    let err: Vec<f64> = (0..n).map(|i| h * (0..7).map(|s| E[s] * k[s][i]).sum::<f64>()).collect();
    Ok((y5, err))
}

/// Scaled max norm of the error estimate.
pub fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], opts: &RkOptions) -> f64 {
    err.iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| e.abs() / (opts.atol + opts.rtol * a.abs().max(b.abs())))
        .fold(0.0, f64::max)
}

/// Next step size from a scaled error `norm` of the last attempt.
pub fn next_step(h: f64, norm: f64) -> f64 {
    let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
    h * factor
}

fn initial_step<F>(f: &mut F, t0: f64, y0: &[f64], span: f64, opts: &RkOptions) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let mut d = vec![0.0; y0.len()];
    f(t0, y0, &mut d)?;
    let scale =
        |v: &[f64]| v.iter().zip(y0).map(|(a, b)| a.abs() / (opts.atol + opts.rtol * b.abs())).fold(0.0, f64::max);
    let (d0, d1) = (scale(y0), scale(&d));
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    Ok(h.min(span.abs()).max(1e-12 * span.abs()))
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
pub fn integrate<F>(mut f: F, t0: f64, t1: f64, y0: &[f64], opts: &RkOptions) -> Result<Solution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let span = t1 - t0;
    let dir = span.signum();
    let mut stats = RkStats::default();
    if span == 0.0 {
        return Ok(Solution { t: t0, y: y0.to_vec(), stats });
    }
    let mut h = match opts.h0 {
        Some(h) => h.abs(),
        None => initial_step(&mut f, t0, y0, span, opts)?,
    }
    .min(opts.h_max);
    let mut t = t0;
    let mut y = y0.to_vec();
    while dir * (t1 - t) > 0.0 {
        if stats.steps + stats.rejected >= opts.max_steps {
            return Err(Error::ToleranceNotMet { t, h });
        }
        let last = h >= (t1 - t).abs();
        let hs = if last { t1 - t } else { dir * h };
        let (y5, err) = dp5_step(&mut f, t, &y, hs)?;
        let norm = error_norm(&err, &y, &y5, opts);
        if !norm.is_finite() {
            h *= 0.2;
            stats.rejected += 1;
        } else if norm <= 1.0 {
            stats.steps += 1;
            stats.max_local_error = stats.max_local_error.max(err.iter().fold(0.0, |m, e| m.max(e.abs())));
            t = if last { t1 } else { t + hs };
            y = y5;
            h = next_step(hs.abs(), norm).min(opts.h_max);
        } else {
            stats.rejected += 1;
            h = next_step(hs.abs(), norm);
        }
        if h < 1e-14 * (1.0 + t.abs()) {
            return Err(Error::ToleranceNotMet { t, h });
        }
    }
    Ok(Solution { t, y, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn tableau_consistency() {
        for s in 0..7 {
            let row: f64 = A[s].iter().sum();
            assert!((row - C[s]).abs() < 1e-15, "row {s}");
        }
        assert!((B.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(E.iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn exponential_growth() {
        let sol = integrate(
            |_, y, d| {
                d[0] = y[0];
                Ok(())
            },
            0.0,
            1.0,
            &[1.0],
            &RkOptions::with_tol(1e-12),
        )
        .unwrap();
        assert_relative_eq!(sol.y[0], 1f64.exp(), max_relative = 1e-11);
    }

    #[test]
    fn fifth_order_single_step() {
        // local error of one step on y' = y scales like h^6
        let mut f = |_: f64, y: &[f64], d: &mut [f64]| {
            d[0] = y[0];
            Ok(())
        };
        let e1 = (dp5_step(&mut f, 0.0, &[1.0], 0.1).unwrap().0[0] - 0.1f64.exp()).abs();
        let e2 = (dp5_step(&mut f, 0.0, &[1.0], 0.05).unwrap().0[0] - 0.05f64.exp()).abs();
        let ratio = e1 / e2;
        assert!(ratio > 50.0 && ratio < 80.0, "ratio {ratio}");
    }

    #[test]
    fn backward_harmonic() {
        let sol = integrate(
            |_, y, d| {
                d[0] = -y[1];
                d[1] = y[0];
                Ok(())
            },
            0.0,
            -std::f64::consts::PI,
            &[1.0, 0.0],
            &RkOptions::with_tol(1e-12),
        )
        .unwrap();
        assert!((sol.y[0] + 1.0).abs() < 1e-10);
        assert!(sol.y[1].abs() < 1e-10);
        assert!(sol.stats.steps > 0);
    }

    #[test]
    fn errors_propagate() {
        let r =
            integrate(|_, _, _| Err(Error::InvalidArgument("x".into())), 0.0, 1.0, &[1.0], &RkOptions::with_tol(1e-8));
        assert!(r.is_err());
    }
}
