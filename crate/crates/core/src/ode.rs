//! Adaptive Dormand–Prince 5(4) integration with output at prescribed times.

use crate::error::{Error, Result};

const RTOL: f64 = 1e-12;
const ATOL: f64 = 1e-14;
const SAFETY: f64 = 0.9;

/// Integrates `y' = rhs(t, y)` from `t_out[0]` with initial state `y0`,
/// recording the state at every entry of `t_out` (strictly increasing).
/// Steps are clipped so each output time is hit exactly.
pub fn integrate_at<const D: usize, F>(rhs: F, y0: [f64; D], t_out: &[f64]) -> Result<Vec<[f64; D]>>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    assert!(!t_out.is_empty());
    let span = t_out[t_out.len() - 1] - t_out[0];
    let mut out = Vec::with_capacity(t_out.len());
    out.push(y0);

    let mut t = t_out[0];
    let mut y = y0;
    let mut h = (span / 100.0).max(1e-8);

    for &target in &t_out[1..] {
        while t < target {
            let h_try = h.min(target - t);
            let (y_new, err) = dp45_step(&rhs, t, &y, h_try);
            let tol = err_norm_tol(&y, &y_new);
            if err <= tol {
                t += h_try;
                y = y_new;
                let grow = if err > 0.0 {
                    SAFETY * (tol / err).powf(0.2)
                } else {
                    5.0
                };
                h = (h_try * grow.clamp(0.2, 5.0)).max(1e-14 * span.abs());
            } else {
                h = h_try * (SAFETY * (tol / err).powf(0.2)).clamp(0.1, 0.9);
                if h < 1e-14 * span.abs() {
                    return Err(Error::StepSizeUnderflow { t });
                }
            }
        }
        out.push(y);
    }
    Ok(out)
}

fn err_norm_tol<const D: usize>(y: &[f64; D], y_new: &[f64; D]) -> f64 {
    let mut scale: f64 = ATOL;
    for i in 0..D {
        scale = scale.max(RTOL * y[i].abs().max(y_new[i].abs()));
    }
    scale
}

/// One Dormand–Prince 5(4) step; returns the 5th-order solution and the
/// max-norm of the embedded error estimate.
fn dp45_step<const D: usize, F>(rhs: &F, t: f64, y: &[f64; D], h: f64) -> ([f64; D], f64)
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 6] = [
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    let mut k = [[0.0; D]; 7];
    k[0] = rhs(t, y);
    for s in 0..6 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s + 1) {
            let a = A[s][j];
            if a != 0.0 {
                for i in 0..D {
                    ys[i] += h * a * kj[i];
                }
            }
        }
        k[s + 1] = rhs(t + C[s] * h, &ys);
    }

    let mut y5 = *y;
    let mut err: f64 = 0.0;
    for i in 0..D {
        let mut acc5 = 0.0;
        let mut acc4 = 0.0;
        for (s, ks) in k.iter().enumerate() {
            acc5 += B5[s] * ks[i];
            acc4 += B4[s] * ks[i];
        }
        y5[i] += h * acc5;
        err = err.max((h * (acc5 - acc4)).abs());
    }
    (y5, err)
}
