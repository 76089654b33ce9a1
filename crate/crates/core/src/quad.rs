//! Quadrature: adaptive Gauss–Kronrod on finite intervals and composite
//! Simpson over tabulated data on non-uniform grids.

use crate::error::{Error, Result};

/// Absolute tolerance for adaptive quadrature.
pub const QUAD_ABS_TOL: f64 = 1e-12;
/// Relative tolerance for adaptive quadrature.
pub const QUAD_REL_TOL: f64 = 1e-10;

const MAX_SUBDIVISIONS: usize = 4000;

// 15-point Kronrod abscissae (positive half) and weights, with the embedded
// 7-point Gauss weights. Standard QUADPACK values.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// One Gauss–Kronrod 15(7) panel.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];

    for (j, &x) in XGK.iter().enumerate().take(7) {
        let dx = half * x;
        let fsum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }

    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

/// Adaptive integration of `f` over `[a, b]`.
///
/// Bisects the panel with the largest error estimate until the total
/// estimate satisfies `max(QUAD_ABS_TOL, QUAD_REL_TOL * |result|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (value, err) = gk15(&f, a, b);
    let mut panels = vec![Panel { a, b, value, err }];

    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let err_total: f64 = panels.iter().map(|p| p.err).sum();
        let tol = QUAD_ABS_TOL.max(QUAD_REL_TOL * total.abs());
        if err_total <= tol {
            return Ok(total);
        }
        if panels.len() >= MAX_SUBDIVISIONS {
            return Err(Error::QuadratureNoConvergence {
                achieved: err_total,
                requested: tol,
            });
        }
        // Split the worst panel.
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .expect("non-empty panel list");
        let worst = panels.swap_remove(idx);
        let mid = 0.5 * (worst.a + worst.b);
        if mid == worst.a || mid == worst.b {
            // Interval no longer splittable; accept its estimate.
            panels.push(worst);
            let err_total: f64 = panels.iter().map(|p| p.err).sum();
            let total: f64 = panels.iter().map(|p| p.value).sum();
            let tol = QUAD_ABS_TOL.max(QUAD_REL_TOL * total.abs());
            if err_total <= tol {
                return Ok(total);
            }
            return Err(Error::QuadratureNoConvergence {
                achieved: err_total,
                requested: tol,
            });
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        panels.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        panels.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
    }
}

/// Composite quadrature of tabulated values on a non-uniform grid.
///
/// Fits a quadratic through consecutive node triples (non-uniform Simpson).
/// An odd leftover interval is integrated from the quadratic through the
/// last three nodes.
pub fn integrate_tabulated(t: &[f64], y: &[f64]) -> f64 {
    assert_eq!(t.len(), y.len());
    let n = t.len();
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return 0.5 * (t[1] - t[0]) * (y[0] + y[1]);
    }

    let mut total = 0.0;
    let mut i = 0;
    while i + 2 < n {
        let (h0, h1) = (t[i + 1] - t[i], t[i + 2] - t[i + 1]);
        let h = h0 + h1;
        total += h / 6.0
            * ((2.0 - h1 / h0) * y[i] + h * h / (h0 * h1) * y[i + 1] + (2.0 - h0 / h1) * y[i + 2]);
        i += 2;
    }
    if i + 2 == n {
        // Leftover interval [t[n-2], t[n-1]]: integrate the quadratic through
        // the last three nodes over that interval alone.
        total += quadratic_piece(
            (t[n - 3], y[n - 3]),
            (t[n - 2], y[n - 2]),
            (t[n - 1], y[n - 1]),
            t[n - 2],
            t[n - 1],
        );
    }
    total
}

/// Integral over `[lo, hi]` of the quadratic interpolating three points.
fn quadratic_piece(a: (f64, f64), b: (f64, f64), c: (f64, f64), lo: f64, hi: f64) -> f64 {
    let ((ta, ya), (tb, yb), (tc, yc)) = (a, b, c);
    // Newton's divided differences: p(x) = ya + d1 (x-ta) + d2 (x-ta)(x-tb).
    let d1 = (yb - ya) / (tb - ta);
    let d2 = ((yc - yb) / (tc - tb) - d1) / (tc - ta);
    let prim = |x: f64| {
        let u = x - ta;
        ya * u + d1 * u * u / 2.0 + d2 * (u * u * u / 3.0 - (tb - ta) * u * u / 2.0)
    };
    prim(hi) - prim(lo)
}

/// Closure for `\int_T^\infty t^k v(T) e^{-rate (t - T)} dt`, the analytic
/// tail of a moment integral once the integrand is assumed purely
/// exponential beyond the tabulated range.
pub fn exponential_tail_moment(k: usize, t_end: f64, value_end: f64, rate: f64) -> f64 {
    assert!(rate > 0.0);
    let r = rate;
    match k {
        0 => value_end / r,
        1 => value_end * (t_end / r + 1.0 / (r * r)),
        2 => value_end * (t_end * t_end / r + 2.0 * t_end / (r * r) + 2.0 / (r * r * r)),
        _ => unreachable!("moments only defined for k in 0..=2"),
    }
}
