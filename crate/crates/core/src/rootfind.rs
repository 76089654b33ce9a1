//! Scalar root finding: bisection for monotone residuals and Brent's method
//! for the consistency map.

/// Bisection on `[lo, hi]` for a continuous function with `f(lo) <= 0 <= f(hi)`
/// (or the reverse). Runs until the bracket collapses or `|f| < f_tol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, f_tol: f64) -> f64 {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return lo;
    }
    if fhi == 0.0 {
        return hi;
    }
    debug_assert!(flo * fhi < 0.0, "bisect needs a sign change");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let fm = f(mid);
        if fm.abs() < f_tol {
            return mid;
        }
        if fm * flo <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    0.5 * (lo + hi)
}

/// Outcome of a Brent solve.
#[derive(Debug, Clone, Copy)]
pub struct BrentResult {
    pub root: f64,
    pub f_root: f64,
    pub iterations: usize,
}

/// Brent's method on a bracketing interval `[a, b]` with `f(a) f(b) <= 0`.
///
/// Terminates when `|f| <= f_tol` or the bracket shrinks to rounding
/// resolution `x_tol + 4 eps |x|`.
pub fn brent<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, f_tol: f64, x_tol: f64) -> BrentResult {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    debug_assert!(fa * fb <= 0.0, "brent needs a sign change");
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    for iter in 0..200 {
        if fb.abs() <= f_tol {
            return BrentResult {
                root: b,
                f_root: fb,
                iterations: iter,
            };
        }
        if fa.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * x_tol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol {
            return BrentResult {
                root: b,
                f_root: fb,
                iterations: iter,
            };
        }
        if e.abs() < tol || fa.abs() <= fb.abs() {
            d = m;
            e = m;
        } else {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                // Secant step.
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                // Inverse quadratic interpolation.
                let q0 = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * q0 * (q0 - r) - (b - a) * (r - 1.0));
                q = (q0 - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol {
            d
        } else if m > 0.0 {
            tol
        } else {
            -tol
        };
        fb = f(b);
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            e = b - a;
            d = e;
        }
    }
    BrentResult {
        root: b,
        f_root: fb,
        iterations: 200,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_simple() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-15);
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn brent_transcendental() {
        let res = brent(|x| x.exp() - 3.0, 0.0, 2.0, 1e-15, 0.0);
        assert!((res.root - 3.0f64.ln()).abs() < 1e-13);
        assert!(res.iterations < 30);
    }

    #[test]
    fn brent_exact_endpoint() {
        let res = brent(|x| x, 0.0, 1.0, 1e-16, 0.0);
        assert!(res.root.abs() < 1e-15);
    }
}
