//! Nonlinearity registry and the scalar transforms derived from it.
//!
//! The reaction term `f`, the sampling function `q`, and the diffusion
//! modulation `A` are drawn from a closed set of analytic families, so every
//! derivative used anywhere in the laboratory is exact. The module also
//! evaluates the antiderivative `F(t) = \int_0^t f` in closed form and the
//! integral transforms `Q_F`, `Q~_F`, and `G` by adaptive quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Maximum derivative order any formula in the laboratory requests.
/// (`f` and `A` are differentiated twice; `q` once.)
pub const MAX_DERIVATIVE_ORDER: usize = 2;

/// A scalar function family with exact derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum ScalarFamily {
    /// `a s`
    Linear { a: f64 },
    /// `a s + c s^3`, `a > 0`, `c >= 0`
    Cubic { a: f64, c: f64 },
    /// `a (e^s - 1)`
    ShiftedExp { a: f64 },
    /// `alpha e^{beta s}`
    AffineExp { alpha: f64, beta: f64 },
    /// `alpha + beta s`
    Affine { alpha: f64, beta: f64 },
    /// `s^p`, integer `p >= 2`
    Power { p: u32 },
    /// `c`
    Constant { c: f64 },
}

impl ScalarFamily {
    pub fn linear(a: f64) -> Result<Self> {
        ensure_finite(&[a])?;
        Ok(ScalarFamily::Linear { a })
    }

    pub fn cubic(a: f64, c: f64) -> Result<Self> {
        ensure_finite(&[a, c])?;
        if a <= 0.0 || c < 0.0 {
            return Err(Error::IllegalFamilyParams(format!(
                "cubic requires a > 0 and c >= 0, got a = {a}, c = {c}"
            )));
        }
        Ok(ScalarFamily::Cubic { a, c })
    }

    pub fn shifted_exp(a: f64) -> Result<Self> {
        ensure_finite(&[a])?;
        Ok(ScalarFamily::ShiftedExp { a })
    }

    pub fn affine_exp(alpha: f64, beta: f64) -> Result<Self> {
        ensure_finite(&[alpha, beta])?;
        Ok(ScalarFamily::AffineExp { alpha, beta })
    }

    pub fn affine(alpha: f64, beta: f64) -> Result<Self> {
        ensure_finite(&[alpha, beta])?;
        Ok(ScalarFamily::Affine { alpha, beta })
    }

    pub fn power(p: u32) -> Result<Self> {
        if p < 2 {
            return Err(Error::IllegalFamilyParams(format!(
                "power requires integer p >= 2, got {p}"
            )));
        }
        Ok(ScalarFamily::Power { p })
    }

    pub fn constant(c: f64) -> Result<Self> {
        ensure_finite(&[c])?;
        Ok(ScalarFamily::Constant { c })
    }

    /// Highest derivative order the family evaluates analytically.
    pub fn max_derivative_order(&self) -> usize {
        MAX_DERIVATIVE_ORDER
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ScalarFamily::Linear { .. } => "linear",
            ScalarFamily::Cubic { .. } => "cubic",
            ScalarFamily::ShiftedExp { .. } => "shifted-exp",
            ScalarFamily::AffineExp { .. } => "affine-exp",
            ScalarFamily::Affine { .. } => "affine",
            ScalarFamily::Power { .. } => "power",
            ScalarFamily::Constant { .. } => "constant",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            ScalarFamily::Linear { a } => vec![a],
            ScalarFamily::Cubic { a, c } => vec![a, c],
            ScalarFamily::ShiftedExp { a } => vec![a],
            ScalarFamily::AffineExp { alpha, beta } => vec![alpha, beta],
            ScalarFamily::Affine { alpha, beta } => vec![alpha, beta],
            ScalarFamily::Power { p } => vec![p as f64],
            ScalarFamily::Constant { c } => vec![c],
        }
    }

    /// Builds a family from its registry name and parameter list.
    pub fn from_kind(kind: &str, params: &[f64]) -> Result<Self> {
        let need = |n: usize| -> Result<()> {
            if params.len() != n {
                Err(Error::IllegalFamilyParams(format!(
                    "{kind} expects {n} parameter(s), got {}",
                    params.len()
                )))
            } else {
                Ok(())
            }
        };
        match kind {
            "linear" => {
                need(1)?;
                Self::linear(params[0])
            }
            "cubic" => {
                need(2)?;
                Self::cubic(params[0], params[1])
            }
            "shifted-exp" => {
                need(1)?;
                Self::shifted_exp(params[0])
            }
            "affine-exp" => {
                need(2)?;
                Self::affine_exp(params[0], params[1])
            }
            "affine" => {
                need(2)?;
                Self::affine(params[0], params[1])
            }
            "power" => {
                need(1)?;
                if params[0].fract() != 0.0 || params[0] < 0.0 {
                    return Err(Error::IllegalFamilyParams(format!(
                        "power exponent must be a nonnegative integer, got {}",
                        params[0]
                    )));
                }
                Self::power(params[0] as u32)
            }
            "constant" => {
                need(1)?;
                Self::constant(params[0])
            }
            other => Err(Error::IllegalFamilyParams(format!(
                "unknown family kind `{other}`"
            ))),
        }
    }

    /// Value of the `order`-th derivative at `s`.
    pub fn eval(&self, s: f64, order: usize) -> Result<f64> {
        if order > MAX_DERIVATIVE_ORDER {
            return Err(Error::OrderUnsupported {
                family: self.kind_name(),
                order,
                max: MAX_DERIVATIVE_ORDER,
            });
        }
        Ok(match *self {
            ScalarFamily::Linear { a } => match order {
                0 => a * s,
                1 => a,
                _ => 0.0,
            },
            ScalarFamily::Cubic { a, c } => match order {
                0 => a * s + c * s * s * s,
                1 => a + 3.0 * c * s * s,
                _ => 6.0 * c * s,
            },
            ScalarFamily::ShiftedExp { a } => match order {
                0 => a * s.exp_m1(),
                _ => a * s.exp(),
            },
            ScalarFamily::AffineExp { alpha, beta } => {
                alpha * beta.powi(order as i32) * (beta * s).exp()
            }
            ScalarFamily::Affine { alpha, beta } => match order {
                0 => alpha + beta * s,
                1 => beta,
                _ => 0.0,
            },
            ScalarFamily::Power { p } => {
                let p = p as i32;
                match order {
                    0 => s.powi(p),
                    1 => p as f64 * s.powi(p - 1),
                    _ => (p * (p - 1)) as f64 * s.powi(p - 2),
                }
            }
            ScalarFamily::Constant { c } => match order {
                0 => c,
                _ => 0.0,
            },
        })
    }

    /// Convenience: value at `s`.
    pub fn value(&self, s: f64) -> f64 {
        self.eval(s, 0).expect("order 0 always supported")
    }

    /// Convenience: first derivative at `s`.
    pub fn deriv(&self, s: f64) -> f64 {
        self.eval(s, 1).expect("order 1 always supported")
    }

    /// Exact antiderivative with value 0 at 0.
    pub fn antiderivative(&self, t: f64) -> f64 {
        match *self {
            ScalarFamily::Linear { a } => 0.5 * a * t * t,
            ScalarFamily::Cubic { a, c } => 0.5 * a * t * t + 0.25 * c * t.powi(4),
            ScalarFamily::ShiftedExp { a } => a * (t.exp_m1() - t),
            ScalarFamily::AffineExp { alpha, beta } => {
                if beta == 0.0 {
                    alpha * t
                } else {
                    alpha * (beta * t).exp_m1() / beta
                }
            }
            ScalarFamily::Affine { alpha, beta } => alpha * t + 0.5 * beta * t * t,
            ScalarFamily::Power { p } => t.powi(p as i32 + 1) / (p as f64 + 1.0),
            ScalarFamily::Constant { c } => c * t,
        }
    }

    /// Exact minimum of the first derivative over `[lo, hi]`.
    ///
    /// Every registry family has a monotone or constant derivative on an
    /// interval not containing an interior critical point of `f'` except
    /// cubic (minimum of `a + 3 c s^2` at `s = 0` when the interval straddles
    /// the origin) and power; all cases reduce to endpoint/vertex checks.
    pub fn min_deriv_on(&self, lo: f64, hi: f64) -> f64 {
        debug_assert!(lo <= hi);
        match *self {
            ScalarFamily::Linear { a } => a,
            ScalarFamily::Cubic { a, c } => {
                if lo <= 0.0 && 0.0 <= hi {
                    a
                } else {
                    let s = if lo.abs() < hi.abs() { lo } else { hi };
                    a + 3.0 * c * s * s
                }
            }
            ScalarFamily::ShiftedExp { a } => {
                if a >= 0.0 {
                    a * lo.exp()
                } else {
                    a * hi.exp()
                }
            }
            ScalarFamily::AffineExp { alpha, beta } => {
                let d = |s: f64| alpha * beta * (beta * s).exp();
                d(lo).min(d(hi))
            }
            ScalarFamily::Affine { beta, .. } => beta,
            ScalarFamily::Power { p } => {
                let d = |s: f64| p as f64 * s.powi(p as i32 - 1);
                if lo <= 0.0 && 0.0 <= hi {
                    d(lo).min(d(hi)).min(0.0)
                } else {
                    d(lo).min(d(hi))
                }
            }
            ScalarFamily::Constant { .. } => 0.0,
        }
    }

    /// Range of the family value over `[lo, hi]` (min, max), exact per family.
    pub fn range_on(&self, lo: f64, hi: f64) -> (f64, f64) {
        debug_assert!(lo <= hi);
        let ends = [self.value(lo), self.value(hi)];
        let mut min = ends[0].min(ends[1]);
        let max = ends[0].max(ends[1]);
        // Interior extrema: only affine-exp (none), cubic (monotone for a>0,
        // c>=0 on s>=0; critical points only when derivative changes sign)
        // and power with even p straddling 0 need a vertex check.
        match *self {
            ScalarFamily::Power { p } if p % 2 == 0 && lo < 0.0 && hi > 0.0 => {
                min = min.min(0.0);
            }
            // Cubic with a > 0, c >= 0 is monotone; no interior extremum.
            _ => {}
        }
        (min, max)
    }
}

fn ensure_finite(params: &[f64]) -> Result<()> {
    if params.iter().all(|p| p.is_finite()) {
        Ok(())
    } else {
        Err(Error::IllegalFamilyParams(format!(
            "parameters must be finite, got {params:?}"
        )))
    }
}

/// Which uniqueness-for-all-epsilon case the sign pattern of `(A', q')` hits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotoneUniquenessCase {
    /// `A' <= 0` and `q' >= 0` on the relevant ranges.
    CaseI,
    /// `A' >= 0` and `q' <= 0`.
    CaseII,
    Neither,
}

/// Outcome of validating a [`NonlocalProblem`].
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub inf_fprime: f64,
    pub a_range: (f64, f64),
    pub monotone_uniqueness_case: MonotoneUniquenessCase,
    pub messages: Vec<String>,
}

/// The full problem data: nonlinearities, boundary datum, and Robin weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlocalProblem {
    pub f: ScalarFamily,
    pub q: ScalarFamily,
    pub a: ScalarFamily,
    pub b0: f64,
    pub gamma: f64,
}

const VALIDATION_SAMPLES: usize = 10_000;

impl NonlocalProblem {
    pub fn new(f: ScalarFamily, q: ScalarFamily, a: ScalarFamily, b0: f64, gamma: f64) -> Self {
        NonlocalProblem { f, q, a, b0, gamma }
    }

    /// `A(q(0))`, the limiting diffusion coefficient.
    pub fn a0(&self) -> f64 {
        self.a.value(self.q.value(0.0))
    }

    /// `F(t) = \int_0^t f(s) ds`, exact per family.
    pub fn antiderivative_f(&self, t: f64) -> f64 {
        self.f.antiderivative(t)
    }

    /// Checks every structural requirement and classifies the problem.
    pub fn validate(&self) -> ValidationReport {
        let mut messages = Vec::new();
        let mut ok = true;

        if !self.b0.is_finite() || self.b0 < 0.0 {
            ok = false;
            messages.push(format!("b0 must be >= 0, got {}", self.b0));
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            ok = false;
            messages.push(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if self.b0 == 0.0 {
            messages.push("b0 = 0: problem admits only the trivial solution".into());
        }

        let b0 = self.b0.max(0.0);
        let (lo, hi) = (0.0f64.min(b0), 0.0f64.max(b0));

        // f(0) = 0 and inf f' > 0 on [0, b0]: analytic bound cross-checked by
        // dense sampling with a 10% safety margin.
        if self.f.value(0.0).abs() > 1e-14 {
            ok = false;
            messages.push(format!("f(0) must vanish, got {}", self.f.value(0.0)));
        }
        let inf_fprime_analytic = self.f.min_deriv_on(lo, hi);
        let inf_fprime_sampled = sample_min(|s| self.f.deriv(s), lo, hi);
        let inf_fprime = inf_fprime_analytic;
        if inf_fprime <= 0.0 {
            ok = false;
            messages.push(format!(
                "inf f' on [{lo}, {hi}] must be positive, got {inf_fprime}"
            ));
        } else if inf_fprime_sampled < 0.9 * inf_fprime_analytic {
            ok = false;
            messages.push(format!(
                "sampled inf f' = {inf_fprime_sampled} contradicts analytic bound {inf_fprime_analytic}"
            ));
        }

        // A > 0 on the range of q over [0, b0].
        let q_range = sample_range(|s| self.q.value(s), lo, hi);
        let a_range = sample_range(|s| self.a.value(s), q_range.0, q_range.1);
        if a_range.0 <= 0.0 {
            ok = false;
            messages.push(format!(
                "A must be positive on the q-range [{:.6e}, {:.6e}], min A = {:.6e}",
                q_range.0, q_range.1, a_range.0
            ));
        }

        // Monotone-uniqueness classification on the relevant ranges.
        let qp = sample_range(|s| self.q.deriv(s), lo, hi);
        let ap = sample_range(|s| self.a.deriv(s), q_range.0, q_range.1);
        let monotone_uniqueness_case = if ap.1 <= 0.0 && qp.0 >= 0.0 {
            MonotoneUniquenessCase::CaseI
        } else if ap.0 >= 0.0 && qp.1 <= 0.0 {
            MonotoneUniquenessCase::CaseII
        } else {
            MonotoneUniquenessCase::Neither
        };

        ValidationReport {
            ok,
            inf_fprime,
            a_range,
            monotone_uniqueness_case,
            messages,
        }
    }

    /// Validates and errors out on a rejected problem.
    pub fn validated(self) -> Result<Self> {
        let report = self.validate();
        if report.ok {
            Ok(self)
        } else {
            Err(Error::IllegalFamilyParams(report.messages.join("; ")))
        }
    }
}

fn sample_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return f(lo);
    }
    (0..=VALIDATION_SAMPLES)
        .map(|i| f(lo + (hi - lo) * i as f64 / VALIDATION_SAMPLES as f64))
        .fold(f64::INFINITY, f64::min)
}

fn sample_range<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> (f64, f64) {
    if lo == hi {
        let v = f(lo);
        return (v, v);
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for i in 0..=VALIDATION_SAMPLES {
        let v = f(lo + (hi - lo) * i as f64 / VALIDATION_SAMPLES as f64);
        min = min.min(v);
        max = max.max(v);
    }
    (min, max)
}

/// The integral transform requested from [`q_transform`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QTransform {
    /// `Q_F(t) = \int_0^t (q(s) - q(0)) / sqrt(2 F(s)) ds`
    QF,
    /// `Q~_F(t) = \int_0^t Q_F(s) / sqrt(2 F(s)) ds`
    QFTilde,
    /// `G(t) = \int_0^t sqrt(2 F(s) / A(q(0))) ds`
    G,
}

/// Evaluates `Q_F`, `Q~_F`, or `G` at `t >= 0` by adaptive quadrature.
///
/// The `Q_F` and `Q~_F` integrands have removable singularities at `s = 0`;
/// the integrand closures substitute the analytic limits `q'(0)/sqrt(f'(0))`
/// and `q'(0)/f'(0)` there.
pub fn q_transform(p: &NonlocalProblem, kind: QTransform, t: f64) -> Result<f64> {
    assert!(t >= 0.0, "q_transform requires t >= 0");
    if t == 0.0 {
        return Ok(0.0);
    }
    match kind {
        QTransform::QF => quad::integrate(|s| qf_integrand(p, s), 0.0, t),
        QTransform::QFTilde => {
            // Inner Q_F evaluated by its own adaptive quadrature: this route
            // stays independent of the profile-side tabulations it is used
            // to cross-check.
            let limit = p.q.deriv(0.0) / p.f.deriv(0.0);
            quad::integrate(
                |s| {
                    if s <= 0.0 {
                        return limit;
                    }
                    let two_f = 2.0 * p.antiderivative_f(s);
                    if two_f <= 0.0 {
                        return limit;
                    }
                    let qf = quad::integrate(|r| qf_integrand(p, r), 0.0, s)
                        .expect("inner Q_F quadrature");
                    qf / two_f.sqrt()
                },
                0.0,
                t,
            )
        }
        QTransform::G => {
            let a0 = p.a0();
            quad::integrate(
                |s| (2.0 * p.antiderivative_f(s) / a0).max(0.0).sqrt(),
                0.0,
                t,
            )
        }
    }
}

fn qf_integrand(p: &NonlocalProblem, s: f64) -> f64 {
    if s <= 0.0 {
        return p.q.deriv(0.0) / p.f.deriv(0.0).sqrt();
    }
    let two_f = 2.0 * p.antiderivative_f(s);
    if two_f <= 0.0 {
        return p.q.deriv(0.0) / p.f.deriv(0.0).sqrt();
    }
    (p.q.value(s) - p.q.value(0.0)) / two_f.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn eval_family_examples() {
        let cubic = ScalarFamily::cubic(1.0, 1.0).unwrap();
        assert_eq!(cubic.eval(2.0, 1).unwrap(), 13.0);
        let se = ScalarFamily::shifted_exp(1.0).unwrap();
        assert_eq!(se.eval(0.0, 0).unwrap(), 0.0);
        let aff = ScalarFamily::affine(1.0, 1.0).unwrap();
        assert_eq!(aff.eval(0.5, 1).unwrap(), 1.0);
    }

    #[test]
    fn order_cap_enforced() {
        let lin = ScalarFamily::linear(1.0).unwrap();
        assert!(matches!(
            lin.eval(1.0, 3),
            Err(Error::OrderUnsupported { order: 3, .. })
        ));
    }

    #[test]
    fn antiderivative_examples() {
        let (p, _) = fixtures::fix_l0();
        assert!((p.antiderivative_f(1.0) - 0.5).abs() < 1e-15);
        let (p, _) = fixtures::fix_nl();
        assert!((p.antiderivative_f(1.0) - 0.75).abs() < 1e-15);
        let two = NonlocalProblem::new(
            ScalarFamily::linear(2.0).unwrap(),
            ScalarFamily::linear(1.0).unwrap(),
            ScalarFamily::constant(1.0).unwrap(),
            1.0,
            0.0,
        );
        assert_eq!(two.antiderivative_f(0.0), 0.0);
    }

    #[test]
    fn validate_fixtures() {
        let (p, _) = fixtures::fix_l0();
        let report = p.validate();
        assert!(report.ok);
        // Constant A satisfies A' <= 0, linear q satisfies q' >= 0: case (i).
        assert_eq!(
            report.monotone_uniqueness_case,
            MonotoneUniquenessCase::CaseI
        );

        let (p, _) = fixtures::fix_nl();
        let report = p.validate();
        assert!(report.ok, "{:?}", report.messages);
        assert_eq!(
            report.monotone_uniqueness_case,
            MonotoneUniquenessCase::CaseI
        );
    }

    #[test]
    fn validate_rejects_decreasing_f() {
        let p = NonlocalProblem::new(
            ScalarFamily::linear(-1.0).unwrap(),
            ScalarFamily::linear(1.0).unwrap(),
            ScalarFamily::constant(1.0).unwrap(),
            1.0,
            0.0,
        );
        let report = p.validate();
        assert!(!report.ok);
        assert!(matches!(p.validated(), Err(Error::IllegalFamilyParams(_))));
    }

    #[test]
    fn validate_rejects_vanishing_fprime() {
        // f = s^2 has f'(0) = 0: not admissible as a reaction term.
        let p = NonlocalProblem::new(
            ScalarFamily::power(2).unwrap(),
            ScalarFamily::linear(1.0).unwrap(),
            ScalarFamily::constant(1.0).unwrap(),
            1.0,
            0.0,
        );
        assert!(!p.validate().ok);
    }

    #[test]
    fn illegal_cubic_params() {
        assert!(ScalarFamily::cubic(0.0, 1.0).is_err());
        assert!(ScalarFamily::cubic(1.0, -0.5).is_err());
        assert!(ScalarFamily::power(1).is_err());
    }

    #[test]
    fn q_transform_closed_forms() {
        let (p, _) = fixtures::fix_l0();
        // q(s) - q(0) = s and sqrt(2F) = s: integrand is 1.
        let qf = q_transform(&p, QTransform::QF, 1.0).unwrap();
        assert!((qf - 1.0).abs() < 1e-11, "{qf}");
        let qft = q_transform(&p, QTransform::QFTilde, 1.0).unwrap();
        assert!((qft - 1.0).abs() < 1e-9, "{qft}");
        assert_eq!(q_transform(&p, QTransform::G, 0.0).unwrap(), 0.0);
        // G(t) = t^2/2 for the linear fixture.
        let g = q_transform(&p, QTransform::G, 1.0).unwrap();
        assert!((g - 0.5).abs() < 1e-11);
    }

    #[test]
    fn qf_small_t_limit() {
        // Q_F(t)/t -> q'(0)/sqrt(f'(0)) as t -> 0+ (1e-3 tolerance,
        // relative where the limit is nonzero).
        for (p, _) in [fixtures::fix_nl(), fixtures::fix_l0(), fixtures::fix_lg()] {
            let expected = p.q.deriv(0.0) / p.f.deriv(0.0).sqrt();
            for t in [1e-4, 1e-6] {
                let ratio = q_transform(&p, QTransform::QF, t).unwrap() / t;
                assert!(
                    (ratio - expected).abs() <= 1e-3 * expected.abs().max(1.0),
                    "t={t}: ratio {ratio} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn f_strictly_increasing_and_convex_on_samples() {
        for (p, _) in [fixtures::fix_l0(), fixtures::fix_nl(), fixtures::fix_lg()] {
            let big_f = |t: f64| p.antiderivative_f(t);
            let mut prev = 0.0;
            for i in 1..=100 {
                let t = p.b0 * i as f64 / 100.0;
                let v = big_f(t);
                assert!(v > prev, "F must increase on (0, b0]");
                prev = v;
            }
            // Midpoint convexity wherever f' > 0.
            for i in 0..50 {
                let t1 = p.b0 * i as f64 / 50.0;
                let t2 = p.b0 * (i + 1) as f64 / 50.0;
                let mid = 0.5 * (t1 + t2);
                assert!(big_f(mid) <= 0.5 * (big_f(t1) + big_f(t2)) + 1e-15);
            }
        }
    }
}
