//! Canonical benchmark problems used across the test suite and shipped as
//! problem files under `fixtures/`.
//!
//! * `fix_l0` — fully linear, Dirichlet, unit disk: every profile and
//!   coefficient has a closed form.
//! * `fix_l1` — like `fix_l0` but with solution-dependent diffusion
//!   `A(s) = 1 + s`, so the nonlocal correction is active.
//! * `fix_lg` — linear with Robin weight `gamma = 1` on the unit interval.
//! * `fix_nl` — cubic reaction, quadratic sampling, exponential diffusion on
//!   the unit ball: exercises every nonlinear code path.

use crate::geometry::DomainGeometry;
use crate::nonlinearity::{NonlocalProblem, ScalarFamily};

pub fn fix_l0() -> (NonlocalProblem, DomainGeometry) {
    (
        NonlocalProblem::new(
            ScalarFamily::linear(1.0).unwrap(),
            ScalarFamily::linear(1.0).unwrap(),
            ScalarFamily::constant(1.0).unwrap(),
            1.0,
            0.0,
        ),
        DomainGeometry::ball(2, 1.0).unwrap(),
    )
}

pub fn fix_l1() -> (NonlocalProblem, DomainGeometry) {
    (
        NonlocalProblem::new(
            ScalarFamily::linear(1.0).unwrap(),
            ScalarFamily::linear(1.0).unwrap(),
            ScalarFamily::affine(1.0, 1.0).unwrap(),
            1.0,
            0.0,
        ),
        DomainGeometry::ball(2, 1.0).unwrap(),
    )
}

pub fn fix_lg() -> (NonlocalProblem, DomainGeometry) {
    (
        NonlocalProblem::new(
            ScalarFamily::linear(1.0).unwrap(),
            ScalarFamily::linear(1.0).unwrap(),
            ScalarFamily::constant(1.0).unwrap(),
            1.0,
            1.0,
        ),
        DomainGeometry::interval(1.0).unwrap(),
    )
}

pub fn fix_nl() -> (NonlocalProblem, DomainGeometry) {
    (
        NonlocalProblem::new(
            ScalarFamily::cubic(1.0, 1.0).unwrap(),
            ScalarFamily::power(2).unwrap(),
            ScalarFamily::affine_exp(1.0, -1.0).unwrap(),
            1.0,
            0.0,
        ),
        DomainGeometry::ball(3, 1.0).unwrap(),
    )
}

/// All four fixtures with their conventional names.
pub fn all() -> Vec<(&'static str, NonlocalProblem, DomainGeometry)> {
    let (p0, d0) = fix_l0();
    let (p1, d1) = fix_l1();
    let (pg, dg) = fix_lg();
    let (pn, dn) = fix_nl();
    vec![
        ("fix-l0", p0, d0),
        ("fix-l1", p1, d1),
        ("fix-lg", pg, dg),
        ("fix-nl", pn, dn),
    ]
}
