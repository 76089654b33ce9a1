use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("illegal family parameters: {0}")]
    IllegalFamilyParams(String),

    #[error("derivative order {order} unsupported for family {family} (max {max})")]
    OrderUnsupported {
        family: &'static str,
        order: usize,
        max: usize,
    },

    #[error(
        "quadrature did not converge: error estimate {achieved:.3e} > requested {requested:.3e}"
    )]
    QuadratureNoConvergence { achieved: f64, requested: f64 },

    #[error("ODE step size underflow at t = {t:.6e}")]
    StepSizeUnderflow { t: f64 },

    #[error("profile tabulation disagrees with closed form for {what}: max discrepancy {max_discrepancy:.3e}")]
    ProfileMismatch {
        what: &'static str,
        max_discrepancy: f64,
    },

    #[error("resonant decay rates |2*M1 - M0| < 1e-8 (M0 = {m0}, M1 = {m1}): envelope constant undefined")]
    ResonantRates { m0: f64, m1: f64 },

    #[error("bad dimension N = {n} for domain kind {kind}")]
    BadDimension { kind: &'static str, n: usize },

    #[error("depth {depth} outside [0, {d_star}]")]
    DepthOutOfRange { depth: f64, d_star: f64 },

    #[error("Newton did not converge after {iters} iterations (residual {residual:.3e})")]
    NewtonDiverged { iters: usize, residual: f64 },

    #[error("grid too coarse: {nodes_in_layer} nodes within one layer width {theta:.3e} of the boundary (need >= 8)")]
    GridTooCoarse { nodes_in_layer: usize, theta: f64 },

    #[error("no sign change of the consistency map on [{lo:.6e}, {hi:.6e}] after widening")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("degenerate order fit: residuals not all positive")]
    DegenerateFit,

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
