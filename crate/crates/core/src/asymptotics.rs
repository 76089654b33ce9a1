//! Expansion coefficients and pointwise predictions.
//!
//! Assembles the first- and second-order coefficients of the average
//! `B_eps = avg q(u)` from previously computed pieces, evaluates the
//! two-term interior expansion `W + c_Phi Phi + eps (N-1) H Psi`, and the
//! explicit boundary asymptotics with the combined nonlocal/geometric
//! constant `G`.
//!
//! Sign conventions: `B2` is stored so that the expansion reads
//! `B_eps = q(0) + eps B1 + eps^2 B2`, and all normal derivatives point
//! from the interior toward the boundary (on a ball this is `+d/dr`).

use serde::Serialize;

use crate::error::Result;
use crate::geometry::{BoundaryComponent, DomainGeometry};
use crate::nonlinearity::NonlocalProblem;
use crate::profiles::{expansion_functionals, LayerProfiles};

/// All scalar expansion data for one (problem, domain) pair.
#[derive(Debug, Clone, Serialize)]
pub struct ExpansionCoefficients {
    pub b_star: f64,
    #[serde(rename = "A0")]
    pub a0: f64,
    #[serde(rename = "QF_bstar")]
    pub qf_bstar: f64,
    #[serde(rename = "I_WPhi")]
    pub i_wphi: f64,
    #[serde(rename = "J_WPsi")]
    pub j_wpsi: f64,
    #[serde(rename = "B1")]
    pub b1: f64,
    #[serde(rename = "B2")]
    pub b2: f64,
    /// First-order coefficient of `A(B_eps)`: `A'(q(0)) B1`.
    #[serde(rename = "A1")]
    pub a1: f64,
    /// Boundary constant `G` on the outer boundary component.
    #[serde(rename = "G_boundary")]
    pub g_boundary: f64,
    /// `G` on the inner component (annuli only).
    #[serde(rename = "G_boundary_inner", skip_serializing_if = "Option::is_none")]
    pub g_boundary_inner: Option<f64>,
}

/// Assembles every coefficient from the profile tabulations; no new
/// quadrature beyond the profile-grid functionals.
pub fn b_coefficients(
    p: &NonlocalProblem,
    profiles: &LayerProfiles,
    dom: &DomainGeometry,
) -> ExpansionCoefficients {
    let a0 = profiles.a0;
    let q0 = p.q.value(0.0);
    let ap0 = p.a.deriv(q0);
    let (i_wphi, j_wpsi) = expansion_functionals(p, profiles);
    let sv = dom.surf / dom.vol;

    let b1 = sv * a0.sqrt() * profiles.qf_bstar;
    let b2 = -(ap0 / a0.powf(1.5)) * profiles.qf_bstar * i_wphi * sv * sv
        - (dom.dim as f64 - 1.0) * j_wpsi * dom.h_int / dom.vol;
    let a1 = ap0 * b1;

    let g_boundary = boundary_g(p, profiles, dom, BoundaryComponent::Outer);
    let g_boundary_inner = match dom.kind {
        crate::geometry::DomainKind::Annulus { .. } => {
            Some(boundary_g(p, profiles, dom, BoundaryComponent::Inner))
        }
        _ => None,
    };

    ExpansionCoefficients {
        b_star: profiles.b_star,
        a0,
        qf_bstar: profiles.qf_bstar,
        i_wphi,
        j_wpsi,
        b1,
        b2,
        a1,
        g_boundary,
        g_boundary_inner,
    }
}

/// `G = (|dOmega|/|Omega|) (A'(q(0))/A0) F(b*) Q_F(b*)
///      + (N-1) H \int_0^{b*} sqrt(2F(s)) ds` on one boundary component.
fn boundary_g(
    p: &NonlocalProblem,
    profiles: &LayerProfiles,
    dom: &DomainGeometry,
    component: BoundaryComponent,
) -> f64 {
    let a0 = profiles.a0;
    let q0 = p.q.value(0.0);
    // \int_0^{b*} sqrt(2F) = sqrt(A0) G(b*).
    let int_sqrt_2f = a0.sqrt() * profiles.g_bstar;
    (dom.surf / dom.vol)
        * (p.a.deriv(q0) / a0)
        * p.antiderivative_f(profiles.b_star)
        * profiles.qf_bstar
        + (dom.dim as f64 - 1.0) * dom.mean_curvature(component) * int_sqrt_2f
}

impl ExpansionCoefficients {
    pub fn g_at(&self, component: BoundaryComponent) -> f64 {
        match component {
            BoundaryComponent::Outer => self.g_boundary,
            BoundaryComponent::Inner => self.g_boundary_inner.unwrap_or(self.g_boundary),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("coefficients serialize")
    }
}

/// Predicted average `q(0) + eps B1 + eps^2 B2`.
pub fn predict_b(coeffs: &ExpansionCoefficients, p: &NonlocalProblem, eps: f64) -> f64 {
    p.q.value(0.0) + eps * coeffs.b1 + eps * eps * coeffs.b2
}

/// Interior prediction at depth `delta` from the given boundary component.
///
/// Returns `(u_pred, dnu_pred)` where `dnu` points toward the boundary.
/// With `b_eps_measured` supplied the correction amplitude is the measured
/// `(A0 - A(B_eps))/A0^2`; otherwise the fully predicted first-order form
/// `-eps (|dOmega|/|Omega|) A'(q(0)) Q_F(b*) / A0^{3/2}` is used.
#[allow(clippy::too_many_arguments)]
pub fn predict_interior(
    p: &NonlocalProblem,
    profiles: &LayerProfiles,
    coeffs: &ExpansionCoefficients,
    dom: &DomainGeometry,
    eps: f64,
    delta: f64,
    component: BoundaryComponent,
    b_eps_measured: Option<f64>,
) -> Result<(f64, f64)> {
    let a0 = profiles.a0;
    let t = delta / eps;
    let h_delta = dom.curvature_at_depth(delta, component)?;

    let c_phi = match b_eps_measured {
        Some(b) => (a0 - p.a.value(b)) / (a0 * a0),
        None => {
            let q0 = p.q.value(0.0);
            -eps * (dom.surf / dom.vol) * p.a.deriv(q0) * coeffs.qf_bstar / a0.powf(1.5)
        }
    };

    let curv = (dom.dim as f64 - 1.0) * h_delta;
    let u_pred = profiles.w_at(t) + c_phi * profiles.phi_at(t) + eps * curv * profiles.psi_at(t);
    let dnu_pred = -profiles.wp_at(p, t) / eps
        - c_phi * profiles.phip_at(t) / eps
        - curv * profiles.psip_at(t);
    Ok((u_pred, dnu_pred))
}

/// Boundary prediction: `(u_pred, dnu_pred, G)` on one component.
pub fn predict_boundary(
    p: &NonlocalProblem,
    profiles: &LayerProfiles,
    coeffs: &ExpansionCoefficients,
    eps: f64,
    component: BoundaryComponent,
) -> (f64, f64, f64) {
    if profiles.b_star == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let a0 = profiles.a0;
    let b = profiles.b_star;
    let g = coeffs.g_at(component);
    let denom = p.gamma * p.f.value(b) / a0.sqrt() + (2.0 * p.antiderivative_f(b)).sqrt();
    let u_pred = b + eps * p.gamma * g / denom;
    let dnu_pred = (2.0 * p.antiderivative_f(b) / a0).sqrt() / eps - g / denom;
    (u_pred, dnu_pred, g)
}
