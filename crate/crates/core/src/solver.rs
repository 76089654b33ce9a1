//! Reference solver for the full problem on radial domains.
//!
//! For each trial layer width `theta` the local problem
//! `theta^2 (v'' + (N-1)/r v') = f(v)` with Robin data is solved by damped
//! Newton on a second-order finite-difference discretization (ghost-point
//! boundary closure, L'Hopital closure `N v''` of the radial term at
//! `r = 0`). The consistency map `M_eps(theta) = theta^2 - eps^2 A(avg q(v))`
//! is then driven to zero by Brent's method on a bracket around
//! `eps sqrt(A(q(0)))`; its unique root identifies the solution of the
//! nonlocal problem.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::DomainGeometry;
use crate::grid::{fd_weights, RadialGrid};
use crate::nonlinearity::NonlocalProblem;
use crate::profiles::LayerProfiles;
use crate::quad;
use crate::rootfind;

/// Newton convergence threshold on the max-norm residual.
pub const NEWTON_TOL: f64 = 1e-11;
const MAX_NEWTON_ITERS: usize = 50;
/// Relative step for the centered difference `dv/dtheta`.
const DTHETA_REL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOptions {
    /// Skip the layer-resolution heuristic. The wide-scan diagnostic probes
    /// `theta` three orders of magnitude below the layer scale, where the
    /// map sign is still meaningful but the heuristic would refuse to run.
    pub allow_coarse: bool,
}

/// Converged solution of the local problem at fixed `theta`.
#[derive(Debug, Clone)]
pub struct LocalSolution {
    pub theta: f64,
    pub eps: f64,
    pub v: Vec<f64>,
    pub newton_iters: usize,
    pub residual_norm: f64,
}

/// Solution of the nonlocal problem at one `eps`.
#[derive(Debug, Clone, Serialize)]
pub struct NonlocalSolution {
    pub theta_of_eps: f64,
    #[serde(skip)]
    pub eps: f64,
    #[serde(skip)]
    pub r: Vec<f64>,
    #[serde(skip)]
    pub u: Vec<f64>,
    /// `avg q(u)` over the domain.
    #[serde(rename = "B_eps")]
    pub b_eps: f64,
    /// Outward normal derivative of `u` at the outer boundary.
    pub dnu_boundary: f64,
    pub newton_iters: usize,
    pub map_residual: f64,
}

/// Derivative of the consistency map together with the `dv/dtheta` field.
#[derive(Debug, Clone)]
pub struct MapDerivative {
    pub value: f64,
    pub dv_dtheta: Vec<f64>,
}

struct Tridiag {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl Tridiag {
    /// Thomas algorithm; consumes the right-hand side.
    fn solve(&self, mut rhs: Vec<f64>) -> Vec<f64> {
        let n = rhs.len();
        let mut sup = self.sup.clone();
        let mut diag = self.diag.clone();
        sup[0] /= diag[0];
        rhs[0] /= diag[0];
        for i in 1..n {
            let m = diag[i] - self.sub[i] * sup[i - 1];
            if i < n - 1 {
                sup[i] /= m;
            }
            rhs[i] = (rhs[i] - self.sub[i] * rhs[i - 1]) / m;
            diag[i] = m;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= sup[i] * rhs[i + 1];
        }
        rhs
    }
}

/// Assembles the residual of the discrete system.
fn residual(
    p: &NonlocalProblem,
    dom: &DomainGeometry,
    grid: &RadialGrid,
    theta: f64,
    eps: f64,
    v: &[f64],
) -> Vec<f64> {
    let n = grid.n();
    let r = &grid.r;
    let nm1 = dom.dim as f64 - 1.0;
    let th2 = theta * theta;
    let mut res = vec![0.0; n];

    // Inner end.
    if grid.inner_is_boundary {
        let h = r[1] - r[0];
        if p.gamma == 0.0 {
            res[0] = v[0] - p.b0;
        } else {
            // Ghost elimination: outward normal at the inner end is -d/dr.
            let flux = (p.b0 - v[0]) / (p.gamma * eps);
            let d2 = (2.0 * v[1] - 2.0 * v[0] + 2.0 * h * flux) / (h * h);
            let d1 = -flux; // (v[1] - v_ghost)/(2h) with v_ghost eliminated
            let radial = if r[0] > 0.0 { nm1 / r[0] * d1 } else { 0.0 };
            res[0] = th2 * (d2 + radial) - p.f.value(v[0]);
        }
    } else {
        // Symmetry center: Laplacian degenerates to N v''.
        let h = r[1] - r[0];
        res[0] = th2 * dom.dim as f64 * 2.0 * (v[1] - v[0]) / (h * h) - p.f.value(v[0]);
    }

    for i in 1..n - 1 {
        let h0 = r[i] - r[i - 1];
        let h1 = r[i + 1] - r[i];
        let d2 =
            2.0 * (v[i - 1] / (h0 * (h0 + h1)) - v[i] / (h0 * h1) + v[i + 1] / (h1 * (h0 + h1)));
        let d1 = -h1 / (h0 * (h0 + h1)) * v[i - 1]
            + (h1 - h0) / (h0 * h1) * v[i]
            + h0 / (h1 * (h0 + h1)) * v[i + 1];
        res[i] = th2 * (d2 + nm1 / r[i] * d1) - p.f.value(v[i]);
    }

    // Outer end.
    let h = r[n - 1] - r[n - 2];
    if p.gamma == 0.0 {
        res[n - 1] = v[n - 1] - p.b0;
    } else {
        let flux = (p.b0 - v[n - 1]) / (p.gamma * eps);
        let d2 = (2.0 * v[n - 2] - 2.0 * v[n - 1] + 2.0 * h * flux) / (h * h);
        let d1 = flux; // outward normal at the outer end is +d/dr
        res[n - 1] = th2 * (d2 + nm1 / r[n - 1] * d1) - p.f.value(v[n - 1]);
    }
    res
}

fn jacobian(
    p: &NonlocalProblem,
    dom: &DomainGeometry,
    grid: &RadialGrid,
    theta: f64,
    eps: f64,
    v: &[f64],
) -> Tridiag {
    let n = grid.n();
    let r = &grid.r;
    let nm1 = dom.dim as f64 - 1.0;
    let th2 = theta * theta;
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];

    if grid.inner_is_boundary {
        let h = r[1] - r[0];
        if p.gamma == 0.0 {
            diag[0] = 1.0;
        } else {
            let dflux = -1.0 / (p.gamma * eps);
            let radial = if r[0] > 0.0 { nm1 / r[0] } else { 0.0 };
            diag[0] =
                th2 * ((-2.0 + 2.0 * h * dflux) / (h * h) + radial * (-dflux)) - p.f.deriv(v[0]);
            sup[0] = th2 * 2.0 / (h * h);
        }
    } else {
        let h = r[1] - r[0];
        diag[0] = -th2 * dom.dim as f64 * 2.0 / (h * h) - p.f.deriv(v[0]);
        sup[0] = th2 * dom.dim as f64 * 2.0 / (h * h);
    }

    for i in 1..n - 1 {
        let h0 = r[i] - r[i - 1];
        let h1 = r[i + 1] - r[i];
        let rad = nm1 / r[i];
        sub[i] = th2 * (2.0 / (h0 * (h0 + h1)) - rad * h1 / (h0 * (h0 + h1)));
        diag[i] = th2 * (-2.0 / (h0 * h1) + rad * (h1 - h0) / (h0 * h1)) - p.f.deriv(v[i]);
        sup[i] = th2 * (2.0 / (h1 * (h0 + h1)) + rad * h0 / (h1 * (h0 + h1)));
    }

    let h = r[n - 1] - r[n - 2];
    if p.gamma == 0.0 {
        diag[n - 1] = 1.0;
    } else {
        let dflux = -1.0 / (p.gamma * eps);
        diag[n - 1] = th2 * ((-2.0 + 2.0 * h * dflux) / (h * h) + nm1 / r[n - 1] * dflux)
            - p.f.deriv(v[n - 1]);
        sub[n - 1] = th2 * 2.0 / (h * h);
    }

    Tridiag { sub, diag, sup }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Distance of a radial node to the nearest boundary.
fn depth(grid: &RadialGrid, r: f64) -> f64 {
    let d_out = grid.r_hi - r;
    if grid.inner_is_boundary {
        d_out.min(r - grid.r_lo)
    } else {
        d_out
    }
}

/// Solves the local problem at fixed `theta` by damped Newton.
///
/// The initial iterate is the layer profile `W(dist sqrt(A0)/theta)` mapped
/// onto the grid. After crossing the tolerance one further full step is
/// taken so the iterate sits at the rounding floor of the discrete system;
/// this keeps `theta -> v_theta` smooth enough for root finding on the
/// consistency map.
pub fn solve_local(
    p: &NonlocalProblem,
    dom: &DomainGeometry,
    theta: f64,
    eps: f64,
    grid: &RadialGrid,
    profiles: &LayerProfiles,
    opts: &SolveOptions,
) -> Result<LocalSolution> {
    assert!(theta > 0.0, "theta must be positive");
    if !opts.allow_coarse {
        let in_layer = grid.nodes_within_of_boundary(theta);
        if in_layer < 8 {
            return Err(Error::GridTooCoarse {
                nodes_in_layer: in_layer,
                theta,
            });
        }
    }

    let n = grid.n();
    let root_a0 = profiles.a0.sqrt();
    let mut v: Vec<f64> = grid
        .r
        .iter()
        .map(|&r| profiles.w_at(depth(grid, r) * root_a0 / theta))
        .collect();

    // The residual of the discrete operator cannot be evaluated below the
    // rounding floor of its stiffest row; widen the tolerance to that floor
    // when theta^2/h^2 pushes it above the nominal one.
    let row_scale = {
        let jac = jacobian(p, dom, grid, theta, eps, &v);
        jac.diag.iter().fold(0.0f64, |m, d| m.max(d.abs()))
    };
    let tol = NEWTON_TOL.max(4.0 * f64::EPSILON * row_scale * p.b0.abs().max(1.0));

    let mut res = residual(p, dom, grid, theta, eps, &v);
    let mut rn = max_norm(&res);
    let mut iters = 0;

    while rn >= tol {
        if iters >= MAX_NEWTON_ITERS {
            return Err(Error::NewtonDiverged {
                iters,
                residual: rn,
            });
        }
        let jac = jacobian(p, dom, grid, theta, eps, &v);
        let delta = jac.solve(res.iter().map(|x| -x).collect());
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = (0..n).map(|i| v[i] + lambda * delta[i]).collect();
            let trial_res = residual(p, dom, grid, theta, eps, &trial);
            let trial_rn = max_norm(&trial_res);
            if trial_rn < rn || lambda < 1e-4 {
                v = trial;
                res = trial_res;
                rn = trial_rn;
                break;
            }
            lambda *= 0.5;
        }
        iters += 1;
        if lambda < 1e-4 && rn >= tol {
            return Err(Error::NewtonDiverged {
                iters,
                residual: rn,
            });
        }
    }

    // Polish step.
    if rn > 0.0 {
        let jac = jacobian(p, dom, grid, theta, eps, &v);
        let delta = jac.solve(res.iter().map(|x| -x).collect());
        let trial: Vec<f64> = (0..n).map(|i| v[i] + delta[i]).collect();
        let trial_res = residual(p, dom, grid, theta, eps, &trial);
        let trial_rn = max_norm(&trial_res);
        if trial_rn < rn {
            v = trial;
            rn = trial_rn;
        }
    }

    Ok(LocalSolution {
        theta,
        eps,
        v,
        newton_iters: iters,
        residual_norm: rn,
    })
}

/// Domain average of `q(u)` by radial quadrature with Jacobian `r^{N-1}`.
///
/// Normalizing by the quadrature of the Jacobian itself (rather than the
/// analytic volume) makes the average exact on constant fields.
pub fn average_q(p: &NonlocalProblem, dom: &DomainGeometry, grid: &RadialGrid, u: &[f64]) -> f64 {
    average_weighted(
        dom,
        grid,
        &u.iter().map(|&x| p.q.value(x)).collect::<Vec<_>>(),
    )
}

fn average_weighted(dom: &DomainGeometry, grid: &RadialGrid, values: &[f64]) -> f64 {
    let nm1 = dom.dim as i32 - 1;
    let weighted: Vec<f64> = grid
        .r
        .iter()
        .zip(values)
        .map(|(&r, &q)| q * r.powi(nm1))
        .collect();
    let jac: Vec<f64> = grid.r.iter().map(|&r| r.powi(nm1)).collect();
    quad::integrate_tabulated(&grid.r, &weighted) / quad::integrate_tabulated(&grid.r, &jac)
}

/// The consistency map `M_eps(theta) = theta^2 - eps^2 A(avg q(v_theta))`.
pub fn consistency_map(
    p: &NonlocalProblem,
    dom: &DomainGeometry,
    eps: f64,
    theta: f64,
    grid: &RadialGrid,
    profiles: &LayerProfiles,
    opts: &SolveOptions,
) -> Result<f64> {
    let local = solve_local(p, dom, theta, eps, grid, profiles, opts)?;
    let b = average_q(p, dom, grid, &local.v);
    Ok(theta * theta - eps * eps * p.a.value(b))
}

/// `dM/dtheta = 2 theta - eps^2 A'(B_theta) avg(q'(v) dv/dtheta)`, with
/// `dv/dtheta` by centered differencing of the local solve at
/// `theta (1 +/- 1e-4)`.
pub fn map_derivative(
    p: &NonlocalProblem,
    dom: &DomainGeometry,
    eps: f64,
    theta: f64,
    grid: &RadialGrid,
    profiles: &LayerProfiles,
    opts: &SolveOptions,
) -> Result<MapDerivative> {
    let center = solve_local(p, dom, theta, eps, grid, profiles, opts)?;
    let b = average_q(p, dom, grid, &center.v);
    let h = DTHETA_REL * theta;
    let plus = solve_local(p, dom, theta + h, eps, grid, profiles, opts)?;
    let minus = solve_local(p, dom, theta - h, eps, grid, profiles, opts)?;
    let dv_dtheta: Vec<f64> = (0..grid.n())
        .map(|i| (plus.v[i] - minus.v[i]) / (2.0 * h))
        .collect();
    let integrand: Vec<f64> = (0..grid.n())
        .map(|i| p.q.deriv(center.v[i]) * dv_dtheta[i])
        .collect();
    let avg = average_weighted(dom, grid, &integrand);
    Ok(MapDerivative {
        value: 2.0 * theta - eps * eps * p.a.deriv(b) * avg,
        dv_dtheta,
    })
}

/// Residual diagnostic for the tangent field: substitutes `dv/dtheta` into
/// its linearized equation
/// `theta^2 Lap(dv/dtheta) = f'(v) dv/dtheta - 2 f(v)/theta`
/// (with the homogeneous Robin condition) and returns the max-norm residual
/// relative to the forcing scale `2 max f(v) / theta`.
pub fn tangent_residual(
    p: &NonlocalProblem,
    dom: &DomainGeometry,
    grid: &RadialGrid,
    theta: f64,
    eps: f64,
    v: &[f64],
    dv_dtheta: &[f64],
) -> f64 {
    let n = grid.n();
    let r = &grid.r;
    let nm1 = dom.dim as f64 - 1.0;
    let th2 = theta * theta;
    let mut max_res = 0.0f64;
    for i in 1..n - 1 {
        let h0 = r[i] - r[i - 1];
        let h1 = r[i + 1] - r[i];
        let d2 = 2.0
            * (dv_dtheta[i - 1] / (h0 * (h0 + h1)) - dv_dtheta[i] / (h0 * h1)
                + dv_dtheta[i + 1] / (h1 * (h0 + h1)));
        let d1 = -h1 / (h0 * (h0 + h1)) * dv_dtheta[i - 1]
            + (h1 - h0) / (h0 * h1) * dv_dtheta[i]
            + h0 / (h1 * (h0 + h1)) * dv_dtheta[i + 1];
        let res = th2 * (d2 + nm1 / r[i] * d1) - p.f.deriv(v[i]) * dv_dtheta[i]
            + 2.0 * p.f.value(v[i]) / theta;
        max_res = max_res.max(res.abs());
    }
    // Homogeneous Robin rows: gamma = 0 pins dv/dtheta = 0 on the boundary.
    if p.gamma == 0.0 {
        max_res = max_res.max(dv_dtheta[n - 1].abs());
        if grid.inner_is_boundary {
            max_res = max_res.max(dv_dtheta[0].abs());
        }
    } else {
        let h = r[n - 1] - r[n - 2];
        let one_sided = (dv_dtheta[n - 1] - dv_dtheta[n - 2]) / h;
        max_res = max_res.max((dv_dtheta[n - 1] + p.gamma * eps * one_sided).abs());
    }
    let forcing_scale = v
        .iter()
        .map(|&x| 2.0 * p.f.value(x).abs() / theta)
        .fold(1.0f64, f64::max);
    max_res / forcing_scale
}

/// Solves the nonlocal problem at one `eps`: root of the consistency map on
/// a bracket around `eps sqrt(A(q(0)))`, widened at most twice.
pub fn solve_nonlocal(
    p: &NonlocalProblem,
    dom: &DomainGeometry,
    eps: f64,
    grid: &RadialGrid,
    profiles: &LayerProfiles,
) -> Result<NonlocalSolution> {
    let opts = SolveOptions::default();
    let theta0 = eps * profiles.a0.sqrt();

    if p.b0 == 0.0 {
        // Trivial branch: v = 0 and theta = eps sqrt(A(q(0))) exactly.
        let local = solve_local(p, dom, theta0, eps, grid, profiles, &opts)?;
        let b = average_q(p, dom, grid, &local.v);
        return Ok(NonlocalSolution {
            theta_of_eps: theta0,
            eps,
            r: grid.r.clone(),
            u: local.v,
            b_eps: b,
            dnu_boundary: 0.0,
            newton_iters: local.newton_iters,
            map_residual: (theta0 * theta0 - eps * eps * p.a.value(b)).abs(),
        });
    }

    let map =
        |theta: f64| -> Result<f64> { consistency_map(p, dom, eps, theta, grid, profiles, &opts) };

    let brackets = [(0.4, 1.6), (0.2, 2.8), (0.1, 4.0)];
    let mut chosen = None;
    for (lo_f, hi_f) in brackets {
        let (lo, hi) = (lo_f * theta0, hi_f * theta0);
        let (m_lo, m_hi) = (map(lo)?, map(hi)?);
        if m_lo == 0.0 {
            chosen = Some((lo, lo, m_lo, m_lo));
            break;
        }
        if m_lo * m_hi <= 0.0 {
            chosen = Some((lo, hi, m_lo, m_hi));
            break;
        }
    }
    let (lo, hi, _, _) = chosen.ok_or(Error::NoSignChange {
        lo: 0.1 * theta0,
        hi: 4.0 * theta0,
    })?;

    let f_tol = 1e-14 * eps * eps * (1.0 + profiles.a0);
    let x_tol = 8.0 * f64::EPSILON * theta0;
    let result = rootfind::brent(
        |theta| map(theta).expect("map evaluation inside verified bracket"),
        lo,
        hi,
        f_tol,
        x_tol,
    );
    let theta_star = result.root;

    let local = solve_local(p, dom, theta_star, eps, grid, profiles, &opts)?;
    let b_eps = average_q(p, dom, grid, &local.v);
    let dnu_boundary = boundary_derivative(grid, &local.v);
    Ok(NonlocalSolution {
        theta_of_eps: theta_star,
        eps,
        r: grid.r.clone(),
        u: local.v,
        b_eps,
        dnu_boundary,
        newton_iters: local.newton_iters,
        map_residual: (theta_star * theta_star - eps * eps * p.a.value(b_eps)).abs(),
    })
}

/// Outward radial derivative at the outer boundary by 4th-order one-sided
/// differencing on the last five nodes.
pub fn boundary_derivative(grid: &RadialGrid, u: &[f64]) -> f64 {
    let n = grid.n();
    let nodes = &grid.r[n - 5..];
    let w = fd_weights(grid.r_hi, nodes, 1);
    w.iter().zip(&u[n - 5..]).map(|(w, u)| w * u).sum()
}

/// Radial derivative at an interior node from a centered 5-node stencil.
pub fn interior_derivative(grid: &RadialGrid, u: &[f64], idx: usize) -> f64 {
    let n = grid.n();
    let lo = idx.saturating_sub(2).min(n - 5);
    let nodes = &grid.r[lo..lo + 5];
    let w = fd_weights(grid.r[idx], nodes, 1);
    w.iter().zip(&u[lo..lo + 5]).map(|(w, u)| w * u).sum()
}

impl NonlocalSolution {
    /// CSV export with columns `r,u`.
    pub fn field_csv(&self) -> String {
        let mut out = String::from("r,u\n");
        for (r, u) in self.r.iter().zip(&self.u) {
            out.push_str(&format!("{r:.17e},{u:.17e}\n"));
        }
        out
    }

    /// Summary JSON with the scalar outputs.
    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution summary serialize")
    }
}
