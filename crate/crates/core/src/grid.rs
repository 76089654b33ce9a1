//! Boundary-refined radial grids and finite-difference weights on
//! arbitrary nodes.

use crate::geometry::DomainGeometry;

/// Default node count for solver grids.
pub const DEFAULT_GRID_N: usize = 2049;
/// Target boundary spacing as a fraction of the layer width.
const BOUNDARY_SPACING_FRACTION: f64 = 1.0 / 64.0;
/// Hard requirement from the grid contract.
const MAX_BOUNDARY_SPACING_FRACTION: f64 = 1.0 / 8.0;
const MIN_NODES_IN_3EPS: usize = 24;

/// A monotone radial grid on the solver interval, tanh-stretched toward the
/// boundary components that carry layers.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub r: Vec<f64>,
    pub r_lo: f64,
    pub r_hi: f64,
    /// Whether `r_lo` is a boundary (interval, annulus) or a symmetry
    /// center (ball).
    pub inner_is_boundary: bool,
    /// Stretching strength actually used.
    pub beta: f64,
}

impl RadialGrid {
    /// Builds the default grid for a domain, resolving layers of width
    /// `eps` at every boundary: boundary spacing about `eps/64` and at
    /// least 24 nodes within `3 eps`, never coarser than `eps/8`.
    pub fn for_domain(dom: &DomainGeometry, n: usize, eps: f64) -> RadialGrid {
        let (r_lo, r_hi) = dom.radial_range();
        let both = dom.inner_is_boundary();
        let len = r_hi - r_lo;
        let n = n.max(32);
        let target = (eps * BOUNDARY_SPACING_FRACTION).min(len * MAX_BOUNDARY_SPACING_FRACTION);

        let mut beta = solve_beta(n, len, target);
        let mut grid = Self::with_beta(dom, n, beta);
        // Tighten until the layer-resolution contract holds.
        for _ in 0..40 {
            if grid.meets_contract(eps, both) || beta > 18.0 {
                break;
            }
            beta *= 1.2;
            grid = Self::with_beta(dom, n, beta);
        }
        grid
    }

    /// Grid with an explicit stretching parameter (used by refinement
    /// self-checks, where halving the spacing must keep the mapping fixed).
    pub fn with_beta(dom: &DomainGeometry, n: usize, beta: f64) -> RadialGrid {
        let (r_lo, r_hi) = dom.radial_range();
        let both = dom.inner_is_boundary();
        let len = r_hi - r_lo;
        let r: Vec<f64> = (0..n)
            .map(|i| {
                let xi = i as f64 / (n - 1) as f64;
                let s = if beta < 1e-8 {
                    xi
                } else if both {
                    // Cluster at both ends.
                    0.5 * (1.0 + (beta * (2.0 * xi - 1.0)).tanh() / beta.tanh())
                } else {
                    // Cluster at the outer end only.
                    (beta * xi).tanh() / beta.tanh()
                };
                r_lo + len * s
            })
            .collect();
        RadialGrid {
            r,
            r_lo,
            r_hi,
            inner_is_boundary: both,
            beta,
        }
    }

    fn meets_contract(&self, eps: f64, both: bool) -> bool {
        let n = self.r.len();
        let h_outer = self.r[n - 1] - self.r[n - 2];
        let near_outer = self
            .r
            .iter()
            .filter(|&&r| self.r_hi - r <= 3.0 * eps)
            .count();
        let mut ok = h_outer <= eps * MAX_BOUNDARY_SPACING_FRACTION
            && near_outer >= MIN_NODES_IN_3EPS.min(n / 2);
        if both {
            let h_inner = self.r[1] - self.r[0];
            let near_inner = self
                .r
                .iter()
                .filter(|&&r| r - self.r_lo <= 3.0 * eps)
                .count();
            ok = ok
                && h_inner <= eps * MAX_BOUNDARY_SPACING_FRACTION
                && near_inner >= MIN_NODES_IN_3EPS.min(n / 2);
        }
        ok
    }

    pub fn n(&self) -> usize {
        self.r.len()
    }

    /// Number of nodes within `width` of the nearest boundary.
    pub fn nodes_within_of_boundary(&self, width: f64) -> usize {
        self.r
            .iter()
            .filter(|&&r| {
                let d_out = self.r_hi - r;
                let d = if self.inner_is_boundary {
                    d_out.min(r - self.r_lo)
                } else {
                    d_out
                };
                d <= width
            })
            .count()
    }
}

/// Solves `spacing_at_boundary(beta) = target` for the tanh mapping.
fn solve_beta(n: usize, len: f64, target: f64) -> f64 {
    let uniform = len / (n - 1) as f64;
    if uniform <= target {
        return 0.0;
    }
    // Boundary spacing is len * ds/dxi / (n-1); the end-point mapping
    // derivative is beta sech^2(beta) / tanh(beta) for both the one-sided
    // and the two-sided stretching.
    let spacing = |beta: f64| {
        let ds = beta / (beta.cosh().powi(2) * beta.tanh());
        len * ds / (n - 1) as f64
    };
    // spacing(beta) decreases in beta; bisect.
    let (mut lo, mut hi) = (1e-6, 18.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if spacing(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Fornberg weights for the `m`-th derivative at `z` from the given nodes.
///
/// Classic recursion (Fornberg 1988); exact for polynomials up to degree
/// `nodes.len() - 1`.
pub fn fd_weights(z: f64, nodes: &[f64], m: usize) -> Vec<f64> {
    let n = nodes.len();
    assert!(n > m);
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[m]).collect()
}
