//! Radially symmetric domains and their geometric data: measures, mean
//! curvature of the boundary and of parallel surfaces, injectivity depth,
//! tube volumes, and coarea integration.
//!
//! Only intervals, balls, and annuli are supported; on these every curvature
//! quantity is exact and the reference PDE solver stays one-dimensional.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Which connected component of the boundary a quantity refers to.
///
/// For the annulus the inner sphere curves away from the outward normal; we
/// adopt the sign convention `kappa = -1/R_in` there. All annulus-specific
/// assertions sit behind this convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryComponent {
    Outer,
    Inner,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    /// `[0, L]` in one dimension; boundary measure is the counting measure.
    Interval { length: f64 },
    /// Ball of radius `R` in dimension `N >= 2`.
    Ball { radius: f64 },
    /// `R_in < |x| < R_out` in dimension `N >= 2`.
    Annulus { r_in: f64, r_out: f64 },
}

/// A radial domain with all derived geometric quantities precomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainGeometry {
    pub kind: DomainKind,
    pub dim: usize,
    /// Lebesgue measure of the domain.
    pub vol: f64,
    /// Surface measure of the boundary.
    pub surf: f64,
    /// Integral of the mean curvature over the boundary.
    pub h_int: f64,
    /// Integral of the squared mean curvature over the boundary.
    pub h2_int: f64,
    /// Injectivity depth of the inward normal map.
    pub d0: f64,
    /// Working collar depth `min(d0, 1/(1 + 2 sup max_i |kappa_i|))`.
    pub d_star: f64,
}

/// Volume of the unit ball in dimension `n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * std::f64::consts::PI / n as f64,
    }
}

fn ball_volume(n: usize, r: f64) -> f64 {
    unit_ball_volume(n) * r.powi(n as i32)
}

fn sphere_area(n: usize, r: f64) -> f64 {
    n as f64 * unit_ball_volume(n) * r.powi(n as i32 - 1)
}

impl DomainGeometry {
    pub fn interval(length: f64) -> Result<Self> {
        if length <= 0.0 || !length.is_finite() {
            return Err(Error::Validation(format!(
                "interval length must be positive, got {length}"
            )));
        }
        Ok(DomainGeometry {
            kind: DomainKind::Interval { length },
            dim: 1,
            vol: length,
            surf: 2.0,
            h_int: 0.0,
            h2_int: 0.0,
            d0: 0.5 * length,
            // No curvature: the second branch of the depth cap is 1.
            d_star: (0.5 * length).min(1.0),
        })
    }

    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::BadDimension {
                kind: "ball",
                n: dim,
            });
        }
        if radius <= 0.0 || !radius.is_finite() {
            return Err(Error::Validation(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        let surf = sphere_area(dim, radius);
        Ok(DomainGeometry {
            kind: DomainKind::Ball { radius },
            dim,
            vol: ball_volume(dim, radius),
            surf,
            h_int: surf / radius,
            h2_int: surf / (radius * radius),
            d0: radius,
            d_star: radius.min(1.0 / (1.0 + 2.0 / radius)),
        })
    }

    pub fn annulus(dim: usize, r_in: f64, r_out: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::BadDimension {
                kind: "annulus",
                n: dim,
            });
        }
        if !(r_in > 0.0 && r_out.is_finite() && r_in < r_out) {
            return Err(Error::Validation(format!(
                "annulus requires 0 < r_in < r_out, got ({r_in}, {r_out})"
            )));
        }
        let s_out = sphere_area(dim, r_out);
        let s_in = sphere_area(dim, r_in);
        let sup_kappa = 1.0 / r_in; // |-1/r_in| > 1/r_out
        Ok(DomainGeometry {
            kind: DomainKind::Annulus { r_in, r_out },
            dim,
            vol: ball_volume(dim, r_out) - ball_volume(dim, r_in),
            surf: s_out + s_in,
            h_int: s_out / r_out - s_in / r_in,
            h2_int: s_out / (r_out * r_out) + s_in / (r_in * r_in),
            d0: 0.5 * (r_out - r_in),
            d_star: (0.5 * (r_out - r_in)).min(1.0 / (1.0 + 2.0 * sup_kappa)),
        })
    }

    /// Builds a domain from registry names, dimension, and parameter list.
    pub fn from_kind(kind: &str, dim: usize, params: &[f64]) -> Result<Self> {
        match kind {
            "interval" => {
                if dim != 1 {
                    return Err(Error::BadDimension {
                        kind: "interval",
                        n: dim,
                    });
                }
                if params.len() != 1 {
                    return Err(Error::Validation("interval expects params = [L]".into()));
                }
                Self::interval(params[0])
            }
            "ball" => {
                if params.len() != 1 {
                    return Err(Error::Validation("ball expects params = [R]".into()));
                }
                Self::ball(dim, params[0])
            }
            "annulus" => {
                if params.len() != 2 {
                    return Err(Error::Validation(
                        "annulus expects params = [R_in, R_out]".into(),
                    ));
                }
                Self::annulus(dim, params[0], params[1])
            }
            other => Err(Error::Validation(format!("unknown domain kind `{other}`"))),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            DomainKind::Interval { .. } => "interval",
            DomainKind::Ball { .. } => "ball",
            DomainKind::Annulus { .. } => "annulus",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self.kind {
            DomainKind::Interval { length } => vec![length],
            DomainKind::Ball { radius } => vec![radius],
            DomainKind::Annulus { r_in, r_out } => vec![r_in, r_out],
        }
    }

    /// Radial coordinate range `[r_lo, r_hi]` of the solver grid.
    pub fn radial_range(&self) -> (f64, f64) {
        match self.kind {
            DomainKind::Interval { length } => (0.0, length),
            DomainKind::Ball { radius } => (0.0, radius),
            DomainKind::Annulus { r_in, r_out } => (r_in, r_out),
        }
    }

    /// Whether the radial coordinate `r_lo` is itself a boundary point
    /// (true for intervals and annuli; false for balls, where `r = 0` is the
    /// symmetry center).
    pub fn inner_is_boundary(&self) -> bool {
        !matches!(self.kind, DomainKind::Ball { .. })
    }

    /// Distance to the boundary and the nearest component for radial `r`.
    pub fn depth_of(&self, r: f64) -> (f64, BoundaryComponent) {
        let (lo, hi) = self.radial_range();
        let d_out = hi - r;
        if self.inner_is_boundary() {
            let d_in = r - lo;
            if d_in < d_out {
                (d_in, BoundaryComponent::Inner)
            } else {
                (d_out, BoundaryComponent::Outer)
            }
        } else {
            (d_out, BoundaryComponent::Outer)
        }
    }

    /// Mean curvature of the boundary component.
    pub fn mean_curvature(&self, component: BoundaryComponent) -> f64 {
        match self.kind {
            DomainKind::Interval { .. } => 0.0,
            DomainKind::Ball { radius } => 1.0 / radius,
            DomainKind::Annulus { r_in, r_out } => match component {
                BoundaryComponent::Outer => 1.0 / r_out,
                BoundaryComponent::Inner => -1.0 / r_in,
            },
        }
    }

    /// Mean curvature of the parallel surface at depth `delta` from the given
    /// boundary component: `(1/(N-1)) sum_i kappa_i / (1 - kappa_i delta)`.
    pub fn curvature_at_depth(&self, delta: f64, component: BoundaryComponent) -> Result<f64> {
        if !(0.0..=self.d_star).contains(&delta) {
            return Err(Error::DepthOutOfRange {
                depth: delta,
                d_star: self.d_star,
            });
        }
        Ok(match self.kind {
            DomainKind::Interval { .. } => 0.0,
            DomainKind::Ball { radius } => 1.0 / (radius - delta),
            DomainKind::Annulus { r_in, r_out } => match component {
                BoundaryComponent::Outer => 1.0 / (r_out - delta),
                BoundaryComponent::Inner => -1.0 / (r_in + delta),
            },
        })
    }

    /// Exact collar volume `|Omega_d|` and its two-term tube-formula
    /// approximation `d |dOmega| - d^2/2 (N-1) \int H`.
    pub fn tube_volume(&self, d: f64) -> Result<(f64, f64)> {
        if !(d > 0.0 && d <= self.d_star) {
            return Err(Error::DepthOutOfRange {
                depth: d,
                d_star: self.d_star,
            });
        }
        let exact = match self.kind {
            DomainKind::Interval { .. } => 2.0 * d,
            DomainKind::Ball { radius } => {
                ball_volume(self.dim, radius) - ball_volume(self.dim, radius - d)
            }
            DomainKind::Annulus { r_in, r_out } => {
                (ball_volume(self.dim, r_out) - ball_volume(self.dim, r_out - d))
                    + (ball_volume(self.dim, r_in + d) - ball_volume(self.dim, r_in))
            }
        };
        let weyl2 = d * self.surf - 0.5 * d * d * (self.dim as f64 - 1.0) * self.h_int;
        Ok((exact, weyl2))
    }

    /// Integrates a radial function of depth over the collar `Omega_d`,
    /// both exactly (true radial Jacobian) and through the first-order
    /// curvature expansion of the coarea formula. The pair differs by
    /// `O(d^3)`.
    pub fn coarea_integral<H: Fn(f64) -> f64>(&self, h: H, d: f64) -> Result<(f64, f64)> {
        if !(d > 0.0 && d <= self.d_star) {
            return Err(Error::DepthOutOfRange {
                depth: d,
                d_star: self.d_star,
            });
        }
        let n = self.dim;
        let exact = match self.kind {
            DomainKind::Interval { .. } => 2.0 * quad::integrate(&h, 0.0, d)?,
            DomainKind::Ball { radius } => {
                quad::integrate(|delta| h(delta) * sphere_area(n, radius - delta), 0.0, d)?
            }
            DomainKind::Annulus { r_in, r_out } => {
                quad::integrate(|delta| h(delta) * sphere_area(n, r_out - delta), 0.0, d)?
                    + quad::integrate(|delta| h(delta) * sphere_area(n, r_in + delta), 0.0, d)?
            }
        };
        let expanded = quad::integrate(
            |delta| h(delta) * (self.surf - (n as f64 - 1.0) * self.h_int * delta),
            0.0,
            d,
        )?;
        Ok((exact, expanded))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_disk() {
        let dom = DomainGeometry::ball(2, 1.0).unwrap();
        assert!((dom.vol - PI).abs() < 1e-14);
        assert!((dom.surf - 2.0 * PI).abs() < 1e-14);
        assert!((dom.h_int - 2.0 * PI).abs() < 1e-14);
        assert!((dom.d_star - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(dom.d0, 1.0);
    }

    #[test]
    fn unit_interval() {
        let dom = DomainGeometry::interval(1.0).unwrap();
        assert_eq!(dom.vol, 1.0);
        assert_eq!(dom.surf, 2.0);
        assert_eq!(dom.h_int, 0.0);
        assert_eq!(
            dom.curvature_at_depth(0.2, BoundaryComponent::Outer)
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn three_ball() {
        let dom = DomainGeometry::ball(3, 2.0).unwrap();
        assert!((dom.vol - 32.0 * PI / 3.0).abs() < 1e-12);
        assert!((dom.surf - 16.0 * PI).abs() < 1e-12);
        assert!((dom.mean_curvature(BoundaryComponent::Outer) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bad_dimensions() {
        assert!(matches!(
            DomainGeometry::ball(1, 1.0),
            Err(Error::BadDimension { .. })
        ));
        assert!(matches!(
            DomainGeometry::from_kind("interval", 2, &[1.0]),
            Err(Error::BadDimension { .. })
        ));
        assert!(DomainGeometry::annulus(3, 2.0, 1.0).is_err());
    }

    #[test]
    fn parallel_surface_curvature() {
        let disk = DomainGeometry::ball(2, 1.0).unwrap();
        let h = disk
            .curvature_at_depth(0.25, BoundaryComponent::Outer)
            .unwrap();
        assert!((h - 4.0 / 3.0).abs() < 1e-15);
        let ball = DomainGeometry::ball(3, 1.0).unwrap();
        assert_eq!(
            ball.curvature_at_depth(0.0, BoundaryComponent::Outer)
                .unwrap(),
            ball.mean_curvature(BoundaryComponent::Outer)
        );
        assert!(disk
            .curvature_at_depth(0.5, BoundaryComponent::Outer)
            .is_err());
    }

    #[test]
    fn annulus_inner_curvature_convention() {
        let ann = DomainGeometry::annulus(2, 0.5, 1.0).unwrap();
        assert_eq!(ann.mean_curvature(BoundaryComponent::Inner), -2.0);
        let h = ann
            .curvature_at_depth(0.05, BoundaryComponent::Inner)
            .unwrap();
        assert!((h + 1.0 / 0.55).abs() < 1e-14);
    }

    #[test]
    fn tube_volume_disk_exact() {
        let disk = DomainGeometry::ball(2, 1.0).unwrap();
        let (exact, weyl2) = disk.tube_volume(0.1).unwrap();
        assert!((exact - 0.19 * PI).abs() < 1e-14);
        // The two-term formula is exact for disks.
        assert!((exact - weyl2).abs() < 1e-14);
    }

    #[test]
    fn tube_volume_three_ball() {
        let ball = DomainGeometry::ball(3, 1.0).unwrap();
        let (exact, weyl2) = ball.tube_volume(0.1).unwrap();
        let expected = 4.0 * PI / 3.0 * (1.0 - 0.729);
        assert!((exact - expected).abs() < 1e-12);
        // Remainder is exactly (4 pi / 3) d^3.
        assert!(((exact - weyl2) - 4.0 * PI / 3.0 * 0.001).abs() < 1e-12);
    }

    #[test]
    fn coarea_consistency_with_tube_volume() {
        for dom in [
            DomainGeometry::ball(2, 1.0).unwrap(),
            DomainGeometry::ball(3, 1.0).unwrap(),
            DomainGeometry::interval(1.0).unwrap(),
            DomainGeometry::annulus(3, 0.5, 1.5).unwrap(),
        ] {
            let d = 0.5 * dom.d_star;
            let (exact, expanded) = dom.coarea_integral(|_| 1.0, d).unwrap();
            let (tv_exact, tv_weyl) = dom.tube_volume(d).unwrap();
            assert!((exact - tv_exact).abs() < 1e-10 * tv_exact.max(1.0));
            assert!((expanded - tv_weyl).abs() < 1e-10 * tv_weyl.abs().max(1.0));
        }
    }

    #[test]
    fn coarea_linear_weight() {
        let disk = DomainGeometry::ball(2, 1.0).unwrap();
        let (exact, _) = disk.coarea_integral(|d| d, 0.2).unwrap();
        let expected = 2.0 * PI * (0.02 - 0.008 / 3.0 * 1.0) - 0.0; // 2pi ∫ d(1-d) dd
        let direct = 2.0 * PI * (0.5 * 0.04 - 0.008 / 3.0);
        assert!(
            (exact - direct).abs() < 1e-12,
            "{exact} vs {direct} ({expected})"
        );

        let iv = DomainGeometry::interval(1.0).unwrap();
        let (exact, expanded) = iv.coarea_integral(|d| d, 0.2).unwrap();
        assert!((exact - 0.04).abs() < 1e-14);
        assert!((expanded - 0.04).abs() < 1e-14);
    }

    #[test]
    fn scale_invariant_combination() {
        // |Omega| * \int H / |dOmega|^2 is dimensionless.
        for n in [2usize, 3, 4] {
            let a = DomainGeometry::ball(n, 1.0).unwrap();
            let b = DomainGeometry::ball(n, 5.0).unwrap();
            let qa = a.vol * a.h_int / (a.surf * a.surf);
            let qb = b.vol * b.h_int / (b.surf * b.surf);
            assert!((qa - qb).abs() < 1e-14, "n={n}: {qa} vs {qb}");
        }
    }

    #[test]
    fn weyl_remainder_slope_three_ball() {
        let ball = DomainGeometry::ball(3, 1.0).unwrap();
        let mut pts = Vec::new();
        for frac in [0.2, 0.1, 0.05, 0.025] {
            let d = frac * ball.d_star;
            let (exact, weyl2) = ball.tube_volume(d).unwrap();
            pts.push((d.ln(), (exact - weyl2).abs().ln()));
        }
        // Least-squares slope of log-remainder vs log-depth.
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!(slope >= 2.7, "slope {slope}");
    }
}
