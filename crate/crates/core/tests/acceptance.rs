//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantities (run with `--nocapture` to see them).
//!
//! Sweeps use the default eps grid {0.1, 0.05, 0.025, 0.0125} and the
//! default 2049-node solver grids throughout.

use std::time::Instant;

use layerlab::asymptotics::{self, b_coefficients};
use layerlab::fixtures;
use layerlab::geometry::DomainGeometry;
use layerlab::grid::{RadialGrid, DEFAULT_GRID_N};
use layerlab::nonlinearity::NonlocalProblem;
use layerlab::profiles::{
    expansion_functionals, layer_moment, solve_b_star, LayerProfiles, MomentIntegrand,
    ProfileOptions,
};
use layerlab::solver;
use layerlab::verification::{self, CheckKind, CheckSpec, DEFAULT_EPS_GRID};

fn profiles_for(p: &NonlocalProblem) -> LayerProfiles {
    LayerProfiles::build(p, &ProfileOptions::default()).expect("profile build")
}

fn check(criterion: &str, ok: bool, detail: String) {
    let status = if ok { "PASS" } else { "FAIL" };
    println!("{status} {criterion}: {detail}");
    assert!(ok, "{criterion}: {detail}");
}

fn run_kind(
    kind: CheckKind,
    name: &str,
    p: &NonlocalProblem,
    dom: &DomainGeometry,
) -> verification::SweepResult {
    let spec = CheckSpec::new(
        kind,
        name,
        p.clone(),
        dom.clone(),
        DEFAULT_EPS_GRID.to_vec(),
        DEFAULT_GRID_N,
    );
    verification::run_check(&spec)
}

#[test]
fn criterion_01_closed_form_oracles_fix_l0() {
    let start = Instant::now();
    let (p, dom) = fixtures::fix_l0();
    let profiles = profiles_for(&p);

    let mut w_err = 0.0f64;
    let mut phi_err = 0.0f64;
    let mut psi_err = 0.0f64;
    for (i, &t) in profiles.t_grid.iter().enumerate() {
        let e = (-t).exp();
        w_err = w_err.max((profiles.w[i] - e).abs());
        phi_err = phi_err.max((profiles.phi[i] + 0.5 * t * e).abs());
        psi_err = psi_err.max((profiles.psi[i] - 0.5 * t * e).abs());
    }

    let coeffs = b_coefficients(&p, &profiles, &dom);
    let (i_wphi, j_wpsi) = expansion_functionals(&p, &profiles);
    let coeff_err = (profiles.b_star - 1.0)
        .abs()
        .max((profiles.qf_bstar - 1.0).abs())
        .max((i_wphi + 0.5).abs())
        .max((j_wpsi - 0.5).abs())
        .max((coeffs.b1 - 2.0).abs())
        .max((coeffs.b2 + 1.0).abs());

    let elapsed = start.elapsed().as_secs_f64();
    check(
        "criterion 01 (closed-form oracles, FIX-L0)",
        w_err < 1e-8 && phi_err < 1e-7 && psi_err < 1e-7 && coeff_err < 1e-8 && elapsed < 1.0,
        format!(
            "max|W-e^-t|={w_err:.2e}, max|Phi+(t/2)e^-t|={phi_err:.2e}, \
             max|Psi-(t/2)e^-t|={psi_err:.2e}, coefficient error={coeff_err:.2e}, {elapsed:.2}s"
        ),
    );
}

#[test]
fn criterion_02_robin_closed_form_fix_lg() {
    let start = Instant::now();
    let (p, _) = fixtures::fix_lg();
    let b_star = solve_b_star(&p);
    let profiles = profiles_for(&p);
    let b_err = (b_star - 0.5).abs();
    let phi0_err = (profiles.phi[0] + 0.125).abs();
    let elapsed = start.elapsed().as_secs_f64();
    check(
        "criterion 02 (Robin closed form, FIX-LG)",
        b_err < 1e-10 && phi0_err < 1e-10 && elapsed < 1.0,
        format!("|b*-1/2|={b_err:.2e}, |Phi(0)+1/8|={phi0_err:.2e}, {elapsed:.2}s"),
    );
}

#[test]
fn criterion_03_leading_order_rate() {
    let start = Instant::now();
    let mut detail = String::new();
    let mut ok = true;
    for (name, p, dom) in [
        ("fix-l0", fixtures::fix_l0().0, fixtures::fix_l0().1),
        ("fix-nl", fixtures::fix_nl().0, fixtures::fix_nl().1),
    ] {
        let result = run_kind(CheckKind::LeadingOrder, name, &p, &dom);
        let slope = result.fitted_order().unwrap_or(f64::NAN);
        ok &= result.pass && (0.75..=1.25).contains(&slope);
        detail.push_str(&format!("{name}: slope={slope:.3}; "));
    }
    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 60.0;
    detail.push_str(&format!("{elapsed:.1}s total"));
    check(
        "criterion 03 (leading-order rate in [0.75, 1.25])",
        ok,
        detail,
    );
}

#[test]
fn criterion_04_refined_rate_exceeds_leading() {
    let mut detail = String::new();
    let mut ok = true;
    for (name, p, dom) in [
        ("fix-l0", fixtures::fix_l0().0, fixtures::fix_l0().1),
        ("fix-nl", fixtures::fix_nl().0, fixtures::fix_nl().1),
    ] {
        let leading = run_kind(CheckKind::LeadingOrder, name, &p, &dom);
        let refined = run_kind(CheckKind::RefinedInterior, name, &p, &dom);
        let s_lead = leading.fitted_order().unwrap_or(f64::NAN);
        let s_ref = refined.fitted_order().unwrap_or(f64::NAN);
        ok &= (1.7..=2.5).contains(&s_ref) && s_ref >= s_lead + 0.5;
        detail.push_str(&format!(
            "{name}: refined={s_ref:.3} vs leading={s_lead:.3}; "
        ));
    }
    check(
        "criterion 04 (refined rate in [1.7, 2.5], exceeds leading by 0.5)",
        ok,
        detail,
    );
}

#[test]
fn criterion_05_nonlocal_expansion_fix_l1() {
    let (p, dom) = fixtures::fix_l1();
    let first = run_kind(CheckKind::BFirstOrder, "fix-l1", &p, &dom);
    let slope = first.fitted_order().unwrap_or(f64::NAN);
    let second = run_kind(CheckKind::BSecondOrder, "fix-l1", &p, &dom);
    let scaled = second.residuals.get("residual_over_eps2").unwrap();
    let (r_first, r_last) = (scaled[0], scaled[scaled.len() - 1]);
    let ok = (1.7..=2.3).contains(&slope) && r_last < 0.5 * r_first;
    check(
        "criterion 05 (nonlocal expansion, FIX-L1)",
        ok,
        format!(
            "B1 slope={slope:.3}; residual/eps^2 at eps=0.0125 is {:.3} x value at eps=0.1",
            r_last / r_first
        ),
    );
}

#[test]
fn criterion_06_boundary_flux_fix_l1() {
    let (p, dom) = fixtures::fix_l1();
    let profiles = profiles_for(&p);
    let coeffs = b_coefficients(&p, &profiles, &dom);
    // G = 3/2 for this fixture in closed form.
    assert!((coeffs.g_boundary - 1.5).abs() < 1e-8);
    let mut residuals = Vec::new();
    for &eps in &DEFAULT_EPS_GRID {
        let grid = RadialGrid::for_domain(&dom, DEFAULT_GRID_N, eps);
        let sol = solver::solve_nonlocal(&p, &dom, eps, &grid, &profiles).expect("solve");
        residuals.push((sol.dnu_boundary - (1.0 / eps - 1.5)).abs());
    }
    let monotone = residuals.windows(2).all(|w| w[1] < w[0]);
    let last = *residuals.last().unwrap();
    let shown: Vec<String> = residuals.iter().map(|r| format!("{r:.3e}")).collect();
    check(
        "criterion 06 (boundary flux asymptotics, FIX-L1)",
        monotone && last < 0.1,
        format!(
            "|dnu - (1/eps - 3/2)| = [{}], monotone={monotone}",
            shown.join(", ")
        ),
    );
}

#[test]
fn criterion_07_uniqueness_window() {
    let mut ok = true;
    let mut detail = String::new();
    for (name, p, dom) in fixtures::all() {
        let result = run_kind(CheckKind::MapMonotone, name, &p, &dom);
        ok &= result.pass;
        let min_d = result
            .residuals
            .get("min_map_derivative")
            .map(|v| v.iter().cloned().fold(f64::INFINITY, f64::min))
            .unwrap_or(f64::NAN);
        detail.push_str(&format!("{name}: min dM/dtheta={min_d:.3e}; "));
    }
    // Wide scan on the fully nonlinear fixture: exactly one sign change over
    // 200 log-spaced theta in [1e-3 eps, 10 eps].
    let (p, dom) = fixtures::fix_nl();
    let profiles = profiles_for(&p);
    for &eps in &DEFAULT_EPS_GRID {
        let crossings =
            verification::wide_scan_sign_changes(&p, &dom, eps, DEFAULT_GRID_N, &profiles, 200)
                .expect("wide scan");
        ok &= crossings == 1;
        if crossings != 1 {
            detail.push_str(&format!(
                "fix-nl wide scan at eps={eps}: {crossings} crossings; "
            ));
        }
    }
    detail.push_str("fix-nl wide scan: 1 crossing at every eps");
    check("criterion 07 (uniqueness window)", ok, detail);
}

#[test]
fn criterion_08_profile_identity_suite() {
    let mut ok = true;
    let mut detail = String::new();
    for (name, p, dom) in fixtures::all() {
        let result = run_kind(CheckKind::ProfileIdentities, name, &p, &dom);
        let g = |k: &str| result.residuals.get(k).map(|v| v[0]).unwrap_or(f64::NAN);
        ok &= result.pass;
        detail.push_str(&format!(
            "{name}: w1w={:.1e} red={:.1e} mom={:.1e} env={:.1e}; ",
            g("first_integral"),
            g("reduction"),
            g("moment_identity"),
            g("envelope_violation"),
        ));
    }
    check(
        "criterion 08 (profile identity suite, all fixtures)",
        ok,
        detail,
    );
}

#[test]
fn criterion_09_geometry() {
    // Weyl remainder slope for the N=3 unit ball.
    let ball = DomainGeometry::ball(3, 1.0).unwrap();
    let mut pts = Vec::new();
    for frac in [0.2, 0.1, 0.05, 0.025] {
        let d = frac * ball.d_star;
        let (exact, weyl2) = ball.tube_volume(d).unwrap();
        pts.push((d, (exact - weyl2).abs()));
    }
    let slope = verification::fit_order(&pts).unwrap();

    // Disk tube volume: two-term formula is exact.
    let disk = DomainGeometry::ball(2, 1.0).unwrap();
    let mut disk_err = 0.0f64;
    for frac in [0.9, 0.5, 0.1] {
        let (exact, weyl2) = disk.tube_volume(frac * disk.d_star).unwrap();
        disk_err = disk_err.max((exact - weyl2).abs());
    }

    // Scale invariance of |Omega| \int H / |dOmega|^2.
    let q = |dom: &DomainGeometry| dom.vol * dom.h_int / (dom.surf * dom.surf);
    let scale_err = (q(&DomainGeometry::ball(2, 1.0).unwrap())
        - q(&DomainGeometry::ball(2, 5.0).unwrap()))
    .abs()
    .max(
        (q(&DomainGeometry::ball(3, 1.0).unwrap()) - q(&DomainGeometry::ball(3, 5.0).unwrap()))
            .abs(),
    );

    check(
        "criterion 09 (geometry: tube formula and scale invariance)",
        slope >= 2.7 && disk_err < 1e-14 && scale_err < 1e-14,
        format!("weyl slope={slope:.3}, disk error={disk_err:.1e}, scale error={scale_err:.1e}"),
    );
}

#[test]
fn criterion_10_interior_decay() {
    let eps = 0.025;
    let mut ok = true;
    let mut detail = String::new();
    for (name, p, dom) in fixtures::all() {
        let profiles = profiles_for(&p);
        let grid = RadialGrid::for_domain(&dom, DEFAULT_GRID_N, eps);
        let sol = solver::solve_nonlocal(&p, &dom, eps, &grid, &profiles).expect("solve");
        // Deepest interior node.
        let deepest = grid
            .r
            .iter()
            .enumerate()
            .max_by(|a, b| {
                let (da, _) = dom.depth_of(*a.1);
                let (db, _) = dom.depth_of(*b.1);
                da.total_cmp(&db)
            })
            .map(|(i, _)| i)
            .unwrap();
        let u_center = sol.u[deepest].abs();
        ok &= u_center < 1e-6;
        detail.push_str(&format!("{name}: |u|={u_center:.2e}; "));
    }
    check("criterion 10 (interior decay at eps = 0.025)", ok, detail);
}

// Shared sanity: the Robin-consistency identity of the boundary prediction
// holds exactly (the G-terms cancel; b* satisfies its defining equation).
#[test]
fn boundary_prediction_robin_consistency() {
    for (name, p, _dom) in fixtures::all() {
        let profiles = profiles_for(&p);
        let coeffs = b_coefficients(&p, &profiles, &fixtures::fix_l0().1);
        for &eps in &DEFAULT_EPS_GRID {
            let (u, dnu, _) = asymptotics::predict_boundary(
                &p,
                &profiles,
                &coeffs,
                eps,
                layerlab::geometry::BoundaryComponent::Outer,
            );
            if profiles.b_star == 0.0 {
                continue;
            }
            let residual = u + eps * p.gamma * dnu - p.b0;
            assert!(
                residual.abs() / (eps * eps) < 1e-8,
                "{name}: Robin consistency residual {residual:e} at eps={eps}"
            );
        }
    }
}

// Moments frozen from the closed-form linear fixture.
#[test]
fn moment_values_fix_l0() {
    let (p, _) = fixtures::fix_l0();
    let profiles = profiles_for(&p);
    let (m0, id0) = layer_moment(&p, &profiles, 0, MomentIntegrand::QOfWMinusQ0);
    let (m1, id1) = layer_moment(&p, &profiles, 1, MomentIntegrand::QOfWMinusQ0);
    let (m2, id2) = layer_moment(&p, &profiles, 2, MomentIntegrand::QOfWMinusQ0);
    let (mphi, _) = layer_moment(&p, &profiles, 0, MomentIntegrand::QPrimeWPhi);
    for (value, expected) in [
        (m0, 1.0),
        (id0.unwrap(), 1.0),
        (m1, 1.0),
        (id1.unwrap(), 1.0),
        (m2, 2.0),
        (id2.unwrap(), 2.0),
        (mphi, -0.5),
    ] {
        assert!((value - expected).abs() < 1e-7, "{value} vs {expected}");
    }
}
