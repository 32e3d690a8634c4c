//! End-to-end acceptance gate: ten numbered criteria, each printing one
//! `criterion N: PASS/FAIL` line with the measured values.

use std::f64::consts::PI;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{Matrix3, Rotation3, Unit, Vector2, Vector3};

use wulfflab::anisotropy::{wulff_shape_3d, Tension, WulffResolution};
use wulfflab::energy::{anisotropic_mean_curvature, surface_energy};
use wulfflab::graphpde::{
    default_delta, gauss_curvature_field, manufactured_problem, max_error,
    min_principle_diagnostic, solve_graph_equation, CoefficientModel, Domain2, GraphProblem,
    GridField, ManufacturedCase, MinPrincipleVerdict,
};
use wulfflab::optimizer::{minimize_at_mass, MinimizeOptions, MinimizerResult, Seed};
use wulfflab::potential::Potential;
use wulfflab::shapes::{
    align, symmetric_difference_mapped, AlignGroup, InvarianceMap, Shape, Star3, TriMesh,
};
use wulfflab::stability::{
    mass_sweep, modulus_estimate, modulus_mass_exponent, modulus_mass_exponent_2d,
    scaling_gap_check, StabilityConfig,
};

fn check(criterion: usize, ok: bool, detail: &str) {
    println!("criterion {criterion}: {} — {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn opts(mass: f64, n_theta: usize, n_phi: usize, starts: Vec<Seed>) -> MinimizeOptions {
    MinimizeOptions {
        n_theta,
        n_phi,
        starts,
        max_iters: 1200,
        ..MinimizeOptions::for_mass(mass)
    }
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
    (0..n).map(|k| lo * ratio.powi(k as i32)).collect()
}

/// Criterion 1: with isotropic tension and no potential at the ball mass
/// 4 pi / 3, every start converges to the ball: total energy within 0.5% of
/// 4 pi, convexity defect below 1e-3, under two minutes at 32 x 64.
#[test]
fn criterion_1_isoperimetric_recovery() {
    let t0 = Instant::now();
    let f = Tension::euclidean();
    let g = Potential::zero();
    let mass = 4.0 * PI / 3.0;
    let o = opts(mass, 32, 64, vec![Seed::Wulff, Seed::Ball, Seed::Random(0)]);
    let results = minimize_at_mass(&f, &g, &o).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();

    let all_converged = results.iter().all(|r| r.converged);
    let best = &results[0];
    let energy_err = (best.report.total - 4.0 * PI).abs() / (4.0 * PI);
    let ok = all_converged && energy_err < 5e-3 && best.convexity_defect < 1e-3 && elapsed < 120.0;
    check(
        1,
        ok,
        &format!(
            "isoperimetric: energy {:.6} vs 4pi (rel err {:.2e}), defect {:.2e}, \
             {}/{} starts converged, {:.1}s",
            best.report.total,
            energy_err,
            best.convexity_defect,
            results.iter().filter(|r| r.converged).count(),
            results.len(),
            elapsed
        ),
    );
}

/// Criterion 2: with an ellipsoidal tension and no potential the minimizer
/// matches the Wulff shape (symmetric difference < 2% of the mass) and the
/// construction satisfies F(K) = 3 |K| at the natural scale within 0.5%.
#[test]
fn criterion_2_wulff_recovery() {
    let f = Tension::ellipsoidal(Matrix3::from_diagonal(&Vector3::new(1.0, 1.4, 1.8)));
    let g = Potential::zero();
    let mass = 1.0;
    let ws = wulff_shape_3d(&f, mass, WulffResolution::default()).unwrap();
    let natural = ws.body.rescale_to_mass(ws.natural_volume).unwrap();
    let identity_err = (surface_energy(&natural, &f).unwrap() - 3.0 * ws.natural_volume).abs()
        / (3.0 * ws.natural_volume);

    let o = opts(mass, 24, 48, vec![Seed::Wulff, Seed::Ball, Seed::Random(0)]);
    let results = minimize_at_mass(&f, &g, &o).unwrap();
    let best = &results[0];
    // The problem is translation invariant; compare after centroid matching.
    let shift = best.shape.centroid() - ws.body.centroid();
    let (symdiff, _) = symmetric_difference_mapped(
        &best.shape,
        &ws.body,
        Some(&InvarianceMap::translation3(shift)),
        128,
    );
    let ok = best.converged && symdiff / mass < 0.02 && identity_err < 5e-3;
    check(
        2,
        ok,
        &format!(
            "Wulff recovery: symdiff {:.3e} of mass, F = 3|K| identity error {:.3e}, converged {}",
            symdiff / mass,
            identity_err,
            best.converged
        ),
    );
}

/// Area-weighted mean of `H_f + g` over unflagged patches: the multiplier
/// value that zeroes the mean first-variation residual.
fn residual_zeroing_mu(s: &Star3, f: &Tension<3>, g: &Potential<3>) -> f64 {
    let field = anisotropic_mean_curvature(s, f).unwrap();
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, p) in field.patches.iter().enumerate() {
        if field.flagged[k] {
            continue;
        }
        num += (field.h_f[k] + g.value(&p.point)) * p.area;
        den += p.area;
    }
    num / den
}

/// Criterion 3: on every converged minimizer the first-variation identity
/// holds: sup residual < 3% of mean |H_f|, the explicit multiplier formula
/// matches the residual-zeroing value within 1%, and `mu - g` stays positive
/// on the boundary for convex potentials.
#[test]
fn criterion_3_first_variation() {
    let iso = Tension::euclidean();
    let ell = Tension::ellipsoidal(Matrix3::from_diagonal(&Vector3::new(1.0, 1.3, 1.6)));
    let runs: Vec<(&str, Tension<3>, Potential<3>, bool)> = vec![
        ("isotropic/zero", iso.clone(), Potential::zero(), true),
        ("ellipsoidal/zero", ell, Potential::zero(), true),
        ("isotropic/radial-quadratic", iso.clone(), Potential::radial_power(2).unwrap(), true),
        ("isotropic/flat-bottom", iso.clone(), Potential::flat_bottom(0.3), true),
    ];
    let mut detail = String::new();
    let mut ok = true;
    let mut checked = 0;
    for (label, f, g, convex) in &runs {
        let o = opts(1.0, 24, 48, vec![Seed::Wulff, Seed::Ball, Seed::Random(0)]);
        let results = minimize_at_mass(f, g, &o).unwrap();
        for r in results.iter().filter(|r| r.converged) {
            checked += 1;
            let rel = r.residual.residual_sup / r.residual.mean_h_f;
            let star = match &r.shape {
                Shape::Star3(s) => s,
                _ => unreachable!(),
            };
            let mu_zero = residual_zeroing_mu(star, f, g);
            let mu_err = (r.report.mu - mu_zero).abs() / mu_zero.abs();
            let positive = !convex || r.residual.min_mu_minus_g > 0.0;
            if rel >= 0.03 || mu_err >= 0.01 || !positive {
                ok = false;
            }
            detail.push_str(&format!(
                "[{label}/{}: res {:.2e}, mu err {:.2e}, min(mu-g) {:.3}] ",
                r.start_label, rel, mu_err, r.residual.min_mu_minus_g
            ));
        }
    }
    ok = ok && checked >= 4;
    check(3, ok, &format!("first variation on {checked} converged minimizers: {detail}"));
}

/// Criterion 4: the graph solver reproduces the manufactured paraboloid to
/// quadrature precision (the stencils are exact on quadratics) at
/// h in {1/32, 1/64, 1/128} in under 30 s per level, and measures order
/// >= 1.9 on the quartic solution where truncation is genuinely second order.
#[test]
fn criterion_4_graph_convergence() {
    let hs = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
    let mut ok = true;
    let mut detail = String::new();
    for &h in &hs {
        let t0 = Instant::now();
        let (prob, exact) = manufactured_problem(ManufacturedCase::Paraboloid, h);
        let sol = solve_graph_equation(&prob).unwrap();
        let err = max_error(&sol.u, &exact);
        let dt = t0.elapsed().as_secs_f64();
        if err >= 1e-7 || dt >= 30.0 {
            ok = false;
        }
        detail.push_str(&format!("[paraboloid h=1/{:.0}: err {err:.2e}, {dt:.1}s] ", 1.0 / h));
    }
    let mut errs = Vec::new();
    for &h in &hs {
        let (prob, exact) = manufactured_problem(ManufacturedCase::Quartic, h);
        let sol = solve_graph_equation(&prob).unwrap();
        errs.push((h, max_error(&sol.u, &exact)));
    }
    for w in errs.windows(2) {
        let order = (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln();
        if order < 1.9 {
            ok = false;
        }
        detail.push_str(&format!("[quartic order {order:.2}] "));
    }
    check(4, ok, &detail);
}

/// Criterion 5: across >= 10 solved uniformly-convex problems the interior
/// positivity diagnostic of the scaled Hessian determinant never reports a
/// violation at delta = 10 h^2, while a synthetic field with an interior
/// zero amid genuine positivity is correctly flagged.
#[test]
fn criterion_5_min_principle_dichotomy() {
    let h = 1.0 / 32.0;
    let delta = default_delta(h);
    let mut solved = 0;
    let mut violations = 0;
    // Pairs (mu, c) with potential c |x|^2: all keep the radial flux
    // mu r / 2 - c r^3 / 4 below 1 on the unit disk, and keep a margin
    // mu - sup g large enough that the cap is uniformly convex.  (With a
    // thin margin the scaled Hessian determinant genuinely changes sign
    // near the boundary; that is a property of the problem, not the
    // solver, so those cases do not belong in a dichotomy check.)
    let cases = [
        (1.0, 0.0),
        (1.4, 0.0),
        (1.8, 0.0),
        (1.4, 0.5),
        (1.8, 0.5),
        (2.2, 0.5),
        (1.8, 1.0),
        (2.0, 1.0),
        (2.2, 1.0),
        (2.4, 1.0),
    ];
    for (mu, c) in cases {
        let prob = GraphProblem {
            domain: Domain2::Disk { center: Vector2::zeros(), radius: 1.0 },
            h,
            coefficients: CoefficientModel::Isotropic,
            mu,
            potential: Arc::new(move |x: Vector2<f64>, _| c * x.norm_squared()),
            boundary_data: Arc::new(|_| 0.0),
        };
        let sol = solve_graph_equation(&prob).unwrap();
        solved += 1;
        let w = gauss_curvature_field(&sol.u);
        if matches!(min_principle_diagnostic(&w, delta), MinPrincipleVerdict::Violation(_)) {
            violations += 1;
        }
    }
    // Negative control: positive away from an interior zero.
    let n = 65;
    let mut values = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let x = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
            let y = -1.0 + 2.0 * j as f64 / (n - 1) as f64;
            values.push(x * x + y * y);
        }
    }
    let synthetic = GridField {
        nx: n,
        ny: n,
        lo: Vector2::new(-1.0, -1.0),
        h: 2.0 / (n - 1) as f64,
        values,
        name: "synthetic".into(),
    };
    let flagged = matches!(
        min_principle_diagnostic(&synthetic, delta),
        MinPrincipleVerdict::Violation(_)
    );
    let ok = solved >= 10 && violations == 0 && flagged;
    check(
        5,
        ok,
        &format!(
            "{solved} convex problems solved, {violations} violations, \
             synthetic interior zero flagged: {flagged}"
        ),
    );
}

/// Criterion 6: the stability-modulus mass exponent fits 2/3 (+- 0.1) in 3D
/// and 1/2 (+- 0.1) in 2D over a decade of small masses with budget 200.
#[test]
fn criterion_6_modulus_mass_exponent() {
    let t0 = Instant::now();
    let cfg = StabilityConfig { starts: vec![Seed::Ball], ..Default::default() };
    let masses = log_spaced(0.04, 0.4, 6);
    let f3 = Tension::euclidean();
    let g3 = Potential::zero();
    let fit3 = modulus_mass_exponent(&f3, &g3, 0.1, &masses, 200, &cfg).unwrap();
    let f2: Tension<2> = Tension::euclidean();
    let g2: Potential<2> = Potential::zero();
    let fit2 = modulus_mass_exponent_2d(&f2, &g2, 0.1, &masses, 200, &cfg).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    let ok = (fit3.slope - 2.0 / 3.0).abs() < 0.1
        && (fit2.slope - 0.5).abs() < 0.1
        && elapsed < 1800.0;
    check(
        6,
        ok,
        &format!(
            "3D slope {:.4} (target 0.667 +- 0.1, r^2 {:.4}), \
             2D slope {:.4} (target 0.5 +- 0.1, r^2 {:.4}), {:.0}s",
            fit3.slope, fit3.r_squared, fit2.slope, fit2.r_squared, elapsed
        ),
    );
}

/// Criterion 7: with no potential the energy gap between masses m < M equals
/// (36 pi)^(1/3) (M^(2/3) - m^(2/3)) within 1%, and with convex potentials
/// the gap stays below the calibrated scaling bound (ratio <= 1).
#[test]
fn criterion_7_scaling_gap() {
    let cfg = StabilityConfig { starts: vec![Seed::Ball], ..Default::default() };
    let f = Tension::euclidean();
    let checks =
        scaling_gap_check(&f, &Potential::zero(), &[(0.5, 1.5), (0.4, 2.0)], &cfg).unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for c in &checks {
        let analytic = (36.0 * PI).powf(1.0 / 3.0)
            * (c.mass_high.powf(2.0 / 3.0) - c.mass_low.powf(2.0 / 3.0));
        let rel = (c.gap - analytic).abs() / analytic;
        if rel >= 0.01 {
            ok = false;
        }
        detail.push_str(&format!(
            "[g=0 ({},{}): gap {:.4} vs {:.4}, rel {:.2e}] ",
            c.mass_low, c.mass_high, c.gap, analytic, rel
        ));
    }
    let convex = scaling_gap_check(
        &f,
        &Potential::radial_power(2).unwrap(),
        &[(0.3, 0.8), (0.5, 1.5)],
        &cfg,
    )
    .unwrap();
    for c in &convex {
        if c.ratio > 1.0 {
            ok = false;
        }
        detail.push_str(&format!(
            "[convex ({},{}): gap/bound {:.3}, gamma1 {:.3}] ",
            c.mass_low, c.mass_high, c.ratio, c.gamma1
        ));
    }
    check(7, ok, &detail);
}

/// Criterion 8: sweeping isotropic tension with an increasing radial
/// potential over masses 0.1..10 finds no convexity threshold: all defects
/// below 1e-2 and multi-start energies agreeing within 1%.
#[test]
fn criterion_8_no_convexity_threshold() {
    let cfg = StabilityConfig {
        starts: vec![Seed::Ball, Seed::Random(0)],
        ..Default::default()
    };
    let masses = log_spaced(0.1, 10.0, 7);
    let sweep = mass_sweep(
        &Tension::euclidean(),
        &Potential::radial_power(2).unwrap(),
        &masses,
        0.1,
        1e-2,
        &cfg,
    )
    .unwrap();
    let max_defect = sweep.rows.iter().map(|r| r.defect).fold(0.0f64, f64::max);
    let max_disagreement =
        sweep.rows.iter().map(|r| r.energy_disagreement).fold(0.0f64, f64::max);
    let all_converged = sweep.rows.iter().all(|r| r.converged);
    let ok = sweep.detected_threshold.is_none()
        && max_defect < 1e-2
        && max_disagreement < 0.01
        && all_converged;
    check(
        8,
        ok,
        &format!(
            "masses {:.1}..{:.0}: threshold {:?}, max defect {:.2e}, \
             max multi-start disagreement {:.2e}, all converged {all_converged}",
            masses[0], masses[6], sweep.detected_threshold, max_defect, max_disagreement
        ),
    );
}

fn trimesh_of(r: &MinimizerResult) -> TriMesh {
    match &r.shape {
        Shape::Star3(s) => s.to_trimesh(),
        Shape::TriMesh(m) => m.clone(),
        Shape::Polygon2(_) => unreachable!(),
    }
}

/// Criterion 9: invariance suite — translation and rotation leave the energy
/// unchanged to quadrature tolerance, alignment recovers planted rigid
/// motions within 2% residual, and the modulus is monotone in budget and
/// epsilon.
#[test]
fn criterion_9_invariance_suite() {
    let mut ok = true;
    let mut detail = String::new();

    // Translation invariance of F with g = 0, rotation invariance of an
    // isotropic F, on a converged minimizer mesh.
    let f = Tension::euclidean();
    let o = opts(1.0, 24, 48, vec![Seed::Ball]);
    let base = &minimize_at_mass(&f, &Potential::zero(), &o).unwrap()[0];
    let mesh = trimesh_of(base);
    let e0 = surface_energy(&Shape::TriMesh(mesh.clone()), &f).unwrap();

    let t = Vector3::new(0.37, -1.21, 0.64);
    let translated = TriMesh {
        vertices: mesh.vertices.iter().map(|v| v + t).collect(),
        faces: mesh.faces.clone(),
    };
    let e_t = surface_energy(&Shape::TriMesh(translated), &f).unwrap();
    let trans_err = (e_t - e0).abs() / e0;
    if trans_err >= 1e-10 {
        ok = false;
    }
    detail.push_str(&format!("[translation energy drift {trans_err:.2e}] "));

    let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(1.0, 2.0, 0.5)), 0.83);
    let rotated = TriMesh {
        vertices: mesh.vertices.iter().map(|v| rot * v).collect(),
        faces: mesh.faces.clone(),
    };
    let e_r = surface_energy(&Shape::TriMesh(rotated), &f).unwrap();
    let rot_err = (e_r - e0).abs() / e0;
    if rot_err >= 1e-10 {
        ok = false;
    }
    detail.push_str(&format!("[rotation energy drift {rot_err:.2e}] "));

    // Alignment recovers a planted rigid motion of an anisotropic body.
    let ell = Tension::ellipsoidal(Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 2.0)));
    let ws = wulff_shape_3d(&ell, 1.0, WulffResolution::default()).unwrap();
    let body_mesh = match &ws.body {
        Shape::Star3(s) => s.to_trimesh(),
        _ => unreachable!(),
    };
    let planted_rot =
        Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(0.2, 1.0, 0.4)), 0.9);
    let planted_t = Vector3::new(0.31, -0.18, 0.22);
    let moved = Shape::TriMesh(TriMesh {
        vertices: body_mesh.vertices.iter().map(|v| planted_rot * v + planted_t).collect(),
        faces: body_mesh.faces.clone(),
    });
    let (_, residual) = align(&moved, &ws.body, AlignGroup::Rigid).unwrap();
    let align_rel = residual / ws.body.volume().unwrap();
    if align_rel >= 0.02 {
        ok = false;
    }
    detail.push_str(&format!("[planted rigid motion residual {align_rel:.2e}] "));

    // Modulus monotonicity in budget and epsilon.
    let cfg = StabilityConfig { starts: vec![Seed::Ball], ..Default::default() };
    let g = Potential::zero();
    let by_budget: Vec<f64> = [20, 60, 120]
        .iter()
        .map(|&b| modulus_estimate(&f, &g, 1.0, 0.1, b, &cfg).unwrap().value)
        .collect();
    let by_eps: Vec<f64> = [0.05, 0.1, 0.2]
        .iter()
        .map(|&e| modulus_estimate(&f, &g, 1.0, e, 60, &cfg).unwrap().value)
        .collect();
    let budget_mono = by_budget.windows(2).all(|w| w[1] <= w[0] + 1e-15);
    let eps_mono = by_eps.windows(2).all(|w| w[1] >= w[0] - 1e-15);
    if !budget_mono || !eps_mono {
        ok = false;
    }
    detail.push_str(&format!(
        "[modulus vs budget {by_budget:?} monotone {budget_mono}, \
         vs epsilon {by_eps:?} monotone {eps_mono}]"
    ));
    check(9, ok, &detail);
}

/// Criterion 10: the CLI is reproducible — identical config and seed give
/// byte-identical CSV outputs when restricted to one worker thread.
#[test]
fn criterion_10_reproducibility() {
    let base = std::env::temp_dir().join(format!("wulfflab-repro-{}", std::process::id()));
    std::fs::create_dir_all(&base).unwrap();
    let config = base.join("config.json");
    std::fs::write(
        &config,
        r#"{
  "version": 1,
  "tension": "euclidean",
  "potential": {"radial-power": {"power": 2}},
  "mass": 1.0,
  "resolution": {"n_theta": 16, "n_phi": 32},
  "starts": ["ball", "random:0"],
  "rng-seed": 42
}"#,
    )
    .unwrap();
    let run = |out: &std::path::Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_wulfflab"))
            .args(["minimize", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out)
            .env("WULFFLAB_THREADS", "1")
            .status()
            .unwrap();
        assert!(status.success(), "minimize run failed");
    };
    let (d1, d2) = (base.join("run1"), base.join("run2"));
    run(&d1);
    run(&d2);
    let mut ok = true;
    let mut detail = String::new();
    for name in ["starts.csv", "history.csv"] {
        let a = std::fs::read(d1.join(name)).unwrap();
        let b = std::fs::read(d2.join(name)).unwrap();
        let same = a == b;
        if !same {
            ok = false;
        }
        detail.push_str(&format!("[{name}: {} bytes, identical {same}] ", a.len()));
    }
    let _ = std::fs::remove_dir_all(&base);
    check(10, ok, &detail);
}
