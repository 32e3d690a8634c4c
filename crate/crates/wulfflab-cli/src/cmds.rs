//! Subcommand implementations: each builds its config (file or flags), runs
//! the corresponding library computation, and writes the run directory.

use std::path::{Path, PathBuf};

use nalgebra::{Rotation3, Unit, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use wulfflab::anisotropy::{wulff_shape_3d, WulffResolution};
use wulfflab::energy::surface_energy;
use wulfflab::graphpde::{
    default_delta, gauss_curvature_field, manufactured_problem, min_principle_diagnostic,
    ruled_surface_check, solve_graph_equation, uniform_convexity_audit, CoefficientModel, Domain2,
    GraphProblem, ManufacturedCase, MinPrincipleVerdict,
};
use wulfflab::optimizer::{minimize_at_mass, MinimizeOptions, MinimizerResult};
use wulfflab::shapes::{
    align as shape_align, AlignGroup, InvarianceMap, Shape, TriMesh,
};
use wulfflab::stability::{
    mass_sweep, modulus_estimate, modulus_estimate_2d, modulus_mass_exponent,
    modulus_mass_exponent_2d,
};
use wulfflab::WulffError;

use crate::config::{
    self, check_version, parse_masses, parse_starts, AlignConfig, GraphpdeConfig, MinimizeConfig,
    ModulusConfig, PotentialSpec, SweepConfig, TensionSpec, WulffConfig, CONFIG_VERSION,
};
use crate::outputs::{off_mesh, Csv, CsvCell, RunDir};
use crate::svg::{heatmap, Plot, Series};
use crate::{
    AlignArgs, CliError, CliResult, GraphpdeArgs, MinimizeArgs, ModulusArgs, ReportArgs, SweepArgs,
    WulffArgs,
};

fn run_dir(common: &crate::CommonArgs, default_name: &str) -> Result<RunDir, CliError> {
    let path = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{default_name}-out")));
    Ok(RunDir::create(&path)?)
}

fn echo(cfg: &impl serde::Serialize) -> Value {
    serde_json::to_value(cfg).expect("config serializes")
}

fn to_trimesh(shape: &Shape) -> Result<TriMesh, CliError> {
    match shape {
        Shape::Star3(s) => Ok(s.to_trimesh()),
        Shape::TriMesh(m) => Ok(m.clone()),
        Shape::Polygon2(_) => Err("planar shape has no 3D mesh export".to_string().into()),
    }
}

fn wulff_resolution(res: &config::ResolutionSpec) -> WulffResolution {
    WulffResolution {
        n_theta: res.n_theta,
        n_phi: res.n_phi,
        ..WulffResolution::default()
    }
}

// ---------------------------------------------------------------------------
// wulff

pub fn wulff(a: &WulffArgs) -> CliResult {
    let cfg: WulffConfig = match &a.common.config {
        Some(p) => config::load(p)?,
        None => WulffConfig {
            version: CONFIG_VERSION,
            tension: TensionSpec::parse_flag(&a.tension)?,
            mass: a.mass,
            resolution: a.resolution.spec(),
        },
    };
    check_version(cfg.version)?;
    let dir = run_dir(&a.common, "wulff")?;
    let f = cfg.tension.build()?;
    let ws = wulff_shape_3d(&f, cfg.mass, wulff_resolution(&cfg.resolution))?;

    let surface = surface_energy(&ws.body, &f)?;
    // F(K) = 3 |K| at the natural scale only; audit the identity there.
    let natural = ws.body.rescale_to_mass(ws.natural_volume)?;
    let surface_natural = surface_energy(&natural, &f)?;
    let identity_rel_error =
        (surface_natural - 3.0 * ws.natural_volume).abs() / (3.0 * ws.natural_volume);
    let defect = ws.body.convexity_defect()?;

    dir.write("wulff.off", &off_mesh(&to_trimesh(&ws.body)?))?;
    if let Shape::Star3(s) = &ws.body {
        let mut csv = Csv::new(&["theta", "phi", "r"]);
        for i in 0..s.n_theta {
            for j in 0..s.n_phi {
                csv.row(&[
                    CsvCell::Float(s.theta(i)),
                    CsvCell::Float(s.phi(j)),
                    CsvCell::Float(s.r[i * s.n_phi + j]),
                ]);
            }
        }
        dir.write("wulff.csv", &csv.finish())?;
    }
    let results = json!({
        "volume": ws.volume,
        "natural-volume": ws.natural_volume,
        "scale": ws.scale,
        "surface-energy": surface,
        "surface-energy-natural-scale": surface_natural,
        "identity-rel-error": identity_rel_error,
        "convexity-defect": defect,
        "summary": format!(
            "Wulff body at mass {:.6}: F = {:.6}, F = 3|K| identity error {:.3e}",
            cfg.mass, surface, identity_rel_error
        ),
        "primary-metric": {"name": "surface-energy", "value": surface},
    });
    dir.write_record("wulff", &echo(&cfg), results, vec![])?;
    println!("wulff: F = {surface:.6}, identity error {identity_rel_error:.3e}");
    Ok(())
}

// ---------------------------------------------------------------------------
// minimize

fn minimize_options(cfg: &MinimizeConfig) -> Result<MinimizeOptions, CliError> {
    let mut opts = MinimizeOptions::for_mass(cfg.mass);
    opts.max_iters = cfg.max_iters;
    opts.residual_tol = cfg.residual_tol;
    opts.starts = parse_starts(&cfg.starts)?;
    opts.n_theta = cfg.resolution.n_theta;
    opts.n_phi = cfg.resolution.n_phi;
    opts.n_rays = cfg.resolution.n_rays;
    opts.rng_seed = cfg.rng_seed;
    Ok(opts)
}

fn result_row(r: &MinimizerResult) -> Vec<CsvCell> {
    vec![
        CsvCell::Text(r.start_label.clone()),
        CsvCell::Bool(r.converged),
        CsvCell::Int(r.iterations as i64),
        CsvCell::Float(r.report.total),
        CsvCell::Float(r.report.surface),
        CsvCell::Float(r.report.potential),
        CsvCell::Float(r.report.mu),
        CsvCell::Float(r.residual.residual_sup),
        CsvCell::Float(r.residual.residual_sup / r.residual.mean_h_f.max(1e-300)),
        CsvCell::Float(r.residual.min_mu_minus_g),
        CsvCell::Float(r.convexity_defect),
        CsvCell::Bool(r.confinement_activated),
    ]
}

pub fn minimize(a: &MinimizeArgs) -> CliResult {
    let cfg: MinimizeConfig = match &a.common.config {
        Some(p) => config::load(p)?,
        None => MinimizeConfig {
            version: CONFIG_VERSION,
            tension: TensionSpec::parse_flag(&a.tension)?,
            potential: PotentialSpec::parse_flag(&a.potential)?,
            mass: a.mass,
            resolution: a.resolution.spec(),
            max_iters: a.max_iters,
            residual_tol: a.residual_tol,
            starts: a.starts.split(',').map(|s| s.trim().to_string()).collect(),
            rng_seed: a.rng_seed,
        },
    };
    check_version(cfg.version)?;
    let dir = run_dir(&a.common, "minimize")?;
    let f = cfg.tension.build()?;
    let g = cfg.potential.build()?;
    let opts = minimize_options(&cfg)?;
    let results = minimize_at_mass(&f, &g, &opts)?;

    let mut starts_csv = Csv::new(&[
        "start",
        "converged",
        "iterations",
        "energy",
        "surface",
        "potential",
        "mu",
        "residual_sup",
        "residual_rel",
        "min_mu_minus_g",
        "convexity_defect",
        "confinement_activated",
    ]);
    let mut history_csv = Csv::new(&["start", "iter", "energy", "residual_sup", "defect"]);
    for r in &results {
        starts_csv.row(&result_row(r));
        for h in &r.history {
            history_csv.row(&[
                CsvCell::Text(r.start_label.clone()),
                CsvCell::Int(h.iter as i64),
                CsvCell::Float(h.energy),
                CsvCell::Float(h.residual_sup),
                CsvCell::Float(h.defect),
            ]);
        }
    }
    dir.write("starts.csv", &starts_csv.finish())?;
    dir.write("history.csv", &history_csv.finish())?;

    let best = &results[0];
    dir.write("shape.off", &off_mesh(&to_trimesh(&best.shape)?))?;

    let plot = Plot {
        title: "energy descent".into(),
        x_label: "iteration".into(),
        y_label: "total energy".into(),
        log_x: false,
        log_y: false,
        series: results
            .iter()
            .map(|r| Series {
                label: r.start_label.clone(),
                points: r.history.iter().map(|h| (h.iter as f64, h.energy)).collect(),
                line: true,
            })
            .collect(),
    };
    dir.write("convergence.svg", &plot.render())?;

    let converged: Vec<&MinimizerResult> = results.iter().filter(|r| r.converged).collect();
    let energy_spread = if converged.len() >= 2 {
        let lo = converged.iter().map(|r| r.report.total).fold(f64::INFINITY, f64::min);
        let hi = converged.iter().map(|r| r.report.total).fold(f64::NEG_INFINITY, f64::max);
        (hi - lo) / lo.abs().max(1e-300)
    } else {
        0.0
    };
    let mut warnings = Vec::new();
    for r in &results {
        if !r.converged {
            warnings.push(format!("start `{}` did not converge", r.start_label));
        }
        if r.confinement_activated {
            warnings.push(format!("start `{}` hit the confinement radius", r.start_label));
        }
    }
    let res_json = json!({
        "best-start": best.start_label,
        "converged": best.converged,
        "energy": best.report.total,
        "surface": best.report.surface,
        "potential": best.report.potential,
        "mu": best.report.mu,
        "residual-sup": best.residual.residual_sup,
        "residual-rel": best.residual.residual_sup / best.residual.mean_h_f.max(1e-300),
        "min-mu-minus-g": best.residual.min_mu_minus_g,
        "convexity-defect": best.convexity_defect,
        "multi-start-energy-spread": energy_spread,
        "summary": format!(
            "minimize at mass {:.6}: E = {:.6} ({} of {} starts converged, spread {:.2e})",
            cfg.mass, best.report.total, converged.len(), results.len(), energy_spread
        ),
        "primary-metric": {"name": "total-energy", "value": best.report.total},
    });
    dir.write_record("minimize", &echo(&cfg), res_json, warnings)?;
    println!(
        "minimize: best E = {:.6} from `{}` ({} iterations)",
        best.report.total, best.start_label, best.iterations
    );
    if converged.is_empty() {
        return Err(WulffError::NonConvergence(format!(
            "no start reached residual tolerance {} in {} iterations",
            cfg.residual_tol, cfg.max_iters
        ))
        .into());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep

pub fn sweep(a: &SweepArgs) -> CliResult {
    let cfg: SweepConfig = match &a.common.config {
        Some(p) => config::load(p)?,
        None => SweepConfig {
            version: CONFIG_VERSION,
            tension: TensionSpec::parse_flag(&a.tension)?,
            potential: PotentialSpec::parse_flag(&a.potential)?,
            masses: parse_masses(&a.masses)?,
            epsilon: a.epsilon,
            defect_tol: a.defect_tol,
            resolution: a.resolution.spec(),
            max_iters: a.max_iters,
            starts: a.starts.split(',').map(|s| s.trim().to_string()).collect(),
            rng_seed: a.rng_seed,
        },
    };
    check_version(cfg.version)?;
    let dir = run_dir(&a.common, "sweep")?;
    let f = cfg.tension.build()?;
    let g = cfg.potential.build()?;
    let stab = cfg.stability()?;
    let mut masses = cfg.masses.clone();
    masses.sort_by(|x, y| x.partial_cmp(y).unwrap());
    masses.dedup();
    let result = mass_sweep(&f, &g, &masses, cfg.epsilon, cfg.defect_tol, &stab)?;

    let mut csv = Csv::new(&[
        "mass",
        "energy",
        "defect",
        "residual_sup",
        "mean_h_f",
        "energy_disagreement",
        "alignment_residual_prev",
        "converged",
    ]);
    for r in &result.rows {
        csv.row(&[
            CsvCell::Float(r.mass),
            CsvCell::Float(r.energy),
            CsvCell::Float(r.defect),
            CsvCell::Float(r.residual_sup),
            CsvCell::Float(r.mean_h_f),
            CsvCell::Float(r.energy_disagreement),
            CsvCell::Float(r.alignment_residual_prev),
            CsvCell::Bool(r.converged),
        ]);
    }
    dir.write("sweep.csv", &csv.finish())?;
    let mut ratio_csv = Csv::new(&["mass", "gap_to_modulus_ratio"]);
    for &(m, r) in &result.ratio_series {
        ratio_csv.row(&[CsvCell::Float(m), CsvCell::Float(r)]);
    }
    dir.write("ratio.csv", &ratio_csv.finish())?;

    let plot = Plot {
        title: "mass sweep".into(),
        x_label: "mass".into(),
        y_label: "value".into(),
        log_x: true,
        log_y: false,
        series: vec![
            Series {
                label: "total energy".into(),
                points: result.rows.iter().map(|r| (r.mass, r.energy)).collect(),
                line: true,
            },
            Series {
                label: "convexity defect".into(),
                points: result.rows.iter().map(|r| (r.mass, r.defect)).collect(),
                line: true,
            },
        ],
    };
    dir.write("sweep.svg", &plot.render())?;

    let max_defect =
        result.rows.iter().map(|r| r.defect).fold(0.0f64, f64::max);
    let res_json = json!({
        "rows": result.rows.len(),
        "detected-threshold": result.detected_threshold,
        "max-defect": max_defect,
        "summary": format!(
            "sweep over {} masses in [{:.4}, {:.4}]: max defect {:.3e}, threshold {}",
            result.rows.len(),
            masses.first().unwrap(),
            masses.last().unwrap(),
            max_defect,
            match result.detected_threshold {
                Some(t) => format!("{t:.4}"),
                None => "none".into(),
            }
        ),
        "primary-metric": {"name": "max-defect", "value": max_defect},
    });
    let warnings = result
        .rows
        .iter()
        .filter(|r| !r.converged)
        .map(|r| format!("mass {:.6} did not converge", r.mass))
        .collect();
    dir.write_record("sweep", &echo(&cfg), res_json, warnings)?;
    println!(
        "sweep: {} masses, max defect {:.3e}, threshold {:?}",
        result.rows.len(),
        max_defect,
        result.detected_threshold
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// modulus

pub fn modulus(a: &ModulusArgs) -> CliResult {
    let cfg: ModulusConfig = match &a.common.config {
        Some(p) => config::load(p)?,
        None => ModulusConfig {
            version: CONFIG_VERSION,
            tension: TensionSpec::parse_flag(&a.tension)?,
            potential: PotentialSpec::parse_flag(&a.potential)?,
            masses: parse_masses(&a.masses)?,
            epsilon: a.epsilon,
            budget: a.budget,
            dimension: a.dimension,
            resolution: a.resolution.spec(),
            max_iters: a.max_iters,
            starts: a.starts.split(',').map(|s| s.trim().to_string()).collect(),
            rng_seed: a.rng_seed,
        },
    };
    check_version(cfg.version)?;
    let dir = run_dir(&a.common, "modulus")?;
    let stab = cfg.stability()?;

    // With enough masses the library fit also returns the per-mass moduli;
    // below the fit threshold estimate each mass individually.
    let (points, fit) = match (cfg.dimension, cfg.masses.len() >= 4) {
        (3, true) => {
            let f = cfg.tension.build()?;
            let g = cfg.potential.build()?;
            let fit =
                modulus_mass_exponent(&f, &g, cfg.epsilon, &cfg.masses, cfg.budget, &stab)?;
            (fit.used.clone(), Some(fit))
        }
        (2, true) => {
            let f = cfg.tension.build_2d()?;
            let g = cfg.potential.build_2d()?;
            let fit =
                modulus_mass_exponent_2d(&f, &g, cfg.epsilon, &cfg.masses, cfg.budget, &stab)?;
            (fit.used.clone(), Some(fit))
        }
        (3, false) => {
            let f = cfg.tension.build()?;
            let g = cfg.potential.build()?;
            let mut pts = Vec::new();
            for &m in &cfg.masses {
                let est = modulus_estimate(&f, &g, m, cfg.epsilon, cfg.budget, &stab)?;
                pts.push((m, est.value));
            }
            (pts, None)
        }
        (2, false) => {
            let f = cfg.tension.build_2d()?;
            let g = cfg.potential.build_2d()?;
            let mut pts = Vec::new();
            for &m in &cfg.masses {
                let est = modulus_estimate_2d(&f, &g, m, cfg.epsilon, cfg.budget, &stab)?;
                pts.push((m, est.value));
            }
            (pts, None)
        }
        (d, _) => return Err(format!("dimension must be 2 or 3, got {d}").into()),
    };

    let mut csv = Csv::new(&["mass", "modulus"]);
    for &(m, w) in &points {
        csv.row(&[CsvCell::Float(m), CsvCell::Float(w)]);
    }
    dir.write("modulus.csv", &csv.finish())?;

    let mut series = vec![Series {
        label: "modulus upper bound".into(),
        points: points.clone(),
        line: false,
    }];
    if let Some(fit) = &fit {
        series.push(Series {
            label: format!("fit slope {:.3}", fit.slope),
            points: points
                .iter()
                .map(|&(m, _)| (m, (fit.intercept + fit.slope * m.ln()).exp()))
                .collect(),
            line: true,
        });
    }
    let plot = Plot {
        title: format!("stability modulus vs mass ({}D)", cfg.dimension),
        x_label: "mass".into(),
        y_label: "modulus".into(),
        log_x: true,
        log_y: true,
        series,
    };
    dir.write("modulus.svg", &plot.render())?;

    let expected = if cfg.dimension == 3 { 2.0 / 3.0 } else { 0.5 };
    let res_json = match &fit {
        Some(fit) => json!({
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r-squared": fit.r_squared,
            "expected-slope": expected,
            "samples": fit.used.len(),
            "excluded": fit.excluded,
            "summary": format!(
                "modulus exponent in {}D: slope {:.4} (expected {:.4}), r^2 {:.4}",
                cfg.dimension, fit.slope, expected, fit.r_squared
            ),
            "primary-metric": {"name": "mass-exponent", "value": fit.slope},
        }),
        None => json!({
            "samples": points.len(),
            "summary": format!("modulus at {} masses (too few for an exponent fit)", points.len()),
            "primary-metric": {"name": "modulus", "value": points.last().map(|p| p.1)},
        }),
    };
    dir.write_record("modulus", &echo(&cfg), res_json, vec![])?;
    match &fit {
        Some(fit) => println!("modulus: slope {:.4} (expected {expected:.4})", fit.slope),
        None => println!("modulus: {} estimates written", points.len()),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// graphpde

fn cap_problem(h: f64, mu: f64) -> GraphProblem {
    GraphProblem {
        domain: Domain2::Disk { center: nalgebra::Vector2::zeros(), radius: 1.0 },
        h,
        coefficients: CoefficientModel::Isotropic,
        mu,
        potential: std::sync::Arc::new(|x: nalgebra::Vector2<f64>, _| x.norm_squared()),
        boundary_data: std::sync::Arc::new(|_| 0.0),
    }
}

pub fn graphpde(a: &GraphpdeArgs) -> CliResult {
    let cfg: GraphpdeConfig = match &a.common.config {
        Some(p) => config::load(p)?,
        None => GraphpdeConfig {
            version: CONFIG_VERSION,
            case: a.case.clone(),
            h: config::parse_masses(&a.h).map_err(|e| format!("bad h list: {e}"))?,
            mu: a.mu,
        },
    };
    check_version(cfg.version)?;
    if cfg.h.is_empty() {
        return Err("need at least one grid spacing".to_string().into());
    }
    let dir = run_dir(&a.common, "graphpde")?;

    let manufactured = match cfg.case.as_str() {
        "manufactured-paraboloid" => Some(ManufacturedCase::Paraboloid),
        "manufactured-ruled" => Some(ManufacturedCase::Ruled),
        "manufactured-quartic" => Some(ManufacturedCase::Quartic),
        "cap" => None,
        other => return Err(format!("unknown graph case `{other}`").into()),
    };

    let mut hs = cfg.h.clone();
    hs.sort_by(|x, y| y.partial_cmp(x).unwrap()); // coarse to fine

    let mut warnings = Vec::new();
    let res_json;
    if let Some(case) = manufactured {
        let mut csv =
            Csv::new(&["h", "max_error", "order", "newton_iterations", "residual_max"]);
        let mut errs: Vec<(f64, f64)> = Vec::new();
        let mut last = None;
        for &h in &hs {
            let (prob, exact) = manufactured_problem(case, h);
            let sol = solve_graph_equation(&prob)?;
            let err = max_error(&sol, &exact);
            let order = errs
                .last()
                .map(|&(hp, ep)| (ep / err).ln() / (hp / h).ln())
                .unwrap_or(f64::NAN);
            csv.row(&[
                CsvCell::Float(h),
                CsvCell::Float(err),
                CsvCell::Float(order),
                CsvCell::Int(sol.newton_iterations as i64),
                CsvCell::Float(sol.residual_max),
            ]);
            errs.push((h, err));
            last = Some(sol);
        }
        dir.write("graphpde.csv", &csv.finish())?;
        let last = last.unwrap();
        dir.write("solution.svg", &heatmap(&last.u, &format!("graph solution ({case:?})")))?;
        let w = gauss_curvature_field(&last.u);
        dir.write("curvature.svg", &heatmap(&w, "scaled Hessian determinant"))?;

        let mut extra = json!({});
        if case == ManufacturedCase::Ruled {
            let ruled = ruled_surface_check(&last.u, default_delta(last.u.h));
            extra = json!({
                "is-ruled": ruled.is_ruled,
                "direction-spread": ruled.direction_spread,
            });
        }
        let plot = Plot {
            title: "convergence".into(),
            x_label: "h".into(),
            y_label: "max error".into(),
            log_x: true,
            log_y: true,
            series: vec![Series { label: "max error".into(), points: errs.clone(), line: true }],
        };
        dir.write("convergence.svg", &plot.render())?;
        let final_order = if errs.len() >= 2 {
            let (hp, ep) = errs[errs.len() - 2];
            let (h, e) = errs[errs.len() - 1];
            (ep / e).ln() / (hp / h).ln()
        } else {
            f64::NAN
        };
        res_json = json!({
            "errors": errs.iter().map(|&(h, e)| json!({"h": h, "max-error": e})).collect::<Vec<_>>(),
            "final-order": if final_order.is_finite() { Some(final_order) } else { None },
            "structure": extra,
            "summary": format!(
                "{:?}: finest max error {:.3e}{}",
                case,
                errs.last().unwrap().1,
                if final_order.is_finite() {
                    format!(", observed order {final_order:.2}")
                } else {
                    String::new()
                }
            ),
            "primary-metric": {"name": "max-error", "value": errs.last().unwrap().1},
        });
    } else {
        let mut csv = Csv::new(&[
            "h",
            "newton_iterations",
            "residual_max",
            "min_trace",
            "min_w",
            "verdict",
        ]);
        let mut verdicts = Vec::new();
        let mut last = None;
        for &h in &hs {
            let prob = cap_problem(h, cfg.mu);
            let sol = solve_graph_equation(&prob)?;
            let delta = default_delta(h);
            let w = gauss_curvature_field(&sol.u);
            let audit = uniform_convexity_audit(&sol.u, delta);
            let verdict = min_principle_diagnostic(&w, delta);
            let label = match &verdict {
                MinPrincipleVerdict::AllPositive => "all-positive".to_string(),
                MinPrincipleVerdict::IdenticallyZero => "identically-zero".to_string(),
                MinPrincipleVerdict::Violation(s) => format!("violation({})", s.len()),
            };
            if matches!(verdict, MinPrincipleVerdict::Violation(_)) {
                warnings.push(format!("interior-vanishing dichotomy violated at h = {h}"));
            }
            csv.row(&[
                CsvCell::Float(h),
                CsvCell::Int(sol.newton_iterations as i64),
                CsvCell::Float(sol.residual_max),
                CsvCell::Float(audit.min_trace),
                CsvCell::Float(audit.min_w),
                CsvCell::Text(label.clone()),
            ]);
            verdicts.push(json!({"h": h, "verdict": label, "min-w": audit.min_w}));
            last = Some(sol);
        }
        dir.write("graphpde.csv", &csv.finish())?;
        let last = last.unwrap();
        dir.write("solution.svg", &heatmap(&last.u, "capillary cap height"))?;
        let w = gauss_curvature_field(&last.u);
        dir.write("curvature.svg", &heatmap(&w, "scaled Hessian determinant"))?;
        res_json = json!({
            "mu": cfg.mu,
            "levels": verdicts,
            "summary": format!("cap at mu = {}: {} levels solved, no dichotomy violation: {}",
                cfg.mu, hs.len(), warnings.is_empty()),
            "primary-metric": {"name": "residual-max", "value": last.residual_max},
        });
    }
    dir.write_record("graphpde", &echo(&cfg), res_json, warnings)?;
    println!("graphpde: case `{}` solved at {} levels", cfg.case, hs.len());
    Ok(())
}

fn max_error(sol: &wulfflab::graphpde::GraphSolution, exact: &wulfflab::graphpde::BoundaryData) -> f64 {
    wulfflab::graphpde::max_error(&sol.u, exact)
}

// ---------------------------------------------------------------------------
// align

pub fn align(a: &AlignArgs) -> CliResult {
    let cfg: AlignConfig = match &a.common.config {
        Some(p) => config::load(p)?,
        None => AlignConfig {
            version: CONFIG_VERSION,
            tension: TensionSpec::parse_flag(&a.tension)?,
            mass: a.mass,
            group: a.group.clone(),
            rng_seed: a.rng_seed,
            resolution: a.resolution.spec(),
        },
    };
    check_version(cfg.version)?;
    let group = match cfg.group.as_str() {
        "translations" => AlignGroup::Translations,
        "rigid" => AlignGroup::Rigid,
        other => return Err(format!("unknown alignment group `{other}`").into()),
    };
    let dir = run_dir(&a.common, "align")?;
    let f = cfg.tension.build()?;
    let ws = wulff_shape_3d(&f, cfg.mass, wulff_resolution(&cfg.resolution))?;

    // Plant a seeded rigid motion on the body and ask the aligner for it back.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let ball_radius = (3.0 * cfg.mass / (4.0 * std::f64::consts::PI)).powf(1.0 / 3.0);
    let t = Vector3::new(
        rng.gen_range(-0.5..0.5),
        rng.gen_range(-0.5..0.5),
        rng.gen_range(-0.5..0.5),
    ) * ball_radius;
    let rotation = if group == AlignGroup::Translations {
        Rotation3::identity()
    } else {
        let axis = Unit::new_normalize(Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ));
        Rotation3::from_axis_angle(&axis, rng.gen_range(0.3..1.2))
    };
    let mesh = to_trimesh(&ws.body)?;
    let moved = Shape::TriMesh(TriMesh {
        vertices: mesh.vertices.iter().map(|v| rotation * v + t).collect(),
        faces: mesh.faces.clone(),
    });
    dir.write("moved.off", &off_mesh(&to_trimesh(&moved)?))?;

    let (recovered, residual) = shape_align(&moved, &ws.body, group)?;
    let rel_residual = residual / cfg.mass;
    let (rot_err, trans_err) = match &recovered {
        InvarianceMap::D3(m) => (
            (m.rotation - rotation.matrix()).norm(),
            (m.translation - t).norm() / ball_radius,
        ),
        InvarianceMap::D2(_) => unreachable!("3D alignment returns a 3D map"),
    };
    // Rotational symmetries of the body make the rotation factor non-unique;
    // the symmetric-difference residual is the meaningful recovery metric.
    let recovered_t = recovered.translation_part();

    let mut csv = Csv::new(&["quantity", "planted", "recovered"]);
    for k in 0..3 {
        csv.row(&[
            CsvCell::Text(format!("translation_{k}")),
            CsvCell::Float(t[k]),
            CsvCell::Float(recovered_t[k]),
        ]);
    }
    dir.write("align.csv", &csv.finish())?;

    let res_json = json!({
        "group": cfg.group,
        "planted-translation": [t.x, t.y, t.z],
        "recovered-translation": [recovered_t.x, recovered_t.y, recovered_t.z],
        "translation-error-rel": trans_err,
        "rotation-frobenius-error": rot_err,
        "symdiff-residual-rel": rel_residual,
        "summary": format!(
            "align ({}): symmetric-difference residual {:.3e} of mass, translation error {:.3e}",
            cfg.group, rel_residual, trans_err
        ),
        "primary-metric": {"name": "alignment-residual", "value": rel_residual},
    });
    dir.write_record("align", &echo(&cfg), res_json, vec![])?;
    println!("align: residual {rel_residual:.3e} (relative symmetric difference)");
    Ok(())
}

// ---------------------------------------------------------------------------
// report

pub fn report(a: &ReportArgs) -> CliResult {
    let mut records: Vec<(String, Value)> = Vec::new();
    let direct = a.dir.join("record.json");
    if direct.is_file() {
        records.push((a.dir.display().to_string(), read_record(&direct)?));
    }
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(&a.dir)
        .map_err(|e| format!("cannot read {}: {e}", a.dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join("record.json").is_file())
        .collect();
    subdirs.sort();
    for sub in &subdirs {
        let name = sub.file_name().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
        records.push((name, read_record(&sub.join("record.json"))?));
    }
    if records.is_empty() {
        return Err(format!("no record.json files found under {}", a.dir.display()).into());
    }

    let out = a.out.clone().unwrap_or_else(|| a.dir.join("report"));
    let dir = RunDir::create(&out)?;

    let mut md = String::from("# Run report\n\n| run | command | timestamp | summary |\n|---|---|---|---|\n");
    let mut metric_series: std::collections::BTreeMap<String, Vec<(f64, f64)>> =
        std::collections::BTreeMap::new();
    for (idx, (name, rec)) in records.iter().enumerate() {
        let cmd = rec["command"].as_str().unwrap_or("?");
        let ts = rec["timestamp"].as_str().unwrap_or("?");
        let summary = rec["results"]["summary"].as_str().unwrap_or("");
        md.push_str(&format!("| {name} | {cmd} | {ts} | {} |\n", summary.replace('|', "\\|")));
        if let (Some(mname), Some(v)) = (
            rec["results"]["primary-metric"]["name"].as_str(),
            rec["results"]["primary-metric"]["value"].as_f64(),
        ) {
            metric_series.entry(mname.to_string()).or_default().push((idx as f64, v));
        }
        let warns = rec["warnings"].as_array().map(|w| w.len()).unwrap_or(0);
        if warns > 0 {
            md.push_str(&format!("\n> {name}: {warns} warning(s); see its record.json.\n\n"));
        }
    }
    md.push_str(&format!("\n{} run(s) aggregated.\n", records.len()));
    dir.write("summary.md", &md)?;

    let plot = Plot {
        title: "primary metrics by run".into(),
        x_label: "run index".into(),
        y_label: "metric value".into(),
        log_x: false,
        log_y: false,
        series: metric_series
            .into_iter()
            .map(|(label, points)| Series { label, points, line: false })
            .collect(),
    };
    dir.write("summary.svg", &plot.render())?;
    println!("report: {} run(s) -> {}", records.len(), out.display());
    Ok(())
}

fn read_record(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::from(format!("bad record {}: {e}", path.display())))
}
