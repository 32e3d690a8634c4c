//! Mass-constrained minimization of the free energy over star-shaped radial
//! fields: projected gradient descent with backtracking, multi-start, and
//! criticality certification via the first-variation residual.

use crate::anisotropy::{wulff_shape_2d, wulff_shape_3d, Tension, WulffResolution};
use crate::energy::{
    self, first_variation_residual, first_variation_residual_2d, EnergyReport,
    FirstVariationReport,
};
use crate::error::{Result, WulffError};
use crate::potential::Potential;
use crate::shapes::{Shape, Star2, Star3};
use nalgebra::{Vector2, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub enum Seed {
    Wulff,
    Ball,
    /// Ball with a seeded random low-mode radial perturbation.
    Random(u64),
}

impl Seed {
    pub fn label(&self) -> String {
        match self {
            Seed::Wulff => "wulff".into(),
            Seed::Ball => "ball".into(),
            Seed::Random(k) => format!("random-{k}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeOptions {
    pub mass: f64,
    pub max_iters: usize,
    /// Initial radial displacement cap as a fraction of the mean radius.
    pub initial_step_fraction: f64,
    /// Backtracking shrink factor.
    pub shrink: f64,
    /// Armijo sufficient-decrease constant.
    pub sufficient_decrease: f64,
    /// Convergence threshold on `residual_sup / mean |H_f|`.
    pub residual_tol: f64,
    /// Laplacian damping weight per unit step.
    pub smoothing_weight: f64,
    pub starts: Vec<Seed>,
    pub confinement_radius: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    /// Ray count of the 2D star representation.
    pub n_rays: usize,
    pub rng_seed: u64,
    /// Record (energy, residual, defect) every `history_stride` iterations.
    pub history_stride: usize,
}

impl MinimizeOptions {
    pub fn for_mass(mass: f64) -> Self {
        // Confinement comfortably contains any catalog minimizer of this mass.
        let ball_radius = (3.0 * mass / (4.0 * std::f64::consts::PI)).powf(1.0 / 3.0);
        MinimizeOptions {
            mass,
            max_iters: 600,
            initial_step_fraction: 0.05,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            residual_tol: 0.02,
            smoothing_weight: 1e-3,
            starts: vec![Seed::Wulff, Seed::Ball, Seed::Random(0), Seed::Random(1), Seed::Random(2)],
            confinement_radius: 6.0 * ball_radius,
            n_theta: 24,
            n_phi: 48,
            n_rays: 128,
            rng_seed: 0,
            history_stride: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(WulffError::Domain("mass must be positive".into()));
        }
        if !(self.residual_tol > 0.0) {
            return Err(WulffError::Domain("residual_tol must be positive".into()));
        }
        if !(self.confinement_radius > 0.0) {
            return Err(WulffError::Domain("confinement radius must be positive".into()));
        }
        if self.starts.is_empty() {
            return Err(WulffError::Precondition("at least one start is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct HistoryRow {
    pub iter: usize,
    pub energy: f64,
    pub residual_sup: f64,
    pub defect: f64,
}

#[derive(Debug, Clone)]
pub struct MinimizerResult {
    pub shape: Shape,
    pub report: EnergyReport,
    pub residual: FirstVariationReport,
    pub iterations: usize,
    pub converged: bool,
    pub start_label: String,
    pub history: Vec<HistoryRow>,
    pub convexity_defect: f64,
    pub confinement_activated: bool,
}

fn random_radial_modes(rng: &mut ChaCha8Rng, amplitude: f64) -> impl Fn(f64, f64) -> f64 {
    let c: Vec<f64> = (0..8).map(|_| rng.gen_range(-amplitude..amplitude)).collect();
    move |t: f64, p: f64| {
        1.0 + c[0] * t.cos()
            + c[1] * t.sin() * p.cos()
            + c[2] * t.sin() * p.sin()
            + c[3] * (2.0 * t).cos()
            + c[4] * t.sin() * t.cos() * (2.0 * p).cos()
            + c[5] * (3.0 * t).cos()
            + c[6] * t.sin() * (3.0 * p).sin()
            + c[7] * t.sin() * t.sin() * (2.0 * p).sin()
    }
}

fn seed_shape_3d(
    seed: &Seed,
    f: &Tension<3>,
    opts: &MinimizeOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Star3> {
    let ball_radius = (3.0 * opts.mass / (4.0 * std::f64::consts::PI)).powf(1.0 / 3.0);
    let star = match seed {
        Seed::Ball => Star3::ball(Vector3::zeros(), ball_radius, opts.n_theta, opts.n_phi)?,
        Seed::Wulff => {
            let res = WulffResolution {
                n_theta: opts.n_theta,
                n_phi: opts.n_phi,
                ..WulffResolution::default()
            };
            match wulff_shape_3d(f, opts.mass, res)?.body {
                Shape::Star3(s) => s,
                _ => unreachable!(),
            }
        }
        Seed::Random(_) => {
            let modes = random_radial_modes(rng, 0.35);
            Star3::from_fn(Vector3::zeros(), opts.n_theta, opts.n_phi, |t, p| {
                ball_radius * modes(t, p).max(0.2)
            })?
        }
    };
    project_mass_3d(&star, opts.mass)
}

fn project_mass_3d(s: &Star3, mass: f64) -> Result<Star3> {
    let v = s.volume();
    if !(v > 0.0) || !v.is_finite() {
        return Err(WulffError::Geometry("degenerate volume during projection".into()));
    }
    Ok(s.scaled((mass / v).powf(1.0 / 3.0)))
}

/// Mass projection in the triangulated volume, the measure the line search
/// holds fixed.  Polyhedral volume scales exactly cubically, so one scaling
/// lands on the constraint.
fn project_mass_tri(s: &Star3, mass: f64) -> Result<Star3> {
    let v = tri_volume(s);
    if !(v > 0.0) || !v.is_finite() {
        return Err(WulffError::Geometry("degenerate volume during projection".into()));
    }
    Ok(s.scaled((mass / v).powf(1.0 / 3.0)))
}

/// Jacobi passes of `I + omega * L` on a per-cell field, with `L` the
/// 4-neighbor ghost-stencil Laplacian.  The ghost mapping (pole reflection,
/// azimuthal wrap) pairs cells symmetrically, so `L` is symmetric negative
/// semidefinite and the composite is positive semidefinite for
/// `omega <= 1/8`.
fn smooth_direction(s: &Star3, v: &mut Vec<f64>, passes: usize) {
    let nphi = s.n_phi;
    for _ in 0..passes {
        let new: Vec<f64> = (0..v.len())
            .map(|idx| {
                let i = (idx / nphi) as isize;
                let j = (idx % nphi) as isize;
                let lap = v[s.ghost_index(i + 1, j)]
                    + v[s.ghost_index(i - 1, j)]
                    + v[s.ghost_index(i, j + 1)]
                    + v[s.ghost_index(i, j - 1)]
                    - 4.0 * v[idx];
                v[idx] + 0.125 * lap
            })
            .collect();
        *v = new;
    }
}

/// Surface energy of the node triangulation (the same mesh `to_trimesh`
/// builds).  The line search minimizes this instead of the central-difference
/// cell quadrature because the latter cannot see grid-Nyquist ("checkerboard")
/// radial modes: their central differences vanish, so the smooth quadrature
/// reports no area cost while the pointwise volume quadrature still grows,
/// and mass renormalization would turn that blindness into a spurious energy
/// descent below the true minimum.  Triangle areas are pointwise in the node
/// radii, so every mode carries its real area cost.
fn tri_surface_energy(s: &Star3, f: &Tension<3>) -> f64 {
    let mesh = s.to_trimesh();
    mesh.faces
        .iter()
        .map(|fc| {
            let (a, b, c) = (mesh.vertices[fc[0]], mesh.vertices[fc[1]], mesh.vertices[fc[2]]);
            let area_vec = (b - a).cross(&(c - a)) / 2.0;
            let area = area_vec.norm();
            if area > 0.0 {
                f.value(&(area_vec / area)) * area
            } else {
                0.0
            }
        })
        .sum()
}

/// Signed volume of the node triangulation (origin-apexed tetrahedra), the
/// measure the line search holds fixed so that area and volume are computed
/// from the same polyhedron.
fn tri_volume(s: &Star3) -> f64 {
    s.to_trimesh().volume()
}

/// `(f(normal) * area, signed tet volume)` summed over the triangles whose
/// geometry depends on the radius at node `(i, j)`: the six incident strip
/// triangles, plus — for the first and last rows — the whole polar fan,
/// because the cap apex sits at the row-mean radius.  The radius at node
/// `(i, j)` is taken from `r_at` instead of the shape, so FD probes need no
/// mutable scratch copy and the gradient assembly can run in parallel.
fn tri_local_terms(s: &Star3, f: &Tension<3>, i: usize, j: usize, r_at: f64) -> (f64, f64) {
    let nt = s.n_theta;
    let np = s.n_phi;
    let radius = |ii: usize, jj: usize| -> f64 {
        let jj = jj % np;
        if ii == i && jj == j {
            r_at
        } else {
            s.r[ii * np + jj]
        }
    };
    let node = |ii: usize, jj: usize| -> Vector3<f64> {
        s.center + s.direction(s.theta(ii), s.phi(jj % np)) * radius(ii, jj)
    };
    let mut e = 0.0;
    let mut v = 0.0;
    let mut face = |a: Vector3<f64>, b: Vector3<f64>, c: Vector3<f64>| {
        let area_vec = (b - a).cross(&(c - a)) / 2.0;
        let area = area_vec.norm();
        if area > 0.0 {
            e += f.value(&(area_vec / area)) * area;
        }
        v += a.dot(&b.cross(&c)) / 6.0;
    };
    // Strip quads (qi, qj) touching the node; same split/winding as the mesh.
    for di in [-1isize, 0] {
        let qi = i as isize + di;
        if qi < 0 || qi as usize >= nt - 1 {
            continue;
        }
        let qi = qi as usize;
        for dj in [-1isize, 0] {
            let qj = ((j as isize + dj).rem_euclid(np as isize)) as usize;
            let (a, b, c, d) =
                (node(qi, qj), node(qi + 1, qj), node(qi + 1, qj + 1), node(qi, qj + 1));
            let contains = |ii: usize, jj: usize| ii == i && jj % np == j;
            if contains(qi, qj) || contains(qi + 1, qj) || contains(qi + 1, qj + 1) {
                face(a, b, c);
            }
            if contains(qi, qj) || contains(qi + 1, qj + 1) || contains(qi, qj + 1) {
                face(a, c, d);
            }
        }
    }
    if i == 0 {
        let north_r = (0..np).map(|jj| radius(0, jj)).sum::<f64>() / np as f64;
        let apex = s.center + Vector3::new(0.0, 0.0, north_r);
        for jj in 0..np {
            face(apex, node(0, jj), node(0, jj + 1));
        }
    }
    if i == nt - 1 {
        let south_r = (0..np).map(|jj| radius(nt - 1, jj)).sum::<f64>() / np as f64;
        let apex = s.center + Vector3::new(0.0, 0.0, -south_r);
        for jj in 0..np {
            face(apex, node(nt - 1, jj + 1), node(nt - 1, jj));
        }
    }
    (e, v)
}

/// Gradients of the discrete energy and the discrete (triangulated) volume
/// with respect to the radial unknowns, by central differences of each
/// node's local face terms plus the cell's own radial potential quadrature.
/// Energy and volume are differentiated from the same polyhedron so the
/// constrained problem the line search solves is exactly consistent.
fn discrete_gradient_3d(s: &Star3, f: &Tension<3>, g: &Potential<3>) -> (Vec<f64>, Vec<f64>) {
    let n = s.n_theta * s.n_phi;
    let mean_r = s.r.iter().sum::<f64>() / n as f64;
    let eps = 1e-6 * mean_r;
    // Each entry is independent and assembled into a position-indexed vector,
    // so the result is bitwise identical at any worker count.
    let grads = crate::parallel::map_range(n, |idx| {
        let i = idx / s.n_phi;
        let j = idx % s.n_phi;
        let r0 = s.r[idx];
        let (e_plus, v_plus) = tri_local_terms(s, f, i, j, r0 + eps);
        let p_plus = energy::potential_cell_energy_at(s, idx, r0 + eps, g);
        let (e_minus, v_minus) = tri_local_terms(s, f, i, j, r0 - eps);
        let p_minus = energy::potential_cell_energy_at(s, idx, r0 - eps, g);
        ((e_plus + p_plus - e_minus - p_minus) / (2.0 * eps), (v_plus - v_minus) / (2.0 * eps))
    });
    grads.into_iter().unzip()
}

/// Minimize `F + G` at fixed mass over 3D star shapes, one result per start,
/// sorted best-first by total energy.
pub fn minimize_at_mass(
    f: &Tension<3>,
    g: &Potential<3>,
    opts: &MinimizeOptions,
) -> Result<Vec<MinimizerResult>> {
    opts.validate()?;
    let mut results: Vec<MinimizerResult> = opts
        .starts
        .iter()
        .map(|seed| minimize_single_3d(f, g, opts, seed))
        .collect::<Result<_>>()?;
    results.sort_by(|a, b| {
        a.report
            .total
            .partial_cmp(&b.report.total)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.start_label.cmp(&b.start_label))
    });
    Ok(results)
}

fn minimize_single_3d(
    f: &Tension<3>,
    g: &Potential<3>,
    opts: &MinimizeOptions,
    seed: &Seed,
) -> Result<MinimizerResult> {
    // `random-k` depends only on (rng_seed, k), never on the position of the
    // seed in the start list, so the same label names the same start shape.
    let salt = match seed {
        Seed::Random(k) => *k,
        _ => 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed.wrapping_add(salt));
    // Iterate on the triangulated-volume mass shell; the final shape is
    // rescaled back to the smooth-quadrature mass before reporting.
    let mut shape = project_mass_tri(&seed_shape_3d(seed, f, opts, &mut rng)?, opts.mass)?;
    let mut confinement_activated = false;
    // Line-search objective: node-triangulation surface energy (coercive on
    // every radial mode, see `tri_surface_energy`) plus the pointwise radial
    // potential quadrature.  Reported energies elsewhere keep the smooth cell
    // quadrature; the two agree to discretization order on smooth shapes.
    let energy_of = |s: &Star3| -> Result<f64> {
        Ok(tri_surface_energy(s, f) + energy::potential_energy(&Shape::Star3(s.clone()), g)?)
    };

    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    // Per-band step memory: each smoothing level has its own stability limit,
    // so each remembers its own accepted step fraction.
    let mut step_fractions = [opts.initial_step_fraction; 4];
    let mut energy = energy_of(&shape)?;

    for iter in 0..opts.max_iters {
        iterations = iter + 1;
        let field = energy::anisotropic_mean_curvature(&shape, f)?;
        let mu = energy::lagrange_multiplier_mu(&Shape::Star3(shape.clone()), f, g)?;
        // Raw first-variation residual over the unflagged patches: this is
        // the convergence criterion and the quantity recorded in history.
        let mut sup = 0.0f64;
        let mut mean_hf = 0.0;
        let mut area_total = 0.0;
        for (idx, p) in field.patches.iter().enumerate() {
            if field.flagged[idx] {
                continue;
            }
            sup = sup.max((field.h_f[idx] - mu + g.value(&p.point)).abs());
            mean_hf += field.h_f[idx].abs() * p.area;
            area_total += p.area;
        }
        mean_hf /= area_total;

        if iter % opts.history_stride == 0 {
            history.push(HistoryRow {
                iter,
                energy,
                residual_sup: sup,
                defect: shape.convexity_defect()?,
            });
        }
        if sup <= opts.residual_tol * mean_hf.max(1e-12) {
            converged = true;
            break;
        }

        // Descent direction from the exact gradient of the *discrete* energy.
        // The analytic curvature formula is not consistent with the cell
        // quadrature in the thin polar rows, so it is not a reliable descent
        // direction there; differentiating the discrete energy itself keeps
        // the line search honest everywhere.  Projecting out the volume
        // gradient enforces the mass constraint to first order, and dividing
        // by the cell measure recovers the pointwise curvature-flow velocity
        // scaling in the interior.
        let (ge, gv) = discrete_gradient_3d(&shape, f, g);
        let gg: f64 = ge.iter().zip(&gv).map(|(a, b)| a * b).sum();
        let vv: f64 = gv.iter().map(|b| b * b).sum();
        let mu_d = gg / vv.max(1e-300);
        let mut dir: Vec<f64> =
            ge.iter().zip(&gv).map(|(a, b)| -(a - mu_d * b) / b.max(1e-300)).collect();
        // Local time stepping: the azimuthal arm length collapses like
        // sin(theta) toward the poles, so the explicit stability limit of the
        // polar rows is far below the interior one.  Scaling each row by its
        // own squared arm-length ratio lets the global Armijo step run at the
        // interior limit while every row still moves at its own; without this
        // the pole-adjacent residual decays an order of magnitude slower than
        // the rest of the grid.  The azimuthal mean of a polar row is a
        // smooth mode whose stability limit is the interior one, so only the
        // azimuthal fluctuations are damped; per row the operator is
        // `mean + w (I - mean)` with `0 < w <= 1`, a positive combination of
        // the identity and the (positive-semidefinite) averaging projector,
        // so the raw direction stays a descent direction.
        let d_theta = std::f64::consts::PI / shape.n_theta as f64;
        let d_phi = 2.0 * std::f64::consts::PI / shape.n_phi as f64;
        let scale_rows = |dir: &mut [f64]| {
            for i in 0..shape.n_theta {
                let ratio = shape.theta(i).sin() * d_phi / d_theta;
                let w = (ratio * ratio).min(1.0);
                if w < 1.0 {
                    let row = &mut dir[i * shape.n_phi..(i + 1) * shape.n_phi];
                    let mean = row.iter().sum::<f64>() / row.len() as f64;
                    for d in row.iter_mut() {
                        *d = mean + w * (*d - mean);
                    }
                }
            }
        };
        scale_rows(&mut dir);
        let unsmoothed = dir.clone();
        // Sobolev-style preconditioning: Jacobi passes of the symmetric grid
        // Laplacian damp the stiff high-frequency modes whose explicit
        // stability limit would otherwise cap the step far below what the
        // smooth modes need.  Cycling the pass count lets every frequency
        // band take steps near its own stability limit instead of all bands
        // sharing the stiffest one.
        let passes = [0, 2, 8, 2 * shape.n_theta][iter % 4];
        smooth_direction(&shape, &mut dir, passes);
        let slope = |dir: &[f64]| -> f64 {
            ge.iter().zip(&gv).zip(dir).map(|((a, b), di)| (a - mu_d * b) * di).sum()
        };
        let mut dd = slope(&dir);
        if dd >= 0.0 {
            // The smoother composed with the row scaling is not symmetric, so
            // the smoothed field can occasionally lose the descent property.
            // The unsmoothed direction is minus the residual times a positive
            // diagonal, so its slope is nonpositive and vanishes only at a
            // discrete stationary point.
            dir = unsmoothed;
            dd = slope(&dir);
            if dd >= 0.0 {
                break; // discrete stationary point at quadrature precision
            }
        }

        let dirmax = dir.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1e-300);
        let mean_radius = shape.r.iter().sum::<f64>() / shape.r.len() as f64;
        // Step scaled so the radial displacement cap is honoured.
        let band = iter % 4;
        let mut step = step_fractions[band] * mean_radius / dirmax;
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial = shape.clone();
            for idx in 0..trial.r.len() {
                trial.r[idx] = (trial.r[idx] + step * dir[idx]).max(1e-4 * mean_radius);
            }
            // Every trial operation must vanish with the step size (the
            // smoothing weight scales with it; the clamp and the mass
            // projection are fixed points on feasible shapes); otherwise
            // backtracking hits a floor where the fixed cost beats the
            // step-proportional descent and the line search stalls.
            trial.smooth_radial(opts.smoothing_weight * step / (mean_radius * mean_radius).max(1e-12));
            // Confinement clamp.
            let cap = opts.confinement_radius;
            let mut clamped = false;
            for r in &mut trial.r {
                if *r > cap {
                    *r = cap;
                    clamped = true;
                }
            }
            let trial = project_mass_tri(&trial, opts.mass)?;
            let e_new = energy_of(&trial)?;
            if e_new <= energy + opts.sufficient_decrease * step * dd {
                if clamped {
                    confinement_activated = true;
                }
                shape = trial;
                energy = e_new;
                accepted = true;
                break;
            }
            step *= opts.shrink;
            step_fractions[band] = (step_fractions[band] * opts.shrink).max(1e-10);
        }
        if accepted {
            step_fractions[band] = (step_fractions[band] * 1.3).min(opts.initial_step_fraction);
        }
        // A rejected band is not a stall: the other bands may still descend,
        // and the convergence test at the top of the loop remains the only
        // exit that certifies criticality.
    }

    // Report at the smooth-quadrature mass; the O(h^2) rescale perturbs the
    // relative first-variation residual only at the same order.
    let shape = project_mass_3d(&shape, opts.mass)?;
    let last_residual = first_variation_residual(&shape, f, g)?;
    let mass_ok = {
        let v = shape.volume();
        (v - opts.mass).abs() / opts.mass <= 1e-3
    };
    let converged = (converged
        || last_residual.residual_sup <= opts.residual_tol * last_residual.mean_h_f.max(1e-12))
        && mass_ok;
    let defect = shape.convexity_defect()?;
    history.push(HistoryRow {
        iter: iterations,
        energy,
        residual_sup: last_residual.residual_sup,
        defect,
    });
    let report = energy::free_energy(&Shape::Star3(shape.clone()), f, g)?;
    Ok(MinimizerResult {
        shape: Shape::Star3(shape),
        report,
        residual: last_residual,
        iterations,
        converged,
        start_label: seed.label(),
        history,
        convexity_defect: defect,
        confinement_activated,
    })
}

/// 2D analog of `minimize_at_mass` over planar star shapes.
pub fn minimize_at_mass_2d(
    f: &Tension<2>,
    g: &Potential<2>,
    opts: &MinimizeOptions,
) -> Result<Vec<Minimizer2Result>> {
    opts.validate()?;
    let mut results: Vec<Minimizer2Result> = opts
        .starts
        .iter()
        .map(|seed| minimize_single_2d(f, g, opts, seed))
        .collect::<Result<_>>()?;
    results.sort_by(|a, b| {
        a.report
            .total
            .partial_cmp(&b.report.total)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.start_label.cmp(&b.start_label))
    });
    Ok(results)
}

#[derive(Debug, Clone)]
pub struct Minimizer2Result {
    pub shape: Star2,
    pub report: EnergyReport,
    pub residual: FirstVariationReport,
    pub iterations: usize,
    pub converged: bool,
    pub start_label: String,
    pub history: Vec<HistoryRow>,
    pub convexity_defect: f64,
    pub confinement_activated: bool,
}

fn seed_shape_2d(
    seed: &Seed,
    f: &Tension<2>,
    opts: &MinimizeOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Star2> {
    let disk_radius = (opts.mass / std::f64::consts::PI).sqrt();
    let star = match seed {
        Seed::Ball => Star2::disk(Vector2::zeros(), disk_radius, opts.n_rays)?,
        Seed::Wulff => {
            let res = WulffResolution { n_vertices: opts.n_rays, ..WulffResolution::default() };
            let poly = match wulff_shape_2d(f, opts.mass, res)?.body {
                Shape::Polygon2(p) => p,
                _ => unreachable!(),
            };
            // The Wulff polygon vertices are already on uniform rays about 0.
            Star2::new(Vector2::zeros(), poly.vertices.iter().map(|v| v.norm()).collect())?
        }
        Seed::Random(_) => {
            let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.35..0.35)).collect();
            Star2::from_fn(Vector2::zeros(), opts.n_rays, |a| {
                disk_radius
                    * (1.0
                        + c[0] * a.cos()
                        + c[1] * a.sin()
                        + c[2] * (2.0 * a).cos()
                        + c[3] * (2.0 * a).sin()
                        + c[4] * (3.0 * a).cos()
                        + c[5] * (3.0 * a).sin())
                    .max(0.2)
            })?
        }
    };
    project_mass_2d(&star, opts.mass)
}

fn project_mass_2d(s: &Star2, mass: f64) -> Result<Star2> {
    let v = s.area();
    if !(v > 0.0) || !v.is_finite() {
        return Err(WulffError::Geometry("degenerate area during projection".into()));
    }
    Ok(s.scaled((mass / v).sqrt()))
}

fn minimize_single_2d(
    f: &Tension<2>,
    g: &Potential<2>,
    opts: &MinimizeOptions,
    seed: &Seed,
) -> Result<Minimizer2Result> {
    let salt = match seed {
        Seed::Random(k) => *k,
        _ => 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed.wrapping_add(salt));
    let mut shape = seed_shape_2d(seed, f, opts, &mut rng)?;
    let mut confinement_activated = false;
    let energy_of = |s: &Star2| -> Result<f64> {
        let p = s.to_polygon()?;
        Ok(energy::surface_energy_2d(&p, f) + energy::potential_energy_2d(&p, g))
    };

    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut step_fraction = opts.initial_step_fraction;
    let mut energy = energy_of(&shape)?;

    for iter in 0..opts.max_iters {
        iterations = iter + 1;
        let poly = shape.to_polygon()?;
        let mu = energy::lagrange_multiplier_mu_2d(&poly, f, g)?;
        let elems = energy::anisotropic_curvature_2d(&shape, f)?;
        let n = shape.n();
        // Edge velocities averaged back to the shared vertices (rays).
        let mut velocity = vec![0.0; n];
        let mut sup = 0.0f64;
        let mut mean_hf = 0.0;
        let mut len_total = 0.0;
        let mut gnorm2 = 0.0;
        for (k, (el, h)) in elems.iter().enumerate() {
            let v = -(h - mu + g.value(&el.centroid));
            velocity[k] += v / 2.0;
            velocity[(k + 1) % n] += v / 2.0;
            sup = sup.max(v.abs());
            mean_hf += h.abs() * el.area;
            len_total += el.area;
            gnorm2 += v * v * el.area;
        }
        mean_hf /= len_total;

        if iter % opts.history_stride == 0 {
            history.push(HistoryRow {
                iter,
                energy,
                residual_sup: sup,
                defect: poly.convexity_defect()?,
            });
        }
        if sup <= opts.residual_tol * mean_hf.max(1e-12) {
            converged = true;
            break;
        }

        let vmax = velocity.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1e-300);
        let mean_radius = shape.r.iter().sum::<f64>() / n as f64;
        let mut step = step_fraction * mean_radius / vmax;
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial = shape.clone();
            for k in 0..n {
                trial.r[k] = (trial.r[k] + step * velocity[k]).max(1e-4 * mean_radius);
            }
            trial.smooth_radial(
                (opts.smoothing_weight * step / (mean_radius * mean_radius).max(1e-12)).min(0.25),
            );
            let cap = opts.confinement_radius;
            let mut clamped = false;
            for r in &mut trial.r {
                if *r > cap {
                    *r = cap;
                    clamped = true;
                }
            }
            let trial = project_mass_2d(&trial, opts.mass)?;
            let e_new = energy_of(&trial)?;
            if e_new <= energy - opts.sufficient_decrease * step * gnorm2 {
                if clamped {
                    confinement_activated = true;
                }
                shape = trial;
                energy = e_new;
                accepted = true;
                break;
            }
            step *= opts.shrink;
            step_fraction = (step_fraction * opts.shrink).max(1e-8);
        }
        if !accepted {
            break;
        }
        step_fraction = (step_fraction * 1.3).min(opts.initial_step_fraction);
    }

    let residual = first_variation_residual_2d(&shape, f, g)?;
    let mass_ok = (shape.area() - opts.mass).abs() / opts.mass <= 1e-3;
    let converged = (converged
        || residual.residual_sup <= opts.residual_tol * residual.mean_h_f.max(1e-12))
        && mass_ok;
    let poly = shape.to_polygon()?;
    let defect = poly.convexity_defect()?;
    history.push(HistoryRow { iter: iterations, energy, residual_sup: residual.residual_sup, defect });
    let report = energy::free_energy_2d(&poly, f, g)?;
    Ok(Minimizer2Result {
        shape,
        report,
        residual,
        iterations,
        converged,
        start_label: seed.label(),
        history,
        convexity_defect: defect,
        confinement_activated,
    })
}

#[derive(Debug, Clone)]
pub struct Certificate {
    pub is_critical: bool,
    pub is_local_min_probe: bool,
}

/// Audit a converged result: criticality from the stored residual, local
/// minimality by probing random volume-preserving perturbations.
pub fn certify_minimizer(
    result: &MinimizerResult,
    f: &Tension<3>,
    g: &Potential<3>,
    perturbations: usize,
) -> Result<Certificate> {
    if !result.converged {
        return Err(WulffError::Precondition("certification requires a converged result".into()));
    }
    let star = match &result.shape {
        Shape::Star3(s) => s,
        _ => return Err(WulffError::Precondition("certification requires a star shape".into())),
    };
    let is_critical =
        result.residual.residual_sup <= 0.03 * result.residual.mean_h_f.max(1e-12);
    let mass = star.volume();
    let base = result.report.total;
    let mut rng = ChaCha8Rng::seed_from_u64(0xce21);
    let mut probe_ok = true;
    for _ in 0..perturbations {
        let modes = random_radial_modes(&mut rng, 1.0);
        let mut trial = star.clone();
        for i in 0..trial.n_theta {
            for j in 0..trial.n_phi {
                let scale = 1.0 + 1e-2 * (modes(trial.theta(i), trial.phi(j)) - 1.0);
                trial.r[i * trial.n_phi + j] *= scale.max(0.5);
            }
        }
        let trial = project_mass_3d(&trial, mass)?;
        let sh = Shape::Star3(trial);
        let e = energy::surface_energy(&sh, f)? + energy::potential_energy(&sh, g)?;
        if e < base - 1e-9 * base.abs() {
            probe_ok = false;
            break;
        }
    }
    Ok(Certificate { is_critical, is_local_min_probe: probe_ok })
}
