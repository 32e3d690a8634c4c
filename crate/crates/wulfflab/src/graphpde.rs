//! Quasilinear graph equation `a_ij(grad u) u_ij = mu - g(x, u)` on planar
//! domains, plus the Hessian-determinant diagnostics: the surrogate
//! `w = det D^2 u`, its minimum-principle dichotomy, and convexity audits.
//!
//! Discretization: generalized finite differences.  Every interior node fits
//! a quadratic through its eight neighbors (grid nodes, or boundary
//! intercepts on curved domains), so the scheme is exact on quadratic
//! solutions everywhere, including the irregular ring of a disk domain.

use crate::error::{Result, WulffError};
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use std::sync::Arc;

pub type BoundaryData = Arc<dyn Fn(Vector2<f64>) -> f64 + Send + Sync>;
/// Potential restricted to the graph: `(x, u(x)) -> g`.
pub type GraphPotential = Arc<dyn Fn(Vector2<f64>, f64) -> f64 + Send + Sync>;
pub type CoefficientFn = Arc<dyn Fn(Vector2<f64>) -> Matrix2<f64> + Send + Sync>;

#[derive(Debug, Clone)]
pub enum Domain2 {
    Rect { lo: Vector2<f64>, hi: Vector2<f64> },
    Disk { center: Vector2<f64>, radius: f64 },
}

#[derive(Clone)]
pub enum CoefficientModel {
    /// `a_ij(p) = (delta_ij - p_i p_j / (1 + |p|^2)) / sqrt(1 + |p|^2)`.
    Isotropic,
    Custom(CoefficientFn),
}

impl CoefficientModel {
    pub fn eval(&self, p: Vector2<f64>) -> Matrix2<f64> {
        match self {
            CoefficientModel::Isotropic => isotropic_coefficients(p),
            CoefficientModel::Custom(f) => f(p),
        }
    }
}

pub fn isotropic_coefficients(p: Vector2<f64>) -> Matrix2<f64> {
    let q = 1.0 + p.norm_squared();
    (Matrix2::identity() - p * p.transpose() / q) / q.sqrt()
}

#[derive(Clone)]
pub struct GraphProblem {
    pub domain: Domain2,
    pub h: f64,
    pub coefficients: CoefficientModel,
    pub mu: f64,
    pub potential: GraphPotential,
    pub boundary_data: BoundaryData,
}

/// Scalar field on a uniform grid; NaN marks nodes outside the domain.
#[derive(Debug, Clone)]
pub struct GridField {
    pub nx: usize,
    pub ny: usize,
    pub lo: Vector2<f64>,
    pub h: f64,
    pub values: Vec<f64>,
    pub name: String,
}

impl GridField {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn point(&self, i: usize, j: usize) -> Vector2<f64> {
        self.lo + Vector2::new(i as f64, j as f64) * self.h
    }

    pub fn finite_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied().filter(|v| v.is_finite())
    }
}

// ---------------------------------------------------------------------------
// Banded linear algebra (LAPACK-style storage, partial pivoting).

pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    /// Column-major band storage with `2 kl + ku + 1` rows; entry (i, j) of
    /// the full matrix lives at band row `kl + ku + i - j`.
    ab: Vec<f64>,
    ldab: usize,
    pivots: Vec<usize>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandedMatrix { n, kl, ku, ab: vec![0.0; ldab * n], ldab, pivots: vec![0; n] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        self.kl + self.ku + i - j + j * self.ldab
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i + self.kl >= j && j + self.ku >= i, "({i},{j}) outside band");
        let k = self.idx(i, j);
        self.ab[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    /// LU factorization with row partial pivoting (in place).
    ///
    /// The band storage reserves `2 kl + ku + 1` rows per column, so every
    /// position a pivoted elimination can touch (fill included) is a valid,
    /// zero-initialized slot; the update loops therefore run over contiguous
    /// column slices with no per-element band-membership tests.
    pub fn factor(&mut self) -> Result<()> {
        let n = self.n;
        let (kl, ku, ldab) = (self.kl, self.ku, self.ldab);
        // Effective upper bandwidth grows to kl + ku after pivoting.
        for k in 0..n {
            // Pivot search in column k, rows k..=min(k+kl, n-1): contiguous
            // from the diagonal slot down.
            let imax = (k + kl).min(n - 1);
            let diag = kl + ku + k * ldab;
            let mut piv = k;
            let mut best = 0.0f64;
            for i in k..=imax {
                let v = self.ab[diag + (i - k)].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best < 1e-300 {
                return Err(WulffError::NonConvergence(format!(
                    "singular banded system at column {k}"
                )));
            }
            self.pivots[k] = piv;
            let jmax = (k + kl + ku).min(n - 1);
            if piv != k {
                let d = piv - k;
                for j in k..=jmax {
                    // Swap rows k and piv within the band of column j.
                    let a = kl + ku + k - j + j * ldab;
                    self.ab.swap(a, a + d);
                }
            }
            // Scale the subdiagonal of column k into multipliers, then rank-1
            // update each trailing column with a contiguous axpy.
            let inv_pivot = 1.0 / self.ab[diag];
            for i in (k + 1)..=imax {
                self.ab[diag + (i - k)] *= inv_pivot;
            }
            if k == n - 1 {
                break;
            }
            let (head, tail) = self.ab.split_at_mut((k + 1) * ldab);
            let mult = &head[diag + 1..diag + 1 + (imax - k)];
            for j in (k + 1)..=jmax {
                let col = &mut tail[(j - k - 1) * ldab..(j - k) * ldab];
                // Local slot of row k within column j.
                let d = kl + ku + k - j;
                let akj = col[d];
                if akj != 0.0 {
                    let target = &mut col[d + 1..d + 1 + mult.len()];
                    for (t, &m) in mult.iter().enumerate() {
                        target[t] -= m * akj;
                    }
                }
            }
        }
        Ok(())
    }

    /// Solve `A x = b` in place after `factor`.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let (kl, ku, ldab) = (self.kl, self.ku, self.ldab);
        for k in 0..n {
            let piv = self.pivots[k];
            if piv != k {
                b.swap(k, piv);
            }
            let imax = (k + kl).min(n - 1);
            for i in (k + 1)..=imax {
                b[i] -= self.ab[kl + ku + i - k + k * ldab] * b[k];
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + kl + ku).min(n - 1);
            for j in (k + 1)..=jmax {
                b[k] -= self.ab[kl + ku + k - j + j * ldab] * b[j];
            }
            b[k] /= self.ab[kl + ku + k * ldab];
        }
    }
}

// ---------------------------------------------------------------------------
// Discretization.

#[derive(Clone, Copy)]
enum Sample {
    /// Another grid node (full-grid index).
    Node(usize),
    /// Boundary intercept with a pinned Dirichlet value.
    Boundary(f64),
}

#[derive(Clone)]
struct Stencil {
    samples: Vec<(Sample, Vector2<f64>)>,
    /// Rows map sampled increments `u(x+xi) - u(x)` to
    /// `(u_x, u_y, u_xx, u_yy, u_xy)`.
    weights: [Vec<f64>; 5],
}

#[derive(Clone, Copy, PartialEq)]
enum NodeKind {
    Outside,
    Dirichlet,
    Interior,
}

struct Discretization {
    nx: usize,
    ny: usize,
    lo: Vector2<f64>,
    h: f64,
    kind: Vec<NodeKind>,
    boundary_values: Vec<f64>,
    stencils: Vec<Option<Stencil>>,
    /// Full-grid index per unknown, and the inverse map.
    unknowns: Vec<usize>,
    unknown_of: Vec<Option<usize>>,
    bandwidth: usize,
}

const NEIGHBOR_DIRS: [(isize, isize); 8] =
    [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

fn build_discretization(prob: &GraphProblem) -> Result<Discretization> {
    let h = prob.h;
    if !(h > 0.0) {
        return Err(WulffError::Domain("grid spacing must be positive".into()));
    }
    let (lo, hi) = match &prob.domain {
        Domain2::Rect { lo, hi } => (*lo, *hi),
        Domain2::Disk { center, radius } => {
            (center - Vector2::repeat(*radius), center + Vector2::repeat(*radius))
        }
    };
    let nx = ((hi.x - lo.x) / h).round() as usize + 1;
    let ny = ((hi.y - lo.y) / h).round() as usize + 1;
    if nx < 5 || ny < 5 {
        return Err(WulffError::Precondition("grid too coarse: need at least 5 nodes per axis".into()));
    }
    let point = |i: usize, j: usize| lo + Vector2::new(i as f64, j as f64) * h;

    let inside = |p: Vector2<f64>| -> bool {
        match &prob.domain {
            Domain2::Rect { lo, hi } => {
                p.x > lo.x + 1e-12 && p.x < hi.x - 1e-12 && p.y > lo.y + 1e-12 && p.y < hi.y - 1e-12
            }
            Domain2::Disk { center, radius } => (p - center).norm() < radius - 1e-12,
        }
    };
    let on_closure = |p: Vector2<f64>| -> bool {
        match &prob.domain {
            Domain2::Rect { lo, hi } => {
                p.x >= lo.x - 1e-12 && p.x <= hi.x + 1e-12 && p.y >= lo.y - 1e-12 && p.y <= hi.y + 1e-12
            }
            Domain2::Disk { center, radius } => (p - center).norm() <= radius + 1e-12,
        }
    };

    let mut kind = vec![NodeKind::Outside; nx * ny];
    let mut boundary_values = vec![f64::NAN; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let p = point(i, j);
            if inside(p) {
                kind[j * nx + i] = NodeKind::Interior;
            } else if on_closure(p) {
                kind[j * nx + i] = NodeKind::Dirichlet;
                boundary_values[j * nx + i] = (prob.boundary_data)(p);
            }
        }
    }

    // Boundary intercept along a ray: largest t in (0, 1] keeping x + t*d in
    // the closed domain (d already includes the step length).
    let clip = |x: Vector2<f64>, d: Vector2<f64>| -> (f64, Vector2<f64>) {
        match &prob.domain {
            Domain2::Rect { .. } => (1.0, x + d), // rect grids align with the boundary
            Domain2::Disk { center, radius } => {
                let q = x - center;
                // |q + t d|^2 = radius^2.
                let a = d.norm_squared();
                let b = 2.0 * q.dot(&d);
                let c = q.norm_squared() - radius * radius;
                let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
                let t = ((-b + disc) / (2.0 * a)).clamp(1e-9, 1.0);
                (t, x + d * t)
            }
        }
    };

    let mut stencils = vec![None; nx * ny];
    let mut unknowns = Vec::new();
    let mut unknown_of = vec![None; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            if kind[j * nx + i] != NodeKind::Interior {
                continue;
            }
            unknown_of[j * nx + i] = Some(unknowns.len());
            unknowns.push(j * nx + i);
            let x = point(i, j);
            let mut samples = Vec::with_capacity(8);
            for (di, dj) in NEIGHBOR_DIRS {
                let (ni, nj) = (i as isize + di, j as isize + dj);
                let step = Vector2::new(di as f64, dj as f64) * h;
                let in_grid = ni >= 0 && nj >= 0 && (ni as usize) < nx && (nj as usize) < ny;
                let nidx = if in_grid { Some(nj as usize * nx + ni as usize) } else { None };
                match nidx.map(|k| kind[k]) {
                    Some(NodeKind::Interior) => {
                        samples.push((Sample::Node(nidx.unwrap()), step));
                    }
                    Some(NodeKind::Dirichlet) => {
                        samples.push((Sample::Boundary(boundary_values[nidx.unwrap()]), step));
                    }
                    _ => {
                        let (_, p) = clip(x, step);
                        samples.push((Sample::Boundary((prob.boundary_data)(p)), p - x));
                    }
                }
            }
            stencils[j * nx + i] = Some(fit_stencil(samples)?);
        }
    }
    if unknowns.is_empty() {
        return Err(WulffError::Geometry("domain contains no interior grid nodes".into()));
    }

    // Exact bandwidth of the compressed system.
    let mut bandwidth = 1;
    for &gidx in &unknowns {
        let row = unknown_of[gidx].unwrap();
        if let Some(st) = &stencils[gidx] {
            for (s, _) in &st.samples {
                if let Sample::Node(m) = s {
                    if let Some(col) = unknown_of[*m] {
                        bandwidth = bandwidth.max(row.abs_diff(col));
                    }
                }
            }
        }
    }

    Ok(Discretization {
        nx,
        ny,
        lo,
        h,
        kind,
        boundary_values,
        stencils,
        unknowns,
        unknown_of,
        bandwidth,
    })
}

/// Weighted least-squares quadratic fit producing derivative weights; exact
/// on quadratic functions by construction.
fn fit_stencil(samples: Vec<(Sample, Vector2<f64>)>) -> Result<Stencil> {
    let m = samples.len();
    let mut a = DMatrix::<f64>::zeros(m, 5);
    let mut wdiag = DVector::<f64>::zeros(m);
    for (row, (_, xi)) in samples.iter().enumerate() {
        let (x, y) = (xi.x, xi.y);
        a[(row, 0)] = x;
        a[(row, 1)] = y;
        a[(row, 2)] = 0.5 * x * x;
        a[(row, 3)] = 0.5 * y * y;
        a[(row, 4)] = x * y;
        wdiag[row] = 1.0 / xi.norm_squared().max(1e-300);
    }
    // Solve (A' W A) C = A' W, columns of C give the derivative weights.
    let mut atwa = nalgebra::SMatrix::<f64, 5, 5>::zeros();
    for r in 0..m {
        for i in 0..5 {
            for j in 0..5 {
                atwa[(i, j)] += a[(r, i)] * wdiag[r] * a[(r, j)];
            }
        }
    }
    let inv = atwa
        .try_inverse()
        .ok_or_else(|| WulffError::Geometry("degenerate quadratic-fit stencil".into()))?;
    let mut weights: [Vec<f64>; 5] = Default::default();
    for d in 0..5 {
        let mut w = vec![0.0; m];
        for (r, row_w) in w.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in 0..5 {
                acc += inv[(d, k)] * a[(r, k)];
            }
            *row_w = acc * wdiag[r];
        }
        weights[d] = w;
    }
    Ok(Stencil { samples, weights })
}

// ---------------------------------------------------------------------------
// Solver.

pub struct GraphSolution {
    pub u: GridField,
    pub newton_iterations: usize,
    pub residual_max: f64,
}

struct Assembled<'a> {
    disc: &'a Discretization,
    prob: &'a GraphProblem,
}

impl Assembled<'_> {
    /// Derivatives (ux, uy, uxx, uyy, uxy) at an interior node from the
    /// current full-grid values.
    fn derivatives(&self, gidx: usize, full: &[f64], center: f64) -> [f64; 5] {
        let st = self.disc.stencils[gidx].as_ref().unwrap();
        let mut out = [0.0; 5];
        for (k, (s, _)) in st.samples.iter().enumerate() {
            let v = match s {
                Sample::Node(m) => full[*m],
                Sample::Boundary(b) => *b,
            };
            let dv = v - center;
            for d in 0..5 {
                out[d] += st.weights[d][k] * dv;
            }
        }
        out
    }

    fn residual_at(&self, gidx: usize, full: &[f64], center: f64) -> f64 {
        let d = self.derivatives(gidx, full, center);
        let p = Vector2::new(d[0], d[1]);
        let a = self.prob.coefficients.eval(p);
        let x = Vector2::new(
            self.disc.lo.x + (gidx % self.disc.nx) as f64 * self.disc.h,
            self.disc.lo.y + (gidx / self.disc.nx) as f64 * self.disc.h,
        );
        a[(0, 0)] * d[2] + a[(1, 1)] * d[3] + 2.0 * a[(0, 1)] * d[4]
            - (self.prob.mu - (self.prob.potential)(x, center))
    }

    fn residual(&self, full: &[f64]) -> Vec<f64> {
        self.disc
            .unknowns
            .iter()
            .map(|&gidx| self.residual_at(gidx, full, full[gidx]))
            .collect()
    }

    fn jacobian(&self, full: &[f64]) -> Result<BandedMatrix> {
        let n = self.disc.unknowns.len();
        let bw = self.disc.bandwidth;
        let mut jac = BandedMatrix::zeros(n, bw, bw);
        let mut work = full.to_vec();
        for (row, &gidx) in self.disc.unknowns.iter().enumerate() {
            let mut deps = vec![gidx];
            if let Some(st) = &self.disc.stencils[gidx] {
                for (s, _) in &st.samples {
                    if let Sample::Node(m) = s {
                        if self.disc.unknown_of[*m].is_some() {
                            deps.push(*m);
                        }
                    }
                }
            }
            for dep in deps {
                let col = self.disc.unknown_of[dep].unwrap();
                let eps = 1e-6 * (1.0 + full[dep].abs());
                work[dep] = full[dep] + eps;
                let rp = self.residual_at(gidx, &work, work[gidx]);
                work[dep] = full[dep] - eps;
                let rm = self.residual_at(gidx, &work, work[gidx]);
                work[dep] = full[dep];
                jac.set(row, col, (rp - rm) / (2.0 * eps));
            }
        }
        Ok(jac)
    }
}

/// Audit: the coefficient matrix must be symmetric positive definite over a
/// sweep of gradients.
fn audit_ellipticity(model: &CoefficientModel) -> Result<()> {
    for k in 0..200 {
        let r = 10.0 * (k as f64 + 0.5) / 200.0;
        let a = 2.399963229728653 * k as f64; // golden-angle sweep
        let p = Vector2::new(r * a.cos(), r * a.sin());
        let m = model.eval(p);
        if (m[(0, 1)] - m[(1, 0)]).abs() > 1e-10 {
            return Err(WulffError::Precondition("coefficient matrix is not symmetric".into()));
        }
        let tr = m.trace();
        let det = m.determinant();
        if !(tr > 0.0 && det > 0.0) {
            return Err(WulffError::Precondition(format!(
                "coefficient matrix not positive definite at p = ({}, {})",
                p.x, p.y
            )));
        }
    }
    Ok(())
}

pub fn solve_graph_equation(prob: &GraphProblem) -> Result<GraphSolution> {
    audit_ellipticity(&prob.coefficients)?;
    let disc = build_discretization(prob)?;
    let asm = Assembled { disc: &disc, prob };

    // Initial guess: harmonic extension of the boundary data (the same
    // stencils with Laplace coefficients give one linear solve).
    let mut full = vec![0.0; disc.nx * disc.ny];
    for (k, kindk) in disc.kind.iter().enumerate() {
        if *kindk == NodeKind::Dirichlet {
            full[k] = disc.boundary_values[k];
        }
    }
    harmonic_extension(&disc, &mut full)?;

    let mut residual = asm.residual(&full);
    let mut rnorm = max_abs(&residual);
    let mut iterations = 0;
    for _ in 0..60 {
        if rnorm < 1e-8 {
            break;
        }
        iterations += 1;
        let mut jac = asm.jacobian(&full)?;
        jac.factor()?;
        let mut step: Vec<f64> = residual.iter().map(|r| -r).collect();
        jac.solve(&mut step);
        // Damping: halve until the residual norm decreases.
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..20 {
            let mut trial = full.clone();
            for (row, &gidx) in disc.unknowns.iter().enumerate() {
                trial[gidx] += t * step[row];
            }
            let r_new = asm.residual(&trial);
            let n_new = max_abs(&r_new);
            if n_new < rnorm {
                full = trial;
                residual = r_new;
                rnorm = n_new;
                improved = true;
                break;
            }
            t /= 2.0;
        }
        if !improved {
            return Err(WulffError::NonConvergence(format!(
                "Newton stagnated at residual {rnorm:.3e} after {iterations} iterations"
            )));
        }
    }
    if rnorm >= 1e-8 {
        return Err(WulffError::NonConvergence(format!(
            "Newton did not reach tolerance: residual {rnorm:.3e}"
        )));
    }

    let mut values = vec![f64::NAN; disc.nx * disc.ny];
    for (k, kindk) in disc.kind.iter().enumerate() {
        if *kindk != NodeKind::Outside {
            values[k] = full[k];
        }
    }
    Ok(GraphSolution {
        u: GridField {
            nx: disc.nx,
            ny: disc.ny,
            lo: disc.lo,
            h: disc.h,
            values,
            name: "u".into(),
        },
        newton_iterations: iterations,
        residual_max: rnorm,
    })
}

fn harmonic_extension(disc: &Discretization, full: &mut [f64]) -> Result<()> {
    let n = disc.unknowns.len();
    let bw = disc.bandwidth;
    let mut a = BandedMatrix::zeros(n, bw, bw);
    let mut rhs = vec![0.0; n];
    for (row, &gidx) in disc.unknowns.iter().enumerate() {
        let st = disc.stencils[gidx].as_ref().unwrap();
        // Laplacian row: sum over samples of (w_xx + w_yy), center carries
        // the negative total weight.
        let mut center_coeff = 0.0;
        let mut b = 0.0;
        for (k, (s, _)) in st.samples.iter().enumerate() {
            let w = st.weights[2][k] + st.weights[3][k];
            center_coeff -= w;
            match s {
                Sample::Node(m) => match disc.unknown_of[*m] {
                    Some(col) => a.add(row, col, w),
                    None => b -= w * full[*m],
                },
                Sample::Boundary(v) => b -= w * v,
            }
        }
        a.add(row, row, center_coeff);
        rhs[row] = b;
    }
    a.factor()?;
    a.solve(&mut rhs);
    for (row, &gidx) in disc.unknowns.iter().enumerate() {
        full[gidx] = rhs[row];
    }
    Ok(())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

// ---------------------------------------------------------------------------
// Diagnostics.

/// Hessian determinant `w = u_11 u_22 - u_12^2` per node with a full finite
/// 3x3 neighborhood; NaN elsewhere.
pub fn gauss_curvature_field(u: &GridField) -> GridField {
    let (nx, ny, h) = (u.nx, u.ny, u.h);
    let mut values = vec![f64::NAN; nx * ny];
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let mut ok = true;
            for dj in -1isize..=1 {
                for di in -1isize..=1 {
                    if !u.get((i as isize + di) as usize, (j as isize + dj) as usize).is_finite() {
                        ok = false;
                    }
                }
            }
            if !ok {
                continue;
            }
            let c = u.get(i, j);
            let u11 = (u.get(i + 1, j) - 2.0 * c + u.get(i - 1, j)) / (h * h);
            let u22 = (u.get(i, j + 1) - 2.0 * c + u.get(i, j - 1)) / (h * h);
            let u12 = (u.get(i + 1, j + 1) - u.get(i + 1, j - 1) - u.get(i - 1, j + 1)
                + u.get(i - 1, j - 1))
                / (4.0 * h * h);
            values[j * nx + i] = u11 * u22 - u12 * u12;
        }
    }
    GridField { nx, ny, lo: u.lo, h, values, name: "det_d2u".into() }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MinPrincipleVerdict {
    AllPositive,
    IdenticallyZero,
    /// Interior vanishing coexisting with genuine positivity: the pattern the
    /// maximum-principle dichotomy excludes.  Sites are (i, j) grid indices.
    Violation(Vec<(usize, usize)>),
}

pub fn min_principle_diagnostic(w: &GridField, delta: f64) -> MinPrincipleVerdict {
    let mut min_w = f64::INFINITY;
    let mut max_w = f64::NEG_INFINITY;
    let mut max_abs_w = 0.0f64;
    for v in w.finite_values() {
        min_w = min_w.min(v);
        max_w = max_w.max(v);
        max_abs_w = max_abs_w.max(v.abs());
    }
    if min_w > delta {
        return MinPrincipleVerdict::AllPositive;
    }
    if max_abs_w < delta {
        return MinPrincipleVerdict::IdenticallyZero;
    }
    if max_w > 10.0 * delta {
        let mut sites = Vec::new();
        for j in 0..w.ny {
            for i in 0..w.nx {
                let v = w.get(i, j);
                if v.is_finite() && v < delta {
                    sites.push((i, j));
                }
            }
        }
        return MinPrincipleVerdict::Violation(sites);
    }
    // Everything lives in the noise band [delta, 10 delta]: treated as zero
    // at this threshold.
    MinPrincipleVerdict::IdenticallyZero
}

#[derive(Debug, Clone)]
pub struct ConvexityAudit {
    pub min_trace: f64,
    pub min_w: f64,
    /// Nodes with `u_11 > 10 delta` while `u_22 < delta`: a near-degenerate
    /// direction separation.
    pub eq_delta_sites: Vec<(usize, usize)>,
}

pub fn uniform_convexity_audit(u: &GridField, delta: f64) -> ConvexityAudit {
    let (nx, ny, h) = (u.nx, u.ny, u.h);
    let mut min_trace = f64::INFINITY;
    let mut min_w = f64::INFINITY;
    let mut sites = Vec::new();
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let neighborhood_ok = (0..3).all(|dj| {
                (0..3).all(|di| u.get(i + di - 1, j + dj - 1).is_finite())
            });
            if !neighborhood_ok {
                continue;
            }
            let c = u.get(i, j);
            let u11 = (u.get(i + 1, j) - 2.0 * c + u.get(i - 1, j)) / (h * h);
            let u22 = (u.get(i, j + 1) - 2.0 * c + u.get(i, j - 1)) / (h * h);
            let u12 = (u.get(i + 1, j + 1) - u.get(i + 1, j - 1) - u.get(i - 1, j + 1)
                + u.get(i - 1, j - 1))
                / (4.0 * h * h);
            min_trace = min_trace.min(u11 + u22);
            min_w = min_w.min(u11 * u22 - u12 * u12);
            if u11 > 10.0 * delta && u22 < delta {
                sites.push((i, j));
            }
        }
    }
    ConvexityAudit { min_trace, min_w, eq_delta_sites: sites }
}

#[derive(Debug, Clone)]
pub struct RuledSurfaceReport {
    pub is_ruled: bool,
    /// Spread (radians) of the Hessian null direction across the domain.
    pub direction_spread: f64,
}

/// On a `w = 0` solution, check whether the Hessian null direction is
/// globally constant — the straight-line (ruled) degenerate structure.
pub fn ruled_surface_check(u: &GridField, delta: f64) -> RuledSurfaceReport {
    let (nx, ny, h) = (u.nx, u.ny, u.h);
    let mut angles: Vec<f64> = Vec::new();
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let ok = (0..3).all(|dj| (0..3).all(|di| u.get(i + di - 1, j + dj - 1).is_finite()));
            if !ok {
                continue;
            }
            let c = u.get(i, j);
            let u11 = (u.get(i + 1, j) - 2.0 * c + u.get(i - 1, j)) / (h * h);
            let u22 = (u.get(i, j + 1) - 2.0 * c + u.get(i, j - 1)) / (h * h);
            let u12 = (u.get(i + 1, j + 1) - u.get(i + 1, j - 1) - u.get(i - 1, j + 1)
                + u.get(i - 1, j - 1))
                / (4.0 * h * h);
            // Null eigenvector of the 2x2 Hessian (smaller eigenvalue).
            let tr = u11 + u22;
            if tr.abs() < delta {
                continue; // flat node carries no direction information
            }
            let mean = tr / 2.0;
            let disc = ((u11 - u22) / 2.0).hypot(u12);
            let lam_min = mean - disc;
            // Eigenvector for lam_min; angle folded to [0, pi).
            let ang = if u12.abs() > 1e-14 {
                (lam_min - u11).atan2(u12)
            } else if u11 <= u22 {
                0.0
            } else {
                std::f64::consts::FRAC_PI_2
            };
            angles.push(ang.rem_euclid(std::f64::consts::PI));
        }
    }
    if angles.is_empty() {
        return RuledSurfaceReport { is_ruled: false, direction_spread: f64::NAN };
    }
    // Spread via the resultant of doubled angles (direction is mod pi).
    let (mut sc, mut ss) = (0.0, 0.0);
    for a in &angles {
        sc += (2.0 * a).cos();
        ss += (2.0 * a).sin();
    }
    let r = (sc * sc + ss * ss).sqrt() / angles.len() as f64;
    let spread = (1.0 - r).max(0.0).sqrt(); // 0 when perfectly aligned
    RuledSurfaceReport { is_ruled: spread < 0.05, direction_spread: spread }
}

// ---------------------------------------------------------------------------
// Manufactured cases.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManufacturedCase {
    /// `u* = (x^2 + y^2) / 2` on the unit disk; reproduced exactly because
    /// the quadratic-fit stencils are exact on quadratics.
    Paraboloid,
    /// `u* = x^2 / 2` on a rectangle: `det D^2 u = 0`, a ruled graph.
    Ruled,
    /// Quartic solution on a rectangle; the case that genuinely measures the
    /// second-order truncation.
    Quartic,
}

pub fn manufactured_problem(case: ManufacturedCase, h: f64) -> (GraphProblem, BoundaryData) {
    match case {
        ManufacturedCase::Paraboloid => {
            let exact: BoundaryData = Arc::new(|p: Vector2<f64>| p.norm_squared() / 2.0);
            let rhs = |p: Vector2<f64>| {
                let r2 = p.norm_squared();
                (2.0 + r2) / (1.0 + r2).powf(1.5)
            };
            let prob = GraphProblem {
                domain: Domain2::Disk { center: Vector2::zeros(), radius: 1.0 },
                h,
                coefficients: CoefficientModel::Isotropic,
                mu: 0.0,
                potential: Arc::new(move |x, _| -rhs(x)),
                boundary_data: exact.clone(),
            };
            (prob, exact)
        }
        ManufacturedCase::Ruled => {
            let exact: BoundaryData = Arc::new(|p: Vector2<f64>| p.x * p.x / 2.0);
            let rhs = |p: Vector2<f64>| 1.0 / (1.0 + p.x * p.x).powf(1.5);
            let prob = GraphProblem {
                domain: Domain2::Rect { lo: Vector2::new(-1.0, -1.0), hi: Vector2::new(1.0, 1.0) },
                h,
                coefficients: CoefficientModel::Isotropic,
                mu: 0.0,
                potential: Arc::new(move |x, _| -rhs(x)),
                boundary_data: exact.clone(),
            };
            (prob, exact)
        }
        ManufacturedCase::Quartic => {
            // u* = (x^4 + y^4 + x^2 y^2) / 4 with the exact right side
            // assembled from the analytic gradient and Hessian.
            let exact: BoundaryData = Arc::new(|p: Vector2<f64>| {
                (p.x.powi(4) + p.y.powi(4) + p.x * p.x * p.y * p.y) / 4.0
            });
            let rhs = |p: Vector2<f64>| {
                let (x, y) = (p.x, p.y);
                let grad = Vector2::new(
                    x.powi(3) + 0.5 * x * y * y,
                    y.powi(3) + 0.5 * y * x * x,
                );
                let hess = Matrix2::new(
                    3.0 * x * x + 0.5 * y * y,
                    x * y,
                    x * y,
                    3.0 * y * y + 0.5 * x * x,
                );
                let a = isotropic_coefficients(grad);
                a[(0, 0)] * hess[(0, 0)] + 2.0 * a[(0, 1)] * hess[(0, 1)] + a[(1, 1)] * hess[(1, 1)]
            };
            let prob = GraphProblem {
                domain: Domain2::Rect { lo: Vector2::new(-1.0, -1.0), hi: Vector2::new(1.0, 1.0) },
                h,
                coefficients: CoefficientModel::Isotropic,
                mu: 0.0,
                potential: Arc::new(move |x, _| -rhs(x)),
                boundary_data: exact.clone(),
            };
            (prob, exact)
        }
    }
}

/// Max-norm error of a solution against a reference function.
pub fn max_error(u: &GridField, exact: &BoundaryData) -> f64 {
    let mut e = 0.0f64;
    for j in 0..u.ny {
        for i in 0..u.nx {
            let v = u.get(i, j);
            if v.is_finite() {
                e = e.max((v - exact(u.point(i, j))).abs());
            }
        }
    }
    e
}

/// Default zero-classification threshold at the Hessian truncation scale.
pub fn default_delta(h: f64) -> f64 {
    10.0 * h * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn isotropic_coefficient_examples() {
        let id = isotropic_coefficients(Vector2::zeros());
        assert_relative_eq!(id[(0, 0)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(id[(0, 1)], 0.0, epsilon = 1e-14);
        let a = isotropic_coefficients(Vector2::new(1.0, 0.0));
        assert_relative_eq!(a[(0, 0)], 1.0 / (2.0 * 2.0f64.sqrt()), epsilon = 1e-12);
        assert_relative_eq!(a[(1, 1)], 1.0 / 2.0f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(a[(0, 1)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn isotropic_coefficient_eigenvalues_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let p = Vector2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
            let a = isotropic_coefficients(p);
            let mean = a.trace() / 2.0;
            let disc = ((a[(0, 0)] - a[(1, 1)]) / 2.0).hypot(a[(0, 1)]);
            let (lo, hi) = (mean - disc, mean + disc);
            assert!(lo > 0.0 && hi <= 1.0 + 1e-12, "eigenvalues ({lo}, {hi}) at p = {p:?}");
        }
    }

    #[test]
    fn banded_lu_matches_dense_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..10 {
            let n = 30 + trial;
            let bw = 4;
            let mut dense = DMatrix::<f64>::zeros(n, n);
            let mut banded = BandedMatrix::zeros(n, bw, bw);
            for i in 0..n {
                for j in 0..n {
                    if i.abs_diff(j) <= bw {
                        let v: f64 = rng.gen_range(-1.0..1.0)
                            + if i == j { 3.0 } else { 0.0 };
                        dense[(i, j)] = v;
                        banded.set(i, j, v);
                    }
                }
            }
            let b = DVector::<f64>::from_fn(n, |i, _| (i as f64).sin());
            let x_dense = dense.lu().solve(&b).unwrap();
            banded.factor().unwrap();
            let mut x = b.iter().cloned().collect::<Vec<f64>>();
            banded.solve(&mut x);
            for i in 0..n {
                assert_relative_eq!(x[i], x_dense[i], epsilon = 1e-9, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn affine_solutions_are_exact() {
        let exact: BoundaryData = Arc::new(|p: Vector2<f64>| 0.3 * p.x - 0.7 * p.y + 0.2);
        for domain in [
            Domain2::Rect { lo: Vector2::new(-1.0, -1.0), hi: Vector2::new(1.0, 1.0) },
            Domain2::Disk { center: Vector2::zeros(), radius: 1.0 },
        ] {
            let prob = GraphProblem {
                domain,
                h: 1.0 / 16.0,
                coefficients: CoefficientModel::Isotropic,
                mu: 0.0,
                potential: Arc::new(|_, _| 0.0),
                boundary_data: exact.clone(),
            };
            let sol = solve_graph_equation(&prob).unwrap();
            assert!(max_error(&sol.u, &exact) < 1e-9);
        }
    }

    #[test]
    fn paraboloid_recovered_exactly() {
        let (prob, exact) = manufactured_problem(ManufacturedCase::Paraboloid, 1.0 / 32.0);
        let sol = solve_graph_equation(&prob).unwrap();
        let e = max_error(&sol.u, &exact);
        assert!(e < 1e-8, "paraboloid max error {e}");
        let w = gauss_curvature_field(&sol.u);
        match min_principle_diagnostic(&w, default_delta(prob.h)) {
            MinPrincipleVerdict::AllPositive => {}
            other => panic!("expected all_positive, got {other:?}"),
        }
    }

    #[test]
    fn quartic_converges_at_second_order() {
        let mut errors = Vec::new();
        for h in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
            let (prob, exact) = manufactured_problem(ManufacturedCase::Quartic, h);
            let sol = solve_graph_equation(&prob).unwrap();
            errors.push(max_error(&sol.u, &exact));
        }
        for pair in errors.windows(2) {
            let order = (pair[0] / pair[1]).log2();
            assert!(order >= 1.9, "order {order} from errors {errors:?}");
        }
    }

    #[test]
    fn ruled_case_flags_zero_determinant() {
        let (prob, exact) = manufactured_problem(ManufacturedCase::Ruled, 1.0 / 32.0);
        let sol = solve_graph_equation(&prob).unwrap();
        assert!(max_error(&sol.u, &exact) < 1e-8);
        let w = gauss_curvature_field(&sol.u);
        assert_eq!(
            min_principle_diagnostic(&w, default_delta(prob.h)),
            MinPrincipleVerdict::IdenticallyZero
        );
        let ruled = ruled_surface_check(&sol.u, default_delta(prob.h));
        assert!(ruled.is_ruled, "spread {}", ruled.direction_spread);
    }

    fn synthetic_field<F: Fn(Vector2<f64>) -> f64>(n: usize, f: F) -> GridField {
        let h = 2.0 / (n - 1) as f64;
        let lo = Vector2::new(-1.0, -1.0);
        let values = (0..n * n)
            .map(|k| f(lo + Vector2::new((k % n) as f64, (k / n) as f64) * h))
            .collect();
        GridField { nx: n, ny: n, lo, h, values, name: "synthetic".into() }
    }

    #[test]
    fn curvature_of_synthetic_quartics() {
        let u = synthetic_field(65, |p| p.x.powi(4) + p.y.powi(4));
        let w = gauss_curvature_field(&u);
        for j in (1..64).step_by(7) {
            for i in (1..64).step_by(7) {
                let p = w.point(i, j);
                let expect = 144.0 * p.x * p.x * p.y * p.y;
                assert_relative_eq!(w.get(i, j), expect, epsilon = 0.02, max_relative = 0.02);
            }
        }
    }

    #[test]
    fn min_principle_on_synthetic_fields() {
        let one = synthetic_field(33, |_| 0.0);
        let mut w_one = gauss_curvature_field(&one);
        for v in &mut w_one.values {
            if v.is_finite() {
                *v = 1.0;
            }
        }
        assert_eq!(min_principle_diagnostic(&w_one, 0.01), MinPrincipleVerdict::AllPositive);

        let mut w_zero = w_one.clone();
        for v in &mut w_zero.values {
            if v.is_finite() {
                *v = 0.0;
            }
        }
        assert_eq!(min_principle_diagnostic(&w_zero, 0.01), MinPrincipleVerdict::IdenticallyZero);

        // Interior zero with positivity elsewhere: the excluded configuration.
        let u = synthetic_field(33, |_| 0.0);
        let mut w = gauss_curvature_field(&u);
        let (nx, lo, h) = (w.nx, w.lo, w.h);
        for (k, v) in w.values.iter_mut().enumerate() {
            if v.is_finite() {
                let p = lo + Vector2::new((k % nx) as f64, (k / nx) as f64) * h;
                *v = p.norm_squared();
            }
        }
        match min_principle_diagnostic(&w, 0.01) {
            MinPrincipleVerdict::Violation(sites) => {
                assert!(!sites.is_empty());
                // The reported sites surround the central zero.
                for (i, j) in sites {
                    let p = w.point(i, j);
                    assert!(p.norm_squared() < 0.011);
                }
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn convexity_audit_examples() {
        let round = synthetic_field(33, |p| p.norm_squared() / 2.0);
        let audit = uniform_convexity_audit(&round, 0.05);
        assert_relative_eq!(audit.min_trace, 2.0, epsilon = 1e-9);
        assert!(audit.eq_delta_sites.is_empty());

        let flat = synthetic_field(33, |p| p.x * p.x / 2.0);
        let audit = uniform_convexity_audit(&flat, 0.05);
        assert_eq!(audit.eq_delta_sites.len(), 31 * 31);
    }

    #[test]
    fn cap_problem_is_uniformly_convex() {
        // mu = 2, g = |x|^2, zero boundary data on the unit disk.  (The
        // radial flux u'/sqrt(1+u'^2) integrates to mu r/2 - r^3/4, which
        // must stay below 1 on the disk; mu = 2 gives 0.75 at r = 1, while
        // e.g. mu = 3 would exceed the graph solvability bound.)
        let prob = GraphProblem {
            domain: Domain2::Disk { center: Vector2::zeros(), radius: 1.0 },
            h: 1.0 / 32.0,
            coefficients: CoefficientModel::Isotropic,
            mu: 2.0,
            potential: Arc::new(|x: Vector2<f64>, _| x.norm_squared()),
            boundary_data: Arc::new(|_| 0.0),
        };
        let sol = solve_graph_equation(&prob).unwrap();
        let audit = uniform_convexity_audit(&sol.u, default_delta(prob.h));
        assert!(audit.min_trace > 0.0, "min trace {}", audit.min_trace);
        let w = gauss_curvature_field(&sol.u);
        match min_principle_diagnostic(&w, default_delta(prob.h)) {
            MinPrincipleVerdict::Violation(s) => panic!("unexpected violation at {} sites", s.len()),
            _ => {}
        }
    }

    #[test]
    fn nonpositive_right_side_attains_minimum_on_boundary() {
        // With mu - g <= 0 the solution is a supersolution: its minimum sits
        // on the boundary (the discrete minimum-principle orientation).
        let exact_bd: BoundaryData = Arc::new(|p: Vector2<f64>| p.x * 0.1);
        let prob = GraphProblem {
            domain: Domain2::Rect { lo: Vector2::new(-1.0, -1.0), hi: Vector2::new(1.0, 1.0) },
            h: 1.0 / 16.0,
            coefficients: CoefficientModel::Isotropic,
            mu: -1.0,
            potential: Arc::new(|_, _| 0.0),
            boundary_data: exact_bd,
        };
        let sol = solve_graph_equation(&prob).unwrap();
        let mut boundary_min = f64::INFINITY;
        let mut interior_min = f64::INFINITY;
        for j in 0..sol.u.ny {
            for i in 0..sol.u.nx {
                let v = sol.u.get(i, j);
                if !v.is_finite() {
                    continue;
                }
                if i == 0 || j == 0 || i == sol.u.nx - 1 || j == sol.u.ny - 1 {
                    boundary_min = boundary_min.min(v);
                } else {
                    interior_min = interior_min.min(v);
                }
            }
        }
        assert!(interior_min >= boundary_min - 1e-10);
    }

    #[test]
    fn custom_indefinite_coefficients_rejected() {
        let bad = CoefficientModel::Custom(Arc::new(|_| Matrix2::new(1.0, 0.0, 0.0, -1.0)));
        let prob = GraphProblem {
            domain: Domain2::Rect { lo: Vector2::new(0.0, 0.0), hi: Vector2::new(1.0, 1.0) },
            h: 0.1,
            coefficients: bad,
            mu: 0.0,
            potential: Arc::new(|_, _| 0.0),
            boundary_data: Arc::new(|_| 0.0),
        };
        assert!(matches!(solve_graph_equation(&prob), Err(WulffError::Precondition(_))));
    }
}
