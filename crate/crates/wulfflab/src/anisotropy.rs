//! Lambda-elliptic surface tensions and Wulff shape construction.
//!
//! A tension is a positive 1-homogeneous integrand `f` weighting boundary
//! area by normal direction.  The catalog covers the isotropic norm, the
//! ellipsoidal family `sqrt(v' M v)` and a smoothed l^p family; custom
//! evaluators can be plugged in for tests.

use crate::error::{Result, WulffError};
use crate::shapes::{Polygon2, Shape, Star3};
use nalgebra::{SMatrix, SVector, Vector2, Vector3};
use std::sync::Arc;

type CustomEval<const N: usize> = Arc<dyn Fn(&SVector<f64, N>) -> f64 + Send + Sync>;
type CustomGrad<const N: usize> = Arc<dyn Fn(&SVector<f64, N>) -> SVector<f64, N> + Send + Sync>;
type CustomHess<const N: usize> =
    Arc<dyn Fn(&SVector<f64, N>) -> SMatrix<f64, N, N> + Send + Sync>;

#[derive(Clone)]
pub enum TensionKind<const N: usize> {
    /// `f(v) = |v|`.
    Euclidean,
    /// `f(v) = sqrt(v' M v)` for symmetric positive definite `M`.
    Ellipsoidal(SMatrix<f64, N, N>),
    /// Smoothed l^p: `f(v) = (sum_i (v_i^2 + eps^2 |v|^2)^(p/2))^(1/p)`.
    SmoothLp { p: f64, eps: f64 },
    /// User-supplied evaluators; the Hessian is optional.
    Custom {
        value: CustomEval<N>,
        gradient: Option<CustomGrad<N>>,
        hessian: Option<CustomHess<N>>,
    },
}

/// 1-homogeneous surface tension with declared ellipticity constants.
#[derive(Clone)]
pub struct Tension<const N: usize> {
    pub kind: TensionKind<N>,
    /// Declared lower bound on the tangential eigenvalues of `D^2 f` on the
    /// unit sphere.  Declared, not inferred; `check_lambda_ellipticity` is
    /// the audit.
    pub lambda_lower: f64,
    pub lambda_upper: f64,
}

impl<const N: usize> std::fmt::Debug for Tension<N> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match &self.kind {
            TensionKind::Euclidean => "euclidean",
            TensionKind::Ellipsoidal(_) => "ellipsoidal",
            TensionKind::SmoothLp { .. } => "smooth_lp",
            TensionKind::Custom { .. } => "custom",
        };
        write!(f, "Tension<{N}>({name}, lambda=[{}, {}])", self.lambda_lower, self.lambda_upper)
    }
}

#[derive(Debug, Clone)]
pub struct TensionEval<const N: usize> {
    pub value: f64,
    pub gradient: Option<SVector<f64, N>>,
    pub hessian: Option<SMatrix<f64, N, N>>,
}

#[derive(Debug, Clone)]
pub struct EllipticityReport {
    pub min_tangential_eig: f64,
    pub max_tangential_eig: f64,
    pub pass: bool,
    pub samples: usize,
}

impl<const N: usize> Tension<N> {
    pub fn euclidean() -> Self {
        Tension { kind: TensionKind::Euclidean, lambda_lower: 1.0, lambda_upper: 1.0 }
    }

    /// Ellipsoidal tension; lambda bounds are seeded from a dense eigenvalue
    /// sweep with a 1% margin and remain subject to the audit.
    pub fn ellipsoidal(m: SMatrix<f64, N, N>) -> Self {
        let mut t = Tension { kind: TensionKind::Ellipsoidal(m), lambda_lower: 0.0, lambda_upper: 0.0 };
        t.seed_lambda();
        t
    }

    pub fn smooth_lp(p: f64, eps: f64) -> Result<Self> {
        if !(p > 1.0) || !(eps > 0.0) {
            return Err(WulffError::Domain("smooth lp needs p > 1 and eps > 0".into()));
        }
        let mut t =
            Tension { kind: TensionKind::SmoothLp { p, eps }, lambda_lower: 0.0, lambda_upper: 0.0 };
        t.seed_lambda();
        Ok(t)
    }

    pub fn custom(
        value: CustomEval<N>,
        gradient: Option<CustomGrad<N>>,
        hessian: Option<CustomHess<N>>,
        lambda_lower: f64,
        lambda_upper: f64,
    ) -> Self {
        Tension { kind: TensionKind::Custom { value, gradient, hessian }, lambda_lower, lambda_upper }
    }

    pub fn with_lambda(mut self, lower: f64, upper: f64) -> Self {
        self.lambda_lower = lower;
        self.lambda_upper = upper;
        self
    }

    fn seed_lambda(&mut self) {
        let dirs = sample_unit_directions::<N>(512);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for d in &dirs {
            if let Ok(h) = self.hessian(d) {
                let (a, b) = tangential_eigen_range(&h, d);
                lo = lo.min(a);
                hi = hi.max(b);
            }
        }
        self.lambda_lower = lo * 0.99;
        self.lambda_upper = hi * 1.01;
    }

    pub fn value(&self, v: &SVector<f64, N>) -> f64 {
        match &self.kind {
            TensionKind::Euclidean => v.norm(),
            TensionKind::Ellipsoidal(m) => (v.dot(&(m * v))).sqrt(),
            TensionKind::SmoothLp { p, eps } => {
                let r2 = v.norm_squared();
                let mut s = 0.0;
                for i in 0..N {
                    s += (v[i] * v[i] + eps * eps * r2).powf(p / 2.0);
                }
                s.powf(1.0 / p)
            }
            TensionKind::Custom { value, .. } => value(v),
        }
    }

    pub fn gradient(&self, v: &SVector<f64, N>) -> Result<SVector<f64, N>> {
        match &self.kind {
            TensionKind::Euclidean => Ok(v / v.norm()),
            TensionKind::Ellipsoidal(m) => {
                let mv = m * v;
                Ok(mv / self.value(v))
            }
            TensionKind::SmoothLp { p, eps } => {
                let r2 = v.norm_squared();
                let mut s = 0.0;
                let mut spow = [0.0; N];
                for i in 0..N {
                    let si = v[i] * v[i] + eps * eps * r2;
                    spow[i] = si.powf(p / 2.0 - 1.0);
                    s += si * spow[i];
                }
                let pref = s.powf(1.0 / p - 1.0);
                let sum_spow: f64 = spow.iter().sum();
                let mut g = SVector::<f64, N>::zeros();
                for j in 0..N {
                    g[j] = pref * v[j] * (spow[j] + eps * eps * sum_spow);
                }
                Ok(g)
            }
            TensionKind::Custom { gradient, .. } => match gradient {
                Some(g) => Ok(g(v)),
                None => Err(WulffError::Capability("tension gradient unavailable".into())),
            },
        }
    }

    pub fn hessian(&self, v: &SVector<f64, N>) -> Result<SMatrix<f64, N, N>> {
        match &self.kind {
            TensionKind::Euclidean => {
                let n = v.norm();
                let u = v / n;
                Ok((SMatrix::<f64, N, N>::identity() - u * u.transpose()) / n)
            }
            TensionKind::Ellipsoidal(m) => {
                let f = self.value(v);
                let mv = m * v;
                Ok(m / f - (mv * mv.transpose()) / (f * f * f))
            }
            TensionKind::SmoothLp { .. } => {
                // Central differences of the analytic gradient.
                let h = 1e-6 * v.norm();
                let mut out = SMatrix::<f64, N, N>::zeros();
                for j in 0..N {
                    let mut vp = *v;
                    let mut vm = *v;
                    vp[j] += h;
                    vm[j] -= h;
                    let col = (self.gradient(&vp)? - self.gradient(&vm)?) / (2.0 * h);
                    out.set_column(j, &col);
                }
                // Symmetrize.
                Ok((out + out.transpose()) / 2.0)
            }
            TensionKind::Custom { hessian, .. } => match hessian {
                Some(h) => Ok(h(v)),
                None => Err(WulffError::Capability("tension Hessian unavailable".into())),
            },
        }
    }

    /// Evaluate `f` and the requested derivatives at a nonzero direction.
    pub fn eval(&self, direction: &SVector<f64, N>, order: u8) -> Result<TensionEval<N>> {
        if direction.norm_squared() < 1e-280 {
            return Err(WulffError::Domain("tension evaluated at the zero direction".into()));
        }
        let value = self.value(direction);
        let gradient = if order >= 1 { Some(self.gradient(direction)?) } else { None };
        let hessian = if order >= 2 { Some(self.hessian(direction)?) } else { None };
        Ok(TensionEval { value, gradient, hessian })
    }

    /// Sample tangential eigenvalues of `D^2 f` quasi-uniformly on the unit
    /// sphere and audit them against the declared lambda bounds.
    pub fn check_lambda_ellipticity(&self, samples: usize) -> Result<EllipticityReport> {
        if samples < 16 {
            return Err(WulffError::Precondition("need at least 16 samples".into()));
        }
        let dirs = sample_unit_directions::<N>(samples);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for d in &dirs {
            let h = self.hessian(d)?;
            let (a, b) = tangential_eigen_range(&h, d);
            lo = lo.min(a);
            hi = hi.max(b);
        }
        let tol = 1e-8 * self.lambda_upper.abs().max(1.0);
        Ok(EllipticityReport {
            min_tangential_eig: lo,
            max_tangential_eig: hi,
            pass: lo >= self.lambda_lower - tol && hi <= self.lambda_upper + tol,
            samples: dirs.len(),
        })
    }
}

/// Min and max eigenvalue of the restriction of `h` to the tangent space of
/// the sphere at unit direction `d`.
pub fn tangential_eigen_range<const N: usize>(
    h: &SMatrix<f64, N, N>,
    d: &SVector<f64, N>,
) -> (f64, f64) {
    match N {
        2 => {
            let t = SVector::<f64, N>::from_fn(|i, _| if i == 0 { -d[1] } else { d[0] });
            let e = t.dot(&(h * t));
            (e, e)
        }
        3 => {
            // Build an orthonormal tangent pair.
            let mut a = SVector::<f64, N>::zeros();
            if d[0].abs() < 0.9 {
                a[0] = 1.0;
            } else {
                a[1] = 1.0;
            }
            let t1 = (a - d * d.dot(&a)).normalize();
            let t2 = SVector::<f64, N>::from_fn(|i, _| {
                let (x, y, z) = (d[(i + 1) % 3], t1[(i + 2) % 3], d[(i + 2) % 3]);
                x * y - z * t1[(i + 1) % 3]
            });
            let a11 = t1.dot(&(h * t1));
            let a12 = t1.dot(&(h * t2));
            let a22 = t2.dot(&(h * t2));
            let mean = (a11 + a22) / 2.0;
            let disc = ((a11 - a22) / 2.0).hypot(a12);
            (mean - disc, mean + disc)
        }
        _ => unimplemented!("dimension {N}"),
    }
}

/// Quasi-uniform unit directions: Fibonacci sphere in 3D, uniform angles in 2D.
pub fn sample_unit_directions<const N: usize>(n: usize) -> Vec<SVector<f64, N>> {
    match N {
        2 => (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                SVector::<f64, N>::from_fn(|i, _| if i == 0 { a.cos() } else { a.sin() })
            })
            .collect(),
        3 => fibonacci_sphere(n)
            .into_iter()
            .map(|v| SVector::<f64, N>::from_fn(|i, _| v[i]))
            .collect(),
        _ => unimplemented!("dimension {N}"),
    }
}

/// Fibonacci lattice on the unit sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<Vector3<f64>> {
    let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
    (0..n)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
            let rho = (1.0 - z * z).sqrt();
            let a = 2.0 * std::f64::consts::PI * k as f64 / golden;
            Vector3::new(rho * a.cos(), rho * a.sin(), z)
        })
        .collect()
}

/// Icosphere vertices at the given subdivision level (10 * 4^level + 2 points).
pub fn icosphere(level: u32) -> Vec<Vector3<f64>> {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        (-1.0, phi, 0.0), (1.0, phi, 0.0), (-1.0, -phi, 0.0), (1.0, -phi, 0.0),
        (0.0, -1.0, phi), (0.0, 1.0, phi), (0.0, -1.0, -phi), (0.0, 1.0, -phi),
        (phi, 0.0, -1.0), (phi, 0.0, 1.0), (-phi, 0.0, -1.0), (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache: std::collections::HashMap<(usize, usize), usize> = Default::default();
        let mut new_faces = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mid = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mid[k] = *cache.entry(key).or_insert_with(|| {
                    verts.push(((verts[a] + verts[b]) / 2.0).normalize());
                    verts.len() - 1
                });
            }
            new_faces.push([f[0], mid[0], mid[2]]);
            new_faces.push([f[1], mid[1], mid[0]]);
            new_faces.push([f[2], mid[2], mid[1]]);
            new_faces.push([mid[0], mid[1], mid[2]]);
        }
        faces = new_faces;
    }
    verts
}

/// Discretization parameters for Wulff construction.
#[derive(Debug, Clone, Copy)]
pub struct WulffResolution {
    /// Icosphere subdivision level for the supporting half-space normals (3D)
    /// or a multiplier on the 2D direction count.
    pub subdivision: u32,
    pub n_theta: usize,
    pub n_phi: usize,
    /// Vertex count of the 2D Wulff polygon.
    pub n_vertices: usize,
}

impl Default for WulffResolution {
    fn default() -> Self {
        WulffResolution { subdivision: 4, n_theta: 32, n_phi: 64, n_vertices: 256 }
    }
}

/// A Wulff shape: the intersection of the supporting half-spaces
/// `{x : <x, v> <= f(v)}`, rescaled to the requested volume.
#[derive(Debug, Clone)]
pub struct WulffShape {
    pub body: Shape,
    pub volume: f64,
    /// Volume of the unscaled body `{x : <x, v> <= f(v)}`.  The identity
    /// `F(K) = n |K|` holds at this natural scale only; the rescaled `body`
    /// satisfies `F(body) = n |body| / scale`.
    pub natural_volume: f64,
    /// Linear factor mapping the natural body onto `body`.
    pub scale: f64,
}

pub fn wulff_shape_3d(f: &Tension<3>, mass: f64, res: WulffResolution) -> Result<WulffShape> {
    if mass <= 0.0 || !mass.is_finite() {
        return Err(WulffError::Domain(format!("mass must be positive, got {mass}")));
    }
    let dirs = icosphere(res.subdivision);
    let vals: Vec<f64> = dirs.iter().map(|d| f.value(d)).collect();
    let has_gradient = f.gradient(&Vector3::z()).is_ok();
    let star = Star3::from_fn(Vector3::zeros(), res.n_theta, res.n_phi, |t, p| {
        let u = Vector3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos());
        // Include the ray direction itself among the half-space normals so
        // that f(u) is always an admissible cut; this makes the radial field
        // exact (not just an upper bound) wherever the support point of the
        // Wulff body in direction u has normal u.
        let mut r = f.value(&u);
        let mut best = u;
        for (d, &fv) in dirs.iter().zip(&vals) {
            let du = d.dot(&u);
            if du > 1e-9 && fv / du < r {
                r = fv / du;
                best = *d;
            }
        }
        if has_gradient {
            r = refine_cut_direction(f, &u, best, r);
        }
        r
    })?;
    let natural = Shape::Star3(star);
    let natural_volume = natural.volume()?;
    let body = natural.rescale_to_mass(mass)?;
    let volume = body.volume()?;
    let scale = (volume / natural_volume).powf(1.0 / 3.0);
    Ok(WulffShape { body, volume, natural_volume, scale })
}

/// Polish the half-space direction for one ray of the Wulff construction:
/// minimize `q(d) = f(d) / <u, d>` over unit directions `d` by projected
/// gradient descent with backtracking, starting from the best sampled cut.
/// The sampled minimum alone leaves `O(gap^2)` radial noise, which second
/// differences of the radial field would amplify; the polish removes it.
fn refine_cut_direction(f: &Tension<3>, u: &Vector3<f64>, start: Vector3<f64>, r0: f64) -> f64 {
    let q = |d: &Vector3<f64>| f.value(d) / u.dot(d);
    let mut d = start;
    let mut qd = r0;
    let mut tau = 0.25;
    for _ in 0..60 {
        let du = u.dot(&d);
        if du <= 1e-9 {
            break;
        }
        let grad_f = match f.gradient(&d) {
            Ok(gf) => gf,
            Err(_) => break,
        };
        let grad = grad_f / du - u * (f.value(&d) / (du * du));
        let tangent = grad - d * grad.dot(&d);
        let gn = tangent.norm();
        if gn < 1e-14 {
            break;
        }
        let mut accepted = false;
        for _ in 0..25 {
            let cand = (d - tangent * tau).normalize();
            if u.dot(&cand) > 1e-9 {
                let qc = q(&cand);
                if qc < qd - 1e-16 {
                    d = cand;
                    qd = qc;
                    tau *= 1.5;
                    accepted = true;
                    break;
                }
            }
            tau *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    qd.min(r0)
}

pub fn wulff_shape_2d(f: &Tension<2>, mass: f64, res: WulffResolution) -> Result<WulffShape> {
    if mass <= 0.0 || !mass.is_finite() {
        return Err(WulffError::Domain(format!("mass must be positive, got {mass}")));
    }
    let m = res.n_vertices * 4;
    let dirs: Vec<Vector2<f64>> = (0..m)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
            Vector2::new(a.cos(), a.sin())
        })
        .collect();
    let vals: Vec<f64> = dirs.iter().map(|d| f.value(d)).collect();
    let verts: Vec<Vector2<f64>> = (0..res.n_vertices)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / res.n_vertices as f64;
            let u = Vector2::new(a.cos(), a.sin());
            let mut r = f.value(&u);
            for (d, &fv) in dirs.iter().zip(&vals) {
                let du = d.dot(&u);
                if du > 1e-9 {
                    r = r.min(fv / du);
                }
            }
            u * r
        })
        .collect();
    let natural = Shape::Polygon2(Polygon2::new(verts)?);
    let natural_volume = natural.volume()?;
    let body = natural.rescale_to_mass(mass)?;
    let volume = body.volume()?;
    let scale = (volume / natural_volume).sqrt();
    Ok(WulffShape { body, volume, natural_volume, scale })
}
