use crate::error::{Result, WulffError};
use crate::parallel;
use nalgebra::{Matrix2, Matrix3, Vector3};

use super::BoundaryEl3;

/// Star-shaped region in 3D: a strictly positive radial field on a
/// latitude-longitude grid about `center`.
///
/// Radii live at cell centers `theta_i = (i + 1/2) * pi / n_theta`,
/// `phi_j = j * 2 pi / n_phi`, stored row-major.  `n_phi` must be even so
/// that ghost rows across the poles are grid-aligned
/// (`r(-theta, phi) = r(theta, phi + pi)`).
#[derive(Debug, Clone)]
pub struct Star3 {
    pub center: Vector3<f64>,
    pub n_theta: usize,
    pub n_phi: usize,
    pub r: Vec<f64>,
}

/// Geometry of one grid cell of the star surface: enough to contract the
/// second fundamental form with a tension Hessian.
#[derive(Debug, Clone, Copy)]
pub struct SurfacePatch {
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub area: f64,
    /// Tangent basis `X_theta`, `X_phi`.
    pub basis: [Vector3<f64>; 2],
    /// First fundamental form in that basis.
    pub gram: Matrix2<f64>,
    /// Second fundamental form `-X_ab . normal` (sphere of radius `rho` has
    /// principal curvatures `+1/rho` in this convention).
    pub second_form: Matrix2<f64>,
    /// Radial direction at the cell center.
    pub radial: Vector3<f64>,
}

impl Star3 {
    pub fn new(center: Vector3<f64>, n_theta: usize, n_phi: usize, r: Vec<f64>) -> Result<Self> {
        if n_theta < 8 || n_phi < 16 {
            return Err(WulffError::Geometry(format!(
                "star grid must be at least 8x16, got {n_theta}x{n_phi}"
            )));
        }
        if n_phi % 2 != 0 {
            return Err(WulffError::Geometry("n_phi must be even".into()));
        }
        if r.len() != n_theta * n_phi {
            return Err(WulffError::Geometry("radial field length mismatch".into()));
        }
        if r.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(WulffError::Geometry("radial field must be strictly positive".into()));
        }
        Ok(Star3 { center, n_theta, n_phi, r })
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(
        center: Vector3<f64>,
        n_theta: usize,
        n_phi: usize,
        f: F,
    ) -> Result<Self> {
        let dt = std::f64::consts::PI / n_theta as f64;
        let dp = 2.0 * std::f64::consts::PI / n_phi as f64;
        let mut r = Vec::with_capacity(n_theta * n_phi);
        for i in 0..n_theta {
            let theta = (i as f64 + 0.5) * dt;
            for j in 0..n_phi {
                let phi = j as f64 * dp;
                r.push(f(theta, phi));
            }
        }
        Star3::new(center, n_theta, n_phi, r)
    }

    pub fn ball(center: Vector3<f64>, radius: f64, n_theta: usize, n_phi: usize) -> Result<Self> {
        Star3::from_fn(center, n_theta, n_phi, |_, _| radius)
    }

    pub fn d_theta(&self) -> f64 {
        std::f64::consts::PI / self.n_theta as f64
    }

    pub fn d_phi(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n_phi as f64
    }

    pub fn theta(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.d_theta()
    }

    pub fn phi(&self, j: usize) -> f64 {
        j as f64 * self.d_phi()
    }

    pub fn direction(&self, theta: f64, phi: f64) -> Vector3<f64> {
        Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
    }

    /// Radius with ghost indexing: phi wraps, theta reflects across the poles
    /// with a half-turn in phi.
    pub fn r_ghost(&self, i: isize, j: isize) -> f64 {
        let nt = self.n_theta as isize;
        let np = self.n_phi as isize;
        let (mut i, mut j) = (i, j);
        if i < 0 {
            i = -1 - i;
            j += np / 2;
        } else if i >= nt {
            i = 2 * nt - 1 - i;
            j += np / 2;
        }
        let i = i.clamp(0, nt - 1) as usize;
        let j = j.rem_euclid(np) as usize;
        self.r[i * self.n_phi + j]
    }

    /// Bilinear interpolation of the radial field at `(theta, phi)`.
    pub fn radius_at(&self, theta: f64, phi: f64) -> f64 {
        let dt = self.d_theta();
        let dp = self.d_phi();
        let ti = theta / dt - 0.5;
        let i0 = ti.floor();
        let ft = ti - i0;
        let pj = phi.rem_euclid(2.0 * std::f64::consts::PI) / dp;
        let j0 = pj.floor();
        let fp = pj - j0;
        let (i0, j0) = (i0 as isize, j0 as isize);
        let r00 = self.r_ghost(i0, j0);
        let r01 = self.r_ghost(i0, j0 + 1);
        let r10 = self.r_ghost(i0 + 1, j0);
        let r11 = self.r_ghost(i0 + 1, j0 + 1);
        (1.0 - ft) * ((1.0 - fp) * r00 + fp * r01) + ft * ((1.0 - fp) * r10 + fp * r11)
    }

    pub fn contains(&self, p: Vector3<f64>) -> bool {
        let d = p - self.center;
        let rho = d.norm();
        if rho == 0.0 {
            return true;
        }
        let theta = (d.z / rho).clamp(-1.0, 1.0).acos();
        let phi = d.y.atan2(d.x);
        rho <= self.radius_at(theta, phi)
    }

    pub fn volume(&self) -> f64 {
        let dt = self.d_theta();
        let dp = self.d_phi();
        let mut v = 0.0;
        for i in 0..self.n_theta {
            let s = self.theta(i).sin();
            let mut row = 0.0;
            for j in 0..self.n_phi {
                let r = self.r[i * self.n_phi + j];
                row += r * r * r;
            }
            v += row * s;
        }
        v * dt * dp / 3.0
    }

    pub fn centroid(&self) -> Vector3<f64> {
        let dt = self.d_theta();
        let dp = self.d_phi();
        let mut m = Vector3::zeros();
        for i in 0..self.n_theta {
            let theta = self.theta(i);
            let s = theta.sin();
            for j in 0..self.n_phi {
                let u = self.direction(theta, self.phi(j));
                let r = self.r[i * self.n_phi + j];
                m += u * (r.powi(4) / 4.0 * s);
            }
        }
        self.center + m * (dt * dp) / self.volume()
    }

    /// Per-cell surface geometry from central differences of the radial field.
    /// Flat index of the cell that `r_ghost(i, j)` reads (pole reflection
    /// and azimuthal wrap applied).
    pub fn ghost_index(&self, i: isize, j: isize) -> usize {
        let nt = self.n_theta as isize;
        let np = self.n_phi as isize;
        let (mut i, mut j) = (i, j);
        if i < 0 {
            i = -1 - i;
            j += np / 2;
        } else if i >= nt {
            i = 2 * nt - 1 - i;
            j += np / 2;
        }
        let i = i.clamp(0, nt - 1) as usize;
        let j = j.rem_euclid(np) as usize;
        i * self.n_phi + j
    }

    pub fn surface_patches(&self) -> Vec<SurfacePatch> {
        parallel::map_range(self.n_theta * self.n_phi, |idx| self.patch_at(idx))
    }

    /// Geometry of the single surface patch with flat index `idx`; depends
    /// on the radial field in the 3x3 stencil around the cell.
    pub fn patch_at(&self, idx: usize) -> SurfacePatch {
        let dt = self.d_theta();
        let dp = self.d_phi();
        let nphi = self.n_phi;
        {
            let i = (idx / nphi) as isize;
            let j = (idx % nphi) as isize;
            let theta = self.theta(i as usize);
            let phi = self.phi(j as usize);
            let (st, ct) = theta.sin_cos();
            let (sp, cp) = phi.sin_cos();
            let u = Vector3::new(st * cp, st * sp, ct);
            let ut = Vector3::new(ct * cp, ct * sp, -st);
            let up = Vector3::new(-st * sp, st * cp, 0.0);
            let utp = Vector3::new(-ct * sp, ct * cp, 0.0);
            let upp = Vector3::new(-st * cp, -st * sp, 0.0);

            let r = self.r[idx];
            let rt = (self.r_ghost(i + 1, j) - self.r_ghost(i - 1, j)) / (2.0 * dt);
            let rp = (self.r_ghost(i, j + 1) - self.r_ghost(i, j - 1)) / (2.0 * dp);
            let rtt = (self.r_ghost(i + 1, j) - 2.0 * r + self.r_ghost(i - 1, j)) / (dt * dt);
            let rpp = (self.r_ghost(i, j + 1) - 2.0 * r + self.r_ghost(i, j - 1)) / (dp * dp);
            let rtp = (self.r_ghost(i + 1, j + 1) - self.r_ghost(i + 1, j - 1)
                - self.r_ghost(i - 1, j + 1)
                + self.r_ghost(i - 1, j - 1))
                / (4.0 * dt * dp);

            let x_t = ut * r + u * rt;
            let x_p = up * r + u * rp;
            let x_tt = u * rtt + ut * (2.0 * rt) - u * r; // u_tt = -u
            let x_tp = u * rtp + up * rt + ut * rp + utp * r;
            let x_pp = u * rpp + up * (2.0 * rp) + upp * r;

            let n = x_t.cross(&x_p);
            let nn = n.norm();
            let normal = n / nn;
            let gram = Matrix2::new(x_t.dot(&x_t), x_t.dot(&x_p), x_t.dot(&x_p), x_p.dot(&x_p));
            // Sign fixed so the unit sphere has positive principal curvatures.
            let second = Matrix2::new(
                -x_tt.dot(&normal),
                -x_tp.dot(&normal),
                -x_tp.dot(&normal),
                -x_pp.dot(&normal),
            );
            SurfacePatch {
                point: self.center + u * r,
                normal,
                area: nn * dt * dp,
                basis: [x_t, x_p],
                gram,
                second_form: second,
                radial: u,
            }
        }
    }

    pub fn boundary_elements(&self) -> Vec<BoundaryEl3> {
        self.surface_patches()
            .into_iter()
            .map(|p| BoundaryEl3 { area: p.area, normal: p.normal, centroid: p.point })
            .collect()
    }

    pub fn support(&self, d: Vector3<f64>) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for i in 0..self.n_theta {
            let theta = self.theta(i);
            for j in 0..self.n_phi {
                let u = self.direction(theta, self.phi(j));
                let x = self.center + u * self.r[i * self.n_phi + j];
                best = best.max(x.dot(&d));
            }
        }
        best
    }

    pub fn bounding_box(&self) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for i in 0..self.n_theta {
            let theta = self.theta(i);
            for j in 0..self.n_phi {
                let x = self.center + self.direction(theta, self.phi(j)) * self.r[i * self.n_phi + j];
                lo = lo.inf(&x);
                hi = hi.sup(&x);
            }
        }
        // Slack for interpolation between grid nodes.
        let pad = 0.02 * (hi - lo).norm() + 1e-12;
        (lo - Vector3::repeat(pad), hi + Vector3::repeat(pad))
    }

    pub fn scaled(&self, gamma: f64) -> Star3 {
        let mut s = self.clone();
        for r in &mut s.r {
            *r *= gamma;
        }
        s
    }

    pub fn translated(&self, z: Vector3<f64>) -> Star3 {
        let mut s = self.clone();
        s.center += z;
        s
    }

    /// Rotation about the center, realized by resampling the radial field.
    pub fn rotated(&self, rot: &Matrix3<f64>) -> Star3 {
        let inv = rot.transpose();
        let mut s = self.clone();
        for i in 0..self.n_theta {
            let theta = self.theta(i);
            for j in 0..self.n_phi {
                let u = inv * self.direction(theta, self.phi(j));
                let th = u.z.clamp(-1.0, 1.0).acos();
                let ph = u.y.atan2(u.x);
                s.r[i * self.n_phi + j] = self.radius_at(th, ph);
            }
        }
        s
    }

    pub fn resampled(&self, n_theta: usize, n_phi: usize) -> Result<Star3> {
        Star3::from_fn(self.center, n_theta, n_phi, |t, p| self.radius_at(t, p))
    }

    /// `|E delta F|` for two fields sharing center and grid: exact in the
    /// radial direction, midpoint quadrature in angle.
    pub fn symdiff_aligned(&self, other: &Star3) -> Result<f64> {
        if self.n_theta != other.n_theta || self.n_phi != other.n_phi {
            return Err(WulffError::Geometry("grid mismatch in aligned symmetric difference".into()));
        }
        if (self.center - other.center).norm() > 1e-12 {
            return Err(WulffError::Geometry("centers differ in aligned symmetric difference".into()));
        }
        let dt = self.d_theta();
        let dp = self.d_phi();
        let mut v = 0.0;
        for i in 0..self.n_theta {
            let s = self.theta(i).sin();
            for j in 0..self.n_phi {
                let a = self.r[i * self.n_phi + j].powi(3);
                let b = other.r[i * self.n_phi + j].powi(3);
                v += (a - b).abs() * s;
            }
        }
        Ok(v * dt * dp / 3.0)
    }

    /// Outer hull approximation: radial function of the intersection of
    /// supporting half-spaces over quasi-uniform directions, clamped from
    /// below by the shape itself.
    pub fn hull_radial(&self, directions: &[Vector3<f64>]) -> Vec<f64> {
        let pts: Vec<Vector3<f64>> = (0..self.n_theta * self.n_phi)
            .map(|idx| {
                let (i, j) = (idx / self.n_phi, idx % self.n_phi);
                self.direction(self.theta(i), self.phi(j)) * self.r[idx]
            })
            .collect();
        let supports: Vec<f64> = parallel::map_slice(directions, |d| {
            pts.iter().map(|p| p.dot(d)).fold(f64::NEG_INFINITY, f64::max)
        });
        parallel::map_range(self.n_theta * self.n_phi, |idx| {
            let (i, j) = (idx / self.n_phi, idx % self.n_phi);
            let u = self.direction(self.theta(i), self.phi(j));
            let mut r = f64::INFINITY;
            for (d, &h) in directions.iter().zip(&supports) {
                let du = d.dot(&u);
                if du > 1e-9 {
                    r = r.min(h / du);
                }
            }
            r.max(self.r[idx])
        })
    }

    pub fn convexity_defect(&self) -> Result<f64> {
        let dirs = crate::anisotropy::fibonacci_sphere(2562);
        let hull = self.hull_radial(&dirs);
        let dt = self.d_theta();
        let dp = self.d_phi();
        let mut vh = 0.0;
        for i in 0..self.n_theta {
            let s = self.theta(i).sin();
            for j in 0..self.n_phi {
                vh += hull[i * self.n_phi + j].powi(3) * s;
            }
        }
        let vh = vh * dt * dp / 3.0;
        if !(vh > 0.0) {
            return Err(WulffError::Geometry("degenerate hull".into()));
        }
        Ok((1.0 - self.volume() / vh).max(0.0))
    }

    /// Grid Laplacian smoothing of the radial field (index-space stencil).
    pub fn smooth_radial(&mut self, weight: f64) {
        let nphi = self.n_phi;
        let new: Vec<f64> = (0..self.r.len())
            .map(|idx| {
                let i = (idx / nphi) as isize;
                let j = (idx % nphi) as isize;
                let lap = self.r_ghost(i + 1, j)
                    + self.r_ghost(i - 1, j)
                    + self.r_ghost(i, j + 1)
                    + self.r_ghost(i, j - 1)
                    - 4.0 * self.r[idx];
                self.r[idx] + weight * lap
            })
            .collect();
        self.r = new;
    }

    /// Per-row circular moving average whose window grows toward the poles so
    /// the effective azimuthal resolution matches the polar one.  Keeps the
    /// thin polar cells from driving the explicit descent step size.
    pub fn lowpass_polar(&mut self) {
        let mut values = std::mem::take(&mut self.r);
        self.lowpass_polar_field(&mut values);
        self.r = values;
    }

    /// Same row-window averaging applied to an arbitrary per-cell field
    /// (e.g. a descent velocity), leaving the radial field untouched.
    pub fn lowpass_polar_field(&self, values: &mut [f64]) {
        assert_eq!(values.len(), self.n_theta * self.n_phi);
        let dt = self.d_theta();
        let dp = self.d_phi();
        let nphi = self.n_phi as isize;
        for i in 0..self.n_theta {
            let s = self.theta(i).sin();
            let window = (dt / (s * dp)).round() as isize;
            if window < 1 {
                continue;
            }
            let w = window.min(nphi / 4);
            let base = i * self.n_phi;
            let row: Vec<f64> = (0..nphi)
                .map(|j| {
                    let mut acc = 0.0;
                    for k in -w..=w {
                        acc += values[base + (j + k).rem_euclid(nphi) as usize];
                    }
                    acc / (2 * w + 1) as f64
                })
                .collect();
            values[base..base + self.n_phi].copy_from_slice(&row);
        }
    }

    /// Replace the pole-adjacent rows by quadratic extrapolation in theta
    /// from the three interior rows next to them.  The parametric curvature
    /// stencil is not consistent on those rows (the azimuthal arm collapses),
    /// so descent flows leave them unfitted; this keeps them on the smooth
    /// continuation of the interior instead of letting kinks accumulate.
    pub fn extrapolate_pole_rows(&mut self) {
        let nt = self.n_theta;
        let np = self.n_phi;
        if nt < 4 {
            return;
        }
        for j in 0..np {
            self.r[j] = 3.0 * self.r[np + j] - 3.0 * self.r[2 * np + j] + self.r[3 * np + j];
            self.r[(nt - 1) * np + j] = 3.0 * self.r[(nt - 2) * np + j]
                - 3.0 * self.r[(nt - 3) * np + j]
                + self.r[(nt - 4) * np + j];
        }
    }

    pub fn min_radius(&self) -> f64 {
        self.r.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_radius(&self) -> f64 {
        self.r.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Triangulation with two pole vertices, watertight and outward oriented.
    pub fn to_trimesh(&self) -> super::TriMesh {
        let nt = self.n_theta;
        let np = self.n_phi;
        let mut verts = Vec::with_capacity(nt * np + 2);
        for i in 0..nt {
            let theta = self.theta(i);
            for j in 0..np {
                verts.push(self.center + self.direction(theta, self.phi(j)) * self.r[i * np + j]);
            }
        }
        let north_r = self.r[0..np].iter().sum::<f64>() / np as f64;
        let south_r = self.r[(nt - 1) * np..].iter().sum::<f64>() / np as f64;
        let north = verts.len();
        verts.push(self.center + Vector3::new(0.0, 0.0, north_r));
        let south = verts.len();
        verts.push(self.center + Vector3::new(0.0, 0.0, -south_r));
        let mut faces = Vec::new();
        let idx = |i: usize, j: usize| i * np + (j % np);
        for j in 0..np {
            faces.push([north, idx(0, j), idx(0, j + 1)]);
            faces.push([south, idx(nt - 1, j + 1), idx(nt - 1, j)]);
        }
        for i in 0..nt - 1 {
            for j in 0..np {
                let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            }
        }
        super::TriMesh { vertices: verts, faces }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_ball_volume() {
        let b = Star3::ball(Vector3::zeros(), 1.0, 32, 64).unwrap();
        let v = b.volume();
        assert_relative_eq!(v, 4.0 * std::f64::consts::PI / 3.0, max_relative = 2e-3);
    }

    #[test]
    fn unit_ball_area_and_normals() {
        let b = Star3::ball(Vector3::zeros(), 1.0, 32, 64).unwrap();
        let els = b.boundary_elements();
        let area: f64 = els.iter().map(|e| e.area).sum();
        assert_relative_eq!(area, 4.0 * std::f64::consts::PI, max_relative = 3e-3);
        for e in els.iter().step_by(97) {
            assert_relative_eq!(e.normal.norm(), 1.0, epsilon = 1e-12);
            // Outward: aligned with the radial direction for a ball.
            assert!(e.normal.dot(&e.centroid) > 0.99);
        }
    }

    #[test]
    fn sphere_second_form_is_exact() {
        let b = Star3::ball(Vector3::zeros(), 2.0, 16, 32).unwrap();
        for p in b.surface_patches().iter().step_by(31) {
            // Principal curvatures of a radius-2 sphere are 1/2.
            let shape_op = p.gram.try_inverse().unwrap() * p.second_form;
            assert_relative_eq!(shape_op.trace(), 1.0, max_relative = 1e-10);
            assert_relative_eq!(shape_op.determinant(), 0.25, max_relative = 1e-10);
        }
    }

    #[test]
    fn perturbed_volume_matches_refined_quadrature() {
        let f = |t: f64, p: f64| 1.0 + 0.1 * (2.0 * t).cos() + 0.05 * (3.0 * p).sin() * t.sin();
        let coarse = Star3::from_fn(Vector3::zeros(), 32, 64, f).unwrap();
        let fine = Star3::from_fn(Vector3::zeros(), 64, 128, f).unwrap();
        assert_relative_eq!(coarse.volume(), fine.volume(), max_relative = 1e-3);
    }

    #[test]
    fn ball_membership_and_interpolation() {
        let b = Star3::ball(Vector3::new(0.5, -0.25, 1.0), 1.5, 16, 32).unwrap();
        assert!(b.contains(Vector3::new(0.5, -0.25, 1.0)));
        assert!(b.contains(Vector3::new(1.4, -0.25, 1.0)));
        assert!(!b.contains(Vector3::new(2.2, -0.25, 1.0)));
    }

    #[test]
    fn ball_defect_vanishes() {
        let b = Star3::ball(Vector3::zeros(), 1.0, 32, 64).unwrap();
        assert!(b.convexity_defect().unwrap() < 1e-3);
    }

    #[test]
    fn lobed_star_has_positive_defect() {
        let s = Star3::from_fn(Vector3::zeros(), 32, 64, |t, _| {
            1.0 + 0.5 * (3.0 * t).cos().max(0.0)
        })
        .unwrap();
        assert!(s.convexity_defect().unwrap() > 0.01);
    }

    #[test]
    fn rotation_preserves_volume() {
        let s = Star3::from_fn(Vector3::zeros(), 32, 64, |t, p| {
            1.0 + 0.2 * t.sin() * (2.0 * p).cos()
        })
        .unwrap();
        let rot = nalgebra::Rotation3::from_euler_angles(0.3, -0.4, 1.1);
        let r = s.rotated(rot.matrix());
        assert_relative_eq!(s.volume(), r.volume(), max_relative = 5e-3);
    }

    #[test]
    fn aligned_symdiff_of_concentric_balls() {
        let a = Star3::ball(Vector3::zeros(), 1.0, 32, 64).unwrap();
        let b = Star3::ball(Vector3::zeros(), 2.0f64.powf(1.0 / 3.0), 32, 64).unwrap();
        let d = a.symdiff_aligned(&b).unwrap();
        assert_relative_eq!(d, 4.0 * std::f64::consts::PI / 3.0, max_relative = 2e-3);
    }

    #[test]
    fn trimesh_roundtrip_volume() {
        let s = Star3::ball(Vector3::zeros(), 1.0, 32, 64).unwrap();
        let m = s.to_trimesh();
        assert!(m.is_watertight());
        assert_relative_eq!(m.volume(), s.volume(), max_relative = 5e-3);
    }
}
