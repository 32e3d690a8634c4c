use crate::error::{Result, WulffError};
use nalgebra::Vector2;

use super::{BoundaryEl2, Polygon2};

/// Star-shaped planar region: radial field on uniform angles about `center`.
/// Internal representation used by the 2D minimizer; converts to a polygon.
#[derive(Debug, Clone)]
pub struct Star2 {
    pub center: Vector2<f64>,
    pub r: Vec<f64>,
}

impl Star2 {
    pub fn new(center: Vector2<f64>, r: Vec<f64>) -> Result<Self> {
        if r.len() < 16 {
            return Err(WulffError::Geometry("star polygon needs at least 16 rays".into()));
        }
        if r.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(WulffError::Geometry("radial field must be strictly positive".into()));
        }
        Ok(Star2 { center, r })
    }

    pub fn disk(center: Vector2<f64>, radius: f64, n: usize) -> Result<Self> {
        Star2::new(center, vec![radius; n])
    }

    pub fn from_fn<F: Fn(f64) -> f64>(center: Vector2<f64>, n: usize, f: F) -> Result<Self> {
        let r = (0..n).map(|k| f(2.0 * std::f64::consts::PI * k as f64 / n as f64)).collect();
        Star2::new(center, r)
    }

    pub fn n(&self) -> usize {
        self.r.len()
    }

    pub fn angle(&self, k: usize) -> f64 {
        2.0 * std::f64::consts::PI * k as f64 / self.n() as f64
    }

    fn rg(&self, k: isize) -> f64 {
        let n = self.n() as isize;
        self.r[k.rem_euclid(n) as usize]
    }

    pub fn to_polygon(&self) -> Result<Polygon2> {
        let verts = (0..self.n())
            .map(|k| {
                let a = self.angle(k);
                self.center + Vector2::new(a.cos(), a.sin()) * self.r[k]
            })
            .collect();
        Polygon2::new(verts)
    }

    /// Exact polygon area of the induced polygon.
    pub fn area(&self) -> f64 {
        let n = self.n() as f64;
        let s = (2.0 * std::f64::consts::PI / n).sin();
        let mut a = 0.0;
        for k in 0..self.n() {
            a += self.rg(k as isize) * self.rg(k as isize + 1);
        }
        a * s / 2.0
    }

    /// Boundary elements of the induced polygon with curvature from central
    /// differences of the radial field at the shared vertex angles.
    pub fn boundary_with_curvature(&self) -> Vec<(BoundaryEl2, f64)> {
        let poly = match self.to_polygon() {
            Ok(p) => p,
            Err(_) => return Vec::new(),
        };
        let edges = poly.edges();
        let da = 2.0 * std::f64::consts::PI / self.n() as f64;
        let kappa_vertex: Vec<f64> = (0..self.n() as isize)
            .map(|k| {
                let r = self.rg(k);
                let rp = (self.rg(k + 1) - self.rg(k - 1)) / (2.0 * da);
                let rpp = (self.rg(k + 1) - 2.0 * r + self.rg(k - 1)) / (da * da);
                (r * r + 2.0 * rp * rp - r * rpp) / (r * r + rp * rp).powf(1.5)
            })
            .collect();
        edges
            .into_iter()
            .enumerate()
            .map(|(k, e)| {
                let kap = 0.5 * (kappa_vertex[k] + kappa_vertex[(k + 1) % self.n()]);
                (e, kap)
            })
            .collect()
    }

    pub fn scaled(&self, gamma: f64) -> Star2 {
        Star2 { center: self.center, r: self.r.iter().map(|x| x * gamma).collect() }
    }

    pub fn smooth_radial(&mut self, weight: f64) {
        let new: Vec<f64> = (0..self.n() as isize)
            .map(|k| self.rg(k) + weight * (self.rg(k + 1) - 2.0 * self.rg(k) + self.rg(k - 1)))
            .collect();
        self.r = new;
    }

    pub fn radius_at(&self, angle: f64) -> f64 {
        let n = self.n() as f64;
        let t = angle.rem_euclid(2.0 * std::f64::consts::PI) / (2.0 * std::f64::consts::PI) * n;
        let k0 = t.floor();
        let f = t - k0;
        let k0 = k0 as isize;
        (1.0 - f) * self.rg(k0) + f * self.rg(k0 + 1)
    }

    /// Aligned symmetric difference for fields sharing center and ray count.
    pub fn symdiff_aligned(&self, other: &Star2) -> Result<f64> {
        if self.n() != other.n() {
            return Err(WulffError::Geometry("ray count mismatch".into()));
        }
        if (self.center - other.center).norm() > 1e-12 {
            return Err(WulffError::Geometry("centers differ".into()));
        }
        let da = 2.0 * std::f64::consts::PI / self.n() as f64;
        let mut v = 0.0;
        for k in 0..self.n() {
            v += (self.r[k] * self.r[k] - other.r[k] * other.r[k]).abs();
        }
        Ok(v * da / 2.0)
    }

    pub fn min_radius(&self) -> f64 {
        self.r.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_radius(&self) -> f64 {
        self.r.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn disk_area() {
        let d = Star2::disk(Vector2::zeros(), 1.0, 256).unwrap();
        assert_relative_eq!(d.area(), std::f64::consts::PI, max_relative = 1e-3);
        assert_relative_eq!(d.area(), d.to_polygon().unwrap().area(), epsilon = 1e-12);
    }

    #[test]
    fn circle_curvature() {
        let d = Star2::disk(Vector2::zeros(), 2.0, 128).unwrap();
        for (_, k) in d.boundary_with_curvature() {
            assert_relative_eq!(k, 0.5, max_relative = 1e-10);
        }
    }

    #[test]
    fn ellipse_curvature_matches_analytic() {
        // r(phi) for the ellipse x^2/a^2 + y^2/b^2 = 1.
        let (a, b) = (2.0f64, 1.0f64);
        let s = Star2::from_fn(Vector2::zeros(), 512, |p| {
            1.0 / ((p.cos() / a).powi(2) + (p.sin() / b).powi(2)).sqrt()
        })
        .unwrap();
        let elems = s.boundary_with_curvature();
        // At phi = 0 (x = a): kappa = a / b^2.
        let k0 = elems[0].1;
        assert_relative_eq!(k0, a / (b * b), max_relative = 1e-2);
    }
}
