//! Discrete representations of candidate regions and their measures.
//!
//! Three representations are supported: simple polygons in the plane,
//! star-shaped radial fields on a latitude-longitude grid in 3D, and
//! watertight triangle meshes.  The star grid is the primary 3D
//! representation: it admits non-convex competitors while keeping a fixed
//! topology, which is what the minimizer needs in order to let convexity
//! emerge rather than impose it.

mod align;
mod polygon2;
mod serial;
mod star2;
mod star3;
mod trimesh;

pub use align::{align, nelder_mead, AlignGroup, InvarianceMap, InvarianceMap2, InvarianceMap3};
pub use polygon2::Polygon2;
pub use star2::Star2;
pub use star3::{Star3, SurfacePatch};
pub use trimesh::TriMesh;

use crate::error::{Result, WulffError};
use nalgebra::{Vector2, Vector3};

/// One boundary quadrature element: area weight, outward unit normal, location.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryEl2 {
    pub area: f64,
    pub normal: Vector2<f64>,
    pub centroid: Vector2<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundaryEl3 {
    pub area: f64,
    pub normal: Vector3<f64>,
    pub centroid: Vector3<f64>,
}

/// A discrete region of finite perimeter.
#[derive(Debug, Clone)]
pub enum Shape {
    Polygon2(Polygon2),
    Star3(Star3),
    TriMesh(TriMesh),
}

impl Shape {
    pub fn dimension(&self) -> usize {
        match self {
            Shape::Polygon2(_) => 2,
            _ => 3,
        }
    }

    /// n-dimensional Lebesgue measure by divergence-theorem quadrature.
    pub fn volume(&self) -> Result<f64> {
        let v = match self {
            Shape::Polygon2(p) => p.area(),
            Shape::Star3(s) => s.volume(),
            Shape::TriMesh(m) => m.volume(),
        };
        if !v.is_finite() || v <= 0.0 {
            return Err(WulffError::Geometry(format!("degenerate region, volume {v}")));
        }
        Ok(v)
    }

    pub fn centroid(&self) -> Vector3<f64> {
        match self {
            Shape::Polygon2(p) => {
                let c = p.centroid();
                Vector3::new(c.x, c.y, 0.0)
            }
            Shape::Star3(s) => s.centroid(),
            Shape::TriMesh(m) => m.centroid(),
        }
    }

    /// Total boundary measure (perimeter in 2D, surface area in 3D).
    pub fn boundary_area(&self) -> f64 {
        match self {
            Shape::Polygon2(p) => p.perimeter(),
            Shape::Star3(s) => s.boundary_elements().iter().map(|e| e.area).sum(),
            Shape::TriMesh(m) => m.area(),
        }
    }

    /// Point membership test.
    pub fn contains(&self, p: Vector3<f64>) -> bool {
        match self {
            Shape::Polygon2(poly) => poly.contains(Vector2::new(p.x, p.y)),
            Shape::Star3(s) => s.contains(p),
            Shape::TriMesh(m) => m.contains(p),
        }
    }

    /// Support function `max_{x in E} <x, d>` over boundary samples.
    pub fn support(&self, d: Vector3<f64>) -> f64 {
        match self {
            Shape::Polygon2(p) => p.support(Vector2::new(d.x, d.y)),
            Shape::Star3(s) => s.support(d),
            Shape::TriMesh(m) => m.support(d),
        }
    }

    /// Axis-aligned bounding box (2D shapes report a degenerate z-range).
    pub fn bounding_box(&self) -> (Vector3<f64>, Vector3<f64>) {
        match self {
            Shape::Polygon2(p) => {
                let (lo, hi) = p.bounding_box();
                (Vector3::new(lo.x, lo.y, 0.0), Vector3::new(hi.x, hi.y, 0.0))
            }
            Shape::Star3(s) => s.bounding_box(),
            Shape::TriMesh(m) => m.bounding_box(),
        }
    }

    /// Rescale about the center so that the volume equals `mass`.
    pub fn rescale_to_mass(&self, mass: f64) -> Result<Shape> {
        if mass <= 0.0 || !mass.is_finite() {
            return Err(WulffError::Domain(format!("mass must be positive, got {mass}")));
        }
        let v = self.volume()?;
        let n = self.dimension() as f64;
        let gamma = (mass / v).powf(1.0 / n);
        Ok(match self {
            Shape::Polygon2(p) => Shape::Polygon2(p.scaled(gamma)),
            Shape::Star3(s) => Shape::Star3(s.scaled(gamma)),
            Shape::TriMesh(m) => Shape::TriMesh(m.scaled(gamma)),
        })
    }

    /// `|conv(E) \ E| / |conv(E)|` with `conv` the hull of boundary samples.
    pub fn convexity_defect(&self) -> Result<f64> {
        match self {
            Shape::Polygon2(p) => p.convexity_defect(),
            Shape::Star3(s) => s.convexity_defect(),
            Shape::TriMesh(m) => m.convexity_defect(),
        }
    }
}

/// `|E \u{0394} F|` by midpoint membership quadrature on a common grid with
/// `resolution` cells per axis.  The quadrature error is first order in the
/// cell size.
pub fn symmetric_difference(e: &Shape, f: &Shape, resolution: usize) -> Result<f64> {
    if e.dimension() != f.dimension() {
        return Err(WulffError::Domain("dimension mismatch in symmetric difference".into()));
    }
    let (value, _) = symmetric_difference_mapped(e, f, None, resolution);
    Ok(value)
}

/// Symmetric difference between `E` and `A(F)`; returns `(|E delta A F|, cell size)`.
pub fn symmetric_difference_mapped(
    e: &Shape,
    f: &Shape,
    map: Option<&InvarianceMap>,
    resolution: usize,
) -> (f64, f64) {
    let (lo_e, hi_e) = e.bounding_box();
    // Bounding box of A(F): transform corners of F's box (rigid map, box of box).
    let (lo_f, hi_f) = f.bounding_box();
    let (lo_f, hi_f) = match map {
        None => (lo_f, hi_f),
        Some(a) => {
            let mut lo = Vector3::repeat(f64::INFINITY);
            let mut hi = Vector3::repeat(f64::NEG_INFINITY);
            for ix in 0..2 {
                for iy in 0..2 {
                    for iz in 0..2 {
                        let c = Vector3::new(
                            if ix == 0 { lo_f.x } else { hi_f.x },
                            if iy == 0 { lo_f.y } else { hi_f.y },
                            if iz == 0 { lo_f.z } else { hi_f.z },
                        );
                        let q = a.apply(c);
                        lo = lo.inf(&q);
                        hi = hi.sup(&q);
                    }
                }
            }
            (lo, hi)
        }
    };
    let lo = lo_e.inf(&lo_f);
    let hi = hi_e.sup(&hi_f);
    let dim = e.dimension();
    let span = hi - lo;
    let margin = 1e-6 * span.norm().max(1e-12);
    let lo = lo - Vector3::repeat(margin);
    let hi = hi + Vector3::repeat(margin);
    let n = resolution.max(4);
    let hx = (hi.x - lo.x) / n as f64;
    let hy = (hi.y - lo.y) / n as f64;
    if dim == 2 {
        let cell = hx * hy;
        let total = crate::parallel::sum_range(n, |i| {
            let x = lo.x + (i as f64 + 0.5) * hx;
            let mut count = 0usize;
            for j in 0..n {
                let y = lo.y + (j as f64 + 0.5) * hy;
                let p = Vector3::new(x, y, 0.0);
                let in_e = e.contains(p);
                let in_f = match map {
                    None => f.contains(p),
                    Some(a) => f.contains(a.apply_inverse(p)),
                };
                if in_e != in_f {
                    count += 1;
                }
            }
            count as f64 * cell
        });
        (total, hx.max(hy))
    } else {
        let hz = (hi.z - lo.z) / n as f64;
        let cell = hx * hy * hz;
        let total = crate::parallel::sum_range(n, |i| {
            let x = lo.x + (i as f64 + 0.5) * hx;
            let mut count = 0usize;
            for j in 0..n {
                let y = lo.y + (j as f64 + 0.5) * hy;
                for k in 0..n {
                    let z = lo.z + (k as f64 + 0.5) * hz;
                    let p = Vector3::new(x, y, z);
                    let in_e = e.contains(p);
                    let in_f = match map {
                        None => f.contains(p),
                        Some(a) => f.contains(a.apply_inverse(p)),
                    };
                    if in_e != in_f {
                        count += 1;
                    }
                }
            }
            count as f64 * cell
        });
        (total, hx.max(hy).max(hz))
    }
}

/// Default membership-grid resolution for symmetric differences.
pub const DEFAULT_SYMDIFF_RESOLUTION: usize = 128;
