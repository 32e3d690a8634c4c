use crate::error::{Result, WulffError};
use nalgebra::Vector2;

use super::BoundaryEl2;

/// Simple, positively oriented polygon.
#[derive(Debug, Clone)]
pub struct Polygon2 {
    pub vertices: Vec<Vector2<f64>>,
}

impl Polygon2 {
    pub fn new(vertices: Vec<Vector2<f64>>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(WulffError::Geometry("polygon needs at least 3 vertices".into()));
        }
        let p = Polygon2 { vertices };
        if p.signed_area() <= 0.0 {
            return Err(WulffError::Geometry("polygon must be positively oriented".into()));
        }
        if p.vertices.len() <= 2048 && !p.is_simple() {
            return Err(WulffError::Geometry("polygon is self-intersecting".into()));
        }
        Ok(p)
    }

    pub fn rectangle(lo: Vector2<f64>, hi: Vector2<f64>) -> Result<Self> {
        Polygon2::new(vec![
            lo,
            Vector2::new(hi.x, lo.y),
            hi,
            Vector2::new(lo.x, hi.y),
        ])
    }

    pub fn regular(center: Vector2<f64>, radius: f64, n: usize) -> Result<Self> {
        let verts = (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                center + Vector2::new(a.cos(), a.sin()) * radius
            })
            .collect();
        Polygon2::new(verts)
    }

    fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        let mut a = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            a += p.x * q.y - q.x * p.y;
        }
        a / 2.0
    }

    pub fn area(&self) -> f64 {
        self.signed_area()
    }

    pub fn perimeter(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| (self.vertices[(i + 1) % n] - self.vertices[i]).norm())
            .sum()
    }

    pub fn centroid(&self) -> Vector2<f64> {
        let n = self.vertices.len();
        let mut c = Vector2::zeros();
        let mut a = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let cross = p.x * q.y - q.x * p.y;
            c += (p + q) * cross;
            a += cross;
        }
        c / (3.0 * a)
    }

    /// Edge midpoints with outward normals; skips degenerate edges.
    pub fn edges(&self) -> Vec<BoundaryEl2> {
        let n = self.vertices.len();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let t = q - p;
            let len = t.norm();
            if len < 1e-300 {
                continue;
            }
            // CCW orientation: outward normal is the tangent rotated by -90 deg.
            let normal = Vector2::new(t.y, -t.x) / len;
            out.push(BoundaryEl2 { area: len, normal, centroid: (p + q) / 2.0 });
        }
        out
    }

    pub fn contains(&self, p: Vector2<f64>) -> bool {
        // Even-odd rule with a horizontal ray.
        let n = self.vertices.len();
        let mut inside = false;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn support(&self, d: Vector2<f64>) -> f64 {
        self.vertices.iter().map(|v| v.dot(&d)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn bounding_box(&self) -> (Vector2<f64>, Vector2<f64>) {
        let mut lo = Vector2::repeat(f64::INFINITY);
        let mut hi = Vector2::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn scaled(&self, gamma: f64) -> Polygon2 {
        let c = self.centroid();
        Polygon2 {
            vertices: self.vertices.iter().map(|v| c + (v - c) * gamma).collect(),
        }
    }

    pub fn translated(&self, z: Vector2<f64>) -> Polygon2 {
        Polygon2 { vertices: self.vertices.iter().map(|v| v + z).collect() }
    }

    /// Convex hull of the vertices (Andrew monotone chain), CCW.
    pub fn hull(&self) -> Polygon2 {
        let mut pts = self.vertices.clone();
        pts.sort_by(|a, b| (a.x, a.y).partial_cmp(&(b.x, b.y)).unwrap());
        pts.dedup_by(|a, b| (*a - *b).norm() < 1e-14);
        let cross = |o: Vector2<f64>, a: Vector2<f64>, b: Vector2<f64>| {
            (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
        };
        let mut lower: Vec<Vector2<f64>> = Vec::new();
        for &p in &pts {
            while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
                lower.pop();
            }
            lower.push(p);
        }
        let mut upper: Vec<Vector2<f64>> = Vec::new();
        for &p in pts.iter().rev() {
            while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
                upper.pop();
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        Polygon2 { vertices: lower }
    }

    pub fn convexity_defect(&self) -> Result<f64> {
        let hull = self.hull();
        let vh = hull.area();
        if !(vh > 0.0) {
            return Err(WulffError::Geometry("degenerate hull".into()));
        }
        Ok((1.0 - self.area() / vh).max(0.0))
    }

    fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        let seg = |i: usize| (self.vertices[i], self.vertices[(i + 1) % n]);
        for i in 0..n {
            for j in i + 1..n {
                // Skip adjacent edges.
                if j == i || (j + 1) % n == i || (i + 1) % n == j {
                    continue;
                }
                let (a, b) = seg(i);
                let (c, d) = seg(j);
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }
}

fn segments_intersect(a: Vector2<f64>, b: Vector2<f64>, c: Vector2<f64>, d: Vector2<f64>) -> bool {
    let cross = |p: Vector2<f64>, q: Vector2<f64>| p.x * q.y - p.y * q.x;
    let d1 = cross(b - a, c - a);
    let d2 = cross(b - a, d - a);
    let d3 = cross(d - c, a - c);
    let d4 = cross(d - c, b - c);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_square() -> Polygon2 {
        Polygon2::rectangle(Vector2::zeros(), Vector2::new(1.0, 1.0)).unwrap()
    }

    #[test]
    fn square_area_and_perimeter() {
        let s = unit_square();
        assert_relative_eq!(s.area(), 1.0);
        assert_relative_eq!(s.perimeter(), 4.0);
        for e in s.edges() {
            // Axis-aligned outward normals.
            assert!(e.normal.x.abs() > 0.999 || e.normal.y.abs() > 0.999);
        }
    }

    #[test]
    fn l_shape_defect_is_one_seventh() {
        // Unit square minus the top-right quadrant.  The hull of the
        // vertices is a pentagon of area 7/8, so the defect is
        // (7/8 - 3/4) / (7/8) = 1/7.
        let l = Polygon2::new(vec![
            Vector2::new(0.0, 0.0),
            Vector2::new(1.0, 0.0),
            Vector2::new(1.0, 0.5),
            Vector2::new(0.5, 0.5),
            Vector2::new(0.5, 1.0),
            Vector2::new(0.0, 1.0),
        ])
        .unwrap();
        assert_relative_eq!(l.convexity_defect().unwrap(), 1.0 / 7.0, epsilon = 1e-12);
    }

    #[test]
    fn self_intersection_rejected() {
        let bow = Polygon2::new(vec![
            Vector2::new(0.0, 0.0),
            Vector2::new(1.0, 1.0),
            Vector2::new(1.0, 0.0),
            Vector2::new(0.0, 1.0),
        ]);
        assert!(bow.is_err());
    }

    #[test]
    fn membership() {
        let s = unit_square();
        assert!(s.contains(Vector2::new(0.5, 0.5)));
        assert!(!s.contains(Vector2::new(1.5, 0.5)));
    }
}
