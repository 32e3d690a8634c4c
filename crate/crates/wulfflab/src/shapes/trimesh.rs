use crate::error::{Result, WulffError};
use nalgebra::Vector3;
use std::collections::HashMap;

use super::BoundaryEl3;

/// Indexed triangle mesh with outward-oriented faces.
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vector3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let m = TriMesh { vertices, faces };
        for f in &m.faces {
            if f.iter().any(|&i| i >= m.vertices.len()) {
                return Err(WulffError::Geometry("face index out of range".into()));
            }
        }
        if !m.is_watertight() {
            return Err(WulffError::Geometry("mesh is not watertight".into()));
        }
        Ok(m)
    }

    pub fn cube(lo: Vector3<f64>, hi: Vector3<f64>) -> Self {
        let v = |x: usize, y: usize, z: usize| {
            Vector3::new(
                if x == 0 { lo.x } else { hi.x },
                if y == 0 { lo.y } else { hi.y },
                if z == 0 { lo.z } else { hi.z },
            )
        };
        let vertices = vec![
            v(0, 0, 0), v(1, 0, 0), v(1, 1, 0), v(0, 1, 0),
            v(0, 0, 1), v(1, 0, 1), v(1, 1, 1), v(0, 1, 1),
        ];
        let faces = vec![
            [0, 2, 1], [0, 3, 2], // bottom
            [4, 5, 6], [4, 6, 7], // top
            [0, 1, 5], [0, 5, 4], // y = lo
            [2, 3, 7], [2, 7, 6], // y = hi
            [1, 2, 6], [1, 6, 5], // x = hi
            [3, 0, 4], [3, 4, 7], // x = lo
        ];
        TriMesh { vertices, faces }
    }

    /// Every edge must be shared by exactly two faces with opposite orientation.
    pub fn is_watertight(&self) -> bool {
        let mut edges: HashMap<(usize, usize), i64> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                *edges.entry(key).or_insert(0) += if a < b { 1 } else { -1 };
            }
        }
        !edges.is_empty() && edges.values().all(|&c| c == 0)
    }

    /// Signed volume by the divergence theorem over signed tetrahedra.
    pub fn volume(&self) -> f64 {
        let mut v = 0.0;
        for f in &self.faces {
            let (a, b, c) = (self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]);
            v += a.dot(&b.cross(&c)) / 6.0;
        }
        v
    }

    pub fn area(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let (a, b, c) = (self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]);
                (b - a).cross(&(c - a)).norm() / 2.0
            })
            .sum()
    }

    pub fn centroid(&self) -> Vector3<f64> {
        let mut m = Vector3::zeros();
        let mut v = 0.0;
        for f in &self.faces {
            let (a, b, c) = (self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]);
            let vol = a.dot(&b.cross(&c)) / 6.0;
            m += (a + b + c) / 4.0 * vol;
            v += vol;
        }
        m / v
    }

    /// Face quadrature elements; degenerate facets are skipped (count reported
    /// via `degenerate_faces`).
    pub fn boundary_elements(&self) -> Vec<BoundaryEl3> {
        self.faces
            .iter()
            .filter_map(|f| {
                let (a, b, c) = (self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]);
                let n = (b - a).cross(&(c - a));
                let nn = n.norm();
                if nn < 1e-300 {
                    return None;
                }
                Some(BoundaryEl3 { area: nn / 2.0, normal: n / nn, centroid: (a + b + c) / 3.0 })
            })
            .collect()
    }

    pub fn degenerate_faces(&self) -> usize {
        self.faces.len() - self.boundary_elements().len()
    }

    pub fn contains(&self, p: Vector3<f64>) -> bool {
        // Parity of ray crossings along +x.
        let mut crossings = 0usize;
        for f in &self.faces {
            let (a, b, c) = (self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]);
            if ray_x_hits_triangle(p, a, b, c) {
                crossings += 1;
            }
        }
        crossings % 2 == 1
    }

    pub fn support(&self, d: Vector3<f64>) -> f64 {
        self.vertices.iter().map(|v| v.dot(&d)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn bounding_box(&self) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn scaled(&self, gamma: f64) -> TriMesh {
        let c = self.centroid();
        TriMesh {
            vertices: self.vertices.iter().map(|v| c + (v - c) * gamma).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn translated(&self, z: Vector3<f64>) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|v| v + z).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn convexity_defect(&self) -> Result<f64> {
        let c = self.centroid();
        let mut dirs = crate::anisotropy::fibonacci_sphere(1280);
        // The face normals are the exact hull half-space directions for a
        // convex polyhedron; including them removes the overshoot that a
        // generic direction sample leaves near edges and corners.
        for f in &self.faces {
            let (a, b, d) = (self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]);
            let n = (b - a).cross(&(d - a));
            if n.norm() > 1e-14 {
                dirs.push(n.normalize());
            }
        }
        let supports: Vec<f64> = dirs
            .iter()
            .map(|d| self.vertices.iter().map(|v| (v - c).dot(d)).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        // Hull volume via the star quadrature of the half-space intersection.
        let (nt, np) = (64usize, 128usize);
        let dt = std::f64::consts::PI / nt as f64;
        let dp = 2.0 * std::f64::consts::PI / np as f64;
        let mut vh = 0.0;
        for i in 0..nt {
            let theta = (i as f64 + 0.5) * dt;
            let s = theta.sin();
            for j in 0..np {
                let phi = j as f64 * dp;
                let u = Vector3::new(s * phi.cos(), s * phi.sin(), theta.cos());
                let mut r = f64::INFINITY;
                for (d, &h) in dirs.iter().zip(&supports) {
                    let du = d.dot(&u);
                    if du > 1e-9 {
                        r = r.min(h / du);
                    }
                }
                vh += r.powi(3) * s;
            }
        }
        let vh = vh * dt * dp / 3.0;
        if !(vh > 0.0) {
            return Err(WulffError::Geometry("degenerate hull".into()));
        }
        Ok((1.0 - self.volume() / vh).max(0.0))
    }

    pub fn to_off(&self) -> String {
        let mut s = String::from("OFF\n");
        s.push_str(&format!("{} {} 0\n", self.vertices.len(), self.faces.len()));
        for v in &self.vertices {
            s.push_str(&format!("{} {} {}\n", v.x, v.y, v.z));
        }
        for f in &self.faces {
            s.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
        }
        s
    }

    pub fn from_off(text: &str) -> Result<TriMesh> {
        let mut tokens = text
            .lines()
            .filter(|l| !l.trim_start().starts_with('#'))
            .flat_map(|l| l.split_whitespace())
            .peekable();
        match tokens.next() {
            Some("OFF") => {}
            _ => return Err(WulffError::Geometry("missing OFF header".into())),
        }
        let mut next_num = |what: &str| -> Result<f64> {
            tokens
                .next()
                .ok_or_else(|| WulffError::Geometry(format!("truncated OFF file at {what}")))?
                .parse::<f64>()
                .map_err(|e| WulffError::Geometry(format!("bad {what}: {e}")))
        };
        let nv = next_num("vertex count")? as usize;
        let nf = next_num("face count")? as usize;
        let _ne = next_num("edge count")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            vertices.push(Vector3::new(next_num("x")?, next_num("y")?, next_num("z")?));
        }
        let mut faces = Vec::with_capacity(nf);
        for _ in 0..nf {
            let k = next_num("face arity")? as usize;
            if k != 3 {
                return Err(WulffError::Geometry("only triangle faces are supported".into()));
            }
            faces.push([
                next_num("i")? as usize,
                next_num("j")? as usize,
                next_num("k")? as usize,
            ]);
        }
        TriMesh::new(vertices, faces)
    }
}

fn ray_x_hits_triangle(p: Vector3<f64>, a: Vector3<f64>, b: Vector3<f64>, c: Vector3<f64>) -> bool {
    // Moller-Trumbore.  The direction is tilted by irrational-looking
    // amounts so that rays from lattice-aligned query points do not hit
    // mesh edges or vertices exactly (which would double-count crossings).
    let e1 = b - a;
    let e2 = c - a;
    let dir = Vector3::new(1.0, 1.2340975e-4, 2.7182818e-4);
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < 1e-14 {
        return false;
    }
    let inv = 1.0 / det;
    let s = p - a;
    let u = s.dot(&h) * inv;
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    e2.dot(&q) * inv > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_cube_measures() {
        let m = TriMesh::cube(Vector3::zeros(), Vector3::repeat(1.0));
        assert!(m.is_watertight());
        assert_relative_eq!(m.volume(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(m.area(), 6.0, epsilon = 1e-12);
        assert!(m.contains(Vector3::repeat(0.5)));
        assert!(!m.contains(Vector3::new(0.5, 0.5, 1.5)));
        assert!(m.convexity_defect().unwrap() < 5e-3);
    }

    #[test]
    fn off_roundtrip() {
        let m = TriMesh::cube(Vector3::zeros(), Vector3::repeat(1.0));
        let back = TriMesh::from_off(&m.to_off()).unwrap();
        assert_relative_eq!(back.volume(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn open_mesh_rejected() {
        let verts = vec![
            Vector3::zeros(),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
        ];
        assert!(TriMesh::new(verts, vec![[0, 1, 2]]).is_err());
    }
}
