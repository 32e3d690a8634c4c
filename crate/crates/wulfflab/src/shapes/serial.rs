//! Versioned JSON schema for shapes: `{version, kind, ...payload}`.

use crate::error::{Result, WulffError};
use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{Polygon2, Shape, Star3, TriMesh};

pub const SHAPE_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ShapeSchema {
    Polygon2d {
        version: u32,
        vertices: Vec<[f64; 2]>,
    },
    Star3d {
        version: u32,
        center: [f64; 3],
        n_theta: usize,
        n_phi: usize,
        r: Vec<f64>,
    },
    Trimesh {
        version: u32,
        vertices: Vec<[f64; 3]>,
        faces: Vec<[usize; 3]>,
    },
}

impl Shape {
    pub fn to_json(&self) -> String {
        let schema = match self {
            Shape::Polygon2(p) => ShapeSchema::Polygon2d {
                version: SHAPE_SCHEMA_VERSION,
                vertices: p.vertices.iter().map(|v| [v.x, v.y]).collect(),
            },
            Shape::Star3(s) => ShapeSchema::Star3d {
                version: SHAPE_SCHEMA_VERSION,
                center: [s.center.x, s.center.y, s.center.z],
                n_theta: s.n_theta,
                n_phi: s.n_phi,
                r: s.r.clone(),
            },
            Shape::TriMesh(m) => ShapeSchema::Trimesh {
                version: SHAPE_SCHEMA_VERSION,
                vertices: m.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
                faces: m.faces.clone(),
            },
        };
        serde_json::to_string_pretty(&schema).expect("shape serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Shape> {
        let schema: ShapeSchema = serde_json::from_str(text)
            .map_err(|e| WulffError::Geometry(format!("bad shape JSON: {e}")))?;
        let version = match &schema {
            ShapeSchema::Polygon2d { version, .. }
            | ShapeSchema::Star3d { version, .. }
            | ShapeSchema::Trimesh { version, .. } => *version,
        };
        if version != SHAPE_SCHEMA_VERSION {
            return Err(WulffError::Geometry(format!(
                "unsupported shape schema version {version}"
            )));
        }
        Ok(match schema {
            ShapeSchema::Polygon2d { vertices, .. } => Shape::Polygon2(Polygon2::new(
                vertices.into_iter().map(|v| Vector2::new(v[0], v[1])).collect(),
            )?),
            ShapeSchema::Star3d { center, n_theta, n_phi, r, .. } => Shape::Star3(Star3::new(
                Vector3::new(center[0], center[1], center[2]),
                n_theta,
                n_phi,
                r,
            )?),
            ShapeSchema::Trimesh { vertices, faces, .. } => Shape::TriMesh(TriMesh::new(
                vertices.into_iter().map(|v| Vector3::new(v[0], v[1], v[2])).collect(),
                faces,
            )?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_roundtrip() {
        let s = Shape::Star3(Star3::ball(Vector3::new(0.1, 0.2, 0.3), 1.0, 16, 32).unwrap());
        let back = Shape::from_json(&s.to_json()).unwrap();
        assert!((s.volume().unwrap() - back.volume().unwrap()).abs() < 1e-14);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = r#"{"kind":"star3d","version":1,"center":[0,0,0],"n_theta":16,"n_phi":32,"r":[],"extra":1}"#;
        assert!(Shape::from_json(bad).is_err());
    }
}
