use crate::error::{Result, WulffError};
use nalgebra::{Matrix2, Matrix3, Rotation3, Vector2, Vector3};

use super::{symmetric_difference_mapped, Shape};

/// Rigid motion of the plane, `x -> R x + t`.
#[derive(Debug, Clone, Copy)]
pub struct InvarianceMap2 {
    pub rotation: Matrix2<f64>,
    pub translation: Vector2<f64>,
}

/// Rigid motion of space, `x -> R x + t` (det R = +-1 allows reflections).
#[derive(Debug, Clone, Copy)]
pub struct InvarianceMap3 {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

#[derive(Debug, Clone, Copy)]
pub enum InvarianceMap {
    D2(InvarianceMap2),
    D3(InvarianceMap3),
}

impl InvarianceMap {
    pub fn identity(dim: usize) -> Self {
        if dim == 2 {
            InvarianceMap::D2(InvarianceMap2 {
                rotation: Matrix2::identity(),
                translation: Vector2::zeros(),
            })
        } else {
            InvarianceMap::D3(InvarianceMap3 {
                rotation: Matrix3::identity(),
                translation: Vector3::zeros(),
            })
        }
    }

    pub fn translation3(t: Vector3<f64>) -> Self {
        InvarianceMap::D3(InvarianceMap3 { rotation: Matrix3::identity(), translation: t })
    }

    pub fn validate(&self) -> Result<()> {
        let dev = match self {
            InvarianceMap::D2(m) => {
                (m.rotation.transpose() * m.rotation - Matrix2::identity()).norm()
            }
            InvarianceMap::D3(m) => {
                (m.rotation.transpose() * m.rotation - Matrix3::identity()).norm()
            }
        };
        if dev > 1e-10 {
            return Err(WulffError::Geometry(format!(
                "rotation is not orthogonal (deviation {dev:.2e})"
            )));
        }
        Ok(())
    }

    /// Apply in 3D coordinates (2D maps act on the xy-plane).
    pub fn apply(&self, p: Vector3<f64>) -> Vector3<f64> {
        match self {
            InvarianceMap::D2(m) => {
                let q = m.rotation * Vector2::new(p.x, p.y) + m.translation;
                Vector3::new(q.x, q.y, p.z)
            }
            InvarianceMap::D3(m) => m.rotation * p + m.translation,
        }
    }

    pub fn apply_inverse(&self, p: Vector3<f64>) -> Vector3<f64> {
        match self {
            InvarianceMap::D2(m) => {
                let q = m.rotation.transpose() * (Vector2::new(p.x, p.y) - m.translation);
                Vector3::new(q.x, q.y, p.z)
            }
            InvarianceMap::D3(m) => m.rotation.transpose() * (p - m.translation),
        }
    }

    pub fn translation_part(&self) -> Vector3<f64> {
        match self {
            InvarianceMap::D2(m) => Vector3::new(m.translation.x, m.translation.y, 0.0),
            InvarianceMap::D3(m) => m.translation,
        }
    }
}

/// The invariance subgroup searched over during alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignGroup {
    Translations,
    Rigid,
    RigidReflections,
}

/// Derivative-free Nelder-Mead minimization.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    scale: f64,
    max_iters: usize,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += scale;
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    for _ in 0..max_iters {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];
        if (values[worst] - values[best]).abs() < 1e-12 * (1.0 + values[best].abs()) {
            break;
        }
        let mut centroid = vec![0.0; n];
        for &i in order.iter().take(n) {
            for k in 0..n {
                centroid[k] += simplex[i][k] / n as f64;
            }
        }
        let reflect: Vec<f64> = (0..n).map(|k| 2.0 * centroid[k] - simplex[worst][k]).collect();
        let fr = f(&reflect);
        if fr < values[best] {
            let expand: Vec<f64> = (0..n).map(|k| 3.0 * centroid[k] - 2.0 * simplex[worst][k]).collect();
            let fe = f(&expand);
            if fe < fr {
                simplex[worst] = expand;
                values[worst] = fe;
            } else {
                simplex[worst] = reflect;
                values[worst] = fr;
            }
        } else if fr < values[second_worst] {
            simplex[worst] = reflect;
            values[worst] = fr;
        } else {
            let contract: Vec<f64> = (0..n)
                .map(|k| 0.5 * (centroid[k] + simplex[worst][k]))
                .collect();
            let fc = f(&contract);
            if fc < values[worst] {
                simplex[worst] = contract;
                values[worst] = fc;
            } else {
                // Shrink toward the best vertex.
                let anchor = simplex[best].clone();
                for i in 0..=n {
                    if i == best {
                        continue;
                    }
                    for k in 0..n {
                        simplex[i][k] = 0.5 * (simplex[i][k] + anchor[k]);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..=n {
        if values[i] < values[best] {
            best = i;
        }
    }
    (simplex[best].clone(), values[best])
}

fn rot3(params: &[f64]) -> Matrix3<f64> {
    let v = Vector3::new(params[0], params[1], params[2]);
    let angle = v.norm();
    if angle < 1e-14 {
        Matrix3::identity()
    } else {
        *Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(v), angle).matrix()
    }
}

fn build_map(
    dim: usize,
    group: AlignGroup,
    reflect: bool,
    params: &[f64],
    cf: Vector3<f64>,
    ce: Vector3<f64>,
) -> InvarianceMap {
    // Parameterization: A(x) = M (x - cF) + cE + t, with M = R * S, S a fixed
    // reflection when the reflected branch is searched.
    if dim == 2 {
        let rot = match group {
            AlignGroup::Translations => Matrix2::identity(),
            _ => {
                let a = params[0];
                Matrix2::new(a.cos(), -a.sin(), a.sin(), a.cos())
            }
        };
        let rot = if reflect { rot * Matrix2::new(-1.0, 0.0, 0.0, 1.0) } else { rot };
        let toff = match group {
            AlignGroup::Translations => Vector2::new(params[0], params[1]),
            _ => Vector2::new(params[1], params[2]),
        };
        let cf2 = Vector2::new(cf.x, cf.y);
        let ce2 = Vector2::new(ce.x, ce.y);
        InvarianceMap::D2(InvarianceMap2 {
            rotation: rot,
            translation: ce2 + toff - rot * cf2,
        })
    } else {
        let rot = match group {
            AlignGroup::Translations => Matrix3::identity(),
            _ => rot3(&params[0..3]),
        };
        let rot = if reflect {
            rot * Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0))
        } else {
            rot
        };
        let toff = match group {
            AlignGroup::Translations => Vector3::new(params[0], params[1], params[2]),
            _ => Vector3::new(params[3], params[4], params[5]),
        };
        InvarianceMap::D3(InvarianceMap3 { rotation: rot, translation: ce + toff - rot * cf })
    }
}

/// Align `F` to `E` over the chosen invariance group by derivative-free local
/// search on the symmetric difference.  Returns the best map and the residual
/// `|E delta A F|`, an upper bound on the true infimum.
pub fn align(e: &Shape, f: &Shape, group: AlignGroup) -> Result<(InvarianceMap, f64)> {
    let ve = e.volume()?;
    let vf = f.volume()?;
    if (ve - vf).abs() / ve.max(vf) > 0.01 {
        return Err(WulffError::Precondition(format!(
            "volumes differ by more than 1% ({ve} vs {vf})"
        )));
    }
    let dim = e.dimension();
    let ce = e.centroid();
    let cf = f.centroid();
    let scale = ve.powf(1.0 / dim as f64);

    let coarse_res = if dim == 2 { 96 } else { 32 };
    let fine_res = if dim == 2 { 192 } else { 64 };
    let n_params = match (dim, group) {
        (2, AlignGroup::Translations) => 2,
        (2, _) => 3,
        (_, AlignGroup::Translations) => 3,
        _ => 6,
    };
    let branches: &[bool] = match group {
        AlignGroup::RigidReflections => &[false, true],
        _ => &[false],
    };

    let mut best: Option<(InvarianceMap, f64)> = None;
    for &reflect in branches {
        // Coarse seeding over rotations (translation seeded by centroids).
        let mut seeds: Vec<Vec<f64>> = vec![vec![0.0; n_params]];
        if group != AlignGroup::Translations {
            if dim == 2 {
                for k in 1..16 {
                    let mut s = vec![0.0; n_params];
                    s[0] = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
                    seeds.push(s);
                }
            } else {
                let axes = crate::anisotropy::fibonacci_sphere(7);
                for axis in axes {
                    for k in 1..4 {
                        let mut s = vec![0.0; n_params];
                        let angle = std::f64::consts::PI / 2.0 * k as f64;
                        s[0] = axis.x * angle;
                        s[1] = axis.y * angle;
                        s[2] = axis.z * angle;
                        seeds.push(s);
                    }
                }
            }
        }
        let mut seed_best: Option<(Vec<f64>, f64)> = None;
        for s in seeds {
            let map = build_map(dim, group, reflect, &s, cf, ce);
            let (v, _) = symmetric_difference_mapped(e, f, Some(&map), coarse_res);
            if seed_best.as_ref().map_or(true, |(_, bv)| v < *bv) {
                seed_best = Some((s, v));
            }
        }
        let (seed, _) = seed_best.unwrap();
        let objective = |params: &[f64]| {
            let map = build_map(dim, group, reflect, params, cf, ce);
            symmetric_difference_mapped(e, f, Some(&map), coarse_res).0
        };
        let step = if group == AlignGroup::Translations { 0.1 * scale } else { 0.2 };
        let (params, _) = nelder_mead(objective, &seed, step, 160);
        // Polish translations at a finer step.
        let (params, _) = nelder_mead(
            |p| {
                let map = build_map(dim, group, reflect, p, cf, ce);
                symmetric_difference_mapped(e, f, Some(&map), coarse_res).0
            },
            &params,
            0.02 * scale,
            80,
        );
        let map = build_map(dim, group, reflect, &params, cf, ce);
        let (residual, _) = symmetric_difference_mapped(e, f, Some(&map), fine_res);
        if best.as_ref().map_or(true, |(_, bv)| residual < *bv) {
            best = Some((map, residual));
        }
    }
    let (map, residual) = best.unwrap();
    map.validate()?;
    Ok((map, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::{Star3, Shape};
    use nalgebra::Vector3;

    #[test]
    fn recovers_translation() {
        let e = Shape::Star3(Star3::ball(Vector3::zeros(), 1.0, 24, 48).unwrap());
        let f = Shape::Star3(
            Star3::ball(Vector3::new(1.0, 0.0, 0.0), 1.0, 24, 48).unwrap(),
        );
        let (map, residual) = align(&e, &f, AlignGroup::Translations).unwrap();
        let vol = e.volume().unwrap();
        assert!(residual < 0.02 * vol, "residual {residual} too large");
        let t = map.translation_part();
        assert!((t - Vector3::new(-1.0, 0.0, 0.0)).norm() < 0.1, "translation {t:?}");
    }

    #[test]
    fn identity_for_equal_balls() {
        let e = Shape::Star3(Star3::ball(Vector3::zeros(), 1.0, 24, 48).unwrap());
        let (map, residual) = align(&e, &e, AlignGroup::Rigid).unwrap();
        assert!(residual < 0.02 * e.volume().unwrap());
        map.validate().unwrap();
    }

    #[test]
    fn recovers_planted_rotation_of_ellipsoid() {
        let ellipsoid = |t: f64, p: f64| {
            let u = Vector3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos());
            1.0 / ((u.x / 1.0).powi(2) + (u.y / 1.0).powi(2) + (u.z / 2.0).powi(2)).sqrt()
        };
        let e = Shape::Star3(Star3::from_fn(Vector3::zeros(), 24, 48, ellipsoid).unwrap());
        // Same ellipsoid rotated 90 degrees about x: swap roles of y and z.
        let rotated = |t: f64, p: f64| {
            let u = Vector3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos());
            1.0 / ((u.x / 1.0).powi(2) + (u.z / 1.0).powi(2) + (u.y / 2.0).powi(2)).sqrt()
        };
        let f = Shape::Star3(Star3::from_fn(Vector3::zeros(), 24, 48, rotated).unwrap());
        let (_, residual) = align(&e, &f, AlignGroup::Rigid).unwrap();
        assert!(residual < 0.02 * e.volume().unwrap(), "residual {residual}");
    }
}
