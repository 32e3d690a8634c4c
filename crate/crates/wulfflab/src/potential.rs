//! Confining potentials `g >= 0` with `g(0) = 0`, their derivatives, and
//! convexity audits.  The catalog spans coercive and non-coercive, convex and
//! deliberately non-convex cases.

use crate::error::{Result, WulffError};
use nalgebra::{SMatrix, SVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

type CustomEval<const N: usize> = Arc<dyn Fn(&SVector<f64, N>) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum PotentialKind<const N: usize> {
    /// `g = 0`.
    Zero,
    /// Radial monotone `|x|^k`, k in {1, 2, 4}.
    RadialPower { k: u32 },
    /// Gravitational `rho * max(x_n, 0)` with the last coordinate as height.
    Gravity { rho: f64 },
    /// Zero on the ball of radius `r0`, quadratic in the excess distance.
    FlatBottom { r0: f64 },
    /// `min(|x - a|^2, |x + a|^2)`: non-convex negative control.
    DoubleWell { offset: SVector<f64, N> },
    Custom { value: CustomEval<N>, convex: bool, coercive: bool },
}

#[derive(Clone)]
pub struct Potential<const N: usize> {
    pub kind: PotentialKind<N>,
    pub declared_convex: bool,
    pub coercive: bool,
}

impl<const N: usize> std::fmt::Debug for Potential<N> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match &self.kind {
            PotentialKind::Zero => "zero",
            PotentialKind::RadialPower { k } => return write!(f, "Potential<{N}>(radial |x|^{k})"),
            PotentialKind::Gravity { .. } => "gravity",
            PotentialKind::FlatBottom { .. } => "flat_bottom",
            PotentialKind::DoubleWell { .. } => "double_well",
            PotentialKind::Custom { .. } => "custom",
        };
        write!(f, "Potential<{N}>({name})")
    }
}

#[derive(Debug, Clone)]
pub struct PotentialEval<const N: usize> {
    pub value: f64,
    pub gradient: Option<SVector<f64, N>>,
    pub hessian: Option<SMatrix<f64, N, N>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvexityMethod {
    HessianEigenvalues,
    MidpointSampling,
}

#[derive(Debug, Clone)]
pub struct ConvexityReport {
    pub min_hessian_eig: f64,
    pub pass: bool,
    pub method: ConvexityMethod,
}

impl<const N: usize> Potential<N> {
    pub fn zero() -> Self {
        Potential { kind: PotentialKind::Zero, declared_convex: true, coercive: false }
    }

    pub fn radial_power(k: u32) -> Result<Self> {
        if !matches!(k, 1 | 2 | 4) {
            return Err(WulffError::Domain(format!("radial power k must be 1, 2 or 4, got {k}")));
        }
        Ok(Potential { kind: PotentialKind::RadialPower { k }, declared_convex: true, coercive: true })
    }

    pub fn gravity(rho: f64) -> Self {
        Potential { kind: PotentialKind::Gravity { rho }, declared_convex: true, coercive: false }
    }

    pub fn flat_bottom(r0: f64) -> Self {
        Potential { kind: PotentialKind::FlatBottom { r0 }, declared_convex: true, coercive: true }
    }

    pub fn double_well(offset: SVector<f64, N>) -> Self {
        Potential {
            kind: PotentialKind::DoubleWell { offset },
            declared_convex: false,
            coercive: true,
        }
    }

    pub fn custom(value: CustomEval<N>, convex: bool, coercive: bool) -> Self {
        Potential {
            kind: PotentialKind::Custom { value, convex, coercive },
            declared_convex: convex,
            coercive,
        }
    }

    pub fn value(&self, x: &SVector<f64, N>) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::RadialPower { k } => x.norm().powi(*k as i32),
            PotentialKind::Gravity { rho } => rho * x[N - 1].max(0.0),
            PotentialKind::FlatBottom { r0 } => {
                let d = (x.norm() - r0).max(0.0);
                d * d
            }
            PotentialKind::DoubleWell { offset } => {
                ((x - offset).norm_squared()).min((x + offset).norm_squared())
            }
            PotentialKind::Custom { value, .. } => value(x),
        }
    }

    pub fn gradient(&self, x: &SVector<f64, N>) -> SVector<f64, N> {
        match &self.kind {
            PotentialKind::Zero => SVector::zeros(),
            PotentialKind::RadialPower { k } => {
                let r = x.norm();
                if r < 1e-300 {
                    SVector::zeros()
                } else {
                    x * (*k as f64 * r.powi(*k as i32 - 2))
                }
            }
            PotentialKind::Gravity { rho } => {
                let mut g = SVector::zeros();
                if x[N - 1] > 0.0 {
                    g[N - 1] = *rho;
                }
                g
            }
            PotentialKind::FlatBottom { r0 } => {
                let r = x.norm();
                if r <= *r0 || r < 1e-300 {
                    SVector::zeros()
                } else {
                    x * (2.0 * (r - r0) / r)
                }
            }
            PotentialKind::DoubleWell { offset } => {
                if (x - offset).norm_squared() <= (x + offset).norm_squared() {
                    (x - offset) * 2.0
                } else {
                    (x + offset) * 2.0
                }
            }
            PotentialKind::Custom { .. } => self.fd_gradient(x),
        }
    }

    fn fd_gradient(&self, x: &SVector<f64, N>) -> SVector<f64, N> {
        let h = 1e-6 * (1.0 + x.norm());
        SVector::from_fn(|i, _| {
            let mut xp = *x;
            let mut xm = *x;
            xp[i] += h;
            xm[i] -= h;
            (self.value(&xp) - self.value(&xm)) / (2.0 * h)
        })
    }

    pub fn hessian(&self, x: &SVector<f64, N>) -> Option<SMatrix<f64, N, N>> {
        match &self.kind {
            PotentialKind::Zero => Some(SMatrix::zeros()),
            PotentialKind::RadialPower { k } => {
                let r = x.norm();
                if r < 1e-12 && *k != 2 {
                    return None; // cone / degenerate vertex
                }
                let k = *k as f64;
                if k == 2.0 {
                    return Some(SMatrix::identity() * 2.0);
                }
                let u = x / r;
                let id = SMatrix::<f64, N, N>::identity();
                Some(
                    (id - u * u.transpose()) * (k * r.powf(k - 2.0))
                        + u * u.transpose() * (k * (k - 1.0) * r.powf(k - 2.0)),
                )
            }
            PotentialKind::Gravity { .. } => Some(SMatrix::zeros()),
            PotentialKind::FlatBottom { r0 } => {
                let r = x.norm();
                if r < *r0 {
                    return Some(SMatrix::zeros());
                }
                if (r - r0).abs() < 1e-12 || r < 1e-300 {
                    return None;
                }
                let u = x / r;
                let id = SMatrix::<f64, N, N>::identity();
                Some(
                    (id - u * u.transpose()) * (2.0 * (r - r0) / r) + u * u.transpose() * 2.0,
                )
            }
            PotentialKind::DoubleWell { .. } => Some(SMatrix::identity() * 2.0),
            PotentialKind::Custom { .. } => None,
        }
    }

    pub fn eval(&self, x: &SVector<f64, N>, order: u8) -> PotentialEval<N> {
        PotentialEval {
            value: self.value(x),
            gradient: if order >= 1 { Some(self.gradient(x)) } else { None },
            hessian: if order >= 2 { self.hessian(x) } else { None },
        }
    }

    /// Supremum of `g` over the ball of radius `radius`, by dense sampling
    /// with a 2x safety factor (it only enters inequality constants).
    pub fn sup_on_ball(&self, radius: f64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut best: f64 = 0.0;
        for _ in 0..4096 {
            let x = SVector::<f64, N>::from_fn(|_, _| rng.gen_range(-1.0..1.0)) * radius;
            if x.norm() <= radius {
                best = best.max(self.value(&x));
            }
        }
        // Boundary samples, where radial potentials peak.
        for d in crate::anisotropy::sample_unit_directions::<N>(256) {
            best = best.max(self.value(&(d * radius)));
        }
        2.0 * best
    }

    /// Convexity audit on `[-half_width, half_width]^N`: Hessian eigenvalue
    /// sampling when available, midpoint sampling otherwise.
    pub fn check_convexity(&self, half_width: f64, samples: usize) -> Result<ConvexityReport> {
        if samples < 10 {
            return Err(WulffError::Precondition("need at least 10 samples".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0xc0ffee);
        let mut pts = Vec::with_capacity(samples);
        for _ in 0..samples {
            pts.push(SVector::<f64, N>::from_fn(|_, _| rng.gen_range(-half_width..half_width)));
        }
        let hessian_ok = pts.iter().all(|x| self.hessian(x).is_some());
        if hessian_ok {
            let mut min_eig = f64::INFINITY;
            for x in &pts {
                let h = self.hessian(x).unwrap();
                min_eig = min_eig.min(min_symmetric_eigenvalue(&h));
            }
            Ok(ConvexityReport {
                min_hessian_eig: min_eig,
                pass: min_eig >= -1e-8,
                method: ConvexityMethod::HessianEigenvalues,
            })
        } else {
            // Midpoint convexity: g((x+y)/2) <= (g(x)+g(y))/2.
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..samples.max(10_000) {
                let x = SVector::<f64, N>::from_fn(|_, _| rng.gen_range(-half_width..half_width));
                let y = SVector::<f64, N>::from_fn(|_, _| rng.gen_range(-half_width..half_width));
                let lhs = self.value(&((x + y) / 2.0));
                let rhs = (self.value(&x) + self.value(&y)) / 2.0;
                worst = worst.max(lhs - rhs);
            }
            Ok(ConvexityReport {
                min_hessian_eig: -worst,
                pass: worst <= 1e-8 * (1.0 + half_width * half_width),
                method: ConvexityMethod::MidpointSampling,
            })
        }
    }

    /// Midpoint convexity of the sub-level sets `{g < t}` for each level.
    /// Empty levels report a vacuous pass.
    pub fn check_sublevel_convexity(
        &self,
        levels: &[f64],
        half_width: f64,
        samples: usize,
    ) -> Result<Vec<(f64, bool)>> {
        if levels.is_empty() {
            return Err(WulffError::Precondition("levels must be nonempty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5ab1e);
        let mut out = Vec::with_capacity(levels.len());
        for &t in levels {
            let mut inside = Vec::new();
            for _ in 0..samples.max(20_000) {
                let x = SVector::<f64, N>::from_fn(|_, _| rng.gen_range(-half_width..half_width));
                if self.value(&x) < t {
                    inside.push(x);
                }
            }
            if inside.len() < 2 {
                out.push((t, true)); // vacuous
                continue;
            }
            let mut ok = true;
            for _ in 0..samples.max(10_000) {
                let x = inside[rng.gen_range(0..inside.len())];
                let y = inside[rng.gen_range(0..inside.len())];
                if self.value(&((x + y) / 2.0)) >= t {
                    ok = false;
                    break;
                }
            }
            out.push((t, ok));
        }
        Ok(out)
    }
}

fn min_symmetric_eigenvalue<const N: usize>(h: &SMatrix<f64, N, N>) -> f64 {
    let dm = nalgebra::DMatrix::from_fn(N, N, |i, j| h[(i, j)]);
    dm.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}
