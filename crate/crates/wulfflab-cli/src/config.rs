//! Strict, versioned JSON run configurations.  Unknown keys are rejected so
//! a config file is an exact, auditable record of what a run computed.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use wulfflab::anisotropy::Tension;
use wulfflab::optimizer::Seed;
use wulfflab::potential::Potential;
use wulfflab::stability::StabilityConfig;

pub const CONFIG_VERSION: u32 = 1;

// Externally tagged (`"euclidean"` or `{"ellipsoidal": {...}}`): the only
// serde representation in which `deny_unknown_fields` reaches the variant
// payloads, keeping nested config keys strict too.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum TensionSpec {
    Euclidean,
    /// `f(v) = sqrt(v . diag(d) v)`.
    Ellipsoidal { diag: [f64; 3] },
    /// Smoothed l^p norm.
    SmoothLp { p: f64, eps: f64 },
}

impl TensionSpec {
    pub fn build(&self) -> Result<Tension<3>, String> {
        match self {
            TensionSpec::Euclidean => Ok(Tension::euclidean()),
            TensionSpec::Ellipsoidal { diag } => {
                if diag.iter().any(|&d| !(d > 0.0)) {
                    return Err("ellipsoidal tension needs positive diagonal entries".into());
                }
                Ok(Tension::ellipsoidal(Matrix3::from_diagonal(&Vector3::new(
                    diag[0], diag[1], diag[2],
                ))))
            }
            TensionSpec::SmoothLp { p, eps } => {
                Tension::smooth_lp(*p, *eps).map_err(|e| e.to_string())
            }
        }
    }

    pub fn build_2d(&self) -> Result<Tension<2>, String> {
        match self {
            TensionSpec::Euclidean => Ok(Tension::euclidean()),
            TensionSpec::SmoothLp { p, eps } => {
                Tension::smooth_lp(*p, *eps).map_err(|e| e.to_string())
            }
            TensionSpec::Ellipsoidal { .. } => {
                Err("ellipsoidal tension spec is three-dimensional".into())
            }
        }
    }

    pub fn parse_flag(s: &str) -> Result<Self, String> {
        // Flag grammar: `euclidean`, `ellipsoidal:a,b,c`, `smooth-lp:p,eps`.
        let (kind, args) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        match kind {
            "euclidean" => Ok(TensionSpec::Euclidean),
            "ellipsoidal" => {
                let d = parse_floats(args.ok_or("ellipsoidal needs :a,b,c")?)?;
                if d.len() != 3 {
                    return Err("ellipsoidal needs exactly three diagonal entries".into());
                }
                Ok(TensionSpec::Ellipsoidal { diag: [d[0], d[1], d[2]] })
            }
            "smooth-lp" => {
                let d = parse_floats(args.ok_or("smooth-lp needs :p,eps")?)?;
                if d.len() != 2 {
                    return Err("smooth-lp needs exactly p,eps".into());
                }
                Ok(TensionSpec::SmoothLp { p: d[0], eps: d[1] })
            }
            other => Err(format!("unknown tension kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero,
    /// `g(x) = |x|^power`.
    RadialPower { power: u32 },
    /// `g(x) = rho * x_3^+` (zero below the floor plane).
    Gravity { rho: f64 },
    /// Zero inside the ball of `radius`, quadratic growth outside.
    FlatBottom { radius: f64 },
    /// Non-convex two-well potential with wells at `+-offset`.
    DoubleWell { offset: [f64; 3] },
}

impl PotentialSpec {
    pub fn build(&self) -> Result<Potential<3>, String> {
        match self {
            PotentialSpec::Zero => Ok(Potential::zero()),
            PotentialSpec::RadialPower { power } => {
                Potential::radial_power(*power).map_err(|e| e.to_string())
            }
            PotentialSpec::Gravity { rho } => Ok(Potential::gravity(*rho)),
            PotentialSpec::FlatBottom { radius } => Ok(Potential::flat_bottom(*radius)),
            PotentialSpec::DoubleWell { offset } => Ok(Potential::double_well(Vector3::new(
                offset[0], offset[1], offset[2],
            ))),
        }
    }

    pub fn build_2d(&self) -> Result<Potential<2>, String> {
        match self {
            PotentialSpec::Zero => Ok(Potential::zero()),
            PotentialSpec::RadialPower { power } => {
                Potential::radial_power(*power).map_err(|e| e.to_string())
            }
            PotentialSpec::FlatBottom { radius } => Ok(Potential::flat_bottom(*radius)),
            _ => Err("this potential spec is three-dimensional".into()),
        }
    }

    pub fn parse_flag(s: &str) -> Result<Self, String> {
        let (kind, args) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        match kind {
            "zero" => Ok(PotentialSpec::Zero),
            "radial-quadratic" => Ok(PotentialSpec::RadialPower { power: 2 }),
            "radial-power" => {
                let p: u32 = args
                    .ok_or("radial-power needs :k")?
                    .parse()
                    .map_err(|_| "radial-power exponent must be an integer")?;
                Ok(PotentialSpec::RadialPower { power: p })
            }
            "gravity" => {
                let d = parse_floats(args.unwrap_or("1.0"))?;
                Ok(PotentialSpec::Gravity { rho: d[0] })
            }
            "flat-bottom" => {
                let d = parse_floats(args.ok_or("flat-bottom needs :radius")?)?;
                Ok(PotentialSpec::FlatBottom { radius: d[0] })
            }
            "double-well" => {
                let d = parse_floats(args.ok_or("double-well needs :x,y,z")?)?;
                if d.len() != 3 {
                    return Err("double-well needs exactly three offset entries".into());
                }
                Ok(PotentialSpec::DoubleWell { offset: [d[0], d[1], d[2]] })
            }
            other => Err(format!("unknown potential kind `{other}`")),
        }
    }
}

fn parse_floats(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("not a number: `{t}`")))
        .collect()
}

/// Mass grids: either an explicit comma list or `lo:hi:n` (log-spaced).
pub fn parse_masses(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = parts[0].parse().map_err(|_| "bad mass range start")?;
        let hi: f64 = parts[1].parse().map_err(|_| "bad mass range end")?;
        let n: usize = parts[2].parse().map_err(|_| "bad mass range count")?;
        if !(lo > 0.0) || !(hi > lo) || n < 2 {
            return Err("mass range needs 0 < lo < hi and n >= 2".into());
        }
        let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
        return Ok((0..n).map(|k| lo * ratio.powi(k as i32)).collect());
    }
    let m = parse_floats(s)?;
    if m.is_empty() || m.iter().any(|&x| !(x > 0.0)) {
        return Err("masses must be positive".into());
    }
    Ok(m)
}

pub fn parse_starts(items: &[String]) -> Result<Vec<Seed>, String> {
    items
        .iter()
        .map(|s| match s.as_str() {
            "ball" => Ok(Seed::Ball),
            "wulff" => Ok(Seed::Wulff),
            other => match other.strip_prefix("random:") {
                Some(k) => k
                    .parse::<u64>()
                    .map(Seed::Random)
                    .map_err(|_| format!("bad random start index `{k}`")),
                None => Err(format!("unknown start `{other}`")),
            },
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ResolutionSpec {
    pub n_theta: usize,
    pub n_phi: usize,
    #[serde(default = "default_n_rays")]
    pub n_rays: usize,
}

fn default_n_rays() -> usize {
    96
}

impl Default for ResolutionSpec {
    fn default() -> Self {
        ResolutionSpec { n_theta: 24, n_phi: 48, n_rays: 96 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct WulffConfig {
    pub version: u32,
    pub tension: TensionSpec,
    pub mass: f64,
    #[serde(default)]
    pub resolution: ResolutionSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct MinimizeConfig {
    pub version: u32,
    pub tension: TensionSpec,
    pub potential: PotentialSpec,
    pub mass: f64,
    #[serde(default)]
    pub resolution: ResolutionSpec,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
    #[serde(default = "default_starts")]
    pub starts: Vec<String>,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_max_iters() -> usize {
    1000
}
fn default_residual_tol() -> f64 {
    0.02
}
fn default_starts() -> Vec<String> {
    vec!["wulff".into(), "ball".into(), "random:0".into(), "random:1".into()]
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SweepConfig {
    pub version: u32,
    pub tension: TensionSpec,
    pub potential: PotentialSpec,
    pub masses: Vec<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_defect_tol")]
    pub defect_tol: f64,
    #[serde(default)]
    pub resolution: ResolutionSpec,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_sweep_starts")]
    pub starts: Vec<String>,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_epsilon() -> f64 {
    0.1
}
fn default_defect_tol() -> f64 {
    1e-2
}
fn default_sweep_starts() -> Vec<String> {
    vec!["ball".into(), "random:0".into()]
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ModulusConfig {
    pub version: u32,
    pub tension: TensionSpec,
    pub potential: PotentialSpec,
    pub masses: Vec<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// 2 or 3; selects the planar or spatial estimator.
    #[serde(default = "default_dimension")]
    pub dimension: u32,
    #[serde(default)]
    pub resolution: ResolutionSpec,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_modulus_starts")]
    pub starts: Vec<String>,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_budget() -> usize {
    60
}
fn default_dimension() -> u32 {
    3
}
fn default_modulus_starts() -> Vec<String> {
    vec!["ball".into()]
}

impl ModulusConfig {
    pub fn stability(&self) -> Result<StabilityConfig, String> {
        Ok(StabilityConfig {
            n_theta: self.resolution.n_theta,
            n_phi: self.resolution.n_phi,
            n_rays: self.resolution.n_rays,
            max_iters: self.max_iters,
            rng_seed: self.rng_seed,
            starts: parse_starts(&self.starts)?,
        })
    }
}

impl SweepConfig {
    pub fn stability(&self) -> Result<StabilityConfig, String> {
        Ok(StabilityConfig {
            n_theta: self.resolution.n_theta,
            n_phi: self.resolution.n_phi,
            n_rays: self.resolution.n_rays,
            max_iters: self.max_iters,
            rng_seed: self.rng_seed,
            starts: parse_starts(&self.starts)?,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct GraphpdeConfig {
    pub version: u32,
    /// `manufactured-paraboloid`, `manufactured-ruled`, `manufactured-quartic`
    /// or `cap` (prescribed curvature with `g = |x|^2` on the unit disk).
    pub case: String,
    /// Grid spacings; a convergence table is produced when more than one.
    pub h: Vec<f64>,
    /// Curvature scalar for the `cap` case (ignored by manufactured cases).
    #[serde(default = "default_cap_mu")]
    pub mu: f64,
}

fn default_cap_mu() -> f64 {
    2.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct AlignConfig {
    pub version: u32,
    pub tension: TensionSpec,
    pub mass: f64,
    /// `translations` or `rigid`.
    #[serde(default = "default_group")]
    pub group: String,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub resolution: ResolutionSpec,
}

fn default_group() -> String {
    "rigid".into()
}

pub fn check_version(v: u32) -> Result<(), String> {
    if v != CONFIG_VERSION {
        return Err(format!("unsupported config version {v}, expected {CONFIG_VERSION}"));
    }
    Ok(())
}

/// Parse a strict JSON config from a file.
pub fn load<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| {
        format!("config {} line {} column {}: {e}", path.display(), e.line(), e.column())
    })
}
