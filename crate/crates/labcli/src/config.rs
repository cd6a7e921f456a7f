//! Experiment configuration: JSON schema, catalog domains and point sets.

use std::f64::consts::PI;

use berezin_core::domains::Domain;
use berezin_core::quadrature::{QuadratureSpec, WeightedMeasure};
use berezin_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::opjson::OpNode;
use crate::LabError;

/// Seed used when neither the config nor the command line sets one.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    KernelCheck,
    InflationCheck,
    Moments,
    BerezinProfile,
    SemiCommutator,
    AxlerZheng,
    Classify,
    Constants,
    MassConcentration,
    Comparability,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::KernelCheck => "kernel-check",
            Experiment::InflationCheck => "inflation-check",
            Experiment::Moments => "moments",
            Experiment::BerezinProfile => "berezin-profile",
            Experiment::SemiCommutator => "semi-commutator",
            Experiment::AxlerZheng => "axler-zheng",
            Experiment::Classify => "classify",
            Experiment::Constants => "constants",
            Experiment::MassConcentration => "mass-concentration",
            Experiment::Comparability => "comparability",
        }
    }
}

/// A point of `C^n`, each coordinate written `[re, im]`.
pub type PointJson = Vec<[f64; 2]>;

pub fn to_point(p: &PointJson) -> Vec<C64> {
    p.iter().map(|c| C64::new(c[0], c[1])).collect()
}

/// A catalog domain, either by bare name or with parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DomainSpec {
    Name(String),
    Params(DomainParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainParams {
    pub name: String,
    /// Dimension of `ball`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Exponent of `egg` and `polydisk`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    /// Exponents `a_j` of `power-sum`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<Vec<f64>>,
    /// Outer power `q` of `power-sum` (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
}

impl DomainSpec {
    pub fn build(&self) -> Result<Domain, LabError> {
        let params = match self {
            DomainSpec::Name(name) => DomainParams {
                name: name.clone(),
                n: None,
                m: None,
                exponents: None,
                q: None,
            },
            DomainSpec::Params(p) => p.clone(),
        };
        let need_m = || {
            params
                .m
                .ok_or_else(|| LabError::Config(format!("domain `{}` needs the parameter `m`", params.name)))
        };
        let domain = match params.name.as_str() {
            "disk" => Domain::disk(),
            // ρ = |z| − 1, whose weight (1 − |z|)^r is comparable to (1 − |z|²)^r
            "disk-linear" => Domain::power_sum_domain("disk-linear", vec![1.0], 0.5)?,
            "ball" => Domain::ball(params.n.unwrap_or(2))?,
            "egg" => Domain::egg(need_m()?)?,
            "polydisk" | "smoothed-polydisk" => Domain::smoothed_polydisk(need_m()?)?,
            "power-sum" => {
                let exps = params
                    .exponents
                    .clone()
                    .ok_or_else(|| LabError::Config("domain `power-sum` needs `exponents`".into()))?;
                Domain::power_sum_domain("power-sum", exps, params.q.unwrap_or(1.0))?
            }
            other => {
                return Err(LabError::Config(format!(
                    "unknown domain `{other}` (expected disk, disk-linear, ball, egg, polydisk or power-sum)"
                )))
            }
        };
        Ok(domain)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case", deny_unknown_fields)]
pub enum QuadratureConfig {
    Default,
    PolarTensor { radial: usize, angular: usize },
    Radial { radial: usize },
    MonteCarlo { samples: usize, seed: Option<u64> },
}

impl QuadratureConfig {
    pub fn spec(&self, seed: u64) -> QuadratureSpec {
        match *self {
            QuadratureConfig::Default => QuadratureSpec::Default,
            QuadratureConfig::PolarTensor { radial, angular } => QuadratureSpec::PolarTensor { radial, angular },
            QuadratureConfig::Radial { radial } => QuadratureSpec::Radial { radial },
            QuadratureConfig::MonteCarlo { samples, seed: s } => QuadratureSpec::MonteCarlo {
                samples,
                seed: s.unwrap_or(seed),
            },
        }
    }
}

/// Sample point sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridSpec {
    /// `size × size` lattice on `[-radius, radius]²` kept where `|z| <= radius`
    /// (planar domains only).
    Lattice { size: usize, radius: f64 },
    /// Seeded points `t·b(u)` with `b(u)` the boundary point in a random direction
    /// and `t` in `[0, radius]`, area-uniform in `t`.
    Random { count: usize, radius: f64 },
    /// Boundary points in `count` directions: equally spaced angles in the plane;
    /// coordinate axes followed by seeded random directions otherwise.
    Boundary { count: usize },
}

impl GridSpec {
    pub fn points(&self, domain: &Domain, seed: u64) -> Result<Vec<Vec<C64>>, LabError> {
        let n = domain.dim();
        match *self {
            GridSpec::Lattice { size, radius } => {
                if n != 1 {
                    return Err(LabError::Config("lattice grids are planar; use `random` for n > 1".into()));
                }
                if size < 2 {
                    return Err(LabError::Config("lattice size must be at least 2".into()));
                }
                let step = 2.0 * radius / (size - 1) as f64;
                let mut out = Vec::new();
                for i in 0..size {
                    for j in 0..size {
                        let z = C64::new(-radius + step * i as f64, -radius + step * j as f64);
                        if z.norm() <= radius * (1.0 + 1e-12) && domain.contains(&[z]) {
                            out.push(vec![z]);
                        }
                    }
                }
                Ok(out)
            }
            GridSpec::Random { count, radius } => {
                if !(radius > 0.0 && radius < 1.0) {
                    return Err(LabError::Config("random grid radius must lie in (0, 1)".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..count)
                    .map(|_| {
                        let b = domain.boundary_point(&random_direction(&mut rng, n))?;
                        let t = radius * rng.random::<f64>().powf(0.5 / n as f64);
                        Ok(b.iter().map(|c| c * t).collect())
                    })
                    .collect()
            }
            GridSpec::Boundary { count } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..count)
                    .map(|k| {
                        let dir: Vec<C64> = if n == 1 {
                            vec![C64::from_polar(1.0, 2.0 * PI * k as f64 / count as f64)]
                        } else if k < n {
                            (0..n).map(|j| C64::new(if j == k { 1.0 } else { 0.0 }, 0.0)).collect()
                        } else {
                            random_direction(&mut rng, n)
                        };
                        Ok(domain.boundary_point(&dir)?)
                    })
                    .collect()
            }
        }
    }
}

fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-3 && norm <= 0.5 {
            return v.into_iter().map(|c| c / norm).collect();
        }
    }
}

/// Decision thresholds of the compactness report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vanish: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
}

/// Second weight of a comparability experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    pub domain: DomainSpec,
    pub r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    /// Comparability constant of the two weights.
    pub c: f64,
}

/// Excluded neighbourhood `U = {|w − center| < radius}` of a mass experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub center: PointJson,
    pub radius: f64,
}

macro_rules! config_struct {
    ($(#[$meta:meta])* pub struct $name:ident { $($(#[$fmeta:meta])* $field:ident : $ty:ty,)* }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            $(
                $(#[$fmeta])*
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }
    };
}

config_struct! {
    /// Everything an experiment reads. Absent keys take experiment defaults.
    pub struct ExperimentConfig {
        experiment: Experiment,
        domain: DomainSpec,
        r: f64,
        /// Truncation degree.
        #[serde(rename = "N")]
        n: u32,
        /// Inflation fiber dimension or Monte Carlo dimension.
        p: usize,
        /// `(p, r)` pairs of the constants experiment.
        cases: Vec<(usize, f64)>,
        /// Constant factor of the measure.
        scale: f64,
        quadrature: QuadratureConfig,
        operator: OpNode,
        /// Symbol lists for semi-commutator checks, each written left to right.
        symbols: Vec<Vec<String>>,
        /// Enumerate monomial symbols up to this total degree.
        monomial_degree: u32,
        /// Longest product when enumerating monomials (2 or 3).
        max_factors: usize,
        points: Vec<PointJson>,
        strong_points: Vec<PointJson>,
        weak_points: Vec<PointJson>,
        /// Classify this many boundary points and use them as strong/weak points.
        auto_classify: usize,
        grid: GridSpec,
        t_grid: Vec<f64>,
        seed: u64,
        samples: usize,
        thresholds: Thresholds,
        tolerance: f64,
        compare: CompareSpec,
        region: RegionSpec,
        /// Output directory.
        out: String,
    }
}

impl ExperimentConfig {
    /// Parses JSON; errors carry the line, column and offending field.
    pub fn from_json(src: &str) -> Result<Self, LabError> {
        serde_json::from_str(src).map_err(|e| LabError::Config(format!("invalid configuration: {e}")))
    }

    /// Canonical serialization: fields in declaration order, absent keys omitted.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configuration is serializable")
    }

    /// SHA-256 of the canonical serialization, hex encoded. The output path is
    /// left out so that relocating a run keeps its hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let digest = Sha256::digest(c.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn domain(&self) -> Result<Domain, LabError> {
        self.domain
            .as_ref()
            .ok_or_else(|| LabError::Config("missing `domain`".into()))?
            .build()
    }

    pub fn r(&self) -> f64 {
        self.r.unwrap_or(0.0)
    }

    pub fn measure(&self) -> Result<WeightedMeasure, LabError> {
        let m = WeightedMeasure::new(self.domain()?, self.r())?;
        Ok(match self.scale {
            Some(c) => m.scaled(c)?,
            None => m,
        })
    }

    pub fn points_or(&self, default: &GridSpec, domain: &Domain) -> Result<Vec<Vec<C64>>, LabError> {
        if let Some(p) = &self.points {
            return Ok(p.iter().map(to_point).collect());
        }
        self.grid.as_ref().unwrap_or(default).points(domain, self.seed())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_configs() {
        let c = ExperimentConfig::from_json(r#"{"experiment":"kernel-check","domain":"disk","r":0,"N":64}"#).unwrap();
        assert_eq!(c.experiment, Some(Experiment::KernelCheck));
        assert_eq!(c.n, Some(64));
        assert_eq!(c.domain().unwrap().dim(), 1);
        let c = ExperimentConfig::from_json(r#"{"domain":{"name":"egg","m":2},"grid":{"kind":"boundary","count":4}}"#).unwrap();
        assert_eq!(c.domain().unwrap().dim(), 2);
        assert_eq!(c.grid, Some(GridSpec::Boundary { count: 4 }));
    }

    #[test]
    fn rejects_unknown_fields_with_location() {
        let e = ExperimentConfig::from_json("{\n  \"r\": 1,\n  \"bogus\": 2\n}").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("bogus") && msg.contains("line 3"), "{msg}");
        assert!(ExperimentConfig::from_json(r#"{"grid":{"kind":"lattice","size":3,"radius":0.5,"x":1}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"domain":{"name":"egg","k":2}}"#).is_err());
        assert!(ExperimentConfig::from_json("{").is_err());
    }

    #[test]
    fn hash_is_canonical() {
        let a = ExperimentConfig::from_json(r#"{"r":1,"domain":"disk"}"#).unwrap();
        let b = ExperimentConfig::from_json(r#"{ "domain" : "disk",  "r" : 1.0 }"#).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let c = ExperimentConfig::from_json(r#"{"r":2,"domain":"disk"}"#).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn grids() {
        let d = Domain::disk();
        let lat = GridSpec::Lattice { size: 10, radius: 0.8 }.points(&d, 1).unwrap();
        assert_eq!(lat.len(), 60);
        let rnd = GridSpec::Random { count: 50, radius: 0.95 }.points(&d, 7).unwrap();
        assert_eq!(rnd.len(), 50);
        assert!(rnd.iter().all(|z| z[0].norm() <= 0.95 + 1e-12));
        assert_eq!(rnd, GridSpec::Random { count: 50, radius: 0.95 }.points(&d, 7).unwrap());
        let egg = Domain::egg(2).unwrap();
        let b = GridSpec::Boundary { count: 6 }.points(&egg, 3).unwrap();
        assert!((b[0][0] - C64::new(1.0, 0.0)).norm() < 1e-9);
        assert!(b.iter().all(|p| egg.rho(p).abs() < 1e-9));
    }
}
