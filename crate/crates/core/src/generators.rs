//! Seeded synthetic point clouds for every experiment scenario.
//!
//! All generators draw from a `ChaCha8Rng` seeded with `spec.seed`, so the
//! same spec always yields the same cloud on every platform.
//!
//! Parametrizations that are not pinned down elsewhere:
//!
//! * `curve-on-sphere` is the spherical spiral
//!   `polar(t) = pi/6 + (pi/3) t`, `azimuth(t) = 2 pi turns t`, `t = i / (n - 1)`,
//!   on the unit sphere of the first three coordinates. It is a fixed,
//!   reproducible degenerate 1-d initialization, not a canonical curve.
//! * `non-isotropic-gaussian` has standard deviation `std_major` on axis 0 and
//!   `std_minor` on the others, then rotates the `(0, 1)` plane by `angle`.
//! * `near-point` samples `e_1 + eps` with `eps` uniform in the ball of the given
//!   radius via `direction * radius * U^(1/d)`, which stays exact in high dimension.
//! * `von-mises-fisher` lives on `S^2` with its mode at `e_1`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TregError};
use crate::point_cloud::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    IsotropicGaussian,
    NearPoint,
    CurveOnSphere,
    CircleCollapsed,
    NonIsotropicGaussian,
    UniformCube,
    UniformSegment,
    UniformSphere,
    UniformHemisphere,
    VonMisesFisher,
    Sierpinski,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 11] = [
        GeneratorKind::IsotropicGaussian,
        GeneratorKind::NearPoint,
        GeneratorKind::CurveOnSphere,
        GeneratorKind::CircleCollapsed,
        GeneratorKind::NonIsotropicGaussian,
        GeneratorKind::UniformCube,
        GeneratorKind::UniformSegment,
        GeneratorKind::UniformSphere,
        GeneratorKind::UniformHemisphere,
        GeneratorKind::VonMisesFisher,
        GeneratorKind::Sierpinski,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::IsotropicGaussian => "isotropic-gaussian",
            GeneratorKind::NearPoint => "near-point",
            GeneratorKind::CurveOnSphere => "curve-on-sphere",
            GeneratorKind::CircleCollapsed => "circle-collapsed",
            GeneratorKind::NonIsotropicGaussian => "non-isotropic-gaussian",
            GeneratorKind::UniformCube => "uniform-cube",
            GeneratorKind::UniformSegment => "uniform-segment",
            GeneratorKind::UniformSphere => "uniform-sphere",
            GeneratorKind::UniformHemisphere => "uniform-hemisphere",
            GeneratorKind::VonMisesFisher => "von-mises-fisher",
            GeneratorKind::Sierpinski => "sierpinski",
        }
    }

    /// Accepted parameters and their defaults.
    pub fn param_defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            GeneratorKind::IsotropicGaussian => &[("std", 1.0)],
            GeneratorKind::NearPoint => &[("radius", 0.001)],
            GeneratorKind::CurveOnSphere => &[("turns", 1.5)],
            GeneratorKind::CircleCollapsed => &[("radius", 1.0)],
            GeneratorKind::NonIsotropicGaussian => &[("std_major", 2.0), ("std_minor", 0.5), ("angle", 0.0)],
            GeneratorKind::VonMisesFisher => &[("kappa", 10.0)],
            _ => &[],
        }
    }

    fn min_dim(self) -> usize {
        match self {
            GeneratorKind::CurveOnSphere => 3,
            GeneratorKind::CircleCollapsed
            | GeneratorKind::NonIsotropicGaussian
            | GeneratorKind::UniformSphere
            | GeneratorKind::UniformHemisphere
            | GeneratorKind::Sierpinski => 2,
            _ => 1,
        }
    }
}

impl std::str::FromStr for GeneratorKind {
    type Err = TregError;

    fn from_str(s: &str) -> Result<Self> {
        GeneratorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| TregError::Parse(format!("unknown generator `{s}`")))
    }
}

impl std::fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub d: usize,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, n: usize, d: usize, seed: u64) -> Self {
        Self { kind, n, d, params: BTreeMap::new(), seed }
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GeneratorSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Looks up a parameter, falling back to the kind's default.
    pub fn param(&self, name: &str) -> f64 {
        self.params.get(name).copied().unwrap_or_else(|| {
            self.kind
                .param_defaults()
                .iter()
                .find(|(k, _)| *k == name)
                .map(|&(_, v)| v)
                .unwrap_or(f64::NAN)
        })
    }

    /// Defaults for every accepted parameter, overlaid with the explicit ones.
    pub fn resolved_params(&self) -> BTreeMap<String, f64> {
        self.kind
            .param_defaults()
            .iter()
            .map(|&(k, _)| (k.to_string(), self.param(k)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(TregError::param("n", "must be at least 1"));
        }
        if self.d < self.kind.min_dim() {
            return Err(TregError::param(
                "d",
                format!("{} needs dimension >= {}, got {}", self.kind, self.kind.min_dim(), self.d),
            ));
        }
        if self.kind == GeneratorKind::VonMisesFisher && self.d != 3 {
            return Err(TregError::param("d", format!("von-mises-fisher is defined on S^2 (d = 3), got {}", self.d)));
        }
        let defaults = self.kind.param_defaults();
        for (name, value) in &self.params {
            if !defaults.iter().any(|(k, _)| k == name) {
                return Err(TregError::param("params", format!("{} does not accept `{name}`", self.kind)));
            }
            if !value.is_finite() {
                return Err(TregError::param("params", format!("`{name}` must be finite")));
            }
        }
        for positive in ["std", "radius", "std_major", "std_minor", "kappa"] {
            if defaults.iter().any(|(k, _)| *k == positive) && self.param(positive) <= 0.0 {
                return Err(TregError::param("params", format!("`{positive}` must be positive")));
            }
        }
        Ok(())
    }
}

pub fn generate(spec: &GeneratorSpec) -> Result<PointCloud> {
    spec.validate()?;
    let (n, d) = (spec.n, spec.d);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut data = vec![0.0; n * d];
    let rows = data.chunks_exact_mut(d);
    match spec.kind {
        GeneratorKind::IsotropicGaussian => {
            let std = spec.param("std");
            for row in rows {
                row.iter_mut().for_each(|x| *x = std * gauss(&mut rng));
            }
        }
        GeneratorKind::NearPoint => {
            let radius = spec.param("radius");
            for row in rows {
                uniform_in_ball(&mut rng, radius, row);
                row[0] += 1.0;
            }
        }
        GeneratorKind::CurveOnSphere => {
            let turns = spec.param("turns");
            for (i, row) in rows.enumerate() {
                let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
                let polar = PI / 6.0 + PI / 3.0 * t;
                let azimuth = 2.0 * PI * turns * t;
                row[0] = polar.sin() * azimuth.cos();
                row[1] = polar.sin() * azimuth.sin();
                row[2] = polar.cos();
            }
        }
        GeneratorKind::CircleCollapsed => {
            let radius = spec.param("radius");
            for row in rows {
                let theta = rng.random_range(0.0..2.0 * PI);
                row[0] = radius * theta.cos();
                row[1] = radius * theta.sin();
            }
        }
        GeneratorKind::NonIsotropicGaussian => {
            let (major, minor, angle) = (spec.param("std_major"), spec.param("std_minor"), spec.param("angle"));
            let (s, c) = angle.sin_cos();
            for row in rows {
                for (k, x) in row.iter_mut().enumerate() {
                    *x = if k == 0 { major } else { minor } * gauss(&mut rng);
                }
                let (a, b) = (row[0], row[1]);
                row[0] = c * a - s * b;
                row[1] = s * a + c * b;
            }
        }
        GeneratorKind::UniformCube => {
            for row in rows {
                row.iter_mut().for_each(|x| *x = rng.random::<f64>());
            }
        }
        GeneratorKind::UniformSegment => {
            for row in rows {
                row[0] = rng.random::<f64>();
            }
        }
        GeneratorKind::UniformSphere | GeneratorKind::UniformHemisphere => {
            for row in rows {
                unit_direction(&mut rng, row);
                if spec.kind == GeneratorKind::UniformHemisphere {
                    let last = row.len() - 1;
                    row[last] = row[last].abs();
                }
            }
        }
        GeneratorKind::VonMisesFisher => {
            let kappa = spec.param("kappa");
            for row in rows {
                // Inverse CDF of the cosine to the mode on S^2.
                let u: f64 = 1.0 - rng.random::<f64>();
                let w = (1.0 + (u + (1.0 - u) * (-2.0 * kappa).exp()).ln() / kappa).clamp(-1.0, 1.0);
                let phi = rng.random_range(0.0..2.0 * PI);
                let r = (1.0 - w * w).max(0.0).sqrt();
                row[0] = w;
                row[1] = r * phi.cos();
                row[2] = r * phi.sin();
            }
        }
        GeneratorKind::Sierpinski => {
            const VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.866_025_403_784_438_6]];
            // Start at the centroid and discard a burn-in; 2^-64 is far below f64 resolution.
            let mut p = [0.5, 0.288_675_134_594_812_9];
            let mut step = |p: &mut [f64; 2]| {
                let v = VERTICES[rng.random_range(0..3)];
                p[0] = 0.5 * (p[0] + v[0]);
                p[1] = 0.5 * (p[1] + v[1]);
            };
            for _ in 0..64 {
                step(&mut p);
            }
            for row in rows {
                step(&mut p);
                row[0] = p[0];
                row[1] = p[1];
            }
        }
    }
    PointCloud::from_flat(n, d, data)
}

#[inline]
fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn unit_direction(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    loop {
        out.iter_mut().for_each(|x| *x = gauss(rng));
        let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-300 {
            out.iter_mut().for_each(|x| *x /= norm);
            return;
        }
    }
}

fn uniform_in_ball(rng: &mut ChaCha8Rng, radius: f64, out: &mut [f64]) {
    unit_direction(rng, out);
    let r = radius * rng.random::<f64>().powf(1.0 / out.len() as f64);
    out.iter_mut().for_each(|x| *x *= r);
}
