//! Uniformity score, its four axiomatic properties, cosine statistics and
//! the dimensional-collapse sensitivity scan.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TregError};
use crate::generators::{generate, GeneratorKind, GeneratorSpec};
use crate::mst::mst_of;
use crate::point_cloud::{dot, PointCloud};
use crate::regularizers::loss_e;
use crate::stats::mean_std;

pub const COSINE_BINS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformityScore {
    /// `-raw_mst_length / normalizer`, never positive.
    pub value: f64,
    pub raw_mst_length: f64,
    pub dim: usize,
    /// Edge length of the regular `d`-simplex inscribed in the unit sphere, `sqrt(2(d+1)/d)`.
    pub normalizer: f64,
}

pub fn simplex_edge_length(d: usize) -> f64 {
    let d = d as f64;
    (2.0 * (d + 1.0) / d).sqrt()
}

pub fn u_treg(cloud: &PointCloud) -> Result<UniformityScore> {
    if cloud.n() < 2 {
        return Err(TregError::TooFewPoints { op: "u_treg", min: 2, n: cloud.n() });
    }
    let raw = mst_of(cloud).total_length;
    let normalizer = simplex_edge_length(cloud.dim());
    Ok(UniformityScore { value: -raw / normalizer, raw_mst_length: raw, dim: cloud.dim(), normalizer })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckOutcome {
    Pass,
    Fail,
    Skipped,
}

impl CheckOutcome {
    fn from_bool(ok: bool) -> Self {
        if ok {
            CheckOutcome::Pass
        } else {
            CheckOutcome::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == CheckOutcome::Pass
    }

    pub fn failed(self) -> bool {
        self == CheckOutcome::Fail
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformityChecks {
    /// `U(pi Z) == U(Z)` bit for bit.
    pub permutation: CheckOutcome,
    /// `U(Z, Z) == U(Z)` within `1e-9` relative.
    pub instance_cloning: CheckOutcome,
    /// `U(Z ⊕ Z) < U(Z)`.
    pub feature_cloning: CheckOutcome,
    /// `U(Z ⊕ 0^k) < U(Z)`.
    pub feature_baby: CheckOutcome,
    pub base: f64,
    pub permuted: f64,
    pub instance_cloned: f64,
    pub feature_cloned: f64,
    pub zero_padded: f64,
}

impl UniformityChecks {
    pub fn outcomes(&self) -> [(&'static str, CheckOutcome); 4] {
        [
            ("instance-permutation", self.permutation),
            ("instance-cloning", self.instance_cloning),
            ("feature-cloning", self.feature_cloning),
            ("feature-baby", self.feature_baby),
        ]
    }

    pub fn any_failed(&self) -> bool {
        self.outcomes().iter().any(|(_, o)| o.failed())
    }
}

/// Evaluates the four uniformity properties on `cloud`. The strict
/// inequalities are skipped for clouds whose MST length is zero.
pub fn check_uniformity_properties(cloud: &PointCloud, clone_extra_dims: usize) -> Result<UniformityChecks> {
    if clone_extra_dims == 0 {
        return Err(TregError::param("clone_extra_dims", "must be at least 1"));
    }
    let base = u_treg(cloud)?;
    let mut perm: Vec<usize> = (0..cloud.n()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(0x5eed));
    let permuted = u_treg(&cloud.permuted(&perm))?.value;
    let instance_cloned = u_treg(&cloud.concat_points(cloud)?)?.value;
    let feature_cloned = u_treg(&cloud.concat_features(cloud)?)?.value;
    let zero_padded = u_treg(&cloud.with_zero_columns(clone_extra_dims))?.value;

    let u = base.value;
    let degenerate = base.raw_mst_length == 0.0;
    let strict = |v: f64| if degenerate { CheckOutcome::Skipped } else { CheckOutcome::from_bool(v < u) };
    Ok(UniformityChecks {
        permutation: CheckOutcome::from_bool(permuted == u),
        instance_cloning: CheckOutcome::from_bool((instance_cloned - u).abs() <= 1e-9 * u.abs()),
        feature_cloning: strict(feature_cloned),
        feature_baby: strict(zero_padded),
        base: u,
        permuted,
        instance_cloned,
        feature_cloned,
        zero_padded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineStats {
    pub mean: f64,
    pub std: f64,
    /// Counts over 64 equal bins spanning `[-1, 1]`.
    pub histogram: Vec<u64>,
}

/// Statistics of the pairwise cosine similarities of the raw (uncentred) vectors.
pub fn cosine_stats(cloud: &PointCloud) -> Result<CosineStats> {
    let n = cloud.n();
    if n < 2 {
        return Err(TregError::TooFewPoints { op: "cosine_stats", min: 2, n });
    }
    let norms = cloud.norms();
    if let Some(i) = norms.iter().position(|&r| r == 0.0) {
        return Err(TregError::Degenerate(format!("point {i} is the zero vector")));
    }
    let cosines: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let norms = &norms;
            (i + 1..n).map(move |j| (dot(cloud.point(i), cloud.point(j)) / (norms[i] * norms[j])).clamp(-1.0, 1.0))
        })
        .collect();
    let mut histogram = vec![0u64; COSINE_BINS];
    for c in &cosines {
        let bin = (((c + 1.0) / 2.0) * COSINE_BINS as f64) as usize;
        histogram[bin.min(COSINE_BINS - 1)] += 1;
    }
    let (mean, std) = mean_std(&cosines);
    Ok(CosineStats { mean, std, histogram })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseScan {
    pub etas: Vec<f64>,
    /// `-L_E` after zeroing the trailing `floor(eta * d)` coordinates.
    pub scores: Vec<f64>,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
}

/// Number of coordinates zeroed at collapse level `eta`. A tolerance of
/// `1e-9` absorbs representation error such as `0.7 * 10 = 6.999...`.
pub fn collapsed_coords(eta: f64, d: usize) -> usize {
    ((eta * d as f64) + 1e-9).floor() as usize
}

pub fn collapse_scan(n: usize, d: usize, etas: &[f64], seed: u64) -> Result<CollapseScan> {
    if d < 2 {
        return Err(TregError::param("d", "collapse scan needs dimension >= 2"));
    }
    if n < 2 {
        return Err(TregError::TooFewPoints { op: "collapse_scan", min: 2, n });
    }
    if etas.is_empty() {
        return Err(TregError::param("etas", "at least one collapse level is required"));
    }
    if let Some(bad) = etas.iter().find(|e| !(0.0..1.0).contains(*e)) {
        return Err(TregError::param("etas", format!("{bad} is outside [0, 1)")));
    }
    if etas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(TregError::param("etas", "must be strictly increasing"));
    }
    let base = generate(&GeneratorSpec::new(GeneratorKind::IsotropicGaussian, n, d, seed))?;
    let scores = etas
        .par_iter()
        .map(|&eta| loss_e(&base.zero_trailing_coords(collapsed_coords(eta, d))).map(|(l, _)| -l))
        .collect::<Result<Vec<f64>>>()?;
    Ok(CollapseScan { etas: etas.to_vec(), scores, n, d, seed })
}

/// The default collapse grid `0, 0.1, ..., 0.9`.
pub fn default_etas() -> Vec<f64> {
    (0..10).map(|i| i as f64 / 10.0).collect()
}
