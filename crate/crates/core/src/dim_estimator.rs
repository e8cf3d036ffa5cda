//! Intrinsic dimension from the growth rate of MST length.
//!
//! For `n` i.i.d. samples of a `d`-dimensional set, `E(MST) ~ C n^((d-1)/d)`.
//! Fitting `log E` against `log n` gives a slope `s`, inverted as `d = 1 / (1 - s)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TregError};
use crate::generators::{generate, GeneratorSpec};
use crate::mst::mst_of;
use crate::stats::linear_fit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionFit {
    #[serde(rename = "sizes")]
    pub sample_sizes: Vec<usize>,
    /// Mean MST length per size, averaged over trials before taking logs.
    pub lengths: Vec<f64>,
    pub slope: f64,
    #[serde(skip)]
    pub intercept: f64,
    /// `1 / (1 - slope)`; `None` when `slope >= 1`, i.e. an unbounded estimate.
    pub dim_estimate: Option<f64>,
    pub r_squared: f64,
    #[serde(skip)]
    pub trials: usize,
}

impl DimensionFit {
    /// The estimate with `+inf` standing in for an unbounded fit.
    pub fn dimension(&self) -> f64 {
        self.dim_estimate.unwrap_or(f64::INFINITY)
    }

    /// Fits precomputed `(n, mean length)` pairs.
    pub fn from_lengths(sample_sizes: Vec<usize>, lengths: Vec<f64>, trials: usize) -> Result<Self> {
        validate_sizes(&sample_sizes)?;
        if lengths.len() != sample_sizes.len() {
            return Err(TregError::param("lengths", "one mean length per sample size is required"));
        }
        if let Some(bad) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(TregError::Degenerate(format!("non-positive mean MST length {bad}")));
        }
        let x: Vec<f64> = sample_sizes.iter().map(|&n| (n as f64).ln()).collect();
        let y: Vec<f64> = lengths.iter().map(|l| l.ln()).collect();
        let fit = linear_fit(&x, &y);
        let dim_estimate = (fit.slope < 1.0).then(|| 1.0 / (1.0 - fit.slope));
        Ok(Self {
            sample_sizes,
            lengths,
            slope: fit.slope,
            intercept: fit.intercept,
            dim_estimate,
            r_squared: fit.r_squared,
            trials,
        })
    }
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 4 {
        return Err(TregError::param("sizes", format!("need at least 4 sample sizes, got {}", sizes.len())));
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(TregError::param("sizes", "must be strictly increasing"));
    }
    if sizes[0] < 4 {
        return Err(TregError::param("sizes", "every sample size must be at least 4"));
    }
    if sizes[sizes.len() - 1] < 8 * sizes[0] {
        return Err(TregError::param("sizes", "sizes must span at least a factor of 8"));
    }
    Ok(())
}

/// Seed of trial `trial` at size index `size_idx`, derived by counter.
pub fn trial_seed(base: u64, size_idx: usize, trials: usize, trial: usize) -> u64 {
    base.wrapping_add((size_idx * trials + trial) as u64)
}

/// MST length of one generated sample; rejects samples containing coincident points.
fn sample_length(sampler: &GeneratorSpec, n: usize, seed: u64) -> Result<f64> {
    let spec = GeneratorSpec { n, seed, ..sampler.clone() };
    let mst = mst_of(&generate(&spec)?);
    if mst.has_zero_length_edge() {
        return Err(TregError::Degenerate(format!("{} produced coincident points at n = {n}", sampler.kind)));
    }
    Ok(mst.total_length)
}

/// Estimates the intrinsic dimension of `sampler`'s support. The sampler's own
/// `n` and `seed` are ignored; sizes and per-trial seeds come from the arguments.
pub fn estimate_dimension(sampler: &GeneratorSpec, sizes: &[usize], trials: usize, seed: u64) -> Result<DimensionFit> {
    estimate_dimension_scaled(sampler, sizes, trials, seed, 1.0)
}

/// As [`estimate_dimension`], with every sample multiplied by `scale`.
pub fn estimate_dimension_scaled(
    sampler: &GeneratorSpec,
    sizes: &[usize],
    trials: usize,
    seed: u64,
    scale: f64,
) -> Result<DimensionFit> {
    validate_sizes(sizes)?;
    if trials == 0 {
        return Err(TregError::param("trials", "must be at least 1"));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(TregError::param("scale", "must be positive"));
    }
    let jobs: Vec<(usize, usize)> = (0..sizes.len()).flat_map(|s| (0..trials).map(move |t| (s, t))).collect();
    // Collected in job order, so the aggregation below is thread-count independent.
    let lengths = jobs
        .par_iter()
        .map(|&(s, t)| sample_length(sampler, sizes[s], trial_seed(seed, s, trials, t)).map(|l| l * scale))
        .collect::<Result<Vec<f64>>>()?;
    let means = lengths.chunks(trials).map(|c| c.iter().sum::<f64>() / trials as f64).collect();
    DimensionFit::from_lengths(sizes.to_vec(), means, trials)
}

/// Sizes `start, 2 start, 4 start, ...` up to and including `end`.
pub fn doubling_sizes(start: usize, end: usize) -> Vec<usize> {
    std::iter::successors(Some(start), |&n| Some(n * 2)).take_while(|&n| n <= end).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityComparison {
    pub uniform_lengths: Vec<f64>,
    pub concentrated_lengths: Vec<f64>,
    pub mean_uniform: f64,
    pub mean_concentrated: f64,
    /// Trials where the uniform sample had the longer MST.
    pub wins: usize,
    pub trials: usize,
}

/// Per-trial MST lengths of two samplers on the same manifold. Trial `t` uses
/// seed `seed + 2t` for the uniform sampler and `seed + 2t + 1` for the other.
pub fn compare_densities(
    uniform: &GeneratorSpec,
    concentrated: &GeneratorSpec,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<DensityComparison> {
    if trials < 10 {
        return Err(TregError::param("trials", format!("need at least 10 trials, got {trials}")));
    }
    if uniform.d != concentrated.d {
        return Err(TregError::param("d", "both samplers must share the ambient dimension"));
    }
    let pairs = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = seed.wrapping_add(2 * t as u64);
            Ok((sample_length(uniform, n, s)?, sample_length(concentrated, n, s.wrapping_add(1))?))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (uniform_lengths, concentrated_lengths): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let wins = uniform_lengths.iter().zip(&concentrated_lengths).filter(|(u, c)| u > c).count();
    Ok(DensityComparison {
        mean_uniform: uniform_lengths.iter().sum::<f64>() / trials as f64,
        mean_concentrated: concentrated_lengths.iter().sum::<f64>() / trials as f64,
        uniform_lengths,
        concentrated_lengths,
        wins,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::GeneratorKind;

    #[test]
    fn size_validation() {
        let s = GeneratorSpec::new(GeneratorKind::UniformCube, 1, 2, 0);
        assert!(estimate_dimension(&s, &[16, 32, 64], 1, 0).is_err());
        assert!(estimate_dimension(&s, &[16, 32, 64, 100], 1, 0).is_err());
        assert!(estimate_dimension(&s, &[2, 8, 16, 32], 1, 0).is_err());
        assert!(estimate_dimension(&s, &[16, 64, 32, 128], 1, 0).is_err());
        assert!(estimate_dimension(&s, &[16, 32, 64, 128], 0, 0).is_err());
    }

    #[test]
    fn doubling() {
        assert_eq!(doubling_sizes(256, 8192), vec![256, 512, 1024, 2048, 4096, 8192]);
    }

    #[test]
    fn fit_of_exact_power_law() {
        let sizes = vec![100, 200, 400, 800];
        let lengths = sizes.iter().map(|&n| 3.0 * (n as f64).powf(2.0 / 3.0)).collect();
        let f = DimensionFit::from_lengths(sizes, lengths, 1).unwrap();
        assert!((f.slope - 2.0 / 3.0).abs() < 1e-12);
        assert!((f.dimension() - 3.0).abs() < 1e-9);
        assert!((f.r_squared - 1.0).abs() < 1e-12);

        let sizes = vec![100, 200, 400, 800];
        let lengths = sizes.iter().map(|&n| n as f64 * 1.5).collect();
        let f = DimensionFit::from_lengths(sizes, lengths, 1).unwrap();
        assert_eq!(f.dim_estimate, None);
        assert_eq!(f.dimension(), f64::INFINITY);
    }

    #[test]
    fn rejects_coincident_samples() {
        // Squared distances underflow to zero on a circle this small.
        let s = GeneratorSpec::new(GeneratorKind::CircleCollapsed, 1, 2, 0).with_param("radius", 1e-300);
        let r = estimate_dimension(&s, &[8, 16, 32, 64], 1, 0);
        assert!(matches!(r, Err(TregError::Degenerate(_))), "{r:?}");
    }

    #[test]
    fn scale_leaves_slope_unchanged() {
        let s = GeneratorSpec::new(GeneratorKind::UniformCube, 1, 2, 0);
        let sizes = [32, 64, 128, 256];
        let a = estimate_dimension(&s, &sizes, 2, 7).unwrap();
        let b = estimate_dimension_scaled(&s, &sizes, 2, 7, 13.0).unwrap();
        assert!((a.slope - b.slope).abs() < 1e-9);
        assert!((a.dimension() - b.dimension()).abs() < 1e-9);
        assert!((b.intercept - a.intercept - 13f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn json_keys() {
        let f = DimensionFit::from_lengths(vec![4, 8, 16, 32], vec![1.0, 1.5, 2.1, 3.0], 1).unwrap();
        let v = serde_json::to_value(&f).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        keys.sort();
        assert_eq!(keys, vec!["dim_estimate", "lengths", "r_squared", "sizes", "slope"]);
    }

    #[test]
    fn identical_samplers_split_wins() {
        let u = GeneratorSpec::new(GeneratorKind::UniformSphere, 1, 3, 0);
        let r = compare_densities(&u, &u, 128, 40, 3).unwrap();
        // Binomial(40, 1/2): 99.9% of the mass lies in [9, 31].
        assert!((9..=31).contains(&r.wins), "{}", r.wins);
        assert!(compare_densities(&u, &u, 128, 5, 3).is_err());
    }
}
