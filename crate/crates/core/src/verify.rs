//! Self-contained property suite: oracle equivalence, the MST/pairwise-distance
//! bound, gradient checks, uniformity axioms, rigid-motion invariance and the
//! uniform-density comparison.
//!
//! A [`Fault`] can be injected to confirm the suite notices a broken gradient.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dim_estimator::compare_densities;
use crate::error::{Result, TregError};
use crate::generators::{GeneratorKind, GeneratorSpec};
use crate::mst::{brute_force_mst, kruskal_mst, mst_length_gradient, mst_of, Mst, MstGradient};
use crate::point_cloud::{pairwise_distances, Gradient, PointCloud};
use crate::regularizers::{loss_mse, loss_s, loss_var_cov, LossWeights};
use crate::uniformity::check_uniformity_properties;

pub const BLOCKS: [&str; 6] = ["oracle", "lemma1", "gradients", "uniformity", "invariance", "density"];

/// Finite-difference step shared by all gradient checks.
pub const FD_STEP: f64 = 1e-5;
/// Allowed deviation relative to the largest finite-difference entry.
pub const FD_REL_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Flips the sign of the MST-length gradient.
    GradientSign,
}

impl std::str::FromStr for Fault {
    type Err = TregError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradient-sign" => Ok(Fault::GradientSign),
            other => Err(TregError::Parse(format!("unknown fault `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// Run only blocks whose name contains this string.
    pub filter: Option<String>,
    pub fault: Option<Fault>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockResult {
    pub name: String,
    pub passed: bool,
    pub checks: usize,
    pub failures: usize,
    pub skipped: usize,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub blocks: Vec<BlockResult>,
}

#[derive(Default)]
struct Tally {
    checks: usize,
    failures: usize,
    skipped: usize,
    first_failure: Option<String>,
}

impl Tally {
    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(what());
            }
        }
    }
}

pub fn run_verification(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let selected: Vec<&str> = BLOCKS
        .iter()
        .copied()
        .filter(|b| cfg.filter.as_deref().is_none_or(|f| b.contains(f)))
        .collect();
    if selected.is_empty() {
        return Err(TregError::param(
            "filter",
            format!("`{}` matches no block; blocks are {}", cfg.filter.as_deref().unwrap_or(""), BLOCKS.join(", ")),
        ));
    }
    let mut blocks = Vec::with_capacity(selected.len());
    for name in selected {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ fxhash(name));
        let tally = match name {
            "oracle" => oracle_block(&mut rng),
            "lemma1" => lemma1_block(&mut rng),
            "gradients" => gradient_block(&mut rng, cfg.fault),
            "uniformity" => uniformity_block(&mut rng)?,
            "invariance" => invariance_block(&mut rng),
            "density" => density_block(cfg.seed)?,
            _ => unreachable!(),
        };
        let passed = tally.failures == 0;
        let detail = tally.first_failure.unwrap_or_else(|| "ok".into());
        blocks.push(BlockResult {
            name: name.to_string(),
            passed,
            checks: tally.checks,
            failures: tally.failures,
            skipped: tally.skipped,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(VerifyReport { passed: blocks.iter().all(|b| b.passed), blocks })
}

fn fxhash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

fn gaussian_cloud(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PointCloud {
    let data = (0..n * d).map(|_| StandardNormal.sample(rng)).collect();
    PointCloud::from_flat(n, d, data).expect("finite samples")
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn oracle_block(rng: &mut ChaCha8Rng) -> Tally {
    let mut t = Tally::default();
    let dims = [1, 2, 3, 8];
    for k in 0..500 {
        let n = rng.random_range(1..=7);
        let d = dims[k % dims.len()];
        let cloud = gaussian_cloud(rng, n, d);
        let dist = pairwise_distances(&cloud);
        let fast = kruskal_mst(&dist);
        let oracle = brute_force_mst(&dist).expect("n <= 7");
        t.record(rel_close(fast.total_length, oracle.total_length, 1e-12) && fast.edges.len() + 1 == n, || {
            format!("cloud {k} (n={n}, d={d}): kruskal {} vs exhaustive {}", fast.total_length, oracle.total_length)
        });
    }
    t
}

fn lemma1_block(rng: &mut ChaCha8Rng) -> Tally {
    let mut t = Tally::default();
    for k in 0..1000 {
        let n = rng.random_range(2..=64);
        let d = rng.random_range(1..=32);
        let cloud = gaussian_cloud(rng, n, d);
        let dist = pairwise_distances(&cloud);
        let bound = 2.0 / n as f64 * dist.pair_sum();
        let len = kruskal_mst(&dist).total_length;
        t.record(len <= bound, || format!("cloud {k} (n={n}, d={d}): MST {len} exceeds bound {bound}"));
    }
    t
}

/// Central differences of `f` at every coordinate; `None` entries mark
/// coordinates where `stable` reports a change of combinatorial structure.
fn central_differences(
    cloud: &PointCloud,
    f: &dyn Fn(&PointCloud) -> f64,
    stable: &dyn Fn(&PointCloud) -> bool,
) -> Vec<Option<f64>> {
    let base = cloud.as_slice();
    (0..base.len())
        .map(|k| {
            let mut plus = base.to_vec();
            plus[k] += FD_STEP;
            let mut minus = base.to_vec();
            minus[k] -= FD_STEP;
            let p = PointCloud::from_flat(cloud.n(), cloud.dim(), plus).expect("finite");
            let m = PointCloud::from_flat(cloud.n(), cloud.dim(), minus).expect("finite");
            (stable(&p) && stable(&m)).then(|| (f(&p) - f(&m)) / (2.0 * FD_STEP))
        })
        .collect()
}

fn compare_gradient(t: &mut Tally, label: &str, analytic: &Gradient, fd: &[Option<f64>]) {
    let scale = fd.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-12);
    let mut worst = 0.0f64;
    for (a, f) in analytic.as_slice().iter().zip(fd) {
        match f {
            Some(f) => worst = worst.max((a - f).abs() / scale),
            None => t.skipped += 1,
        }
    }
    t.record(worst <= FD_REL_TOL, || format!("{label}: relative gradient error {worst:e}"));
}

fn same_tree(a: &Mst, b: &Mst) -> bool {
    a.edges.len() == b.edges.len() && a.edges.iter().zip(&b.edges).all(|(x, y)| (x.i, x.j) == (y.i, y.j))
}

fn gradient_block(rng: &mut ChaCha8Rng, fault: Option<Fault>) -> Tally {
    let mut t = Tally::default();
    let mst_grad = |cloud: &PointCloud, mst: &Mst| -> MstGradient {
        let mut g = mst_length_gradient(cloud, mst);
        if fault == Some(Fault::GradientSign) {
            g.grads.scale(-1.0);
        }
        g
    };
    let var_cov_weights = LossWeights { nu: 25.0, tau: 1.0, ..Default::default() };

    for k in 0..100 {
        let n = rng.random_range(3..=12);
        let d = rng.random_range(2..=6);
        let cloud = gaussian_cloud(rng, n, d);

        let mst = mst_of(&cloud);
        let g = mst_grad(&cloud, &mst);
        let tol = 1e-9 * g.grads.max_row_norm();
        t.record(g.grads.column_sums().iter().all(|s| s.abs() <= tol), || {
            format!("cloud {k}: MST gradient rows do not sum to zero")
        });
        let sorted_edges = |c: &PointCloud| {
            let mut m = mst_of(c);
            m.edges.sort_by_key(|e| (e.i, e.j));
            m
        };
        let base_sorted = sorted_edges(&cloud);
        let fd = central_differences(&cloud, &|c| mst_of(c).total_length, &|c| same_tree(&sorted_edges(c), &base_sorted));
        compare_gradient(&mut t, &format!("cloud {k} MST length"), &g.grads, &fd);

        let (_, gs) = loss_s(&cloud);
        let fd = central_differences(&cloud, &|c| loss_s(c).0, &|_| true);
        compare_gradient(&mut t, &format!("cloud {k} sphere loss"), &gs, &fd);

        let other = gaussian_cloud(rng, n, d);
        let (_, ga, gb) = loss_mse(&cloud, &other).expect("same shape");
        let fd = central_differences(&cloud, &|c| loss_mse(c, &other).expect("same shape").0, &|_| true);
        compare_gradient(&mut t, &format!("cloud {k} MSE (first view)"), &ga, &fd);
        let fd = central_differences(&other, &|c| loss_mse(&cloud, c).expect("same shape").0, &|_| true);
        compare_gradient(&mut t, &format!("cloud {k} MSE (second view)"), &gb, &fd);

        // Mixed per-axis scales put some variance hinges on each side of 1.
        let scales: Vec<f64> = (0..d).map(|j| if j % 2 == 0 { 0.4 } else { 1.7 }).collect();
        let skewed = PointCloud::from_flat(
            n,
            d,
            cloud.as_slice().iter().enumerate().map(|(i, x)| x * scales[i % d]).collect(),
        )
        .expect("finite");
        let e = loss_var_cov(&skewed, &var_cov_weights).expect("n >= 2");
        let fd = central_differences(
            &skewed,
            &|c| loss_var_cov(c, &var_cov_weights).expect("n >= 2").report.total,
            &|_| true,
        );
        compare_gradient(&mut t, &format!("cloud {k} variance-covariance"), &e.grad, &fd);
    }
    t
}

fn uniformity_block(rng: &mut ChaCha8Rng) -> Result<Tally> {
    let mut t = Tally::default();
    for k in 0..200 {
        let n = rng.random_range(4..=128);
        let d = rng.random_range(2..=64);
        let cloud = gaussian_cloud(rng, n, d);
        let extra = rng.random_range(1..=4);
        let r = check_uniformity_properties(&cloud, extra)?;
        for (name, outcome) in r.outcomes() {
            t.record(outcome.passed(), || format!("cloud {k} (n={n}, d={d}): {name} {outcome:?}"));
        }
    }
    Ok(t)
}

/// Random orthogonal matrix by Gram-Schmidt on a Gaussian matrix.
fn random_rotation(rng: &mut ChaCha8Rng, d: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    while basis.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        for b in &basis {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    basis
}

fn invariance_block(rng: &mut ChaCha8Rng) -> Tally {
    let mut t = Tally::default();
    for k in 0..100 {
        let n = rng.random_range(2..=48);
        let d = rng.random_range(1..=10);
        let cloud = gaussian_cloud(rng, n, d);
        let len = mst_of(&cloud).total_length;

        let rot = random_rotation(rng, d);
        let shift: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let moved: Vec<f64> = cloud
            .points()
            .flat_map(|p| rot.iter().zip(&shift).map(move |(row, s)| row.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() + s))
            .collect();
        let moved = PointCloud::from_flat(n, d, moved).expect("finite");
        let moved_len = mst_of(&moved).total_length;
        t.record(rel_close(len, moved_len, 1e-9), || format!("cloud {k}: rigid motion changed length {len} -> {moved_len}"));

        let s = rng.random_range(0.1..10.0);
        let scaled_len = mst_of(&cloud.scaled(s)).total_length;
        t.record(rel_close(scaled_len, s * len, 1e-12), || format!("cloud {k}: scaling by {s} gave {scaled_len}"));
    }
    t
}

fn density_block(seed: u64) -> Result<Tally> {
    let mut t = Tally::default();
    let sphere = GeneratorSpec::new(GeneratorKind::UniformSphere, 1, 3, 0);
    let vmf = GeneratorSpec::new(GeneratorKind::VonMisesFisher, 1, 3, 0).with_param("kappa", 10.0);
    let half = GeneratorSpec::new(GeneratorKind::UniformHemisphere, 1, 3, 0);
    for (label, other) in [("von Mises-Fisher", &vmf), ("hemisphere", &half)] {
        let r = compare_densities(&sphere, other, 512, 20, seed)?;
        t.record(r.wins == r.trials, || format!("uniform sphere beat {label} in {}/{} trials", r.wins, r.trials));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filtered_run_passes() {
        let r = run_verification(&VerifyConfig { filter: Some("lemma1".into()), ..Default::default() }).unwrap();
        assert!(r.passed);
        assert_eq!(r.blocks.len(), 1);
        assert_eq!(r.blocks[0].checks, 1000);
    }

    #[test]
    fn sign_fault_is_detected() {
        let cfg = VerifyConfig { filter: Some("gradients".into()), fault: Some(Fault::GradientSign), seed: 0 };
        let r = run_verification(&cfg).unwrap();
        assert!(!r.passed);
        let clean = run_verification(&VerifyConfig { fault: None, ..cfg }).unwrap();
        assert!(clean.passed, "{:?}", clean.blocks);
    }

    #[test]
    fn unknown_filter_is_an_error() {
        assert!(run_verification(&VerifyConfig { filter: Some("nope".into()), ..Default::default() }).is_err());
    }
}
