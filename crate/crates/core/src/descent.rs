//! Full-batch constrained gradient descent over point clouds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TregError};
use crate::point_cloud::{euclidean, norm, Gradient, PointCloud};
use crate::regularizers::{loss_e, loss_s, loss_treg, loss_tregs_two_view, loss_var_cov, LossReport, LossWeights};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
/// Coordinates beyond this magnitude abort a run unless the sphere penalty is off.
pub const DIVERGENCE_LIMIT: f64 = 1e6;
/// Standard deviation of the perturbation that derives the second view from `init`.
pub const SECOND_VIEW_NOISE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    GradientDescent,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    Treg,
    TregsTwoView,
    VarCov,
}

/// `None` drops the sphere penalty, `SoftSphere` applies it with weight `lambda_s`,
/// and `ClampToBall` additionally projects points back onto the ball after each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Constraint {
    None,
    SoftSphere,
    ClampToBall { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub steps: usize,
    pub lr: f64,
    pub method: Method,
    pub weights: LossWeights,
    pub objective: Objective,
    pub constraint: Constraint,
    pub seed: u64,
    pub record_every: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            lr: 0.01,
            method: Method::GradientDescent,
            weights: LossWeights::treg(1.0, 1.0),
            objective: Objective::Treg,
            constraint: Constraint::SoftSphere,
            seed: 0,
            record_every: 10,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(TregError::param("steps", "must be at least 1"));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(TregError::param("lr", format!("must be finite and non-negative, got {}", self.lr)));
        }
        if self.record_every == 0 {
            return Err(TregError::param("record_every", "must be at least 1"));
        }
        if let Constraint::ClampToBall { radius } = self.constraint {
            if !(radius.is_finite() && radius > 0.0) {
                return Err(TregError::param("radius", format!("must be positive, got {radius}")));
            }
        }
        self.weights.validate()
    }

    /// Weights actually applied: the sphere penalty is dropped without a sphere constraint.
    pub fn effective_weights(&self) -> LossWeights {
        let mut w = self.weights;
        if self.constraint == Constraint::None {
            w.lambda_s = 0.0;
        }
        w
    }

    fn magnitude_guard(&self) -> bool {
        let w = self.effective_weights();
        match self.objective {
            Objective::VarCov => true,
            _ => w.lambda_s > 0.0 || matches!(self.constraint, Constraint::ClampToBall { .. }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub step: usize,
    #[serde(flatten)]
    pub report: LossReport,
    /// Largest per-point gradient norm at this step.
    pub grad_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimRun {
    /// For the two-view objective, rows `0..n` hold the first view and `n..2n` the second.
    pub initial: PointCloud,
    pub final_cloud: PointCloud,
    pub history: Vec<HistoryEntry>,
}

impl OptimRun {
    pub fn final_report(&self) -> &LossReport {
        &self.history.last().expect("history always holds the final step").report
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        }
    }
}

/// Runs the configured descent from `init`.
///
/// The two-view objective optimizes `init` together with a second view drawn
/// as `init` plus Gaussian noise of standard deviation [`SECOND_VIEW_NOISE`]
/// seeded by `cfg.seed`.
pub fn optimize(init: &PointCloud, cfg: &OptimConfig) -> Result<OptimRun> {
    match cfg.objective {
        Objective::TregsTwoView => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let noise = Normal::new(0.0, SECOND_VIEW_NOISE).expect("valid normal");
            let jittered = init.as_slice().iter().map(|x| x + noise.sample(&mut rng)).collect();
            let second = PointCloud::from_flat(init.n(), init.dim(), jittered)?;
            optimize_pair(init, &second, cfg)
        }
        _ => run(init.clone(), 0, cfg),
    }
}

/// Two-view descent from explicit initial views.
pub fn optimize_pair(a: &PointCloud, b: &PointCloud, cfg: &OptimConfig) -> Result<OptimRun> {
    if (a.n(), a.dim()) != (b.n(), b.dim()) {
        return Err(TregError::ShapeMismatch { expected: (a.n(), a.dim()), actual: (b.n(), b.dim()) });
    }
    let cfg = OptimConfig { objective: Objective::TregsTwoView, ..cfg.clone() };
    run(a.concat_points(b)?, a.n(), &cfg)
}

fn evaluate(state: &PointCloud, view_n: usize, cfg: &OptimConfig, diagnostics: bool) -> Result<(LossReport, Gradient)> {
    let w = cfg.effective_weights();
    match cfg.objective {
        Objective::Treg => {
            let e = loss_treg(state, &w)?;
            Ok((e.report, e.grad))
        }
        Objective::TregsTwoView => {
            let a = state.slice_points(0, view_n)?;
            let b = state.slice_points(view_n, state.n())?;
            let e = loss_tregs_two_view(&a, &b, &w)?;
            Ok((e.report, e.grad_a.stacked(&e.grad_b)))
        }
        Objective::VarCov => {
            let mut e = loss_var_cov(state, &w)?;
            if diagnostics {
                e.report.l_e = loss_e(state)?.0;
                e.report.l_s = loss_s(state).0;
            }
            Ok((e.report, e.grad))
        }
    }
}

fn run(init: PointCloud, view_n: usize, cfg: &OptimConfig) -> Result<OptimRun> {
    cfg.validate()?;
    let (n, d) = (init.n(), init.dim());
    let mut params = init.as_slice().to_vec();
    let mut adam = Adam::new(params.len());
    let mut history = Vec::with_capacity(cfg.steps / cfg.record_every + 2);

    for step in 0..=cfg.steps {
        let state = PointCloud::from_flat(n, d, params.clone())
            .map_err(|e| TregError::Diverged { step, reason: e.to_string() })?;
        let recording = step % cfg.record_every == 0 || step == cfg.steps;
        let (report, grad) = evaluate(&state, view_n, cfg, recording)?;
        if recording {
            history.push(HistoryEntry { step, report, grad_max: grad.max_row_norm() });
        }
        if step == cfg.steps {
            return Ok(OptimRun { initial: init, final_cloud: state, history });
        }

        match cfg.method {
            Method::GradientDescent => {
                for (p, g) in params.iter_mut().zip(grad.as_slice()) {
                    *p -= cfg.lr * g;
                }
            }
            Method::Adam => adam.step(&mut params, grad.as_slice(), cfg.lr),
        }
        if let Constraint::ClampToBall { radius } = cfg.constraint {
            for row in params.chunks_exact_mut(d) {
                let r = norm(row);
                if r > radius {
                    row.iter_mut().for_each(|x| *x *= radius / r);
                }
            }
        }
        if let Some(bad) = params.iter().find(|x| !x.is_finite()) {
            return Err(TregError::Diverged { step: step + 1, reason: format!("non-finite coordinate {bad}") });
        }
        if cfg.magnitude_guard() {
            let max = params.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if max > DIVERGENCE_LIMIT {
                return Err(TregError::Diverged {
                    step: step + 1,
                    reason: format!("coordinate magnitude {max:e} exceeds {DIVERGENCE_LIMIT:e}"),
                });
            }
        }
    }
    unreachable!("loop returns at the final step")
}

/// Distance of a cloud from a regular simplex centred at its centroid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexResidual {
    /// Mean pairwise cosine of the centred points; `-1/(n-1)` for a regular simplex.
    pub mean_cos: f64,
    pub std_cos: f64,
    /// `max |dist - a*| / a*` with `a* = r sqrt(2n/(n-1))`, `r` the mean centred norm.
    pub max_rel_dev: f64,
}

pub fn simplex_residual(cloud: &PointCloud) -> Result<SimplexResidual> {
    let (n, d) = (cloud.n(), cloud.dim());
    if n < 2 {
        return Err(TregError::TooFewPoints { op: "simplex_residual", min: 2, n });
    }
    if n > d + 1 {
        return Err(TregError::param("n", format!("a regular simplex on {n} points needs dimension >= {}", n - 1)));
    }
    let centred = cloud.centered();
    let norms = centred.norms();
    if norms.contains(&0.0) {
        return Err(TregError::Degenerate("a point coincides with the centroid".into()));
    }
    let r = norms.iter().sum::<f64>() / n as f64;
    let target = r * (2.0 * n as f64 / (n as f64 - 1.0)).sqrt();

    let mut cosines = Vec::with_capacity(n * (n - 1) / 2);
    let mut max_rel_dev = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (centred.point(i), centred.point(j));
            cosines.push(crate::point_cloud::dot(a, b) / (norms[i] * norms[j]));
            max_rel_dev = max_rel_dev.max((euclidean(a, b) - target).abs() / target);
        }
    }
    let (mean_cos, std_cos) = crate::stats::mean_std(&cosines);
    Ok(SimplexResidual { mean_cos, std_cos, max_rel_dev })
}
