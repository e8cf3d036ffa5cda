//! Scalar losses over point clouds together with their analytic gradients.
//!
//! Every loss returns its value and gradient from one evaluation so the MST,
//! the dominant cost, is built once per call.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TregError};
use crate::mst::{mst_length_gradient, mst_of, MstGradient};
use crate::point_cloud::{norm, Gradient, PointCloud};

/// Mixing coefficients of every loss term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// View-invariance (MSE) weight.
    pub beta: f64,
    /// MST-length weight.
    pub gamma: f64,
    /// Soft sphere-constraint weight.
    pub lambda_s: f64,
    /// Variance hinge weight.
    pub nu: f64,
    /// Off-diagonal covariance weight.
    pub tau: f64,
    /// Variance stabilizer inside the square root.
    pub epsilon: f64,
}

impl Default for LossWeights {
    /// The image-pretraining weights `beta = 10, gamma = 0.2, lambda = 8e-4`
    /// and the VICReg-style `nu = 25, tau = 1, epsilon = 1e-4`.
    fn default() -> Self {
        Self { beta: 10.0, gamma: 0.2, lambda_s: 8e-4, nu: 25.0, tau: 1.0, epsilon: 1e-4 }
    }
}

impl LossWeights {
    pub fn treg(gamma: f64, lambda_s: f64) -> Self {
        Self { gamma, lambda_s, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("lambda", self.lambda_s),
            ("nu", self.nu),
            ("tau", self.tau),
        ];
        for (name, w) in named {
            if !w.is_finite() || w < 0.0 {
                return Err(TregError::param(name, format!("must be finite and non-negative, got {w}")));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(TregError::param("epsilon", format!("must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Unweighted loss components plus the weighted objective.
///
/// Components that are not part of the evaluated objective are zero unless a
/// caller fills them in as diagnostics; `total` only ever contains the
/// configured weighted terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l_e: f64,
    pub l_s: f64,
    pub l_mse: f64,
    pub l_var: f64,
    pub l_cov: f64,
    pub total: f64,
}

/// A loss report with the gradient of `total` for a single cloud.
#[derive(Debug, Clone)]
pub struct Evaluated {
    pub report: LossReport,
    pub grad: Gradient,
    /// Points whose MST gradient contribution was dropped at a zero-length edge.
    pub duplicates: usize,
}

/// A loss report with gradients of `total` for both views.
#[derive(Debug, Clone)]
pub struct EvaluatedPair {
    pub report: LossReport,
    pub grad_a: Gradient,
    pub grad_b: Gradient,
    pub duplicates: usize,
}

fn require_points(op: &'static str, cloud: &PointCloud, min: usize) -> Result<()> {
    if cloud.n() < min {
        return Err(TregError::TooFewPoints { op, min, n: cloud.n() });
    }
    Ok(())
}

fn require_same_shape(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if (a.n(), a.dim()) != (b.n(), b.dim()) {
        return Err(TregError::ShapeMismatch { expected: (a.n(), a.dim()), actual: (b.n(), b.dim()) });
    }
    Ok(())
}

/// `-E(MST(Z)) / n`.
pub fn loss_e(cloud: &PointCloud) -> Result<(f64, MstGradient)> {
    require_points("loss_e", cloud, 2)?;
    let mst = mst_of(cloud);
    let mut g = mst_length_gradient(cloud, &mst);
    let inv_n = 1.0 / cloud.n() as f64;
    g.grads.scale(-inv_n);
    Ok((-mst.total_length * inv_n, g))
}

/// `(1/n) sum (|z_i| - 1)^2`; the gradient row at the origin is zero.
pub fn loss_s(cloud: &PointCloud) -> (f64, Gradient) {
    let (n, d) = (cloud.n(), cloud.dim());
    let inv_n = 1.0 / n as f64;
    let mut grad = Gradient::zeros(n, d);
    let mut value = 0.0;
    for (i, p) in cloud.points().enumerate() {
        let r = norm(p);
        value += (r - 1.0) * (r - 1.0);
        if r > 0.0 {
            let c = 2.0 * inv_n * (r - 1.0) / r;
            for (g, x) in grad.row_mut(i).iter_mut().zip(p) {
                *g = c * x;
            }
        }
    }
    (value * inv_n, grad)
}

/// `gamma * L_E + lambda * L_S`.
pub fn loss_treg(cloud: &PointCloud, w: &LossWeights) -> Result<Evaluated> {
    require_points("loss_treg", cloud, 2)?;
    w.validate()?;
    let (l_e, ge) = loss_e(cloud)?;
    let (l_s, gs) = loss_s(cloud);
    let mut grad = ge.grads.scaled(w.gamma);
    grad.add_scaled(w.lambda_s, &gs);
    let duplicates = ge.duplicate_flags.iter().filter(|&&f| f).count();
    Ok(Evaluated {
        report: LossReport { l_e, l_s, total: w.gamma * l_e + w.lambda_s * l_s, ..Default::default() },
        grad,
        duplicates,
    })
}

/// `(1/n) sum |a_i - b_i|^2` and its gradients with respect to `a` and `b`.
pub fn loss_mse(a: &PointCloud, b: &PointCloud) -> Result<(f64, Gradient, Gradient)> {
    require_same_shape(a, b)?;
    let (n, d) = (a.n(), a.dim());
    let inv_n = 1.0 / n as f64;
    let mut ga = Gradient::zeros(n, d);
    let mut gb = Gradient::zeros(n, d);
    let mut value = 0.0;
    for i in 0..n {
        let (pa, pb) = (a.point(i), b.point(i));
        let ra = ga.row_mut(i);
        for k in 0..d {
            let t = pa[k] - pb[k];
            value += t * t;
            ra[k] = 2.0 * inv_n * t;
        }
        for (g, a) in gb.row_mut(i).iter_mut().zip(ga.row(i)) {
            *g = -a;
        }
    }
    Ok((value * inv_n, ga, gb))
}

/// `beta * L_MSE(a, b) + L_T-REG(a) + L_T-REG(b)`.
///
/// The reported `l_e` and `l_s` are the sums over both views, matching the
/// `gamma * (L_E(a) + L_E(b)) + lambda * (L_S(a) + L_S(b))` composition.
pub fn loss_tregs_two_view(a: &PointCloud, b: &PointCloud, w: &LossWeights) -> Result<EvaluatedPair> {
    require_same_shape(a, b)?;
    let (l_mse, gma, gmb) = loss_mse(a, b)?;
    let ea = loss_treg(a, w)?;
    let eb = loss_treg(b, w)?;
    let mut grad_a = ea.grad;
    grad_a.add_scaled(w.beta, &gma);
    let mut grad_b = eb.grad;
    grad_b.add_scaled(w.beta, &gmb);
    let report = LossReport {
        l_e: ea.report.l_e + eb.report.l_e,
        l_s: ea.report.l_s + eb.report.l_s,
        l_mse,
        total: w.beta * l_mse + ea.report.total + eb.report.total,
        ..Default::default()
    };
    Ok(EvaluatedPair { report, grad_a, grad_b, duplicates: ea.duplicates + eb.duplicates })
}

/// Unbiased per-dimension variances and the `(n-1)`-normalized covariance.
pub(crate) struct Moments {
    pub centered: Vec<f64>,
    pub cov: Vec<f64>,
}

pub(crate) fn moments(cloud: &PointCloud) -> Moments {
    let (n, d) = (cloud.n(), cloud.dim());
    let centered = cloud.centered().into_flat();
    let mut cov = vec![0.0; d * d];
    for row in centered.chunks_exact(d) {
        for a in 0..d {
            let ra = row[a];
            for b in a..d {
                cov[a * d + b] += ra * row[b];
            }
        }
    }
    let inv = 1.0 / (n as f64 - 1.0);
    for a in 0..d {
        for b in a..d {
            let v = cov[a * d + b] * inv;
            cov[a * d + b] = v;
            cov[b * d + a] = v;
        }
    }
    Moments { centered, cov }
}

/// Variance hinge plus off-diagonal covariance penalty, `nu * L_var + tau * L_cov`.
///
/// Variances use the unbiased `(n - 1)` estimator, the same normalization as
/// the covariance matrix.
pub fn loss_var_cov(cloud: &PointCloud, w: &LossWeights) -> Result<Evaluated> {
    require_points("loss_var_cov", cloud, 2)?;
    w.validate()?;
    let (n, d) = (cloud.n(), cloud.dim());
    let Moments { centered, cov } = moments(cloud);
    let inv_d = 1.0 / d as f64;
    let inv_nm1 = 1.0 / (n as f64 - 1.0);

    // dL_var/dz_ij = -(1/d) x_ij / ((n-1) S_j) while the hinge is active.
    let mut var_coef = vec![0.0; d];
    let mut l_var = 0.0;
    for j in 0..d {
        let s = (cov[j * d + j] + w.epsilon).sqrt();
        if s < 1.0 {
            l_var += 1.0 - s;
            var_coef[j] = -inv_d * inv_nm1 / s;
        }
    }
    l_var *= inv_d;

    let mut l_cov = 0.0;
    for a in 0..d {
        for b in 0..d {
            if a != b {
                l_cov += cov[a * d + b] * cov[a * d + b];
            }
        }
    }
    l_cov *= inv_d;

    // dL_cov/dz_ic = 4 / (d (n-1)) * sum_{b != c} C_cb x_ib.
    let cov_scale = 4.0 * inv_d * inv_nm1;
    let mut grad = Gradient::zeros(n, d);
    for (i, x) in centered.chunks_exact(d).enumerate() {
        let g = grad.row_mut(i);
        for c in 0..d {
            let mut acc = 0.0;
            for b in 0..d {
                if b != c {
                    acc += cov[c * d + b] * x[b];
                }
            }
            g[c] = w.nu * var_coef[c] * x[c] + w.tau * cov_scale * acc;
        }
    }
    Ok(Evaluated {
        report: LossReport { l_var, l_cov, total: w.nu * l_var + w.tau * l_cov, ..Default::default() },
        grad,
        duplicates: 0,
    })
}
