//! Resolved command configurations and their runners. Every runner writes
//! `manifest.json` first, so a run can be replayed from that file alone.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use treg_core::descent::{optimize, simplex_residual, Objective, OptimConfig, SimplexResidual};
use treg_core::dim_estimator::{estimate_dimension, DimensionFit};
use treg_core::generators::{generate, GeneratorSpec};
use treg_core::io::{read_cloud_file, write_collapse_csv, write_edges_csv, write_json_file, write_optim_run};
use treg_core::mst::mst_of;
use treg_core::uniformity::{collapse_scan, u_treg, UniformityScore};
use treg_core::verify::{run_verification, VerifyConfig};
use treg_core::{LossReport, PointCloud, Result, TregError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Where a point cloud comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Input(PathBuf),
    Generator(GeneratorSpec),
}

impl Source {
    pub fn load(&self) -> Result<PointCloud> {
        match self {
            Source::Input(path) => read_cloud_file(path),
            Source::Generator(spec) => generate(spec),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MstArgs {
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeArgs {
    pub preset: Option<String>,
    pub source: Source,
    pub optim: OptimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateDimArgs {
    pub sampler: GeneratorSpec,
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseScanArgs {
    pub n: usize,
    pub d: usize,
    pub etas: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "kebab-case")]
pub enum Resolved {
    Mst(MstArgs),
    Optimize(OptimizeArgs),
    EstimateDim(EstimateDimArgs),
    CollapseScan(CollapseScanArgs),
    Verify(VerifyConfig),
}

impl Resolved {
    fn seed(&self) -> Option<u64> {
        match self {
            Resolved::Mst(a) => match &a.source {
                Source::Generator(g) => Some(g.seed),
                Source::Input(_) => None,
            },
            Resolved::Optimize(a) => Some(a.optim.seed),
            Resolved::EstimateDim(a) => Some(a.seed),
            Resolved::CollapseScan(a) => Some(a.seed),
            Resolved::Verify(v) => Some(v.seed),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(flatten)]
    pub resolved: Resolved,
    pub seed: Option<u64>,
    pub version: String,
    pub out_dir: PathBuf,
}

impl Manifest {
    pub fn new(resolved: Resolved, out_dir: PathBuf) -> Self {
        Self { seed: resolved.seed(), resolved, version: VERSION.to_string(), out_dir }
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Outcome of a command that completed without error.
pub enum Outcome {
    Ok,
    VerificationFailed,
}

pub fn run(manifest: &Manifest) -> Result<Outcome> {
    let out = &manifest.out_dir;
    fs::create_dir_all(out)?;
    write_json_file(&out.join("manifest.json"), manifest)?;
    match &manifest.resolved {
        Resolved::Mst(a) => run_mst(a, out),
        Resolved::Optimize(a) => run_optimize(a, out),
        Resolved::EstimateDim(a) => run_estimate_dim(a, out),
        Resolved::CollapseScan(a) => run_collapse_scan(a, out),
        Resolved::Verify(v) => run_verify(v, out),
    }
}

fn run_mst(a: &MstArgs, out: &Path) -> Result<Outcome> {
    let cloud = a.source.load()?;
    let mst = mst_of(&cloud);
    if mst.edges.len() + 1 != cloud.n() || !mst.total_length.is_finite() {
        return Err(TregError::Degenerate(format!(
            "spanning tree on {} points has {} edges and length {}",
            cloud.n(),
            mst.edges.len(),
            mst.total_length
        )));
    }
    write_edges_csv(fs::File::create(out.join("edges.csv"))?, &mst)?;
    println!("{:?}", mst.total_length);
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct OptimizeSummary<'a> {
    preset: Option<&'a str>,
    steps: usize,
    initial: &'a LossReport,
    #[serde(rename = "final")]
    final_report: &'a LossReport,
    mean_norm: f64,
    norm_cv: f64,
    uniformity: Option<UniformityScore>,
    simplex_residual: Option<SimplexResidual>,
}

fn run_optimize(a: &OptimizeArgs, out: &Path) -> Result<Outcome> {
    let init = a.source.load()?;
    let run = optimize(&init, &a.optim)?;
    // For the two-view objective the diagnostics describe the first view.
    let view = match a.optim.objective {
        Objective::TregsTwoView => run.final_cloud.slice_points(0, init.n())?,
        _ => run.final_cloud.clone(),
    };
    let norms = view.norms();
    let mean_norm = norms.iter().sum::<f64>() / norms.len() as f64;
    let spread = (norms.iter().map(|r| (r - mean_norm).powi(2)).sum::<f64>() / norms.len() as f64).sqrt();
    let summary = OptimizeSummary {
        preset: a.preset.as_deref(),
        steps: a.optim.steps,
        initial: &run.history[0].report,
        final_report: run.final_report(),
        mean_norm,
        norm_cv: spread / mean_norm,
        uniformity: u_treg(&view).ok(),
        simplex_residual: (view.n() >= 2 && view.n() <= view.dim() + 1).then(|| simplex_residual(&view)).transpose()?,
    };
    write_optim_run(out, &run, &summary)?;
    let f = run.final_report();
    println!("steps {}  final total {:.6}  l_e {:.6}  l_s {:.6}", a.optim.steps, f.total, f.l_e, f.l_s);
    println!("mean norm {mean_norm:.6}  norm cv {:.4}", summary.norm_cv);
    if let Some(s) = &summary.simplex_residual {
        println!("simplex: mean cos {:.6}  std cos {:.6}  max rel dev {:.3e}", s.mean_cos, s.std_cos, s.max_rel_dev);
    }
    Ok(Outcome::Ok)
}

fn run_estimate_dim(a: &EstimateDimArgs, out: &Path) -> Result<Outcome> {
    let fit: DimensionFit = estimate_dimension(&a.sampler, &a.sizes, a.trials, a.seed)?;
    write_json_file(&out.join("dimension.json"), &fit)?;
    match fit.dim_estimate {
        Some(d) => println!("{}: slope {:.4}  dimension {d:.4}  r2 {:.4}", a.sampler.kind, fit.slope, fit.r_squared),
        None => println!("{}: slope {:.4}  dimension unbounded", a.sampler.kind, fit.slope),
    }
    Ok(Outcome::Ok)
}

fn run_collapse_scan(a: &CollapseScanArgs, out: &Path) -> Result<Outcome> {
    let scan = collapse_scan(a.n, a.d, &a.etas, a.seed)?;
    write_collapse_csv(fs::File::create(out.join("collapse.csv"))?, &scan)?;
    for (eta, s) in scan.etas.iter().zip(&scan.scores) {
        println!("eta {eta:.2}  -L_E {s:.6}");
    }
    Ok(Outcome::Ok)
}

fn run_verify(v: &VerifyConfig, out: &Path) -> Result<Outcome> {
    let report = run_verification(v)?;
    write_json_file(&out.join("verify.json"), &report)?;
    for b in &report.blocks {
        let status = if b.passed { "PASS" } else { "FAIL" };
        println!("{status} {:<11} {:>5} checks  {:>3} failed  {:>3} skipped  {:.2}s  {}", b.name, b.checks, b.failures, b.skipped, b.seconds, b.detail);
    }
    Ok(if report.passed { Outcome::Ok } else { Outcome::VerificationFailed })
}
