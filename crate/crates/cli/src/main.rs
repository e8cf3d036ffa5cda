//! `treg`: experiment runner for MST-based point-cloud regularization.
//!
//! Exit codes: 0 success, 1 verification failure, 2 input error, 3 internal
//! invariant violation.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use treg_core::descent::{Constraint, Method, Objective, OptimConfig};
use treg_core::dim_estimator::doubling_sizes;
use treg_core::generators::{GeneratorKind, GeneratorSpec};
use treg_core::presets::{preset, PRESET_NAMES};
use treg_core::uniformity::default_etas;
use treg_core::verify::{Fault, VerifyConfig};
use treg_core::{Result, TregError};

use commands::{CollapseScanArgs, EstimateDimArgs, Manifest, MstArgs, OptimizeArgs, Outcome, Resolved, Source};

#[derive(Parser)]
#[command(name = "treg", version, about = "MST-based point-cloud regularization experiments")]
struct Cli {
    /// Cap on worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimum spanning tree of a cloud: prints its length, writes edges.csv.
    Mst {
        #[command(flatten)]
        cloud: CloudArgs,
        #[arg(long, default_value = "treg-out")]
        out: PathBuf,
    },
    /// Optimize a cloud and write its trajectory.
    Optimize(Box<OptimizeCli>),
    /// Estimate intrinsic dimension from MST length growth.
    EstimateDim {
        #[command(flatten)]
        cloud: CloudArgs,
        /// Comma-separated sample sizes (default 256, 512, ..., 8192).
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value = "treg-out")]
        out: PathBuf,
    },
    /// -L_E of a Gaussian cloud as trailing coordinates are zeroed.
    CollapseScan {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 256)]
        dim: usize,
        /// Comma-separated collapse levels (default 0, 0.1, ..., 0.9).
        #[arg(long, value_delimiter = ',')]
        etas: Option<Vec<f64>>,
        #[arg(long, env = "TREG_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "treg-out")]
        out: PathBuf,
    },
    /// Run the property suite.
    Verify {
        /// Run only blocks whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, env = "TREG_SEED", default_value_t = 0)]
        seed: u64,
        /// Deliberately break a component to check the suite catches it.
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
        #[arg(long, default_value = "treg-out")]
        out: PathBuf,
    },
    /// Re-run a command from its manifest.json.
    Replay {
        manifest: PathBuf,
        /// Write outputs here instead of the manifest's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CloudArgs {
    /// Point-cloud CSV with header x0,...,x{d-1}.
    #[arg(long, conflicts_with = "generator")]
    input: Option<PathBuf>,
    #[arg(long)]
    generator: Option<GeneratorKind>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    /// Generator parameter as name=value; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    #[arg(long, env = "TREG_SEED")]
    seed: Option<u64>,
}

impl CloudArgs {
    fn generator_spec(&self, kind: GeneratorKind, default_n: usize, default_d: usize) -> GeneratorSpec {
        let mut spec = GeneratorSpec::new(kind, self.n.unwrap_or(default_n), self.dim.unwrap_or(default_d), self.seed.unwrap_or(0));
        spec.params = self.params.iter().cloned().collect();
        spec.params = spec.resolved_params();
        spec
    }

    fn source(&self, default_n: usize, default_d: usize) -> Result<Source> {
        match (&self.input, self.generator) {
            (Some(path), _) => Ok(Source::Input(path.canonicalize().unwrap_or_else(|_| path.clone()))),
            (None, Some(kind)) => {
                let spec = self.generator_spec(kind, default_n, default_d);
                spec.validate()?;
                Ok(Source::Generator(spec))
            }
            (None, None) => Err(TregError::param("generator", "pass --input or --generator")),
        }
    }
}

#[derive(Args)]
struct OptimizeCli {
    #[command(flatten)]
    cloud: CloudArgs,
    /// Calibrated experiment setup; other flags override its values.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES))]
    preset: Option<String>,
    #[arg(long, value_enum)]
    objective: Option<ObjectiveArg>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long, value_enum)]
    constraint: Option<ConstraintArg>,
    /// Ball radius for `--constraint clamp`.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    record_every: Option<usize>,
    #[arg(long, default_value = "treg-out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Treg,
    TregsTwoView,
    VarCov,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Gd,
    Adam,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstraintArg {
    None,
    SoftSphere,
    Clamp,
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

impl OptimizeCli {
    fn resolve(&self) -> Result<OptimizeArgs> {
        let (source, mut optim) = match &self.preset {
            Some(name) => {
                let p = preset(name, self.cloud.seed.unwrap_or(0))?;
                let source = match (&self.cloud.input, self.cloud.generator) {
                    (None, None) => {
                        // Preset init, with any shape or parameter overrides applied.
                        let kind = p.init.kind;
                        let mut spec = self.cloud.generator_spec(kind, p.init.n, p.init.d);
                        spec.params = p.init.params.clone();
                        spec.params.extend(self.cloud.params.iter().cloned());
                        spec.params = spec.resolved_params();
                        spec.validate()?;
                        Source::Generator(spec)
                    }
                    _ => self.cloud.source(p.init.n, p.init.d)?,
                };
                (source, p.config)
            }
            None => {
                let cfg = OptimConfig { seed: self.cloud.seed.unwrap_or(0), ..Default::default() };
                (self.cloud.source(256, 3)?, cfg)
            }
        };
        if let Some(o) = self.objective {
            optim.objective = match o {
                ObjectiveArg::Treg => Objective::Treg,
                ObjectiveArg::TregsTwoView => Objective::TregsTwoView,
                ObjectiveArg::VarCov => Objective::VarCov,
            };
        }
        if let Some(m) = self.method {
            optim.method = match m {
                MethodArg::Gd => Method::GradientDescent,
                MethodArg::Adam => Method::Adam,
            };
        }
        if let Some(c) = self.constraint {
            optim.constraint = match c {
                ConstraintArg::None => Constraint::None,
                ConstraintArg::SoftSphere => Constraint::SoftSphere,
                ConstraintArg::Clamp => Constraint::ClampToBall { radius: self.radius },
            };
        }
        let w = &mut optim.weights;
        for (slot, value) in [
            (&mut w.gamma, self.gamma),
            (&mut w.lambda_s, self.lambda),
            (&mut w.beta, self.beta),
            (&mut w.nu, self.nu),
            (&mut w.tau, self.tau),
        ] {
            if let Some(v) = value {
                *slot = v;
            }
        }
        if let Some(s) = self.steps {
            optim.steps = s;
        }
        if let Some(lr) = self.lr {
            optim.lr = lr;
        }
        if let Some(r) = self.record_every {
            optim.record_every = r;
        }
        optim.validate()?;
        Ok(OptimizeArgs { preset: self.preset.clone(), source, optim })
    }
}

fn resolve(command: Command) -> Result<Manifest> {
    let (resolved, out) = match command {
        Command::Mst { cloud, out } => (Resolved::Mst(MstArgs { source: cloud.source(256, 2)? }), out),
        Command::Optimize(o) => (Resolved::Optimize(o.resolve()?), o.out.clone()),
        Command::EstimateDim { cloud, sizes, trials, out } => {
            let kind = cloud
                .generator
                .ok_or_else(|| TregError::param("generator", "estimate-dim samples from a --generator"))?;
            let sampler = cloud.generator_spec(kind, 1, 2);
            sampler.validate()?;
            let args = EstimateDimArgs {
                seed: sampler.seed,
                sampler,
                sizes: sizes.unwrap_or_else(|| doubling_sizes(256, 8192)),
                trials,
            };
            (Resolved::EstimateDim(args), out)
        }
        Command::CollapseScan { n, dim, etas, seed, out } => {
            let args = CollapseScanArgs { n, d: dim, etas: etas.unwrap_or_else(default_etas), seed };
            (Resolved::CollapseScan(args), out)
        }
        Command::Verify { filter, seed, inject_fault, out } => {
            let fault = inject_fault.map(|f| f.parse::<Fault>()).transpose()?;
            (Resolved::Verify(VerifyConfig { filter, fault, seed }), out)
        }
        Command::Replay { manifest, out } => {
            let mut m = Manifest::read(&manifest)?;
            if let Some(out) = out {
                m.out_dir = out;
            }
            return Ok(m);
        }
    };
    Ok(Manifest::new(resolved, out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    match resolve(cli.command).and_then(|m| commands::run(&m)) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
