//! Command-line vocabulary shared by the experiment subcommands.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_seeds, Experiment, ExperimentConfig, Format, MatrixSource, PrecondKind, WeightSource};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "rgsvd", version, about = "Randomized generalized SVD benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank-k error against the best possible error over a k grid.
    #[command(name = "accuracy_vs_k")]
    AccuracyVsK(CommonArgs),
    /// gsvd-q0, gsvd-q1, geneig and twosided at fixed k.
    #[command(name = "method_comparison")]
    MethodComparison(CommonArgs),
    /// Per-index singular value errors and canonical angles.
    #[command(name = "sv_and_angles")]
    SvAndAngles(CommonArgs),
    /// Error as the condition number of T grows.
    #[command(name = "condition_sweep")]
    ConditionSweep(SweepArgs),
    /// Gaussian against preconditioned sampling.
    #[command(name = "preconditioner")]
    Preconditioner(PrecondArgs),
    /// Singular value errors under inexact products with A.
    #[command(name = "inexactness")]
    Inexactness(InexactArgs),
    /// Realized errors against every error bound.
    #[command(name = "bounds_audit")]
    BoundsAudit(CommonArgs),
    /// Sensitivity indices from the low-rank factors.
    #[command(name = "sensitivity")]
    Sensitivity(SensitivityArgs),
    /// Writes a generated matrix in Matrix Market format.
    #[command(name = "generate")]
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Generator name (controlled_gap, lowrank_noise, lowrank_decay, decay) or
    /// Matrix Market file; repeatable.
    #[arg(long = "matrix", value_name = "NAME|FILE")]
    pub matrices: Vec<String>,
    /// Size of generated matrices.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub matrix_seed: Option<u64>,
    /// Rank parameter of generated matrices.
    #[arg(long)]
    pub rank: Option<usize>,
    /// 'default', 'identity' or 'S.mtx,T.mtx'.
    #[arg(long)]
    pub weights: Option<String>,
    /// Condition number of the default T.
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub weight_seed: Option<u64>,
    #[arg(short = 'k', long, value_delimiter = ',')]
    pub k_grid: Vec<usize>,
    /// Oversampling.
    #[arg(short = 'p')]
    pub p: Option<usize>,
    #[arg(short = 'q', long, value_delimiter = ',')]
    pub q_list: Vec<usize>,
    /// 'a..b' (half open) or a comma-separated list.
    #[arg(long)]
    pub seed_list: Option<String>,
    /// Failure probability of the probabilistic bounds.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(short = 'o', long)]
    pub out: Option<PathBuf>,
    /// Defaults to the extension of --out, else csv.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Single-threaded execution.
    #[arg(long)]
    pub serial: bool,
    /// Record wall time per row; output is then no longer reproducible.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_delimiter = ',')]
    pub kappa_list: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct PrecondArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub precond: Option<PrecondKind>,
}

#[derive(Debug, Clone, Args)]
pub struct InexactArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Relative perturbation sizes of products with A.
    #[arg(long, value_delimiter = ',')]
    pub tol_list: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Matrix Market file whose columns are the directions; identity when absent.
    #[arg(long)]
    pub basis: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// A test matrix name, 'minij' or 'randsvd'.
    pub kind: String,
    #[arg(long, default_value_t = 128)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 15)]
    pub rank: usize,
    /// Condition number for randsvd.
    #[arg(long, default_value_t = 1e4)]
    pub kappa: f64,
    /// randsvd spectrum: 1-5 or one_large, one_small, geometric, arithmetic, log_uniform.
    #[arg(long, default_value = "log_uniform")]
    pub mode: String,
    #[arg(short = 'o', long)]
    pub out: Option<PathBuf>,
}

/// Where and how results are written.
#[derive(Debug, Clone)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: Format,
    pub serial: bool,
}

impl CommonArgs {
    fn apply(self, cfg: &mut ExperimentConfig) -> Result<OutputSpec, CliError> {
        if !self.matrices.is_empty() {
            cfg.matrices = self.matrices.iter().map(|m| MatrixSource::parse(m)).collect();
        }
        if let Some(w) = &self.weights {
            cfg.weights = WeightSource::parse(w)?;
        }
        if let Some(s) = &self.seed_list {
            cfg.seeds = parse_seeds(s)?;
        }
        if !self.k_grid.is_empty() {
            cfg.k_grid = self.k_grid;
        }
        if !self.q_list.is_empty() {
            cfg.q_list = self.q_list;
        }
        cfg.n = self.n.unwrap_or(cfg.n);
        cfg.matrix_seed = self.matrix_seed.unwrap_or(cfg.matrix_seed);
        cfg.rank = self.rank.unwrap_or(cfg.rank);
        cfg.kappa = self.kappa.unwrap_or(cfg.kappa);
        cfg.weight_seed = self.weight_seed.unwrap_or(cfg.weight_seed);
        cfg.p = self.p.unwrap_or(cfg.p);
        cfg.delta = self.delta.unwrap_or(cfg.delta);
        cfg.timing = self.timing;
        let format = self.format.unwrap_or_else(|| crate::output::format_for(self.out.as_deref()));
        Ok(OutputSpec {
            path: self.out,
            format,
            serial: self.serial,
        })
    }
}

impl Command {
    /// The resolved configuration of an experiment subcommand; `None` for `generate`.
    pub fn into_config(self) -> Result<Option<(ExperimentConfig, OutputSpec)>, CliError> {
        let (experiment, common) = match &self {
            Command::AccuracyVsK(c) => (Experiment::AccuracyVsK, c.clone()),
            Command::MethodComparison(c) => (Experiment::MethodComparison, c.clone()),
            Command::SvAndAngles(c) => (Experiment::SvAndAngles, c.clone()),
            Command::ConditionSweep(a) => (Experiment::ConditionSweep, a.common.clone()),
            Command::Preconditioner(a) => (Experiment::Preconditioner, a.common.clone()),
            Command::Inexactness(a) => (Experiment::Inexactness, a.common.clone()),
            Command::BoundsAudit(c) => (Experiment::BoundsAudit, c.clone()),
            Command::Sensitivity(a) => (Experiment::Sensitivity, a.common.clone()),
            Command::Generate(_) => return Ok(None),
        };
        let mut cfg = ExperimentConfig::new(experiment);
        let out = common.apply(&mut cfg)?;
        match self {
            Command::ConditionSweep(a) if !a.kappa_list.is_empty() => cfg.kappa_list = a.kappa_list,
            Command::Preconditioner(PrecondArgs { precond: Some(p), .. }) => cfg.precond = p,
            Command::Inexactness(a) if !a.tol_list.is_empty() => cfg.tol_list = a.tol_list,
            Command::Sensitivity(a) => cfg.basis = a.basis,
            _ => {}
        }
        Ok(Some((cfg, out)))
    }
}
