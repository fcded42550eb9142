use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rgsvd::testmatrices::{TestMatrixKind, DEFAULT_WEIGHT_KAPPA, DEFAULT_WEIGHT_SEED};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    AccuracyVsK,
    MethodComparison,
    SvAndAngles,
    ConditionSweep,
    Preconditioner,
    Inexactness,
    BoundsAudit,
    Sensitivity,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::AccuracyVsK,
        Experiment::MethodComparison,
        Experiment::SvAndAngles,
        Experiment::ConditionSweep,
        Experiment::Preconditioner,
        Experiment::Inexactness,
        Experiment::BoundsAudit,
        Experiment::Sensitivity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::AccuracyVsK => "accuracy_vs_k",
            Experiment::MethodComparison => "method_comparison",
            Experiment::SvAndAngles => "sv_and_angles",
            Experiment::ConditionSweep => "condition_sweep",
            Experiment::Preconditioner => "preconditioner",
            Experiment::Inexactness => "inexactness",
            Experiment::BoundsAudit => "bounds_audit",
            Experiment::Sensitivity => "sensitivity",
        }
    }

    fn default_matrices(self) -> Vec<MatrixSource> {
        match self {
            Experiment::AccuracyVsK | Experiment::MethodComparison | Experiment::BoundsAudit => {
                TestMatrixKind::ALL.into_iter().map(MatrixSource::Generated).collect()
            }
            Experiment::Inexactness => vec![MatrixSource::Generated(TestMatrixKind::Decay)],
            _ => vec![MatrixSource::Generated(TestMatrixKind::LowRankDecay)],
        }
    }

    fn default_k_grid(self) -> Vec<usize> {
        match self {
            Experiment::AccuracyVsK | Experiment::ConditionSweep | Experiment::Preconditioner => {
                (1..=12).map(|i| 5 * i).collect()
            }
            Experiment::MethodComparison | Experiment::SvAndAngles => vec![50],
            Experiment::BoundsAudit => vec![10, 30, 50],
            Experiment::Inexactness | Experiment::Sensitivity => vec![10],
        }
    }

    fn default_q_list(self) -> Vec<usize> {
        match self {
            Experiment::BoundsAudit => vec![0, 1, 2],
            Experiment::Inexactness => vec![2],
            Experiment::Sensitivity => vec![1],
            _ => vec![0, 1],
        }
    }

    fn default_seed_count(self) -> u64 {
        match self {
            Experiment::MethodComparison | Experiment::Preconditioner => 20,
            Experiment::BoundsAudit => 100,
            Experiment::Sensitivity => 1,
            _ => 10,
        }
    }

    fn default_kappa(self) -> f64 {
        match self {
            Experiment::Preconditioner => 1e6,
            _ => DEFAULT_WEIGHT_KAPPA,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown experiment '{s}'")))
    }
}

/// A generator name or a Matrix Market file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub enum MatrixSource {
    Generated(TestMatrixKind),
    File(PathBuf),
}

impl MatrixSource {
    pub fn parse(s: &str) -> MatrixSource {
        match s.parse::<TestMatrixKind>() {
            Ok(kind) => MatrixSource::Generated(kind),
            Err(_) => MatrixSource::File(PathBuf::from(s)),
        }
    }

    pub fn label(&self) -> String {
        match self {
            MatrixSource::Generated(kind) => kind.name().to_string(),
            MatrixSource::File(p) => p.display().to_string(),
        }
    }
}

impl From<MatrixSource> for String {
    fn from(m: MatrixSource) -> String {
        m.label()
    }
}

impl From<String> for MatrixSource {
    fn from(s: String) -> MatrixSource {
        MatrixSource::parse(&s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    /// `S = minij(m)`, `T` log-uniform randsvd.
    Default,
    Identity,
    Files { s: PathBuf, t: PathBuf },
}

impl WeightSource {
    pub fn parse(s: &str) -> Result<WeightSource, CliError> {
        match s {
            "default" => Ok(WeightSource::Default),
            "identity" => Ok(WeightSource::Identity),
            other => match other.split_once(',') {
                Some((s, t)) if !s.is_empty() && !t.is_empty() => Ok(WeightSource::Files {
                    s: s.into(),
                    t: t.into(),
                }),
                _ => Err(CliError::Usage(format!(
                    "--weights: expected 'default', 'identity' or 'S.mtx,T.mtx', got '{other}'"
                ))),
            },
        }
    }

    pub fn label(&self) -> String {
        match self {
            WeightSource::Default => "default".into(),
            WeightSource::Identity => "identity".into(),
            WeightSource::Files { s, t } => format!("{},{}", s.display(), t.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PrecondKind {
    Exact,
    Jacobi,
}

impl PrecondKind {
    pub fn name(self) -> &'static str {
        match self {
            PrecondKind::Exact => "exact",
            PrecondKind::Jacobi => "jacobi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// Parses `a..b` (half open) or a comma-separated list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("--seed-list: cannot parse '{s}'"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        return Ok((a..b).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}

/// Fully resolved inputs of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub matrices: Vec<MatrixSource>,
    pub n: usize,
    pub matrix_seed: u64,
    pub rank: usize,
    pub weights: WeightSource,
    /// `κ₂(T)` of the default weight.
    pub kappa: f64,
    /// `κ₂(T)` grid swept by `condition_sweep`.
    pub kappa_list: Vec<f64>,
    pub weight_seed: u64,
    pub k_grid: Vec<usize>,
    pub p: usize,
    pub q_list: Vec<usize>,
    pub seeds: Vec<u64>,
    pub delta: f64,
    pub precond: PrecondKind,
    pub tol_list: Vec<f64>,
    pub basis: Option<PathBuf>,
    pub timing: bool,
}

impl ExperimentConfig {
    /// Defaults used by the command line for `experiment`.
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            matrices: experiment.default_matrices(),
            n: 128,
            matrix_seed: 1,
            rank: 15,
            weights: WeightSource::Default,
            kappa: experiment.default_kappa(),
            kappa_list: vec![10.0, 1e4, 1e7, 1e10],
            weight_seed: DEFAULT_WEIGHT_SEED,
            k_grid: experiment.default_k_grid(),
            p: 10,
            q_list: experiment.default_q_list(),
            seeds: (0..experiment.default_seed_count()).collect(),
            delta: 0.1,
            precond: PrecondKind::Exact,
            tol_list: vec![1e-3, 1e-6, 1e-9],
            basis: None,
            timing: false,
        }
    }

    /// Checks that do not need the matrices; shape checks happen on load.
    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |field: &str, msg: String| Err(CliError::Usage(format!("{field}: {msg}")));
        if self.seeds.is_empty() {
            return usage("--seed-list", "at least one seed is required".into());
        }
        if self.matrices.is_empty() {
            return usage("--matrix", "at least one matrix is required".into());
        }
        if self.k_grid.is_empty() || self.k_grid.contains(&0) {
            return usage("--k-grid", format!("values must be positive, got {:?}", self.k_grid));
        }
        if self.q_list.is_empty() {
            return usage("--q-list", "at least one value is required".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return usage("--delta", format!("must lie in (0, 1), got {}", self.delta));
        }
        let kappas = std::iter::once(self.kappa).chain(self.kappa_list.iter().copied());
        if let Some(bad) = kappas.into_iter().find(|k| !(*k >= 1.0 && k.is_finite())) {
            return usage("--kappa", format!("condition numbers must be finite and >= 1, got {bad}"));
        }
        if let Some(bad) = self.tol_list.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return usage("--tol-list", format!("tolerances must be finite and >= 0, got {bad}"));
        }
        if self.n == 0 {
            return usage("--n", "must be positive".into());
        }
        Ok(())
    }

    pub fn max_l(&self) -> usize {
        self.k_grid.iter().max().copied().unwrap_or(0) + self.p
    }
}
