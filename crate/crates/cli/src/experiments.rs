//! One driver per experiment. Every driver expands its configuration into a
//! flat, ordered job list, runs the jobs in parallel and keeps job order in
//! the output.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use rgsvd::analysis::{bound_check, omega_interaction, sensitivity_indices, sensitivity_indices_dense, BoundInputs};
use rgsvd::gsvd::{gheig_gsvd, rand_gsvd, two_sided_gsvd, Cost, GsvdFactors, Route, SketchConfig};
use rgsvd::operators::InexactOp;
use rgsvd::sampling::{exact_preconditioner, jacobi_preconditioner, Preconditioner, SamplerSpec};
use rgsvd::{linalg, matrix_market, DenseMatrix};

use crate::config::{Experiment, ExperimentConfig, PrecondKind};
use crate::output::Row;
use crate::problem::{build_problem, Problem};
use crate::{CliError, VERSION};

/// Slack of the bound checks, relative to `σ₁`.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Randomized range finder on `A` with `q` subspace iterations.
    Gsvd,
    /// Range finder on the pencil `(AᵀSA, T)`, without subspace iterations.
    GenEig,
    /// Independent left and right sketches.
    TwoSided,
}

impl Method {
    pub fn label(self, q: usize) -> String {
        match self {
            Method::Gsvd => format!("gsvd-q{q}"),
            Method::GenEig => "geneig".into(),
            Method::TwoSided => "twosided".into(),
        }
    }

    pub fn route(self) -> Route {
        match self {
            Method::Gsvd => Route::Direct,
            Method::GenEig => Route::Pencil,
            Method::TwoSided => Route::TwoSided,
        }
    }

    /// Inverse of [`Method::label`], returning the method and its `q`.
    pub fn parse(label: &str) -> Option<(Method, usize)> {
        match label {
            "geneig" => Some((Method::GenEig, 0)),
            "twosided" => Some((Method::TwoSided, 0)),
            other => other.strip_prefix("gsvd-q")?.parse().ok().map(|q| (Method::Gsvd, q)),
        }
    }
}

/// A sampling preconditioner with `κ₂(LᵀTL)`.
pub struct Precond {
    pub name: String,
    pub l: Arc<dyn Preconditioner>,
    pub kappa_eff: f64,
}

impl Precond {
    pub fn build(kind: PrecondKind, problem: &Problem) -> Result<Precond, CliError> {
        let l: Arc<dyn Preconditioner> = match kind {
            PrecondKind::Exact => Arc::new(exact_preconditioner(&problem.t)?),
            PrecondKind::Jacobi => Arc::new(jacobi_preconditioner(&problem.t)?),
        };
        let lm = l.materialize();
        let ltl = lm.t_matmul(&problem.t.matrix().matmul(&lm)).symmetrized();
        Ok(Precond {
            name: kind.name().into(),
            kappa_eff: linalg::spd_condition_number(&ltl),
            l,
        })
    }
}

struct Job<'a> {
    problem: &'a Problem,
    method: Method,
    k: usize,
    q: usize,
    seed: u64,
    precond: Option<&'a Precond>,
    rel_tol: Option<f64>,
}

struct Run {
    /// Rank-`ℓ` factors; the rank-`k` approximation is their truncation.
    factors: GsvdFactors,
    cost: Cost,
    wall: f64,
    /// The sketch, kept when bounds apply.
    omega: Option<DenseMatrix>,
}

fn execute(job: &Job, p: usize) -> Result<Run, CliError> {
    let (a, s, t) = job.problem.ops();
    let sampler = match job.precond {
        Some(pc) => SamplerSpec::preconditioned(pc.l.clone(), job.seed),
        None => SamplerSpec::gaussian(job.seed),
    };
    let cfg = SketchConfig::new(job.k, p, job.q, job.seed).with_sampler(sampler).untruncated();
    let start = Instant::now();
    let factors = match (job.method, job.rel_tol) {
        (Method::Gsvd, Some(tol)) => rand_gsvd(&InexactOp::new(&a, tol, job.seed)?, &s, &t, &cfg)?,
        (Method::Gsvd, None) => rand_gsvd(&a, &s, &t, &cfg)?,
        (Method::GenEig, _) => gheig_gsvd(&a, &s, &t, &cfg)?,
        (Method::TwoSided, _) => two_sided_gsvd(&a, &s, &t, &cfg)?,
    };
    let wall = start.elapsed().as_secs_f64();
    let cost = Cost::observe(&a, &s, &t);
    let omega = match (job.method, job.rel_tol) {
        (Method::Gsvd, None) => Some(cfg.sampler.draw(job.problem.n(), cfg.l())?),
        _ => None,
    };
    Ok(Run {
        factors,
        cost,
        wall,
        omega,
    })
}

fn base_row(cfg: &ExperimentConfig, job: &Job, run: &Run) -> Row {
    let pr = job.problem;
    let norm = pr.meter.norm();
    let r = run.factors.refinement;
    Row {
        experiment: cfg.experiment.name().into(),
        matrix: pr.matrix.clone(),
        weights: pr.weights.clone(),
        method: job.method.label(job.q),
        m: pr.m(),
        n: pr.n(),
        k: job.k,
        p: cfg.p,
        q: job.q,
        seed: job.seed,
        kappa_t: pr.kappa_t,
        kappa_eff: job.precond.map_or(pr.kappa_t, |pc| pc.kappa_eff),
        precond: job.precond.map(|pc| pc.name.clone()),
        rel_tol: job.rel_tol,
        rel_error: Some(pr.meter.rel_error(&run.factors.truncated(job.k))),
        best_possible: pr.meter.truth().sigma_at(job.k) / norm,
        projection_error: Some(pr.meter.rel_error(&run.factors)),
        a_applies: run.cost.a.applies,
        a_transposes: run.cost.a.transposes,
        s_applies: run.cost.s.applies,
        s_solves: run.cost.s.solves,
        t_applies: run.cost.t.applies,
        t_solves: run.cost.t.solves,
        refine_s_applies: r.s.applies,
        refine_s_solves: r.s.solves,
        refine_t_applies: r.t.applies,
        refine_t_solves: r.t.solves,
        wall_time_s: cfg.timing.then_some(run.wall),
        version: VERSION.into(),
        ..Row::default()
    }
}

/// Fills the bound columns for runs that kept their sketch.
fn add_bounds(row: &mut Row, cfg: &ExperimentConfig, job: &Job, run: &Run) {
    let Some(omega) = &run.omega else { return };
    let pr = job.problem;
    let truth = pr.meter.truth();
    let terms = match omega_interaction(omega, pr.t.matrix(), truth, job.k) {
        Ok(t) => Some(t),
        Err(e) => {
            log::warn!("{} k={} seed={}: per-sample bounds skipped: {e}", pr.matrix, job.k, job.seed);
            None
        }
    };
    let inputs = BoundInputs {
        k: job.k,
        p: cfg.p,
        q: job.q,
        delta: cfg.delta,
        n: pr.n(),
        sigma: truth.sigma.clone(),
        kappa: row.kappa_eff,
        omega: terms,
    };
    let norm = pr.meter.norm();
    let rep = bound_check(&inputs, pr.meter.abs_error(&run.factors), BOUND_SLACK * norm);
    let rel = |x: Option<f64>| x.map(|v| v / norm);
    row.bound_gap_dependent = rel(rep.gap_dependent);
    row.bound_gap_dependent_factored = rel(rep.gap_dependent_factored);
    row.bound_gap_independent = rel(rep.gap_independent);
    row.bound_prob_gap_dependent = rel(rep.prob_gap_dependent);
    row.bound_prob_gap_independent = rel(rep.prob_gap_independent);
    row.per_sample_ok = rep.per_sample_holds();
    row.probabilistic_ok = rep.probabilistic_holds();
}

fn summary_row(cfg: &ExperimentConfig, job: &Job, run: Run) -> Result<Vec<Row>, CliError> {
    let mut row = base_row(cfg, job, &run);
    add_bounds(&mut row, cfg, job, &run);
    Ok(vec![row])
}

/// One row per leading index with singular-value errors and canonical angles.
fn per_index_rows(cfg: &ExperimentConfig, job: &Job, run: Run) -> Result<Vec<Row>, CliError> {
    let base = base_row(cfg, job, &run);
    let report = job.problem.meter.report(&run.factors, job.k)?;
    let truth = job.problem.meter.truth();
    Ok((0..job.k)
        .map(|j| Row {
            index: Some(j),
            sigma_exact: Some(truth.sigma_at(j)),
            sigma_hat: Some(run.factors.sigma[j]),
            sv_abs_error: Some(report.sv_abs_errors[j]),
            left_angle: Some(report.left_angles[j]),
            right_angle: Some(report.right_angles[j]),
            ..base.clone()
        })
        .collect())
}

fn run_jobs<F>(cfg: &ExperimentConfig, jobs: &[Job], rows: F) -> Result<Vec<Row>, CliError>
where
    F: Fn(&ExperimentConfig, &Job, Run) -> Result<Vec<Row>, CliError> + Sync,
{
    let chunks: Vec<Vec<Row>> = jobs
        .par_iter()
        .map(|job| rows(cfg, job, execute(job, cfg.p)?))
        .collect::<Result<_, _>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

fn problems(cfg: &ExperimentConfig, kappa: f64) -> Result<Vec<Problem>, CliError> {
    cfg.matrices.iter().map(|src| build_problem(src, cfg, kappa)).collect()
}

fn job<'a>(problem: &'a Problem, method: Method, k: usize, q: usize, seed: u64) -> Job<'a> {
    Job {
        problem,
        method,
        k,
        q,
        seed,
        precond: None,
        rel_tol: None,
    }
}

/// `gsvd-q{q}` jobs over problems, `k`, `q` and seeds, in that nesting order.
fn gsvd_jobs<'a>(cfg: &ExperimentConfig, problems: &'a [Problem]) -> Vec<Job<'a>> {
    let mut jobs = Vec::new();
    for pr in problems {
        for &k in &cfg.k_grid {
            for &q in &cfg.q_list {
                for &seed in &cfg.seeds {
                    jobs.push(job(pr, Method::Gsvd, k, q, seed));
                }
            }
        }
    }
    jobs
}

/// `gsvd-q{q}` for every `q`, then `geneig` and `twosided`.
fn comparison_jobs<'a>(cfg: &ExperimentConfig, problems: &'a [Problem]) -> Vec<Job<'a>> {
    let mut methods: Vec<(Method, usize)> = cfg.q_list.iter().map(|&q| (Method::Gsvd, q)).collect();
    methods.extend([(Method::GenEig, 0), (Method::TwoSided, 0)]);
    let mut jobs = Vec::new();
    for pr in problems {
        for &k in &cfg.k_grid {
            for &(method, q) in &methods {
                for &seed in &cfg.seeds {
                    jobs.push(job(pr, method, k, q, seed));
                }
            }
        }
    }
    jobs
}

fn accuracy(cfg: &ExperimentConfig) -> Result<Vec<Row>, CliError> {
    let probs = problems(cfg, cfg.kappa)?;
    run_jobs(cfg, &gsvd_jobs(cfg, &probs), summary_row)
}

fn method_comparison(cfg: &ExperimentConfig) -> Result<Vec<Row>, CliError> {
    let probs = problems(cfg, cfg.kappa)?;
    run_jobs(cfg, &comparison_jobs(cfg, &probs), summary_row)
}

fn sv_and_angles(cfg: &ExperimentConfig) -> Result<Vec<Row>, CliError> {
    let probs = problems(cfg, cfg.kappa)?;
    run_jobs(cfg, &comparison_jobs(cfg, &probs), per_index_rows)
}

fn condition_sweep(cfg: &ExperimentConfig) -> Result<Vec<Row>, CliError> {
    let mut rows = Vec::new();
    for &kappa in &cfg.kappa_list {
        let probs = problems(cfg, kappa)?;
        rows.extend(run_jobs(cfg, &gsvd_jobs(cfg, &probs), summary_row)?);
    }
    Ok(rows)
}

/// Unpreconditioned and preconditioned sampling side by side.
fn preconditioner(cfg: &ExperimentConfig) -> Result<Vec<Row>, CliError> {
    let probs = problems(cfg, cfg.kappa)?;
    let pcs: Vec<Precond> = probs.iter().map(|pr| Precond::build(cfg.precond, pr)).collect::<Result<_, _>>()?;
    let mut jobs = Vec::new();
    for (pr, pc) in probs.iter().zip(&pcs) {
        for &k in &cfg.k_grid {
            for &q in &cfg.q_list {
                for precond in [None, Some(pc)] {
                    for &seed in &cfg.seeds {
                        jobs.push(Job {
                            precond,
                            ..job(pr, Method::Gsvd, k, q, seed)
                        });
                    }
                }
            }
        }
    }
    run_jobs(cfg, &jobs, summary_row)
}

/// Exact products first, then each tolerance of `tol_list`.
fn inexactness(cfg: &ExperimentConfig) -> Result<Vec<Row>, CliError> {
    let probs = problems(cfg, cfg.kappa)?;
    let tols: Vec<Option<f64>> = std::iter::once(None).chain(cfg.tol_list.iter().copied().map(Some)).collect();
    let mut jobs = Vec::new();
    for pr in &probs {
        for &k in &cfg.k_grid {
            for &q in &cfg.q_list {
                for &rel_tol in &tols {
                    for &seed in &cfg.seeds {
                        jobs.push(Job {
                            rel_tol,
                            ..job(pr, Method::Gsvd, k, q, seed)
                        });
                    }
                }
            }
        }
    }
    run_jobs(cfg, &jobs, per_index_rows)
}

fn load_basis(cfg: &ExperimentConfig, n: usize) -> Result<DenseMatrix, CliError> {
    let Some(path) = &cfg.basis else {
        return Ok(DenseMatrix::identity(n));
    };
    let basis = matrix_market::read(path).map_err(|e| CliError::Usage(format!("--basis {}: {e}", path.display())))?;
    if basis.rows() != n {
        return Err(CliError::Usage(format!(
            "--basis: expected {n} rows, got {}",
            basis.rows()
        )));
    }
    Ok(basis)
}

/// One row per basis direction, with indices from the rank-`k` factors and
/// from dense products with `A`.
fn sensitivity(cfg: &ExperimentConfig) -> Result<Vec<Row>, CliError> {
    let probs = problems(cfg, cfg.kappa)?;
    let mut rows = Vec::new();
    for pr in &probs {
        let basis = load_basis(cfg, pr.n())?;
        let exact = sensitivity_indices_dense(pr.a.matrix(), pr.s.matrix(), pr.t.matrix(), &basis)?;
        let jobs = gsvd_jobs(cfg, std::slice::from_ref(pr));
        let per_job = |cfg: &ExperimentConfig, job: &Job, run: Run| -> Result<Vec<Row>, CliError> {
            let mut base = base_row(cfg, job, &run);
            add_bounds(&mut base, cfg, job, &run);
            let fk = run.factors.truncated(job.k);
            let approx = sensitivity_indices(&fk, &pr.t.share(), &basis)?;
            Ok(approx
                .iter()
                .zip(&exact)
                .enumerate()
                .map(|(i, (&s, &e))| Row {
                    index: Some(i),
                    sensitivity: Some(s),
                    sensitivity_exact: Some(e),
                    ..base.clone()
                })
                .collect())
        };
        rows.extend(run_jobs(cfg, &jobs, per_job)?);
    }
    Ok(rows)
}

/// Validates `cfg` and produces the result rows of its experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<Row>, CliError> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::AccuracyVsK | Experiment::BoundsAudit => accuracy(cfg),
        Experiment::MethodComparison => method_comparison(cfg),
        Experiment::SvAndAngles => sv_and_angles(cfg),
        Experiment::ConditionSweep => condition_sweep(cfg),
        Experiment::Preconditioner => preconditioner(cfg),
        Experiment::Inexactness => inexactness(cfg),
        Experiment::Sensitivity => sensitivity(cfg),
    }
}
