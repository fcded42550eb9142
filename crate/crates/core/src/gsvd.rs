//! Randomized GSVD drivers.
//!
//! All routes return factors with `ÛᵀSÛ = I`, `V̂ᵀTV̂ = I` and `A ≈ Û Σ̂ V̂ᵀ T`.
//! Operators are touched only through products and weight solves.

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::{dot, DenseMatrix};
use crate::operators::{Inverse, LinearOp, OpCounts, SpdCounts, SpdOp, Transposed};
use crate::sampling::{draw_gaussian, SamplerSpec};
use crate::weighted_qr::{weighted_cholqr, WeightedQrResult};

/// XORed into the seed for the second sketch of the two-sided route.
pub const TWO_SIDED_SEED_XOR: u64 = 0x2545_f491_4f6c_dd1d;

/// Relative size below which the k-th sketched singular value counts as zero.
pub const SKETCH_RANK_TOL: f64 = 1e-13;

/// Relative threshold below which a negative pencil eigenvalue is reported.
pub const NEGATIVE_EIGENVALUE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SketchConfig {
    /// Target rank.
    pub k: usize,
    /// Oversampling.
    pub p: usize,
    /// Subspace iterations.
    pub q: usize,
    pub sampler: SamplerSpec,
    /// Keep only the leading `k` triplets.
    pub truncate: bool,
}

impl SketchConfig {
    /// Gaussian sampling with truncation to `k`.
    pub fn new(k: usize, p: usize, q: usize, seed: u64) -> Self {
        SketchConfig {
            k,
            p,
            q,
            sampler: SamplerSpec::gaussian(seed),
            truncate: true,
        }
    }

    pub fn with_sampler(mut self, sampler: SamplerSpec) -> Self {
        self.sampler = sampler;
        self
    }

    pub fn untruncated(mut self) -> Self {
        self.truncate = false;
        self
    }

    /// Sketch width `ℓ = k + p`.
    pub fn l(&self) -> usize {
        self.k + self.p
    }

    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("target rank k must be at least 1".into()));
        }
        if self.l() > m.min(n) {
            return Err(Error::InvalidConfig(format!(
                "k + p = {} exceeds min(m, n) = {}",
                self.l(),
                m.min(n)
            )));
        }
        Ok(())
    }
}

/// Weight products spent on CholQR refinement passes, on top of the
/// algorithmic cost.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RefinementCost {
    pub s: SpdCounts,
    pub t: SpdCounts,
}

impl RefinementCost {
    pub fn is_zero(&self) -> bool {
        *self == RefinementCost::default()
    }

    /// Cost seen from the other side when `(S, T)` plays `(T⁻¹, S⁻¹)`.
    fn transposed(self) -> RefinementCost {
        let flip = |c: SpdCounts| SpdCounts {
            applies: c.solves,
            solves: c.applies,
        };
        RefinementCost {
            s: flip(self.t),
            t: flip(self.s),
        }
    }
}

/// Adds the refinement passes of `res` to `counts`, as applies of the weight
/// or as solves when the weight was an inverse.
fn charge(counts: &mut SpdCounts, res: &WeightedQrResult, inverse: bool) {
    let extra = (res.refinements * res.q.cols()) as u64;
    if inverse {
        counts.solves += extra;
    } else {
        counts.applies += extra;
    }
}

/// The four GSVD routes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Route {
    Direct,
    Transpose,
    TwoSided,
    Pencil,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Direct => "direct",
            Route::Transpose => "transpose",
            Route::TwoSided => "two_sided",
            Route::Pencil => "pencil",
        }
    }

    /// Operator products the route needs for sketch width `l` and `q`
    /// subspace iterations, excluding CholQR refinement passes.
    pub fn cost(self, l: usize, q: usize) -> Cost {
        let (l, q) = (l as u64, q as u64);
        let c = |a, at, sa, ss, ta, ts| Cost {
            a: OpCounts {
                applies: a,
                transposes: at,
            },
            s: SpdCounts {
                applies: sa,
                solves: ss,
            },
            t: SpdCounts {
                applies: ta,
                solves: ts,
            },
        };
        let r = (q + 1) * l;
        match self {
            Route::Direct => c(r, r, r, 0, l, r),
            Route::Transpose => c(r, r, r, l, 0, r),
            Route::TwoSided => c(2 * l, l, l, 0, 0, l),
            Route::Pencil => c(r + l, r, r + 2 * l, 0, r, r),
        }
    }
}

/// Product counts of `A`, `S` and `T`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Cost {
    pub a: OpCounts,
    pub s: SpdCounts,
    pub t: SpdCounts,
}

impl Cost {
    /// Current counters of the three operators.
    pub fn observe<A, S, T>(a: &A, s: &S, t: &T) -> Cost
    where
        A: LinearOp + ?Sized,
        S: SpdOp + ?Sized,
        T: SpdOp + ?Sized,
    {
        Cost {
            a: a.counts(),
            s: s.counts(),
            t: t.counts(),
        }
    }

    pub fn with_refinement(mut self, r: RefinementCost) -> Cost {
        self.s.applies += r.s.applies;
        self.s.solves += r.s.solves;
        self.t.applies += r.t.applies;
        self.t.solves += r.t.solves;
        self
    }

    /// Counter increase from `before` to `self`.
    pub fn since(&self, before: &Cost) -> Cost {
        Cost {
            a: OpCounts {
                applies: self.a.applies - before.a.applies,
                transposes: self.a.transposes - before.a.transposes,
            },
            s: SpdCounts {
                applies: self.s.applies - before.s.applies,
                solves: self.s.solves - before.s.solves,
            },
            t: SpdCounts {
                applies: self.t.applies - before.t.applies,
                solves: self.t.solves - before.t.solves,
            },
        }
    }
}

/// `(Û, Σ̂, V̂)` with `Σ̂` nonincreasing.
#[derive(Debug, Clone)]
pub struct GsvdFactors {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
    pub refinement: RefinementCost,
}

impl GsvdFactors {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// Leading `r` triplets.
    pub fn truncated(&self, r: usize) -> GsvdFactors {
        let r = r.min(self.rank());
        GsvdFactors {
            u: self.u.columns_range(0..r),
            sigma: self.sigma[..r].to_vec(),
            v: self.v.columns_range(0..r),
            refinement: self.refinement,
        }
    }

    fn finish(self, k: usize, truncate: bool) -> GsvdFactors {
        if truncate {
            self.truncated(k)
        } else {
            self
        }
    }
}

fn check_shapes<A, S, T>(a: &A, s: &S, t: &T) -> Result<()>
where
    A: LinearOp + ?Sized,
    S: SpdOp + ?Sized,
    T: SpdOp + ?Sized,
{
    if s.dim() != a.nrows() {
        return Err(Error::DimensionMismatch {
            context: "S must match the rows of A",
            expected: a.nrows(),
            got: s.dim(),
        });
    }
    if t.dim() != a.ncols() {
        return Err(Error::DimensionMismatch {
            context: "T must match the columns of A",
            expected: a.ncols(),
            got: t.dim(),
        });
    }
    Ok(())
}

fn check_sketch_rank(sigma: &[f64], k: usize, stage: &str) -> Result<()> {
    let top = sigma.first().copied().unwrap_or(0.0);
    let kth = sigma.get(k - 1).copied().unwrap_or(0.0);
    let tol = SKETCH_RANK_TOL * sigma.len() as f64 * top;
    if top == 0.0 || kth <= tol {
        let column = sigma.iter().take_while(|&&s| s > tol && top > 0.0).count();
        return Err(Error::RankDeficient {
            column,
            stage: format!("{stage}: sketch has fewer than k = {k} significant directions"),
        });
    }
    Ok(())
}

/// `Q` with `QᵀSQ = I` spanning `(A T⁻¹ Aᵀ S)^q A Ω`, plus `S Q`.
#[derive(Debug, Clone)]
pub struct Subspace {
    pub q: DenseMatrix,
    pub sq: DenseMatrix,
    pub refinement: RefinementCost,
}

/// Randomized subspace iteration with weighted inner products.
pub fn rand_subspace<A, S, T>(a: &A, s: &S, t: &T, omega: &DenseMatrix, q: usize) -> Result<Subspace>
where
    A: LinearOp + ?Sized,
    S: SpdOp + ?Sized,
    T: SpdOp + ?Sized,
{
    check_shapes(a, s, t)?;
    if omega.rows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            context: "sketch rows must match the columns of A",
            expected: a.ncols(),
            got: omega.rows(),
        });
    }
    let y = a.apply_block(omega)?;
    let mut refinement = RefinementCost::default();
    let res = weighted_cholqr(&y, s, true).map_err(|e| e.in_stage("range finder, iteration 0"))?;
    charge(&mut refinement.s, &res, false);
    let (mut qm, mut sq) = (res.q, res.wq.expect("requested"));
    let t_inv = Inverse(t);
    for it in 1..=q {
        let stage = format!("range finder, iteration {it}");
        let y = a.apply_transpose_block(&sq)?;
        let z = weighted_cholqr(&y, &t_inv, true).map_err(|e| e.in_stage(stage.clone()))?;
        charge(&mut refinement.t, &z, true);
        let y = a.apply_block(&z.wq.expect("requested"))?;
        let res = weighted_cholqr(&y, s, true).map_err(|e| e.in_stage(stage))?;
        charge(&mut refinement.s, &res, false);
        qm = res.q;
        sq = res.wq.expect("requested");
    }
    Ok(Subspace { q: qm, sq, refinement })
}

/// Intermediate products of the two-stage algorithm.
struct TwoStage {
    sub: Subspace,
    q_b: DenseMatrix,
    t_q_b: Option<DenseMatrix>,
    svd: linalg::Svd,
}

fn two_stage<A, S, T>(a: &A, s: &S, t: &T, omega: &DenseMatrix, q: usize, want_tqb: bool) -> Result<TwoStage>
where
    A: LinearOp + ?Sized,
    S: SpdOp + ?Sized,
    T: SpdOp + ?Sized,
{
    let mut sub = rand_subspace(a, s, t, omega, q)?;
    let b = a.apply_transpose_block(&sub.sq)?;
    let x = t.solve_block(&b)?;
    let qb = weighted_cholqr(&x, t, want_tqb).map_err(|e| e.in_stage("projection"))?;
    charge(&mut sub.refinement.t, &qb, false);
    let svd = linalg::svd(&qb.r.transpose());
    Ok(TwoStage {
        sub,
        q_b: qb.q,
        t_q_b: qb.wq,
        svd,
    })
}

/// Randomized GSVD with a sketch drawn from `cfg.sampler`.
pub fn rand_gsvd<A, S, T>(a: &A, s: &S, t: &T, cfg: &SketchConfig) -> Result<GsvdFactors>
where
    A: LinearOp + ?Sized,
    S: SpdOp + ?Sized,
    T: SpdOp + ?Sized,
{
    cfg.validate(a.nrows(), a.ncols())?;
    let omega = cfg.sampler.draw(a.ncols(), cfg.l())?;
    rand_gsvd_with_sketch(a, s, t, &omega, cfg)
}

/// Randomized GSVD with a caller-supplied `n x ℓ` sketch.
pub fn rand_gsvd_with_sketch<A, S, T>(
    a: &A,
    s: &S,
    t: &T,
    omega: &DenseMatrix,
    cfg: &SketchConfig,
) -> Result<GsvdFactors>
where
    A: LinearOp + ?Sized,
    S: SpdOp + ?Sized,
    T: SpdOp + ?Sized,
{
    cfg.validate(a.nrows(), a.ncols())?;
    let ts = two_stage(a, s, t, omega, cfg.q, false)?;
    check_sketch_rank(&ts.svd.s, cfg.k, "randomized GSVD")?;
    Ok(GsvdFactors {
        u: ts.sub.q.matmul(&ts.svd.u),
        sigma: ts.svd.s,
        v: ts.q_b.matmul(&ts.svd.v),
        refinement: ts.sub.refinement,
    }
    .finish(cfg.k, cfg.truncate))
}

/// Runs the two-stage algorithm on `Aᵀ` with weights `(T⁻¹, S⁻¹)` and maps
/// the factors back. Costs `ℓ` solves with `S` beyond the direct route.
pub fn rand_gsvd_transpose<A, S, T>(a: &A, s: &S, t: &T, cfg: &SketchConfig) -> Result<GsvdFactors>
where
    A: LinearOp + ?Sized,
    S: SpdOp + ?Sized,
    T: SpdOp + ?Sized,
{
    check_shapes(a, s, t)?;
    cfg.validate(a.nrows(), a.ncols())?;
    let omega = cfg.sampler.draw(a.nrows(), cfg.l())?;
    let at = Transposed(a);
    let (s2, t2) = (Inverse(t), Inverse(s));
    let ts = two_stage(&at, &s2, &t2, &omega, cfg.q, true)?;
    check_sketch_rank(&ts.svd.s, cfg.k, "transposed randomized GSVD")?;
    // Aᵀ ≈ Û' Σ̂ V̂'ᵀ S⁻¹ gives Û = S⁻¹ V̂' and V̂ = T⁻¹ Û'.
    let s_inv_qb = ts.t_q_b.expect("requested");
    Ok(GsvdFactors {
        u: s_inv_qb.matmul(&ts.svd.v),
        sigma: ts.svd.s,
        v: ts.sub.sq.matmul(&ts.svd.u),
        refinement: ts.sub.refinement.transposed(),
    }
    .finish(cfg.k, cfg.truncate))
}

/// Two independent sketches `AΩ` and `AᵀΨ`, combined through a small core
/// matrix `F = QᵀS A T⁻¹Z`. Subspace iterations are not used.
pub fn two_sided_gsvd<A, S, T>(a: &A, s: &S, t: &T, cfg: &SketchConfig) -> Result<GsvdFactors>
where
    A: LinearOp + ?Sized,
    S: SpdOp + ?Sized,
    T: SpdOp + ?Sized,
{
    check_shapes(a, s, t)?;
    cfg.validate(a.nrows(), a.ncols())?;
    let l = cfg.l();
    let omega = cfg.sampler.draw(a.ncols(), l)?;
    let psi = draw_gaussian(a.nrows(), l, cfg.sampler.seed ^ TWO_SIDED_SEED_XOR);
    let left = weighted_cholqr(&a.apply_block(&omega)?, s, true).map_err(|e| e.in_stage("left sketch"))?;
    let t_inv = Inverse(t);
    let right = weighted_cholqr(&a.apply_transpose_block(&psi)?, &t_inv, true)
        .map_err(|e| e.in_stage("right sketch"))?;
    let mut refinement = RefinementCost::default();
    charge(&mut refinement.s, &left, false);
    charge(&mut refinement.t, &right, true);
    let sq = left.wq.expect("requested");
    let tz = right.wq.expect("requested");
    let f = sq.t_matmul(&a.apply_block(&tz)?);
    let svd = linalg::svd(&f);
    check_sketch_rank(&svd.s, cfg.k, "two-sided GSVD")?;
    Ok(GsvdFactors {
        u: left.q.matmul(&svd.u),
        sigma: svd.s,
        v: tz.matmul(&svd.v),
        refinement,
    }
    .finish(cfg.k, cfg.truncate))
}

/// GSVD through the pencil `AᵀSA x = λ T x`: a range finder for
/// `C = T⁻¹AᵀSA` in the `T` inner product, a projected eigenproblem, and
/// left vectors recovered from `A V̂` (`ℓ` extra products with `A`).
pub fn gheig_gsvd<A, S, T>(a: &A, s: &S, t: &T, cfg: &SketchConfig) -> Result<GsvdFactors>
where
    A: LinearOp + ?Sized,
    S: SpdOp + ?Sized,
    T: SpdOp + ?Sized,
{
    check_shapes(a, s, t)?;
    cfg.validate(a.nrows(), a.ncols())?;
    let omega = cfg.sampler.draw(a.ncols(), cfg.l())?;
    let apply_c = |x: &DenseMatrix| -> Result<DenseMatrix> {
        let sax = s.apply_block(&a.apply_block(x)?)?;
        t.solve_block(&a.apply_transpose_block(&sax)?)
    };
    let mut refinement = RefinementCost::default();
    let res = weighted_cholqr(&apply_c(&omega)?, t, false)
        .map_err(|e| e.in_stage("pencil range finder, iteration 0"))?;
    charge(&mut refinement.t, &res, false);
    let mut qm = res.q;
    for it in 1..=cfg.q {
        let res = weighted_cholqr(&apply_c(&qm)?, t, false)
            .map_err(|e| e.in_stage(format!("pencil range finder, iteration {it}")))?;
        charge(&mut refinement.t, &res, false);
        qm = res.q;
    }
    let aq = a.apply_block(&qm)?;
    let saq = s.apply_block(&aq)?;
    let (lambda, w) = linalg::sym_eigen(&aq.t_matmul(&saq).symmetrized());
    let top = lambda.first().copied().unwrap_or(0.0).max(0.0);
    if let Some(&low) = lambda.last() {
        if low < -NEGATIVE_EIGENVALUE_TOL * top {
            log::warn!("projected pencil is numerically indefinite: λ_min = {low:.3e}, λ_1 = {top:.3e}");
        }
    }
    let sigma: Vec<f64> = lambda.iter().map(|&x| x.max(0.0).sqrt()).collect();
    check_sketch_rank(&sigma, cfg.k, "pencil GSVD")?;

    let mut u = aq.matmul(&w);
    let su = saq.matmul(&w);
    for j in 0..u.cols() {
        let norm = dot(&u.col(j), &su.col(j)).max(0.0).sqrt();
        if norm > 0.0 {
            let col: Vec<f64> = u.col(j).iter().map(|x| x / norm).collect();
            u.set_col(j, &col);
        }
    }
    let res = weighted_cholqr(&u, s, false).map_err(|e| e.in_stage("left vectors"))?;
    charge(&mut refinement.s, &res, false);
    Ok(GsvdFactors {
        u: res.q,
        sigma,
        v: qm.matmul(&w),
        refinement,
    }
    .finish(cfg.k, cfg.truncate))
}

/// Runs `route` with the given configuration.
pub fn run_route<A, S, T>(route: Route, a: &A, s: &S, t: &T, cfg: &SketchConfig) -> Result<GsvdFactors>
where
    A: LinearOp + ?Sized,
    S: SpdOp + ?Sized,
    T: SpdOp + ?Sized,
{
    match route {
        Route::Direct => rand_gsvd(a, s, t, cfg),
        Route::Transpose => rand_gsvd_transpose(a, s, t, cfg),
        Route::TwoSided => two_sided_gsvd(a, s, t, cfg),
        Route::Pencil => gheig_gsvd(a, s, t, cfg),
    }
}

/// `x ↦ Û diag(Σ̂) V̂ᵀ T x`.
pub struct Reconstruction<'a, T: ?Sized> {
    factors: &'a GsvdFactors,
    t: &'a T,
    applies: crate::operators::Tally,
    transposes: crate::operators::Tally,
}

pub fn reconstruct<'a, T: SpdOp + ?Sized>(f: &'a GsvdFactors, t: &'a T) -> Reconstruction<'a, T> {
    Reconstruction {
        factors: f,
        t,
        applies: Default::default(),
        transposes: Default::default(),
    }
}

impl<T: SpdOp + ?Sized> LinearOp for Reconstruction<'_, T> {
    fn nrows(&self) -> usize {
        self.factors.u.rows()
    }
    fn ncols(&self) -> usize {
        self.t.dim()
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.applies.bump();
        let f = self.factors;
        let c: Vec<f64> = f
            .v
            .t_matvec(&self.t.apply(x)?)
            .iter()
            .zip(&f.sigma)
            .map(|(a, b)| a * b)
            .collect();
        if c.is_empty() {
            return Ok(vec![0.0; self.nrows()]);
        }
        Ok(f.u.matvec(&c))
    }
    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.transposes.bump();
        let f = self.factors;
        if f.sigma.is_empty() {
            return Ok(vec![0.0; self.ncols()]);
        }
        let c: Vec<f64> = f.u.t_matvec(y).iter().zip(&f.sigma).map(|(a, b)| a * b).collect();
        self.t.apply(&f.v.matvec(&c))
    }
    fn counts(&self) -> OpCounts {
        OpCounts {
            applies: self.applies.get(),
            transposes: self.transposes.get(),
        }
    }
}
