//! Matrix-free operator abstractions and dense adapters.
//!
//! Every algorithm in this crate touches `A`, `S` and `T` only through
//! [`LinearOp`] and [`SpdOp`], so the application counters below are the
//! source of truth for cost accounting.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::{dot, norm2, DenseMatrix};

/// Monotone application tally, safe to bump from parallel column applies.
#[derive(Debug, Default)]
pub struct Tally(AtomicU64);

impl Tally {
    pub fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

/// Snapshot of a [`LinearOp`]'s counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpCounts {
    pub applies: u64,
    pub transposes: u64,
}

/// Snapshot of an [`SpdOp`]'s counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SpdCounts {
    pub applies: u64,
    pub solves: u64,
}

fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { context, expected, got })
    }
}

fn map_columns(
    x: &DenseMatrix,
    out_rows: usize,
    f: impl Fn(&[f64]) -> Result<Vec<f64>> + Sync,
) -> Result<DenseMatrix> {
    let cols: Vec<Vec<f64>> = (0..x.cols())
        .into_par_iter()
        .map(|j| f(&x.col(j)))
        .collect::<Result<_>>()?;
    Ok(DenseMatrix::from_columns(out_rows, &cols))
}

/// A real linear operator accessed only through products with vectors.
pub trait LinearOp: Send + Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `A x`; counts one application.
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// `Aᵀ y`; counts one transpose application.
    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>>;
    fn counts(&self) -> OpCounts;

    /// `A X`, one application per column, columns processed in parallel.
    fn apply_block(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_len("apply_block (rows of X)", self.ncols(), x.rows())?;
        map_columns(x, self.nrows(), |c| self.apply(c))
    }

    /// `Aᵀ Y`, one transpose application per column.
    fn apply_transpose_block(&self, y: &DenseMatrix) -> Result<DenseMatrix> {
        check_len("apply_transpose_block (rows of Y)", self.nrows(), y.rows())?;
        map_columns(y, self.ncols(), |c| self.apply_transpose(c))
    }

    /// Dense copy obtained by applying the operator to the identity.
    fn materialize(&self) -> Result<DenseMatrix> {
        self.apply_block(&DenseMatrix::identity(self.ncols()))
    }
}

/// A symmetric positive definite operator with solves.
pub trait SpdOp: Send + Sync {
    fn dim(&self) -> usize;
    /// `W x`; counts one application.
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// `W⁻¹ x`; counts one solve.
    fn solve(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn counts(&self) -> SpdCounts;

    fn apply_block(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_len("SPD apply_block (rows of X)", self.dim(), x.rows())?;
        map_columns(x, self.dim(), |c| self.apply(c))
    }

    fn solve_block(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_len("SPD solve_block (rows of X)", self.dim(), x.rows())?;
        map_columns(x, self.dim(), |c| self.solve(c))
    }

    fn materialize(&self) -> Result<DenseMatrix> {
        Ok(self.apply_block(&DenseMatrix::identity(self.dim()))?.symmetrized())
    }
}

impl<O: LinearOp + ?Sized> LinearOp for &O {
    fn nrows(&self) -> usize {
        (**self).nrows()
    }
    fn ncols(&self) -> usize {
        (**self).ncols()
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).apply(x)
    }
    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        (**self).apply_transpose(y)
    }
    fn counts(&self) -> OpCounts {
        (**self).counts()
    }
}

impl<W: SpdOp + ?Sized> SpdOp for &W {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).apply(x)
    }
    fn solve(&self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).solve(x)
    }
    fn counts(&self) -> SpdCounts {
        (**self).counts()
    }
}

/// Dense matrix viewed as a [`LinearOp`].
#[derive(Debug)]
pub struct DenseOp {
    m: Arc<DenseMatrix>,
    applies: Tally,
    transposes: Tally,
}

impl DenseOp {
    pub fn new(m: DenseMatrix) -> Self {
        Self::from_arc(Arc::new(m))
    }

    pub fn from_arc(m: Arc<DenseMatrix>) -> Self {
        DenseOp {
            m,
            applies: Tally::default(),
            transposes: Tally::default(),
        }
    }

    /// Another view of the same matrix with fresh counters.
    pub fn share(&self) -> Self {
        Self::from_arc(Arc::clone(&self.m))
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.m
    }
}

impl LinearOp for DenseOp {
    fn nrows(&self) -> usize {
        self.m.rows()
    }
    fn ncols(&self) -> usize {
        self.m.cols()
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("apply", self.m.cols(), x.len())?;
        self.applies.bump();
        Ok(self.m.matvec(x))
    }
    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("apply_transpose", self.m.rows(), y.len())?;
        self.transposes.bump();
        Ok(self.m.t_matvec(y))
    }
    fn counts(&self) -> OpCounts {
        OpCounts {
            applies: self.applies.get(),
            transposes: self.transposes.get(),
        }
    }
    fn materialize(&self) -> Result<DenseMatrix> {
        Ok((*self.m).clone())
    }
}

/// Relative asymmetry accepted by [`DenseSpd::new`] before symmetrizing.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug)]
struct SpdData {
    w: DenseMatrix,
    chol: DenseMatrix,
}

/// Dense SPD matrix with a stored Cholesky factor.
#[derive(Debug)]
pub struct DenseSpd {
    data: Arc<SpdData>,
    applies: Tally,
    solves: Tally,
}

impl DenseSpd {
    pub fn new(w: DenseMatrix) -> Result<Self> {
        if w.rows() != w.cols() {
            return Err(Error::DimensionMismatch {
                context: "SPD weight (square)",
                expected: w.rows(),
                got: w.cols(),
            });
        }
        let asymmetry = w.asymmetry();
        if asymmetry > SYMMETRY_TOL {
            return Err(Error::NotSymmetric { asymmetry });
        }
        let w = w.symmetrized();
        let chol = linalg::cholesky(&w)?;
        Ok(DenseSpd {
            data: Arc::new(SpdData { w, chol }),
            applies: Tally::default(),
            solves: Tally::default(),
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DenseMatrix::identity(n)).expect("identity is SPD")
    }

    pub fn share(&self) -> Self {
        DenseSpd {
            data: Arc::clone(&self.data),
            applies: Tally::default(),
            solves: Tally::default(),
        }
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.data.w
    }

    /// Lower Cholesky factor `L` with `W = L Lᵀ`.
    pub fn cholesky_factor(&self) -> &DenseMatrix {
        &self.data.chol
    }
}

impl SpdOp for DenseSpd {
    fn dim(&self) -> usize {
        self.data.w.rows()
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("SPD apply", self.dim(), x.len())?;
        self.applies.bump();
        Ok(self.data.w.matvec(x))
    }
    fn solve(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("SPD solve", self.dim(), x.len())?;
        self.solves.bump();
        let l = &self.data.chol;
        Ok(linalg::solve_lower_t(l, &linalg::solve_lower(l, x)))
    }
    fn counts(&self) -> SpdCounts {
        SpdCounts {
            applies: self.applies.get(),
            solves: self.solves.get(),
        }
    }
    fn materialize(&self) -> Result<DenseMatrix> {
        Ok(self.data.w.clone())
    }
}

/// `Aᵀ` as an operator; applications are charged to the wrapped operator.
pub struct Transposed<O>(pub O);

impl<O: LinearOp> LinearOp for Transposed<O> {
    fn nrows(&self) -> usize {
        self.0.ncols()
    }
    fn ncols(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.0.apply_transpose(x)
    }
    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.0.apply(y)
    }
    fn counts(&self) -> OpCounts {
        let c = self.0.counts();
        OpCounts {
            applies: c.transposes,
            transposes: c.applies,
        }
    }
}

/// `W⁻¹` as an SPD operator: apply solves and solve applies.
pub struct Inverse<W>(pub W);

impl<W: SpdOp> SpdOp for Inverse<W> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.0.solve(x)
    }
    fn solve(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.0.apply(x)
    }
    fn counts(&self) -> SpdCounts {
        let c = self.0.counts();
        SpdCounts {
            applies: c.solves,
            solves: c.applies,
        }
    }
}

type VecFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Operator defined by a pair of closures for `x ↦ Ax` and `y ↦ Aᵀy`.
pub struct FnOp {
    nrows: usize,
    ncols: usize,
    forward: VecFn,
    adjoint: VecFn,
    applies: Tally,
    transposes: Tally,
}

impl FnOp {
    pub fn new(
        nrows: usize,
        ncols: usize,
        forward: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        adjoint: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        FnOp {
            nrows,
            ncols,
            forward: Box::new(forward),
            adjoint: Box::new(adjoint),
            applies: Tally::default(),
            transposes: Tally::default(),
        }
    }
}

impl LinearOp for FnOp {
    fn nrows(&self) -> usize {
        self.nrows
    }
    fn ncols(&self) -> usize {
        self.ncols
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("apply", self.ncols, x.len())?;
        self.applies.bump();
        let y = (self.forward)(x);
        check_len("apply (closure output)", self.nrows, y.len())?;
        Ok(y)
    }
    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("apply_transpose", self.nrows, y.len())?;
        self.transposes.bump();
        let x = (self.adjoint)(y);
        check_len("apply_transpose (closure output)", self.ncols, x.len())?;
        Ok(x)
    }
    fn counts(&self) -> OpCounts {
        OpCounts {
            applies: self.applies.get(),
            transposes: self.transposes.get(),
        }
    }
}

/// Wraps an operator and perturbs every product by a random vector of
/// relative size exactly `rel_tol`, emulating an inexact inner solver.
///
/// The perturbation is a function of the seed, the direction and the input
/// bits only, so results do not depend on call order or thread count.
pub struct InexactOp<O> {
    inner: O,
    rel_tol: f64,
    seed: u64,
}

impl<O: LinearOp> InexactOp<O> {
    pub fn new(inner: O, rel_tol: f64, seed: u64) -> Result<Self> {
        if !(rel_tol >= 0.0) || !rel_tol.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "inexactness tolerance must be finite and nonnegative, got {rel_tol}"
            )));
        }
        Ok(InexactOp { inner, rel_tol, seed })
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }

    pub fn rel_tol(&self) -> f64 {
        self.rel_tol
    }

    fn perturb(&self, input: &[f64], mut y: Vec<f64>, direction: u64) -> Vec<f64> {
        if self.rel_tol == 0.0 {
            return y;
        }
        let size = norm2(&y);
        if size == 0.0 {
            return y;
        }
        let mut h = splitmix64(self.seed ^ direction.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        for v in input {
            h = splitmix64(h ^ v.to_bits());
        }
        let mut rng = ChaCha20Rng::seed_from_u64(h);
        let g: Vec<f64> = (0..y.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let scale = self.rel_tol * size / norm2(&g);
        for (yi, gi) in y.iter_mut().zip(&g) {
            *yi += scale * gi;
        }
        y
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl<O: LinearOp> LinearOp for InexactOp<O> {
    fn nrows(&self) -> usize {
        self.inner.nrows()
    }
    fn ncols(&self) -> usize {
        self.inner.ncols()
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let y = self.inner.apply(x)?;
        Ok(self.perturb(x, y, 1))
    }
    fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        let x = self.inner.apply_transpose(y)?;
        Ok(self.perturb(y, x, 2))
    }
    fn counts(&self) -> OpCounts {
        self.inner.counts()
    }
}

/// `‖x‖_W = √(xᵀWx)`.
pub fn weighted_norm<W: SpdOp + ?Sized>(x: &[f64], w: &W) -> Result<f64> {
    let wx = w.apply(x)?;
    let q = dot(x, &wx);
    let scale = norm2(x) * norm2(&wx);
    if q < -1e-14 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotPositiveDefinite { pivot: 0 });
    }
    Ok(q.max(0.0).sqrt())
}

/// `‖A‖_{S,T} = ‖L_Sᵀ A L_T⁻ᵀ‖₂`, from dense materializations of all three operators.
pub fn weighted_op_norm<A, S, T>(a: &A, s: &S, t: &T) -> Result<f64>
where
    A: LinearOp + ?Sized,
    S: SpdOp + ?Sized,
    T: SpdOp + ?Sized,
{
    check_len("weighted_op_norm (S vs rows of A)", a.nrows(), s.dim())?;
    check_len("weighted_op_norm (T vs cols of A)", a.ncols(), t.dim())?;
    let am = a.materialize()?;
    let ls = linalg::cholesky(&s.materialize()?)?;
    let lt = linalg::cholesky(&t.materialize()?)?;
    Ok(linalg::spectral_norm(&transformed(&am, &ls, &lt)))
}

/// `L_Sᵀ A L_T⁻ᵀ` for lower Cholesky factors `L_S`, `L_T`.
pub fn transformed(a: &DenseMatrix, ls: &DenseMatrix, lt: &DenseMatrix) -> DenseMatrix {
    // A L_T⁻ᵀ = (L_T⁻¹ Aᵀ)ᵀ
    let a_right = linalg::left_solve_lower(lt, &a.transpose()).transpose();
    ls.t_matmul(&a_right)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_adapter_hand_values() {
        let op = DenseOp::new(DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]));
        assert_eq!(op.apply(&[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
        assert_eq!(op.apply_transpose(&[1.0, 1.0]).unwrap(), vec![4.0, 6.0]);
        assert_eq!(op.counts(), OpCounts { applies: 1, transposes: 1 });
        assert!(matches!(
            op.apply(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1, .. })
        ));
        assert_eq!(op.share().counts(), OpCounts::default());
    }

    #[test]
    fn spd_adapter_small_cases() {
        let w = DenseSpd::new(DenseMatrix::from_diag(&[4.0])).unwrap();
        assert_eq!(w.solve(&[8.0]).unwrap(), vec![2.0]);
        let bad = DenseMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(matches!(DenseSpd::new(bad), Err(Error::NotPositiveDefinite { pivot: 1 })));
        let skew = DenseMatrix::from_rows(&[&[1.0, 0.1], &[0.0, 1.0]]);
        assert!(matches!(DenseSpd::new(skew), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn weighted_norm_hand_values() {
        let i = DenseSpd::identity(2);
        assert_eq!(weighted_norm(&[3.0, 4.0], &i).unwrap(), 5.0);
        let d = DenseSpd::new(DenseMatrix::from_diag(&[4.0, 9.0])).unwrap();
        assert!((weighted_norm(&[1.0, 1.0], &d).unwrap() - 13f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn weighted_op_norm_hand_values() {
        let a = DenseOp::new(DenseMatrix::from_diag(&[5.0, 1.0]));
        let i = DenseSpd::identity(2);
        assert!((weighted_op_norm(&a, &i, &i).unwrap() - 5.0).abs() < 1e-14);
        let a = DenseOp::new(DenseMatrix::identity(2));
        let s = DenseSpd::new(DenseMatrix::from_diag(&[4.0, 4.0])).unwrap();
        assert!((weighted_op_norm(&a, &s, &i).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adapters_swap_counts() {
        let op = DenseOp::new(DenseMatrix::from_rows(&[&[1.0, 2.0, 3.0]]));
        let t = Transposed(&op);
        assert_eq!((t.nrows(), t.ncols()), (3, 1));
        assert_eq!(t.apply(&[2.0]).unwrap(), vec![2.0, 4.0, 6.0]);
        assert_eq!(op.counts().transposes, 1);
        assert_eq!(t.counts().applies, 1);

        let w = DenseSpd::new(DenseMatrix::from_diag(&[2.0, 5.0])).unwrap();
        let inv = Inverse(&w);
        let x = inv.apply(&[2.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        assert_eq!(w.counts(), SpdCounts { applies: 0, solves: 1 });
    }

    #[test]
    fn inexact_zero_tolerance_is_exact() {
        let m = DenseMatrix::from_fn(4, 3, |i, j| (i as f64 + 1.0) / (j as f64 + 2.0));
        let exact = DenseOp::new(m.clone());
        let wrapped = InexactOp::new(DenseOp::new(m), 0.0, 7).unwrap();
        let x = [0.3, -1.2, 2.5];
        assert_eq!(wrapped.apply(&x).unwrap(), exact.apply(&x).unwrap());
    }

    #[test]
    fn inexact_error_has_requested_size() {
        let m = DenseMatrix::from_fn(5, 5, |i, j| ((i * 5 + j) as f64).sin());
        let exact = DenseOp::new(m.clone());
        let wrapped = InexactOp::new(DenseOp::new(m), 1e-6, 3).unwrap();
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ye = exact.apply(&x).unwrap();
        let yw = wrapped.apply(&x).unwrap();
        let diff: Vec<f64> = ye.iter().zip(&yw).map(|(a, b)| a - b).collect();
        let rel = norm2(&diff) / norm2(&ye);
        assert!((rel - 1e-6).abs() < 1e-12, "{rel}");
        assert_eq!(wrapped.apply(&x).unwrap(), yw);
        assert!(InexactOp::new(DenseOp::new(DenseMatrix::identity(1)), -1.0, 0).is_err());
    }
}
