//! Error measurement against the dense oracle and executable forms of the
//! sketching error bounds.

use std::f64::consts::{E, PI};

use crate::error::{Error, Result};
use crate::gsvd::GsvdFactors;
use crate::linalg;
use crate::matrix::{dot, norm2, DenseMatrix};
use crate::operators::{transformed, SpdOp};
use crate::reference::{exact_gsvd, ExactGsvd};

/// Singular values of `Ω̂₁` below this fraction of `‖Ω̂‖₂` count as zero.
pub const OMEGA_RANK_TOL: f64 = 1e-12;

/// Dense ground truth for one `(A, S, T)` problem.
#[derive(Debug, Clone)]
pub struct ErrorMeter {
    a_w: DenseMatrix,
    truth: ExactGsvd,
}

/// Accuracy of one set of computed factors.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub abs_error: f64,
    pub rel_error: f64,
    /// `σ_{k+1}/σ₁`.
    pub best_possible: f64,
    /// `|σ_j − Σ̂_j|` for `j < k`.
    pub sv_abs_errors: Vec<f64>,
    /// Radians, nonincreasing.
    pub left_angles: Vec<f64>,
    pub right_angles: Vec<f64>,
}

impl ErrorMeter {
    pub fn new(a: &DenseMatrix, s: &DenseMatrix, t: &DenseMatrix) -> Result<Self> {
        Ok(Self::from_truth(a, exact_gsvd(a, s, t)?))
    }

    pub fn from_truth(a: &DenseMatrix, truth: ExactGsvd) -> Self {
        ErrorMeter {
            a_w: transformed(a, &truth.ls, &truth.lt),
            truth,
        }
    }

    pub fn truth(&self) -> &ExactGsvd {
        &self.truth
    }

    /// `‖A‖_{S,T} = σ₁`.
    pub fn norm(&self) -> f64 {
        self.truth.sigma_at(0)
    }

    /// `‖A − Û Σ̂ V̂ᵀ T‖_{S,T}`, using `T L_T⁻ᵀ = L_T` to avoid forming `T`.
    pub fn abs_error(&self, f: &GsvdFactors) -> f64 {
        let lu = self.truth.ls.t_matmul(&f.u).scale_columns(&f.sigma);
        let lv = self.truth.lt.t_matmul(&f.v);
        linalg::spectral_norm(&self.a_w.sub(&lu.matmul_t(&lv)))
    }

    pub fn rel_error(&self, f: &GsvdFactors) -> f64 {
        self.abs_error(f) / self.norm()
    }

    pub fn report(&self, f: &GsvdFactors, k: usize) -> Result<ErrorReport> {
        if f.rank() < k {
            return Err(Error::InvalidConfig(format!(
                "factors have rank {} but the report needs k = {k}",
                f.rank()
            )));
        }
        let fk = f.truncated(k);
        let abs_error = self.abs_error(&fk);
        let t = &self.truth;
        let sv_abs_errors = (0..k).map(|j| (t.sigma_at(j) - fk.sigma[j]).abs()).collect();
        let left_angles = canonical_angles(&t.ls.t_matmul(&t.u_k(k)), &t.ls.t_matmul(&fk.u));
        let right_angles = canonical_angles(&t.lt.t_matmul(&t.v_k(k)), &t.lt.t_matmul(&fk.v));
        Ok(ErrorReport {
            abs_error,
            rel_error: abs_error / self.norm(),
            best_possible: t.sigma_at(k) / self.norm(),
            sv_abs_errors,
            left_angles,
            right_angles,
        })
    }
}

/// Canonical angles between the ranges of two matrices with orthonormal
/// columns (Euclidean), nonincreasing. Small angles come from sines and large
/// ones from cosines, so both ends are resolved accurately.
pub fn canonical_angles(x: &DenseMatrix, y: &DenseMatrix) -> Vec<f64> {
    let r = x.cols().min(y.cols());
    if r == 0 {
        return Vec::new();
    }
    let (x, y) = if x.cols() >= y.cols() { (x, y) } else { (y, x) };
    let xty = x.t_matmul(y);
    let cos = linalg::singular_values(&xty);
    let residual = y.sub(&x.matmul(&xty));
    let mut sin = linalg::singular_values(&residual);
    sin.reverse();
    let mut angles: Vec<f64> = (0..r)
        .map(|i| {
            let c = cos[i].clamp(0.0, 1.0);
            if c * c < 0.5 {
                c.acos()
            } else {
                sin[i].clamp(0.0, 1.0).asin()
            }
        })
        .collect();
    angles.sort_by(|a, b| b.total_cmp(a));
    angles
}

/// Canonical angles in the `W` inner product between `W`-orthonormal bases.
pub fn weighted_canonical_angles(x: &DenseMatrix, y: &DenseMatrix, w: &DenseMatrix) -> Result<Vec<f64>> {
    let l = linalg::cholesky(w)?;
    Ok(canonical_angles(&l.t_matmul(x), &l.t_matmul(y)))
}

/// Realized sketch interaction terms.
#[derive(Debug, Clone, Copy)]
pub struct OmegaTerms {
    /// `‖Ω̂₂ Ω̂₁†‖₂`.
    pub omega: f64,
    /// `‖Σ_⊥ Ω̂₂ Ω̂₁†‖₂`.
    pub sigma_weighted: f64,
}

/// `Ω̂₁ = V_kᵀTΩ`, `Ω̂₂ = V_⊥ᵀTΩ` and the interaction norms.
pub fn omega_interaction(omega: &DenseMatrix, t: &DenseMatrix, truth: &ExactGsvd, k: usize) -> Result<OmegaTerms> {
    let n = t.rows();
    if omega.rows() != n || truth.v.rows() != n {
        return Err(Error::DimensionMismatch {
            context: "sketch rows must match T",
            expected: n,
            got: omega.rows(),
        });
    }
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!("k = {k} out of range for n = {n}")));
    }
    let hat = truth.v.t_matmul(&t.matmul(omega));
    let hat1 = hat.rows_range(0..k);
    let hat2 = hat.rows_range(k..n);
    let top1 = linalg::spectral_norm(&hat1);
    let rel = if top1 > 0.0 { OMEGA_RANK_TOL * linalg::spectral_norm(&hat) / top1 } else { 1.0 };
    let (pinv, rank) = linalg::pinv(&hat1, rel);
    if rank < k {
        return Err(Error::AssumptionViolated { rank, k });
    }
    let m = hat2.matmul(&pinv);
    let sigma_perp: Vec<f64> = (k..n).map(|j| truth.sigma_at(j)).collect();
    let weighted = DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| sigma_perp[i] * m.get(i, j));
    Ok(OmegaTerms {
        omega: linalg::spectral_norm(&m),
        sigma_weighted: linalg::spectral_norm(&weighted),
    })
}

/// The constant of the probabilistic bounds,
/// `(e√ℓ/p)·((2/δ)/√(2π(p+1)))^{1/(p+1)}·(√(n−k) + √ℓ + √(2 log(2/δ)))`.
pub fn cg_constant(k: usize, p: usize, n: usize, delta: f64) -> Result<f64> {
    if p < 2 {
        return Err(Error::InvalidConfig(format!("oversampling p = {p} must be at least 2")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfig(format!("failure probability {delta} must lie in (0, 1)")));
    }
    let l = k + p;
    if l > n {
        return Err(Error::InvalidConfig(format!("k + p = {l} exceeds n = {n}")));
    }
    let (lf, pf) = (l as f64, p as f64);
    let first = E * lf.sqrt() / pf;
    let second = ((2.0 / delta) / (2.0 * PI * (pf + 1.0)).sqrt()).powf(1.0 / (pf + 1.0));
    let third = ((n - k) as f64).sqrt() + lf.sqrt() + (2.0 * (2.0 / delta).ln()).sqrt();
    Ok(first * second * third)
}

/// Everything the bound formulas need besides the realized error.
#[derive(Debug, Clone)]
pub struct BoundInputs {
    pub k: usize,
    pub p: usize,
    pub q: usize,
    pub delta: f64,
    pub n: usize,
    /// Exact generalized singular values.
    pub sigma: Vec<f64>,
    /// `κ₂(T)`, or `κ₂(LᵀTL)` for preconditioned sketches.
    pub kappa: f64,
    pub omega: Option<OmegaTerms>,
}

impl BoundInputs {
    pub fn sigma_k1(&self) -> f64 {
        self.sigma.get(self.k).copied().unwrap_or(0.0)
    }

    /// `γ_k = σ_{k+1}/σ_k`.
    pub fn gamma_k(&self) -> f64 {
        let sk = self.sigma.get(self.k - 1).copied().unwrap_or(0.0);
        if sk == 0.0 {
            0.0
        } else {
            self.sigma_k1() / sk
        }
    }
}

/// Right-hand sides of the error bounds and whether the realized error obeys them.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub realized: f64,
    pub slack: f64,
    /// `√(σ_{k+1}² + γ^{4q}‖Σ_⊥Ω̂₂Ω̂₁†‖²)`.
    pub gap_dependent: Option<f64>,
    /// `σ_{k+1}√(1 + γ^{4q}ω²)`.
    pub gap_dependent_factored: Option<f64>,
    /// `(1 + ω²)^{1/(4q+2)} σ_{k+1}`.
    pub gap_independent: Option<f64>,
    /// `σ_{k+1}√(1 + γ^{4q}κC_g²)`.
    pub prob_gap_dependent: Option<f64>,
    /// Same with exponent `4q+2` on `γ`; informational only.
    pub prob_gap_dependent_alt: Option<f64>,
    /// `(1 + κC_g²)^{1/(4q+2)} σ_{k+1}`.
    pub prob_gap_independent: Option<f64>,
    /// Set when per-sample bounds could not be evaluated.
    pub partial: bool,
}

impl BoundReport {
    fn holds(&self, rhs: Option<f64>) -> Option<bool> {
        rhs.map(|r| self.realized <= r + self.slack)
    }

    pub fn per_sample_holds(&self) -> Option<bool> {
        let a = self.holds(self.gap_dependent)?;
        let b = self.holds(self.gap_dependent_factored)?;
        let c = self.holds(self.gap_independent)?;
        Some(a && b && c)
    }

    pub fn gap_dependent_holds(&self) -> Option<bool> {
        self.holds(self.gap_dependent)
    }

    pub fn gap_independent_holds(&self) -> Option<bool> {
        self.holds(self.gap_independent)
    }

    pub fn probabilistic_holds(&self) -> Option<bool> {
        Some(self.holds(self.prob_gap_dependent)? && self.holds(self.prob_gap_independent)?)
    }
}

/// Evaluates every bound for a realized error `‖A − QQᵀSA‖_{S,T}`.
pub fn bound_check(inputs: &BoundInputs, realized_error: f64, slack: f64) -> BoundReport {
    let sk1 = inputs.sigma_k1();
    let gamma = inputs.gamma_k();
    let g4q = gamma.powi(4 * inputs.q as i32);
    let root = 1.0 / (4 * inputs.q + 2) as f64;
    let (gap_dependent, gap_dependent_factored, gap_independent) = match inputs.omega {
        Some(o) => (
            Some((sk1 * sk1 + g4q * o.sigma_weighted * o.sigma_weighted).sqrt()),
            Some(sk1 * (1.0 + g4q * o.omega * o.omega).sqrt()),
            Some((1.0 + o.omega * o.omega).powf(root) * sk1),
        ),
        None => (None, None, None),
    };
    let cg = cg_constant(inputs.k, inputs.p, inputs.n, inputs.delta).ok();
    let kc2 = cg.map(|c| inputs.kappa * c * c);
    BoundReport {
        realized: realized_error,
        slack,
        gap_dependent,
        gap_dependent_factored,
        gap_independent,
        prob_gap_dependent: kc2.map(|x| sk1 * (1.0 + g4q * x).sqrt()),
        prob_gap_dependent_alt: kc2.map(|x| sk1 * (1.0 + g4q * gamma * gamma * x).sqrt()),
        prob_gap_independent: kc2.map(|x| (1.0 + x).powf(root) * sk1),
        partial: inputs.omega.is_none(),
    }
}

/// The chain `λ_{k+1}(T)/λ_k(T) ≤ ‖Γ₂‖‖Γ₁⁻¹‖ ≤ κ₂(T)` with
/// `Γ₁ = V_kᵀT²V_k` and `Γ₂ = V_⊥ᵀT²V_⊥`.
#[derive(Debug, Clone, Copy)]
pub struct GammaReport {
    pub lower: f64,
    pub middle: f64,
    pub upper: f64,
    pub holds: bool,
}

pub fn gamma_interlacing_check(t: &DenseMatrix, truth: &ExactGsvd, k: usize) -> Result<GammaReport> {
    let n = t.rows();
    if k == 0 || k >= n {
        return Err(Error::InvalidConfig(format!("k = {k} must lie in 1..{n}")));
    }
    let tv = t.matmul(&truth.v);
    let tvk = tv.columns_range(0..k);
    let tvp = tv.columns_range(k..n);
    let g1 = linalg::sym_eigenvalues(&tvk.t_matmul(&tvk));
    let g2 = linalg::sym_eigenvalues(&tvp.t_matmul(&tvp));
    let lam = linalg::sym_eigenvalues(t);
    let lower = lam[k] / lam[k - 1];
    let middle = g2[0] / g1[k - 1];
    let upper = lam[0] / lam[n - 1];
    let tol = 1e-10;
    Ok(GammaReport {
        lower,
        middle,
        upper,
        holds: lower <= middle * (1.0 + tol) && middle <= upper * (1.0 + tol),
    })
}

/// `‖C − P C P‖_B` and `‖C − P C‖_B` for `C = B⁻¹A`, `P = QQᵀB`, with
/// `‖X‖_B = ‖B^{1/2} X B^{-1/2}‖₂`.
#[derive(Debug, Clone, Copy)]
pub struct SymmetricProjectionReport {
    pub two_sided: f64,
    pub one_sided: f64,
}

impl SymmetricProjectionReport {
    pub fn holds(&self, slack: f64) -> bool {
        self.two_sided <= 2.0 * self.one_sided + slack
    }
}

pub fn symmetric_projection_check(
    a: &DenseMatrix,
    b: &DenseMatrix,
    q: &DenseMatrix,
) -> Result<SymmetricProjectionReport> {
    let lb = linalg::cholesky(b)?;
    let c = linalg::left_solve_lower_t(&lb, &linalg::left_solve_lower(&lb, a));
    let p = q.matmul(&q.t_matmul(b));
    let pc = p.matmul(&c);
    let pcp = pc.matmul(&p);
    let bnorm = |x: &DenseMatrix| linalg::spectral_norm(&transformed(x, &lb, &lb));
    Ok(SymmetricProjectionReport {
        two_sided: bnorm(&c.sub(&pcp)),
        one_sided: bnorm(&c.sub(&pc)),
    })
}

fn t_norm(theta: &[f64], ttheta: &[f64], i: usize) -> Result<f64> {
    let q = dot(theta, ttheta);
    if !(q > 0.0) {
        return Err(Error::InvalidConfig(format!("basis column {i} has zero T-norm")));
    }
    Ok(q.sqrt())
}

/// `‖diag(Σ̂) V̂ᵀ T θ_i‖₂ / ‖θ_i‖_T` for every column `θ_i` of `basis`.
pub fn sensitivity_indices<T: SpdOp + ?Sized>(f: &GsvdFactors, t: &T, basis: &DenseMatrix) -> Result<Vec<f64>> {
    let tb = t.apply_block(basis)?;
    (0..basis.cols())
        .map(|i| {
            let (theta, ttheta) = (basis.col(i), tb.col(i));
            let denom = t_norm(&theta, &ttheta, i)?;
            let c: Vec<f64> = f.v.t_matvec(&ttheta).iter().zip(&f.sigma).map(|(a, b)| a * b).collect();
            Ok(norm2(&c) / denom)
        })
        .collect()
}

/// Brute-force indices `‖Aθ_i‖_S / ‖θ_i‖_T` from dense matrices.
pub fn sensitivity_indices_dense(
    a: &DenseMatrix,
    s: &DenseMatrix,
    t: &DenseMatrix,
    basis: &DenseMatrix,
) -> Result<Vec<f64>> {
    let ab = a.matmul(basis);
    let sab = s.matmul(&ab);
    let tb = t.matmul(basis);
    (0..basis.cols())
        .map(|i| {
            let denom = t_norm(&basis.col(i), &tb.col(i), i)?;
            Ok(dot(&ab.col(i), &sab.col(i)).max(0.0).sqrt() / denom)
        })
        .collect()
}
