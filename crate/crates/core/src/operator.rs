//! Dense complex Hermitian matrix calculus.
//!
//! Everything downstream (POVMs, the bullet product, commutation defects,
//! game operators) is built from the handful of spectral operations here.
//! Matrices are small (single digits to a few dozen rows), so everything is
//! dense and eigendecomposition based.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Tolerance for reconstruction of an eigendecomposition, per unit of dimension.
pub const EIG_TOL: f64 = 1e-10;
/// Eigenvalues in `[-PSD_CLAMP, 0)` are treated as roundoff and clamped to zero.
pub const PSD_CLAMP: f64 = 1e-9;

const EIG_MAX_SWEEPS: usize = 10_000;

/// A Hermitian matrix. Construction symmetrizes `(m + m*)/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermMatrix(CMatrix);

impl HermMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimMismatch {
                left: m.nrows(),
                right: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::Shape("empty matrix".into()));
        }
        Ok(Self::symmetrize(m))
    }

    pub(crate) fn symmetrize(m: CMatrix) -> Self {
        let adj = m.adjoint();
        HermMatrix((m + adj).scale(0.5))
    }

    pub fn identity(dim: usize) -> Self {
        HermMatrix(CMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        HermMatrix(CMatrix::zeros(dim, dim))
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let v = CVector::from_iterator(diag.len(), diag.iter().map(|&x| Complex64::new(x, 0.0)));
        HermMatrix(CMatrix::from_diagonal(&v))
    }

    /// Builds a Hermitian matrix from a real row-major table.
    pub fn from_real_rows(dim: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return Err(Error::Shape(format!(
                "expected {} entries, got {}",
                dim * dim,
                rows.len()
            )));
        }
        Self::new(CMatrix::from_row_iterator(
            dim,
            dim,
            rows.iter().map(|&x| Complex64::new(x, 0.0)),
        ))
    }

    /// Rank-one projector `v v*` onto the (normalized) vector `v`.
    pub fn projector(v: &CVector) -> Self {
        let n = v.norm();
        let u = v.unscale(n);
        HermMatrix::symmetrize(&u * u.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn scale(&self, s: f64) -> Self {
        HermMatrix(self.0.scale(s))
    }

    pub fn add(&self, other: &HermMatrix) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(HermMatrix(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &HermMatrix) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(HermMatrix(&self.0 - &other.0))
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &HermMatrix) -> Self {
        HermMatrix(self.0.kronecker(&other.0))
    }

    pub fn max_abs_diff(&self, other: &HermMatrix) -> f64 {
        max_abs_diff(&self.0, &other.0)
    }
}

pub(crate) fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        Err(Error::DimMismatch { left: a, right: b })
    } else {
        Ok(())
    }
}

pub(crate) fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Eigenvalues in descending order with the matching unitary eigenvector columns.
#[derive(Clone, Debug)]
pub struct SpectralDecomp {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl SpectralDecomp {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `V f(Λ) V*`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> HermMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let s = f(lam);
            scaled.column_mut(j).scale_mut(s);
        }
        HermMatrix::symmetrize(scaled * v.adjoint())
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.apply(|x| x).into_inner()
    }

    /// Pulls a gradient `g` with respect to `f(M)` back to a gradient with
    /// respect to `M` through the Daleckii-Krein formula
    /// `V (L ∘ V* g V) V*`, where `L` is the first divided difference of `f`
    /// on the spectrum. Near-equal eigenvalues fall back to `f'`, and the
    /// denominator is floored at `1e-12`.
    pub(crate) fn loewner_pullback(&self, f: impl Fn(f64) -> f64, fprime: impl Fn(f64) -> f64, g: &CMatrix) -> CMatrix {
        let v = &self.eigenvectors;
        let n = self.dim();
        let fl: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut inner = v.adjoint() * g * v;
        for i in 0..n {
            for j in 0..n {
                let (li, lj) = (self.eigenvalues[i], self.eigenvalues[j]);
                let gap = li - lj;
                let w = if gap.abs() < 1e-12 {
                    fprime(0.5 * (li + lj))
                } else {
                    (fl[i] - fl[j]) / gap
                };
                inner[(i, j)] *= w;
            }
        }
        v * inner * v.adjoint()
    }
}

/// Hermitian eigendecomposition with eigenvalues sorted in descending order.
pub fn eig_herm(m: &HermMatrix) -> Result<SpectralDecomp> {
    let dim = m.dim();
    let raw =
        SymmetricEigen::try_new(m.as_matrix().clone(), f64::EPSILON, EIG_MAX_SWEEPS).ok_or(Error::NoConvergence {
            residual: f64::INFINITY,
        })?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| raw.eigenvalues[j].total_cmp(&raw.eigenvalues[i]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| raw.eigenvalues[i]).collect();
    let eigenvectors = CMatrix::from_fn(dim, dim, |r, c| raw.eigenvectors[(r, order[c])]);
    let decomp = SpectralDecomp {
        eigenvalues,
        eigenvectors,
    };
    let scale = m.as_matrix().norm().max(1.0);
    let residual = (decomp.reconstruct() - m.as_matrix()).norm() / scale;
    if !residual.is_finite() || residual > EIG_TOL * dim as f64 {
        return Err(Error::NoConvergence { residual });
    }
    Ok(decomp)
}

/// Square root of a positive semidefinite matrix.
pub fn sqrt_psd(m: &HermMatrix) -> Result<HermMatrix> {
    let e = eig_herm(m)?;
    sqrt_from_decomp(&e)
}

pub(crate) fn sqrt_from_decomp(e: &SpectralDecomp) -> Result<HermMatrix> {
    let lmin = e.min_eigenvalue();
    if lmin < -PSD_CLAMP {
        return Err(Error::NotPsd { eigenvalue: lmin });
    }
    Ok(e.apply(|x| x.max(0.0).sqrt()))
}

/// `V max(Λ, 0) V*`, the nearest PSD matrix in operator norm.
pub fn positive_part(m: &HermMatrix) -> Result<HermMatrix> {
    Ok(eig_herm(m)?.apply(|x| x.max(0.0)))
}

/// Operator norm of a Hermitian matrix: the largest eigenvalue modulus.
pub fn op_norm_herm(m: &HermMatrix) -> Result<f64> {
    let e = eig_herm(m)?;
    Ok(e.max_eigenvalue().abs().max(e.min_eigenvalue().abs()))
}

/// Operator norm (largest singular value) of an arbitrary square matrix.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Operator-norm distance from `m` to the PSD cone `{Z*Z}`, which in finite
/// dimension is `max(0, -λ_min(m))`.
pub fn psd_cone_distance(m: &HermMatrix) -> Result<f64> {
    Ok((-eig_herm(m)?.min_eigenvalue()).max(0.0))
}

/// `ab - ba`.
pub fn commutator(a: &HermMatrix, b: &HermMatrix) -> Result<CMatrix> {
    check_dims(a.dim(), b.dim())?;
    Ok(commutator_raw(a.as_matrix(), b.as_matrix()))
}

pub(crate) fn commutator_raw(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// A density matrix: Hermitian, PSD and of unit trace.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    rho: HermMatrix,
}

const STATE_TOL: f64 = 1e-10;

impl State {
    pub fn new(rho: CMatrix) -> Result<Self> {
        let raw_asym = max_abs_diff(&rho, &rho.adjoint());
        if raw_asym > 1e-9 {
            return Err(Error::InvalidState(format!("not Hermitian (asymmetry {raw_asym:e})")));
        }
        let rho = HermMatrix::new(rho)?;
        let tr = rho.trace();
        if (tr - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let lmin = eig_herm(&rho)?.min_eigenvalue();
        if lmin < -STATE_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {lmin:e}")));
        }
        Ok(State { rho })
    }

    /// Normalizes `w / tr(w)` for a nonzero PSD `w`; used by parametrizations
    /// that produce states up to scale.
    pub fn from_unnormalized(w: HermMatrix) -> Result<Self> {
        let tr = w.trace();
        if tr.is_nan() || tr <= 0.0 {
            return Err(Error::InvalidState(format!("trace {tr} not positive")));
        }
        State::new(w.scale(1.0 / tr).into_inner())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        State {
            rho: HermMatrix::identity(dim).scale(1.0 / dim as f64),
        }
    }

    pub fn pure(v: &CVector) -> Result<Self> {
        if v.norm() == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        Ok(State {
            rho: HermMatrix::projector(v),
        })
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = CVector::zeros(dim);
        v[i] = Complex64::new(1.0, 0.0);
        State {
            rho: HermMatrix::projector(&v),
        }
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn rho(&self) -> &HermMatrix {
        &self.rho
    }
}

/// `tr(ρ m)`.
pub fn state_expect(phi: &State, m: &CMatrix) -> Result<Complex64> {
    check_dims(phi.dim(), m.nrows())?;
    check_dims(m.nrows(), m.ncols())?;
    Ok(trace_product(phi.rho.as_matrix(), m))
}

/// `tr(a b)` without forming the product.
pub(crate) fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Real part of the Frobenius inner product `Re tr(a* b)`.
pub(crate) fn real_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

pub(crate) fn herm_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}
