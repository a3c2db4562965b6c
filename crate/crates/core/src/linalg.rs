//! Dense complex linear algebra shared by every model: Haar sampling, polar
//! decomposition, Moore–Penrose powers of positive matrices, rank-one
//! projections and Gram matrices.
//!
//! One scalar-product convention is used throughout the crate:
//! `<x, y> = Σ_k x_k · conj(y_k)`, linear in the first slot. On matrix
//! algebras this is the `tr(a b*)` pairing.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid_input, Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Default tolerances: algebraic identities and structural validations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub algebraic: f64,
    pub structural: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            algebraic: 1e-12,
            structural: 1e-10,
        }
    }
}

/// `<x, y> = Σ_k x_k conj(y_k)`.
#[inline]
pub fn inner(x: &CVector, y: &CVector) -> C64 {
    y.dotc(x)
}

/// Samples an `n × n` Haar-distributed unitary.
///
/// A Ginibre matrix of standard complex Gaussians is orthonormalized by QR and
/// each column of `Q` is multiplied by the phase of the matching diagonal
/// entry of `R`; without that correction the law of `Q` is not Haar.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<CMatrix> {
    if n == 0 {
        return Err(Error::InvalidDimension("Haar unitary of size 0".into()));
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut data = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        data.push(C64::new(re * scale, im * scale));
    }
    let ginibre = CMatrix::from_row_slice(n, n, &data);
    let qr = ginibre.qr();
    let r = qr.r();
    let mut q = qr.q();
    for i in 0..n {
        let d = r[(i, i)];
        let modulus = d.norm();
        let phase = if modulus > 0.0 { d / modulus } else { ONE };
        q.column_mut(i).scale_mut_c(phase);
    }
    Ok(q)
}

trait ScaleC {
    fn scale_mut_c(&mut self, s: C64);
}

impl<S> ScaleC for nalgebra::Matrix<C64, nalgebra::Dyn, nalgebra::U1, S>
where
    S: nalgebra::StorageMut<C64, nalgebra::Dyn, nalgebra::U1>,
{
    fn scale_mut_c(&mut self, s: C64) {
        for z in self.iter_mut() {
            *z *= s;
        }
    }
}

/// Unitary factor of the polar decomposition `M = U |M|`.
///
/// Computed as `A B*` from a full singular value decomposition
/// `M = A Σ B*`, which is always unitary and coincides with `M |M|^{-1}`
/// whenever `M` is invertible.
pub fn polar(m: &CMatrix) -> Result<CMatrix> {
    polar_with_min_singular(m).map(|(u, _)| u)
}

/// Polar factor together with the smallest singular value of `M`, so callers
/// can log near-singular inputs.
pub fn polar_with_min_singular(m: &CMatrix) -> Result<(CMatrix, f64)> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::InvalidDimension(format!(
            "polar decomposition needs a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let svd = m.clone().svd(true, true);
    let smin = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return invalid_input("singular value decomposition did not return factors");
    };
    Ok((u * v_t, smin))
}

/// Configuration of the numerical-rank rule used by Moore–Penrose powers:
/// eigenvalues below `max(dim) · eps · λ_max` count as zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinvConfig {
    pub eps: f64,
    /// Tolerance on `‖P − P*‖` and on negative eigenvalues, relative to
    /// `max(1, λ_max)`.
    pub hermitian_tol: f64,
}

impl Default for PinvConfig {
    fn default() -> Self {
        Self {
            eps: f64::EPSILON,
            hermitian_tol: 1e-10,
        }
    }
}

impl PinvConfig {
    pub fn with_eps(eps: f64) -> Self {
        Self {
            eps,
            ..Self::default()
        }
    }
}

/// `P^{-1/2}` in the Moore–Penrose sense: inverse square root on the range of
/// `P`, zero on its kernel.
pub fn pinv_sqrt(p: &CMatrix) -> Result<CMatrix> {
    pinv_power(p, -0.5, &PinvConfig::default())
}

/// `P^{-1/2}` with an explicit rank rule.
pub fn pinv_sqrt_with(p: &CMatrix, cfg: &PinvConfig) -> Result<CMatrix> {
    pinv_power(p, -0.5, cfg)
}

/// Orthogonal projection onto the numerical range of a positive matrix.
pub fn range_projection(p: &CMatrix, cfg: &PinvConfig) -> Result<CMatrix> {
    pinv_power(p, 0.0, cfg)
}

/// Number of eigenvalues of a Hermitian matrix above `cutoff`.
pub fn numerical_rank(h: &CMatrix, cutoff: f64) -> usize {
    let sym = symmetrize(h);
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .filter(|&&l| l > cutoff)
        .count()
}

/// `P^power` restricted to the numerical range of a positive semidefinite
/// `P` (zero on the kernel).
pub fn pinv_power(p: &CMatrix, power: f64, cfg: &PinvConfig) -> Result<CMatrix> {
    if !p.is_square() || p.nrows() == 0 {
        return Err(Error::InvalidDimension(format!(
            "expected a non-empty square matrix, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    let skew = (p - p.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let scale = p.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if skew > cfg.hermitian_tol * scale {
        return invalid_input(format!("matrix is not Hermitian (skew part {skew:.3e})"));
    }
    let eig = SymmetricEigen::new(symmetrize(p));
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let lmin = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if lmin < -cfg.hermitian_tol * lmax.max(1.0) {
        return invalid_input(format!("matrix has a negative eigenvalue {lmin:.3e}"));
    }
    let cutoff = p.nrows() as f64 * cfg.eps * lmax;
    let n = p.nrows();
    let v = &eig.eigenvectors;
    let mut out = CMatrix::zeros(n, n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= cutoff || lambda <= 0.0 {
            continue;
        }
        let w = lambda.powf(power);
        let col = v.column(k);
        for a in 0..n {
            let va = col[a] * w;
            for b in 0..n {
                out[(a, b)] += va * col[b].conj();
            }
        }
    }
    Ok(out)
}

fn symmetrize(h: &CMatrix) -> CMatrix {
    (h + h.adjoint()).scale(0.5)
}

/// A Hermitian idempotent matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection(CMatrix);

impl Projection {
    /// Validates `‖A − A*‖ ≤ tol` and `‖A² − A‖ ≤ tol` (entrywise maximum).
    pub fn new(matrix: CMatrix, tol: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidDimension("projection must be square".into()));
        }
        let skew = max_abs(&(&matrix - matrix.adjoint()));
        let idem = max_abs(&(&matrix * &matrix - &matrix));
        if skew > tol || idem > tol {
            return invalid_input(format!(
                "not an orthogonal projection (skew {skew:.3e}, idempotency {idem:.3e})"
            ));
        }
        Ok(Self(matrix))
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        Self(matrix)
    }

    pub fn zero(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// Rank recovered as the rounded trace.
    pub fn rank(&self) -> usize {
        self.trace().round().max(0.0) as usize
    }
}

/// Rank-one projection onto `C v`; invariant under rescaling of `v`.
pub fn proj(v: &CVector) -> Result<Projection> {
    let norm2 = v.norm_squared();
    if norm2 == 0.0 || !norm2.is_finite() {
        return invalid_input("cannot project onto the zero vector");
    }
    let m = (v * v.adjoint()).unscale(norm2);
    Ok(Projection(m))
}

/// Gram matrix `G_ab = <v_a, v_b>`.
pub fn gram(vectors: &[CVector]) -> Result<CMatrix> {
    let Some(first) = vectors.first() else {
        return Ok(CMatrix::zeros(0, 0));
    };
    let dim = first.len();
    if vectors.iter().any(|v| v.len() != dim) {
        return invalid_input("Gram matrix of vectors with mixed dimensions");
    }
    let k = vectors.len();
    Ok(CMatrix::from_fn(k, k, |a, b| {
        inner(&vectors[a], &vectors[b])
    }))
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Spectral norm of a Hermitian matrix.
pub fn hermitian_opnorm(h: &CMatrix) -> f64 {
    if h.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(h))
        .eigenvalues
        .iter()
        .map(|l| l.abs())
        .fold(0.0, f64::max)
}

/// Spectral norm of an arbitrary matrix.
pub fn opnorm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// `‖M* M − I‖` in Frobenius norm (an upper bound on the spectral defect).
pub fn unitarity_defect(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    (m.adjoint() * m - CMatrix::identity(n, n)).norm()
}

pub fn is_unitary(m: &CMatrix, tol: f64) -> bool {
    unitarity_defect(m) <= tol
}

/// Row `i` of `m` as a column vector (no conjugation).
pub fn row_vector(m: &CMatrix, i: usize) -> CVector {
    CVector::from_iterator(m.ncols(), m.row(i).iter().copied())
}

/// Matrix whose rows are the given vectors.
pub fn matrix_from_rows(rows: &[CVector]) -> CMatrix {
    let n = rows.len();
    let d = rows.first().map_or(0, |v| v.len());
    CMatrix::from_fn(n, d, |i, j| rows[i][j])
}
