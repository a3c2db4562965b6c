//! Magic bases, magic unitaries and their model constructors.
//!
//! A magic basis is an `N × N` grid of unit vectors whose rows and columns
//! are orthonormal bases; the cellwise rank-one projections then form a flat
//! magic unitary. Matrix-algebra models vectorize `n × n` matrices into
//! `C^{n²}` using `<a, b> = (1/n) tr(a b*)`, so a basis of `M_n(C)` yields an
//! `N × N` grid with `N = n²`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Error, Result};
use crate::groups::{AlgebraKind, LatinSquare, OrthonormalUnitaryBasis};
use crate::linalg::{
    gram, hermitian_opnorm, is_unitary, opnorm, proj, CMatrix, CVector, Projection, C64, ONE,
};

/// Default structural tolerance for magic validation.
pub const MAGIC_TOL: f64 = 1e-10;

/// `N × N` grid of vectors, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorGrid {
    n: usize,
    dim: usize,
    cells: Vec<CVector>,
}

impl VectorGrid {
    /// Validates shape and unit norms (to `tol`).
    pub fn new(n: usize, cells: Vec<CVector>, tol: f64) -> Result<Self> {
        let grid = Self::from_cells_unchecked(n, cells)?;
        for (k, v) in grid.cells.iter().enumerate() {
            if (v.norm() - 1.0).abs() > tol {
                return invalid_input(format!("cell ({}, {}) has norm {}", k / n, k % n, v.norm()));
            }
        }
        Ok(grid)
    }

    /// Rescales each cell to unit length.
    pub fn normalized(n: usize, cells: Vec<CVector>) -> Result<Self> {
        let mut grid = Self::from_cells_unchecked(n, cells)?;
        for v in &mut grid.cells {
            let norm = v.norm();
            if norm == 0.0 || !norm.is_finite() {
                return invalid_input("grid cell is zero");
            }
            v.unscale_mut(norm);
        }
        Ok(grid)
    }

    pub(crate) fn from_cells_unchecked(n: usize, cells: Vec<CVector>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension("grid size must be positive".into()));
        }
        if cells.len() != n * n {
            return Err(Error::InvalidDimension(format!(
                "expected {} cells, got {}",
                n * n,
                cells.len()
            )));
        }
        let dim = cells[0].len();
        if cells.iter().any(|v| v.len() != dim) {
            return Err(Error::InvalidDimension(
                "grid cells have mixed dimensions".into(),
            ));
        }
        Ok(Self { n, dim, cells })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cell(&self, i: usize, j: usize) -> &CVector {
        &self.cells[i * self.n + j]
    }

    pub fn cells(&self) -> &[CVector] {
        &self.cells
    }

    pub fn row(&self, i: usize) -> Vec<CVector> {
        (0..self.n).map(|j| self.cell(i, j).clone()).collect()
    }

    pub fn col(&self, j: usize) -> Vec<CVector> {
        (0..self.n).map(|i| self.cell(i, j).clone()).collect()
    }

    /// `max_i ‖Gram(row i) − I‖`.
    pub fn row_defect(&self) -> f64 {
        (0..self.n)
            .map(|i| gram_defect(&self.row(i)))
            .fold(0.0, f64::max)
    }

    /// `max_j ‖Gram(column j) − I‖`.
    pub fn col_defect(&self) -> f64 {
        (0..self.n)
            .map(|j| gram_defect(&self.col(j)))
            .fold(0.0, f64::max)
    }

    pub fn rows_orthonormal(&self, tol: f64) -> bool {
        self.row_defect() <= tol
    }

    pub fn cols_orthonormal(&self, tol: f64) -> bool {
        self.col_defect() <= tol
    }

    pub fn is_magic_basis(&self, tol: f64) -> bool {
        self.rows_orthonormal(tol) && self.cols_orthonormal(tol)
    }

    /// Multiplies cell `(i, j)` by `phases[i·N + j]`.
    pub fn rephased(&self, phases: &[C64]) -> Result<Self> {
        if phases.len() != self.cells.len() {
            return invalid_input("one phase per cell is required");
        }
        let cells = self.cells.iter().zip(phases).map(|(v, &z)| v * z).collect();
        Ok(Self {
            n: self.n,
            dim: self.dim,
            cells,
        })
    }

    /// The grid `x*`: cell `(i, j)` is the conjugate of cell `(j, i)`.
    pub fn adjoint_grid(&self) -> Self {
        let n = self.n;
        let cells = (0..n * n)
            .map(|k| self.cell(k % n, k / n).map(|z| z.conj()))
            .collect();
        Self {
            n,
            dim: self.dim,
            cells,
        }
    }
}

fn gram_defect(vectors: &[CVector]) -> f64 {
    let g = gram(vectors).expect("grid cells share a dimension");
    let k = g.nrows();
    hermitian_opnorm(&(g - CMatrix::identity(k, k)))
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    #[serde(rename = "N")]
    n: usize,
    cells: Vec<Vec<Vec<C64>>>,
}

impl Serialize for VectorGrid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let cells = (0..self.n)
            .map(|i| {
                (0..self.n)
                    .map(|j| self.cell(i, j).iter().copied().collect())
                    .collect()
            })
            .collect();
        RawGrid { n: self.n, cells }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for VectorGrid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawGrid::deserialize(d)?;
        if raw.cells.len() != raw.n || raw.cells.iter().any(|r| r.len() != raw.n) {
            return Err(serde::de::Error::custom("grid must be N x N"));
        }
        let cells = raw
            .cells
            .into_iter()
            .flatten()
            .map(CVector::from_vec)
            .collect();
        VectorGrid::new(raw.n, cells, MAGIC_TOL).map_err(serde::de::Error::custom)
    }
}

/// `N × N` grid of square matrices, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionGrid {
    n: usize,
    dim: usize,
    cells: Vec<CMatrix>,
}

impl ProjectionGrid {
    pub fn new(n: usize, cells: Vec<CMatrix>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension("grid size must be positive".into()));
        }
        if cells.len() != n * n {
            return Err(Error::InvalidDimension(format!(
                "expected {} cells, got {}",
                n * n,
                cells.len()
            )));
        }
        let dim = cells[0].nrows();
        if cells.iter().any(|c| c.nrows() != dim || c.ncols() != dim) {
            return Err(Error::InvalidDimension(
                "cells must share one square shape".into(),
            ));
        }
        Ok(Self { n, dim, cells })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Size of the matrices in each cell.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cell(&self, i: usize, j: usize) -> &CMatrix {
        &self.cells[i * self.n + j]
    }

    pub fn cells(&self) -> &[CMatrix] {
        &self.cells
    }

    pub fn with_cell(&self, i: usize, j: usize, m: CMatrix) -> Result<Self> {
        let mut cells = self.cells.clone();
        cells[i * self.n + j] = m;
        Self::new(self.n, cells)
    }
}

impl AsRef<ProjectionGrid> for ProjectionGrid {
    fn as_ref(&self) -> &ProjectionGrid {
        self
    }
}

/// Defects of a projection grid, all on operator-norm scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagicResidual {
    /// `max_i ‖Σ_j u_ij − I‖`.
    pub row_defect: f64,
    /// `max_j ‖Σ_i u_ij − I‖`.
    pub col_defect: f64,
    /// `max ‖u − u*‖ ∨ ‖u² − u‖` over cells.
    pub projection_defect: f64,
    /// `max |tr u_ij − 1|` over cells.
    pub rank_defect: f64,
}

impl MagicResidual {
    pub fn max(&self) -> f64 {
        self.magic_max().max(self.rank_defect)
    }

    fn magic_max(&self) -> f64 {
        self.row_defect
            .max(self.col_defect)
            .max(self.projection_defect)
    }

    /// Projections summing to the identity on rows and columns.
    pub fn is_magic(&self, tol: f64) -> bool {
        self.magic_max() <= tol
    }

    /// Magic with every cell of rank one.
    pub fn is_flat_magic(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

pub fn validate_magic(u: impl AsRef<ProjectionGrid>, _tol: f64) -> MagicResidual {
    magic_residual(u.as_ref())
}

fn magic_residual(u: &ProjectionGrid) -> MagicResidual {
    let n = u.n;
    let id = CMatrix::identity(u.dim, u.dim);
    let line_defect = |cells: &mut dyn Iterator<Item = &CMatrix>| {
        let s = cells.fold(CMatrix::zeros(u.dim, u.dim), |acc, c| acc + c);
        opnorm(&(s - &id))
    };
    let row_defect = (0..n)
        .map(|i| line_defect(&mut (0..n).map(|j| u.cell(i, j))))
        .fold(0.0, f64::max);
    let col_defect = (0..n)
        .map(|j| line_defect(&mut (0..n).map(|i| u.cell(i, j))))
        .fold(0.0, f64::max);
    let mut projection_defect = 0.0f64;
    let mut rank_defect = 0.0f64;
    for c in &u.cells {
        let skew = opnorm(&(c - c.adjoint()));
        let idem = opnorm(&(c * c - c));
        projection_defect = projection_defect.max(skew).max(idem);
        rank_defect = rank_defect.max((c.trace() - ONE).norm());
    }
    MagicResidual {
        row_defect,
        col_defect,
        projection_defect,
        rank_defect,
    }
}

/// A magic unitary whose entries are rank-one projections.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatMagicUnitary(ProjectionGrid);

impl FlatMagicUnitary {
    pub fn new(grid: ProjectionGrid, tol: f64) -> Result<Self> {
        let res = magic_residual(&grid);
        if !res.is_flat_magic(tol) {
            return invalid_input(format!("not a flat magic unitary: {res:?}"));
        }
        Ok(Self(grid))
    }

    pub(crate) fn from_grid_unchecked(grid: ProjectionGrid) -> Self {
        Self(grid)
    }

    pub fn n(&self) -> usize {
        self.0.n
    }

    pub fn cell(&self, i: usize, j: usize) -> &CMatrix {
        self.0.cell(i, j)
    }

    pub fn grid(&self) -> &ProjectionGrid {
        &self.0
    }

    pub fn into_grid(self) -> ProjectionGrid {
        self.0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl AsRef<ProjectionGrid> for FlatMagicUnitary {
    fn as_ref(&self) -> &ProjectionGrid {
        &self.0
    }
}

#[derive(Serialize, Deserialize)]
struct RawUnitary {
    #[serde(rename = "N")]
    n: usize,
    cells: Vec<Vec<Vec<Vec<C64>>>>,
}

impl Serialize for FlatMagicUnitary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.n();
        let cells = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let c = self.cell(i, j);
                        c.row_iter().map(|r| r.iter().copied().collect()).collect()
                    })
                    .collect()
            })
            .collect();
        RawUnitary { n, cells }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FlatMagicUnitary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawUnitary::deserialize(d)?;
        if raw.cells.len() != raw.n || raw.cells.iter().any(|r| r.len() != raw.n) {
            return Err(D::Error::custom("magic unitary must be N x N"));
        }
        let mut cells = Vec::with_capacity(raw.n * raw.n);
        for m in raw.cells.into_iter().flatten() {
            let k = m.len();
            if m.iter().any(|r| r.len() != k) {
                return Err(D::Error::custom("cells must be square matrices"));
            }
            let flat: Vec<C64> = m.into_iter().flatten().collect();
            cells.push(CMatrix::from_row_slice(k, k, &flat));
        }
        let grid = ProjectionGrid::new(raw.n, cells).map_err(D::Error::custom)?;
        FlatMagicUnitary::new(grid, MAGIC_TOL).map_err(D::Error::custom)
    }
}

/// Cellwise `Proj(ξ_ij)` of a magic basis.
pub fn grid_to_unitary(xi: &VectorGrid, tol: f64) -> Result<FlatMagicUnitary> {
    let (rd, cd) = (xi.row_defect(), xi.col_defect());
    if rd > tol || cd > tol {
        return invalid_input(format!(
            "not a magic basis: row defect {rd:.3e}, column defect {cd:.3e}"
        ));
    }
    Ok(FlatMagicUnitary(projections_of(xi)?))
}

fn projections_of(xi: &VectorGrid) -> Result<ProjectionGrid> {
    let cells = xi
        .cells
        .iter()
        .map(|v| proj(v).map(Projection::into_matrix))
        .collect::<Result<Vec<_>>>()?;
    ProjectionGrid::new(xi.n, cells)
}

/// `u_ij = p_{L_ij}` for a resolution of the identity `p_1, …, p_N`.
pub fn latin_model(l: &LatinSquare, p: &[Projection], tol: f64) -> Result<ProjectionGrid> {
    let n = l.size();
    if p.len() != n {
        return invalid_input(format!("need {n} projections, got {}", p.len()));
    }
    let dim = p[0].dim();
    if p.iter().any(|q| q.dim() != dim) {
        return Err(Error::InvalidDimension(
            "projections have mixed sizes".into(),
        ));
    }
    let sum = p
        .iter()
        .fold(CMatrix::zeros(dim, dim), |acc, q| acc + q.matrix());
    let defect = opnorm(&(sum - CMatrix::identity(dim, dim)));
    if defect > tol {
        return invalid_input(format!(
            "projections do not sum to the identity (defect {defect:.3e})"
        ));
    }
    let cells = (0..n * n)
        .map(|k| p[l.get(k / n, k % n) - 1].matrix().clone())
        .collect();
    ProjectionGrid::new(n, cells)
}

/// Validates that `h` is a complex Hadamard matrix.
pub fn check_hadamard(h: &CMatrix, tol: f64) -> Result<()> {
    if !h.is_square() || h.nrows() == 0 {
        return Err(Error::InvalidDimension(
            "Hadamard matrix must be square".into(),
        ));
    }
    let n = h.nrows();
    if h.iter().any(|z| (z.norm() - 1.0).abs() > tol) {
        return invalid_input("Hadamard entries must be unimodular");
    }
    if !is_unitary(&h.unscale((n as f64).sqrt()), tol * n as f64) {
        return invalid_input("Hadamard rows must be pairwise orthogonal");
    }
    Ok(())
}

/// `H_i / H_j`, normalized to unit length.
fn ratio_vector(h: &CMatrix, i: usize, k: &CMatrix, j: usize) -> CVector {
    let n = h.ncols();
    CVector::from_fn(n, |a, _| h[(i, a)] * k[(j, a)].conj())
}

/// `u_ij = Proj(H_i / K_j)` for two complex Hadamard matrices.
pub fn hadamard_pair_model(h: &CMatrix, k: &CMatrix, tol: f64) -> Result<FlatMagicUnitary> {
    check_hadamard(h, tol)?;
    check_hadamard(k, tol)?;
    if h.shape() != k.shape() {
        return Err(Error::InvalidDimension(
            "Hadamard matrices differ in size".into(),
        ));
    }
    let n = h.nrows();
    let cells = (0..n * n)
        .map(|c| proj(&ratio_vector(h, c / n, k, c % n)).map(Projection::into_matrix))
        .collect::<Result<Vec<_>>>()?;
    Ok(FlatMagicUnitary(ProjectionGrid::new(n, cells)?))
}

/// `u_ij = Proj(H_i / H_j)`.
pub fn hadamard_model(h: &CMatrix, tol: f64) -> Result<FlatMagicUnitary> {
    hadamard_pair_model(h, h, tol)
}

/// The diagonal basis `g_i = diag(H_i)` of `C^N`.
pub fn hadamard_basis(h: &CMatrix, tol: f64) -> Result<OrthonormalUnitaryBasis> {
    check_hadamard(h, tol)?;
    let n = h.nrows();
    let members = (0..n)
        .map(|i| CMatrix::from_diagonal(&CVector::from_iterator(n, h.row(i).iter().copied())))
        .collect();
    let labels = (0..n)
        .map(|i| crate::groups::GroupElement(vec![i]))
        .collect();
    OrthonormalUnitaryBasis::new(AlgebraKind::Diagonal, members, labels, tol.max(1e-10))
}

/// Grid of vectorized `e_i f_j*`.
pub fn split_grid(e: &OrthonormalUnitaryBasis, f: &OrthonormalUnitaryBasis) -> Result<VectorGrid> {
    if e.kind() != f.kind() || e.dim() != f.dim() || e.len() != f.len() {
        return Err(Error::InvalidDimension(
            "bases live in different algebras".into(),
        ));
    }
    let n = e.len();
    let fstar: Vec<CMatrix> = f.members().iter().map(|m| m.adjoint()).collect();
    let cells = (0..n * n)
        .map(|k| e.vectorize(&(&e.members()[k / n] * &fstar[k % n])))
        .collect();
    VectorGrid::from_cells_unchecked(n, cells)
}

/// `u_ij = Proj(e_i f_j*)`.
pub fn split_model(
    e: &OrthonormalUnitaryBasis,
    f: &OrthonormalUnitaryBasis,
) -> Result<FlatMagicUnitary> {
    let grid = split_grid(e, f)?;
    Ok(FlatMagicUnitary(projections_of(&grid)?))
}

/// Grid of vectorized `g_i x g_j*`.
pub fn fully_split_grid(basis: &OrthonormalUnitaryBasis, x: &CMatrix) -> Result<VectorGrid> {
    if x.nrows() != basis.dim() || x.ncols() != basis.dim() {
        return Err(Error::InvalidDimension("x has the wrong size".into()));
    }
    if !is_unitary(x, 1e-10 * basis.dim() as f64) {
        return invalid_input("x must be unitary");
    }
    if basis.kind() == AlgebraKind::Diagonal
        && (0..x.nrows()).any(|a| (0..x.ncols()).any(|b| a != b && x[(a, b)].norm() > 0.0))
    {
        return invalid_input("x must be diagonal for a basis of C^N");
    }
    let n = basis.len();
    let gx: Vec<CMatrix> = basis.members().iter().map(|g| g * x).collect();
    let gstar: Vec<CMatrix> = basis.members().iter().map(|g| g.adjoint()).collect();
    let cells = (0..n * n)
        .map(|k| basis.vectorize(&(&gx[k / n] * &gstar[k % n])))
        .collect();
    VectorGrid::from_cells_unchecked(n, cells)
}

/// `u_ij = Proj(g_i x g_j*)`.
pub fn fully_split_model(basis: &OrthonormalUnitaryBasis, x: &CMatrix) -> Result<FlatMagicUnitary> {
    let grid = fully_split_grid(basis, x)?;
    Ok(FlatMagicUnitary::from_grid_unchecked(projections_of(
        &grid,
    )?))
}
