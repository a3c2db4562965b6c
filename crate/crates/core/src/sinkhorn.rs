//! Sinkhorn-type flattening onto magic bases.
//!
//! A tuple `x = (x_1, …, x_N)` of unitaries is viewed as the grid whose cell
//! `(i, j)` is the `j`-th row of `x_i`; rows of this grid are orthonormal by
//! construction. `Φ` orthonormalizes each grid column by its polar part and
//! transposes, and iterating it is expected to land on a magic basis.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Error, Result};
use crate::groups::LatinSquare;
use crate::linalg::{
    haar_unitary, matrix_from_rows, pinv_sqrt, polar, polar_with_min_singular, row_vector,
    unitarity_defect, CMatrix, CVector, Projection,
};
use crate::magic::{ProjectionGrid, VectorGrid};
use crate::moments::{catalan, f_p, transfer_moments, GridSampler, MomentSeries};
use crate::rng::{stream, StreamRng};

/// Singular values below this mark a degenerate column in the trace.
pub const DEGENERATE_SINGULAR: f64 = 1e-12;
/// Slack on volume decreases along a trajectory.
pub const VOL_SLACK: f64 = 1e-12;
/// A run stalls when its residual improves by less than this over
/// [`STALL_WINDOW`] iterations.
pub const STALL_IMPROVEMENT: f64 = 1e-14;
pub const STALL_WINDOW: usize = 50;
/// Resamples allowed per requested sample in [`KnSampler`].
pub const RETRY_BUDGET: u32 = 5;
/// Default iteration cap and column tolerance of the sampler.
pub const SAMPLER_MAX_ITERS: usize = 10_000;
pub const SAMPLER_TOL: f64 = 1e-9;

/// Element of `U_N^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryTuple {
    members: Vec<CMatrix>,
}

impl UnitaryTuple {
    pub fn new(members: Vec<CMatrix>, tol: f64) -> Result<Self> {
        let n = members.len();
        if n == 0 {
            return Err(Error::InvalidDimension("empty unitary tuple".into()));
        }
        for (i, x) in members.iter().enumerate() {
            if x.nrows() != n || x.ncols() != n {
                return Err(Error::InvalidDimension(format!(
                    "member {i} is not {n}x{n}"
                )));
            }
            let d = unitarity_defect(x);
            if d > tol {
                return invalid_input(format!("member {i} has unitarity defect {d:.3e}"));
            }
        }
        Ok(Self { members })
    }

    /// `N` independent Haar unitaries.
    pub fn haar(n: usize, rng: &mut StreamRng) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension("N must be positive".into()));
        }
        let members = (0..n)
            .map(|_| haar_unitary(n, rng))
            .collect::<Result<_>>()?;
        Ok(Self { members })
    }

    /// Reads a grid with orthonormal rows back as a tuple.
    pub fn from_grid(grid: &VectorGrid, tol: f64) -> Result<Self> {
        if grid.dim() != grid.n() {
            return Err(Error::InvalidDimension(
                "grid cells must live in C^N".into(),
            ));
        }
        let members = (0..grid.n())
            .map(|i| matrix_from_rows(&grid.row(i)))
            .collect();
        Self::new(members, tol)
    }

    pub fn n(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[CMatrix] {
        &self.members
    }

    /// Cell `(i, j)` is row `j` of `x_i`.
    pub fn grid(&self) -> VectorGrid {
        let n = self.n();
        let cells = (0..n * n)
            .map(|k| row_vector(&self.members[k / n], k % n))
            .collect();
        VectorGrid::new(n, cells, 1e-8).expect("rows of unitaries are unit vectors")
    }
}

/// Rows of `Pol(M)` where `M` has rows `x_i`.
pub fn alpha(xs: &[CVector]) -> Result<Vec<CVector>> {
    let n = xs.len();
    if n == 0 || xs.iter().any(|v| v.len() != n) {
        return Err(Error::InvalidDimension(
            "alpha needs N vectors in C^N".into(),
        ));
    }
    let u = polar(&matrix_from_rows(xs))?;
    Ok((0..n).map(|i| row_vector(&u, i)).collect())
}

/// `p_i ↦ P^{-1/2} p_i P^{-1/2}` with `P = Σ p_i` (Moore–Penrose).
pub fn beta(ps: &[Projection]) -> Result<Vec<Projection>> {
    let Some(first) = ps.first() else {
        return Ok(Vec::new());
    };
    let dim = first.dim();
    if ps.iter().any(|p| p.dim() != dim) {
        return Err(Error::InvalidDimension(
            "projections of mixed dimensions".into(),
        ));
    }
    let total = ps
        .iter()
        .fold(CMatrix::zeros(dim, dim), |acc, p| acc + p.matrix());
    let root = pinv_sqrt(&total)?;
    Ok(ps
        .iter()
        .map(|p| {
            let m = &root * p.matrix() * &root;
            Projection::from_matrix_unchecked((&m + m.adjoint()).scale(0.5))
        })
        .collect())
}

/// `Φ(x)_j = Pol(M_j)`, where `M_j` has rows `x_{ij}` (grid column `j`).
pub fn phi_map(x: &UnitaryTuple) -> Result<UnitaryTuple> {
    phi_step(x).map(|(y, _)| y)
}

/// `Φ` together with the smallest singular value over all `M_j`.
fn phi_step(x: &UnitaryTuple) -> Result<(UnitaryTuple, f64)> {
    let n = x.n();
    let mut smin = f64::INFINITY;
    let mut members = Vec::with_capacity(n);
    for j in 0..n {
        let m = CMatrix::from_fn(n, n, |i, k| x.members[i][(j, k)]);
        let (u, s) = polar_with_min_singular(&m)?;
        smin = smin.min(s);
        members.push(u);
    }
    Ok((UnitaryTuple { members }, smin))
}

/// `Ψ(u)_{ij} = P_i^{-1/2} u_{ji} P_i^{-1/2}` with `P_i = Σ_j u_{ji}`.
///
/// Requires every grid row of `u` to sum to the identity within `tol`.
pub fn psi_map(u: &ProjectionGrid, tol: f64) -> Result<ProjectionGrid> {
    let n = u.n();
    let d = u.dim();
    let id = CMatrix::identity(d, d);
    for i in 0..n {
        let s = (0..n).fold(CMatrix::zeros(d, d), |acc, j| acc + u.cell(i, j));
        let defect = crate::linalg::max_abs(&(s - &id));
        if defect > tol {
            return invalid_input(format!(
                "row {i} sums to the identity only up to {defect:.3e}"
            ));
        }
    }
    let mut cells = vec![CMatrix::zeros(d, d); n * n];
    for i in 0..n {
        let col: Vec<Projection> = (0..n)
            .map(|j| Projection::from_matrix_unchecked(u.cell(j, i).clone()))
            .collect();
        for (j, p) in beta(&col)?.into_iter().enumerate() {
            cells[i * n + j] = p.into_matrix();
        }
    }
    ProjectionGrid::new(n, cells)
}

/// `Π_j |det M_j|`, where `M_j` has rows `x_{ij}`.
pub fn vol(grid: &VectorGrid) -> f64 {
    let n = grid.n();
    if grid.dim() != n {
        return 0.0;
    }
    (0..n)
        .map(|j| matrix_from_rows(&grid.col(j)).determinant().norm())
        .product()
}

/// One row of a flattening trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlattenRecord {
    pub iteration: usize,
    /// Column-orthonormality defect of the grid.
    pub residual: f64,
    pub vol: f64,
    #[serde(rename = "F_2")]
    pub f2: f64,
    #[serde(rename = "F_3", default, skip_serializing_if = "Option::is_none")]
    pub f3: Option<f64>,
    /// The step producing this grid met a singular column.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlatteningTrace {
    pub records: Vec<FlattenRecord>,
}

impl FlatteningTrace {
    /// Steps where `vol` dropped by more than [`VOL_SLACK`].
    pub fn vol_violations(&self) -> usize {
        self.records
            .windows(2)
            .filter(|w| w[1].vol < w[0].vol - VOL_SLACK)
            .count()
    }

    /// Most negative `vol` increment (0 if nondecreasing).
    pub fn worst_vol_step(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| w[1].vol - w[0].vol)
            .fold(0.0, f64::min)
    }

    pub fn degenerate_events(&self) -> usize {
        self.records.iter().filter(|r| r.degenerate).count()
    }

    pub fn to_csv(&self) -> String {
        let with_f3 = self.records.iter().any(|r| r.f3.is_some());
        let mut s = String::from("iteration,residual,vol,F_2");
        if with_f3 {
            s.push_str(",F_3");
        }
        s.push('\n');
        for r in &self.records {
            let _ = write!(s, "{},{:e},{:e},{:e}", r.iteration, r.residual, r.vol, r.f2);
            if with_f3 {
                let _ = write!(s, ",{:e}", r.f3.unwrap_or(f64::NAN));
            }
            s.push('\n');
        }
        s
    }
}

/// Trace detail recorded by [`flatten_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceLevel {
    /// Residuals only; the returned trace is empty.
    Off,
    /// `vol` and `F_2` per iteration.
    Full,
    /// As `Full`, plus `F_3`.
    WithF3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlattenOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub trace: TraceLevel,
}

#[derive(Debug, Clone)]
pub struct FlattenOutcome {
    pub tuple: UnitaryTuple,
    pub trace: FlatteningTrace,
    pub converged: bool,
    /// Applications of `Φ` performed.
    pub iterations: usize,
    pub stalled: bool,
    pub final_residual: f64,
}

impl FlattenOutcome {
    pub fn grid(&self) -> VectorGrid {
        self.tuple.grid()
    }
}

/// Iterates `Φ` until the column defect is at most `residual_tol`, with a
/// full trace.
pub fn flatten(x0: &UnitaryTuple, max_iters: usize, residual_tol: f64) -> Result<FlattenOutcome> {
    flatten_with(
        x0,
        &FlattenOptions {
            max_iters,
            tol: residual_tol,
            trace: TraceLevel::Full,
        },
    )
}

fn record(
    grid: &VectorGrid,
    iteration: usize,
    residual: f64,
    degenerate: bool,
    level: TraceLevel,
) -> Result<FlattenRecord> {
    Ok(FlattenRecord {
        iteration,
        residual,
        vol: vol(grid),
        f2: f_p(grid, 2)?,
        f3: if level == TraceLevel::WithF3 {
            Some(f_p(grid, 3)?)
        } else {
            None
        },
        degenerate,
    })
}

pub fn flatten_with(x0: &UnitaryTuple, opts: &FlattenOptions) -> Result<FlattenOutcome> {
    if opts.max_iters == 0 {
        return invalid_input("max_iters must be at least 1");
    }
    let mut x = x0.clone();
    let mut grid = x.grid();
    let mut residual = grid.col_defect();
    let mut trace = FlatteningTrace::default();
    if opts.trace != TraceLevel::Off {
        trace
            .records
            .push(record(&grid, 0, residual, false, opts.trace)?);
    }
    let mut history = vec![residual];
    let mut stalled = false;
    let mut iterations = 0;
    while residual > opts.tol && iterations < opts.max_iters {
        let (next, smin) = phi_step(&x)?;
        x = next;
        iterations += 1;
        grid = x.grid();
        residual = grid.col_defect();
        if opts.trace != TraceLevel::Off {
            trace.records.push(record(
                &grid,
                iterations,
                residual,
                smin < DEGENERATE_SINGULAR,
                opts.trace,
            )?);
        }
        history.push(residual);
        if iterations >= STALL_WINDOW && residual > opts.tol {
            let before = history[iterations - STALL_WINDOW];
            if before - residual < STALL_IMPROVEMENT {
                stalled = true;
                break;
            }
        }
    }
    Ok(FlattenOutcome {
        tuple: x,
        trace,
        converged: residual <= opts.tol,
        iterations,
        stalled,
        final_residual: residual,
    })
}

/// Push-forward of Haar measure on `U_N^N` under the flattening iteration.
#[derive(Debug)]
pub struct KnSampler {
    n: usize,
    pub max_iters: usize,
    pub tol: f64,
    resamples: AtomicU64,
}

impl KnSampler {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return invalid_input("K_N sampling needs N >= 2");
        }
        Ok(Self {
            n,
            max_iters: SAMPLER_MAX_ITERS,
            tol: SAMPLER_TOL,
            resamples: AtomicU64::new(0),
        })
    }

    /// Haar starts discarded for non-convergence so far.
    pub fn resamples(&self) -> u64 {
        self.resamples.load(Ordering::Relaxed)
    }
}

impl GridSampler for KnSampler {
    fn n(&self) -> usize {
        self.n
    }

    fn sample(&self, rng: &mut StreamRng) -> Result<VectorGrid> {
        let opts = FlattenOptions {
            max_iters: self.max_iters,
            tol: self.tol,
            trace: TraceLevel::Off,
        };
        for _ in 0..=RETRY_BUDGET {
            let out = flatten_with(&UnitaryTuple::haar(self.n, rng)?, &opts)?;
            if out.converged {
                return Ok(out.grid());
            }
            self.resamples.fetch_add(1, Ordering::Relaxed);
        }
        Err(Error::SamplingFailure(format!(
            "no convergence after {} Haar starts at N = {}",
            RETRY_BUDGET + 1,
            self.n
        )))
    }
}

/// One magic basis drawn from the push-forward measure.
pub fn sample_k_n(n: usize, seed: u64) -> Result<VectorGrid> {
    KnSampler::new(n)?.sample(&mut stream(seed, 0))
}

/// Latin square of a magic basis, labelling each cell by the row-0 cell of
/// maximal overlap. Also returns the smallest winning overlap `|<x_ij, x_0k>|²`.
pub fn extract_latin_square(grid: &VectorGrid) -> Result<(LatinSquare, f64)> {
    let n = grid.n();
    let mut worst = f64::INFINITY;
    let mut rows = vec![vec![0usize; n]; n];
    for i in 0..n {
        for j in 0..n {
            let (k, best) = (0..n)
                .map(|k| (k, grid.cell(0, k).dotc(grid.cell(i, j)).norm_sqr()))
                .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            rows[i][j] = k + 1;
            worst = worst.min(best);
        }
    }
    Ok((LatinSquare::new(rows)?, worst))
}

/// Universal-model moments with the Catalan reference attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniversalMoments {
    pub series: MomentSeries,
    /// Haar starts discarded for non-convergence.
    pub resamples: u64,
}

/// `c_p^r = Tr(T_p^r)` with `T_p` averaged over the push-forward measure.
pub fn universal_moments(
    n: usize,
    p_max: usize,
    r_max: usize,
    num_samples: u64,
    seed: u64,
) -> Result<UniversalMoments> {
    let sampler = KnSampler::new(n)?;
    let series = transfer_moments(&sampler, p_max, r_max, num_samples, seed)?
        .with_reference(|p| catalan(p).map_or(f64::NAN, |c| c as f64));
    Ok(UniversalMoments {
        series,
        resamples: sampler.resamples(),
    })
}
