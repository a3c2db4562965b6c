//! Laws of main characters.
//!
//! Transfer matrices `T_p`, truncated moments `c_p^r = Tr(T_p^r)`, their
//! Gram-matrix and diagonal Weyl forms, the `|Tr x|²` law, partition vectors
//! and `F_p`, and exact combinatorial references.
//!
//! Multi-indices `(i_1, …, i_p)` are linearized row-major:
//! `I = i_1 N^{p-1} + … + i_p`.

use std::fmt::Write as _;

use itertools::Itertools;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Error, Result};
use crate::groups::{weyl_basis, FiniteAbelianGroup, OrthonormalUnitaryBasis};
use crate::linalg::{haar_unitary, CMatrix, CVector, C64, ONE, ZERO};
use crate::magic::{fully_split_grid, VectorGrid};
use crate::mc::{batch_ranges, jackknife, tree_reduce, ArrayStats, RunningStats};
use crate::rng::{stream, StreamRng};

/// Largest multi-index count `N^p` accepted.
pub const MAX_ROWS: usize = 1 << 20;
/// Largest entry count `N^{2p}` of a transfer matrix.
pub const MAX_ENTRIES: usize = 1 << 24;
/// Largest entry count of a Monte Carlo averaged transfer matrix.
pub const MAX_AVERAGED_ENTRIES: usize = 1 << 20;
/// Jackknife batches for nonlinear statistics of averaged matrices.
pub const JACKKNIFE_BATCHES: u64 = 20;
/// Largest accepted imaginary residue (relative) of a moment.
pub const IMAG_TOL: f64 = 1e-10;

fn checked_pow(base: usize, exp: usize, limit: usize, what: &str) -> Result<usize> {
    let mut acc: usize = 1;
    for _ in 0..exp {
        acc = acc
            .checked_mul(base)
            .filter(|&v| v <= limit)
            .ok_or_else(|| Error::ResourceLimit(format!("{what}: {base}^{exp} exceeds {limit}")))?;
    }
    Ok(acc)
}

/// `N^p × N^p` matrix of cyclic scalar products of grid cells.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTransferMatrix {
    pub n: usize,
    pub p: usize,
    pub entries: CMatrix,
}

/// Gram matrix of all `N²` cells, indexed by `c = i·N + j`.
fn cell_gram(xi: &VectorGrid) -> Vec<C64> {
    let cells = xi.cells();
    let m = cells.len();
    let mut g = vec![ZERO; m * m];
    for a in 0..m {
        for b in a..m {
            let v = cells[b].dotc(&cells[a]);
            g[a * m + b] = v;
            g[b * m + a] = v.conj();
        }
    }
    g
}

/// Writes `T_p` row-major into `out` (length `N^{2p}`).
fn fill_t(gc: &[C64], n: usize, p: usize, out: &mut [C64]) {
    let m = n * n;
    let rows = n.pow(p as u32);
    let scale = C64::new(1.0 / n as f64, 0.0);
    let mut i = vec![0usize; p];
    let mut j = vec![0usize; p];
    // prod[t] = Π_{s<t} <x_{c_s}, x_{c_{s+1}}> with c_s = i_s N + j_s
    let mut prod = vec![scale; p];
    for (r, row) in out.chunks_exact_mut(rows).enumerate() {
        let mut rest = r;
        for t in (0..p).rev() {
            i[t] = rest % n;
            rest /= n;
        }
        j.iter_mut().for_each(|v| *v = 0);
        let mut from = 1;
        for slot in row.iter_mut() {
            for t in from..p {
                prod[t] = prod[t - 1] * gc[(i[t - 1] * n + j[t - 1]) * m + i[t] * n + j[t]];
            }
            *slot = prod[p - 1] * gc[(i[p - 1] * n + j[p - 1]) * m + i[0] * n + j[0]];
            let mut k = p;
            while k > 0 {
                k -= 1;
                j[k] += 1;
                if j[k] < n {
                    break;
                }
                j[k] = 0;
            }
            from = k.max(1);
        }
    }
}

/// `(T_p^x)_{I,J} = (1/N) <x_{i_1 j_1}, x_{i_2 j_2}> ⋯ <x_{i_p j_p}, x_{i_1 j_1}>`.
pub fn t_matrix(xi: &VectorGrid, p: usize) -> Result<MomentTransferMatrix> {
    if p == 0 {
        return invalid_input("p must be at least 1");
    }
    let n = xi.n();
    let rows = checked_pow(n, p, MAX_ROWS, "transfer matrix rows")?;
    checked_pow(n, 2 * p, MAX_ENTRIES, "transfer matrix entries")?;
    let gc = cell_gram(xi);
    let mut buf = vec![ZERO; rows * rows];
    fill_t(&gc, n, p, &mut buf);
    Ok(MomentTransferMatrix {
        n,
        p,
        entries: CMatrix::from_row_slice(rows, rows, &buf),
    })
}

fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut s = ZERO;
    for i in 0..n {
        for j in 0..n {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

/// `Tr(M^r)` for `r = 1..=r_max`, using powers up to `⌈r_max/2⌉`.
pub fn power_traces(m: &CMatrix, r_max: usize) -> Vec<C64> {
    let half = r_max.div_ceil(2);
    let mut powers: Vec<CMatrix> = Vec::with_capacity(half);
    if half > 0 {
        powers.push(m.clone());
    }
    for k in 1..half {
        let next = &powers[k - 1] * m;
        powers.push(next);
    }
    (1..=r_max)
        .map(|r| {
            let a = r.div_ceil(2);
            let b = r / 2;
            if b == 0 {
                powers[a - 1].trace()
            } else {
                trace_of_product(&powers[a - 1], &powers[b - 1])
            }
        })
        .collect()
}

fn real_part(z: C64, what: &str) -> Result<f64> {
    if z.im.abs() > IMAG_TOL * z.re.abs().max(1.0) {
        return invalid_input(format!("{what} has imaginary residue {:.3e}", z.im));
    }
    Ok(z.re)
}

/// `c_p^r = Tr(T_p^r)` for `r = 1..=r_max` (real parts).
pub fn truncated_moments(t: &MomentTransferMatrix, r_max: usize) -> Result<Vec<f64>> {
    power_traces(&t.entries, r_max)
        .into_iter()
        .map(|z| real_part(z, "Tr(T^r)"))
        .collect()
}

/// Source of random grids; sample `k` receives `rng::stream(seed, k)`.
pub trait GridSampler: Sync {
    fn n(&self) -> usize;
    fn sample(&self, rng: &mut StreamRng) -> Result<VectorGrid>;
}

/// Always returns the same grid.
#[derive(Debug, Clone)]
pub struct ConstantSampler(pub VectorGrid);

impl GridSampler for ConstantSampler {
    fn n(&self) -> usize {
        self.0.n()
    }

    fn sample(&self, _rng: &mut StreamRng) -> Result<VectorGrid> {
        Ok(self.0.clone())
    }
}

/// Grids `g_i x g_j*` with `x` Haar on the unitary group of the algebra.
#[derive(Debug, Clone)]
pub struct FullySplitSampler {
    pub basis: OrthonormalUnitaryBasis,
}

impl GridSampler for FullySplitSampler {
    fn n(&self) -> usize {
        self.basis.len()
    }

    fn sample(&self, rng: &mut StreamRng) -> Result<VectorGrid> {
        let x = self.basis.sample_unitary(rng)?;
        fully_split_grid(&self.basis, &x)
    }
}

/// Monte Carlo average of `T_p^x` with entrywise errors and batch means.
#[derive(Debug, Clone)]
pub struct AveragedTransfer {
    pub mean: MomentTransferMatrix,
    /// Entrywise standard error of the mean.
    pub stderr: DMatrix<f64>,
    pub samples: u64,
    batches: Vec<(u64, Vec<C64>)>,
}

impl AveragedTransfer {
    /// `(estimate, stderr)` of `Tr(T_p^r)`, `r = 1..=r_max`, by jackknife over
    /// batches; `r = 1` is linear and reported without bias correction.
    pub fn moments(&self, r_max: usize) -> Result<Vec<(f64, f64)>> {
        let rows = self.mean.entries.nrows();
        let mut out = Vec::with_capacity(r_max);
        for r in 1..=r_max {
            let theta = |flat: &[C64]| {
                let m = CMatrix::from_row_slice(rows, rows, flat);
                real_part(power_traces(&m, r)[r - 1], "Tr(T^r)")
            };
            let (jk, se) = jackknife(&self.batches, theta)?;
            let est = if r == 1 {
                real_part(self.mean.entries.trace(), "Tr(T)")?
            } else {
                jk
            };
            out.push((est, se));
        }
        Ok(out)
    }
}

/// Averages `T_p` for every `p` in `ps`, drawing each grid once.
pub fn averaged_t_matrices(
    sampler: &dyn GridSampler,
    ps: &[usize],
    num_samples: u64,
    seed: u64,
) -> Result<Vec<AveragedTransfer>> {
    if num_samples == 0 {
        return invalid_input("at least one sample is required");
    }
    if ps.is_empty() || ps.contains(&0) {
        return invalid_input("word lengths must be at least 1");
    }
    let n = sampler.n();
    let mut sizes = Vec::with_capacity(ps.len());
    for &p in ps {
        let rows = checked_pow(n, p, MAX_ROWS, "transfer matrix rows")?;
        checked_pow(
            n,
            2 * p,
            MAX_AVERAGED_ENTRIES,
            "averaged transfer matrix entries",
        )?;
        sizes.push(rows);
    }
    let leaf = |lo: u64, hi: u64| -> Result<Vec<ArrayStats>> {
        let zeros = |s: usize| vec![ZERO; s * s];
        let mut shift: Vec<Vec<C64>> = sizes.iter().map(|&s| zeros(s)).collect();
        let mut sums: Vec<Vec<C64>> = sizes.iter().map(|&s| zeros(s)).collect();
        let mut sq: Vec<Vec<f64>> = sizes.iter().map(|&s| vec![0.0; s * s]).collect();
        let mut buf: Vec<C64> = Vec::new();
        for k in lo..hi {
            let grid = sampler.sample(&mut stream(seed, k))?;
            let gc = cell_gram(&grid);
            for (slot, &p) in ps.iter().enumerate() {
                if k == lo {
                    fill_t(&gc, n, p, &mut shift[slot]);
                    continue;
                }
                buf.resize(shift[slot].len(), ZERO);
                fill_t(&gc, n, p, &mut buf);
                for (((s, q), z), c) in sums[slot]
                    .iter_mut()
                    .zip(sq[slot].iter_mut())
                    .zip(&buf)
                    .zip(&shift[slot])
                {
                    let d = z - c;
                    *s += d;
                    *q += d.norm_sqr();
                }
            }
        }
        Ok((0..ps.len())
            .map(|slot| {
                ArrayStats::from_shifted_sums(hi - lo, &shift[slot], &sums[slot], &sq[slot])
            })
            .collect())
    };
    let merge = |a: Vec<ArrayStats>, b: Vec<ArrayStats>| -> Vec<ArrayStats> {
        a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect()
    };
    let mut per_batch: Vec<Vec<ArrayStats>> = Vec::new();
    for (lo, hi) in batch_ranges(num_samples, JACKKNIFE_BATCHES) {
        per_batch.push(tree_reduce(lo, hi, &leaf, &merge)?);
    }
    let mut out = Vec::with_capacity(ps.len());
    for (slot, (&p, &rows)) in ps.iter().zip(&sizes).enumerate() {
        let batches: Vec<(u64, Vec<C64>)> = per_batch
            .iter()
            .map(|b| (b[slot].count(), b[slot].mean().to_vec()))
            .collect();
        let total = per_batch
            .iter()
            .map(|b| b[slot].clone())
            .reduce(ArrayStats::merge)
            .expect("at least one batch");
        out.push(AveragedTransfer {
            mean: MomentTransferMatrix {
                n,
                p,
                entries: CMatrix::from_row_slice(rows, rows, total.mean()),
            },
            stderr: DMatrix::from_row_slice(rows, rows, &total.stderr()),
            samples: total.count(),
            batches,
        });
    }
    Ok(out)
}

/// Monte Carlo estimate of `T_p = ∫ T_p^x dx`.
pub fn averaged_t_matrix(
    sampler: &dyn GridSampler,
    p: usize,
    num_samples: u64,
    seed: u64,
) -> Result<AveragedTransfer> {
    Ok(averaged_t_matrices(sampler, &[p], num_samples, seed)?.remove(0))
}

/// Moment estimates indexed by `(p, r)`, stored column-wise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSeries {
    #[serde(rename = "N")]
    pub n: usize,
    pub p: Vec<usize>,
    /// Truncation order; `0` for the untruncated `|Tr x|²` law.
    pub r: Vec<usize>,
    pub samples: u64,
    pub estimate: Vec<f64>,
    pub stderr: Vec<f64>,
    pub seed: u64,
    /// Exact reference values aligned with `estimate`, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<f64>>,
}

impl MomentSeries {
    fn empty(n: usize, samples: u64, seed: u64) -> Self {
        Self {
            n,
            p: Vec::new(),
            r: Vec::new(),
            samples,
            estimate: Vec::new(),
            stderr: Vec::new(),
            seed,
            reference: None,
        }
    }

    fn push(&mut self, p: usize, r: usize, estimate: f64, stderr: f64) {
        self.p.push(p);
        self.r.push(r);
        self.estimate.push(estimate);
        self.stderr.push(stderr);
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// `(estimate, stderr)` at `(p, r)`.
    pub fn get(&self, p: usize, r: usize) -> Option<(f64, f64)> {
        (0..self.len())
            .find(|&k| self.p[k] == p && self.r[k] == r)
            .map(|k| (self.estimate[k], self.stderr[k]))
    }

    /// Attaches `reference(p)` to every row.
    pub fn with_reference(mut self, reference: impl Fn(usize) -> f64) -> Self {
        self.reference = Some(self.p.iter().map(|&p| reference(p)).collect());
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per `(p, r)`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("N,p,r,samples,estimate,stderr,seed");
        if self.reference.is_some() {
            s.push_str(",reference");
        }
        s.push('\n');
        for k in 0..self.len() {
            let _ = write!(
                s,
                "{},{},{},{},{:e},{:e},{}",
                self.n,
                self.p[k],
                self.r[k],
                self.samples,
                self.estimate[k],
                self.stderr[k],
                self.seed
            );
            if let Some(r) = &self.reference {
                let _ = write!(s, ",{:e}", r[k]);
            }
            s.push('\n');
        }
        s
    }
}

/// `c_p^r` for `p = 1..=p_max`, `r = 1..=r_max` via averaged transfer
/// matrices.
pub fn transfer_moments(
    sampler: &dyn GridSampler,
    p_max: usize,
    r_max: usize,
    num_samples: u64,
    seed: u64,
) -> Result<MomentSeries> {
    if r_max == 0 {
        return invalid_input("r_max must be at least 1");
    }
    let ps: Vec<usize> = (1..=p_max).collect();
    let avgs = averaged_t_matrices(sampler, &ps, num_samples, seed)?;
    let mut series = MomentSeries::empty(sampler.n(), num_samples, seed);
    for (p, avg) in ps.iter().zip(&avgs) {
        for (r, (est, se)) in avg.moments(r_max)?.into_iter().enumerate() {
            series.push(*p, r + 1, est, se);
        }
    }
    Ok(series)
}

/// Scalar Monte Carlo over `p = 1..=p_max` statistics.
fn scalar_moments<F>(
    p_max: usize,
    num_samples: u64,
    seed: u64,
    per_sample: F,
) -> Result<Vec<RunningStats>>
where
    F: Fn(&mut StreamRng) -> Result<Vec<f64>> + Sync,
{
    if num_samples == 0 {
        return invalid_input("at least one sample is required");
    }
    if p_max == 0 {
        return invalid_input("p_max must be at least 1");
    }
    let leaf = |lo: u64, hi: u64| -> Result<Vec<RunningStats>> {
        let mut acc = vec![RunningStats::default(); p_max];
        for k in lo..hi {
            let vals = per_sample(&mut stream(seed, k))?;
            for (a, v) in acc.iter_mut().zip(vals) {
                a.push(v);
            }
        }
        Ok(acc)
    };
    let merge = |a: Vec<RunningStats>, b: Vec<RunningStats>| {
        a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect()
    };
    tree_reduce(0, num_samples, &leaf, &merge)
}

/// `ξ_{i_1…i_r} = g_{i_1} x_1 g_{i_2}* ⊗ … ⊗ g_{i_r} x_r g_{i_1}*`, and
/// `G_{I,J} = <ξ_I, ξ_J>` (product of normalized-trace pairings).
pub fn build_gram_matrix(basis: &OrthonormalUnitaryBasis, xs: &[CMatrix]) -> Result<CMatrix> {
    let r = xs.len();
    if r == 0 {
        return invalid_input("at least one unitary is required");
    }
    let n = basis.len();
    let rows = checked_pow(n, r, 1 << 12, "Gram matrix rows")?;
    let m = n * n;
    let gstar: Vec<CMatrix> = basis.members().iter().map(|g| g.adjoint()).collect();
    let mut blocks = Vec::with_capacity(r);
    for x in xs {
        if x.nrows() != basis.dim() || x.ncols() != basis.dim() {
            return Err(Error::InvalidDimension("unitary has the wrong size".into()));
        }
        let vs: Vec<CVector> = (0..m)
            .map(|k| basis.vectorize(&(&basis.members()[k / n] * x * &gstar[k % n])))
            .collect();
        blocks.push(CMatrix::from_fn(m, m, |a, b| vs[b].dotc(&vs[a])));
    }
    let digits = |mut idx: usize| {
        let mut d = vec![0; r];
        for slot in d.iter_mut().rev() {
            *slot = idx % n;
            idx /= n;
        }
        d
    };
    let labels: Vec<Vec<usize>> = (0..rows).map(digits).collect();
    Ok(CMatrix::from_fn(rows, rows, |a, b| {
        let (i, j) = (&labels[a], &labels[b]);
        (0..r)
            .map(|s| {
                let t = (s + 1) % r;
                blocks[s][(i[s] * n + i[t], j[s] * n + j[t])]
            })
            .product()
    }))
}

fn normalized_power_traces(g: &CMatrix, p_max: usize) -> Result<Vec<f64>> {
    let dim = g.nrows() as f64;
    let mut out = Vec::with_capacity(p_max);
    let mut power = g.clone();
    for p in 1..=p_max {
        if p > 1 {
            power = &power * g;
        }
        out.push(real_part(power.trace() / dim, "tr(G^p)")?);
    }
    Ok(out)
}

/// Moments of `μ^r` as the normalized-trace law of the random Gram matrix.
pub fn gram_model_moments(
    basis: &OrthonormalUnitaryBasis,
    r: usize,
    p_max: usize,
    num_samples: u64,
    seed: u64,
) -> Result<MomentSeries> {
    if r == 0 {
        return invalid_input("r must be at least 1");
    }
    checked_pow(basis.len(), r, 1 << 12, "Gram matrix rows")?;
    let stats = scalar_moments(p_max, num_samples, seed, |rng| {
        let xs = (0..r)
            .map(|_| basis.sample_unitary(rng))
            .collect::<Result<Vec<_>>>()?;
        normalized_power_traces(&build_gram_matrix(basis, &xs)?, p_max)
    })?;
    let mut series = MomentSeries::empty(basis.len(), num_samples, seed);
    for (p, s) in stats.iter().enumerate() {
        series.push(p + 1, r, s.mean(), s.stderr());
    }
    Ok(series)
}

/// `Λ_{k_1c_1…k_rc_r} = |Tr(W_{k_1c_1} x_1 ⋯ W_{k_rc_r} x_r)|²`, labels in
/// lexicographic order over `(H × H)^r`.
pub fn weyl_lambda_diagonal(h: &FiniteAbelianGroup, xs: &[CMatrix]) -> Result<Vec<f64>> {
    let r = xs.len();
    if r == 0 {
        return invalid_input("at least one unitary is required");
    }
    let n = h.size();
    if xs.iter().any(|x| x.nrows() != n || x.ncols() != n) {
        return Err(Error::InvalidDimension(
            "unitaries must be |H| x |H|".into(),
        ));
    }
    let m = n * n;
    let total = checked_pow(m, r, MAX_ROWS, "Weyl diagonal length")?;
    let weyl = weyl_basis(h);
    let wx: Vec<Vec<CMatrix>> = xs
        .iter()
        .map(|x| weyl.members().iter().map(|w| w * x).collect())
        .collect();
    let mut out = Vec::with_capacity(total);
    let mut prefix: Vec<CMatrix> = vec![CMatrix::identity(n, n); r];
    let mut idx = vec![0usize; r];
    let mut from = 0;
    loop {
        for s in from..r.saturating_sub(1) {
            prefix[s + 1] = if s == 0 {
                wx[0][idx[0]].clone()
            } else {
                &prefix[s] * &wx[s][idx[s]]
            };
        }
        let last = &wx[r - 1][idx[r - 1]];
        let tr = if r == 1 {
            last.trace()
        } else {
            trace_of_product(&prefix[r - 1], last)
        };
        out.push(tr.norm_sqr());
        let mut k = r;
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = 0;
        }
        from = k;
    }
}

/// Moments of `μ^r` through the diagonal Weyl form.
pub fn weyl_lambda_moments(
    h: &FiniteAbelianGroup,
    r: usize,
    p_max: usize,
    num_samples: u64,
    seed: u64,
) -> Result<MomentSeries> {
    if r == 0 {
        return invalid_input("r must be at least 1");
    }
    let n = h.size();
    checked_pow(n * n, r, MAX_ROWS, "Weyl diagonal length")?;
    let stats = scalar_moments(p_max, num_samples, seed, |rng| {
        let xs = (0..r)
            .map(|_| haar_unitary(n, rng))
            .collect::<Result<Vec<_>>>()?;
        let lambda = weyl_lambda_diagonal(h, &xs)?;
        let len = lambda.len() as f64;
        let mut sums = vec![0.0; p_max];
        for l in lambda {
            let mut v = 1.0;
            for s in sums.iter_mut() {
                v *= l;
                *s += v;
            }
        }
        Ok(sums.into_iter().map(|s| s / len).collect())
    })?;
    let mut series = MomentSeries::empty(n * n, num_samples, seed);
    for (p, s) in stats.iter().enumerate() {
        series.push(p + 1, r, s.mean(), s.stderr());
    }
    Ok(series)
}

/// `E[(|Tr x|²)^p]` over Haar `U_n`; rows carry `r = 0`.
pub fn char_square_moments(
    n: usize,
    p_max: usize,
    num_samples: u64,
    seed: u64,
) -> Result<MomentSeries> {
    let stats = scalar_moments(p_max, num_samples, seed, |rng| {
        let t = haar_unitary(n, rng)?.trace().norm_sqr();
        Ok((1..=p_max as i32).map(|p| t.powi(p)).collect())
    })?;
    let mut series = MomentSeries::empty(n * n, num_samples, seed);
    for (p, s) in stats.iter().enumerate() {
        series.push(p + 1, 0, s.mean(), s.stderr());
    }
    Ok(series)
}

fn longest_increasing(seq: &[usize]) -> usize {
    let mut tails: Vec<usize> = Vec::new();
    for &x in seq {
        match tails.binary_search(&x) {
            Ok(_) => {}
            Err(pos) if pos == tails.len() => tails.push(x),
            Err(pos) => tails[pos] = x,
        }
    }
    tails.len()
}

/// Number of `σ ∈ S_p` with no increasing subsequence longer than `n`.
pub fn lis_moment(n: usize, p: usize) -> Result<u64> {
    if p > 10 {
        return Err(Error::ResourceLimit(format!(
            "lis_moment enumerates S_p; p = {p} > 10"
        )));
    }
    Ok((0..p)
        .permutations(p)
        .filter(|s| longest_increasing(s) <= n)
        .count() as u64)
}

/// `C_p = binom(2p, p) / (p + 1)`.
pub fn catalan(p: usize) -> Result<u64> {
    if p > 30 {
        return Err(Error::ResourceLimit(format!(
            "catalan({p}) is outside the supported range"
        )));
    }
    let mut c: u128 = 1;
    for k in 0..p as u128 {
        c = c * 2 * (2 * k + 1) / (k + 2);
    }
    Ok(c as u64)
}

/// Set partition of `{0, …, p−1}` as a restricted growth string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SetPartition {
    labels: Vec<usize>,
}

impl SetPartition {
    /// Canonicalizes arbitrary block labels.
    pub fn new(labels: &[usize]) -> Self {
        let mut map: Vec<(usize, usize)> = Vec::new();
        let labels = labels
            .iter()
            .map(|l| match map.iter().find(|(k, _)| k == l) {
                Some(&(_, v)) => v,
                None => {
                    map.push((*l, map.len()));
                    map.len() - 1
                }
            })
            .collect();
        Self { labels }
    }

    pub fn singletons(p: usize) -> Self {
        Self {
            labels: (0..p).collect(),
        }
    }

    pub fn one_block(p: usize) -> Self {
        Self { labels: vec![0; p] }
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_blocks(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn is_noncrossing(&self) -> bool {
        let l = &self.labels;
        let p = l.len();
        for a in 0..p {
            for b in a + 1..p {
                for c in b + 1..p {
                    for d in c + 1..p {
                        if l[a] == l[c] && l[b] == l[d] && l[a] != l[b] {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// All noncrossing partitions of `{0, …, p−1}` (`p ≤ 8`).
    pub fn noncrossing(p: usize) -> Result<Vec<Self>> {
        if p > 8 {
            return Err(Error::ResourceLimit(format!(
                "noncrossing enumeration limited to p <= 8, got {p}"
            )));
        }
        let mut out = Vec::new();
        let mut labels = vec![0usize; p];
        fn rec(k: usize, max: usize, labels: &mut Vec<usize>, out: &mut Vec<SetPartition>) {
            if k == labels.len() {
                let part = SetPartition {
                    labels: labels.clone(),
                };
                if part.is_noncrossing() {
                    out.push(part);
                }
                return;
            }
            for v in 0..=max + 1 {
                labels[k] = v;
                rec(k + 1, max.max(v), labels, out);
            }
        }
        if p == 0 {
            return Ok(vec![SetPartition { labels }]);
        }
        rec(1, 0, &mut labels, &mut out);
        Ok(out)
    }
}

/// `ξ_π = Σ e_{i_1} ⊗ … ⊗ e_{i_p}` over multi-indices constant on the blocks
/// of `π`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionVector {
    pub partition: SetPartition,
    pub n: usize,
    pub vector: CVector,
}

pub fn xi_partition(pi: &SetPartition, n: usize) -> Result<PartitionVector> {
    let p = pi.size();
    let len = checked_pow(n, p, MAX_ROWS, "partition vector length")?;
    let labels = pi.labels();
    let vector = CVector::from_fn(len, |mut idx, _| {
        let mut digits = vec![0; p];
        for d in digits.iter_mut().rev() {
            *d = idx % n;
            idx /= n;
        }
        let ok =
            (0..p).all(|a| (a + 1..p).all(|b| labels[a] != labels[b] || digits[a] == digits[b]));
        if ok {
            ONE
        } else {
            ZERO
        }
    });
    Ok(PartitionVector {
        partition: pi.clone(),
        n,
        vector,
    })
}

/// `F_p(x) = N^{-(p+2)} Σ_{i_1…i_p} |Σ_j <x_{i_1 j}, x_{i_2 j}> ⋯ <x_{i_p j}, x_{i_1 j}>|²`.
pub fn f_p(xi: &VectorGrid, p: usize) -> Result<f64> {
    if p < 2 {
        return invalid_input("F_p needs p >= 2");
    }
    let n = xi.n();
    checked_pow(n, p, MAX_ROWS, "F_p index tuples")?;
    // column Gram matrices: colg[j][a][b] = <x_{aj}, x_{bj}>
    let colg: Vec<Vec<C64>> = (0..n)
        .map(|j| {
            let mut g = vec![ZERO; n * n];
            for a in 0..n {
                for b in 0..n {
                    g[a * n + b] = xi.cell(b, j).dotc(xi.cell(a, j));
                }
            }
            g
        })
        .collect();
    let mut idx = vec![0usize; p];
    let mut total = 0.0;
    loop {
        let mut s = ZERO;
        for g in &colg {
            let mut prod = ONE;
            for t in 0..p {
                prod *= g[idx[t] * n + idx[(t + 1) % p]];
            }
            s += prod;
        }
        total += s.norm_sqr();
        let mut k = p;
        loop {
            if k == 0 {
                return Ok(total / (n as f64).powi(p as i32 + 2));
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Residuals of the transfer-matrix eigenvector identities.
///
/// With `ξ_|` the all-ones vector and `ξ_⊓` the diagonal indicator:
/// orthogonal columns `{x_ij}_i` give `T*ξ_| = ξ_|` and `Tξ_⊓ = ξ_⊓`;
/// orthogonal rows `{x_ij}_j` give `Tξ_| = ξ_|` and `T*ξ_⊓ = ξ_⊓`; either
/// gives `<Tξ_|, ξ_|> = N^p`; and `<Tξ_⊓, ξ_⊓> = N` always.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenvectorReport {
    pub n: usize,
    pub p: usize,
    pub rows_orthonormal: bool,
    pub cols_orthonormal: bool,
    /// `(‖T*ξ_| − ξ_|‖, ‖Tξ_⊓ − ξ_⊓‖)` when columns are orthonormal.
    pub column_identities: Option<(f64, f64)>,
    /// `(‖Tξ_| − ξ_|‖, ‖T*ξ_⊓ − ξ_⊓‖)` when rows are orthonormal.
    pub row_identities: Option<(f64, f64)>,
    /// `|<Tξ_|, ξ_|> − N^p| / N^p` when rows or columns are orthonormal.
    pub all_ones_pairing: Option<f64>,
    /// `|<Tξ_⊓, ξ_⊓> − N|`, unconditionally.
    pub one_block_pairing: f64,
}

pub fn eigenvector_checks(
    xi: &VectorGrid,
    p: usize,
    hypothesis_tol: f64,
) -> Result<EigenvectorReport> {
    let t = t_matrix(xi, p)?;
    let n = xi.n();
    let ones = xi_partition(&SetPartition::singletons(p), n)?.vector;
    let diag = xi_partition(&SetPartition::one_block(p), n)?.vector;
    let tm = &t.entries;
    let ta = tm.adjoint();
    let rows_ok = xi.rows_orthonormal(hypothesis_tol);
    let cols_ok = xi.cols_orthonormal(hypothesis_tol);
    let res = |m: &CMatrix, v: &CVector| (m * v - v).norm();
    let np = (n as f64).powi(p as i32);
    let pairing = |v: &CVector| (tm * v).dotc(v).conj();
    Ok(EigenvectorReport {
        n,
        p,
        rows_orthonormal: rows_ok,
        cols_orthonormal: cols_ok,
        column_identities: cols_ok.then(|| (res(&ta, &ones), res(tm, &diag))),
        row_identities: rows_ok.then(|| (res(tm, &ones), res(&ta, &diag))),
        all_ones_pairing: (rows_ok || cols_ok)
            .then(|| (pairing(&ones) - C64::new(np, 0.0)).norm() / np),
        one_block_pairing: (pairing(&diag) - C64::new(n as f64, 0.0)).norm(),
    })
}
