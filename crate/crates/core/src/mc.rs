//! Deterministic Monte Carlo reduction.
//!
//! Sample `k` always draws from `rng::stream(seed, k)`, and per-sample
//! statistics are merged along a binary tree whose shape depends only on the
//! sample count. Results are therefore identical for any rayon pool size.

use crate::error::Result;
use crate::linalg::{C64, ZERO};

/// Samples per sequential leaf of the reduction tree.
pub const LEAF: u64 = 32;

/// Reduces `leaf(lo, hi)` results over `[lo, hi)` along a fixed binary tree.
pub fn tree_reduce<T, L, M>(lo: u64, hi: u64, leaf: &L, merge: &M) -> Result<T>
where
    T: Send,
    L: Fn(u64, u64) -> Result<T> + Sync,
    M: Fn(T, T) -> T + Sync,
{
    if hi - lo <= LEAF {
        return leaf(lo, hi);
    }
    let mid = lo + (hi - lo) / 2;
    let (a, b) = rayon::join(
        || tree_reduce(lo, mid, leaf, merge),
        || tree_reduce(mid, hi, leaf, merge),
    );
    Ok(merge(a?, b?))
}

/// Contiguous batch boundaries `[start, end)` splitting `0..total`.
pub fn batch_ranges(total: u64, batches: u64) -> Vec<(u64, u64)> {
    let b = batches.clamp(1, total.max(1));
    (0..b)
        .map(|k| (k * total / b, (k + 1) * total / b))
        .collect()
}

/// Mean and variance of a real statistic (Welford, merged with Chan's rule).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(self, other: Self) -> Self {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        Self {
            count: self.count + other.count,
            mean: self.mean + delta * other.count as f64 / n,
            m2: self.m2 + other.m2 + delta * delta * self.count as f64 * other.count as f64 / n,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

/// Entrywise running mean and variance of complex arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayStats {
    count: u64,
    mean: Vec<C64>,
    m2: Vec<f64>,
}

impl ArrayStats {
    pub fn new(len: usize) -> Self {
        Self {
            count: 0,
            mean: vec![ZERO; len],
            m2: vec![0.0; len],
        }
    }

    pub fn push(&mut self, x: &[C64]) {
        self.count += 1;
        let w = 1.0 / self.count as f64;
        for ((m, s), &z) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = z - *m;
            *m += delta * w;
            *s += (delta.conj() * (z - *m)).re;
        }
    }

    /// Stats of `count` samples from sums of `x − shift` and of `|x − shift|²`
    /// (shifting by one of the samples keeps the variance accurate).
    pub fn from_shifted_sums(count: u64, shift: &[C64], sum: &[C64], sum_sq: &[f64]) -> Self {
        if count == 0 {
            return Self::new(shift.len());
        }
        let n = count as f64;
        let mean = shift.iter().zip(sum).map(|(&c, &s)| c + s / n).collect();
        let m2 = sum
            .iter()
            .zip(sum_sq)
            .map(|(s, &q)| (q - s.norm_sqr() / n).max(0.0))
            .collect();
        Self { count, mean, m2 }
    }

    pub fn merge(mut self, other: Self) -> Self {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for k in 0..self.mean.len() {
            let delta = other.mean[k] - self.mean[k];
            self.mean[k] += delta * (nb / n);
            self.m2[k] += other.m2[k] + delta.norm_sqr() * na * nb / n;
        }
        self.count += other.count;
        self
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[C64] {
        &self.mean
    }

    /// Entrywise standard error of the mean (complex modulus scale).
    pub fn stderr(&self) -> Vec<f64> {
        let n = self.count as f64;
        self.m2
            .iter()
            .map(|&s| {
                if self.count < 2 {
                    0.0
                } else {
                    (s / (n - 1.0) / n).sqrt()
                }
            })
            .collect()
    }
}

/// Jackknife over batches of a statistic `theta` of the pooled mean.
///
/// Returns `(bias-corrected estimate, standard error)`. `means` are batch
/// means with their sample counts.
pub fn jackknife<T, F>(means: &[(u64, Vec<T>)], theta: F) -> Result<(f64, f64)>
where
    T: Copy
        + std::ops::Mul<f64, Output = T>
        + std::ops::Add<Output = T>
        + std::ops::Sub<Output = T>,
    F: Fn(&[T]) -> Result<f64>,
{
    let total: u64 = means.iter().map(|(c, _)| c).sum();
    let len = means[0].1.len();
    let pooled: Vec<T> = (0..len)
        .map(|k| {
            let mut acc = means[0].1[k] * (means[0].0 as f64 / total as f64);
            for (c, m) in &means[1..] {
                acc = acc + m[k] * (*c as f64 / total as f64);
            }
            acc
        })
        .collect();
    let full = theta(&pooled)?;
    let b = means.len();
    if b < 2 {
        return Ok((full, f64::NAN));
    }
    let mut loo = Vec::with_capacity(b);
    for (c, m) in means {
        let rest = (total - c) as f64;
        let w = total as f64 / rest;
        let v = *c as f64 / rest;
        let left: Vec<T> = pooled.iter().zip(m).map(|(&p, &x)| p * w - x * v).collect();
        loo.push(theta(&left)?);
    }
    let bf = b as f64;
    let avg = loo.iter().sum::<f64>() / bf;
    let var = loo.iter().map(|t| (t - avg).powi(2)).sum::<f64>() * (bf - 1.0) / bf;
    Ok((bf * full - (bf - 1.0) * avg, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn running_stats_matches_two_pass() {
        let xs: Vec<f64> = (0..100)
            .map(|k| ((k * 37) % 11) as f64 * 0.5 - 1.0)
            .collect();
        let mut s = RunningStats::default();
        xs.iter().for_each(|&x| s.push(x));
        let mean = xs.iter().sum::<f64>() / 100.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 99.0;
        assert!((s.mean() - mean).abs() < 1e-14);
        assert!((s.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn constant_arrays_have_zero_error() {
        let mut a = ArrayStats::new(3);
        for _ in 0..1000 {
            a.push(&[C64::new(0.25, 0.0); 3]);
        }
        assert!(a.stderr().iter().all(|&e| e == 0.0));
        assert!(a.mean().iter().all(|&m| m == C64::new(0.25, 0.0)));
    }

    #[test]
    fn shifted_sums_match_push() {
        let xs: Vec<[C64; 2]> = (0..32)
            .map(|k| {
                [
                    C64::new(k as f64 * 0.1, 1.0 - k as f64 * 0.03),
                    C64::new((k % 5) as f64, 0.5),
                ]
            })
            .collect();
        let mut a = ArrayStats::new(2);
        let mut sum = [ZERO; 2];
        let mut sq = [0.0; 2];
        for x in &xs {
            a.push(x);
            for k in 0..2 {
                sum[k] += x[k];
                sq[k] += x[k].norm_sqr();
            }
        }
        let b = ArrayStats::from_shifted_sums(32, &[ZERO; 2], &sum, &sq);
        for k in 0..2 {
            assert!((a.mean()[k] - b.mean()[k]).norm() < 1e-14);
            assert!((a.stderr()[k] - b.stderr()[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn tree_reduce_is_shape_fixed() {
        let leaf = |lo: u64, hi: u64| Ok((lo..hi).map(|k| 1.0 / (k as f64 + 1.0)).sum::<f64>());
        let merge = |a: f64, b: f64| a + b;
        let a = tree_reduce(0, 10_000, &leaf, &merge).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let b = pool.install(|| tree_reduce(0, 10_000, &leaf, &merge).unwrap());
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn jackknife_of_linear_statistic_is_unbiased_mean() {
        let means: Vec<(u64, Vec<f64>)> = (0..10).map(|b| (5, vec![b as f64])).collect();
        let (est, se) = jackknife(&means, |m| Ok(m[0])).unwrap();
        assert!((est - 4.5).abs() < 1e-12);
        // standard error of the mean of batch means 0..9
        let expected = (82.5f64 / 9.0 / 10.0).sqrt();
        assert!((se - expected).abs() < 1e-12);
    }

    #[test]
    fn batch_ranges_cover() {
        let r = batch_ranges(103, 20);
        assert_eq!(r.len(), 20);
        assert_eq!(r[0].0, 0);
        assert_eq!(r[19].1, 103);
        assert!(r.windows(2).all(|w| w[0].1 == w[1].0));
        assert_eq!(batch_ranges(3, 20).len(), 3);
    }

    proptest! {
        #[test]
        fn merge_equals_sequential(xs in proptest::collection::vec(-10.0f64..10.0, 2..60), split in 0usize..60) {
            let k = split.min(xs.len());
            let mut all = RunningStats::default();
            let mut a = RunningStats::default();
            let mut b = RunningStats::default();
            for (i, &x) in xs.iter().enumerate() {
                all.push(x);
                if i < k { a.push(x) } else { b.push(x) }
            }
            let m = a.merge(b);
            prop_assert!((m.mean() - all.mean()).abs() < 1e-10);
            prop_assert!((m.variance() - all.variance()).abs() < 1e-9);
        }
    }
}
