//! Randomized evidence harnesses.
//!
//! Each harness draws independent trials from per-trial streams
//! `rng::stream(seed, t)`, evaluates a margin that a conjectured inequality
//! says is nonnegative, and reports counts, the worst margin and replayable
//! instances of every violation. Nothing here panics or fails on a violation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{invalid_input, Result};
use crate::linalg::{
    haar_unitary, max_abs, numerical_rank, pinv_sqrt_with, CMatrix, PinvConfig, Projection, C64,
    ZERO,
};
use crate::magic::VectorGrid;
use crate::moments::{f_p, t_matrix, xi_partition, GridSampler, SetPartition};
use crate::rng::{stream, substream, StreamRng};
use crate::sinkhorn::{flatten, phi_map, vol, KnSampler, UnitaryTuple, VOL_SLACK};

/// Slack of the projection inequality.
pub const PROJECTION_SLACK: f64 = 1e-10;
/// Slack of the volume and `F_p` monotonicity margins.
pub const MONOTONE_SLACK: f64 = 1e-12;
/// Eigenvalue cutoff for rank certification and Moore–Penrose roots.
pub const RANK_CUTOFF: f64 = 1e-8;
/// Tolerance on idempotency and hermiticity of primed projections.
pub const PRIMED_TOL: f64 = 1e-8;
/// Regeneration attempts for a quadruple failing its constraints.
pub const GENERATION_ATTEMPTS: usize = 10;
/// Iteration cap of flatten trajectories in the volume harness.
pub const TRAJECTORY_ITERS: usize = 10_000;
pub const TRAJECTORY_TOL: f64 = 1e-10;

/// Which constraints the quadruple generator enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadrupleMode {
    /// All six constraints; ranks are `(p, q, q, p)`.
    Literal,
    /// `S = 0` with only the orthogonality and intersection constraints.
    SZeroRelaxed,
}

impl QuadrupleMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Literal => "literal",
            Self::SZeroRelaxed => "s-zero-relaxed",
        }
    }
}

/// Dimension and ranks of a quadruple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadrupleSpec {
    pub k: usize,
    pub rank_p: usize,
    pub rank_q: usize,
    pub rank_r: usize,
    pub rank_s: usize,
    pub mode: QuadrupleMode,
}

impl QuadrupleSpec {
    /// Literal constraints force `rank R = rank Q` and `rank S = rank P`;
    /// `force_s_zero` therefore also forces `P = 0`.
    pub fn literal(k: usize, rank_p: usize, rank_q: usize, force_s_zero: bool) -> Result<Self> {
        let rank_p = if force_s_zero { 0 } else { rank_p };
        Self {
            k,
            rank_p,
            rank_q,
            rank_r: rank_q,
            rank_s: rank_p,
            mode: QuadrupleMode::Literal,
        }
        .validated()
    }

    pub fn s_zero_relaxed(k: usize, rank_p: usize, rank_q: usize, rank_r: usize) -> Result<Self> {
        Self {
            k,
            rank_p,
            rank_q,
            rank_r,
            rank_s: 0,
            mode: QuadrupleMode::SZeroRelaxed,
        }
        .validated()
    }

    fn validated(self) -> Result<Self> {
        let Self {
            k,
            rank_p,
            rank_q,
            rank_r,
            rank_s,
            ..
        } = self;
        if k == 0 {
            return invalid_input("dimension K must be positive");
        }
        if rank_p + rank_q > k || rank_r + rank_s > k {
            return invalid_input(format!("orthogonal pairs need rank sums <= K = {k}"));
        }
        if rank_p + rank_r > k || rank_q + rank_s > k {
            return invalid_input(format!(
                "trivial range intersections need rank sums <= K = {k}"
            ));
        }
        Ok(self)
    }
}

/// Projections `P ⊥ Q`, `R ⊥ S` with `Im P ∩ Im R = Im Q ∩ Im S = {0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionQuadruple {
    pub spec: QuadrupleSpec,
    pub p: Projection,
    pub q: Projection,
    pub r: Projection,
    pub s: Projection,
}

/// Certified ranks and constraint residuals of a quadruple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub ranks: [usize; 4],
    pub pq: f64,
    pub rs: f64,
    /// `rank(P + R)`, which equals `rank [P R]`.
    pub rank_p_plus_r: usize,
    pub rank_q_plus_s: usize,
    pub satisfied: bool,
}

fn block_projection(u: &CMatrix, start: usize, len: usize) -> Projection {
    let k = u.nrows();
    let cols = u.columns(start, len);
    let m = if len == 0 {
        CMatrix::zeros(k, k)
    } else {
        let ca = cols.adjoint();
        cols * ca
    };
    Projection::from_matrix_unchecked((&m + m.adjoint()).scale(0.5))
}

impl ProjectionQuadruple {
    pub fn constraints(&self) -> ConstraintReport {
        let rank = |m: &CMatrix| numerical_rank(m, RANK_CUTOFF);
        let (p, q, r, s) = (
            self.p.matrix(),
            self.q.matrix(),
            self.r.matrix(),
            self.s.matrix(),
        );
        let ranks = [rank(p), rank(q), rank(r), rank(s)];
        let pq = max_abs(&(p * q));
        let rs = max_abs(&(r * s));
        let rank_p_plus_r = rank(&(p + r));
        let rank_q_plus_s = rank(&(q + s));
        let spec = &self.spec;
        let mut satisfied = ranks == [spec.rank_p, spec.rank_q, spec.rank_r, spec.rank_s]
            && pq <= 1e-10
            && rs <= 1e-10
            && rank_p_plus_r == ranks[0] + ranks[2]
            && rank_q_plus_s == ranks[1] + ranks[3];
        if spec.mode == QuadrupleMode::Literal {
            satisfied &= ranks[0] + ranks[1] == ranks[2] + ranks[3]
                && ranks[0] + ranks[2] == ranks[1] + ranks[3];
        }
        ConstraintReport {
            ranks,
            pq,
            rs,
            rank_p_plus_r,
            rank_q_plus_s,
            satisfied,
        }
    }
}

/// Coordinate blocks conjugated by one Haar unitary for `(P, Q)` and an
/// independent one for `(R, S)`; regenerates on constraint failure.
pub fn gen_quadruple(spec: &QuadrupleSpec, rng: &mut StreamRng) -> Result<ProjectionQuadruple> {
    let spec = spec.validated()?;
    for _ in 0..GENERATION_ATTEMPTS {
        let u = haar_unitary(spec.k, rng)?;
        let v = haar_unitary(spec.k, rng)?;
        let quad = ProjectionQuadruple {
            spec,
            p: block_projection(&u, 0, spec.rank_p),
            q: block_projection(&u, spec.rank_p, spec.rank_q),
            r: block_projection(&v, 0, spec.rank_r),
            s: block_projection(&v, spec.rank_r, spec.rank_s),
        };
        if quad.constraints().satisfied {
            return Ok(quad);
        }
    }
    Err(crate::Error::SamplingFailure(format!(
        "no quadruple met the constraints in {GENERATION_ATTEMPTS} attempts"
    )))
}

/// `(P', Q', R', S')` with `(P+R)^{-1/2}` and `(Q+S)^{-1/2}` Moore–Penrose.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimedQuadruple {
    pub p: CMatrix,
    pub q: CMatrix,
    pub r: CMatrix,
    pub s: CMatrix,
    /// Largest of `‖X² − X‖` and `‖X − X*‖` (max entry) over the four.
    pub projection_defect: f64,
}

impl PrimedQuadruple {
    pub fn is_valid(&self) -> bool {
        self.projection_defect <= PRIMED_TOL
    }

    /// Applies `X ← 3X² − 2X³` to each matrix.
    fn purified(&self) -> Self {
        let step = |x: &CMatrix| {
            let x2 = x * x;
            let y = &x2 * C64::new(3.0, 0.0) - &x2 * x * C64::new(2.0, 0.0);
            (&y + y.adjoint()).scale(0.5)
        };
        let (p, q, r, s) = (step(&self.p), step(&self.q), step(&self.r), step(&self.s));
        let projection_defect = [&p, &q, &r, &s]
            .into_iter()
            .map(projection_defect)
            .fold(0.0, f64::max);
        Self {
            p,
            q,
            r,
            s,
            projection_defect,
        }
    }
}

fn projection_defect(x: &CMatrix) -> f64 {
    max_abs(&(x * x - x)).max(max_abs(&(x - x.adjoint())))
}

pub fn primed_quadruple(quad: &ProjectionQuadruple) -> Result<PrimedQuadruple> {
    let cfg = PinvConfig::with_eps(RANK_CUTOFF / (2.0 * quad.spec.k as f64));
    let pr = pinv_sqrt_with(&(quad.p.matrix() + quad.r.matrix()), &cfg)?;
    let qs = pinv_sqrt_with(&(quad.q.matrix() + quad.s.matrix()), &cfg)?;
    let conj = |root: &CMatrix, x: &Projection| {
        let m = root * x.matrix() * root;
        (&m + m.adjoint()).scale(0.5)
    };
    let (p, q, r, s) = (
        conj(&pr, &quad.p),
        conj(&qs, &quad.q),
        conj(&pr, &quad.r),
        conj(&qs, &quad.s),
    );
    let projection_defect = [&p, &q, &r, &s]
        .into_iter()
        .map(projection_defect)
        .fold(0.0, f64::max);
    Ok(PrimedQuadruple {
        p,
        q,
        r,
        s,
        projection_defect,
    })
}

fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let mut s = ZERO;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s.re
}

/// `Tr(PR) + Tr(QS) − Tr(P'Q') − Tr(R'S')`.
pub fn inequality_margin(quad: &ProjectionQuadruple, primed: &PrimedQuadruple) -> f64 {
    trace_product(quad.p.matrix(), quad.r.matrix())
        + trace_product(quad.q.matrix(), quad.s.matrix())
        - trace_product(&primed.p, &primed.q)
        - trace_product(&primed.r, &primed.s)
}

fn matrix_json(m: &CMatrix) -> Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect();
    json!(rows)
}

/// A violating trial with enough data to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    /// Trial index `t`; the trial draws from `rng::stream(seed, t)`.
    pub trial: u64,
    pub margin: f64,
    pub data: Value,
}

/// Evidence summary of one harness run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub conjecture: String,
    pub params: Value,
    pub trials: u64,
    pub violations: u64,
    /// Trials skipped because an intermediate object failed validation.
    pub rejected: u64,
    /// Smallest margin observed (`+∞` if no trial was evaluated).
    pub worst_margin: f64,
    /// Margins in `(−10·slack, −slack)` that were re-evaluated.
    pub reevaluated: u64,
    pub seed: u64,
    pub instances: Vec<Instance>,
    /// Harness-specific extra measurements.
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub extra: Value,
}

impl TrialReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Outcome of one trial.
enum Trial {
    Rejected,
    Margin {
        margin: f64,
        reevaluated: bool,
        data: Option<Value>,
    },
}

fn run_trials<F>(
    trials: u64,
    seed: u64,
    slack: f64,
    trial: F,
) -> Result<(u64, u64, f64, u64, Vec<Instance>)>
where
    F: Fn(u64, &mut StreamRng) -> Result<Trial> + Sync,
{
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| trial(t, &mut stream(seed, t)))
        .collect::<Result<Vec<_>>>()?;
    let mut violations = 0;
    let mut rejected = 0;
    let mut reevaluated = 0;
    let mut worst = f64::INFINITY;
    let mut instances = Vec::new();
    for (t, o) in outcomes.into_iter().enumerate() {
        match o {
            Trial::Rejected => rejected += 1,
            Trial::Margin {
                margin,
                reevaluated: re,
                data,
            } => {
                worst = worst.min(margin);
                reevaluated += u64::from(re);
                if margin < -slack {
                    violations += 1;
                    instances.push(Instance {
                        trial: t as u64,
                        margin,
                        data: data.unwrap_or(Value::Null),
                    });
                }
            }
        }
    }
    Ok((violations, rejected, worst, reevaluated, instances))
}

fn in_reevaluation_band(margin: f64, slack: f64) -> bool {
    margin < -slack && margin > -10.0 * slack
}

/// `Tr(PR) + Tr(QS) ≥ Tr(P'Q') + Tr(R'S')` on random quadruples.
pub fn test_inequality_66(trials: u64, spec: &QuadrupleSpec, seed: u64) -> Result<TrialReport> {
    let spec = spec.validated()?;
    let (violations, rejected, worst, reevaluated, instances) =
        run_trials(trials, seed, PROJECTION_SLACK, |_, rng| {
            let quad = gen_quadruple(&spec, rng)?;
            let primed = primed_quadruple(&quad)?;
            if !primed.is_valid() {
                return Ok(Trial::Rejected);
            }
            let mut margin = inequality_margin(&quad, &primed);
            let mut re = false;
            if in_reevaluation_band(margin, PROJECTION_SLACK) {
                re = true;
                let mut refined = primed.clone();
                for _ in 0..3 {
                    refined = refined.purified();
                }
                margin = inequality_margin(&quad, &refined);
            }
            let data = (margin < -PROJECTION_SLACK).then(|| {
                json!({
                    "P": matrix_json(quad.p.matrix()),
                    "Q": matrix_json(quad.q.matrix()),
                    "R": matrix_json(quad.r.matrix()),
                    "S": matrix_json(quad.s.matrix()),
                })
            });
            Ok(Trial::Margin {
                margin,
                reevaluated: re,
                data,
            })
        })?;
    Ok(TrialReport {
        conjecture: "projection-inequality".into(),
        params: json!({
            "K": spec.k,
            "ranks": [spec.rank_p, spec.rank_q, spec.rank_r, spec.rank_s],
            "mode": spec.mode.name(),
            "slack": PROJECTION_SLACK,
        }),
        trials,
        violations,
        rejected,
        worst_margin: worst,
        reevaluated,
        seed,
        instances,
        extra: Value::Null,
    })
}

/// `|det|` of the column matrices through QR, an independent route for
/// re-evaluating borderline volume margins.
fn vol_qr(grid: &VectorGrid) -> f64 {
    let n = grid.n();
    (0..n)
        .map(|j| {
            let m = crate::linalg::matrix_from_rows(&grid.col(j));
            let r = m.qr().r();
            (0..n).map(|k| r[(k, k)].norm()).product::<f64>()
        })
        .product()
}

/// One `Φ` step does not decrease `vol`; full trajectories are also scanned.
pub fn test_volume_monotone(n: usize, trials: u64, seed: u64) -> Result<TrialReport> {
    if n < 2 {
        return invalid_input("N must be at least 2");
    }
    let results = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(f64, bool, usize, f64, bool)> {
            let mut rng = stream(seed, t);
            let x = UnitaryTuple::haar(n, &mut rng)?;
            let before = x.grid();
            let after = phi_map(&x)?.grid();
            let mut margin = vol(&after) - vol(&before);
            let mut re = false;
            if in_reevaluation_band(margin, MONOTONE_SLACK) {
                re = true;
                margin = vol_qr(&after) - vol_qr(&before);
            }
            let out = flatten(&x, TRAJECTORY_ITERS, TRAJECTORY_TOL)?;
            Ok((
                margin,
                re,
                out.trace.vol_violations(),
                out.trace.worst_vol_step(),
                out.converged,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut violations = 0;
    let mut reevaluated = 0;
    let mut worst = f64::INFINITY;
    let mut instances = Vec::new();
    let mut trajectory_violations = 0usize;
    let mut trajectories_with_violations = 0u64;
    let mut worst_step = 0.0f64;
    let mut converged = 0u64;
    for (t, (margin, re, tv, ws, conv)) in results.into_iter().enumerate() {
        worst = worst.min(margin);
        reevaluated += u64::from(re);
        if margin < -MONOTONE_SLACK {
            violations += 1;
            instances.push(Instance {
                trial: t as u64,
                margin,
                data: json!({ "N": n }),
            });
        }
        trajectory_violations += tv;
        trajectories_with_violations += u64::from(tv > 0);
        worst_step = worst_step.min(ws);
        converged += u64::from(conv);
    }
    Ok(TrialReport {
        conjecture: "volume-monotone".into(),
        params: json!({ "N": n, "slack": MONOTONE_SLACK, "trajectory_iters": TRAJECTORY_ITERS, "trajectory_tol": TRAJECTORY_TOL }),
        trials,
        violations,
        rejected: 0,
        worst_margin: worst,
        reevaluated,
        seed,
        instances,
        extra: json!({
            "trajectory_step_violations": trajectory_violations,
            "trajectories_with_violations": trajectories_with_violations,
            "worst_trajectory_step": worst_step,
            "trajectories_converged": converged,
            "vol_slack": VOL_SLACK,
        }),
    })
}

/// `F_p` through `‖T_p ξ_⊓‖² / N^p`, independent of [`f_p`].
fn f_p_via_transfer(grid: &VectorGrid, p: usize) -> Result<f64> {
    let t = t_matrix(grid, p)?;
    let v = xi_partition(&SetPartition::one_block(p), grid.n())?.vector;
    Ok((&t.entries * v).norm_squared() / (grid.n() as f64).powi(p as i32))
}

/// Values of `F_p` at sampled magic bases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagicFpCheck {
    pub points: u64,
    pub min: f64,
    pub max: f64,
    /// `max |F_p − 1|` over the points.
    pub max_deviation_from_one: f64,
}

/// `F_p` at `points` push-forward samples of `K_N`.
pub fn f_p_on_magic_samples(n: usize, p: usize, points: u64, seed: u64) -> Result<MagicFpCheck> {
    let sampler = KnSampler::new(n)?;
    let values = (0..points)
        .into_par_iter()
        .map(|k| f_p(&sampler.sample(&mut substream(seed, 1, k))?, p))
        .collect::<Result<Vec<_>>>()?;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(MagicFpCheck {
        points,
        min,
        max,
        max_deviation_from_one: values.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max),
    })
}

/// `F_p(x) ≥ F_p(Φ²(x))` for Haar `x ∈ U_N^N`, plus `F_p` on sampled magic
/// bases (`magic_points` of them).
pub fn test_fp_monotone(
    n: usize,
    p: usize,
    trials: u64,
    seed: u64,
    magic_points: u64,
) -> Result<TrialReport> {
    if p < 2 {
        return invalid_input("p must be at least 2");
    }
    if n < 2 {
        return invalid_input("N must be at least 2");
    }
    let (violations, rejected, worst, reevaluated, instances) =
        run_trials(trials, seed, MONOTONE_SLACK, |_, rng| {
            let x = UnitaryTuple::haar(n, rng)?;
            let y = phi_map(&phi_map(&x)?)?;
            let (gx, gy) = (x.grid(), y.grid());
            let mut margin = f_p(&gx, p)? - f_p(&gy, p)?;
            let mut re = false;
            if in_reevaluation_band(margin, MONOTONE_SLACK) {
                re = true;
                margin = margin.max(f_p_via_transfer(&gx, p)? - f_p_via_transfer(&gy, p)?);
            }
            Ok(Trial::Margin {
                margin,
                reevaluated: re,
                data: Some(json!({ "N": n, "p": p })),
            })
        })?;
    let magic = f_p_on_magic_samples(n, p, magic_points, seed)?;
    Ok(TrialReport {
        conjecture: "fp-monotone".into(),
        params: json!({ "N": n, "p": p, "slack": MONOTONE_SLACK, "magic_points": magic_points }),
        trials,
        violations,
        rejected,
        worst_margin: worst,
        reevaluated,
        seed,
        instances,
        extra: json!({ "f_p_on_magic_bases": magic }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{weyl_basis, FiniteAbelianGroup};
    use crate::magic::fully_split_grid;
    use proptest::prelude::*;

    fn diag_projection(k: usize, ones: &[usize]) -> Projection {
        let m = CMatrix::from_fn(k, k, |i, j| {
            if i == j && ones.contains(&i) {
                C64::new(1.0, 0.0)
            } else {
                ZERO
            }
        });
        Projection::new(m, 1e-12).unwrap()
    }

    fn quad_from(
        k: usize,
        p: &[usize],
        q: &[usize],
        r: &[usize],
        s: &[usize],
        mode: QuadrupleMode,
    ) -> ProjectionQuadruple {
        ProjectionQuadruple {
            spec: QuadrupleSpec {
                k,
                rank_p: p.len(),
                rank_q: q.len(),
                rank_r: r.len(),
                rank_s: s.len(),
                mode,
            },
            p: diag_projection(k, p),
            q: diag_projection(k, q),
            r: diag_projection(k, r),
            s: diag_projection(k, s),
        }
    }

    #[test]
    fn coordinate_blocks_are_orthogonal() {
        let q = quad_from(4, &[0], &[1], &[2], &[3], QuadrupleMode::Literal);
        assert_eq!(max_abs(&(q.p.matrix() * q.q.matrix())), 0.0);
        assert!(q.constraints().satisfied);
    }

    #[test]
    fn generated_quadruples_meet_constraints() {
        let spec = QuadrupleSpec::literal(4, 1, 1, false).unwrap();
        for t in 0..20 {
            let quad = gen_quadruple(&spec, &mut stream(5, t)).unwrap();
            let c = quad.constraints();
            assert!(c.satisfied);
            assert_eq!(c.ranks, [1, 1, 1, 1]);
            assert_eq!(c.rank_p_plus_r, 2);
        }
        let relaxed = QuadrupleSpec::s_zero_relaxed(6, 2, 2, 3).unwrap();
        let quad = gen_quadruple(&relaxed, &mut stream(6, 0)).unwrap();
        assert_eq!(quad.constraints().ranks, [2, 2, 3, 0]);
    }

    #[test]
    fn literal_s_zero_forces_p_zero() {
        let spec = QuadrupleSpec::literal(5, 2, 2, true).unwrap();
        assert_eq!((spec.rank_p, spec.rank_s, spec.rank_r), (0, 0, 2));
        assert!(QuadrupleSpec::literal(3, 2, 2, false).is_err());
        assert!(QuadrupleSpec::s_zero_relaxed(4, 2, 1, 3).is_err());
    }

    #[test]
    fn constraint_failures_are_detected() {
        // P = R violates the trivial intersection of ranges
        let q = quad_from(4, &[0], &[1], &[0], &[3], QuadrupleMode::SZeroRelaxed);
        assert!(!q.constraints().satisfied);
    }

    #[test]
    fn primed_with_zero_r_returns_p() {
        let spec = QuadrupleSpec::s_zero_relaxed(5, 2, 1, 0).unwrap();
        let quad = gen_quadruple(&spec, &mut stream(7, 0)).unwrap();
        let primed = primed_quadruple(&quad).unwrap();
        assert!(max_abs(&(&primed.p - quad.p.matrix())) < 1e-10);
        assert!(max_abs(&(&primed.q - quad.q.matrix())) < 1e-10);
        assert!(primed.is_valid());
    }

    #[test]
    fn primed_with_orthogonal_p_r_is_unchanged() {
        let quad = quad_from(4, &[0], &[1], &[2], &[3], QuadrupleMode::Literal);
        let primed = primed_quadruple(&quad).unwrap();
        assert!(max_abs(&(&primed.p - quad.p.matrix())) < 1e-12);
        assert!(max_abs(&(&primed.r - quad.r.matrix())) < 1e-12);
    }

    #[test]
    fn primed_sum_is_range_projection() {
        let spec = QuadrupleSpec::s_zero_relaxed(6, 2, 1, 3).unwrap();
        for t in 0..10 {
            let quad = gen_quadruple(&spec, &mut stream(8, t)).unwrap();
            let primed = primed_quadruple(&quad).unwrap();
            let range = crate::linalg::range_projection(
                &(quad.p.matrix() + quad.r.matrix()),
                &PinvConfig::with_eps(1e-10),
            )
            .unwrap();
            assert!(max_abs(&(&primed.p + &primed.r - range)) < 1e-8);
            assert!(primed.is_valid());
        }
    }

    #[test]
    fn margin_vanishes_when_r_and_s_are_zero() {
        let spec = QuadrupleSpec::s_zero_relaxed(5, 2, 2, 0).unwrap();
        let quad = gen_quadruple(&spec, &mut stream(9, 0)).unwrap();
        let m = inequality_margin(&quad, &primed_quadruple(&quad).unwrap());
        assert!(m.abs() < 1e-12);
    }

    #[test]
    fn s_zero_relaxed_has_no_violations() {
        for k in [3, 5, 8] {
            let spec = QuadrupleSpec::s_zero_relaxed(k, 1, 1, k / 2).unwrap();
            let rep = test_inequality_66(100, &spec, 11).unwrap();
            assert_eq!(rep.violations, 0, "{}", rep.to_json().unwrap());
            assert_eq!(rep.trials, 100);
        }
    }

    #[test]
    fn reports_are_seed_deterministic() {
        let spec = QuadrupleSpec::literal(4, 1, 1, false).unwrap();
        let a = test_inequality_66(30, &spec, 2).unwrap();
        let b = test_inequality_66(30, &spec, 2).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn volume_harness_small_run() {
        let rep = test_volume_monotone(2, 50, 3).unwrap();
        assert_eq!(rep.violations, 0);
        assert_eq!(rep.extra["trajectories_converged"], 50);
    }

    #[test]
    fn vol_routes_agree() {
        let g = UnitaryTuple::haar(4, &mut stream(12, 0)).unwrap().grid();
        assert!((vol(&g) - vol_qr(&g)).abs() < 1e-13);
    }

    #[test]
    fn fp_margin_is_zero_on_magic_bases() {
        let x = haar_unitary(2, &mut stream(13, 0)).unwrap();
        let g =
            fully_split_grid(&weyl_basis(&FiniteAbelianGroup::parse("Z2").unwrap()), &x).unwrap();
        let t = UnitaryTuple::from_grid(&g, 1e-10).unwrap();
        let y = phi_map(&phi_map(&t).unwrap()).unwrap().grid();
        for p in 2..=3 {
            assert!((f_p(&g, p).unwrap() - f_p(&y, p).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn fp_harness_small_run() {
        let rep = test_fp_monotone(2, 2, 40, 4, 3).unwrap();
        assert_eq!(rep.trials, 40);
        let magic: MagicFpCheck =
            serde_json::from_value(rep.extra["f_p_on_magic_bases"].clone()).unwrap();
        // magic bases give N^{1-p}
        assert!((magic.max - 0.5).abs() < 1e-8 && (magic.min - 0.5).abs() < 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn primed_projections_are_projections(seed in any::<u64>(), k in 2usize..7) {
            let spec = QuadrupleSpec::literal(k, 1, (k - 1).min(2), false).unwrap();
            let quad = gen_quadruple(&spec, &mut stream(seed, 0)).unwrap();
            prop_assert!(quad.constraints().satisfied);
            prop_assert!(primed_quadruple(&quad).unwrap().is_valid());
        }

        #[test]
        fn relaxed_margin_is_nonnegative(seed in any::<u64>(), k in 2usize..9) {
            let spec = QuadrupleSpec::s_zero_relaxed(k, 1, k - 1, (k - 1).min(3)).unwrap();
            let quad = gen_quadruple(&spec, &mut stream(seed, 1)).unwrap();
            prop_assert!(inequality_margin(&quad, &primed_quadruple(&quad).unwrap()) >= -PROJECTION_SLACK);
        }
    }
}
