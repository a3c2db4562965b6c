use std::collections::BTreeMap;
use std::fmt::Write;

use flatmagic::conjectures::{test_fp_monotone, test_inequality_66, test_volume_monotone};
use flatmagic::groups::{weyl_basis, FiniteAbelianGroup};
use flatmagic::moments::{
    catalan, char_square_moments, gram_model_moments, lis_moment, transfer_moments,
    weyl_lambda_moments, FullySplitSampler,
};
use flatmagic::rng::stream;
use flatmagic::sinkhorn::{
    extract_latin_square, flatten_with, universal_moments, FlattenOptions, FlattenRecord,
    TraceLevel, UnitaryTuple, VOL_SLACK,
};
use flatmagic::{Error, MomentSeries, QuadrupleSpec, Result, TrialReport, VERSION};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{
    Command, ConjecturesArgs, Format, Mode, Pipeline, SinkhornArgs, Trace, UniversalArgs,
    WeylMomentsArgs, Which,
};

/// A finished run: the report body and a human-readable summary.
pub struct Output {
    pub report: String,
    pub summary: String,
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, D: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a C,
    data: D,
}

fn json_report<C: Serialize, D: Serialize>(
    command: &'static str,
    config: &C,
    data: D,
) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Envelope {
        tool: "flatmagic",
        version: VERSION,
        command,
        config,
        data,
    })?;
    s.push('\n');
    Ok(s)
}

/// First CSV line: `# flatmagic <version> <command> <config json>`.
fn csv_preamble<C: Serialize>(command: &str, config: &C) -> Result<String> {
    Ok(format!(
        "# flatmagic {VERSION} {command} {}\n",
        serde_json::to_string(config)?
    ))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:e}"))
}

pub fn run(cmd: &Command) -> Result<Output> {
    match cmd {
        Command::WeylMoments(a) => weyl_moments(a),
        Command::Sinkhorn(a) => sinkhorn(a),
        Command::Universal(a) => universal(a),
        Command::Conjectures(a) => conjectures(a),
    }
}

#[derive(Serialize)]
struct Reference {
    p: Vec<usize>,
    lis: Vec<Option<u64>>,
    catalan: Vec<Option<u64>>,
}

#[derive(Serialize)]
struct WeylData {
    group: String,
    n: usize,
    reference: Reference,
    series: BTreeMap<&'static str, MomentSeries>,
}

fn weyl_moments(a: &WeylMomentsArgs) -> Result<Output> {
    let h = FiniteAbelianGroup::parse(&a.group)?;
    let n = h.size();
    if a.p_max == 0 {
        return Err(Error::InvalidInput("--pmax must be at least 1".into()));
    }
    if a.r == 0 {
        return Err(Error::InvalidInput("--r must be at least 1".into()));
    }
    let ps: Vec<usize> = (1..=a.p_max).collect();
    let lis: Vec<Option<u64>> = ps.iter().map(|&p| lis_moment(n, p).ok()).collect();
    let reference = Reference {
        catalan: ps.iter().map(|&p| catalan(p).ok()).collect(),
        lis: lis.clone(),
        p: ps,
    };
    let wanted = |p: Pipeline| a.pipeline == p || a.pipeline == Pipeline::All;
    let with_lis =
        |s: MomentSeries| s.with_reference(|p| lis[p - 1].map_or(f64::NAN, |v| v as f64));
    let mut series = BTreeMap::new();
    if wanted(Pipeline::Weyl) {
        series.insert(
            "weyl",
            with_lis(weyl_lambda_moments(
                &h,
                a.r,
                a.p_max,
                a.samples,
                a.common.seed,
            )?),
        );
    }
    if wanted(Pipeline::Gram) {
        let basis = weyl_basis(&h);
        series.insert(
            "gram",
            with_lis(gram_model_moments(
                &basis,
                a.r,
                a.p_max,
                a.samples,
                a.common.seed,
            )?),
        );
    }
    if wanted(Pipeline::Transfer) {
        let sampler = FullySplitSampler {
            basis: weyl_basis(&h),
        };
        let full = transfer_moments(&sampler, a.p_max, a.r, a.samples, a.common.seed)?;
        series.insert("transfer", with_lis(only_r(&full, a.r)));
    }
    if wanted(Pipeline::Direct) {
        series.insert(
            "direct",
            with_lis(char_square_moments(n, a.p_max, a.samples, a.common.seed)?),
        );
    }

    let mut summary = format!(
        "weyl-moments {} (n = {n}, r = {}, {} samples)\n",
        h.name(),
        a.r,
        a.samples
    );
    for (name, s) in &series {
        for k in 0..s.len() {
            let _ = writeln!(
                summary,
                "  {name:<8} p={} estimate={:.6} se={:.2e} lis={}",
                s.p[k],
                s.estimate[k],
                s.stderr[k],
                lis[s.p[k] - 1].map_or("-".into(), |v| v.to_string())
            );
        }
    }

    let report = match a.common.format {
        Format::Json => json_report(
            "weyl-moments",
            a,
            WeylData {
                group: h.name(),
                n,
                reference,
                series,
            },
        )?,
        Format::Csv => {
            let mut s = csv_preamble("weyl-moments", a)?;
            s.push_str("pipeline,N,p,r,samples,estimate,stderr,seed,lis,catalan\n");
            for (name, m) in &series {
                for k in 0..m.len() {
                    let p = m.p[k];
                    let _ = writeln!(
                        s,
                        "{name},{},{p},{},{},{:e},{:e},{},{},{}",
                        m.n,
                        m.r[k],
                        m.samples,
                        m.estimate[k],
                        m.stderr[k],
                        m.seed,
                        fmt_opt(lis[p - 1].map(|v| v as f64)),
                        fmt_opt(catalan(p).ok().map(|v| v as f64)),
                    );
                }
            }
            s
        }
    };
    Ok(Output { report, summary })
}

fn only_r(s: &MomentSeries, r: usize) -> MomentSeries {
    let keep: Vec<usize> = (0..s.len()).filter(|&k| s.r[k] == r).collect();
    MomentSeries {
        n: s.n,
        p: keep.iter().map(|&k| s.p[k]).collect(),
        r: keep.iter().map(|&k| s.r[k]).collect(),
        samples: s.samples,
        estimate: keep.iter().map(|&k| s.estimate[k]).collect(),
        stderr: keep.iter().map(|&k| s.stderr[k]).collect(),
        seed: s.seed,
        reference: None,
    }
}

#[derive(Serialize)]
struct Run {
    trial: u64,
    converged: bool,
    stalled: bool,
    iterations: usize,
    final_residual: f64,
    vol_initial: Option<f64>,
    vol_final: Option<f64>,
    vol_violations: usize,
    worst_vol_step: f64,
    degenerate_events: usize,
    latin_square: Option<Vec<Vec<usize>>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    trace: Vec<FlattenRecord>,
}

#[derive(Serialize)]
struct LatinCount {
    square: Vec<Vec<usize>>,
    count: u64,
}

#[derive(Serialize)]
struct SinkhornSummary {
    trials: u64,
    converged: u64,
    stalled: u64,
    iterations_min: Option<usize>,
    iterations_median: Option<usize>,
    iterations_max: Option<usize>,
    vol_violations: usize,
    runs_with_vol_violations: u64,
    degenerate_events: usize,
    latin_squares: Vec<LatinCount>,
}

#[derive(Serialize)]
struct SinkhornData<'a> {
    summary: &'a SinkhornSummary,
    runs: &'a [Run],
}

fn sinkhorn(a: &SinkhornArgs) -> Result<Output> {
    if a.n == 0 {
        return Err(Error::InvalidInput("--N must be at least 1".into()));
    }
    let opts = FlattenOptions {
        max_iters: a.max_iters,
        tol: a.tol,
        trace: match a.trace {
            Trace::Off => TraceLevel::Off,
            Trace::Full => TraceLevel::Full,
            Trace::F3 => TraceLevel::WithF3,
        },
    };
    let runs = (0..a.trials)
        .into_par_iter()
        .map(|t| {
            let x0 = UnitaryTuple::haar(a.n, &mut stream(a.common.seed, t))?;
            let out = flatten_with(&x0, &opts)?;
            // limits that are not cleanly Latin are reported without a square
            let latin_square = if out.converged {
                extract_latin_square(&out.grid())
                    .ok()
                    .map(|(l, _)| l.rows().to_vec())
            } else {
                None
            };
            Ok(Run {
                trial: t,
                converged: out.converged,
                stalled: out.stalled,
                iterations: out.iterations,
                final_residual: out.final_residual,
                vol_initial: out.trace.records.first().map(|r| r.vol),
                vol_final: out.trace.records.last().map(|r| r.vol),
                vol_violations: out.trace.vol_violations(),
                worst_vol_step: out.trace.worst_vol_step(),
                degenerate_events: out.trace.degenerate_events(),
                latin_square,
                trace: out.trace.records,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut iters: Vec<usize> = runs
        .iter()
        .filter(|r| r.converged)
        .map(|r| r.iterations)
        .collect();
    iters.sort_unstable();
    let mut squares: BTreeMap<Vec<Vec<usize>>, u64> = BTreeMap::new();
    for sq in runs.iter().filter_map(|r| r.latin_square.clone()) {
        *squares.entry(sq).or_default() += 1;
    }
    let summary = SinkhornSummary {
        trials: a.trials,
        converged: runs.iter().filter(|r| r.converged).count() as u64,
        stalled: runs.iter().filter(|r| r.stalled).count() as u64,
        iterations_min: iters.first().copied(),
        iterations_median: iters.get(iters.len() / 2).copied(),
        iterations_max: iters.last().copied(),
        vol_violations: runs.iter().map(|r| r.vol_violations).sum(),
        runs_with_vol_violations: runs.iter().filter(|r| r.vol_violations > 0).count() as u64,
        degenerate_events: runs.iter().map(|r| r.degenerate_events).sum(),
        latin_squares: squares
            .into_iter()
            .map(|(square, count)| LatinCount { square, count })
            .collect(),
    };

    let mut text = format!(
        "sinkhorn N={} tol={:e}: {}/{} converged, {} stalled, iterations min/median/max = {}/{}/{}\n",
        a.n,
        a.tol,
        summary.converged,
        summary.trials,
        summary.stalled,
        fmt_count(summary.iterations_min),
        fmt_count(summary.iterations_median),
        fmt_count(summary.iterations_max),
    );
    let _ = writeln!(
        text,
        "  vol decreases: {} in {} runs; degenerate steps: {}; distinct Latin squares: {}",
        summary.vol_violations,
        summary.runs_with_vol_violations,
        summary.degenerate_events,
        summary.latin_squares.len()
    );

    let report = match a.common.format {
        Format::Json => json_report(
            "sinkhorn",
            a,
            SinkhornData {
                summary: &summary,
                runs: &runs,
            },
        )?,
        Format::Csv => {
            let mut s = csv_preamble("sinkhorn", a)?;
            let f3 = a.trace == Trace::F3;
            s.push_str("trial,iteration,residual,vol,F_2");
            if f3 {
                s.push_str(",F_3");
            }
            s.push_str(",vol_violation\n");
            for run in &runs {
                let mut prev: Option<f64> = None;
                for rec in &run.trace {
                    let _ = write!(
                        s,
                        "{},{},{:e},{:e},{:e}",
                        run.trial, rec.iteration, rec.residual, rec.vol, rec.f2
                    );
                    if f3 {
                        let _ = write!(s, ",{}", fmt_opt(rec.f3));
                    }
                    let violated = prev.is_some_and(|v| rec.vol < v - VOL_SLACK);
                    let _ = writeln!(s, ",{}", u8::from(violated));
                    prev = Some(rec.vol);
                }
            }
            s
        }
    };
    Ok(Output {
        report,
        summary: text,
    })
}

fn fmt_count(v: Option<usize>) -> String {
    v.map_or("-".into(), |x| x.to_string())
}

fn universal(a: &UniversalArgs) -> Result<Output> {
    let u = universal_moments(a.n, a.p_max, a.r_max, a.samples, a.common.seed)?;
    let s = &u.series;
    let mut summary = format!(
        "universal N={} ({} samples, {} Haar starts resampled)\n",
        a.n, a.samples, u.resamples
    );
    for k in 0..s.len() {
        let _ = writeln!(
            summary,
            "  p={} r={} c={:.8} se={:.2e} catalan={}",
            s.p[k],
            s.r[k],
            s.estimate[k],
            s.stderr[k],
            s.reference.as_ref().map_or(f64::NAN, |r| r[k])
        );
    }
    let report = match a.common.format {
        Format::Json => json_report("universal", a, &u)?,
        Format::Csv => {
            let mut out = csv_preamble("universal", a)?;
            out.push_str(&s.to_csv());
            out
        }
    };
    Ok(Output { report, summary })
}

fn quadruple_spec(a: &ConjecturesArgs) -> Result<QuadrupleSpec> {
    let third = (a.k / 3).max(1);
    let rank_p = a.rank_p.unwrap_or(third);
    let rank_q = a.rank_q.unwrap_or(third);
    match a.mode {
        Mode::Literal => QuadrupleSpec::literal(a.k, rank_p, rank_q, a.force_s_zero),
        Mode::SZeroRelaxed => {
            let rank_r = a.rank_r.unwrap_or(a.k.saturating_sub(rank_p));
            QuadrupleSpec::s_zero_relaxed(a.k, rank_p, rank_q, rank_r)
        }
    }
}

fn conjectures(a: &ConjecturesArgs) -> Result<Output> {
    let seed = a.common.seed;
    let report: TrialReport = match a.which {
        Which::ProjectionInequality => test_inequality_66(a.trials, &quadruple_spec(a)?, seed)?,
        Which::FpMonotone => test_fp_monotone(a.n, a.p, a.trials, seed, a.magic_points)?,
        Which::VolumeMonotone => test_volume_monotone(a.n, a.trials, seed)?,
    };
    let summary = format!(
        "{} {}: {} trials, {} violations, {} rejected, {} re-evaluated, worst margin {:e}\n",
        report.conjecture,
        report.params,
        report.trials,
        report.violations,
        report.rejected,
        report.reevaluated,
        report.worst_margin
    );
    let body = match a.common.format {
        Format::Json => json_report("conjectures", a, &report)?,
        Format::Csv => {
            let mut s = csv_preamble("conjectures", a)?;
            s.push_str("conjecture,trials,violations,rejected,reevaluated,worst_margin,seed\n");
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:e},{}",
                report.conjecture,
                report.trials,
                report.violations,
                report.rejected,
                report.reevaluated,
                report.worst_margin,
                report.seed
            );
            s
        }
    };
    Ok(Output {
        report: body,
        summary,
    })
}
