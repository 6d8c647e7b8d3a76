use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::curve::fmt_float;
use super::plot::{moving_average, SMOOTHING_WINDOW};
use super::{emit_plot, train, HarnessError, LearningCurve, NoveltyMode, RunConfig, RunOutput};

/// Aggregated evaluation at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub step: u64,
    pub mean_eecl: f64,
    pub halfstd_eecl: f64,
    pub mean_base: f64,
    pub halfstd_base: f64,
}

/// Per-seed result of the paired comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub final_eecl: f64,
    pub final_base: f64,
    pub eecl_wins: bool,
    pub novel_eecl: u64,
    /// Counted by a detector that observes the baseline without paying.
    pub novel_base: u64,
    pub convergence_eecl: u64,
    pub convergence_base: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub median_final_return: f64,
    pub mean_final_return: f64,
    pub total_novel_states: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub env: String,
    pub rows: Vec<ComparisonRow>,
    /// Sorted by seed.
    pub seeds: Vec<SeedOutcome>,
    pub eecl: ArmSummary,
    pub baseline: ArmSummary,
    pub eecl_wins: usize,
    /// Seeds where EECL reached its convergence threshold no later than the
    /// baseline.
    pub eecl_converges_no_later: usize,
}

const COMPARISON_HEADER: [&str; 5] = [
    "step",
    "mean_eecl",
    "halfstd_eecl",
    "mean_base",
    "halfstd_base",
];

/// First evaluation step at which the smoothed curve has covered 90% of the
/// way from its smoothed start to its smoothed final value. Works for either
/// sign of returns and either direction of change.
pub fn convergence_step(curve: &LearningCurve) -> u64 {
    let steps = curve.steps();
    let smooth = moving_average(&curve.returns(), SMOOTHING_WINDOW);
    let (Some(&first), Some(&last)) = (smooth.first(), smooth.last()) else {
        return 0;
    };
    let threshold = first + 0.9 * (last - first);
    let reached = |v: f64| {
        if last >= first {
            v >= threshold
        } else {
            v <= threshold
        }
    };
    smooth
        .iter()
        .position(|&v| reached(v))
        .map_or(steps[steps.len() - 1], |i| steps[i])
}

fn mean_halfstd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 0.5 * var.sqrt())
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Aggregates `(seed, eecl curve, baseline curve)` triples. The result does
/// not depend on the order of `runs`.
pub fn aggregate(
    env: &str,
    runs: &[(u64, LearningCurve, LearningCurve)],
) -> Result<ComparisonReport, HarnessError> {
    let mut runs: Vec<&(u64, LearningCurve, LearningCurve)> = runs.iter().collect();
    runs.sort_by_key(|r| r.0);
    let Some(first) = runs.first() else {
        return Err(HarnessError::OutOfRange {
            field: "seeds".into(),
            message: "must list at least one seed".into(),
        });
    };
    let steps = first.1.steps();
    if runs
        .iter()
        .any(|r| r.1.steps() != steps || r.2.steps() != steps)
    {
        return Err(HarnessError::MisalignedCurves);
    }

    let rows = (0..steps.len())
        .map(|i| {
            let e: Vec<f64> = runs
                .iter()
                .map(|r| r.1.records[i].mean_eval_return)
                .collect();
            let b: Vec<f64> = runs
                .iter()
                .map(|r| r.2.records[i].mean_eval_return)
                .collect();
            let (mean_eecl, halfstd_eecl) = mean_halfstd(&e);
            let (mean_base, halfstd_base) = mean_halfstd(&b);
            ComparisonRow {
                step: steps[i],
                mean_eecl,
                halfstd_eecl,
                mean_base,
                halfstd_base,
            }
        })
        .collect();

    let seeds: Vec<SeedOutcome> = runs
        .iter()
        .map(|(seed, e, b)| {
            let fe = e.last().expect("curves are non-empty");
            let fb = b.last().expect("curves are non-empty");
            let convergence_eecl = convergence_step(e);
            let convergence_base = convergence_step(b);
            SeedOutcome {
                seed: *seed,
                final_eecl: fe.mean_eval_return,
                final_base: fb.mean_eval_return,
                eecl_wins: fe.mean_eval_return > fb.mean_eval_return,
                novel_eecl: fe.novel_state_count,
                novel_base: fb.novel_state_count,
                convergence_eecl,
                convergence_base,
            }
        })
        .collect();

    let arm = |finals: Vec<f64>, novel: u64| ArmSummary {
        median_final_return: median(&finals),
        mean_final_return: finals.iter().sum::<f64>() / finals.len() as f64,
        total_novel_states: novel,
    };
    let eecl = arm(
        seeds.iter().map(|s| s.final_eecl).collect(),
        seeds.iter().map(|s| s.novel_eecl).sum(),
    );
    let baseline = arm(
        seeds.iter().map(|s| s.final_base).collect(),
        seeds.iter().map(|s| s.novel_base).sum(),
    );
    Ok(ComparisonReport {
        env: env.to_string(),
        rows,
        eecl_wins: seeds.iter().filter(|s| s.eecl_wins).count(),
        eecl_converges_no_later: seeds
            .iter()
            .filter(|s| s.convergence_eecl <= s.convergence_base)
            .count(),
        seeds,
        eecl,
        baseline,
    })
}

impl ComparisonReport {
    pub fn to_csv_string(&self) -> String {
        let mut out = csv::Writer::from_writer(Vec::new());
        out.write_record(COMPARISON_HEADER)
            .expect("in-memory write");
        for r in &self.rows {
            out.write_record([
                r.step.to_string(),
                fmt_float(r.mean_eecl),
                fmt_float(r.halfstd_eecl),
                fmt_float(r.mean_base),
                fmt_float(r.halfstd_base),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(out.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
    }

    /// Writes `comparison.csv`, `summary.json` and `comparison.svg`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let csv = dir.join("comparison.csv");
        std::fs::write(&csv, self.to_csv_string()).map_err(|e| HarnessError::io(&csv, e))?;
        let json = dir.join("summary.json");
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(&json, text + "\n").map_err(|e| HarnessError::io(&json, e))?;
        emit_plot(&csv, &dir.join("comparison.svg"))
    }
}

/// Runs `jobs` on up to `available_parallelism` scoped threads and returns
/// results in job order.
fn run_parallel<T: Send>(
    jobs: &[(u64, NoveltyMode)],
    f: impl Fn(u64, NoveltyMode) -> Result<T, HarnessError> + Sync,
) -> Result<Vec<T>, HarnessError> {
    let workers = std::thread::available_parallelism()
        .map_or(1, usize::from)
        .min(jobs.len())
        .max(1);
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<T, HarnessError>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(seed, mode)) = jobs.get(i) else {
                    break;
                };
                let r = f(seed, mode);
                *slots[i].lock().expect("no poisoned slots") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .expect("no poisoned slots")
                .expect("every job ran")
        })
        .collect()
}

/// Paired EECL-vs-baseline runs for every configured seed. Both arms of a
/// seed share network initialisation, environment draws and the warmup action
/// stream; the baseline is watched by a detector that pays nothing. Writes
/// per-run CSVs and checkpoints plus the aggregate files into `out_dir`.
pub fn run_comparison(config: &RunConfig) -> Result<ComparisonReport, HarnessError> {
    if config.eecl.is_none() {
        return Err(HarnessError::MissingNovelty);
    }
    config.validate()?;
    let jobs: Vec<(u64, NoveltyMode)> = config
        .seeds
        .iter()
        .flat_map(|&s| [(s, NoveltyMode::Reward), (s, NoveltyMode::Observe)])
        .collect();
    let outputs: Vec<RunOutput> = run_parallel(&jobs, |seed, mode| train(config, seed, mode))?;

    let mut triples = Vec::with_capacity(config.seeds.len());
    for pair in outputs.chunks(2) {
        let (e, b) = (&pair[0], &pair[1]);
        e.write(&config.out_dir, &format!("eecl_seed{}", e.seed))?;
        b.write(&config.out_dir, &format!("baseline_seed{}", b.seed))?;
        triples.push((e.seed, e.curve.clone(), b.curve.clone()));
    }
    let report = aggregate(&config.env, &triples)?;
    report.write(&config.out_dir)?;
    Ok(report)
}
