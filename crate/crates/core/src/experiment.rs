//! Multi-trial experiments, CSV export and robustness series.

use std::io::Write;
use std::thread;

use serde::Serialize;
use thiserror::Error;

use crate::scenario::{ConfigError, ScenarioConfig};
use crate::sim::{format_log, run, SimError, SimOutcome};
use crate::strategy::StrategyKind;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("at least one trial is required")]
    NoTrials,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("trial {trial}: {source}")]
    Sim {
        trial: usize,
        #[source]
        source: SimError,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mean and sample standard deviation; `None` for an empty slice.
/// A single value has zero spread.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub outcome: SimOutcome,
}

impl TrialResult {
    pub fn row(&self, env: &str) -> TrialRow {
        let m = &self.outcome.metrics;
        let ci = mean_std(&m.comm_intervals);
        let ig = mean_std(&m.idle_gaps);
        TrialRow {
            strategy: self.outcome.strategy,
            env: env.to_string(),
            trial: self.trial,
            finished: m.finished_tasks,
            comm_num: m.comm_count,
            comm_int_mean: ci.map(|v| v.0),
            comm_int_std: ci.map(|v| v.1),
            idle_gap_mean: ig.map(|v| v.0),
            idle_gap_std: ig.map(|v| v.1),
        }
    }
}

/// One CSV row per trial. Missing statistics are written as empty fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    pub strategy: StrategyKind,
    pub env: String,
    pub trial: usize,
    pub finished: usize,
    pub comm_num: usize,
    pub comm_int_mean: Option<f64>,
    pub comm_int_std: Option<f64>,
    pub idle_gap_mean: Option<f64>,
    pub idle_gap_std: Option<f64>,
}

/// Across-trial mean ± std of the per-trial figures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub strategy: StrategyKind,
    pub env: String,
    pub trials: usize,
    pub finished_mean: f64,
    pub finished_std: f64,
    pub comm_num_mean: f64,
    pub comm_num_std: f64,
    pub comm_int_mean: Option<f64>,
    pub comm_int_std: Option<f64>,
    pub idle_gap_mean: Option<f64>,
    pub idle_gap_std: Option<f64>,
}

/// Builds the summary from trial rows alone, so it can be recomputed from a
/// saved CSV. Interval and idle figures average the trials that have them.
pub fn summarize(rows: &[TrialRow]) -> Option<SummaryRow> {
    let first = rows.first()?;
    let col = |f: fn(&TrialRow) -> Option<f64>| {
        let v: Vec<f64> = rows.iter().filter_map(f).collect();
        mean_std(&v)
    };
    let finished = col(|r| Some(r.finished as f64))?;
    let comm = col(|r| Some(r.comm_num as f64))?;
    let ci = col(|r| r.comm_int_mean);
    let ig = col(|r| r.idle_gap_mean);
    Some(SummaryRow {
        strategy: first.strategy,
        env: first.env.clone(),
        trials: rows.len(),
        finished_mean: finished.0,
        finished_std: finished.1,
        comm_num_mean: comm.0,
        comm_num_std: comm.1,
        comm_int_mean: ci.map(|v| v.0),
        comm_int_std: ci.map(|v| v.1),
        idle_gap_mean: ig.map(|v| v.0),
        idle_gap_std: ig.map(|v| v.1),
    })
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub env: String,
    pub strategy: StrategyKind,
    pub horizon: f64,
    pub trials: Vec<TrialResult>,
}

/// Runs `trials` seeded copies of the scenario in parallel. Trial `k` uses
/// seed `config.seed + k`, which also reseeds any task generator.
pub fn run_experiment(config: &ScenarioConfig, trials: usize) -> Result<Experiment, ExperimentError> {
    if trials == 0 {
        return Err(ExperimentError::NoTrials);
    }
    config.validate()?;
    let results: Vec<Result<TrialResult, ExperimentError>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..trials)
            .map(|trial| {
                scope.spawn(move || {
                    let seed = config.seed.wrapping_add(trial as u64);
                    let setup = config.to_setup(seed)?;
                    let outcome = run(&setup).map_err(|source| ExperimentError::Sim { trial, source })?;
                    Ok(TrialResult { trial, seed, outcome })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("trial thread panicked"))
            .collect()
    });
    Ok(Experiment {
        env: config.env.clone(),
        strategy: config.strategy.kind,
        horizon: config.horizon,
        trials: results.into_iter().collect::<Result<_, _>>()?,
    })
}

impl Experiment {
    pub fn rows(&self) -> Vec<TrialRow> {
        self.trials.iter().map(|t| t.row(&self.env)).collect()
    }

    pub fn summary(&self) -> SummaryRow {
        summarize(&self.rows()).expect("an experiment has at least one trial")
    }

    pub fn has_violations(&self) -> bool {
        self.trials.iter().any(|t| !t.outcome.violations.is_empty())
    }

    /// Event log of one trial, one event per line.
    pub fn log(&self, trial: usize) -> String {
        format_log(&self.trials[trial].outcome.log)
    }

    pub fn robustness(&self, params: &RobustnessParams) -> Vec<RobustnessRow> {
        let completions: Vec<Vec<f64>> = self
            .trials
            .iter()
            .map(|t| t.outcome.metrics.completion_times.values().copied().collect())
            .collect();
        robustness_series(self.strategy, &completions, self.horizon, params)
    }
}

/// Writes rows with a header through a single CSV writer.
pub fn write_csv<T: Serialize>(rows: &[T], out: impl Write) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessParams {
    /// Spacing of the series, seconds.
    pub step: f64,
    /// Length of the sliding window for the completion slope, seconds.
    pub window: f64,
}

impl Default for RobustnessParams {
    fn default() -> Self {
        Self {
            step: 10.0,
            window: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessRow {
    pub strategy: StrategyKind,
    pub time: f64,
    /// Mean completed-task count across trials at `time`.
    pub completed_mean: f64,
    /// Across-trial variance of the completed-task count at `time`.
    pub completed_variance: f64,
    /// Mean over trials of the least-squares slope of the completion curve
    /// on `[time - window, time]`, tasks per second.
    pub slope: f64,
}

fn completed_by(times: &[f64], t: f64) -> f64 {
    times.iter().filter(|&&c| c <= t).count() as f64
}

/// Least-squares slope of the completion count sampled once per second over
/// the window ending at `end`.
pub fn window_slope(times: &[f64], end: f64, window: f64) -> f64 {
    let start = (end - window).max(0.0);
    let samples = (end - start).floor() as usize;
    if samples == 0 {
        return 0.0;
    }
    let pts: Vec<(f64, f64)> = (0..=samples)
        .map(|k| {
            let t = start + k as f64;
            (t, completed_by(times, t))
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Per-step variance and windowed slope of the completion curves of
/// several trials.
pub fn robustness_series(
    strategy: StrategyKind,
    completions: &[Vec<f64>],
    horizon: f64,
    params: &RobustnessParams,
) -> Vec<RobustnessRow> {
    let steps = (horizon / params.step).floor() as usize;
    (1..=steps)
        .map(|k| {
            let time = k as f64 * params.step;
            let counts: Vec<f64> = completions.iter().map(|c| completed_by(c, time)).collect();
            let (mean, std) = mean_std(&counts).unwrap_or((0.0, 0.0));
            let slopes: Vec<f64> = completions
                .iter()
                .map(|c| window_slope(c, time, params.window))
                .collect();
            RobustnessRow {
                strategy,
                time,
                completed_mean: mean,
                completed_variance: std * std,
                slope: mean_std(&slopes).map_or(0.0, |v| v.0),
            }
        })
        .collect()
}
