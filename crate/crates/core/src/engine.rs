//! Coverage-probability trials and their aggregation.
//!
//! A trial simulates one meta-analytic dataset, pools it, builds a
//! `(1 − α)` interval and records whether the interval contains the true
//! log-ratio of medians `θ = −ln ρ`. A cell runs many trials; a grid runs
//! many cells.
//!
//! Trial `t` of cell `c` always draws from [`trial_stream`]`(seed, c, t)`,
//! and trial records are aggregated in trial order, so a report is a pure
//! function of `(grid, trials, seed)` whatever the worker count.

use serde::{Deserialize, Serialize};

use crate::pooling::{confidence_interval, pool, study_effect, Method};
use crate::rng::{trial_stream, SimRng};
use crate::simulate::{sim_stats, SimConfig};
use crate::{Error, Result, ENGINE_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_index: u32,
    pub covered: bool,
    pub ci_low: f64,
    pub ci_high: f64,
    pub effect_hat: f64,
    pub true_effect: f64,
    pub method_used: Method,
    pub fell_back: bool,
}

impl TrialResult {
    pub fn ci_width(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

/// A trial either completes or errors; errored trials are kept so they
/// can be reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrialRecord {
    Completed(TrialResult),
    Errored { trial_index: u32, reason: String },
}

impl TrialRecord {
    pub fn trial_index(&self) -> u32 {
        match self {
            TrialRecord::Completed(r) => r.trial_index,
            TrialRecord::Errored { trial_index, .. } => *trial_index,
        }
    }
}

/// Aggregate over the trials of one cell.
///
/// Errored trials are excluded from `completed`, so
/// `coverage = successes / completed` with `completed = trials − errors_count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub config_id: u32,
    pub trials: usize,
    pub completed: usize,
    pub successes: usize,
    pub coverage: f64,
    pub mean_ci_width: f64,
    pub fallback_count: usize,
    pub errors_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRun {
    pub config_id: u32,
    pub config: SimConfig,
    pub result: CoverageResult,
    pub records: Vec<TrialRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub engine_version: String,
    pub master_seed: u64,
    pub trials: usize,
    pub single_study: bool,
    pub cells: Vec<CellRun>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineOptions {
    /// Worker threads; 0 uses every available core. Never affects results.
    pub workers: usize,
    /// Per-cell progress lines on standard error.
    pub progress: bool,
    /// Route every cell through [`singletrial`].
    pub single_study: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            workers: 1,
            progress: false,
            single_study: false,
        }
    }
}

fn check_outcome(
    config: &SimConfig,
    trial_index: u32,
    effect_hat: f64,
    ci: (f64, f64),
    method_used: Method,
    fell_back: bool,
) -> TrialResult {
    let true_effect = config.true_effect();
    TrialResult {
        trial_index,
        covered: ci.0 <= true_effect && true_effect <= ci.1,
        ci_low: ci.0,
        ci_high: ci.1,
        effect_hat,
        true_effect,
        method_used,
        fell_back,
    }
}

/// One meta-analysis trial: simulate, pool, build the interval, check it.
pub fn metatrial(config: &SimConfig, trial_index: u32, rng: &mut SimRng) -> Result<TrialResult> {
    let sample = sim_stats(config, rng)?;
    let effects = sample
        .studies
        .iter()
        .map(|s| study_effect(&s.control, &s.intervention, config.estimator))
        .collect::<Result<Vec<_>>>()?;
    let pooled = pool(&effects, config.pooling, config.alpha, config.reml_options())?;
    Ok(check_outcome(
        config,
        trial_index,
        pooled.effect,
        (pooled.ci_low, pooled.ci_high),
        pooled.method_used,
        pooled.fell_back,
    ))
}

/// One single-study trial: `K` is forced to 1 and the interval is built
/// directly from that study's effect and variance.
pub fn singletrial(config: &SimConfig, trial_index: u32, rng: &mut SimRng) -> Result<TrialResult> {
    let single = SimConfig {
        k: 1,
        pooling: crate::pooling::Pooling::Fixed,
        ..config.clone()
    };
    let sample = sim_stats(&single, rng)?;
    let s = &sample.studies[0];
    let effect = study_effect(&s.control, &s.intervention, config.estimator)?;
    let ci = confidence_interval(effect.y, effect.v, config.alpha)?;
    Ok(check_outcome(config, trial_index, effect.y, ci, Method::FE, false))
}

fn run_trial(config: &SimConfig, config_id: u32, trial_index: u32, seed: u64, single: bool) -> TrialRecord {
    let mut rng = trial_stream(seed, config_id, trial_index);
    let outcome = if single {
        singletrial(config, trial_index, &mut rng)
    } else {
        metatrial(config, trial_index, &mut rng)
    };
    match outcome {
        Ok(r) => TrialRecord::Completed(r),
        Err(e) => TrialRecord::Errored {
            trial_index,
            reason: e.to_string(),
        },
    }
}

/// Folds trial records, in order, into a [`CoverageResult`].
pub fn aggregate(config_id: u32, records: &[TrialRecord]) -> Result<CoverageResult> {
    let mut completed = 0usize;
    let mut successes = 0usize;
    let mut fallback_count = 0usize;
    let mut width_sum = 0.0;
    let mut last_error = None;
    for rec in records {
        match rec {
            TrialRecord::Completed(r) => {
                completed += 1;
                successes += r.covered as usize;
                fallback_count += r.fell_back as usize;
                width_sum += r.ci_width();
            }
            TrialRecord::Errored { reason, .. } => last_error = Some(reason),
        }
    }
    if completed == 0 {
        return Err(Error::DegenerateResult {
            config_id,
            trials: records.len(),
            last: last_error.cloned().unwrap_or_else(|| "no trials".to_string()),
        });
    }
    Ok(CoverageResult {
        config_id,
        trials: records.len(),
        completed,
        successes,
        coverage: successes as f64 / completed as f64,
        mean_ci_width: width_sum / completed as f64,
        fallback_count,
        errors_count: records.len() - completed,
    })
}

/// Owns the worker pool shared by every cell of a run.
struct Runner {
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Runner {
    fn new(workers: usize) -> Result<Self> {
        #[cfg(feature = "parallel")]
        {
            let pool = if workers == 1 {
                None
            } else {
                Some(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(workers)
                        .build()
                        .map_err(|e| Error::config("workers", e.to_string()))?,
                )
            };
            Ok(Runner { pool })
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = workers;
            Ok(Runner {})
        }
    }

    fn map<F>(&self, trials: u32, f: F) -> Vec<TrialRecord>
    where
        F: Fn(u32) -> TrialRecord + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| (0..trials).into_par_iter().map(&f).collect());
        }
        (0..trials).map(f).collect()
    }

    fn cell(&self, config: &SimConfig, config_id: u32, trials: usize, seed: u64, single: bool) -> Result<CellRun> {
        config.validate()?;
        let n = u32::try_from(trials)
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::config("trials", format!("must lie in [1, 2^32), got {trials}")))?;
        let records = self.map(n, |t| run_trial(config, config_id, t, seed, single));
        let result = aggregate(config_id, &records)?;
        Ok(CellRun {
            config_id,
            config: config.clone(),
            result,
            records,
        })
    }
}

/// Runs `trials` trials of one cell.
pub fn metasim(
    config: &SimConfig,
    config_id: u32,
    trials: usize,
    master_seed: u64,
    opts: EngineOptions,
) -> Result<CellRun> {
    Runner::new(opts.workers)?.cell(config, config_id, trials, master_seed, opts.single_study)
}

/// Runs every cell of `grid`; cell `i` gets `config_id = i`.
///
/// All cells are validated before any trial runs.
pub fn metasims(grid: &[SimConfig], trials: usize, master_seed: u64, opts: EngineOptions) -> Result<CoverageReport> {
    if grid.is_empty() {
        return Err(Error::config("grid", "must contain at least one cell"));
    }
    if u32::try_from(grid.len()).is_err() {
        return Err(Error::config("grid", "more than 2^32 cells"));
    }
    for cell in grid {
        cell.validate()?;
    }
    let runner = Runner::new(opts.workers)?;
    let mut cells = Vec::with_capacity(grid.len());
    for (i, config) in grid.iter().enumerate() {
        let run = runner.cell(config, i as u32, trials, master_seed, opts.single_study)?;
        if opts.progress {
            eprintln!(
                "[{}/{}] cell {}: coverage {:.4} ({} errored, {} fallbacks)",
                i + 1,
                grid.len(),
                i,
                run.result.coverage,
                run.result.errors_count,
                run.result.fallback_count
            );
        }
        cells.push(run);
    }
    Ok(CoverageReport {
        engine_version: ENGINE_VERSION.to_string(),
        master_seed,
        trials,
        single_study: opts.single_study,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Family;
    use crate::pooling::Pooling;
    use std::f64::consts::LN_2;

    fn five() -> SimConfig {
        SimConfig {
            k: 5,
            ..SimConfig::default()
        }
    }

    #[test]
    fn metatrial_true_effect() {
        let r = metatrial(&five(), 0, &mut trial_stream(1, 0, 0)).unwrap();
        assert_eq!(r.true_effect, 0.0);
        let r = metatrial(&SimConfig { rho: 2.0, ..five() }, 0, &mut trial_stream(1, 0, 0)).unwrap();
        assert!((r.true_effect + LN_2).abs() < 1e-15);
        assert_eq!(r.covered, r.ci_low <= r.true_effect && r.true_effect <= r.ci_high);
    }

    #[test]
    fn metatrial_is_deterministic() {
        let a = metatrial(&five(), 3, &mut trial_stream(9, 1, 3)).unwrap();
        let b = metatrial(&five(), 3, &mut trial_stream(9, 1, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn singletrial_contract() {
        let cfg = SimConfig {
            n_min: 1000,
            n_max: 1000,
            ..five()
        };
        let a = singletrial(&cfg, 0, &mut trial_stream(4, 0, 0)).unwrap();
        assert_eq!(a.method_used, Method::FE);
        assert!(!a.fell_back);
        assert_eq!(a, singletrial(&cfg, 0, &mut trial_stream(4, 0, 0)).unwrap());

        let covered = (0..200)
            .filter(|&t| singletrial(&cfg, t, &mut trial_stream(4, 0, t)).unwrap().covered)
            .count();
        // Nominal 95%; 3σ binomial band for 200 trials is about ±0.046.
        assert!(covered >= 180, "covered {covered}/200");
    }

    #[test]
    fn single_trial_coverage_is_bernoulli() {
        let run = metasim(&five(), 0, 1, 38, EngineOptions::default()).unwrap();
        assert!(run.result.coverage == 0.0 || run.result.coverage == 1.0);
    }

    #[test]
    fn errored_trials_are_counted() {
        // Normal arms centred near ln 2 with a huge sd often give negative
        // medians, which have no log-ratio.
        let cfg = SimConfig {
            family: Family::Normal,
            estimator: crate::estimators::EstimatorId::GNorm,
            shape: 20.0,
            pooling: Pooling::Fixed,
            ..five()
        };
        let run = metasim(&cfg, 0, 50, 3, EngineOptions::default()).unwrap();
        let r = run.result;
        assert!(r.errors_count > 0);
        assert_eq!(r.completed + r.errors_count, 50);
        assert_eq!(r.coverage, r.successes as f64 / r.completed as f64);
        assert_eq!(run.records.len(), 50);
    }

    #[test]
    fn all_errored_is_degenerate() {
        let recs = vec![TrialRecord::Errored {
            trial_index: 0,
            reason: "boom".into(),
        }];
        assert!(matches!(aggregate(0, &recs), Err(Error::DegenerateResult { .. })));
    }

    #[test]
    fn metasims_cardinality_and_validation() {
        let grid = vec![five(), SimConfig { tau2: 0.1, ..five() }, five(), five()];
        let rep = metasims(&grid, 3, 38, EngineOptions::default()).unwrap();
        assert_eq!(rep.cells.len(), 4);
        assert!(rep.cells.iter().all(|c| c.result.trials == 3));
        assert_eq!(rep.engine_version, ENGINE_VERSION);
        // Identical configs at different positions see different streams.
        assert_ne!(rep.cells[0].records, rep.cells[2].records);

        assert!(metasims(&[], 3, 38, EngineOptions::default()).is_err());
        assert!(metasim(&five(), 0, 0, 38, EngineOptions::default()).is_err());
        let bad = vec![five(), SimConfig { k: 0, ..five() }];
        assert!(metasims(&bad, 3, 38, EngineOptions::default()).is_err());
    }

    #[test]
    fn single_study_flag_routes_cells() {
        let opts = EngineOptions {
            single_study: true,
            ..EngineOptions::default()
        };
        let rep = metasims(&[five()], 20, 38, opts).unwrap();
        assert!(rep.single_study);
        assert!(rep.cells[0]
            .records
            .iter()
            .all(|r| matches!(r, TrialRecord::Completed(t) if t.method_used == Method::FE)));
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn worker_count_does_not_change_results() {
        let grid = vec![
            five(),
            SimConfig {
                tau2: 0.2,
                rho: 1.3,
                ..five()
            },
        ];
        let one = metasims(&grid, 40, 11, EngineOptions::default()).unwrap();
        let eight = metasims(
            &grid,
            40,
            11,
            EngineOptions {
                workers: 8,
                ..EngineOptions::default()
            },
        )
        .unwrap();
        assert_eq!(one, eight);
    }
}
