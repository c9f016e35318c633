//! Result files: per-trial log (CSV) and per-cell summary (CSV and JSON).
//!
//! CSV numbers are written with 9 significant digits. JSON numbers keep
//! full double precision. Column order is fixed:
//!
//! - trial log: [`TRIAL_LOG_COLUMNS`]; errored trials have `method = error`
//!   and empty `covered`, `ci_low`, `ci_high`, `effect_hat`, `fell_back`.
//! - summary: [`SUMMARY_COLUMNS`].

use std::io::Write;

use serde::Serialize;

use crate::engine::{CoverageReport, TrialRecord};
use crate::simulate::SimConfig;
use crate::stats::fmt_sig;
use crate::Result;

pub const TRIAL_LOG_COLUMNS: [&str; 8] = [
    "config_id",
    "trial",
    "covered",
    "ci_low",
    "ci_high",
    "effect_hat",
    "method",
    "fell_back",
];

pub const SUMMARY_COLUMNS: [&str; 24] = [
    "config_id",
    "family",
    "base_rate",
    "shape",
    "rho",
    "tau2",
    "K",
    "n_min",
    "n_max",
    "alloc_shape_1",
    "alloc_shape_2",
    "alpha",
    "estimator",
    "pooling",
    "reml_max_iter",
    "single_study",
    "trials",
    "completed",
    "successes",
    "coverage",
    "mean_ci_width",
    "fallback_count",
    "errors_count",
    "seed",
];

pub fn write_trial_log<W: Write>(report: &CoverageReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIAL_LOG_COLUMNS)?;
    for cell in &report.cells {
        let id = cell.config_id.to_string();
        for rec in &cell.records {
            let row: [String; 8] = match rec {
                TrialRecord::Completed(r) => [
                    id.clone(),
                    r.trial_index.to_string(),
                    r.covered.to_string(),
                    fmt_sig(r.ci_low),
                    fmt_sig(r.ci_high),
                    fmt_sig(r.effect_hat),
                    r.method_used.name().to_string(),
                    r.fell_back.to_string(),
                ],
                TrialRecord::Errored { trial_index, .. } => [
                    id.clone(),
                    trial_index.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    "error".to_string(),
                    String::new(),
                ],
            };
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(report: &CoverageReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_COLUMNS)?;
    for cell in &report.cells {
        let c = &cell.config;
        let r = &cell.result;
        w.write_record([
            cell.config_id.to_string(),
            c.family.name().to_string(),
            fmt_sig(c.base_rate),
            fmt_sig(c.shape),
            fmt_sig(c.rho),
            fmt_sig(c.tau2),
            c.k.to_string(),
            c.n_min.to_string(),
            c.n_max.to_string(),
            fmt_sig(c.alloc_shape[0]),
            fmt_sig(c.alloc_shape[1]),
            fmt_sig(c.alpha),
            c.estimator.name().to_string(),
            c.pooling.name().to_string(),
            c.reml_max_iter.to_string(),
            report.single_study.to_string(),
            r.trials.to_string(),
            r.completed.to_string(),
            r.successes.to_string(),
            fmt_sig(r.coverage),
            fmt_sig(r.mean_ci_width),
            r.fallback_count.to_string(),
            r.errors_count.to_string(),
            report.master_seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryRecord<'a> {
    config_id: u32,
    #[serde(flatten)]
    config: &'a SimConfig,
    single_study: bool,
    trials: usize,
    completed: usize,
    successes: usize,
    coverage: f64,
    mean_ci_width: f64,
    fallback_count: usize,
    errors_count: usize,
    seed: u64,
}

#[derive(Serialize)]
struct SummaryDocument<'a> {
    engine_version: &'a str,
    seed: u64,
    trials: usize,
    single_study: bool,
    defaulted: &'a [String],
    cells: Vec<SummaryRecord<'a>>,
}

/// Writes the summary as one JSON document. `defaulted` lists config keys
/// that were filled from defaults.
pub fn write_summary_json<W: Write>(report: &CoverageReport, defaulted: &[String], mut out: W) -> Result<()> {
    let doc = SummaryDocument {
        engine_version: &report.engine_version,
        seed: report.master_seed,
        trials: report.trials,
        single_study: report.single_study,
        defaulted,
        cells: report
            .cells
            .iter()
            .map(|cell| SummaryRecord {
                config_id: cell.config_id,
                config: &cell.config,
                single_study: report.single_study,
                trials: cell.result.trials,
                completed: cell.result.completed,
                successes: cell.result.successes,
                coverage: cell.result.coverage,
                mean_ci_width: cell.result.mean_ci_width,
                fallback_count: cell.result.fallback_count,
                errors_count: cell.result.errors_count,
                seed: report.master_seed,
            })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut out, &doc)?;
    out.write_all(b"\n")?;
    Ok(())
}
