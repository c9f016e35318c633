//! Browser bindings for the medsim demo page. Every export takes plain
//! values and returns a JSON string; errors surface as JS exceptions.

use medsim_core::config::parse_config_str;
use medsim_core::distributions::SummaryStats;
use medsim_core::engine::{metasims, EngineOptions};
use medsim_core::estimators::{estimate_se, EstimatorId};
use medsim_core::pooling::{pool, study_effect};
use medsim_core::rng::trial_stream;
use medsim_core::simulate::sim_stats;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const DEFAULT_TRIALS: usize = 100;
const MAX_TRIALS: usize = 20_000;
const MAX_CURVE_POINTS: u32 = 500;

fn text<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn parse_seed(seed: &str) -> Result<u64, String> {
    seed.trim()
        .parse()
        .map_err(|_| format!("seed must be an unsigned integer, got `{seed}`"))
}

/// Standard error of the median for `points` log-spaced sample sizes in
/// `[n_from, n_to]`, holding the summary values fixed.
pub fn se_curve_json(
    estimator: &str,
    median: f64,
    q1: f64,
    q3: f64,
    n_from: u32,
    n_to: u32,
    points: u32,
) -> Result<String, String> {
    let id: EstimatorId = estimator.parse().map_err(text)?;
    if n_from < 2 || n_to < n_from {
        return Err(format!("need 2 <= n_from <= n_to, got {n_from}..{n_to}"));
    }
    let points = points.clamp(2, MAX_CURVE_POINTS);
    let (lo, hi) = (f64::from(n_from).ln(), f64::from(n_to).ln());
    let mut ns: Vec<usize> = (0..points)
        .map(|i| (lo + (hi - lo) * f64::from(i) / f64::from(points - 1)).exp().round() as usize)
        .collect();
    ns.dedup();
    let (q1, q3) = if id.needs_quartiles() {
        (q1, q3)
    } else {
        (median, median)
    };
    let mut curve = Vec::with_capacity(ns.len());
    let mut fitted = Value::Null;
    for n in ns {
        let est = estimate_se(id, &SummaryStats::new(n, median, q1, q3).map_err(text)?).map_err(text)?;
        fitted = json!(est.fitted_params);
        curve.push(json!({ "n": n, "se": est.se }));
    }
    Ok(json!({
        "estimator": id,
        "assumed_family": id.family(),
        "fitted_params": fitted,
        "points": curve,
    })
    .to_string())
}

/// One simulated meta-analysis for cell `cell` of a config: per-study
/// summaries, log-ratio effects, and the pooled estimate.
pub fn simulate_json(config: &str, seed: &str, cell: u32) -> Result<String, String> {
    let run = parse_config_str(config).map_err(text)?;
    let seed = parse_seed(seed)?;
    let cfg = run
        .grid
        .get(cell as usize)
        .ok_or_else(|| format!("cell {cell} out of range: grid has {} cell(s)", run.grid.len()))?;
    let sample = sim_stats(cfg, &mut trial_stream(seed, cell, 0)).map_err(text)?;
    let mut effects = Vec::with_capacity(sample.studies.len());
    let mut studies = Vec::with_capacity(sample.studies.len());
    for (k, s) in sample.studies.iter().enumerate() {
        let e = study_effect(&s.control, &s.intervention, cfg.estimator).map_err(text)?;
        effects.push(e);
        studies.push(json!({
            "study": k,
            "gamma": s.arms.gamma,
            "control": s.control,
            "intervention": s.intervention,
            "y": e.y,
            "v": e.v,
        }));
    }
    let pooled = pool(&effects, cfg.pooling, cfg.alpha, cfg.reml_options()).map_err(text)?;
    Ok(json!({
        "config": cfg,
        "true_effect": cfg.true_effect(),
        "studies": studies,
        "pooled": pooled,
    })
    .to_string())
}

/// Coverage of every cell of a config. `trials == 0` uses the config's
/// `trials`, then 100.
pub fn coverage_json(config: &str, trials: u32, seed: &str) -> Result<String, String> {
    let run = parse_config_str(config).map_err(text)?;
    let seed = parse_seed(seed)?;
    let trials = match trials {
        0 => run.trials.unwrap_or(DEFAULT_TRIALS),
        t => t as usize,
    };
    if trials * run.grid.len() > MAX_TRIALS {
        return Err(format!("at most {MAX_TRIALS} trials in total in the browser"));
    }
    let opts = EngineOptions {
        workers: 1,
        ..EngineOptions::default()
    };
    let report = metasims(&run.grid, trials, seed, opts).map_err(text)?;
    let cells: Vec<Value> = report
        .cells
        .iter()
        .map(|c| json!({ "config_id": c.config_id, "config": c.config, "result": c.result }))
        .collect();
    Ok(json!({ "seed": seed.to_string(), "trials": trials, "cells": cells }).to_string())
}

#[wasm_bindgen]
pub fn se_curve(
    estimator: &str,
    median: f64,
    q1: f64,
    q3: f64,
    n_from: u32,
    n_to: u32,
    points: u32,
) -> Result<String, JsError> {
    se_curve_json(estimator, median, q1, q3, n_from, n_to, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate(config: &str, seed: &str, cell: u32) -> Result<String, JsError> {
    simulate_json(config, seed, cell).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn coverage(config: &str, trials: u32, seed: &str) -> Result<String, JsError> {
    coverage_json(config, trials, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn engine_version() -> String {
    medsim_core::ENGINE_VERSION.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn se_curve_matches_closed_form() {
        let doc = parse(&se_curve_json("g_exp", std::f64::consts::LN_2, 0.0, 0.0, 4, 400, 3).unwrap());
        let pts = doc["points"].as_array().unwrap();
        assert_eq!(pts.len(), 3);
        for (p, n) in pts.iter().zip([4.0f64, 40.0, 400.0]) {
            assert_eq!(p["n"].as_f64().unwrap(), n);
            assert!((p["se"].as_f64().unwrap() - 1.0 / n.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn se_curve_rejects_bad_input() {
        assert!(se_curve_json("g_foo", 1.0, 0.5, 2.0, 4, 40, 5).is_err());
        assert!(se_curve_json("g_norm", 1.0, 0.5, 2.0, 1, 40, 5).is_err());
        assert!(se_curve_json("g_norm", 1.0, 2.0, 0.5, 4, 40, 5).is_err());
    }

    #[test]
    fn simulate_is_seeded() {
        let a = simulate_json(r#"{ "K": 4 }"#, "12", 0).unwrap();
        assert_eq!(a, simulate_json(r#"{ "K": 4 }"#, "12", 0).unwrap());
        assert_ne!(a, simulate_json(r#"{ "K": 4 }"#, "13", 0).unwrap());
        let doc = parse(&a);
        assert_eq!(doc["studies"].as_array().unwrap().len(), 4);
        assert!(doc["pooled"]["ci_low"].as_f64().unwrap() < doc["pooled"]["ci_high"].as_f64().unwrap());
    }

    #[test]
    fn simulate_reports_errors() {
        assert!(simulate_json(r#"{ "bogus": 1 }"#, "1", 0)
            .unwrap_err()
            .contains("bogus"));
        assert!(simulate_json("{}", "-1", 0).is_err());
        assert!(simulate_json("{}", "1", 3).is_err());
    }

    #[test]
    fn coverage_runs_every_cell() {
        let doc = parse(&coverage_json(r#"{ "K": [3, 5] }"#, 10, "7").unwrap());
        let cells = doc["cells"].as_array().unwrap();
        assert_eq!(cells.len(), 2);
        for c in cells {
            assert_eq!(c["result"]["trials"], 10);
        }
        assert!(coverage_json("{}", 50_000, "7").is_err());
    }
}
