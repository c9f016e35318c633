//! JSON run configuration.
//!
//! A config is a single JSON object whose keys mirror [`SimConfig`] field
//! names. Grid axes (`K`, `tau2`, `rho`, `base_rate`, `family`,
//! `estimator`, `pooling`) take a value or a list of values; `shape`,
//! `n_min`, `n_max`, `alloc_shape`, `alpha` and `reml_max_iter` are
//! scalars shared by every cell. `trials` and `seed` are optional run
//! settings. Omitted keys take the [`SimConfig::default`] values and are
//! listed in [`RunConfig::defaulted`].
//!
//! ```json
//! { "K": [3, 7], "tau2": [0, 0.2], "rho": 1, "family": "exponential",
//!   "estimator": "g_exp", "pooling": "REML", "n_min": 20, "n_max": 200 }
//! ```

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::simulate::{sim_df, Axes, SimConfig};
use crate::{Error, Result};

/// Recognised keys, in documentation order.
pub const CONFIG_KEYS: [&str; 15] = [
    "K",
    "tau2",
    "rho",
    "base_rate",
    "family",
    "estimator",
    "pooling",
    "shape",
    "n_min",
    "n_max",
    "alloc_shape",
    "alpha",
    "reml_max_iter",
    "trials",
    "seed",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub axes: Axes,
    /// Cells of the grid, in `config_id` order.
    pub grid: Vec<SimConfig>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    /// Simulation keys absent from the file, filled from defaults.
    pub defaulted: Vec<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> From<OneOrMany<T>> for Vec<T> {
    fn from(v: OneOrMany<T>) -> Self {
        match v {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(xs) => xs,
        }
    }
}

struct Fields {
    map: Map<String, Value>,
    defaulted: Vec<String>,
}

impl Fields {
    fn take<T: DeserializeOwned>(&mut self, key: &str) -> Result<Option<T>> {
        match self.map.remove(key) {
            None => {
                if key != "trials" && key != "seed" {
                    self.defaulted.push(key.to_string());
                }
                Ok(None)
            }
            Some(v) => serde_json::from_value(v)
                .map(Some)
                .map_err(|e| Error::config(key, e.to_string())),
        }
    }

    fn axis<T: DeserializeOwned>(&mut self, key: &str, default: Vec<T>) -> Result<Vec<T>> {
        let v: Option<OneOrMany<T>> = self
            .take::<Value>(key)?
            .map(|raw| {
                serde_json::from_value(raw)
                    .map_err(|_| Error::config(key, "expected a value or a list of values of the axis type"))
            })
            .transpose()?;
        Ok(v.map(Vec::from).unwrap_or(default))
    }
}

/// Parses and validates a JSON config string.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::config("<root>", e.to_string()))?;
    let Value::Object(map) = value else {
        return Err(Error::config("<root>", "config must be a JSON object"));
    };
    if let Some(unknown) = map.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
        return Err(Error::config(
            unknown.clone(),
            format!("unknown key; expected one of {}", CONFIG_KEYS.join(", ")),
        ));
    }

    let d = Axes::default();
    let mut f = Fields {
        map,
        defaulted: Vec::new(),
    };
    let axes = Axes {
        k: f.axis("K", d.k)?,
        tau2: f.axis("tau2", d.tau2)?,
        rho: f.axis("rho", d.rho)?,
        base_rate: f.axis("base_rate", d.base_rate)?,
        family: f.axis("family", d.family)?,
        estimator: f.axis("estimator", d.estimator)?,
        pooling: f.axis("pooling", d.pooling)?,
        shape: f.take("shape")?.unwrap_or(d.shape),
        n_min: f.take("n_min")?.unwrap_or(d.n_min),
        n_max: f.take("n_max")?.unwrap_or(d.n_max),
        alloc_shape: f.take("alloc_shape")?.unwrap_or(d.alloc_shape),
        alpha: f.take("alpha")?.unwrap_or(d.alpha),
        reml_max_iter: f.take("reml_max_iter")?.unwrap_or(d.reml_max_iter),
    };
    let trials: Option<usize> = f.take("trials")?;
    if trials == Some(0) {
        return Err(Error::config("trials", "must be >= 1"));
    }
    let seed = f.take("seed")?;
    let grid = sim_df(&axes)?;
    Ok(RunConfig {
        axes,
        grid,
        trials,
        seed,
        defaulted: f.defaulted,
    })
}

/// Reads, parses and validates a JSON config file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Family;
    use crate::estimators::EstimatorId;
    use crate::pooling::Pooling;

    fn key_of(e: Error) -> String {
        match e {
            Error::Config { key, .. } => key,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let rc = parse_config_str(r#"{ "K": [3] }"#).unwrap();
        assert_eq!(
            rc.grid,
            vec![SimConfig {
                k: 3,
                ..SimConfig::default()
            }]
        );
        assert!(!rc.defaulted.contains(&"K".to_string()));
        assert!(rc.defaulted.contains(&"n_min".to_string()));
        assert_eq!(rc.defaulted.len(), 12);
        assert_eq!((rc.trials, rc.seed), (None, None));
    }

    #[test]
    fn grid_cardinality() {
        let rc = parse_config_str(r#"{ "K": [3,7], "rho": [1,2] }"#).unwrap();
        assert_eq!(rc.grid.len(), 4);
    }

    #[test]
    fn scalars_and_names() {
        let rc = parse_config_str(
            r#"{ "K": 4, "family": ["exp", "cauchy"], "estimator": "g_cauchy",
                 "pooling": ["FE", "DL"], "alloc_shape": [2, 3], "trials": 9, "seed": 38 }"#,
        )
        .unwrap();
        assert_eq!(rc.grid.len(), 4);
        assert_eq!(rc.grid[0].family, Family::Exponential);
        assert_eq!(rc.grid[2].family, Family::Cauchy);
        assert_eq!(rc.grid[1].pooling, Pooling::DerSimonianLaird);
        assert!(rc.grid.iter().all(|c| c.estimator == EstimatorId::GCauchy));
        assert_eq!(rc.axes.alloc_shape, [2.0, 3.0]);
        assert_eq!((rc.trials, rc.seed), (Some(9), Some(38)));
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(key_of(parse_config_str(r#"{ "tau2": [-1] }"#).unwrap_err()), "tau2");
        assert_eq!(key_of(parse_config_str(r#"{ "bogus": 1 }"#).unwrap_err()), "bogus");
        assert_eq!(key_of(parse_config_str(r#"{ "rho": [0] }"#).unwrap_err()), "rho");
        assert_eq!(key_of(parse_config_str(r#"{ "K": ["x"] }"#).unwrap_err()), "K");
        assert_eq!(key_of(parse_config_str(r#"{ "K": [] }"#).unwrap_err()), "K");
        assert_eq!(
            key_of(parse_config_str(r#"{ "estimator": "g_wan" }"#).unwrap_err()),
            "estimator"
        );
        assert_eq!(key_of(parse_config_str(r#"{ "alpha": 1.5 }"#).unwrap_err()), "alpha");
        assert_eq!(
            key_of(parse_config_str(r#"{ "n_min": 30, "n_max": 20 }"#).unwrap_err()),
            "n_max"
        );
        assert_eq!(key_of(parse_config_str(r#"{ "trials": 0 }"#).unwrap_err()), "trials");
        assert_eq!(key_of(parse_config_str("[1, 2]").unwrap_err()), "<root>");
        assert_eq!(key_of(parse_config_str("{").unwrap_err()), "<root>");
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(parse_config("/nonexistent/medsim.json"), Err(Error::Io(_))));
    }
}
