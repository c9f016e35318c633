//! Standard error of the sample median from reported summaries.
//!
//! Each `g_*` estimator assumes a family, fits its parameters from the
//! reported median (and quartiles where needed), and evaluates the
//! large-sample approximation
//!
//! ```text
//! var(m) ≈ 1 / (4 n f(ν)²)
//! ```
//!
//! at the fitted density, with ν replaced by the sample median.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionSpec, Family, SummaryStats};
use crate::stats::normal_quantile;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorId {
    #[serde(rename = "g_exp")]
    GExp,
    #[serde(rename = "g_norm")]
    GNorm,
    #[serde(rename = "g_lnorm")]
    GLnorm,
    #[serde(rename = "g_cauchy")]
    GCauchy,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 4] = [
        EstimatorId::GExp,
        EstimatorId::GNorm,
        EstimatorId::GLnorm,
        EstimatorId::GCauchy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorId::GExp => "g_exp",
            EstimatorId::GNorm => "g_norm",
            EstimatorId::GLnorm => "g_lnorm",
            EstimatorId::GCauchy => "g_cauchy",
        }
    }

    /// The family this estimator assumes.
    pub fn family(self) -> Family {
        match self {
            EstimatorId::GExp => Family::Exponential,
            EstimatorId::GNorm => Family::Normal,
            EstimatorId::GLnorm => Family::Lognormal,
            EstimatorId::GCauchy => Family::Cauchy,
        }
    }

    /// Whether the estimator reads the quartiles.
    pub fn needs_quartiles(self) -> bool {
        !matches!(self, EstimatorId::GExp)
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::UnknownEstimator(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeEstimate {
    pub se: f64,
    pub assumed_family: Family,
    /// Fitted parameters of the assumed family, in `DistributionSpec` order.
    pub fitted_params: Vec<f64>,
}

fn check_n(n: i64) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain(format!("sample size must be >= 2, got {n}")));
    }
    Ok(n as f64)
}

fn check_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite, got {x}")))
    }
}

fn check_spread(q1: f64, q3: f64) -> Result<()> {
    check_finite("q1", q1)?;
    check_finite("q3", q3)?;
    if q1 < q3 {
        Ok(())
    } else {
        Err(Error::DegenerateSpread { q1, q3 })
    }
}

/// Evaluates `1 / (2 √n f(m))` at the fitted density.
fn from_density(n: f64, median: f64, fitted: DistributionSpec) -> Result<SeEstimate> {
    let f = fitted.density_at(median)?;
    let se = 1.0 / (2.0 * n.sqrt() * f);
    if !(se.is_finite() && se > 0.0) {
        return Err(Error::domain(format!(
            "standard error is not finite and positive: {se}"
        )));
    }
    Ok(SeEstimate {
        se,
        assumed_family: fitted.family(),
        fitted_params: fitted.params(),
    })
}

/// Exponential assumption: rate fitted as `ln 2 / median`.
pub fn g_exp(n: i64, median: f64) -> Result<SeEstimate> {
    let n = check_n(n)?;
    check_finite("median", median)?;
    if median <= 0.0 {
        return Err(Error::domain(format!("median must be > 0, got {median}")));
    }
    from_density(n, median, DistributionSpec::exponential(LN_2 / median)?)
}

/// Normal assumption: mean at the median, sd from the interquartile range.
pub fn g_norm(n: i64, median: f64, q1: f64, q3: f64) -> Result<SeEstimate> {
    let n = check_n(n)?;
    check_finite("median", median)?;
    check_spread(q1, q3)?;
    let sd = (q3 - q1) / (2.0 * normal_quantile(0.75));
    from_density(n, median, DistributionSpec::normal(median, sd)?)
}

/// Log-normal assumption: log-mean `ln median`, log-sd from the log-IQR.
pub fn g_lnorm(n: i64, median: f64, q1: f64, q3: f64) -> Result<SeEstimate> {
    let n = check_n(n)?;
    check_finite("median", median)?;
    for (name, x) in [("q1", q1), ("median", median), ("q3", q3)] {
        if x.is_nan() || x <= 0.0 {
            return Err(Error::domain(format!("{name} must be > 0 for g_lnorm, got {x}")));
        }
    }
    check_spread(q1, q3)?;
    let sdlog = (q3.ln() - q1.ln()) / (2.0 * normal_quantile(0.75));
    from_density(n, median, DistributionSpec::lognormal(median.ln(), sdlog)?)
}

/// Cauchy assumption: location at the median, scale as half the IQR.
pub fn g_cauchy(n: i64, median: f64, q1: f64, q3: f64) -> Result<SeEstimate> {
    let n = check_n(n)?;
    check_finite("median", median)?;
    check_spread(q1, q3)?;
    let scale = (q3 - q1) / 2.0;
    let est = from_density(n, median, DistributionSpec::cauchy(median, scale)?)?;
    debug_assert!((est.se - PI * scale / (2.0 * n.sqrt())).abs() <= 1e-12 * est.se);
    Ok(est)
}

/// Dispatches to the estimator named by `id`.
pub fn estimate_se(id: EstimatorId, stats: &SummaryStats) -> Result<SeEstimate> {
    let n = i64::try_from(stats.n).map_err(|_| Error::domain("sample size overflows i64"))?;
    match id {
        EstimatorId::GExp => g_exp(n, stats.median),
        EstimatorId::GNorm => g_norm(n, stats.median, stats.q1, stats.q3),
        EstimatorId::GLnorm => g_lnorm(n, stats.median, stats.q1, stats.q3),
        EstimatorId::GCauchy => g_cauchy(n, stats.median, stats.q1, stats.q3),
    }
}
