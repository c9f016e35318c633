//! Per-study effects and inverse-variance pooling.
//!
//! The effect of a study is the log-ratio of arm medians,
//! `y = ln(m_I / m_C)`, with variance from the delta method,
//! `v = se_C² / m_C² + se_I² / m_I²`. Studies are pooled with fixed-effect
//! weights `1/v` or random-effects weights `1/(v + τ²)`, where τ² comes
//! from the DerSimonian–Laird moment estimator or from restricted maximum
//! likelihood.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::distributions::SummaryStats;
use crate::estimators::{estimate_se, EstimatorId};
use crate::optimize::brent_min;
use crate::stats::normal_quantile;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyEffect {
    pub y: f64,
    pub v: f64,
}

impl StudyEffect {
    pub fn new(y: f64, v: f64) -> Result<Self> {
        if !y.is_finite() {
            return Err(Error::domain(format!("effect must be finite, got {y}")));
        }
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::domain(format!("variance must be finite and > 0, got {v}")));
        }
        Ok(StudyEffect { y, v })
    }
}

/// Pooling requested by a simulation cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pooling {
    #[serde(rename = "FE")]
    Fixed,
    #[serde(rename = "DL")]
    DerSimonianLaird,
    /// REML, falling back to fixed-effect when the search does not converge.
    #[serde(rename = "REML")]
    Reml,
}

impl Pooling {
    pub fn name(self) -> &'static str {
        match self {
            Pooling::Fixed => "FE",
            Pooling::DerSimonianLaird => "DL",
            Pooling::Reml => "REML",
        }
    }

    /// Smallest study count the model can be fitted to.
    pub fn min_studies(self) -> usize {
        match self {
            Pooling::Fixed => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Model that actually produced a pooled estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    FE,
    DL,
    REML,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::FE => "FE",
            Method::DL => "DL",
            Method::REML => "REML",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PooledEstimate {
    pub effect: f64,
    pub variance: f64,
    pub tau2_hat: f64,
    pub method_used: Method,
    pub fell_back: bool,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Search settings for [`pool_reml`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemlOptions {
    /// Iteration budget of the bounded search. Zero forces the fallback.
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for RemlOptions {
    fn default() -> Self {
        RemlOptions {
            max_iter: 200,
            tol: 1e-8,
        }
    }
}

/// Log-ratio of medians and its delta-method variance.
pub fn study_effect(
    control: &SummaryStats,
    intervention: &SummaryStats,
    estimator: EstimatorId,
) -> Result<StudyEffect> {
    for (arm, m) in [("control", control.median), ("intervention", intervention.median)] {
        if m.is_nan() || m <= 0.0 {
            return Err(Error::domain(format!("{arm} median must be > 0, got {m}")));
        }
    }
    let se_c = estimate_se(estimator, control)?.se;
    let se_i = estimate_se(estimator, intervention)?.se;
    let rel_c = se_c / control.median;
    let rel_i = se_i / intervention.median;
    StudyEffect::new(
        (intervention.median / control.median).ln(),
        rel_c * rel_c + rel_i * rel_i,
    )
}

/// `effect ± z_{1−α/2} √variance`.
pub fn confidence_interval(effect: f64, variance: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::domain(format!(
            "variance must be finite and > 0, got {variance}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let half = normal_quantile(1.0 - alpha / 2.0) * variance.sqrt();
    Ok((effect - half, effect + half))
}

fn check_effects(effects: &[StudyEffect], needed: usize) -> Result<()> {
    if effects.is_empty() {
        return Err(Error::EmptyInput);
    }
    if effects.len() < needed {
        return Err(Error::InsufficientStudies {
            needed,
            got: effects.len(),
        });
    }
    for e in effects {
        StudyEffect::new(e.y, e.v)?;
    }
    Ok(())
}

/// Weighted mean and variance with weights `1/(v_k + τ²)`.
fn weighted(effects: &[StudyEffect], tau2: f64) -> (f64, f64) {
    let (sw, swy) = effects.iter().fold((0.0, 0.0), |(sw, swy), e| {
        let w = 1.0 / (e.v + tau2);
        (sw + w, swy + w * e.y)
    });
    (swy / sw, 1.0 / sw)
}

fn finish(
    effects: &[StudyEffect],
    tau2: f64,
    method_used: Method,
    fell_back: bool,
    alpha: f64,
) -> Result<PooledEstimate> {
    let (effect, variance) = weighted(effects, tau2);
    let (ci_low, ci_high) = confidence_interval(effect, variance, alpha)?;
    Ok(PooledEstimate {
        effect,
        variance,
        tau2_hat: tau2,
        method_used,
        fell_back,
        ci_low,
        ci_high,
    })
}

/// Fixed-effect (inverse-variance) pooling.
pub fn pool_fixed(effects: &[StudyEffect], alpha: f64) -> Result<PooledEstimate> {
    check_effects(effects, 1)?;
    finish(effects, 0.0, Method::FE, false, alpha)
}

/// DerSimonian–Laird moment estimate of τ², truncated at zero.
pub fn tau2_dl(effects: &[StudyEffect]) -> Result<f64> {
    check_effects(effects, 2)?;
    let (mean_fe, _) = weighted(effects, 0.0);
    let (mut sw, mut sw2, mut q) = (0.0, 0.0, 0.0);
    for e in effects {
        let w = 1.0 / e.v;
        sw += w;
        sw2 += w * w;
        q += w * (e.y - mean_fe).powi(2);
    }
    let df = (effects.len() - 1) as f64;
    Ok(((q - df) / (sw - sw2 / sw)).max(0.0))
}

/// Random-effects pooling with the DerSimonian–Laird τ².
pub fn pool_dl(effects: &[StudyEffect], alpha: f64) -> Result<PooledEstimate> {
    let tau2 = tau2_dl(effects)?;
    finish(effects, tau2, Method::DL, false, alpha)
}

/// Restricted log-likelihood of the random-effects model at τ², up to an
/// additive constant.
pub fn restricted_loglik(effects: &[StudyEffect], tau2: f64) -> f64 {
    let (mu, _) = weighted(effects, tau2);
    let (mut log_det, mut sw, mut rss) = (0.0, 0.0, 0.0);
    for e in effects {
        let total = e.v + tau2;
        log_det += total.ln();
        sw += 1.0 / total;
        rss += (e.y - mu).powi(2) / total;
    }
    -0.5 * (log_det + sw.ln() + rss)
}

/// Upper end of the τ² search interval: `10·max(v_k) + var(y)`.
pub fn reml_upper_bound(effects: &[StudyEffect]) -> f64 {
    let k = effects.len() as f64;
    let max_v = effects.iter().map(|e| e.v).fold(0.0, f64::max);
    let mean = effects.iter().map(|e| e.y).sum::<f64>() / k;
    let var_y = if effects.len() > 1 {
        effects.iter().map(|e| (e.y - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    10.0 * max_v + var_y
}

/// Coarse grid used to pick the bracket handed to the bounded search.
const REML_SCAN_POINTS: usize = 32;

/// Maximizes the restricted likelihood over `[0, reml_upper_bound]`.
///
/// Returns `None` when the search does not converge within the budget or
/// the objective is non-finite anywhere it was evaluated.
pub fn tau2_reml(effects: &[StudyEffect], opts: RemlOptions) -> Result<Option<f64>> {
    check_effects(effects, 2)?;
    if opts.max_iter == 0 {
        return Ok(None);
    }
    let hi = reml_upper_bound(effects);
    let ll = |t: f64| restricted_loglik(effects, t);

    // Locate the best cell of a coarse grid, then refine inside the cells
    // adjacent to it.
    let step = hi / REML_SCAN_POINTS as f64;
    let mut best = (0usize, ll(0.0));
    for i in 0..=REML_SCAN_POINTS {
        let value = ll(i as f64 * step);
        if !value.is_finite() {
            return Ok(None);
        }
        if value > best.1 {
            best = (i, value);
        }
    }
    let lo_b = best.0.saturating_sub(1) as f64 * step;
    let hi_b = ((best.0 + 1).min(REML_SCAN_POINTS)) as f64 * step;
    let m = brent_min(|t| -ll(t), lo_b, hi_b, opts.tol, opts.max_iter);
    if !m.converged {
        return Ok(None);
    }

    // The search never evaluates bracket endpoints; keep whichever of the
    // refined point, the best grid point and the τ² = 0 boundary is best.
    let grid_best = best.0 as f64 * step;
    let tau2 = [(m.x, -m.fx), (grid_best, best.1), (0.0, ll(0.0))]
        .into_iter()
        .fold(
            (f64::NAN, f64::NEG_INFINITY),
            |acc, c| if c.1 > acc.1 { c } else { acc },
        )
        .0;
    Ok(Some(tau2))
}

/// REML pooling. Falls back to [`pool_fixed`] (with `fell_back = true`)
/// when the τ² search does not converge.
pub fn pool_reml(effects: &[StudyEffect], alpha: f64, opts: RemlOptions) -> Result<PooledEstimate> {
    match tau2_reml(effects, opts)? {
        Some(tau2) => finish(effects, tau2, Method::REML, false, alpha),
        None => finish(effects, 0.0, Method::FE, true, alpha),
    }
}

/// Pools with the requested model.
pub fn pool(effects: &[StudyEffect], pooling: Pooling, alpha: f64, reml: RemlOptions) -> Result<PooledEstimate> {
    match pooling {
        Pooling::Fixed => pool_fixed(effects, alpha),
        Pooling::DerSimonianLaird => pool_dl(effects, alpha),
        Pooling::Reml => pool_reml(effects, alpha, reml),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::g_exp;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::LN_2;

    fn fx(ys: &[f64], vs: &[f64]) -> Vec<StudyEffect> {
        ys.iter()
            .zip(vs)
            .map(|(&y, &v)| StudyEffect::new(y, v).unwrap())
            .collect()
    }

    #[test]
    fn study_effect_examples() {
        let arm = SummaryStats::new(50, 2.0, 1.0, 3.0).unwrap();
        let e = study_effect(&arm, &arm, EstimatorId::GExp).unwrap();
        assert_eq!(e.y, 0.0);
        let rel = g_exp(50, 2.0).unwrap().se / 2.0;
        assert_abs_diff_eq!(e.v, 2.0 * rel * rel, epsilon = 1e-15);

        let arm = SummaryStats::new(100, LN_2, 0.1, 1.0).unwrap();
        let e = study_effect(&arm, &arm, EstimatorId::GExp).unwrap();
        assert_abs_diff_eq!(e.v, 0.04162737962011216, epsilon = 1e-12);

        let bad = SummaryStats::new(10, 0.0, -1.0, 1.0).unwrap();
        assert!(matches!(
            study_effect(&bad, &arm, EstimatorId::GNorm),
            Err(Error::Domain(_))
        ));
        let flat = SummaryStats::new(10, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            study_effect(&flat, &arm, EstimatorId::GNorm),
            Err(Error::DegenerateSpread { .. })
        ));
    }

    #[test]
    fn fixed_effect_examples() {
        let p = pool_fixed(&fx(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]), 0.05).unwrap();
        assert_eq!(p.effect, 2.0);
        assert_eq!(p.variance, 1.0 / 3.0);
        assert_eq!((p.tau2_hat, p.method_used, p.fell_back), (0.0, Method::FE, false));

        let p = pool_fixed(&fx(&[0.5], &[0.04]), 0.05).unwrap();
        assert_eq!((p.effect, p.variance), (0.5, 0.04));

        let p = pool_fixed(&fx(&[0.0, 4.0], &[1.0, 3.0]), 0.05).unwrap();
        assert_abs_diff_eq!(p.effect, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.variance, 0.75, epsilon = 1e-15);

        assert_eq!(pool_fixed(&[], 0.05), Err(Error::EmptyInput));
    }

    #[test]
    fn dl_examples() {
        assert_eq!(tau2_dl(&fx(&[1.0, 2.0, 3.0], &[1.0; 3])).unwrap(), 0.0);
        assert_eq!(tau2_dl(&fx(&[0.0, 2.0, 4.0], &[1.0; 3])).unwrap(), 3.0);
        assert_eq!(tau2_dl(&fx(&[0.7; 4], &[0.1, 0.2, 0.3, 0.4])).unwrap(), 0.0);
        assert!(matches!(
            tau2_dl(&fx(&[1.0], &[1.0])),
            Err(Error::InsufficientStudies { needed: 2, got: 1 })
        ));
        let p = pool_dl(&fx(&[0.0, 2.0, 4.0], &[1.0; 3]), 0.05).unwrap();
        assert_eq!(p.method_used, Method::DL);
        assert_abs_diff_eq!(p.variance, 4.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn reml_examples() {
        let p = pool_reml(&fx(&[1.0; 3], &[1.0; 3]), 0.05, RemlOptions::default()).unwrap();
        assert_eq!(p.tau2_hat, 0.0);
        assert_eq!(p.effect, 1.0);
        assert_eq!(p.method_used, Method::REML);
        let f = pool_fixed(&fx(&[1.0; 3], &[1.0; 3]), 0.05).unwrap();
        assert_eq!((p.effect, p.variance), (f.effect, f.variance));

        let p = pool_reml(&fx(&[0.0, 2.0, 4.0], &[1.0; 3]), 0.05, RemlOptions::default()).unwrap();
        assert_abs_diff_eq!(p.effect, 2.0, epsilon = 1e-12);
        // Equal variances: the REML solution is s² − v with s² the sample variance.
        assert_abs_diff_eq!(p.tau2_hat, 3.0, epsilon = 1e-6);

        let forced = RemlOptions {
            max_iter: 0,
            ..RemlOptions::default()
        };
        let p = pool_reml(&fx(&[0.0, 2.0, 4.0], &[1.0; 3]), 0.05, forced).unwrap();
        assert!(p.fell_back);
        assert_eq!(p.method_used, Method::FE);
        assert_eq!(p.effect, 2.0);
        assert_eq!(p.variance, 1.0 / 3.0);

        assert!(pool_reml(&fx(&[1.0], &[1.0]), 0.05, RemlOptions::default()).is_err());
    }

    #[test]
    fn confidence_interval_examples() {
        let (lo, hi) = confidence_interval(0.0, 1.0, 0.05).unwrap();
        assert_abs_diff_eq!(lo, -1.959963984540054, epsilon = 1e-9);
        assert_abs_diff_eq!(hi, 1.959963984540054, epsilon = 1e-9);
        let (lo, hi) = confidence_interval(5.0, 0.25, 0.05).unwrap();
        assert_abs_diff_eq!(lo, 4.020018007729973, epsilon = 1e-9);
        assert_abs_diff_eq!(hi, 5.979981992270027, epsilon = 1e-9);
        assert!(confidence_interval(0.0, 0.0, 0.05).is_err());
        assert!(confidence_interval(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn dispatcher_routes_methods() {
        let e = fx(&[0.0, 2.0, 4.0], &[1.0; 3]);
        let o = RemlOptions::default();
        assert_eq!(pool(&e, Pooling::Fixed, 0.05, o).unwrap().method_used, Method::FE);
        assert_eq!(
            pool(&e, Pooling::DerSimonianLaird, 0.05, o).unwrap().method_used,
            Method::DL
        );
        assert_eq!(pool(&e, Pooling::Reml, 0.05, o).unwrap().method_used, Method::REML);
    }
}
