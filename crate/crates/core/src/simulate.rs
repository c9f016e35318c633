//! Synthetic meta-analytic data.
//!
//! A study `k` gets a total size `N_k ~ Uniform{a..=b}`, an intervention
//! share `p_k ~ Beta(β₁, β₂)` and a random effect `γ_k ~ N(0, τ²)`. The
//! effect is split equally between the arms on the rate scale:
//!
//! ```text
//! λ_k^C = λ^C · exp(γ_k / 2)
//! λ_k^I = λ^I · exp(−γ_k / 2),   λ^I = ρ · λ^C
//! ```
//!
//! so that `ln λ_k^C − ln λ_k^I = ln(λ^C / λ^I) + γ_k`. Since the median of
//! an exponential is `ln 2 / λ`, this moves the arm medians by `e^{∓γ_k/2}`.
//! The other families reuse the same median construction with their shape
//! parameter held at the configured value.

use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use std::io::Write;

use crate::distributions::{summarize, DistributionSpec, Family, SummaryStats};
use crate::estimators::EstimatorId;
use crate::pooling::{Pooling, RemlOptions};
use crate::stats::fmt_sig;
use crate::{Error, Result};

/// One simulation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Control-arm rate λ^C; the control median is `ln 2 / base_rate` for
    /// every family.
    pub base_rate: f64,
    /// Fixed shape of non-exponential families: sd (normal), log-sd
    /// (lognormal) or scale (Cauchy). Ignored for the exponential.
    pub shape: f64,
    /// Ratio of population medians ρ = ν^C / ν^I.
    pub rho: f64,
    pub tau2: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub n_min: usize,
    pub n_max: usize,
    /// Beta(β₁, β₂) parameters of the intervention share.
    pub alloc_shape: [f64; 2],
    pub family: Family,
    pub alpha: f64,
    pub estimator: EstimatorId,
    pub pooling: Pooling,
    pub reml_max_iter: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            base_rate: 1.0,
            shape: 0.5,
            rho: 1.0,
            tau2: 0.0,
            k: 5,
            n_min: 20,
            n_max: 200,
            alloc_shape: [10.0, 10.0],
            family: Family::Exponential,
            alpha: 0.05,
            estimator: EstimatorId::GExp,
            pooling: Pooling::Reml,
            reml_max_iter: RemlOptions::default().max_iter,
        }
    }
}

fn positive(key: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be finite and > 0, got {x}")))
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        positive("base_rate", self.base_rate)?;
        positive("shape", self.shape)?;
        positive("rho", self.rho)?;
        if !(self.tau2.is_finite() && self.tau2 >= 0.0) {
            return Err(Error::config(
                "tau2",
                format!("must be finite and >= 0, got {}", self.tau2),
            ));
        }
        if self.k < 1 {
            return Err(Error::config("K", "must be >= 1"));
        }
        if self.k < self.pooling.min_studies() {
            return Err(Error::config(
                "K",
                format!(
                    "{} pooling needs K >= {}, got {}",
                    self.pooling,
                    self.pooling.min_studies(),
                    self.k
                ),
            ));
        }
        validate_sizes(self.n_min, self.n_max)?;
        validate_alloc(self.alloc_shape)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(
                "alpha",
                format!("must lie in (0, 1), got {}", self.alpha),
            ));
        }
        Ok(())
    }

    pub fn reml_options(&self) -> RemlOptions {
        RemlOptions {
            max_iter: self.reml_max_iter,
            ..RemlOptions::default()
        }
    }

    /// True log-ratio of medians, θ = ln(ν^I / ν^C) = −ln ρ.
    pub fn true_effect(&self) -> f64 {
        -self.rho.ln()
    }
}

fn validate_sizes(a: usize, b: usize) -> Result<()> {
    // Both arms need at least two observations.
    if a < 4 {
        return Err(Error::config(
            "n_min",
            format!("must be >= 4 so both arms get >= 2, got {a}"),
        ));
    }
    if b < a {
        return Err(Error::config("n_max", format!("must be >= n_min = {a}, got {b}")));
    }
    Ok(())
}

fn validate_alloc(shape: [f64; 2]) -> Result<()> {
    if shape.iter().all(|s| s.is_finite() && *s > 0.0) {
        Ok(())
    } else {
        Err(Error::config(
            "alloc_shape",
            format!("Beta parameters must be > 0, got {shape:?}"),
        ))
    }
}

/// Arm sizes `(n_control, n_intervention)` for one study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmSizes {
    pub control: usize,
    pub intervention: usize,
}

impl ArmSizes {
    pub fn total(&self) -> usize {
        self.control + self.intervention
    }
}

/// Draws per-study arm sizes.
///
/// `n_I = clamp(round_half_even(p·N), 2, N − 2)` and `n_C = N − n_I`.
pub fn sim_n<R: Rng + ?Sized>(
    k: usize,
    n_min: usize,
    n_max: usize,
    alloc_shape: [f64; 2],
    rng: &mut R,
) -> Result<Vec<ArmSizes>> {
    if k < 1 {
        return Err(Error::config("K", "must be >= 1"));
    }
    validate_sizes(n_min, n_max)?;
    validate_alloc(alloc_shape)?;
    let beta = Beta::new(alloc_shape[0], alloc_shape[1]).map_err(|e| Error::config("alloc_shape", e.to_string()))?;
    Ok((0..k)
        .map(|_| {
            let total = rng.random_range(n_min..=n_max);
            let share: f64 = beta.sample(rng);
            let raw = (share * total as f64).round_ties_even() as usize;
            let intervention = raw.clamp(2, total - 2);
            ArmSizes {
                control: total - intervention,
                intervention,
            }
        })
        .collect())
}

/// `K` i.i.d. N(0, τ²) study effects; exactly zero when τ² = 0.
pub fn draw_random_effects<R: Rng + ?Sized>(k: usize, tau2: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(tau2.is_finite() && tau2 >= 0.0) {
        return Err(Error::domain(format!("tau2 must be finite and >= 0, got {tau2}")));
    }
    if tau2 == 0.0 {
        return Ok(vec![0.0; k]);
    }
    let normal = Normal::new(0.0, tau2.sqrt()).map_err(|e| Error::domain(e.to_string()))?;
    Ok(normal.sample_iter(rng).take(k).collect())
}

/// Study-level exponential rates `(λ_k^C, λ_k^I)`.
pub fn solve_arm_rates(base_rate: f64, rho: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(base_rate.is_finite() && base_rate > 0.0) {
        return Err(Error::domain(format!("base rate must be > 0, got {base_rate}")));
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::domain(format!("rho must be > 0, got {rho}")));
    }
    if !gamma.is_finite() {
        return Err(Error::domain(format!("gamma must be finite, got {gamma}")));
    }
    let rate_i = rho * base_rate;
    Ok((base_rate * (gamma / 2.0).exp(), rate_i * (-gamma / 2.0).exp()))
}

/// Arm distributions for one study of `config`.
pub fn solve_arm_params(config: &SimConfig, gamma: f64) -> Result<(DistributionSpec, DistributionSpec)> {
    let (rate_c, rate_i) = solve_arm_rates(config.base_rate, config.rho, gamma)?;
    let arm = |rate: f64| {
        let median = LN_2 / rate;
        match config.family {
            Family::Exponential => DistributionSpec::exponential(rate),
            Family::Normal => DistributionSpec::normal(median, config.shape),
            Family::Lognormal => DistributionSpec::lognormal(median.ln(), config.shape),
            Family::Cauchy => DistributionSpec::cauchy(median, config.shape),
        }
    };
    Ok((arm(rate_c)?, arm(rate_i)?))
}

/// Generating parameters of one study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyArms {
    pub gamma: f64,
    pub control: DistributionSpec,
    pub intervention: DistributionSpec,
    pub n_control: usize,
    pub n_intervention: usize,
}

impl StudyArms {
    /// Leading parameter of each arm: the rate for exponential arms, the
    /// location (log-location for lognormal) otherwise.
    pub fn leading_params(&self) -> (f64, f64) {
        (self.control.params()[0], self.intervention.params()[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub arms: StudyArms,
    pub control: SummaryStats,
    pub intervention: SummaryStats,
}

/// Summary statistics of K two-arm studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaSample {
    pub studies: Vec<StudySummary>,
}

/// CSV header of [`MetaSample::write_csv`].
pub const META_SAMPLE_COLUMNS: [&str; 8] = ["study", "arm", "n", "median", "q1", "q3", "gamma", "rate"];

impl MetaSample {
    /// One row per arm, control first. `rate` holds the arm's leading
    /// parameter (see [`StudyArms::leading_params`]).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(META_SAMPLE_COLUMNS)?;
        for (i, s) in self.studies.iter().enumerate() {
            let (lead_c, lead_i) = s.arms.leading_params();
            for (arm, stats, lead) in [
                ("control", &s.control, lead_c),
                ("intervention", &s.intervention, lead_i),
            ] {
                w.write_record([
                    (i + 1).to_string(),
                    arm.to_string(),
                    stats.n.to_string(),
                    fmt_sig(stats.median),
                    fmt_sig(stats.q1),
                    fmt_sig(stats.q3),
                    fmt_sig(s.arms.gamma),
                    fmt_sig(lead),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws one meta-analytic dataset.
///
/// Stream consumption order: all arm sizes, then all random effects, then
/// for each study the control sample followed by the intervention sample.
pub fn sim_stats<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Result<MetaSample> {
    config.validate()?;
    let sizes = sim_n(config.k, config.n_min, config.n_max, config.alloc_shape, rng)?;
    let gammas = draw_random_effects(config.k, config.tau2, rng)?;
    let studies = sizes
        .into_iter()
        .zip(gammas)
        .map(|(size, gamma)| {
            let (control, intervention) = solve_arm_params(config, gamma)?;
            let xc = control.sample(size.control, rng)?;
            let xi = intervention.sample(size.intervention, rng)?;
            Ok(StudySummary {
                arms: StudyArms {
                    gamma,
                    control,
                    intervention,
                    n_control: size.control,
                    n_intervention: size.intervention,
                },
                control: summarize(&xc)?,
                intervention: summarize(&xi)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetaSample { studies })
}

/// Value lists for each grid axis. Scalars are shared by all cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axes {
    #[serde(rename = "K")]
    pub k: Vec<usize>,
    pub tau2: Vec<f64>,
    pub rho: Vec<f64>,
    pub base_rate: Vec<f64>,
    pub family: Vec<Family>,
    pub estimator: Vec<EstimatorId>,
    pub pooling: Vec<Pooling>,
    pub shape: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub alloc_shape: [f64; 2],
    pub alpha: f64,
    pub reml_max_iter: usize,
}

impl Default for Axes {
    fn default() -> Self {
        let d = SimConfig::default();
        Axes {
            k: vec![d.k],
            tau2: vec![d.tau2],
            rho: vec![d.rho],
            base_rate: vec![d.base_rate],
            family: vec![d.family],
            estimator: vec![d.estimator],
            pooling: vec![d.pooling],
            shape: d.shape,
            n_min: d.n_min,
            n_max: d.n_max,
            alloc_shape: d.alloc_shape,
            alpha: d.alpha,
            reml_max_iter: d.reml_max_iter,
        }
    }
}

/// Cartesian product of the axes.
///
/// Cells are enumerated row-major with `K` outermost, then `tau2`, `rho`,
/// `base_rate`, `family`, `estimator` and `pooling`; a cell's position is
/// its `config_id`. Duplicate axis values are kept. Every cell is
/// validated before any is returned.
pub fn sim_df(axes: &Axes) -> Result<Vec<SimConfig>> {
    let lens = [
        ("K", axes.k.len()),
        ("tau2", axes.tau2.len()),
        ("rho", axes.rho.len()),
        ("base_rate", axes.base_rate.len()),
        ("family", axes.family.len()),
        ("estimator", axes.estimator.len()),
        ("pooling", axes.pooling.len()),
    ];
    if let Some((key, _)) = lens.iter().find(|(_, n)| *n == 0) {
        return Err(Error::config(*key, "axis must not be empty"));
    }

    let mut grid = Vec::with_capacity(lens.iter().map(|(_, n)| n).product());
    for &k in &axes.k {
        for &tau2 in &axes.tau2 {
            for &rho in &axes.rho {
                for &base_rate in &axes.base_rate {
                    for &family in &axes.family {
                        for &estimator in &axes.estimator {
                            for &pooling in &axes.pooling {
                                let cell = SimConfig {
                                    base_rate,
                                    shape: axes.shape,
                                    rho,
                                    tau2,
                                    k,
                                    n_min: axes.n_min,
                                    n_max: axes.n_max,
                                    alloc_shape: axes.alloc_shape,
                                    family,
                                    alpha: axes.alpha,
                                    estimator,
                                    pooling,
                                    reml_max_iter: axes.reml_max_iter,
                                };
                                cell.validate()?;
                                grid.push(cell);
                            }
                        }
                    }
                }
            }
        }
    }
    if u32::try_from(grid.len()).is_err() {
        return Err(Error::config("grid", "more than 2^32 cells"));
    }
    Ok(grid)
}
