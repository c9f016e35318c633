//! Parametric families used to generate arm-level data.
//!
//! Quartiles are computed with linear interpolation between order
//! statistics (the "type 7" rule of most statistical packages): the
//! p-quantile of a sorted sample `x[0..n]` is `x[j] + g·(x[j+1] − x[j])`
//! with `h = (n − 1)·p`, `j = ⌊h⌋`, `g = h − j`.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::stats::normal_cdf;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[serde(alias = "exp")]
    Exponential,
    #[serde(alias = "norm")]
    Normal,
    #[serde(alias = "lnorm")]
    Lognormal,
    Cauchy,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Exponential, Family::Normal, Family::Lognormal, Family::Cauchy];

    pub fn name(self) -> &'static str {
        match self {
            Family::Exponential => "exponential",
            Family::Normal => "normal",
            Family::Lognormal => "lognormal",
            Family::Cauchy => "cauchy",
        }
    }

    /// Number of parameters the family takes.
    pub fn arity(self) -> usize {
        match self {
            Family::Exponential => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential" | "exp" => Ok(Family::Exponential),
            "normal" | "norm" => Ok(Family::Normal),
            "lognormal" | "lnorm" => Ok(Family::Lognormal),
            "cauchy" => Ok(Family::Cauchy),
            other => Err(Error::domain(format!("unknown family `{other}`"))),
        }
    }
}

/// A member of one of the four supported families.
///
/// Variants can be built directly; every operation validates parameters
/// before use, so an out-of-domain spec surfaces as [`Error::Domain`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum DistributionSpec {
    Exponential { rate: f64 },
    Normal { mean: f64, sd: f64 },
    Lognormal { meanlog: f64, sdlog: f64 },
    Cauchy { location: f64, scale: f64 },
}

impl DistributionSpec {
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::Exponential { rate }.validated()
    }

    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        Self::Normal { mean, sd }.validated()
    }

    pub fn lognormal(meanlog: f64, sdlog: f64) -> Result<Self> {
        Self::Lognormal { meanlog, sdlog }.validated()
    }

    pub fn cauchy(location: f64, scale: f64) -> Result<Self> {
        Self::Cauchy { location, scale }.validated()
    }

    /// Builds a spec from a family tag and an ordered parameter list.
    pub fn from_parts(family: Family, params: &[f64]) -> Result<Self> {
        if params.len() != family.arity() {
            return Err(Error::domain(format!(
                "{family} takes {} parameter(s), got {}",
                family.arity(),
                params.len()
            )));
        }
        match family {
            Family::Exponential => Self::exponential(params[0]),
            Family::Normal => Self::normal(params[0], params[1]),
            Family::Lognormal => Self::lognormal(params[0], params[1]),
            Family::Cauchy => Self::cauchy(params[0], params[1]),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Self::Exponential { .. } => Family::Exponential,
            Self::Normal { .. } => Family::Normal,
            Self::Lognormal { .. } => Family::Lognormal,
            Self::Cauchy { .. } => Family::Cauchy,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Self::Exponential { rate } => vec![rate],
            Self::Normal { mean, sd } => vec![mean, sd],
            Self::Lognormal { meanlog, sdlog } => vec![meanlog, sdlog],
            Self::Cauchy { location, scale } => vec![location, scale],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (name, value, location) = match *self {
            Self::Exponential { rate } => ("rate", rate, 0.0),
            Self::Normal { mean, sd } => ("sd", sd, mean),
            Self::Lognormal { meanlog, sdlog } => ("sdlog", sdlog, meanlog),
            Self::Cauchy { location, scale } => ("scale", scale, location),
        };
        if !location.is_finite() {
            return Err(Error::domain(format!(
                "{}: location parameter must be finite, got {location}",
                self.family()
            )));
        }
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::domain(format!(
                "{}: {name} must be finite and > 0, got {value}",
                self.family()
            )));
        }
        Ok(())
    }

    fn validated(self) -> Result<Self> {
        self.validate().map(|_| self)
    }

    /// Density f(x). Points outside the support give 0.
    pub fn density_at(&self, x: f64) -> Result<f64> {
        self.validate()?;
        let d = match *self {
            Self::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
            Self::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
            }
            Self::Lognormal { meanlog, sdlog } => {
                if x <= 0.0 {
                    0.0
                } else {
                    let z = (x.ln() - meanlog) / sdlog;
                    (-0.5 * z * z).exp() / (x * sdlog * (2.0 * PI).sqrt())
                }
            }
            Self::Cauchy { location, scale } => {
                let z = (x - location) / scale;
                1.0 / (PI * scale * (1.0 + z * z))
            }
        };
        Ok(d)
    }

    /// Distribution function F(x), in closed form for each family.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.validate()?;
        let p = match *self {
            Self::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Self::Normal { mean, sd } => normal_cdf((x - mean) / sd),
            Self::Lognormal { meanlog, sdlog } => {
                if x <= 0.0 {
                    0.0
                } else {
                    normal_cdf((x.ln() - meanlog) / sdlog)
                }
            }
            Self::Cauchy { location, scale } => 0.5 + ((x - location) / scale).atan() / PI,
        };
        Ok(p)
    }

    /// Population median ν.
    pub fn median_of(&self) -> Result<f64> {
        self.validate()?;
        Ok(match *self {
            Self::Exponential { rate } => LN_2 / rate,
            Self::Normal { mean, .. } => mean,
            Self::Lognormal { meanlog, .. } => meanlog.exp(),
            Self::Cauchy { location, .. } => location,
        })
    }

    /// Population quartiles `(q1, median, q3)`.
    pub fn quartiles(&self) -> Result<(f64, f64, f64)> {
        self.validate()?;
        let z = crate::stats::normal_quantile(0.75);
        Ok(match *self {
            Self::Exponential { rate } => ((4.0f64 / 3.0).ln() / rate, LN_2 / rate, 4f64.ln() / rate),
            Self::Normal { mean, sd } => (mean - z * sd, mean, mean + z * sd),
            Self::Lognormal { meanlog, sdlog } => {
                ((meanlog - z * sdlog).exp(), meanlog.exp(), (meanlog + z * sdlog).exp())
            }
            Self::Cauchy { location, scale } => (location - scale, location, location + scale),
        })
    }

    /// Draws `n` i.i.d. values. Cauchy draws use the inverse-CDF transform.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        self.validate()?;
        if n == 0 {
            return Err(Error::EmptySample);
        }
        let bad = |e: &dyn fmt::Display| Error::domain(e.to_string());
        let out = match *self {
            Self::Exponential { rate } => {
                let d = Exp::new(rate).map_err(|e| bad(&e))?;
                d.sample_iter(rng).take(n).collect()
            }
            Self::Normal { mean, sd } => {
                let d = Normal::new(mean, sd).map_err(|e| bad(&e))?;
                d.sample_iter(rng).take(n).collect()
            }
            Self::Lognormal { meanlog, sdlog } => {
                let d = LogNormal::new(meanlog, sdlog).map_err(|e| bad(&e))?;
                d.sample_iter(rng).take(n).collect()
            }
            Self::Cauchy { location, scale } => (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    location + scale * (PI * (u - 0.5)).tan()
                })
                .collect(),
        };
        Ok(out)
    }
}

/// Reported per-arm summary: sample size, median and quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl SummaryStats {
    /// Checks `n ≥ 2`, finiteness and `q1 ≤ median ≤ q3`.
    pub fn new(n: usize, median: f64, q1: f64, q3: f64) -> Result<Self> {
        let s = SummaryStats { n, median, q1, q3 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InsufficientData { needed: 2, got: self.n });
        }
        if !(self.median.is_finite() && self.q1.is_finite() && self.q3.is_finite()) {
            return Err(Error::domain("summary statistics must be finite"));
        }
        if !(self.q1 <= self.median && self.median <= self.q3) {
            return Err(Error::domain(format!(
                "quartiles out of order: q1={}, median={}, q3={}",
                self.q1, self.median, self.q3
            )));
        }
        Ok(())
    }
}

/// Type-7 quantile of an ascending, non-empty slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let j = h.floor() as usize;
    let g = h - j as f64;
    match sorted.get(j + 1) {
        Some(&next) if g > 0.0 => sorted[j] + g * (next - sorted[j]),
        _ => sorted[j],
    }
}

/// Sample size, median and quartiles of `sample`.
pub fn summarize(sample: &[f64]) -> Result<SummaryStats> {
    if sample.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: sample.len(),
        });
    }
    if sample.iter().any(|x| x.is_nan()) {
        return Err(Error::domain("sample contains NaN"));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    SummaryStats::new(
        sorted.len(),
        quantile_sorted(&sorted, 0.5),
        quantile_sorted(&sorted, 0.25),
        quantile_sorted(&sorted, 0.75),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use approx::assert_abs_diff_eq;

    #[test]
    fn density_examples() {
        let e1 = DistributionSpec::exponential(1.0).unwrap();
        assert_eq!(e1.density_at(0.0).unwrap(), 1.0);
        let e = DistributionSpec::exponential(0.17328679514).unwrap();
        assert_abs_diff_eq!(e.density_at(4.0).unwrap(), 0.0866434, epsilon = 1e-7);
        let n = DistributionSpec::normal(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(n.density_at(0.0).unwrap(), 0.3989423, epsilon = 1e-7);
    }

    #[test]
    fn density_outside_support_is_zero() {
        let e = DistributionSpec::exponential(2.0).unwrap();
        assert_eq!(e.density_at(-1.0).unwrap(), 0.0);
        let l = DistributionSpec::lognormal(0.0, 1.0).unwrap();
        assert_eq!(l.density_at(0.0).unwrap(), 0.0);
        assert_eq!(l.density_at(-3.0).unwrap(), 0.0);
    }

    #[test]
    fn invalid_parameters_are_domain_errors() {
        assert!(matches!(DistributionSpec::exponential(0.0), Err(Error::Domain(_))));
        assert!(DistributionSpec::normal(0.0, -1.0).is_err());
        assert!(DistributionSpec::cauchy(f64::NAN, 1.0).is_err());
        let raw = DistributionSpec::Lognormal {
            meanlog: 0.0,
            sdlog: 0.0,
        };
        assert!(raw.density_at(1.0).is_err());
        assert!(raw.median_of().is_err());
        assert!(DistributionSpec::from_parts(Family::Normal, &[1.0]).is_err());
        assert!(DistributionSpec::from_parts(Family::Exponential, &[1.0, 2.0]).is_err());
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn median_examples() {
        let m = |d: DistributionSpec| d.median_of().unwrap();
        assert_abs_diff_eq!(
            m(DistributionSpec::exponential(1.0).unwrap()),
            0.6931472,
            epsilon = 1e-7
        );
        assert_abs_diff_eq!(
            m(DistributionSpec::exponential(2.0).unwrap()),
            0.3465736,
            epsilon = 1e-7
        );
        assert_eq!(m(DistributionSpec::normal(3.0, 0.2).unwrap()), 3.0);
    }

    #[test]
    fn sample_examples() {
        let e = DistributionSpec::exponential(3.0).unwrap();
        let xs = e.sample(10, &mut seeded(38)).unwrap();
        assert_eq!(xs.len(), 10);
        assert!(xs.iter().all(|&x| x > 0.0));

        let n = DistributionSpec::normal(3.0, 0.2).unwrap();
        let xs = n.sample(100, &mut seeded(38)).unwrap();
        let mean = xs.iter().sum::<f64>() / 100.0;
        assert!((mean - 3.0).abs() < 0.1);

        for d in [
            e,
            n,
            DistributionSpec::lognormal(0.0, 1.0).unwrap(),
            DistributionSpec::cauchy(0.0, 1.0).unwrap(),
        ] {
            assert_eq!(
                d.sample(5, &mut seeded(1)).unwrap(),
                d.sample(5, &mut seeded(1)).unwrap()
            );
        }
        assert_eq!(e.sample(0, &mut seeded(1)), Err(Error::EmptySample));
    }

    #[test]
    fn summarize_examples() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((s.n, s.median, s.q1, s.q3), (5, 3.0, 2.0, 4.0));
        let s = summarize(&[7.0; 4]).unwrap();
        assert_eq!((s.median, s.q1, s.q3), (7.0, 7.0, 7.0));
        let s = summarize(&[1.0, 2.0]).unwrap();
        assert_eq!(s.median, 1.5);
        assert_eq!(s.q1, 1.25);
        assert_eq!(s.q3, 1.75);
        assert!(matches!(
            summarize(&[1.0]),
            Err(Error::InsufficientData { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn summary_stats_invariants() {
        assert!(SummaryStats::new(1, 1.0, 0.0, 2.0).is_err());
        assert!(SummaryStats::new(5, 3.0, 3.5, 4.0).is_err());
        assert!(SummaryStats::new(5, 3.0, 2.0, 4.0).is_ok());
    }

    #[test]
    fn quartiles_match_cdf() {
        for d in [
            DistributionSpec::exponential(1.7).unwrap(),
            DistributionSpec::normal(-2.0, 0.3).unwrap(),
            DistributionSpec::lognormal(0.4, 0.9).unwrap(),
            DistributionSpec::cauchy(1.0, 2.5).unwrap(),
        ] {
            let (q1, m, q3) = d.quartiles().unwrap();
            assert_abs_diff_eq!(d.cdf(q1).unwrap(), 0.25, epsilon = 1e-12);
            assert_abs_diff_eq!(d.cdf(m).unwrap(), 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(d.cdf(q3).unwrap(), 0.75, epsilon = 1e-12);
        }
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
        assert!("gamma".parse::<Family>().is_err());
    }
}
