//! Standard normal helpers and a fixed-precision number formatter.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

fn standard() -> Normal {
    Normal::standard()
}

/// Standard normal quantile, Φ⁻¹(p), for p in (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    standard().inverse_cdf(p)
}

/// Standard normal distribution function Φ(x).
pub fn normal_cdf(x: f64) -> f64 {
    standard().cdf(x)
}

/// Standard normal density φ(x).
pub fn normal_pdf(x: f64) -> f64 {
    standard().pdf(x)
}

/// Formats `x` with 9 significant digits, like C's `%.9g`.
///
/// Fixed notation is used for decimal exponents in [-5, 9), scientific
/// notation otherwise. Trailing zeros are trimmed.
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: i32 = 9;
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

/// Rounds `x` to the value [`fmt_sig`] prints.
pub fn round_sig(x: f64) -> f64 {
    if x.is_finite() {
        fmt_sig(x).parse().unwrap_or(x)
    } else {
        x
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
