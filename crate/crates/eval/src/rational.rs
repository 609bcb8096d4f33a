//! Exact rational ratios with half-up percentage rounding.
//!
//! Reported percentages are computed from the exact numerator/denominator and
//! rounded half-up to one decimal, so published figures reproduce
//! digit-for-digit. Numerators and denominators are retained for audit.

use serde::{Deserialize, Serialize};

use crate::EvalError;

/// An exact ratio in [0, 1] with its rendered percentage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
    /// One-decimal percentage, half-up, e.g. "26.4".
    pub percent: String,
}

impl Ratio {
    pub fn new(numerator: u64, denominator: u64) -> Result<Self, EvalError> {
        if denominator == 0 {
            return Err(EvalError::UndefinedMetric(
                "ratio with zero denominator".into(),
            ));
        }
        debug_assert!(numerator <= denominator, "{numerator}/{denominator}");
        Ok(Ratio {
            numerator,
            denominator,
            percent: format_percent(numerator, denominator),
        })
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}% ({}/{})",
            self.percent, self.numerator, self.denominator
        )
    }
}

/// num/den as a percentage in tenths, rounded half-up. Exact integer
/// arithmetic: floor(num/den * 1000 + 1/2) = floor((2000*num + den) / (2*den)).
pub fn percent_tenths(num: u64, den: u64) -> u64 {
    assert!(den > 0);
    let n = num as u128;
    let d = den as u128;
    ((2000 * n + d) / (2 * d)) as u64
}

/// Format num/den as a one-decimal percentage string, half-up.
pub fn format_percent(num: u64, den: u64) -> String {
    let tenths = percent_tenths(num, den);
    format!("{}.{}", tenths / 10, tenths % 10)
}

/// F1 as an exact rational from precision and recall ratios:
/// 2PR / (P + R) = 2*pn*rn / (pn*rd + rn*pd).
pub fn f1_ratio(precision: &Ratio, recall: &Ratio) -> Result<Ratio, EvalError> {
    let pn = precision.numerator;
    let pd = precision.denominator;
    let rn = recall.numerator;
    let rd = recall.denominator;
    let den = pn
        .checked_mul(rd)
        .and_then(|a| rn.checked_mul(pd).map(|b| a + b))
        .ok_or_else(|| EvalError::UndefinedMetric("f1 overflow".into()))?;
    if den == 0 {
        return Err(EvalError::UndefinedMetric(
            "f1 with zero precision and recall".into(),
        ));
    }
    Ratio::new(2 * pn * rn, den)
}
