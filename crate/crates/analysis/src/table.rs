//! β schedules for error-driven Snowflake⁺: the least β with `p^β < ε`.

use num::{BigRational, One, Signed, ToPrimitive, Zero};

use crate::error::AnalysisError;
use crate::rational::{pow10, ratio};
use crate::tail::{check_probability, tail_at_least};

/// Largest β the scan will report.
pub const MAX_BETA: u32 = 1_000_000;

/// Default tipping fraction: at most this share of correct processors hold
/// the value being erroneously confirmed.
pub fn default_tip() -> BigRational {
    ratio(3, 4)
}

/// Sample size used for the printed table.
pub const TABLE1_K: u64 = 80;

/// Exponents of the three ε columns: `10⁻²²`, `10⁻¹⁴`, `10⁻⁶`.
pub const TABLE1_EPSILON_EXPONENTS: [i32; 3] = [-22, -14, -6];

/// Published β values, one row per α₂, columns in the order of
/// [`TABLE1_EPSILON_EXPONENTS`].
pub const TABLE1_PRINTED: [(u64, [u32; 3]); 16] = [
    (80, [3, 2, 1]),
    (79, [4, 3, 1]),
    (78, [5, 3, 2]),
    (77, [5, 4, 2]),
    (76, [6, 4, 2]),
    (75, [7, 5, 2]),
    (74, [9, 6, 3]),
    (73, [10, 7, 3]),
    (72, [12, 8, 4]),
    (71, [15, 10, 4]),
    (70, [18, 12, 5]),
    (69, [23, 15, 7]),
    (68, [29, 18, 8]),
    (67, [37, 24, 10]),
    (66, [48, 31, 14]),
    (65, [65, 41, 18]),
];

/// Probability that one sample of size `k` contains at least `alpha2`
/// responses for a value held by the Byzantine processors plus the `tip`
/// share of correct processors: `Bin(k, byz + (1 − byz)·tip, ≥ α₂)`.
pub fn confirmation_probability(
    k: u64,
    alpha2: u64,
    byz_fraction: &BigRational,
    tip: &BigRational,
) -> Result<BigRational, AnalysisError> {
    check_probability(byz_fraction)?;
    check_probability(tip)?;
    let x = byz_fraction + (BigRational::one() - byz_fraction) * tip;
    tail_at_least(k, &x, alpha2)
}

/// Least `β ≥ 1` with `p^β < ε` for the default tipping fraction 3/4.
pub fn beta_for(k: u64, alpha2: u64, byz_fraction: &BigRational, epsilon: &BigRational) -> Result<u32, AnalysisError> {
    beta_for_tip(k, alpha2, byz_fraction, &default_tip(), epsilon)
}

/// Least `β ≥ 1` with `p^β < ε` where `p` is [`confirmation_probability`].
pub fn beta_for_tip(
    k: u64,
    alpha2: u64,
    byz_fraction: &BigRational,
    tip: &BigRational,
    epsilon: &BigRational,
) -> Result<u32, AnalysisError> {
    if !epsilon.is_positive() {
        return Err(AnalysisError::NonPositiveTarget(epsilon.to_string()));
    }
    let p = confirmation_probability(k, alpha2, byz_fraction, tip)?;
    least_power_below(&p, epsilon).map_err(|e| match e {
        AnalysisError::NeverTerminates { .. } => AnalysisError::NeverTerminates { alpha2 },
        e => e,
    })
}

/// Least `β ≥ 1` with `p^β < ε`, for `0 ≤ p ≤ 1` and `ε > 0`.
///
/// Linear scan. For large β the scan starts just below a floating-point
/// estimate, after confirming exactly that no smaller β qualifies.
pub fn least_power_below(p: &BigRational, epsilon: &BigRational) -> Result<u32, AnalysisError> {
    if p.is_zero() || p < epsilon {
        return Ok(1);
    }
    if p.is_one() {
        return Err(AnalysisError::NeverTerminates { alpha2: 0 });
    }
    let mut beta = 1u32;
    let estimate = log10(epsilon) / log10(p);
    if estimate.is_finite() && estimate > 64.0 {
        if estimate > MAX_BETA as f64 {
            return Err(AnalysisError::BetaTooLarge { limit: MAX_BETA });
        }
        let start = (estimate as u32).saturating_sub(2).max(1);
        if num::pow(p.clone(), start as usize - 1) >= *epsilon {
            beta = start;
        }
    }
    let mut power = num::pow(p.clone(), beta as usize);
    while power >= *epsilon {
        if beta >= MAX_BETA {
            return Err(AnalysisError::BetaTooLarge { limit: MAX_BETA });
        }
        power *= p;
        beta += 1;
    }
    Ok(beta)
}

/// `log10` of a positive rational, via digit counts so it survives
/// magnitudes outside the `f64` range.
fn log10(q: &BigRational) -> f64 {
    let digits = |n: &num::BigInt| {
        let s = n.to_string();
        let lead: f64 = s[..s.len().min(17)].parse().unwrap_or(1.0);
        lead.log10() + (s.len() - s.len().min(17)) as f64
    };
    let v = digits(q.numer()) - digits(q.denom());
    if v.is_finite() {
        v
    } else {
        q.to_f64().map_or(f64::NAN, f64::log10)
    }
}

/// One cell of the β table.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterRow {
    pub alpha2: u64,
    pub epsilon_exponent: i32,
    pub epsilon: BigRational,
    /// `Bin(80, 4/5, ≥ α₂)`.
    pub probability: BigRational,
    pub beta: u32,
    pub printed: u32,
}

impl ParameterRow {
    pub fn matches(&self) -> bool {
        self.beta == self.printed
    }
}

/// Recomputes all 48 cells (k = 80, Byzantine fraction 1/5, tip 3/4).
pub fn table1() -> Result<Vec<ParameterRow>, AnalysisError> {
    let byz = ratio(1, 5);
    let tip = default_tip();
    let mut rows = Vec::with_capacity(48);
    for (alpha2, printed) in TABLE1_PRINTED {
        let probability = confirmation_probability(TABLE1_K, alpha2, &byz, &tip)?;
        for (col, exponent) in TABLE1_EPSILON_EXPONENTS.into_iter().enumerate() {
            let epsilon = pow10(exponent);
            let beta = least_power_below(&probability, &epsilon)?;
            rows.push(ParameterRow {
                alpha2,
                epsilon_exponent: exponent,
                epsilon,
                probability: probability.clone(),
                beta,
                printed: printed[col],
            });
        }
    }
    Ok(rows)
}
