//! Parsing and decimal rendering of exact rationals.

use num::bigint::Sign;
use num::{BigInt, BigRational, One, Signed, Zero};

use crate::error::AnalysisError;

/// Default number of significant digits when rendering.
pub const DEFAULT_PRECISION: usize = 30;

/// `10^e` as an exact rational; `e` may be negative.
pub fn pow10(e: i32) -> BigRational {
    let p = num::pow(BigInt::from(10u8), e.unsigned_abs() as usize);
    if e >= 0 {
        BigRational::from_integer(p)
    } else {
        BigRational::new(BigInt::one(), p)
    }
}

/// `n / d` as an exact rational.
pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses an exact rational from a decimal (`0.9555`, `-2`, `1.18e-20`) or a
/// fraction of two decimals (`3/5`, `1/1e6`). Decimals are read exactly, so
/// `0.9555` is `9555/10000`.
pub fn parse_rational(text: &str) -> Result<BigRational, AnalysisError> {
    let s = text.trim();
    let err = || AnalysisError::Parse(text.to_string());
    if let Some((num, den)) = s.split_once('/') {
        let n = parse_decimal(num.trim()).ok_or_else(err)?;
        let d = parse_decimal(den.trim()).ok_or_else(err)?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(n / d);
    }
    parse_decimal(s).ok_or_else(err)
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let (negative, body) = match s.as_bytes().first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], body[i + 1..].parse::<i32>().ok()?),
        None => (body, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(int_part) || !all_digits(frac_part) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let n: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().ok()?
    };
    let scale = exponent.checked_sub(i32::try_from(frac_part.len()).ok()?)?;
    let v = BigRational::from_integer(n) * pow10(scale);
    Some(if negative { -v } else { v })
}

/// Decimal exponent `e` with `10^e ≤ |q| < 10^(e+1)`; `q` must be nonzero.
fn decimal_exponent(q: &BigRational) -> i32 {
    let a = q.abs();
    let guess = a.numer().to_string().len() as i32 - a.denom().to_string().len() as i32;
    if a < pow10(guess) {
        guess - 1
    } else {
        guess
    }
}

/// Renders `q` with `digits` significant digits, truncated toward zero.
/// Magnitudes in `[1e-5, 1e digits)` print positionally (`0.95550…`), others
/// in scientific notation (`1.5808…e-20`). Trailing zeros are dropped.
pub fn render(q: &BigRational, digits: usize) -> String {
    let digits = digits.max(1);
    if q.is_zero() {
        return "0".to_string();
    }
    let sign = if q.numer().sign() == Sign::Minus { "-" } else { "" };
    let e = decimal_exponent(q);
    let scaled = q.abs() * pow10(digits as i32 - 1 - e);
    let mut s = scaled.to_integer().to_string();
    // Truncation can only lose digits at the bottom, never add one on top.
    debug_assert_eq!(s.len(), digits);
    s.truncate(digits);

    let body = if (-5..digits as i32).contains(&e) {
        let (int, frac) = if e >= 0 {
            let cut = (e + 1) as usize;
            (s[..cut].to_string(), s[cut..].to_string())
        } else {
            ("0".to_string(), format!("{}{}", "0".repeat((-e - 1) as usize), s))
        };
        let frac = frac.trim_end_matches('0');
        if frac.is_empty() {
            int
        } else {
            format!("{int}.{frac}")
        }
    } else {
        let (lead, rest) = s.split_at(1);
        let rest = rest.trim_end_matches('0');
        if rest.is_empty() {
            format!("{lead}e{e}")
        } else {
            format!("{lead}.{rest}e{e}")
        }
    };
    format!("{sign}{body}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_exact_decimals() {
        assert_eq!(parse_rational("0.9555").unwrap(), ratio(9555, 10000));
        assert_eq!(parse_rational("3/5").unwrap(), ratio(3, 5));
        assert_eq!(parse_rational("1.18e-20").unwrap(), ratio(118, 100) * pow10(-20));
        assert_eq!(parse_rational("-2").unwrap(), ratio(-2, 1));
        assert_eq!(parse_rational(".5").unwrap(), ratio(1, 2));
        assert_eq!(parse_rational("1/1e6").unwrap(), pow10(-6));
        for bad in ["", "1/0", "abc", "1.2.3", "e5", "1e", "--1"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn renders_truncated() {
        assert_eq!(render(&ratio(2, 3), 5), "0.66666");
        assert_eq!(render(&ratio(9555, 10000), 30), "0.9555");
        assert_eq!(render(&(ratio(159, 100) * pow10(-20)), 30), "1.59e-20");
        assert_eq!(render(&ratio(-1, 8), 2), "-0.12");
        assert_eq!(render(&ratio(12345, 1), 3), "1.23e4");
        assert_eq!(render(&ratio(1, 1), 30), "1");
        assert_eq!(render(&ratio(100, 1), 30), "100");
        assert_eq!(render(&BigRational::zero(), 30), "0");
        assert_eq!(render(&pow10(-5), 10), "0.00001");
        assert_eq!(render(&pow10(-6), 10), "1e-6");
    }

    #[test]
    fn exponent_at_powers_of_ten() {
        for e in -30..30 {
            assert_eq!(decimal_exponent(&pow10(e)), e);
            let just_below = pow10(e) - pow10(e - 40);
            assert_eq!(decimal_exponent(&just_below), e - 1);
        }
    }
}
