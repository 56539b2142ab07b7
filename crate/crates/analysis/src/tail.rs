//! Exact binomial tails `Bin(k, x, ≥ m)` and `Bin(k, x, ≤ m)`.

use std::fmt;

use num::{BigInt, BigRational, One, Signed, Zero};

use crate::error::AnalysisError;
use crate::rational::render;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Sum over `j ∈ [m, k]`.
    AtLeast,
    /// Sum over `j ∈ [0, m]`.
    AtMost,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::AtLeast => "≥",
            Direction::AtMost => "≤",
        })
    }
}

/// Probability that `k` independent trials with success probability `x`
/// produce a number of successes in the range selected by `direction`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TailQuery {
    pub k: u64,
    pub x: BigRational,
    pub m: u64,
    pub direction: Direction,
}

impl TailQuery {
    pub fn at_least(k: u64, x: BigRational, m: u64) -> Self {
        TailQuery {
            k,
            x,
            m,
            direction: Direction::AtLeast,
        }
    }

    pub fn at_most(k: u64, x: BigRational, m: u64) -> Self {
        TailQuery {
            k,
            x,
            m,
            direction: Direction::AtMost,
        }
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        check_probability(&self.x)?;
        if self.m > self.k {
            return Err(AnalysisError::ThresholdOutOfRange { m: self.m, k: self.k });
        }
        Ok(())
    }
}

impl fmt::Display for TailQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Bin({}, {}, {}{})",
            self.k,
            render(&self.x, 12),
            self.direction,
            self.m
        )
    }
}

pub(crate) fn check_probability(x: &BigRational) -> Result<(), AnalysisError> {
    if x.is_negative() || *x > BigRational::one() {
        return Err(AnalysisError::ProbabilityOutOfRange(x.to_string()));
    }
    Ok(())
}

/// Exact value of the tail. Works over the common denominator `d^k` with
/// `x = a/d`, so the only division is the final normalisation.
pub fn binomial_tail(q: &TailQuery) -> Result<BigRational, AnalysisError> {
    q.validate()?;
    let (lo, hi) = match q.direction {
        Direction::AtLeast => (q.m, q.k),
        Direction::AtMost => (0, q.m),
    };
    let a = q.x.numer().clone();
    let d = q.x.denom().clone();
    let b = &d - &a;
    let k = q.k as usize;

    // Powers a^j and b^j for j in 0..=k.
    let powers = |base: &BigInt| {
        let mut v = Vec::with_capacity(k + 1);
        let mut acc = BigInt::one();
        for _ in 0..=k {
            v.push(acc.clone());
            acc *= base;
        }
        v
    };
    let pa = powers(&a);
    let pb = powers(&b);

    let mut coeff = BigInt::one();
    let mut sum = BigInt::zero();
    for j in 0..=q.k {
        if j >= lo && j <= hi {
            sum += &coeff * &pa[j as usize] * &pb[(q.k - j) as usize];
        }
        coeff = coeff * (q.k - j) / (j + 1);
    }
    Ok(BigRational::new(sum, num::pow(d, k)))
}

/// Shorthand for `Bin(k, x, ≥ m)`.
pub fn tail_at_least(k: u64, x: &BigRational, m: u64) -> Result<BigRational, AnalysisError> {
    binomial_tail(&TailQuery::at_least(k, x.clone(), m))
}

/// Shorthand for `Bin(k, x, ≤ m)`.
pub fn tail_at_most(k: u64, x: &BigRational, m: u64) -> Result<BigRational, AnalysisError> {
    binomial_tail(&TailQuery::at_most(k, x.clone(), m))
}

/// Integer threshold for a fractional population threshold: `⌊fraction·n⌋`
/// for `≤`, `⌈fraction·n⌉` for `≥`.
pub fn population_threshold(n: u64, fraction: &BigRational, direction: Direction) -> u64 {
    let t = fraction * BigRational::from_integer(BigInt::from(n));
    let v = match direction {
        Direction::AtMost => t.floor(),
        Direction::AtLeast => t.ceil(),
    };
    v.to_integer().try_into().expect("threshold within [0, n]")
}

/// Tail over a population of `n` independent trials against the fractional
/// threshold `fraction·n`, rounded per [`population_threshold`].
pub fn population_tail(
    n: u64,
    x: &BigRational,
    fraction: &BigRational,
    direction: Direction,
) -> Result<BigRational, AnalysisError> {
    if n == 0 {
        return Err(AnalysisError::EmptyPopulation);
    }
    if fraction.is_negative() || *fraction > BigRational::one() {
        return Err(AnalysisError::FractionOutOfRange(fraction.to_string()));
    }
    let m = population_threshold(n, fraction, direction);
    binomial_tail(&TailQuery {
        k: n,
        x: x.clone(),
        m,
        direction,
    })
}
