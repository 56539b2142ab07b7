//! Binomial tails against brute-force enumeration, plus algebraic
//! properties.

use num::{BigInt, BigRational, One, Zero};
use proptest::prelude::*;
use snowfrost_analysis::rational::ratio;
use snowfrost_analysis::{tail_at_least, tail_at_most};

/// `hist[c]` = number of k-bit outcomes with exactly c ones, by walking
/// every outcome.
fn popcount_histogram(k: u32) -> Vec<u64> {
    let mut hist = vec![0u64; k as usize + 1];
    for mask in 0u64..(1u64 << k) {
        hist[mask.count_ones() as usize] += 1;
    }
    hist
}

/// `Bin(k, x, ≥ m)` for every m, summing the weight `x^c (1−x)^(k−c)` of
/// each enumerated outcome.
fn brute_force_at_least(k: u32, x: &BigRational, hist: &[u64]) -> Vec<BigRational> {
    let y = BigRational::one() - x;
    let weight: Vec<BigRational> = (0..=k)
        .map(|c| num::pow(x.clone(), c as usize) * num::pow(y.clone(), (k - c) as usize))
        .collect();
    let mut out = vec![BigRational::zero(); k as usize + 2];
    for m in (0..=k as usize).rev() {
        out[m] = &out[m + 1] + &weight[m] * BigRational::from_integer(BigInt::from(hist[m]));
    }
    out.truncate(k as usize + 1);
    out
}

#[test]
fn matches_enumeration_up_to_twenty() {
    let xs = [ratio(1, 5), ratio(2, 5), ratio(3, 5), ratio(4, 5)];
    for k in 0..=20u32 {
        let hist = popcount_histogram(k);
        for x in &xs {
            let oracle = brute_force_at_least(k, x, &hist);
            for m in 0..=k {
                let got = tail_at_least(k as u64, x, m as u64).unwrap();
                assert_eq!(got, oracle[m as usize], "k={k} x={x} m={m}");
                let below = tail_at_most(k as u64, x, m as u64).unwrap();
                let oracle_below = BigRational::one() - oracle.get(m as usize + 1).cloned().unwrap_or_default();
                assert_eq!(below, oracle_below, "k={k} x={x} ≤{m}");
            }
        }
    }
}

fn probability() -> impl Strategy<Value = BigRational> {
    (0i64..=1000, 1i64..=1000).prop_map(|(a, b)| ratio(a.min(b), b))
}

proptest! {
    #[test]
    fn complements_sum_to_one(k in 1u64..120, m in 1u64..120, x in probability()) {
        let m = m.min(k);
        let sum = tail_at_least(k, &x, m).unwrap() + tail_at_most(k, &x, m - 1).unwrap();
        prop_assert_eq!(sum, BigRational::one());
    }

    #[test]
    fn nonincreasing_in_threshold(k in 1u64..100, m in 0u64..100, x in probability()) {
        let m = m.min(k - 1);
        prop_assert!(tail_at_least(k, &x, m + 1).unwrap() <= tail_at_least(k, &x, m).unwrap());
    }

    #[test]
    fn nondecreasing_in_probability(k in 1u64..100, m in 0u64..100, x in probability(), y in probability()) {
        let m = m.min(k);
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        prop_assert!(tail_at_least(k, &lo, m).unwrap() <= tail_at_least(k, &hi, m).unwrap());
    }

    #[test]
    fn full_support_is_one(k in 0u64..200, x in probability()) {
        prop_assert_eq!(tail_at_least(k, &x, 0).unwrap(), BigRational::one());
        prop_assert_eq!(tail_at_most(k, &x, k).unwrap(), BigRational::one());
    }
}
