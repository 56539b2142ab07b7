//! Property tests for Snowflake⁺ transitions, Pref*, sampling and labels.

use std::sync::Arc;

use proptest::prelude::*;
use snowfrost_core::frosty::pref_star;
use snowfrost_core::sampling::{draw_sample, Domain, SampleStream};
use snowfrost_core::snowflake::{RoundSample, Rule, SnowflakeParams, SnowflakeState};
use snowfrost_core::BitString;

fn sample_of(ones: u32, zeros: u32, k: u32) -> RoundSample {
    let mut r = vec![Some(true); ones as usize];
    r.extend(vec![Some(false); zeros as usize]);
    r.extend(vec![None; (k - ones - zeros) as usize]);
    RoundSample { responses: r }
}

fn tally_strategy() -> impl Strategy<Value = (u32, u32)> {
    (0u32..=80).prop_flat_map(|ones| (Just(ones), 0u32..=(80 - ones)))
}

proptest! {
    #[test]
    fn flip_iff_alpha1_opposite(val in any::<bool>(), count in 0u32..12, (ones, zeros) in tally_strategy()) {
        let p = SnowflakeParams::default();
        let mut s = SnowflakeState::init(val, &p).unwrap();
        s.counts[0] = count.min(p.beta - 1);
        let next = s.end_round(&p, &sample_of(ones, zeros, 80)).unwrap();
        let opposite = if val { zeros } else { ones };
        prop_assert_eq!(next.val != val, opposite >= p.alpha1);
        let same = if next.val { ones } else { zeros };
        if same >= p.alpha2 {
            let base = if next.val != val { 0 } else { s.counts[0] };
            prop_assert_eq!(next.counts[0], base + 1);
        } else {
            prop_assert_eq!(next.counts[0], 0);
        }
        // Purity: same input, same output.
        prop_assert_eq!(next, s.end_round(&p, &sample_of(ones, zeros, 80)).unwrap());
    }

    #[test]
    fn decision_only_when_a_rule_reaches_beta(rounds in prop::collection::vec(tally_strategy(), 1..60)) {
        let p = SnowflakeParams {
            rules: vec![Rule { alpha2: 80, beta: 3 }, Rule { alpha2: 72, beta: 12 }],
            ..Default::default()
        };
        let rules = p.effective_rules();
        let mut s = SnowflakeState::init(true, &p).unwrap();
        for (ones, zeros) in rounds {
            if s.decided.is_some() {
                break;
            }
            s = s.end_round(&p, &sample_of(ones, zeros, 80)).unwrap();
            for (c, r) in s.counts.iter().zip(&rules) {
                prop_assert!(*c <= r.beta);
            }
            if let Some(d) = s.decided {
                prop_assert_eq!(d.value, s.val);
                prop_assert!(s.counts[d.rule] >= rules[d.rule].beta);
                prop_assert!(s.counts[..d.rule].iter().zip(&rules).all(|(c, r)| *c < r.beta));
            } else {
                prop_assert!(s.counts.iter().zip(&rules).all(|(c, r)| *c < r.beta));
            }
        }
    }

    #[test]
    fn pref_star_matches_exhaustive_search(votes in prop::collection::vec(prop::collection::vec(any::<bool>(), 0..7), 1..9)) {
        let votes: Vec<BitString> = votes.into_iter().map(BitString::from_bits).collect();
        let refs: Vec<&BitString> = votes.iter().collect();
        let got = pref_star(&refs);
        // Exhaustive: every prefix of every vote, keep the longest one
        // extended by a strict majority.
        let majority = |s: &BitString| 2 * votes.iter().filter(|v| s.is_prefix_of(v)).count() > votes.len();
        let mut best = BitString::new();
        for v in &votes {
            for l in 0..=v.len() {
                let s = v.prefix(l);
                if majority(&s) && s.len() > best.len() {
                    best = s;
                }
            }
        }
        prop_assert_eq!(&got, &best);
        prop_assert!(majority(&got));
        // Maximality: every majority-extended string is a prefix of Pref*.
        for v in &votes {
            for l in 0..=v.len() {
                let s = v.prefix(l);
                if majority(&s) {
                    prop_assert!(s.is_prefix_of(&got));
                }
            }
        }
    }

    #[test]
    fn bitstring_prefix_order(a in prop::collection::vec(any::<bool>(), 0..150), cut in 0usize..150) {
        let s = BitString::from_bits(a.iter().copied());
        let p = s.prefix(cut.min(s.len()));
        prop_assert!(p.is_prefix_of(&s));
        prop_assert!(s.extends(&p));
        prop_assert!(!p.incomparable(&s));
        prop_assert_eq!(s.common_prefix_len(&p), p.len());
        let text = s.to_string();
        prop_assert_eq!(BitString::parse(&text).unwrap(), s);
    }
}

#[test]
fn unanimous_validity_decides_at_beta() {
    let p = SnowflakeParams::default();
    for input in [false, true] {
        let mut s = SnowflakeState::init(input, &p).unwrap();
        let sample = if input {
            sample_of(80, 0, 80)
        } else {
            sample_of(0, 80, 80)
        };
        while s.decided.is_none() {
            s = s.end_round(&p, &sample).unwrap();
        }
        let d = s.decided.unwrap();
        assert_eq!(d.value, input);
        assert_eq!(d.round, 12);
    }
}

#[test]
fn sample_frequencies_are_uniform() {
    // 10^6 draws over 500 indices across many (processor, round) streams:
    // each index count must be within 5 standard deviations of the mean.
    let n = 500u32;
    let k = 80usize;
    let mut counts = vec![0u64; n as usize];
    let mut total = 0u64;
    let mut round = 1;
    while total < 1_000_000 {
        for proc in 0..25 {
            let mut s = SampleStream::new(2024, Domain::Sample, proc, round);
            for i in draw_sample(n, k, &mut s) {
                counts[i as usize] += 1;
                total += 1;
            }
        }
        round += 1;
    }
    let mean = total as f64 / n as f64;
    let sd = (total as f64 * (1.0 / n as f64) * (1.0 - 1.0 / n as f64)).sqrt();
    for (i, c) in counts.iter().enumerate() {
        assert!(((*c as f64) - mean).abs() < 5.0 * sd, "index {i}: {c} vs mean {mean}");
    }
}

#[test]
fn distinct_rounds_give_distinct_sequences() {
    let a = draw_sample(500, 80, &mut SampleStream::new(1, Domain::Sample, 0, 1));
    let b = draw_sample(500, 80, &mut SampleStream::new(1, Domain::Sample, 0, 2));
    assert_ne!(a, b);
    let _ = Arc::new(a);
}
