//! Snowflake⁺ binary agreement, with optional multi-rule (error-driven)
//! termination.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// One termination rule: decide after `beta` consecutive rounds with at
/// least `alpha2` responses matching the current value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub alpha2: u32,
    pub beta: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnowflakeParams {
    pub k: u32,
    pub alpha1: u32,
    pub alpha2: u32,
    pub beta: u32,
    /// Error-driven mode: when non-empty these rules replace `(alpha2, beta)`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rules: Vec<Rule>,
}

impl Default for SnowflakeParams {
    /// `k=80, α₁=41, α₂=72, β=12`.
    fn default() -> Self {
        SnowflakeParams {
            k: 80,
            alpha1: 41,
            alpha2: 72,
            beta: 12,
            rules: Vec::new(),
        }
    }
}

impl SnowflakeParams {
    pub fn validate(&self) -> Result<(), CoreError> {
        let bad = |m: String| Err(CoreError::InvalidParams(m));
        if self.k == 0 {
            return bad("k must be positive".into());
        }
        if 2 * self.alpha1 <= self.k {
            return bad(format!("alpha1={} must exceed k/2 (k={})", self.alpha1, self.k));
        }
        if self.alpha1 > self.k {
            return bad(format!("alpha1={} exceeds k={}", self.alpha1, self.k));
        }
        if self.alpha2 < self.alpha1 {
            return bad(format!("alpha2={} is below alpha1={}", self.alpha2, self.alpha1));
        }
        if self.alpha2 > self.k {
            return bad(format!("alpha2={} exceeds k={}", self.alpha2, self.k));
        }
        if self.beta == 0 {
            return bad("beta must be at least 1".into());
        }
        for (i, r) in self.rules.iter().enumerate() {
            if r.alpha2 > self.k || r.alpha2 == 0 {
                return bad(format!("rule {i}: alpha2={} outside 1..=k", r.alpha2));
            }
            if r.beta == 0 {
                return bad(format!("rule {i}: beta must be at least 1"));
            }
        }
        Ok(())
    }

    /// The termination rules in force.
    pub fn effective_rules(&self) -> Vec<Rule> {
        if self.rules.is_empty() {
            vec![Rule {
                alpha2: self.alpha2,
                beta: self.beta,
            }]
        } else {
            self.rules.clone()
        }
    }
}

/// The responses recorded in one round, in sample order; `None` is ⊥.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundSample {
    pub responses: Vec<Option<bool>>,
}

impl RoundSample {
    pub fn tally(&self) -> Tally {
        let mut t = Tally::default();
        for r in &self.responses {
            match r {
                Some(true) => t.ones += 1,
                Some(false) => t.zeros += 1,
                None => t.silent += 1,
            }
        }
        t
    }
}

/// Response counts for one round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub ones: u32,
    pub zeros: u32,
    pub silent: u32,
}

impl Tally {
    pub fn total(&self) -> u32 {
        self.ones + self.zeros + self.silent
    }

    pub fn matching(&self, bit: bool) -> u32 {
        if bit {
            self.ones
        } else {
            self.zeros
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub value: bool,
    /// Index into the effective rule list.
    pub rule: usize,
    /// Round (1-based) in which the decision was taken.
    pub round: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnowflakeState {
    pub val: bool,
    /// One counter per effective rule.
    pub counts: Vec<u32>,
    /// Completed rounds.
    pub round: u64,
    pub decided: Option<Decision>,
}

/// What happened in one `end_round`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RoundOutcome {
    pub flipped: bool,
    pub decided: Option<Decision>,
}

impl SnowflakeState {
    /// Fresh state with `val = input` and zeroed counters.
    pub fn init(input: bool, params: &SnowflakeParams) -> Result<Self, CoreError> {
        params.validate()?;
        Ok(SnowflakeState {
            val: input,
            counts: vec![0; params.effective_rules().len()],
            round: 0,
            decided: None,
        })
    }

    /// The value reported to a querier.
    #[inline]
    pub fn answer_query(&self) -> bool {
        self.val
    }

    /// Pure round transition.
    pub fn end_round(&self, params: &SnowflakeParams, sample: &RoundSample) -> Result<Self, CoreError> {
        if sample.responses.len() != params.k as usize {
            return Err(CoreError::WrongSampleLength {
                expected: params.k as usize,
                got: sample.responses.len(),
            });
        }
        let mut next = self.clone();
        next.apply(params, &params.effective_rules(), sample.tally())?;
        Ok(next)
    }

    /// In-place round transition from response counts. `rules` must be
    /// `params.effective_rules()`.
    #[inline]
    pub fn apply(&mut self, params: &SnowflakeParams, rules: &[Rule], tally: Tally) -> Result<RoundOutcome, CoreError> {
        if self.decided.is_some() {
            return Err(CoreError::AlreadyDecided);
        }
        if tally.total() != params.k {
            return Err(CoreError::WrongSampleLength {
                expected: params.k as usize,
                got: tally.total() as usize,
            });
        }
        let mut out = RoundOutcome::default();
        self.round += 1;
        if tally.matching(!self.val) >= params.alpha1 {
            self.val = !self.val;
            self.counts.iter_mut().for_each(|c| *c = 0);
            out.flipped = true;
        }
        let same = tally.matching(self.val);
        for (c, r) in self.counts.iter_mut().zip(rules) {
            if same < r.alpha2 {
                *c = 0;
            } else {
                *c += 1;
            }
        }
        if let Some(idx) = self.counts.iter().zip(rules).position(|(c, r)| *c >= r.beta) {
            let d = Decision {
                value: self.val,
                rule: idx,
                round: self.round,
            };
            self.decided = Some(d);
            out.decided = Some(d);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(ones: usize, zeros: usize, silent: usize) -> RoundSample {
        let mut r = vec![Some(true); ones];
        r.extend(vec![Some(false); zeros]);
        r.extend(vec![None; silent]);
        RoundSample { responses: r }
    }

    #[test]
    fn init_zeroes_counters() {
        let p = SnowflakeParams::default();
        let s = SnowflakeState::init(true, &p).unwrap();
        assert!(s.val);
        assert_eq!(s.counts, vec![0]);
        let p2 = SnowflakeParams {
            rules: vec![Rule { alpha2: 80, beta: 3 }, Rule { alpha2: 72, beta: 12 }],
            ..p
        };
        assert_eq!(SnowflakeState::init(true, &p2).unwrap().counts, vec![0, 0]);
        assert!(!SnowflakeState::init(false, &p2).unwrap().val);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = SnowflakeParams {
            alpha1: 40,
            ..Default::default()
        };
        assert!(SnowflakeState::init(true, &p).is_err());
        let p = SnowflakeParams {
            alpha2: 30,
            ..Default::default()
        };
        assert!(SnowflakeState::init(true, &p).is_err());
    }

    #[test]
    fn flip_then_count_for_new_value() {
        let p = SnowflakeParams::default();
        let s = SnowflakeState::init(false, &p).unwrap();
        let s = s.end_round(&p, &sample(41, 39, 0)).unwrap();
        assert!(s.val);
        assert_eq!(s.counts, vec![0]);
        let s = s.end_round(&p, &sample(72, 8, 0)).unwrap();
        assert_eq!(s.counts, vec![1]);
    }

    #[test]
    fn twelfth_confident_round_decides() {
        let p = SnowflakeParams::default();
        let mut s = SnowflakeState::init(true, &p).unwrap();
        s.counts[0] = 11;
        let s = s.end_round(&p, &sample(72, 8, 0)).unwrap();
        assert_eq!(s.counts, vec![12]);
        assert_eq!(s.decided.map(|d| d.value), Some(true));
    }

    #[test]
    fn silent_responses_count_for_neither() {
        let p = SnowflakeParams::default();
        let mut s = SnowflakeState::init(true, &p).unwrap();
        s.counts[0] = 5;
        let s = s.end_round(&p, &sample(71, 0, 9)).unwrap();
        assert!(s.val);
        assert_eq!(s.counts, vec![0]);
    }

    #[test]
    fn unanimous_rule_80_3() {
        let p = SnowflakeParams {
            rules: vec![Rule { alpha2: 80, beta: 3 }],
            ..Default::default()
        };
        let mut s = SnowflakeState::init(false, &p).unwrap();
        for _ in 0..3 {
            s = s.end_round(&p, &sample(0, 80, 0)).unwrap();
        }
        let d = s.decided.unwrap();
        assert!(!d.value);
        assert_eq!(d.round, 3);
    }

    #[test]
    fn wrong_length_rejected() {
        let p = SnowflakeParams::default();
        let s = SnowflakeState::init(true, &p).unwrap();
        assert!(matches!(
            s.end_round(&p, &sample(10, 0, 0)),
            Err(CoreError::WrongSampleLength { .. })
        ));
    }
}
