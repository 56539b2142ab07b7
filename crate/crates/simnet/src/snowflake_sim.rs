//! Snowflake⁺ runs: round `r` queries at slot `2(r−1)` and updates at
//! slot `2r`.

use snowfrost_core::sampling::{fill_sample, Domain, SampleStream};
use snowfrost_core::snowflake::{SnowflakeParams, SnowflakeState, Tally};

use crate::adversary::correct_mask;
use crate::binomial::Binomial;
use crate::config::{Inputs, SamplingMode, SimConfig, Strategy};
use crate::error::SimError;
use crate::recorder::Recorder;
use crate::trace::Event;

/// Initial values of the correct processors (`None` for corrupted ids).
pub fn initial_values(cfg: &SimConfig, correct: &[bool]) -> Vec<Option<bool>> {
    let n_correct = correct.iter().filter(|c| **c).count() as u32;
    let mut seen = 0u32;
    correct
        .iter()
        .enumerate()
        .map(|(id, &ok)| {
            if !ok {
                return None;
            }
            let v = match cfg.inputs {
                Inputs::Unanimous { value } => value,
                Inputs::Split { ones } => seen < ones.unwrap_or(n_correct / 2),
                Inputs::Random => SampleStream::new(cfg.seed, Domain::Inputs, id as u32, 0).below(2) == 1,
            };
            seen += 1;
            Some(v)
        })
        .collect()
}

/// The colour corrupted processors report under the split-keeper
/// strategy: the minority among correct processors, 1 on ties.
pub fn minority_colour(ones: u32, zeros: u32) -> bool {
    ones <= zeros
}

/// Response counts for one query, drawn by one of the two samplers.
struct Sampler {
    mode: SamplingMode,
    strategy: Strategy,
    n: u32,
    f: u32,
    k: u32,
    seed: u64,
    idx: Vec<u32>,
    /// Counts mode: per-round tables.
    silent: Binomial,
    main: [Option<Binomial>; 2],
    by_rest: Vec<Option<Binomial>>,
    red_share: f64,
    minority: bool,
    round_stream: Option<SampleStream>,
}

impl Sampler {
    fn new(cfg: &SimConfig, k: u32) -> Self {
        Sampler {
            mode: cfg.sampling,
            strategy: cfg.adversary.strategy,
            n: cfg.n,
            f: cfg.f,
            k,
            seed: cfg.seed,
            idx: Vec::with_capacity(k as usize),
            silent: Binomial::new(k, cfg.f as f64 / cfg.n as f64),
            main: [None, None],
            by_rest: Vec::new(),
            red_share: 0.0,
            minority: true,
            round_stream: None,
        }
    }

    /// Prepares tables for a round in which `ones`/`zeros` correct
    /// processors hold 1/0.
    fn begin_round(&mut self, round: u64, ones: u32, zeros: u32) {
        self.minority = minority_colour(ones, zeros);
        if self.mode == SamplingMode::Indices {
            return;
        }
        let n = self.n as f64;
        let f = self.f as f64;
        let (ones_f, zeros_f) = (ones as f64, zeros as f64);
        self.main = [None, None];
        self.by_rest.clear();
        match self.strategy {
            Strategy::Crash => {
                self.red_share = ones_f / (ones_f + zeros_f);
                self.by_rest = vec![None; self.k as usize + 1];
            }
            Strategy::SplitKeeper => {
                let byz = if self.minority { f } else { 0.0 };
                self.main[1] = Some(Binomial::new(self.k, (ones_f + byz) / n));
            }
            Strategy::OppositeColor => {
                // A querier holding v sees v from exactly the correct
                // processors holding v.
                self.main[0] = Some(Binomial::new(self.k, zeros_f / n));
                self.main[1] = Some(Binomial::new(self.k, ones_f / n));
            }
            Strategy::Equivocator => {
                self.main[1] = Some(Binomial::new(self.k, (ones_f + f / 2.0) / n));
            }
        }
        self.round_stream = Some(SampleStream::new(self.seed, Domain::Scheduler, 0, round as u32));
    }

    fn draw(&mut self, querier: u32, querier_val: bool, round: u64, vals: &[Option<bool>]) -> Tally {
        match self.mode {
            SamplingMode::Indices => self.draw_indices(querier, querier_val, round, vals),
            SamplingMode::Counts => self.draw_counts(querier_val),
        }
    }

    fn draw_indices(&mut self, querier: u32, querier_val: bool, round: u64, vals: &[Option<bool>]) -> Tally {
        let mut s = SampleStream::new(self.seed, Domain::Sample, querier, round as u32);
        fill_sample(self.n, &mut s, &mut self.idx, self.k as usize);
        let mut coin: Option<SampleStream> = None;
        let mut t = Tally::default();
        for &j in &self.idx {
            let answer = match vals[j as usize] {
                Some(v) => Some(v),
                None => match self.strategy {
                    Strategy::Crash => None,
                    Strategy::SplitKeeper => Some(self.minority),
                    Strategy::OppositeColor => Some(!querier_val),
                    Strategy::Equivocator => Some(
                        coin.get_or_insert_with(|| {
                            SampleStream::new(self.seed, Domain::Adversary, querier, round as u32)
                        })
                        .below(2)
                            == 1,
                    ),
                },
            };
            match answer {
                Some(true) => t.ones += 1,
                Some(false) => t.zeros += 1,
                None => t.silent += 1,
            }
        }
        t
    }

    fn draw_counts(&mut self, querier_val: bool) -> Tally {
        let s = self.round_stream.as_mut().expect("begin_round called");
        let k = self.k;
        match self.strategy {
            Strategy::Crash => {
                let silent = self.silent.sample(s.unit());
                let rest = k - silent;
                let share = self.red_share;
                let tab = self.by_rest[rest as usize].get_or_insert_with(|| Binomial::new(rest, share));
                let ones = tab.sample(s.unit());
                Tally {
                    ones,
                    zeros: rest - ones,
                    silent,
                }
            }
            Strategy::OppositeColor => {
                let matching = self.main[querier_val as usize]
                    .as_ref()
                    .expect("table")
                    .sample(s.unit());
                let (ones, zeros) = if querier_val {
                    (matching, k - matching)
                } else {
                    (k - matching, matching)
                };
                Tally { ones, zeros, silent: 0 }
            }
            Strategy::SplitKeeper | Strategy::Equivocator => {
                let ones = self.main[1].as_ref().expect("table").sample(s.unit());
                Tally {
                    ones,
                    zeros: k - ones,
                    silent: 0,
                }
            }
        }
    }
}

/// Runs until every correct processor has decided or the slot budget is
/// spent. Returns the last slot and whether the run halted early.
pub(crate) fn run(
    cfg: &SimConfig,
    params: &SnowflakeParams,
    corrupt: &[u32],
    rec: &mut Recorder,
) -> Result<(u64, bool), SimError> {
    let correct = correct_mask(cfg.n, corrupt);
    let rules = params.effective_rules();
    let mut vals = initial_values(cfg, &correct);
    let mut states: Vec<Option<SnowflakeState>> = vals
        .iter()
        .map(|v| v.map(|v| SnowflakeState::init(v, params)).transpose())
        .collect::<Result<_, _>>()?;
    for (id, v) in vals.iter().enumerate() {
        if let Some(v) = v {
            rec.emit(
                0,
                Event::Input {
                    proc: id as u32,
                    value: *v,
                },
            );
        }
    }
    let mut sampler = Sampler::new(cfg, params.k);
    let mut undecided = states.iter().flatten().count();
    let max_rounds = cfg.max_timeslots / 2;
    let full = rec.full();
    let mut last_t = 0;
    for round in 1..=max_rounds {
        if undecided == 0 {
            break;
        }
        let t = 2 * round;
        let (ones, zeros) = vals
            .iter()
            .flatten()
            .fold((0, 0), |(o, z), v| if *v { (o + 1, z) } else { (o, z + 1) });
        sampler.begin_round(round, ones, zeros);
        for (id, st) in states.iter_mut().enumerate() {
            let Some(st) = st.as_mut() else { continue };
            if st.decided.is_some() {
                continue;
            }
            let tally = sampler.draw(id as u32, st.val, round, &vals);
            let out = st.apply(params, &rules, tally)?;
            let proc = id as u32;
            if full {
                rec.emit(
                    t,
                    Event::Tally {
                        proc,
                        round,
                        ones: tally.ones,
                        zeros: tally.zeros,
                        silent: tally.silent,
                    },
                );
                if out.flipped {
                    rec.emit(
                        t,
                        Event::Flip {
                            proc,
                            round,
                            value: st.val,
                        },
                    );
                }
            }
            if let Some(d) = out.decided {
                undecided -= 1;
                rec.emit(
                    t,
                    Event::Decide {
                        proc,
                        round: d.round,
                        value: d.value,
                        rule: d.rule,
                    },
                );
            }
        }
        for (v, st) in vals.iter_mut().zip(&states) {
            if let (Some(v), Some(st)) = (v.as_mut(), st) {
                *v = st.val;
            }
        }
        let (ones, zeros) = vals
            .iter()
            .flatten()
            .fold((0, 0), |(o, z), v| if *v { (o + 1, z) } else { (o, z + 1) });
        let decided = states.iter().flatten().filter(|s| s.decided.is_some()).count() as u32;
        rec.emit(
            t,
            Event::SnowflakeRound {
                round,
                ones,
                zeros,
                decided,
            },
        );
        last_t = t;
        if rec.should_halt() {
            return Ok((t, true));
        }
    }
    Ok((last_t, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(strategy: Strategy, mode: SamplingMode) -> SimConfig {
        let mut c = SimConfig::from_json(r#"{"protocol": "snowflake", "n": 50, "f": 10, "max_timeslots": 4}"#).unwrap();
        c.adversary.strategy = strategy;
        c.sampling = mode;
        c
    }

    /// Both samplers give the same mean response counts.
    #[test]
    fn samplers_agree_in_mean() {
        let n_correct = 40usize;
        let vals: Vec<Option<bool>> = (0..50).map(|i| if i < 10 { None } else { Some(i % 3 == 0) }).collect();
        let ones = vals.iter().flatten().filter(|v| **v).count() as u32;
        let zeros = n_correct as u32 - ones;
        for strategy in [
            Strategy::Crash,
            Strategy::SplitKeeper,
            Strategy::OppositeColor,
            Strategy::Equivocator,
        ] {
            let mut means = Vec::new();
            for mode in [SamplingMode::Indices, SamplingMode::Counts] {
                let mut s = Sampler::new(&cfg(strategy, mode), 80);
                let (mut o, mut z) = (0u64, 0u64);
                let trials = 4000;
                for r in 0..trials {
                    s.begin_round(r, ones, zeros);
                    let t = s.draw(12, true, r, &vals);
                    assert_eq!(t.total(), 80);
                    o += t.ones as u64;
                    z += t.zeros as u64;
                }
                means.push((o as f64 / trials as f64, z as f64 / trials as f64));
            }
            let (a, b) = (means[0], means[1]);
            assert!(
                (a.0 - b.0).abs() < 0.6 && (a.1 - b.1).abs() < 0.6,
                "{strategy:?}: {a:?} vs {b:?}"
            );
        }
    }

    #[test]
    fn split_inputs_follow_ids() {
        let mut c = cfg(Strategy::Crash, SamplingMode::Indices);
        c.inputs = Inputs::Split { ones: Some(3) };
        let correct: Vec<bool> = (0..50).map(|i| i % 5 != 0).collect();
        let v = initial_values(&c, &correct);
        let ones: Vec<usize> = v
            .iter()
            .enumerate()
            .filter(|(_, x)| **x == Some(true))
            .map(|(i, _)| i)
            .collect();
        assert_eq!(ones, vec![1, 2, 3]);
        assert_eq!(v[0], None);
    }
}
