//! Streaming invariant checks over trace records. The same code path runs
//! during simulation and on replay, so both produce identical verdicts.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use snowfrost_core::frosty::qc_size;
use snowfrost_core::snowflake::Rule;
use snowfrost_core::BitString;

use crate::config::ProtocolParams;
use crate::trace::{Event, Record};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    /// Two correct processors decided different values.
    Agreement,
    /// A processor decided twice.
    DoubleDecision,
    /// With unanimous inputs, a processor decided the other value.
    Validity,
    /// A decision not backed by the recorded tallies.
    DecisionEvidence,
    /// A processor's final value stopped extending its previous one.
    FinalRegressed,
    /// Two correct final values are incomparable.
    FinalsIncomparable,
    /// A confirmed value does not extend a final from an earlier epoch.
    ConfirmDoesNotExtend,
    /// One odd epoch confirmed two different values.
    ConflictingConfirm,
    /// Two conflicting proposals of one round both gathered stage 1 quorums.
    ConflictingQc,
    /// A correct processor voted twice in one stage of one round.
    DuplicateVote,
    /// A correct processor's lock moved to an earlier round within an epoch.
    LockRegressed,
    /// No progress within the stuck window of an even epoch.
    StuckWindow,
    /// An odd epoch outlasted the leader-rotation bound.
    OddEpochTooLong,
    /// Correct traffic delivered outside `[sent, sent + Δ]`.
    LateDelivery,
    /// A correct processor's signed payload relayed before it was sent.
    Forgery,
    /// Trace records out of time order.
    ClockRegressed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub t: u64,
    pub procs: Vec<u32>,
    pub detail: String,
}

/// Counters gathered while checking.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorStats {
    pub records: u64,
    pub decisions: u64,
    pub final_changes: u64,
    pub envelopes: u64,
    pub rejected: u64,
    pub stage1_qcs: u64,
    pub confirmations: u64,
    /// Stuck-window obligations opened, met, and still open at the end.
    pub obligations: u64,
    pub obligations_met: u64,
    pub obligations_inconclusive: u64,
    pub claim3_max_latency: Option<u64>,
    pub odd_epochs_completed: u64,
    pub odd_epochs_unfinished: u64,
    pub odd_epoch_max_duration: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    pub violations: Vec<Violation>,
    pub stats: MonitorStats,
    /// Whether a `finish` record was seen.
    pub complete: bool,
}

impl Verdicts {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

#[derive(Clone, Debug)]
struct Obligation {
    epoch: u64,
    min_len: usize,
    opened: u64,
    deadline: u64,
}

#[derive(Clone, Debug, Default)]
struct OddEpoch {
    entered: u32,
    all_in: Option<u64>,
    left: u32,
    flagged: bool,
}

#[derive(Clone, Debug)]
struct Setup {
    correct: Vec<bool>,
    n_correct: u32,
    delta: u64,
    qc_size: usize,
    stuck_window: Option<u64>,
    odd_window: u64,
    rules: Vec<Rule>,
    alpha1: u32,
}

#[derive(Clone, Debug, Default)]
pub struct Monitor {
    setup: Option<Setup>,
    t: u64,
    violations: Vec<Violation>,
    stats: MonitorStats,
    complete: bool,

    inputs: [u32; 2],
    decisions: Vec<Option<bool>>,
    first_decision: Option<(u32, bool)>,
    tallies: Vec<VecDeque<(u64, u32, u32)>>,
    last_flip: Vec<Option<u64>>,

    finals: Vec<BitString>,
    longest: BitString,
    longest_by_epoch: BTreeMap<u64, BitString>,
    epochs: Vec<u64>,
    confirmed: BTreeMap<u64, BitString>,
    stage1_votes: FxHashMap<(u64, u64), FxHashMap<String, FxHashSet<u32>>>,
    stage1_quorums: FxHashMap<(u64, u64), BTreeSet<String>>,
    votes_cast: FxHashSet<(u32, u64, u64, u8)>,
    locks: Vec<(u64, u64)>,
    obligations: Vec<Obligation>,
    seen_configs: FxHashSet<(u64, usize)>,
    odd: BTreeMap<u64, OddEpoch>,
    emitted: FxHashSet<(u32, String, String)>,
    dirty: bool,
}

impl Monitor {
    pub fn new() -> Self {
        Monitor::default()
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn has_violation(&self) -> bool {
        !self.violations.is_empty()
    }

    pub fn verdicts(&self) -> Verdicts {
        Verdicts {
            violations: self.violations.clone(),
            stats: self.stats.clone(),
            complete: self.complete,
        }
    }

    fn flag(&mut self, kind: ViolationKind, t: u64, procs: Vec<u32>, detail: String) {
        self.violations.push(Violation { kind, t, procs, detail });
    }

    fn is_correct(&self, p: u32) -> bool {
        self.setup
            .as_ref()
            .is_some_and(|s| s.correct.get(p as usize).copied().unwrap_or(false))
    }

    pub fn observe(&mut self, r: &Record) {
        self.stats.records += 1;
        if r.t < self.t {
            self.flag(
                ViolationKind::ClockRegressed,
                r.t,
                vec![],
                format!("record at {} after {}", r.t, self.t),
            );
        } else if r.t > self.t {
            self.close_slot();
            self.expire(r.t);
            self.t = r.t;
        }
        let t = r.t;
        match &r.event {
            Event::RunStart {
                config,
                corrupt,
                genesis,
                ..
            } => self.start(config, corrupt, &genesis.0),
            Event::Input { value, .. } => self.inputs[*value as usize] += 1,
            Event::Tally {
                proc,
                round,
                ones,
                zeros,
                ..
            } => {
                if let Some(q) = self.tallies.get_mut(*proc as usize) {
                    q.push_back((*round, *ones, *zeros));
                    let keep = self
                        .setup
                        .as_ref()
                        .map_or(0, |s| s.rules.iter().map(|r| r.beta).max().unwrap_or(0));
                    while q.len() > keep as usize {
                        q.pop_front();
                    }
                }
            }
            Event::Flip { proc, round, .. } => {
                if let Some(f) = self.last_flip.get_mut(*proc as usize) {
                    *f = Some(*round);
                }
            }
            Event::Decide {
                proc,
                round,
                value,
                rule,
            } => self.decide(t, *proc, *round, *value, *rule),
            Event::Final { proc, epoch, value, .. } => self.final_changed(t, *proc, *epoch, &value.0),
            Event::Epoch { proc, epoch } => self.epoch_changed(t, *proc, *epoch),
            Event::Vote {
                proc,
                round,
                epoch,
                stage,
                digest,
            } => self.vote(t, *proc, *round, *epoch, *stage, digest),
            Event::Qc {
                round,
                epoch,
                stage,
                digest,
                ..
            } => {
                if *stage == 1 {
                    self.stats.stage1_qcs += 1;
                    self.stage1_quorum(t, *epoch, *round, digest);
                }
            }
            Event::Lock { proc, epoch, round } => {
                if let Some(prev) = self.locks.get(*proc as usize).copied() {
                    if prev.0 == *epoch && *round < prev.1 {
                        self.flag(
                            ViolationKind::LockRegressed,
                            t,
                            vec![*proc],
                            format!("epoch {epoch}: lock round {} -> {round}", prev.1),
                        );
                    }
                    self.locks[*proc as usize] = (*epoch, *round);
                }
            }
            Event::Confirm { proc, epoch, value, .. } => self.confirm(t, *proc, *epoch, &value.0),
            Event::Envelope {
                signer,
                relay,
                kind,
                payload,
                sent,
                deliver,
                ..
            } => self.envelope(t, *signer, *relay, kind, payload, *sent, *deliver),
            Event::Rejected { .. } => self.stats.rejected += 1,
            Event::Finish { .. } => self.finish(t),
            _ => {}
        }
    }

    fn start(&mut self, config: &crate::config::SimConfig, corrupt: &[u32], genesis: &BitString) {
        let n = config.n as usize;
        let mut correct = vec![true; n];
        for &c in corrupt {
            if let Some(x) = correct.get_mut(c as usize) {
                *x = false;
            }
        }
        let n_correct = correct.iter().filter(|c| **c).count() as u32;
        let params = config.protocol_params().ok();
        let (rules, alpha1, gamma) = match &params {
            Some(ProtocolParams::Snowflake(p)) => (p.effective_rules(), p.alpha1, None),
            Some(ProtocolParams::Frosty(p)) => (Vec::new(), p.alpha1, Some(p.gamma as u64)),
            Some(ProtocolParams::Snowman(p)) => (Vec::new(), p.alpha1, None),
            None => (Vec::new(), 0, None),
        };
        let delta = config.delta;
        self.setup = Some(Setup {
            correct,
            n_correct,
            delta,
            qc_size: qc_size(config.n) as usize,
            stuck_window: gamma.map(|g| 6 * delta * g),
            odd_window: 3 * delta * (config.f as u64 + 2),
            rules,
            alpha1,
        });
        self.decisions = vec![None; n];
        self.tallies = vec![VecDeque::new(); n];
        self.last_flip = vec![None; n];
        self.finals = vec![genesis.clone(); n];
        self.longest = genesis.clone();
        self.epochs = vec![0; n];
        self.locks = vec![(0, 0); n];
        self.dirty = true;
    }

    fn decide(&mut self, t: u64, proc: u32, round: u64, value: bool, rule: usize) {
        self.stats.decisions += 1;
        let Some(slot) = self.decisions.get_mut(proc as usize) else {
            return;
        };
        if slot.is_some() {
            self.flag(
                ViolationKind::DoubleDecision,
                t,
                vec![proc],
                format!("second decision {value} in round {round}"),
            );
            return;
        }
        *slot = Some(value);
        match self.first_decision {
            None => self.first_decision = Some((proc, value)),
            Some((other, v)) if v != value => {
                self.flag(
                    ViolationKind::Agreement,
                    t,
                    vec![other, proc],
                    format!("decided {v} and {value}"),
                );
            }
            _ => {}
        }
        let correct_total = self.inputs[0] + self.inputs[1];
        if correct_total > 0 && self.inputs[!value as usize] == correct_total {
            self.flag(
                ViolationKind::Validity,
                t,
                vec![proc],
                format!("decided {value} although every input was {}", !value),
            );
        }
        self.check_evidence(t, proc, round, value, rule);
    }

    /// With full traces: the last `β` tallies each had `≥ α₂` matching
    /// responses and the value did not flip after the first of them.
    fn check_evidence(&mut self, t: u64, proc: u32, round: u64, value: bool, rule: usize) {
        let Some(setup) = &self.setup else { return };
        let q = &self.tallies[proc as usize];
        if q.back().map(|x| x.0) != Some(round) {
            return;
        }
        let problem = match setup.rules.get(rule) {
            None => Some(format!("unknown rule {rule}")),
            Some(r) => {
                let window: Vec<_> = q.iter().rev().take(r.beta as usize).collect();
                let consecutive =
                    window.len() == r.beta as usize && window.iter().enumerate().all(|(i, x)| x.0 == round - i as u64);
                let matching = |x: &(u64, u32, u32)| if value { x.1 } else { x.2 };
                if !consecutive {
                    Some(format!("fewer than {} recorded rounds", r.beta))
                } else if let Some(x) = window.iter().find(|x| matching(x) < r.alpha2) {
                    Some(format!("round {} had {} < {} matching", x.0, matching(x), r.alpha2))
                } else if self.last_flip[proc as usize].is_some_and(|f| f + r.beta as u64 > round + 1) {
                    Some("value flipped inside the window".into())
                } else if window.iter().any(|x| (if value { x.2 } else { x.1 }) >= setup.alpha1) {
                    Some("opposite value reached alpha1 inside the window".into())
                } else {
                    None
                }
            }
        };
        if let Some(p) = problem {
            self.flag(ViolationKind::DecisionEvidence, t, vec![proc], p);
        }
    }

    fn final_changed(&mut self, t: u64, proc: u32, epoch: u64, value: &BitString) {
        self.stats.final_changes += 1;
        if !self.is_correct(proc) {
            return;
        }
        self.dirty = true;
        let old = &self.finals[proc as usize];
        if !value.extends(old) {
            self.flag(
                ViolationKind::FinalRegressed,
                t,
                vec![proc],
                format!(
                    "final of length {} replaced by non-extension of length {}",
                    old.len(),
                    value.len()
                ),
            );
        }
        if value.incomparable(&self.longest) {
            let owner = (0..self.finals.len() as u32)
                .find(|&p| self.is_correct(p) && self.finals[p as usize] == self.longest)
                .unwrap_or(proc);
            self.flag(
                ViolationKind::FinalsIncomparable,
                t,
                vec![owner, proc],
                format!("finals of length {} and {} diverge", self.longest.len(), value.len()),
            );
        } else if value.len() > self.longest.len() {
            self.longest = value.clone();
        }
        let slot = self.longest_by_epoch.entry(epoch).or_default();
        if value.len() > slot.len() {
            *slot = value.clone();
        }
        self.finals[proc as usize] = value.clone();
    }

    fn epoch_changed(&mut self, t: u64, proc: u32, epoch: u64) {
        if !self.is_correct(proc) {
            return;
        }
        self.dirty = true;
        let n_correct = self.setup.as_ref().map_or(0, |s| s.n_correct);
        let old = self.epochs[proc as usize];
        self.epochs[proc as usize] = epoch;
        if old % 2 == 1 && epoch > old {
            let e = self.odd.entry(old).or_default();
            e.left += 1;
            if e.left == n_correct {
                if let Some(start) = e.all_in {
                    let d = t - start;
                    self.stats.odd_epochs_completed += 1;
                    self.stats.odd_epoch_max_duration = Some(self.stats.odd_epoch_max_duration.map_or(d, |m| m.max(d)));
                    let window = self.setup.as_ref().map_or(0, |s| s.odd_window);
                    if d > window && !e.flagged {
                        e.flagged = true;
                        self.flag(
                            ViolationKind::OddEpochTooLong,
                            t,
                            vec![],
                            format!("odd epoch {old} took {d} slots, bound {window}"),
                        );
                    }
                }
            }
        }
        if epoch % 2 == 1 {
            let e = self.odd.entry(epoch).or_default();
            e.entered += 1;
            if e.entered == n_correct {
                e.all_in = Some(t);
            }
        }
    }

    fn vote(&mut self, t: u64, proc: u32, round: u64, epoch: u64, stage: u8, digest: &str) {
        if self.is_correct(proc) && !self.votes_cast.insert((proc, epoch, round, stage)) {
            self.flag(
                ViolationKind::DuplicateVote,
                t,
                vec![proc],
                format!("second stage {stage} vote in epoch {epoch} round {round}"),
            );
        }
        if stage != 1 {
            return;
        }
        let need = self.setup.as_ref().map_or(usize::MAX, |s| s.qc_size);
        let signers = self
            .stage1_votes
            .entry((epoch, round))
            .or_default()
            .entry(digest.to_string())
            .or_default();
        if signers.insert(proc) && signers.len() == need {
            self.stage1_quorum(t, epoch, round, digest);
        }
    }

    fn stage1_quorum(&mut self, t: u64, epoch: u64, round: u64, digest: &str) {
        let set = self.stage1_quorums.entry((epoch, round)).or_default();
        if set.insert(digest.to_string()) && set.len() == 2 {
            let ds: Vec<_> = set.iter().map(|d| d[..12.min(d.len())].to_string()).collect();
            self.flag(
                ViolationKind::ConflictingQc,
                t,
                vec![],
                format!("epoch {epoch} round {round}: stage 1 quorums for {}", ds.join(" and ")),
            );
        }
    }

    fn confirm(&mut self, t: u64, proc: u32, epoch: u64, value: &BitString) {
        if !self.is_correct(proc) {
            return;
        }
        self.stats.confirmations += 1;
        match self.confirmed.get(&epoch) {
            Some(v) if v != value => {
                self.flag(
                    ViolationKind::ConflictingConfirm,
                    t,
                    vec![proc],
                    format!(
                        "epoch {epoch} confirmed values of length {} and {}",
                        v.len(),
                        value.len()
                    ),
                );
            }
            Some(_) => {}
            None => {
                self.confirmed.insert(epoch, value.clone());
            }
        }
        let prior = self
            .longest_by_epoch
            .range(..epoch)
            .map(|(_, f)| f)
            .max_by_key(|f| f.len());
        if let Some(f) = prior {
            if !value.extends(f) {
                self.flag(
                    ViolationKind::ConfirmDoesNotExtend,
                    t,
                    vec![proc],
                    format!(
                        "epoch {epoch} confirmed a value not extending an earlier final of length {}",
                        f.len()
                    ),
                );
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn envelope(
        &mut self,
        t: u64,
        signer: Option<u32>,
        relay: u32,
        kind: &str,
        payload: &str,
        sent: u64,
        deliver: u64,
    ) {
        self.stats.envelopes += 1;
        let delta = self.setup.as_ref().map_or(1, |s| s.delta);
        if self.is_correct(relay) && (deliver < sent || deliver > sent + delta || sent != t) {
            self.flag(
                ViolationKind::LateDelivery,
                t,
                vec![relay],
                format!("{kind} sent {sent} delivered {deliver}"),
            );
        }
        if let Some(s) = signer {
            if self.is_correct(s) {
                let key = (s, kind.to_string(), payload.to_string());
                if s == relay {
                    self.emitted.insert(key);
                } else if !self.emitted.contains(&key) {
                    self.flag(
                        ViolationKind::Forgery,
                        t,
                        vec![s, relay],
                        format!("{kind} signed by {s} relayed by {relay} before it was sent"),
                    );
                }
            }
        }
    }

    /// End-of-slot bookkeeping for the Frosty liveness claims.
    fn close_slot(&mut self) {
        let Some(setup) = &self.setup else { return };
        let Some(window) = setup.stuck_window else { return };
        if !self.dirty {
            return;
        }
        self.dirty = false;
        let t = self.t;
        let mut min_epoch = u64::MAX;
        let mut max_epoch = 0;
        let mut min_len = usize::MAX;
        for p in 0..self.finals.len() {
            if setup.correct[p] {
                min_epoch = min_epoch.min(self.epochs[p]);
                max_epoch = max_epoch.max(self.epochs[p]);
                min_len = min_len.min(self.finals[p].len());
            }
        }
        if min_epoch == u64::MAX {
            return;
        }
        let stats = &mut self.stats;
        self.obligations.retain(|o| {
            let met = min_len > o.min_len || min_epoch > o.epoch;
            if met {
                let lat = t - o.opened;
                stats.obligations_met += 1;
                stats.claim3_max_latency = Some(stats.claim3_max_latency.map_or(lat, |m| m.max(lat)));
            }
            !met
        });
        if min_epoch == max_epoch && min_epoch % 2 == 0 && self.seen_configs.insert((min_epoch, min_len)) {
            self.stats.obligations += 1;
            self.obligations.push(Obligation {
                epoch: min_epoch,
                min_len,
                opened: t,
                deadline: t + window,
            });
        }
    }

    /// Flags obligations and odd epochs whose deadlines passed before `next`.
    fn expire(&mut self, next: u64) {
        let mut late = Vec::new();
        self.obligations.retain(|o| {
            if o.deadline < next {
                late.push(o.clone());
                false
            } else {
                true
            }
        });
        for o in late {
            self.flag(
                ViolationKind::StuckWindow,
                o.deadline,
                vec![],
                format!(
                    "even epoch {} with shortest final {} unchanged from {} to {}",
                    o.epoch, o.min_len, o.opened, o.deadline
                ),
            );
        }
        let window = self.setup.as_ref().map_or(u64::MAX, |s| s.odd_window);
        let mut overdue = Vec::new();
        for (e, st) in self.odd.iter_mut() {
            if let Some(start) = st.all_in {
                let n_correct = self.setup.as_ref().map_or(0, |s| s.n_correct);
                if st.left < n_correct && !st.flagged && start + window < next {
                    st.flagged = true;
                    overdue.push((*e, start));
                }
            }
        }
        for (e, start) in overdue {
            self.flag(
                ViolationKind::OddEpochTooLong,
                start + window,
                vec![],
                format!("odd epoch {e} entered by all at {start} still open after {window} slots"),
            );
        }
    }

    fn finish(&mut self, t: u64) {
        self.close_slot();
        self.expire(t + 1);
        self.stats.obligations_inconclusive = self.obligations.len() as u64;
        let n_correct = self.setup.as_ref().map_or(0, |s| s.n_correct);
        self.stats.odd_epochs_unfinished = self
            .odd
            .values()
            .filter(|e| e.entered > 0 && e.left < n_correct && !e.flagged)
            .count() as u64;
        self.complete = true;
    }
}

/// Runs the monitor over a complete trace.
pub fn check(records: &[Record]) -> Verdicts {
    let mut m = Monitor::new();
    for r in records {
        m.observe(r);
    }
    m.verdicts()
}
