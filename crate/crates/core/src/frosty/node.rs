//! Per-processor Frosty state and its slot-driven transitions.

use std::collections::BTreeMap;
use std::sync::Arc;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use super::messages::{
    lock_round, Digest, EpochCertificate, Message, Proposal, QuorumCertificate, SignerSet, Stage, StartVote,
    StartingCertificate, StuckMsg, Vote,
};
use super::{ec_threshold, leader, qc_size, sc_threshold, FrostyParams};
use crate::bits::BitString;
use crate::block::{Block, ReportedChain};
use crate::error::CoreError;
use crate::snowman::{LoopHook, LoopStats, PrefixCounter, Responses, Slot, SnowmanSnapshot, SnowmanState};

/// How a processor's `final` last changed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinalVia {
    /// `count(pref) ≥ β`.
    Beta,
    /// Two consecutive rounds with `≥ α₃` sampled finals.
    Primed,
    /// An odd-epoch proposal was confirmed.
    Confirmed,
}

#[derive(Clone, Debug, Default)]
pub struct EvenRoundOutcome {
    pub stats: LoopStats,
    /// Set when `final` changed this round; the last rule that fired.
    pub finalized: Option<FinalVia>,
    /// The stuck message to broadcast, when `stuckcount ≥ γ`.
    pub stuck: Option<StuckMsg>,
    pub stuckcount: u32,
}

/// Outcome of checking a proposal against the round-`s` voting rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProposalCheck {
    Valid,
    NotMValid,
    WrongRound,
    WrongLeader,
    WrongEpoch,
    MissingBlocks,
}

/// What an odd-epoch step did.
#[derive(Clone, Debug, Default)]
pub struct OddAction {
    pub proposal: Option<Arc<Proposal>>,
    pub vote: Option<Vote>,
    /// The lock set at stage 2.
    pub locked: Option<QuorumCertificate>,
}

/// Items a processor saw for the first time; in odd epochs these are
/// re-sent to everyone.
#[derive(Clone, Debug)]
pub enum Fresh {
    Proposal(Arc<Proposal>),
    Qc(QuorumCertificate),
}

struct PrimedHook<'a> {
    finals: PrefixCounter<'a>,
    alpha3: u32,
    stuckcount: &'a mut u32,
    via: Option<FinalVia>,
}

impl LoopHook for PrimedHook<'_> {
    fn after_count(&mut self, pref: &BitString, slot: &mut Slot, beta_reached: bool, final_: &mut BitString) {
        if beta_reached {
            *self.stuckcount = 0;
            self.via = Some(FinalVia::Beta);
            return;
        }
        let counts = self.finals.next_counts(pref.len());
        for x in [false, true] {
            if counts[x as usize] >= self.alpha3 {
                if slot.primed[x as usize] {
                    *final_ = pref.with_bit(x);
                    *self.stuckcount = 0;
                    self.via = Some(FinalVia::Primed);
                } else {
                    slot.primed[x as usize] = true;
                }
            } else {
                slot.primed[x as usize] = false;
            }
        }
    }

    fn advance(&mut self, pos: usize, bit: bool) {
        self.finals.advance(pos, bit);
    }
}

#[derive(Clone, Debug)]
pub struct FrostyNode {
    id: u32,
    n: u32,
    params: FrostyParams,
    snow: SnowmanState,
    epoch: u64,
    ready: Option<u64>,
    stuckcount: u32,
    lock: Option<QuorumCertificate>,
    current: Option<Arc<Proposal>>,
    stuck: FxHashMap<(u64, Arc<BitString>), SignerSet>,
    ecs: BTreeMap<u64, Arc<EpochCertificate>>,
    start_votes: FxHashMap<u64, (Vec<StartVote>, SignerSet)>,
    scs: FxHashMap<u64, Arc<StartingCertificate>>,
    proposals: FxHashMap<Digest, Arc<Proposal>>,
    by_round: FxHashMap<(u64, u64), Vec<Arc<Proposal>>>,
    votes: FxHashMap<(Digest, Stage), SignerSet>,
    qcs: FxHashMap<(Digest, Stage), QuorumCertificate>,
    best_qc1: FxHashMap<u64, QuorumCertificate>,
    confirmed: FxHashMap<u64, Arc<Proposal>>,
}

impl FrostyNode {
    pub fn new(id: u32, n: u32, params: FrostyParams, genesis: Arc<Block>) -> Result<Self, CoreError> {
        params.validate()?;
        if n < 2 {
            return Err(CoreError::InvalidParams("Frosty needs at least two processors".into()));
        }
        Ok(FrostyNode {
            id,
            n,
            params,
            snow: SnowmanState::new(genesis),
            epoch: 0,
            ready: None,
            stuckcount: 0,
            lock: None,
            current: None,
            stuck: FxHashMap::default(),
            ecs: BTreeMap::new(),
            start_votes: FxHashMap::default(),
            scs: FxHashMap::default(),
            proposals: FxHashMap::default(),
            by_round: FxHashMap::default(),
            votes: FxHashMap::default(),
            qcs: FxHashMap::default(),
            best_qc1: FxHashMap::default(),
            confirmed: FxHashMap::default(),
        })
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn is_ready(&self) -> bool {
        self.ready == Some(self.epoch)
    }

    pub fn in_even_epoch(&self) -> bool {
        self.epoch % 2 == 0
    }

    pub fn snowman(&self) -> &SnowmanState {
        &self.snow
    }

    pub fn snowman_mut(&mut self) -> &mut SnowmanState {
        &mut self.snow
    }

    pub fn final_value(&self) -> &BitString {
        self.snow.final_value()
    }

    pub fn pref(&self) -> &BitString {
        self.snow.pref()
    }

    pub fn stuckcount(&self) -> u32 {
        self.stuckcount
    }

    /// `Q⁺`; `None` is the empty certificate.
    pub fn lock(&self) -> Option<&QuorumCertificate> {
        self.lock.as_ref()
    }

    pub fn lock_round(&self) -> u64 {
        lock_round(&self.lock)
    }

    pub fn current_proposal(&self) -> Option<&Arc<Proposal>> {
        self.current.as_ref()
    }

    pub fn starting_certificate(&self, epoch: u64) -> Option<&Arc<StartingCertificate>> {
        self.scs.get(&epoch)
    }

    pub fn epoch_certificate(&self, next_epoch: u64) -> Option<&Arc<EpochCertificate>> {
        self.ecs.get(&next_epoch)
    }

    pub fn qc(&self, proposal: &Digest, stage: Stage) -> Option<&QuorumCertificate> {
        self.qcs.get(&(*proposal, stage))
    }

    /// Runs the "at every t, if not ready" step. Even epochs run `Init`;
    /// odd epochs reset the lock and return the starting vote to broadcast.
    pub fn prepare(&mut self) -> Option<StartVote> {
        if self.is_ready() {
            return None;
        }
        self.ready = Some(self.epoch);
        if self.in_even_epoch() {
            let f = self.snow.final_value().clone();
            self.snow.set_pref(f);
            self.snow.clear_slots();
            self.stuckcount = 0;
            None
        } else {
            self.lock = None;
            self.current = None;
            Some(StartVote {
                epoch: self.epoch,
                pref: Arc::new(self.snow.pref().clone()),
                signer: self.id,
            })
        }
    }

    /// Even epochs: if an epoch certificate for `e+1` is known, enter
    /// `e+1` and return the certificate to forward.
    pub fn try_enter_odd_epoch(&mut self) -> Option<Arc<EpochCertificate>> {
        if !self.in_even_epoch() || !self.is_ready() {
            return None;
        }
        let ec = self.ecs.get(&(self.epoch + 1))?.clone();
        self.epoch += 1;
        Some(ec)
    }

    /// Odd epochs: if some proposal of the current epoch is confirmed,
    /// adopt its final value and enter the next epoch.
    pub fn try_confirm(&mut self) -> Option<Arc<Proposal>> {
        if self.in_even_epoch() || !self.is_ready() {
            return None;
        }
        let p = self.confirmed.get(&self.epoch)?.clone();
        self.snow.set_final((**p.final_value()).clone());
        self.epoch += 1;
        Some(p)
    }

    /// `confirmed_final(M, e)`.
    pub fn confirmed_final(&self, epoch: u64) -> Option<&Arc<BitString>> {
        self.confirmed.get(&epoch).map(|p| p.final_value())
    }

    /// `(chain(pref), chain(final))` as reported to a querier.
    pub fn report(&self) -> (ReportedChain, ReportedChain) {
        (self.snow.report_preference(), self.snow.report_final())
    }

    /// One even-epoch round, given the recorded `rpref` and `final`
    /// strings of the sample.
    pub fn even_round(&mut self, rpref: &Responses, finals: &Responses) -> Result<EvenRoundOutcome, CoreError> {
        if !self.in_even_epoch() {
            return Err(CoreError::WrongEpochParity {
                expected: "even",
                epoch: self.epoch,
            });
        }
        if !self.is_ready() {
            return Err(CoreError::NotReady(self.epoch));
        }
        for r in [rpref, finals] {
            if r.total() != self.params.k {
                return Err(CoreError::WrongSampleLength {
                    expected: self.params.k as usize,
                    got: r.total() as usize,
                });
            }
        }
        let last_final = self.snow.store().last(self.snow.final_value());
        if !self.snow.store().children(last_final.id()).is_empty() {
            self.stuckcount += 1;
        }
        let start = self.snow.final_value().clone();
        let mut hook = PrimedHook {
            finals: PrefixCounter::new(finals, &start),
            alpha3: self.params.alpha3,
            stuckcount: &mut self.stuckcount,
            via: None,
        };
        let stats = self.snow.run_loop(&self.params.snowman(), rpref, &mut hook);
        let finalized = if stats.final_changed { hook.via } else { None };
        let stuck = (self.stuckcount >= self.params.gamma).then(|| StuckMsg {
            epoch: self.epoch,
            final_value: Arc::new(self.snow.final_value().clone()),
            signer: self.id,
        });
        Ok(EvenRoundOutcome {
            stats,
            finalized,
            stuck,
            stuckcount: self.stuckcount,
        })
    }

    /// `MakeProposal` for round `s`; the caller checks leadership.
    pub fn make_proposal(&self, round: u64) -> Option<Arc<Proposal>> {
        if self.in_even_epoch() || !self.is_ready() {
            return None;
        }
        let sc = self.scs.get(&self.epoch)?;
        let (parent, qc_prev, final_value, sc) = match self.best_qc1.get(&self.epoch) {
            Some(q) => (
                Some(q.proposal.clone()),
                Some(q.clone()),
                q.proposal.final_value().clone(),
                q.proposal.sc().clone(),
            ),
            None => {
                let chain = self.proposable_chain(sc.pref_star())?;
                (None, None, chain.chain_bits().clone(), sc.clone())
            }
        };
        let tip = self.snow.store().last(&final_value);
        Some(Proposal::new(
            round,
            self.epoch,
            parent,
            qc_prev,
            final_value,
            sc,
            self.id,
            Some(tip),
        ))
    }

    /// A stored chain whose hash extends `base`: the local preferred chain
    /// if it qualifies, otherwise the shallowest qualifying stored chain.
    fn proposable_chain(&self, base: &BitString) -> Option<Arc<Block>> {
        let store = self.snow.store();
        let own = store.last(self.snow.pref());
        if own.chain_bits().extends(base) {
            return Some(own);
        }
        store
            .extending(base)
            .min_by_key(|b| (b.height(), store.seq(b.id())))
            .cloned()
    }

    /// Whether `p` is an `M`-valid proposal for round `s` in the current
    /// epoch.
    pub fn check_proposal_for_round(&self, p: &Proposal, round: u64) -> ProposalCheck {
        if !p.is_valid(self.n) {
            return ProposalCheck::NotMValid;
        }
        if p.round() != round {
            return ProposalCheck::WrongRound;
        }
        if p.signer() != leader(round, self.n) {
            return ProposalCheck::WrongLeader;
        }
        if p.epoch() != self.epoch {
            return ProposalCheck::WrongEpoch;
        }
        if !self.snow.store().is_stored_chain(p.final_value()) {
            return ProposalCheck::MissingBlocks;
        }
        ProposalCheck::Valid
    }

    pub fn validate_proposal_for_round(&self, p: &Proposal, round: u64) -> bool {
        self.check_proposal_for_round(p, round) == ProposalCheck::Valid
    }

    /// The slot-`3s+Δ` step: pick the first valid proposal for round `s`
    /// and cast a stage 1 vote if the lock allows it.
    pub fn stage_one(&mut self, round: u64) -> OddAction {
        let mut out = OddAction::default();
        if self.in_even_epoch() || !self.is_ready() {
            return out;
        }
        self.current = None;
        let first = self
            .by_round
            .get(&(self.epoch, round))
            .and_then(|ps| ps.iter().find(|p| self.validate_proposal_for_round(p, round)))
            .cloned();
        if let Some(p) = first {
            if p.qc_prev_round() >= self.lock_round() {
                out.vote = Some(Vote {
                    proposal: p.clone(),
                    stage: Stage::One,
                    signer: self.id,
                });
                self.current = Some(p);
            }
        }
        out
    }

    /// The slot-`3s+2Δ` step: lock on the first stage 1 QC for the voted
    /// proposal and cast a stage 2 vote.
    pub fn stage_two(&mut self) -> OddAction {
        let mut out = OddAction::default();
        if self.in_even_epoch() || !self.is_ready() {
            return out;
        }
        let Some(p) = self.current.clone() else {
            return out;
        };
        if let Some(q) = self.qcs.get(&(p.digest(), Stage::One)).cloned() {
            self.lock = Some(q.clone());
            out.locked = Some(q);
            out.vote = Some(Vote {
                proposal: p,
                stage: Stage::Two,
                signer: self.id,
            });
        }
        out
    }

    /// Adds a message to `M`. Returns items seen for the first time.
    pub fn receive(&mut self, msg: &Message) -> Vec<Fresh> {
        let mut fresh = Vec::new();
        match msg {
            Message::Stuck(m) => self.ingest_stuck(m),
            Message::Ec(c) => {
                if !self.ecs.contains_key(&c.next_epoch()) && c.validate(self.n).is_ok() {
                    self.ecs.insert(c.next_epoch(), c.clone());
                }
            }
            Message::Start(v) => self.ingest_start(v),
            Message::Proposal(p) => self.ingest_proposal(p, &mut fresh),
            Message::Vote(v) => self.ingest_vote(v, &mut fresh),
            Message::Qc(q) => self.ingest_qc(q, &mut fresh),
            Message::Block(b) => {
                self.snow.store_mut().admit(b);
            }
        }
        fresh
    }

    fn ingest_stuck(&mut self, m: &StuckMsg) {
        if self.ecs.contains_key(&(m.epoch + 1)) {
            return;
        }
        let set = self.stuck.entry((m.epoch, m.final_value.clone())).or_default();
        if set.insert(m.signer) && set.len() as u32 >= ec_threshold(self.n) {
            let ec = EpochCertificate {
                epoch: m.epoch,
                sigma: m.final_value.clone(),
                signers: set.members().into(),
            };
            self.ecs.insert(m.epoch + 1, Arc::new(ec));
            self.stuck.retain(|(e, _), _| *e != m.epoch);
        }
    }

    fn ingest_start(&mut self, v: &StartVote) {
        if self.scs.contains_key(&v.epoch) {
            return;
        }
        let (votes, set) = self.start_votes.entry(v.epoch).or_default();
        if set.insert(v.signer) {
            votes.push(v.clone());
            if set.len() as u32 >= sc_threshold(self.n) {
                let sc = StartingCertificate::new(v.epoch, std::mem::take(votes));
                self.scs.insert(v.epoch, Arc::new(sc));
                self.start_votes.remove(&v.epoch);
            }
        }
    }

    fn ingest_proposal(&mut self, p: &Arc<Proposal>, fresh: &mut Vec<Fresh>) {
        if self.proposals.contains_key(&p.digest()) {
            return;
        }
        self.proposals.insert(p.digest(), p.clone());
        self.by_round.entry((p.epoch(), p.round())).or_default().push(p.clone());
        if let Some(tip) = p.tip() {
            self.snow.store_mut().admit_chain(tip);
        }
        if !self.scs.contains_key(&p.epoch()) && p.sc().epoch() == p.epoch() && p.sc().validate(self.n).is_ok() {
            self.scs.insert(p.epoch(), p.sc().clone());
        }
        if let Some(parent) = p.parent() {
            let parent = parent.clone();
            self.ingest_proposal(&parent, fresh);
        }
        if let Some(q) = p.qc_prev() {
            let q = q.clone();
            self.ingest_qc(&q, fresh);
        }
        fresh.push(Fresh::Proposal(p.clone()));
    }

    fn ingest_vote(&mut self, v: &Vote, fresh: &mut Vec<Fresh>) {
        self.ingest_proposal(&v.proposal, fresh);
        let key = (v.proposal.digest(), v.stage);
        if self.qcs.contains_key(&key) || v.signer >= self.n {
            return;
        }
        let set = self.votes.entry(key).or_default();
        if set.insert(v.signer) && set.len() as u32 == qc_size(self.n) {
            let q = QuorumCertificate {
                proposal: v.proposal.clone(),
                stage: v.stage,
                signers: set.members().into(),
            };
            self.votes.remove(&key);
            self.ingest_qc(&q, fresh);
        }
    }

    fn ingest_qc(&mut self, q: &QuorumCertificate, fresh: &mut Vec<Fresh>) {
        let key = (q.proposal.digest(), q.stage);
        if self.qcs.contains_key(&key) || q.validate(self.n).is_err() {
            return;
        }
        self.qcs.insert(key, q.clone());
        self.votes.remove(&key);
        self.ingest_proposal(&q.proposal, fresh);
        let p = &q.proposal;
        if p.is_valid(self.n) {
            match q.stage {
                Stage::One => {
                    let better = self.best_qc1.get(&p.epoch()).is_none_or(|b| b.round() < p.round());
                    if better {
                        self.best_qc1.insert(p.epoch(), q.clone());
                    }
                }
                Stage::Two => {
                    self.confirmed.entry(p.epoch()).or_insert_with(|| p.clone());
                }
            }
        }
        fresh.push(Fresh::Qc(q.clone()));
    }

    pub fn snapshot(&self) -> FrostySnapshot {
        FrostySnapshot {
            id: self.id,
            epoch: self.epoch,
            ready: self.is_ready(),
            stuckcount: self.stuckcount,
            lock_round: self.lock_round(),
            snowman: self.snow.snapshot(),
        }
    }
}

/// Stable JSON shape of a Frosty processor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrostySnapshot {
    pub id: u32,
    pub epoch: u64,
    pub ready: bool,
    pub stuckcount: u32,
    pub lock_round: u64,
    pub snowman: SnowmanSnapshot,
}
