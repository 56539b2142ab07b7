//! Frosty runs. Round `s` occupies slots `3s, 3s+1, 3s+2`; every message
//! sent at slot `t` is delivered at `t+1`.

use std::collections::VecDeque;
use std::sync::Arc;

use rustc_hash::{FxHashMap, FxHashSet};

use snowfrost_core::frosty::{
    leader, Digest, FinalVia, Fresh, FrostyNode, FrostyParams, Message, Proposal, Stage, Vote,
};
use snowfrost_core::sampling::{fill_sample, Domain, SampleStream};
use snowfrost_core::snowman::Responses;
use snowfrost_core::{BitString, Block, ReportedChain};

use crate::adversary::correct_mask;
use crate::blockgen::BlockGen;
use crate::config::{SimConfig, Strategy};
use crate::error::SimError;
use crate::recorder::Recorder;
use crate::snowman_sim::{block_event, chain_round, longest};
use crate::trace::{Bits, Event, Recipients};

/// Identity of a message's signed content, as written in traces.
pub fn payload_id(msg: &Message) -> String {
    match msg {
        Message::Stuck(m) => format!("{}:{}", m.epoch, Bits::encode(&m.final_value)),
        Message::Ec(c) => format!("{}:{}", c.epoch, Bits::encode(&c.sigma)),
        Message::Start(v) => format!("{}:{}", v.epoch, Bits::encode(&v.pref)),
        Message::Proposal(p) => p.digest_hex(),
        Message::Vote(v) => format!("{}:{}", v.stage.number(), v.proposal.digest_hex()),
        Message::Qc(q) => format!("{}:{}", q.stage.number(), q.proposal.digest_hex()),
        Message::Block(b) => b.id().0.to_string(),
    }
}

struct Envelope {
    to: Recipients,
    msg: Message,
}

/// Authenticated broadcast channels with delay exactly one slot.
#[derive(Default)]
pub struct Network {
    queue: VecDeque<Envelope>,
    emitted: FxHashSet<(u32, &'static str, String)>,
}

impl Network {
    /// Queues `msg` from `relay` for delivery at `t+1`. A payload signed by
    /// a correct processor may only be relayed after that processor sent
    /// it; other attempts are refused and recorded.
    pub fn send(
        &mut self,
        rec: &mut Recorder,
        t: u64,
        relay: u32,
        to: Recipients,
        msg: Message,
        correct: &[bool],
    ) -> bool {
        let kind = msg.kind();
        let payload = payload_id(&msg);
        let signer = msg.signer();
        if let Some(s) = signer {
            let key = (s, kind, payload);
            if s == relay {
                self.emitted.insert(key.clone());
            } else if correct.get(s as usize).copied().unwrap_or(false) && !self.emitted.contains(&key) {
                rec.emit(
                    t,
                    Event::Rejected {
                        relay,
                        reason: format!("{kind} in the name of correct processor {s}"),
                    },
                );
                return false;
            }
            let (_, _, payload) = key;
            rec.emit(t, envelope_event(signer, relay, kind, payload, &to, t));
        } else {
            rec.emit(t, envelope_event(None, relay, kind, payload, &to, t));
        }
        self.queue.push_back(Envelope { to, msg });
        true
    }

    fn take_due(&mut self) -> Vec<Envelope> {
        self.queue.drain(..).collect()
    }
}

fn envelope_event(signer: Option<u32>, relay: u32, kind: &str, payload: String, to: &Recipients, t: u64) -> Event {
    Event::Envelope {
        signer,
        relay,
        kind: kind.to_string(),
        payload,
        to: to.clone(),
        sent: t,
        deliver: t + 1,
    }
}

/// A responder's epoch with the tips of its preference and final.
type Report = (u64, Arc<Block>, Arc<Block>);

fn tip_of(c: &ReportedChain) -> Arc<Block> {
    match c {
        ReportedChain::Tip(b) => b.clone(),
        ReportedChain::Blocks(bs) => bs.last().cloned().expect("non-empty chain"),
    }
}

struct Sim<'a, 'r, 'w> {
    cfg: &'a SimConfig,
    params: FrostyParams,
    n: u32,
    correct: Vec<bool>,
    ids: Vec<u32>,
    even_rank: Vec<u32>,
    odd_rank: Vec<u32>,
    nodes: Vec<FrostyNode>,
    net: Network,
    gen: BlockGen,
    genesis: Arc<Block>,
    blocks_due: Vec<Arc<Block>>,
    rec: &'r mut Recorder<'w>,
    queried: Vec<Option<(u64, Vec<u32>)>>,
    replies: Vec<Option<(u64, Responses, Responses)>>,
    gossiped: FxHashSet<(Digest, u8)>,
    ec_forwarded: FxHashSet<u64>,
    logged_qc: FxHashSet<(Digest, u8)>,
    logged_sc: FxHashSet<u64>,
    logged_ec: FxHashSet<u64>,
    stuck_logged: FxHashSet<(u32, u64)>,
    proposals: FxHashMap<(u64, u64), Vec<Arc<Proposal>>>,
}

impl Sim<'_, '_, '_> {
    fn adversary_active(&self) -> bool {
        self.cfg.adversary.strategy != Strategy::Crash
    }

    fn broadcast(&mut self, t: u64, relay: u32, msg: Message) {
        self.net.send(self.rec, t, relay, Recipients::all(), msg, &self.correct);
    }

    fn deliver(&mut self, t: u64) {
        for b in std::mem::take(&mut self.blocks_due) {
            let m = Message::Block(b);
            for node in &mut self.nodes {
                node.receive(&m);
            }
        }
        let mut gossip: Vec<(u32, Message)> = Vec::new();
        for env in self.net.take_due() {
            let receivers: Vec<u32> = match &env.to {
                Recipients::All(_) => (0..self.n).collect(),
                Recipients::Some(ids) => ids.clone(),
            };
            for r in receivers {
                let fresh = self.nodes[r as usize].receive(&env.msg);
                if !self.correct[r as usize] {
                    continue;
                }
                for item in fresh {
                    match item {
                        Fresh::Proposal(p) => {
                            if p.epoch() % 2 == 1 && self.gossiped.insert((p.digest(), 0)) {
                                gossip.push((r, Message::Proposal(p)));
                            }
                        }
                        Fresh::Qc(q) => {
                            let key = (q.proposal.digest(), q.stage.number());
                            if self.logged_qc.insert(key) {
                                self.rec.emit(
                                    t,
                                    Event::Qc {
                                        round: q.round(),
                                        epoch: q.proposal.epoch(),
                                        stage: q.stage.number(),
                                        digest: q.proposal.digest_hex(),
                                        signers: q.signers.len(),
                                    },
                                );
                            }
                            if self.gossiped.insert(key) {
                                gossip.push((r, Message::Qc(q)));
                            }
                        }
                    }
                }
            }
        }
        for &id in &self.ids {
            let node = &self.nodes[id as usize];
            let e = node.epoch();
            if e % 2 == 0 {
                if let Some(ec) = node.epoch_certificate(e + 1) {
                    if self.logged_ec.insert(e + 1) {
                        let ev = Event::Ec {
                            epoch: ec.epoch,
                            sigma: Bits((*ec.sigma).clone()),
                            signers: ec.signers.len(),
                        };
                        self.rec.emit(t, ev);
                    }
                }
            } else if let Some(sc) = node.starting_certificate(e) {
                if self.logged_sc.insert(e) {
                    let ev = Event::Sc {
                        epoch: e,
                        pref_star: Bits((**sc.pref_star()).clone()),
                        votes: sc.votes().len(),
                    };
                    self.rec.emit(t, ev);
                }
            }
        }
        for (relay, msg) in gossip {
            self.broadcast(t, relay, msg);
        }
    }

    /// Epoch transitions and `Init`, in id order.
    fn step_nodes(&mut self, t: u64) {
        let round = t / 3;
        for id in 0..self.n {
            let is_correct = self.correct[id as usize];
            let node = &mut self.nodes[id as usize];
            if node.is_ready() && node.in_even_epoch() {
                if let Some(ec) = node.try_enter_odd_epoch() {
                    if is_correct {
                        let epoch = node.epoch();
                        self.rec.emit(t, Event::Epoch { proc: id, epoch });
                        if self.ec_forwarded.insert(ec.next_epoch()) {
                            self.broadcast(t, id, Message::Ec(ec));
                        }
                    }
                }
            } else if node.is_ready() {
                let before = node.final_value().clone();
                if let Some(p) = node.try_confirm() {
                    if is_correct {
                        let value = Bits((**p.final_value()).clone());
                        self.rec.emit(
                            t,
                            Event::Confirm {
                                proc: id,
                                epoch: p.epoch(),
                                digest: p.digest_hex(),
                                value: value.clone(),
                            },
                        );
                        if value.0 != before {
                            self.rec.emit(
                                t,
                                Event::Final {
                                    proc: id,
                                    round,
                                    epoch: p.epoch(),
                                    via: FinalVia::Confirmed,
                                    value,
                                },
                            );
                        }
                        let epoch = self.nodes[id as usize].epoch();
                        self.rec.emit(t, Event::Epoch { proc: id, epoch });
                    }
                }
            }
            if let Some(v) = self.nodes[id as usize].prepare() {
                if is_correct {
                    self.broadcast(t, id, Message::Start(v));
                }
            }
        }
    }

    fn longest_final(&self) -> BitString {
        longest(self.ids.iter().map(|&i| self.nodes[i as usize].final_value()))
    }

    fn record_proposal(&mut self, t: u64, p: &Arc<Proposal>) {
        self.rec.emit(
            t,
            Event::Proposal {
                round: p.round(),
                epoch: p.epoch(),
                signer: p.signer(),
                digest: p.digest_hex(),
                parent: p.parent().map(|q| q.digest_hex()),
                qc_prev_round: p.qc_prev_round(),
                value: Bits((**p.final_value()).clone()),
            },
        );
        self.proposals
            .entry((p.epoch(), p.round()))
            .or_default()
            .push(p.clone());
    }

    fn vote(&mut self, t: u64, v: Vote) {
        self.rec.emit(
            t,
            Event::Vote {
                proc: v.signer,
                round: v.proposal.round(),
                epoch: v.proposal.epoch(),
                stage: v.stage.number(),
                digest: v.proposal.digest_hex(),
            },
        );
        let signer = v.signer;
        self.broadcast(t, signer, Message::Vote(v));
    }

    /// Slot `3s`: blocks, queries and the leader's proposal.
    fn phase_query(&mut self, t: u64, s: u64) -> Result<(), SimError> {
        if self.gen.is_tick(s) {
            let f = self.longest_final();
            for b in self.gen.generate(s, &f)? {
                self.rec.emit(t, block_event(&b, None));
                self.blocks_due.push(b);
            }
        }
        let k = self.params.k as usize;
        for &id in &self.ids {
            let node = &self.nodes[id as usize];
            self.queried[id as usize] = if node.in_even_epoch() && node.is_ready() {
                let mut stream = SampleStream::new(self.cfg.seed, Domain::Sample, id, s as u32);
                let mut sample = Vec::with_capacity(k);
                fill_sample(self.n, &mut stream, &mut sample, k);
                Some((node.epoch(), sample))
            } else {
                None
            };
        }
        let l = leader(s, self.n);
        let node = &self.nodes[l as usize];
        if node.in_even_epoch() || !node.is_ready() {
            return Ok(());
        }
        let Some(p1) = node.make_proposal(s) else { return Ok(()) };
        if self.correct[l as usize] {
            self.record_proposal(t, &p1);
            self.broadcast(t, l, Message::Proposal(p1));
        } else if self.adversary_active() {
            // Equivocate: a second proposal whose final carries a fresh
            // block, each shown first to one half of the correct processors.
            let base = self.gen.store().last(p1.final_value());
            let b = self.gen.mint(&base, format!("byz:{s}").into_bytes())?;
            self.rec.emit(t, block_event(&b, Some(l)));
            let p2 = Proposal::new(
                s,
                p1.epoch(),
                None,
                None,
                b.chain_bits().clone(),
                p1.sc().clone(),
                l,
                Some(b),
            );
            self.record_proposal(t, &p1);
            self.record_proposal(t, &p2);
            let (even, odd) = (self.even_rank.clone(), self.odd_rank.clone());
            self.net.send(
                self.rec,
                t,
                l,
                Recipients::Some(even),
                Message::Proposal(p1),
                &self.correct,
            );
            self.net.send(
                self.rec,
                t,
                l,
                Recipients::Some(odd),
                Message::Proposal(p2),
                &self.correct,
            );
        }
        Ok(())
    }

    /// Slot `3s+1`: replies to queries and stage 1 votes.
    fn phase_reply(&mut self, t: u64, s: u64) {
        let g = self.genesis.chain_bits().clone();
        let reports: Vec<Option<Report>> = (0..self.n)
            .map(|j| {
                let node = &self.nodes[j as usize];
                (self.correct[j as usize] && node.in_even_epoch() && node.is_ready()).then(|| {
                    let (p, f) = node.report();
                    (node.epoch(), tip_of(&p), tip_of(&f))
                })
            })
            .collect();
        for &q in &self.ids {
            let Some((e, sample)) = self.queried[q as usize].take() else {
                self.replies[q as usize] = None;
                continue;
            };
            let (mut rp, mut rf) = (Responses::default(), Responses::default());
            let node = &mut self.nodes[q as usize];
            for j in sample {
                match &reports[j as usize] {
                    Some((ej, p, f)) if *ej == e => {
                        node.snowman_mut().store_mut().admit_chain(p);
                        node.snowman_mut().store_mut().admit_chain(f);
                        rp.push(p.chain_bits().clone(), 1);
                        rf.push(f.chain_bits().clone(), 1);
                    }
                    _ => {
                        rp.push(g.clone(), 1);
                        rf.push(g.clone(), 1);
                    }
                }
            }
            self.replies[q as usize] = Some((e, rp, rf));
        }
        let active = self.adversary_active();
        for id in 0..self.n {
            let node = &mut self.nodes[id as usize];
            if node.in_even_epoch() || !node.is_ready() {
                continue;
            }
            if self.correct[id as usize] {
                if let Some(v) = node.stage_one(s).vote {
                    self.vote(t, v);
                }
            } else if active {
                let epoch = node.epoch();
                for p in self.proposals.get(&(epoch, s)).cloned().unwrap_or_default() {
                    self.vote(
                        t,
                        Vote {
                            proposal: p,
                            stage: Stage::One,
                            signer: id,
                        },
                    );
                }
            }
        }
    }

    /// Slot `3s+2`: the even-epoch loop and stage 2.
    fn phase_update(&mut self, t: u64, s: u64) -> Result<(), SimError> {
        let k = self.params.k;
        for idx in 0..self.ids.len() {
            let id = self.ids[idx];
            let node = &mut self.nodes[id as usize];
            if !node.in_even_epoch() || !node.is_ready() {
                continue;
            }
            let epoch = node.epoch();
            let out = match self.replies[id as usize].take() {
                Some((e, rp, rf)) if e == epoch => node.even_round(&rp, &rf)?,
                _ => {
                    let mut g = Responses::default();
                    g.push(self.genesis.chain_bits().clone(), k);
                    let out = node.even_round(&g, &g)?;
                    self.rec.emit(t, Event::LateSample { proc: id, round: s });
                    out
                }
            };
            let node = &self.nodes[id as usize];
            if let Some(via) = out.finalized {
                let ev = Event::Final {
                    proc: id,
                    round: s,
                    epoch,
                    via,
                    value: Bits(node.final_value().clone()),
                };
                self.rec.emit(t, ev);
            }
            if let Some(m) = out.stuck {
                if self.stuck_logged.insert((id, epoch)) {
                    let ev = Event::Stuck {
                        proc: id,
                        epoch,
                        value: Bits((*m.final_value).clone()),
                    };
                    self.rec.emit(t, ev);
                }
                self.broadcast(t, id, Message::Stuck(m));
            }
        }
        let active = self.adversary_active();
        for id in 0..self.n {
            let node = &mut self.nodes[id as usize];
            if node.in_even_epoch() || !node.is_ready() {
                continue;
            }
            if self.correct[id as usize] {
                let epoch = node.epoch();
                let act = node.stage_two();
                if let Some(q) = act.locked {
                    self.rec.emit(
                        t,
                        Event::Lock {
                            proc: id,
                            epoch,
                            round: q.round(),
                        },
                    );
                }
                if let Some(v) = act.vote {
                    self.vote(t, v);
                }
            } else if active {
                let epoch = node.epoch();
                let certified: Vec<_> = self
                    .proposals
                    .get(&(epoch, s))
                    .into_iter()
                    .flatten()
                    .filter(|p| node.qc(&p.digest(), Stage::One).is_some())
                    .cloned()
                    .collect();
                for p in certified {
                    self.vote(
                        t,
                        Vote {
                            proposal: p,
                            stage: Stage::Two,
                            signer: id,
                        },
                    );
                }
            }
        }
        let nodes = &self.nodes;
        chain_round(
            self.rec,
            t,
            s,
            self.ids
                .iter()
                .map(|&i| (nodes[i as usize].final_value(), nodes[i as usize].pref())),
        );
        Ok(())
    }

    fn done(&self) -> bool {
        self.cfg
            .stop_epoch
            .is_some_and(|e| self.ids.iter().all(|&i| self.nodes[i as usize].epoch() >= e))
    }
}

pub(crate) fn run(
    cfg: &SimConfig,
    params: &FrostyParams,
    corrupt: &[u32],
    rec: &mut Recorder,
) -> Result<(u64, bool), SimError> {
    let correct = correct_mask(cfg.n, corrupt);
    let gen = BlockGen::new(cfg.block_gen, cfg.label_width)?;
    let genesis = gen.genesis().clone();
    let nodes = (0..cfg.n)
        .map(|i| FrostyNode::new(i, cfg.n, *params, genesis.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let ids: Vec<u32> = (0..cfg.n).filter(|&i| correct[i as usize]).collect();
    let even_rank = ids.iter().step_by(2).copied().collect();
    let odd_rank = ids.iter().skip(1).step_by(2).copied().collect();
    let mut sim = Sim {
        cfg,
        params: *params,
        n: cfg.n,
        correct,
        ids,
        even_rank,
        odd_rank,
        nodes,
        net: Network::default(),
        gen,
        genesis,
        blocks_due: Vec::new(),
        rec,
        queried: vec![None; cfg.n as usize],
        replies: (0..cfg.n).map(|_| None).collect(),
        gossiped: FxHashSet::default(),
        ec_forwarded: FxHashSet::default(),
        logged_qc: FxHashSet::default(),
        logged_sc: FxHashSet::default(),
        logged_ec: FxHashSet::default(),
        stuck_logged: FxHashSet::default(),
        proposals: FxHashMap::default(),
    };
    let mut last_t = 0;
    for t in 0..cfg.max_timeslots {
        let s = t / 3;
        sim.deliver(t);
        sim.step_nodes(t);
        match t % 3 {
            0 => sim.phase_query(t, s)?,
            1 => sim.phase_reply(t, s),
            _ => sim.phase_update(t, s)?,
        }
        last_t = t;
        if sim.rec.should_halt() {
            return Ok((t, true));
        }
        if sim.done() {
            break;
        }
    }
    Ok((last_t, false))
}
