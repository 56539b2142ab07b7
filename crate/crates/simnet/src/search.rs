//! Exhaustive check of the odd-epoch quorum rules at `n = 7, f = 1` over
//! every delivery order an equivocating leader can induce.
//!
//! Processor 1 is corrupted and leads round 1 of epoch 1. It signs two
//! proposals `Pa` and `Pb` with different finals and shows each correct
//! processor only `Pa`, only `Pb`, `Pa` then `Pb`, or `Pb` then `Pa`
//! (`4⁶` cases). Its own votes follow one of four policies: none, `Pa`,
//! `Pb`, or both, in round 1, and every proposal in later rounds unless the
//! policy is "none". Rounds 2 and 3 have correct leaders. Each case checks
//! that no round has two stage 1 quorums, that every confirmation in the
//! epoch carries the same final, and that locks never move back.

use std::collections::BTreeSet;
use std::sync::Arc;

use rustc_hash::FxHashMap;

use snowfrost_core::frosty::{
    leader, qc_size, Digest, FrostyNode, FrostyParams, Message, Proposal, Stage, StuckMsg, Vote,
};
use snowfrost_core::{BitString, BlockFactory, LabelCodec};

use crate::error::SimError;

const N: u32 = 7;
const BYZ: u32 = 1;
const ROUNDS: u64 = 3;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SearchReport {
    /// Delivery patterns times vote policies.
    pub cases: u64,
    /// Cases that confirmed a final in round 1.
    pub confirmed_in_first_round: u64,
    /// Cases in which some correct processor had not confirmed after round 3.
    pub unconfirmed: u64,
    pub violations: Vec<String>,
}

struct Base {
    nodes: Vec<FrostyNode>,
    pa: Arc<Proposal>,
    pb: Arc<Proposal>,
}

fn deliver(nodes: &mut [FrostyNode], msg: &Message) {
    for node in nodes.iter_mut() {
        node.receive(msg);
    }
}

/// All processors ready in epoch 1 with a starting certificate, blocks
/// `b1` and `b2` (children of genesis) stored everywhere.
fn setup() -> Result<Base, SimError> {
    let mut factory = BlockFactory::new(LabelCodec::new(4)?);
    let genesis = factory.genesis().clone();
    let b1 = factory.child(&genesis, b"a".to_vec())?;
    let b2 = factory.child(&genesis, b"b".to_vec())?;
    let params = FrostyParams::default();
    let mut nodes = (0..N)
        .map(|i| FrostyNode::new(i, N, params, genesis.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    for node in nodes.iter_mut() {
        node.prepare();
    }
    deliver(&mut nodes, &Message::Block(b1.clone()));
    deliver(&mut nodes, &Message::Block(b2.clone()));
    let g: Arc<BitString> = genesis.chain_bits().clone();
    for signer in [0, 2] {
        let m = Message::Stuck(StuckMsg {
            epoch: 0,
            final_value: g.clone(),
            signer,
        });
        deliver(&mut nodes, &m);
    }
    let mut starts = Vec::new();
    for node in nodes.iter_mut() {
        node.try_enter_odd_epoch()
            .ok_or_else(|| SimError::Invalid("no epoch certificate".into()))?;
        let v = node
            .prepare()
            .ok_or_else(|| SimError::Invalid("no starting vote".into()))?;
        if node.id() != BYZ {
            starts.push(v);
        }
    }
    for v in starts {
        deliver(&mut nodes, &Message::Start(v));
    }
    let sc = nodes[BYZ as usize]
        .starting_certificate(1)
        .cloned()
        .ok_or_else(|| SimError::Invalid("no starting certificate".into()))?;
    let pa = Proposal::new(1, 1, None, None, b1.chain_bits().clone(), sc.clone(), BYZ, Some(b1));
    let pb = Proposal::new(1, 1, None, None, b2.chain_bits().clone(), sc, BYZ, Some(b2));
    Ok(Base { nodes, pa, pb })
}

fn run_case(base: &Base, pattern: u32, policy: u32, report: &mut SearchReport) {
    let correct: Vec<u32> = (0..N).filter(|&i| i != BYZ).collect();
    let mut nodes = base.nodes.clone();
    let mut locks = vec![0u64; N as usize];
    let mut confirmed: Option<(u32, Arc<BitString>)> = None;
    let tag = format!("pattern {pattern:012b} policy {policy}");

    for round in 1..=ROUNDS {
        let mut proposals: Vec<Arc<Proposal>> = Vec::new();
        if round == 1 {
            let mut seen = BTreeSet::new();
            for (i, &c) in correct.iter().enumerate() {
                let order: &[&Arc<Proposal>] = match (pattern >> (2 * i)) & 3 {
                    0 => &[&base.pa],
                    1 => &[&base.pb],
                    2 => &[&base.pa, &base.pb],
                    _ => &[&base.pb, &base.pa],
                };
                for p in order {
                    nodes[c as usize].receive(&Message::Proposal((*p).clone()));
                    seen.insert(p.digest());
                }
            }
            proposals.extend(
                [&base.pa, &base.pb]
                    .into_iter()
                    .filter(|p| seen.contains(&p.digest()))
                    .cloned(),
            );
        } else {
            let l = leader(round, N);
            let node = &nodes[l as usize];
            if !node.in_even_epoch() && node.is_ready() {
                if let Some(p) = node.make_proposal(round) {
                    deliver(&mut nodes, &Message::Proposal(p.clone()));
                    proposals.push(p);
                }
            }
        }

        // Stage 1.
        let mut votes = Vec::new();
        for &c in &correct {
            if let Some(v) = nodes[c as usize].stage_one(round).vote {
                votes.push(v);
            }
        }
        let byz_targets: Vec<Arc<Proposal>> = match (round, policy) {
            (_, 0) => Vec::new(),
            (1, 1) => vec![base.pa.clone()],
            (1, 2) => vec![base.pb.clone()],
            _ => proposals.clone(),
        };
        for p in &byz_targets {
            votes.push(Vote {
                proposal: p.clone(),
                stage: Stage::One,
                signer: BYZ,
            });
        }
        let mut signers: FxHashMap<Digest, BTreeSet<u32>> = FxHashMap::default();
        for v in &votes {
            signers.entry(v.proposal.digest()).or_default().insert(v.signer);
        }
        let quorums = signers.values().filter(|s| s.len() >= qc_size(N) as usize).count();
        if quorums > 1 {
            report
                .violations
                .push(format!("{tag}: round {round} has {quorums} stage 1 quorums"));
        }
        // Correct processors relay what they saw, then the votes land.
        for p in &proposals {
            deliver(&mut nodes, &Message::Proposal(p.clone()));
        }
        for v in votes {
            deliver(&mut nodes, &Message::Vote(v));
        }

        // Stage 2.
        let mut votes = Vec::new();
        for &c in &correct {
            let act = nodes[c as usize].stage_two();
            if let Some(q) = act.locked {
                if q.round() < locks[c as usize] {
                    report.violations.push(format!(
                        "{tag}: processor {c} lock moved from round {} to {}",
                        locks[c as usize],
                        q.round()
                    ));
                }
                locks[c as usize] = q.round();
            }
            if let Some(v) = act.vote {
                votes.push(v);
            }
        }
        if policy != 0 {
            for p in &proposals {
                if nodes[BYZ as usize].qc(&p.digest(), Stage::One).is_some() {
                    votes.push(Vote {
                        proposal: p.clone(),
                        stage: Stage::Two,
                        signer: BYZ,
                    });
                }
            }
        }
        for v in votes {
            deliver(&mut nodes, &Message::Vote(v));
        }

        // Confirmation.
        let mut all = true;
        for &c in &correct {
            let node = &mut nodes[c as usize];
            if node.epoch() == 1 {
                if let Some(p) = node.try_confirm() {
                    let value = p.final_value().clone();
                    match &confirmed {
                        Some((other, v)) if **v != *value => report
                            .violations
                            .push(format!("{tag}: processors {other} and {c} confirmed different finals")),
                        Some(_) => {}
                        None => confirmed = Some((c, value)),
                    }
                    node.prepare();
                } else {
                    all = false;
                }
            }
        }
        if all {
            if round == 1 {
                report.confirmed_in_first_round += 1;
            }
            return;
        }
    }
    report.unconfirmed += 1;
}

/// Runs all `4⁶ · 4` cases.
pub fn brute_force_n7() -> Result<SearchReport, SimError> {
    let base = setup()?;
    let mut report = SearchReport::default();
    let patterns = 1u32 << (2 * (N - 1));
    for pattern in 0..patterns {
        for policy in 0..4 {
            report.cases += 1;
            run_case(&base, pattern, policy, &mut report);
        }
    }
    Ok(report)
}
