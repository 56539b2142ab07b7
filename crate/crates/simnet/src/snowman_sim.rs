//! Snowman runs: round `s` generates blocks and queries at slot `2s`,
//! delivers blocks and collects replies at `2s+1`, and runs the per-prefix
//! loop at `2s+2`.

use std::sync::Arc;

use snowfrost_core::frosty::FinalVia;
use snowfrost_core::sampling::{fill_sample, Domain, SampleStream};
use snowfrost_core::snowman::{Responses, SnowmanParams, SnowmanState};
use snowfrost_core::{BitString, Block};

use crate::adversary::correct_mask;
use crate::blockgen::BlockGen;
use crate::config::{SimConfig, Strategy};
use crate::error::SimError;
use crate::recorder::Recorder;
use crate::trace::{Bits, Event};

pub(crate) fn block_event(b: &Block, producer: Option<u32>) -> Event {
    Event::Block {
        id: b.id().0,
        parent: b.parent().map_or(0, |p| p.id().0),
        height: b.height(),
        producer,
        label: Bits(b.label_bits()),
    }
}

/// The longest final among `finals`.
pub(crate) fn longest<'a>(finals: impl Iterator<Item = &'a BitString>) -> BitString {
    finals.max_by_key(|f| f.len()).cloned().unwrap_or_default()
}

/// Emits a per-round summary of correct finals and preferences.
pub(crate) fn chain_round<'a>(
    rec: &mut Recorder,
    t: u64,
    round: u64,
    states: impl Iterator<Item = (&'a BitString, &'a BitString)>,
) {
    let (mut min_final, mut max_final, mut max_pref) = (usize::MAX, 0, 0);
    for (f, p) in states {
        min_final = min_final.min(f.len());
        max_final = max_final.max(f.len());
        max_pref = max_pref.max(p.len());
    }
    rec.emit(
        t,
        Event::ChainRound {
            round,
            min_final: if min_final == usize::MAX { 0 } else { min_final },
            max_final,
            max_pref,
        },
    );
}

pub(crate) fn run(
    cfg: &SimConfig,
    params: &SnowmanParams,
    corrupt: &[u32],
    rec: &mut Recorder,
) -> Result<(u64, bool), SimError> {
    let correct = correct_mask(cfg.n, corrupt);
    let mut gen = BlockGen::new(cfg.block_gen, cfg.label_width)?;
    let genesis = gen.genesis().clone();
    let ids: Vec<u32> = (0..cfg.n).filter(|&i| correct[i as usize]).collect();
    // Correct processors alternate between two halves by rank.
    let mut second_half = vec![false; cfg.n as usize];
    for (rank, &id) in ids.iter().enumerate() {
        second_half[id as usize] = rank % 2 == 1;
    }
    let mut nodes: Vec<Option<SnowmanState>> = correct
        .iter()
        .map(|&c| c.then(|| SnowmanState::new(genesis.clone())))
        .collect();
    let mut samples: Vec<Vec<u32>> = vec![Vec::new(); cfg.n as usize];
    let mut replies: Vec<Responses> = vec![Responses::default(); cfg.n as usize];
    let mut tips: Vec<Option<Arc<Block>>> = vec![None; cfg.n as usize];
    let mut pair: Option<(Arc<Block>, Arc<Block>)> = None;
    let k = params.k as usize;
    let rounds = cfg.max_timeslots / 2;
    let mut last_t = 0;

    for s in 0..rounds {
        let t0 = 2 * s;
        let longest_final = longest(nodes.iter().flatten().map(|n| n.final_value()));
        let env = gen.generate(s, &longest_final)?;
        for b in &env {
            rec.emit(t0, block_event(b, None));
        }
        let mut fresh_pair = None;
        if cfg.adversary.strategy == Strategy::Equivocator && !corrupt.is_empty() && gen.is_tick(s) {
            let producer = corrupt[(s as usize / cfg.block_gen.period as usize) % corrupt.len()];
            let tip = gen.tip_for(&longest_final);
            let parent = tip.parent().cloned().unwrap_or(tip);
            let a = gen.mint(&parent, format!("byz:{s}:a").into_bytes())?;
            let b = gen.mint(&parent, format!("byz:{s}:b").into_bytes())?;
            rec.emit(t0, block_event(&a, Some(producer)));
            rec.emit(t0, block_event(&b, Some(producer)));
            fresh_pair = Some((a, b));
        }
        for &id in &ids {
            let mut stream = SampleStream::new(cfg.seed, Domain::Sample, id, s as u32);
            fill_sample(cfg.n, &mut stream, &mut samples[id as usize], k);
        }

        // Slot 2s+1: blocks arrive, then replies are formed.
        for &id in &ids {
            let store = nodes[id as usize].as_mut().expect("correct").store_mut();
            for b in &env {
                store.admit(b);
            }
            if let Some((a, b)) = &fresh_pair {
                let (x, y) = if second_half[id as usize] { (b, a) } else { (a, b) };
                store.admit(x);
                store.admit(y);
            }
        }
        if fresh_pair.is_some() {
            pair = fresh_pair;
        }
        for &id in &ids {
            let n = nodes[id as usize].as_ref().expect("correct");
            tips[id as usize] = Some(n.store().last(n.pref()));
        }
        for &q in &ids {
            let byz_reply = match (&pair, cfg.adversary.strategy) {
                (Some((a, b)), Strategy::Equivocator) => {
                    if second_half[q as usize] {
                        a.clone()
                    } else {
                        b.clone()
                    }
                }
                _ => genesis.clone(),
            };
            let node = nodes[q as usize].as_mut().expect("correct");
            let r = &mut replies[q as usize];
            *r = Responses::default();
            for &j in &samples[q as usize] {
                let tip = tips[j as usize].as_ref().unwrap_or(&byz_reply);
                node.store_mut().admit_chain(tip);
                r.push(tip.chain_bits().clone(), 1);
            }
        }

        // Slot 2s+2: the per-prefix loop.
        let t2 = 2 * s + 2;
        for &id in &ids {
            let node = nodes[id as usize].as_mut().expect("correct");
            let stats = node.advance(params, &replies[id as usize])?;
            if stats.final_changed {
                rec.emit(
                    t2,
                    Event::Final {
                        proc: id,
                        round: s,
                        epoch: 0,
                        via: FinalVia::Beta,
                        value: Bits(node.final_value().clone()),
                    },
                );
            }
        }
        chain_round(rec, t2, s, nodes.iter().flatten().map(|n| (n.final_value(), n.pref())));
        last_t = t2;
        if rec.should_halt() {
            return Ok((t2, true));
        }
    }
    Ok((last_t, false))
}
