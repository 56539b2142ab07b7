//! Snowman: one Snowflake⁺ instance per bit of the hash-chain string,
//! iterated from `final` towards the preferred tip every round.

use std::sync::Arc;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::block::{Block, BlockRecord, BlockStore, ReportedChain};
use crate::error::CoreError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnowmanParams {
    pub k: u32,
    pub alpha1: u32,
    pub alpha2: u32,
    pub beta: u32,
}

impl Default for SnowmanParams {
    fn default() -> Self {
        SnowmanParams {
            k: 80,
            alpha1: 41,
            alpha2: 72,
            beta: 12,
        }
    }
}

impl SnowmanParams {
    pub fn validate(&self) -> Result<(), CoreError> {
        let bad = |m: String| Err(CoreError::InvalidParams(m));
        if self.k == 0 || 2 * self.alpha1 <= self.k || self.alpha1 > self.k {
            return bad(format!(
                "need k/2 < alpha1 <= k, got k={} alpha1={}",
                self.k, self.alpha1
            ));
        }
        if self.alpha2 < self.alpha1 || self.alpha2 > self.k {
            return bad(format!("need alpha1 <= alpha2 <= k, got alpha2={}", self.alpha2));
        }
        if self.beta == 0 {
            return bad("beta must be at least 1".into());
        }
        Ok(())
    }
}

/// Sampled strings for one round, grouped by identical value.
#[derive(Clone, Debug, Default)]
pub struct Responses {
    groups: Vec<(Arc<BitString>, u32)>,
    total: u32,
}

impl Responses {
    pub fn collect<I: IntoIterator<Item = Arc<BitString>>>(items: I) -> Self {
        let mut r = Responses::default();
        for s in items {
            r.push(s, 1);
        }
        r
    }

    pub fn from_strings(items: &[BitString]) -> Self {
        Self::collect(items.iter().map(|s| Arc::new(s.clone())))
    }

    /// Adds `weight` copies of `s`.
    pub fn push(&mut self, s: Arc<BitString>, weight: u32) {
        self.total += weight;
        for (g, w) in self.groups.iter_mut() {
            if Arc::ptr_eq(g, &s) || (g.len() == s.len() && **g == *s) {
                *w += weight;
                return;
            }
        }
        self.groups.push((s, weight));
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn groups(&self) -> &[(Arc<BitString>, u32)] {
        &self.groups
    }

    /// Number of responses extending `sigma`.
    pub fn count_extending(&self, sigma: &BitString) -> u32 {
        self.groups
            .iter()
            .filter(|(g, _)| g.extends(sigma))
            .map(|(_, w)| *w)
            .sum()
    }
}

/// Tracks which response groups extend a growing prefix.
pub(crate) struct PrefixCounter<'a> {
    groups: &'a [(Arc<BitString>, u32)],
    active: Vec<usize>,
}

impl<'a> PrefixCounter<'a> {
    pub(crate) fn new(responses: &'a Responses, start: &BitString) -> Self {
        let active = (0..responses.groups.len())
            .filter(|&i| responses.groups[i].0.extends(start))
            .collect();
        PrefixCounter {
            groups: &responses.groups,
            active,
        }
    }

    /// Counts of responses extending `prefix ∗ 0` and `prefix ∗ 1`, where
    /// `prefix` is the tracked string of length `pos`.
    #[inline]
    pub(crate) fn next_counts(&self, pos: usize) -> [u32; 2] {
        let mut c = [0u32; 2];
        for &i in &self.active {
            let (g, w) = &self.groups[i];
            if let Some(b) = g.get(pos) {
                c[b as usize] += w;
            }
        }
        c
    }

    #[inline]
    pub(crate) fn advance(&mut self, pos: usize, bit: bool) {
        let groups = self.groups;
        self.active.retain(|&i| groups[i].0.get(pos) == Some(bit));
    }
}

/// Per-prefix Snowflake⁺ variables: `val(σ)`, `count(σ)`, and the
/// `primed(σ∗x)` flags used by Frosty, keyed by σ.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Slot {
    pub val: Option<bool>,
    pub count: u32,
    pub primed: [bool; 2],
}

/// Extension points for the per-bit loop.
pub(crate) trait LoopHook {
    /// Called after `count(pref)` has been updated, before `pref` grows.
    fn after_count(&mut self, pref: &BitString, slot: &mut Slot, beta_reached: bool, final_: &mut BitString);
    /// Called when `pref` grows by `bit` at position `pos`.
    fn advance(&mut self, pos: usize, bit: bool);
}

struct NoHook;

impl LoopHook for NoHook {
    fn after_count(&mut self, _: &BitString, _: &mut Slot, _: bool, _: &mut BitString) {}
    fn advance(&mut self, _: usize, _: bool) {}
}

/// What one pass of the loop did.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoopStats {
    pub iterations: usize,
    pub flips: usize,
    pub final_changed: bool,
}

#[derive(Clone, Debug)]
pub struct SnowmanState {
    pref: BitString,
    final_: BitString,
    slots: FxHashMap<BitString, Slot>,
    store: BlockStore,
}

impl SnowmanState {
    pub fn new(genesis: Arc<Block>) -> Self {
        let g = (**genesis.chain_bits()).clone();
        SnowmanState {
            pref: g.clone(),
            final_: g,
            slots: FxHashMap::default(),
            store: BlockStore::new(genesis),
        }
    }

    pub fn pref(&self) -> &BitString {
        &self.pref
    }

    pub fn final_value(&self) -> &BitString {
        &self.final_
    }

    pub fn store(&self) -> &BlockStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut BlockStore {
        &mut self.store
    }

    pub fn slot(&self, sigma: &BitString) -> Option<&Slot> {
        self.slots.get(sigma)
    }

    /// `val(σ)`, if defined.
    pub fn val(&self, sigma: &BitString) -> Option<bool> {
        self.slots.get(sigma).and_then(|s| s.val)
    }

    /// `count(σ)` (0 when never touched).
    pub fn count(&self, sigma: &BitString) -> u32 {
        self.slots.get(sigma).map_or(0, |s| s.count)
    }

    pub(crate) fn set_pref(&mut self, pref: BitString) {
        self.pref = pref;
    }

    pub(crate) fn set_final(&mut self, f: BitString) {
        self.final_ = f;
        self.collect_garbage();
    }

    pub(crate) fn clear_slots(&mut self) {
        self.slots.clear();
    }

    /// `chain(pref)`, reported to queriers.
    pub fn report_preference(&self) -> ReportedChain {
        ReportedChain::Tip(self.store.last(&self.pref))
    }

    /// `chain(final)`.
    pub fn report_final(&self) -> ReportedChain {
        ReportedChain::Tip(self.store.last(&self.final_))
    }

    /// Maps raw replies to strings, admitting any carried blocks first.
    /// Missing or malformed replies become `H(b₀)`.
    pub fn record_responses(&mut self, raw: &[Option<ReportedChain>]) -> Vec<Arc<BitString>> {
        for chain in raw.iter().flatten() {
            match chain {
                ReportedChain::Tip(b) => {
                    self.store.admit_chain(b);
                }
                ReportedChain::Blocks(bs) => {
                    for b in bs.iter() {
                        self.store.admit(b);
                    }
                }
            }
        }
        let genesis = self.store.genesis().chain_bits().clone();
        raw.iter()
            .map(|r| match r {
                Some(c) => {
                    let h = c.hash();
                    if h.is_empty() {
                        genesis.clone()
                    } else {
                        h
                    }
                }
                None => genesis.clone(),
            })
            .collect()
    }

    /// Pure round transition.
    pub fn end_round(&self, params: &SnowmanParams, rpref: &[Arc<BitString>]) -> Result<Self, CoreError> {
        let mut next = self.clone();
        next.advance(params, &Responses::collect(rpref.iter().cloned()))?;
        Ok(next)
    }

    /// In-place round transition.
    pub fn advance(&mut self, params: &SnowmanParams, rpref: &Responses) -> Result<LoopStats, CoreError> {
        if rpref.total() != params.k {
            return Err(CoreError::WrongSampleLength {
                expected: params.k as usize,
                got: rpref.total() as usize,
            });
        }
        Ok(self.run_loop(params, rpref, &mut NoHook))
    }

    /// `pref := final`, then walk one bit at a time while `last(pref)` has a
    /// stored child consistent with `pref`.
    pub(crate) fn run_loop<H: LoopHook>(
        &mut self,
        params: &SnowmanParams,
        rpref: &Responses,
        hook: &mut H,
    ) -> LoopStats {
        let mut stats = LoopStats::default();
        let start_final = self.final_.clone();
        let mut pref = self.final_.clone();
        let mut counter = PrefixCounter::new(rpref, &pref);
        let width = self.store.codec().width();
        let wu = width as usize;
        let m = self.store.resolve(&pref);
        let mut last = m.last;
        let mut tail = if m.anchored { m.tail } else { usize::MAX };
        let mut erased = false;

        loop {
            if tail >= wu {
                break;
            }
            let tau = if tail == 0 {
                0
            } else {
                pref.read_word(pref.len() - tail, tail as u32)
                    .expect("tail within pref")
            };
            let first = self
                .store
                .children(last.id())
                .iter()
                .find(|b| tail == 0 || b.label() >> (wu - tail) == tau);
            let Some(first) = first else {
                break;
            };
            stats.iterations += 1;
            let first_bit = (first.label() >> (wu - 1 - tail)) & 1 == 1;

            let slot = match self.slots.get_mut(&pref) {
                Some(s) => s,
                None => self.slots.entry(pref.clone()).or_default(),
            };
            let mut v = *slot.val.get_or_insert(first_bit);
            let counts = counter.next_counts(pref.len());
            let mut erase = false;
            if counts[!v as usize] >= params.alpha1 {
                v = !v;
                slot.val = Some(v);
                stats.flips += 1;
                erase = true;
            }
            if counts[v as usize] < params.alpha2 {
                erase = true;
            }
            if erase && !erased {
                // Zero count(σ) for every σ ⊒ pref. Later erasures in the
                // same pass are no-ops: deeper keys were already zeroed and
                // keys touched since are shorter than the deeper prefix.
                erased = true;
                for (key, s) in self.slots.iter_mut() {
                    if key.len() >= pref.len() && pref.is_prefix_of(key) {
                        s.count = 0;
                    }
                }
            }
            let slot = self.slots.get_mut(&pref).expect("slot inserted above");
            if erase {
                slot.count = 0;
            }
            if counts[v as usize] >= params.alpha2 {
                slot.count += 1;
            }
            let reached = slot.count >= params.beta;
            if reached {
                self.final_ = pref.with_bit(v);
            }
            hook.after_count(&pref, slot, reached, &mut self.final_);

            let pos = pref.len();
            pref.push(v);
            counter.advance(pos, v);
            hook.advance(pos, v);
            tail += 1;
            if tail == wu {
                let label = pref.read_word(pref.len() - wu, width).expect("full label");
                if let Some(child) = self.store.children(last.id()).iter().find(|b| b.label() == label) {
                    last = child.clone();
                    tail = 0;
                }
            }
        }
        self.pref = pref;
        if self.final_ != start_final {
            stats.final_changed = true;
            self.collect_garbage();
        }
        stats
    }

    /// Drops per-prefix entries that can no longer be visited: the loop
    /// only ever visits extensions of the current `final`.
    fn collect_garbage(&mut self) {
        let f = &self.final_;
        self.slots.retain(|k, _| k.len() >= f.len() && f.is_prefix_of(k));
    }

    pub fn snapshot(&self) -> SnowmanSnapshot {
        let mut slots: Vec<SlotRecord> = self
            .slots
            .iter()
            .map(|(k, s)| SlotRecord {
                sigma: k.clone(),
                val: s.val,
                count: s.count,
                primed: s.primed,
            })
            .collect();
        slots.sort_by(|a, b| a.sigma.cmp(&b.sigma));
        SnowmanSnapshot {
            pref: self.pref.clone(),
            final_value: self.final_.clone(),
            slots,
            store: self.store.records(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub sigma: BitString,
    pub val: Option<bool>,
    pub count: u32,
    pub primed: [bool; 2],
}

/// Stable JSON shape of a Snowman state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnowmanSnapshot {
    pub pref: BitString,
    #[serde(rename = "final")]
    pub final_value: BitString,
    pub slots: Vec<SlotRecord>,
    pub store: Vec<BlockRecord>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::{BlockFactory, LabelCodec};

    fn world(width: u32) -> (BlockFactory, SnowmanState) {
        let f = BlockFactory::new(LabelCodec::new(width).unwrap());
        let s = SnowmanState::new(f.genesis().clone());
        (f, s)
    }

    fn repeat(s: &Arc<BitString>, k: usize) -> Vec<Arc<BitString>> {
        vec![s.clone(); k]
    }

    #[test]
    fn fresh_state_reports_genesis() {
        let (f, s) = world(8);
        assert_eq!(s.report_preference().tip().unwrap().id(), f.genesis().id());
        assert_eq!(s.pref(), &**f.genesis().chain_bits());
    }

    #[test]
    fn empty_store_leaves_state_unchanged() {
        let (f, s) = world(8);
        let p = SnowmanParams::default();
        let g = f.genesis().chain_bits().clone();
        let next = s.end_round(&p, &repeat(&g, 80)).unwrap();
        assert_eq!(next.pref(), s.final_value());
        assert_eq!(next.snapshot().slots.len(), 0);
    }

    #[test]
    fn no_reply_maps_to_genesis() {
        let (f, mut s) = world(8);
        let out = s.record_responses(&[None]);
        assert_eq!(*out[0], **f.genesis().chain_bits());
    }

    #[test]
    fn reply_blocks_are_admitted() {
        let (mut f, mut s) = world(8);
        let g = f.genesis().clone();
        let b1 = f.child(&g, vec![]).unwrap();
        let b2 = f.child(&b1, vec![]).unwrap();
        let out = s.record_responses(&[Some(ReportedChain::Tip(b2.clone()))]);
        assert!(s.store().contains(b2.id()));
        assert_eq!(out[0], *b2.chain_bits());
    }

    #[test]
    fn pref_follows_single_child() {
        let (mut f, mut s) = world(8);
        let g = f.genesis().clone();
        let b1 = f.child(&g, vec![]).unwrap();
        s.store_mut().admit(&b1);
        let p = SnowmanParams::default();
        let resp = repeat(b1.chain_bits(), 80);
        s = s.end_round(&p, &resp).unwrap();
        assert_eq!(s.pref(), &**b1.chain_bits());
        assert_eq!(s.count(&g.chain_bits().as_ref().clone()), 1);
    }

    #[test]
    fn flip_erases_deeper_counts() {
        let (mut f, mut s) = world(4);
        let g = f.genesis().clone();
        // Find two children whose labels differ in the first bit.
        let mut kids = Vec::new();
        while kids.len() < 2 {
            let b = f.child(&g, vec![]).unwrap();
            if kids.iter().all(|k: &Arc<Block>| (k.label() >> 3) != (b.label() >> 3)) {
                kids.push(b);
            }
        }
        for k in &kids {
            s.store_mut().admit(k);
        }
        let p = SnowmanParams::default();
        let a = &kids[0];
        let b = &kids[1];
        s = s.end_round(&p, &repeat(a.chain_bits(), 80)).unwrap();
        let deeper = a.chain_bits().prefix(g.chain_bits().len() + 2);
        assert_eq!(s.count(&deeper), 1);
        // 41 responses for the other child flip the first bit.
        let mut resp = repeat(b.chain_bits(), 41);
        resp.extend(repeat(a.chain_bits(), 39));
        s = s.end_round(&p, &resp).unwrap();
        let root = (**g.chain_bits()).clone();
        assert_eq!(s.val(&root), Some(b.label() >> 3 == 1));
        assert_eq!(s.count(&deeper), 0);
        assert!(s.pref().extends(&b.chain_bits().prefix(root.len() + 1)));
    }
}
