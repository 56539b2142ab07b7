//! Background block production.

use std::sync::Arc;

use snowfrost_core::{BitString, Block, BlockFactory, BlockStore, LabelCodec};

use crate::config::{BlockGenConfig, BlockPolicy};
use crate::error::SimError;

/// Issues every block of a run, from the environment and from corrupted
/// producers, and keeps a global store of them.
pub struct BlockGen {
    cfg: BlockGenConfig,
    factory: BlockFactory,
    all: BlockStore,
}

impl BlockGen {
    pub fn new(cfg: BlockGenConfig, label_width: u32) -> Result<Self, SimError> {
        let factory = BlockFactory::new(LabelCodec::new(label_width)?);
        let all = BlockStore::new(factory.genesis().clone());
        Ok(BlockGen { cfg, factory, all })
    }

    pub fn genesis(&self) -> &Arc<Block> {
        self.factory.genesis()
    }

    pub fn store(&self) -> &BlockStore {
        &self.all
    }

    /// Whether the environment produces blocks in `round`.
    pub fn is_tick(&self, round: u64) -> bool {
        self.cfg.policy != BlockPolicy::Silent && round % self.cfg.period as u64 == 0
    }

    /// The deepest issued block on the branch of `final_value`: among
    /// `last(final)` and the blocks whose chain extends `final`, the
    /// highest, earliest issued on ties.
    pub fn tip_for(&self, final_value: &BitString) -> Arc<Block> {
        let mut best = self.all.last(final_value);
        for b in self.all.extending(final_value) {
            if b.height() > best.height() {
                best = b.clone();
            }
        }
        best
    }

    /// A new block with parent `parent`.
    pub fn mint(&mut self, parent: &Arc<Block>, payload: Vec<u8>) -> Result<Arc<Block>, SimError> {
        let b = self.factory.child(parent, payload)?;
        self.all.admit(&b);
        Ok(b)
    }

    /// The environment's blocks for `round`, built on the branch of
    /// `longest_final` (the longest final held by a correct processor).
    pub fn generate(&mut self, round: u64, longest_final: &BitString) -> Result<Vec<Arc<Block>>, SimError> {
        if !self.is_tick(round) {
            return Ok(Vec::new());
        }
        let tip = self.tip_for(longest_final);
        let count = match self.cfg.policy {
            BlockPolicy::Silent => 0,
            BlockPolicy::SingleChain => 1,
            BlockPolicy::Forking => 2,
        };
        (0..count)
            .map(|i| self.mint(&tip, format!("env:{round}:{i}").into_bytes()))
            .collect()
    }
}
