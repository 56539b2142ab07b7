//! Blocks, labels, per-processor block stores and the chain/reduct/last
//! helpers used to interpret hash-chain strings.

use std::fmt;
use std::sync::Arc;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::CoreError;

/// Run-unique block identifier. The genesis block is always id 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockId(pub u32);

pub const GENESIS_ID: BlockId = BlockId(0);

/// Assigns each block id an `width`-bit label through a bijection of the
/// label space, standing in for `H(b)`. Labels are distinct for every id
/// below `2^width`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCodec {
    width: u32,
}

impl Default for LabelCodec {
    fn default() -> Self {
        LabelCodec { width: 32 }
    }
}

impl LabelCodec {
    pub fn new(width: u32) -> Result<Self, CoreError> {
        if width == 0 || width > 64 {
            return Err(CoreError::BadLabelWidth(width));
        }
        Ok(LabelCodec { width })
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    fn mask(&self) -> u64 {
        if self.width == 64 {
            u64::MAX
        } else {
            (1u64 << self.width) - 1
        }
    }

    /// Largest number of distinct ids this codec can label.
    pub fn capacity(&self) -> u128 {
        1u128 << self.width
    }

    /// Label for `id`; fails once the label space is exhausted.
    pub fn label(&self, id: BlockId) -> Result<u64, CoreError> {
        if (id.0 as u128) >= self.capacity() {
            return Err(CoreError::LabelSpaceExhausted {
                id: id.0,
                width: self.width,
            });
        }
        // Odd multipliers and right xorshifts are each invertible modulo
        // 2^width, so the composition is a permutation of the label space.
        let m = self.mask();
        let shift = (self.width / 2).max(1);
        let mut x = id.0 as u64;
        x = x.wrapping_mul(0x9E37_79B9_7F4A_7C15) & m;
        x ^= x >> shift;
        x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9) & m;
        x ^= x >> shift;
        x = x.wrapping_mul(0x94D0_49BB_1331_11EB) & m;
        Ok(x)
    }
}

/// A block. Parent links are shared pointers, so a block value carries its
/// whole ancestry.
pub struct Block {
    id: BlockId,
    parent: Option<Arc<Block>>,
    height: u32,
    payload: Vec<u8>,
    label: u64,
    width: u32,
    chain: Arc<BitString>,
}

impl Block {
    /// The genesis block `b₀`.
    pub fn genesis(codec: LabelCodec) -> Arc<Block> {
        let label = codec.label(GENESIS_ID).expect("id 0 always fits");
        Arc::new(Block {
            id: GENESIS_ID,
            parent: None,
            height: 0,
            payload: Vec::new(),
            label,
            width: codec.width(),
            chain: Arc::new(BitString::from_word(label, codec.width())),
        })
    }

    /// A child of `parent`. The caller guarantees `id` is fresh for the run.
    pub fn child(
        parent: &Arc<Block>,
        id: BlockId,
        payload: Vec<u8>,
        codec: LabelCodec,
    ) -> Result<Arc<Block>, CoreError> {
        if id == GENESIS_ID {
            return Err(CoreError::InvalidParams("block id 0 is reserved for genesis".into()));
        }
        debug_assert_eq!(codec.width(), parent.width);
        let label = codec.label(id)?;
        let mut chain = BitString::with_capacity(parent.chain.len() + codec.width() as usize);
        chain.extend_from(&parent.chain);
        chain.push_word(label, codec.width());
        Ok(Arc::new(Block {
            id,
            parent: Some(parent.clone()),
            height: parent.height + 1,
            payload,
            label,
            width: codec.width(),
            chain: Arc::new(chain),
        }))
    }

    #[inline]
    pub fn id(&self) -> BlockId {
        self.id
    }

    #[inline]
    pub fn parent(&self) -> Option<&Arc<Block>> {
        self.parent.as_ref()
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    /// `H(b)` as an integer of `label_width` bits.
    #[inline]
    pub fn label(&self) -> u64 {
        self.label
    }

    #[inline]
    pub fn label_width(&self) -> u32 {
        self.width
    }

    pub fn label_bits(&self) -> BitString {
        BitString::from_word(self.label, self.width)
    }

    /// `H(b₀) ∗ … ∗ H(b)` for the chain ending at this block.
    #[inline]
    pub fn chain_bits(&self) -> &Arc<BitString> {
        &self.chain
    }

    pub fn is_genesis(&self) -> bool {
        self.parent.is_none() && self.id == GENESIS_ID
    }

    /// The chain `b₀ ∗ … ∗ b`, genesis first.
    pub fn ancestry(self: &Arc<Self>) -> Vec<Arc<Block>> {
        let mut out = Vec::with_capacity(self.height as usize + 1);
        let mut cur = Some(self.clone());
        while let Some(b) = cur {
            cur = b.parent.clone();
            out.push(b);
        }
        out.reverse();
        out
    }

    /// The ancestor at `height` (self if equal).
    pub fn ancestor_at(self: &Arc<Self>, height: u32) -> Option<Arc<Block>> {
        if height > self.height {
            return None;
        }
        let mut cur = self.clone();
        while cur.height > height {
            cur = cur.parent.clone()?;
        }
        Some(cur)
    }

    pub fn record(&self) -> BlockRecord {
        BlockRecord {
            id: self.id,
            parent: self.parent.as_ref().map(|p| p.id),
            height: self.height,
            label: self.label_bits(),
            payload: hex::encode(&self.payload),
        }
    }
}

impl Drop for Block {
    fn drop(&mut self) {
        // Unlink long ancestries iteratively instead of recursing per block.
        let mut next = self.parent.take();
        while let Some(p) = next {
            match Arc::try_unwrap(p) {
                Ok(mut inner) => next = inner.parent.take(),
                Err(_) => break,
            }
        }
    }
}

impl fmt::Debug for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Block")
            .field("id", &self.id)
            .field("parent", &self.parent.as_ref().map(|p| p.id))
            .field("height", &self.height)
            .finish()
    }
}

/// Serializable view of a block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub id: BlockId,
    pub parent: Option<BlockId>,
    pub height: u32,
    pub label: BitString,
    pub payload: String,
}

/// `H_B` for a sequence of blocks: the concatenated labels if the sequence
/// is a parent-linked chain starting at genesis, the empty string otherwise.
pub fn hash_chain(blocks: &[Arc<Block>]) -> BitString {
    let Some(first) = blocks.first() else {
        return BitString::new();
    };
    if !first.is_genesis() {
        return BitString::new();
    }
    for pair in blocks.windows(2) {
        match pair[1].parent() {
            Some(p) if p.id == pair[0].id => {}
            _ => return BitString::new(),
        }
    }
    let last = blocks.last().expect("non-empty");
    (**last.chain_bits()).clone()
}

/// A chain as carried by a reply: either an honest chain given by its tip,
/// or an arbitrary block sequence (possibly not a chain at all).
#[derive(Clone, Debug)]
pub enum ReportedChain {
    Tip(Arc<Block>),
    Blocks(Arc<[Arc<Block>]>),
}

impl ReportedChain {
    /// `H_B` of the carried sequence (empty when it is not a chain).
    pub fn hash(&self) -> Arc<BitString> {
        match self {
            ReportedChain::Tip(b) => b.chain_bits().clone(),
            ReportedChain::Blocks(bs) => Arc::new(hash_chain(bs)),
        }
    }

    /// Blocks that a receiver may admit to its store.
    pub fn blocks(&self) -> Vec<Arc<Block>> {
        match self {
            ReportedChain::Tip(b) => b.ancestry(),
            ReportedChain::Blocks(bs) => bs.to_vec(),
        }
    }

    pub fn tip(&self) -> Option<&Arc<Block>> {
        match self {
            ReportedChain::Tip(b) => Some(b),
            ReportedChain::Blocks(bs) => bs.last(),
        }
    }
}

struct StoreEntry {
    block: Arc<Block>,
    seq: u64,
    children: Vec<Arc<Block>>,
}

/// The set of blocks a processor has seen, in insertion order.
///
/// A block is admitted only once its parent is present; blocks arriving
/// early are parked until the parent shows up.
pub struct BlockStore {
    codec: LabelCodec,
    genesis: Arc<Block>,
    entries: FxHashMap<BlockId, StoreEntry>,
    by_label: FxHashMap<u64, BlockId>,
    order: Vec<BlockId>,
    parked: FxHashMap<BlockId, Vec<Arc<Block>>>,
}

impl BlockStore {
    pub fn new(genesis: Arc<Block>) -> Self {
        let codec = LabelCodec { width: genesis.width };
        let mut store = BlockStore {
            codec,
            genesis: genesis.clone(),
            entries: FxHashMap::default(),
            by_label: FxHashMap::default(),
            order: Vec::new(),
            parked: FxHashMap::default(),
        };
        store.insert(genesis);
        store
    }

    fn insert(&mut self, block: Arc<Block>) {
        let seq = self.order.len() as u64;
        self.order.push(block.id);
        self.by_label.insert(block.label, block.id);
        if let Some(parent) = block.parent() {
            if let Some(e) = self.entries.get_mut(&parent.id) {
                e.children.push(block.clone());
            }
        }
        self.entries.insert(
            block.id,
            StoreEntry {
                block,
                seq,
                children: Vec::new(),
            },
        );
    }

    pub fn codec(&self) -> LabelCodec {
        self.codec
    }

    pub fn genesis(&self) -> &Arc<Block> {
        &self.genesis
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn contains(&self, id: BlockId) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn get(&self, id: BlockId) -> Option<&Arc<Block>> {
        self.entries.get(&id).map(|e| &e.block)
    }

    /// Insertion sequence number of a stored block.
    pub fn seq(&self, id: BlockId) -> Option<u64> {
        self.entries.get(&id).map(|e| e.seq)
    }

    /// Stored children of `id` in insertion order.
    pub fn children(&self, id: BlockId) -> &[Arc<Block>] {
        self.entries.get(&id).map(|e| e.children.as_slice()).unwrap_or(&[])
    }

    /// Block ids in insertion order.
    pub fn order(&self) -> &[BlockId] {
        &self.order
    }

    pub fn parked_count(&self) -> usize {
        self.parked.values().map(Vec::len).sum()
    }

    /// Offers a single block. Returns the number of blocks newly admitted
    /// (parked descendants included).
    pub fn admit(&mut self, block: &Arc<Block>) -> usize {
        if self.entries.contains_key(&block.id) {
            return 0;
        }
        let Some(parent) = block.parent() else {
            // Only the run's genesis is parentless; anything else is invalid.
            return 0;
        };
        if !self.entries.contains_key(&parent.id) {
            let slot = self.parked.entry(parent.id).or_default();
            if !slot.iter().any(|b| b.id == block.id) {
                slot.push(block.clone());
            }
            return 0;
        }
        let mut admitted = 0;
        let mut ready = vec![block.clone()];
        while let Some(b) = ready.pop() {
            if self.entries.contains_key(&b.id) {
                continue;
            }
            let id = b.id;
            self.insert(b);
            admitted += 1;
            if let Some(waiting) = self.parked.remove(&id) {
                // Reverse so that earlier arrivals are inserted first.
                ready.extend(waiting.into_iter().rev());
            }
        }
        admitted
    }

    /// Admits a block together with any missing ancestors, oldest first.
    pub fn admit_chain(&mut self, tip: &Arc<Block>) -> usize {
        if self.entries.contains_key(&tip.id) {
            return 0;
        }
        let mut missing = Vec::new();
        let mut cur = Some(tip.clone());
        while let Some(b) = cur {
            if self.entries.contains_key(&b.id) || b.parent().is_none() {
                break;
            }
            cur = b.parent().cloned();
            missing.push(b);
        }
        missing.iter().rev().map(|b| self.admit(b)).sum()
    }

    /// Resolves a string against the store: the deepest stored chain
    /// `b₀ ∗ … ∗ b_h` with `σ = H(b₀) ∗ … ∗ H(b_h) ∗ τ`, falling back to
    /// genesis.
    pub fn resolve(&self, sigma: &BitString) -> ChainMatch {
        let w = self.codec.width();
        let wu = w as usize;
        let genesis = self.genesis.clone();
        if sigma.read_word(0, w) != Some(genesis.label) {
            return ChainMatch {
                last: genesis,
                tail: sigma.len().saturating_sub(wu),
                anchored: false,
            };
        }
        let mut last = genesis;
        let mut pos = wu;
        while let Some(label) = sigma.read_word(pos, w) {
            let Some(id) = self.by_label.get(&label) else {
                break;
            };
            let entry = &self.entries[id];
            match entry.block.parent() {
                Some(p) if p.id == last.id => {}
                _ => break,
            }
            last = entry.block.clone();
            pos += wu;
        }
        ChainMatch {
            last,
            tail: sigma.len() - pos,
            anchored: true,
        }
    }

    /// `chain(σ)`.
    pub fn chain_of(&self, sigma: &BitString) -> Vec<Arc<Block>> {
        self.resolve(sigma).last.ancestry()
    }

    /// `reduct(σ)`.
    pub fn reduct(&self, sigma: &BitString) -> Arc<BitString> {
        self.resolve(sigma).last.chain_bits().clone()
    }

    /// `last(σ)`.
    pub fn last(&self, sigma: &BitString) -> Arc<Block> {
        self.resolve(sigma).last
    }

    /// True when `σ = H_B` for a chain whose blocks are all stored.
    pub fn is_stored_chain(&self, sigma: &BitString) -> bool {
        let m = self.resolve(sigma);
        m.anchored && m.tail == 0
    }

    /// Stored blocks whose chain string extends `sigma`, in insertion order.
    pub fn extending(&self, sigma: &BitString) -> impl Iterator<Item = &Arc<Block>> + '_ {
        let sigma = sigma.clone();
        self.order
            .iter()
            .map(move |id| &self.entries[id].block)
            .filter(move |b| b.chain_bits().extends(&sigma))
    }

    /// Serializable id/parent listing in insertion order.
    pub fn records(&self) -> Vec<BlockRecord> {
        self.order.iter().map(|id| self.entries[id].block.record()).collect()
    }
}

impl Clone for BlockStore {
    fn clone(&self) -> Self {
        let mut entries = FxHashMap::default();
        for (id, e) in &self.entries {
            entries.insert(
                *id,
                StoreEntry {
                    block: e.block.clone(),
                    seq: e.seq,
                    children: e.children.clone(),
                },
            );
        }
        BlockStore {
            codec: self.codec,
            genesis: self.genesis.clone(),
            entries,
            by_label: self.by_label.clone(),
            order: self.order.clone(),
            parked: self.parked.clone(),
        }
    }
}

impl fmt::Debug for BlockStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlockStore")
            .field("blocks", &self.order)
            .field("parked", &self.parked_count())
            .finish()
    }
}

/// Result of resolving a string against a store.
#[derive(Clone, Debug)]
pub struct ChainMatch {
    /// `last(σ)`.
    pub last: Arc<Block>,
    /// `|τ|`: bits of σ beyond `reduct(σ)`.
    pub tail: usize,
    /// Whether σ starts with `H(b₀)`.
    pub anchored: bool,
}

/// Allocates fresh block ids for a run.
#[derive(Debug, Clone)]
pub struct BlockFactory {
    codec: LabelCodec,
    next: u32,
    genesis: Arc<Block>,
}

impl BlockFactory {
    pub fn new(codec: LabelCodec) -> Self {
        BlockFactory {
            codec,
            next: 1,
            genesis: Block::genesis(codec),
        }
    }

    pub fn genesis(&self) -> &Arc<Block> {
        &self.genesis
    }

    pub fn codec(&self) -> LabelCodec {
        self.codec
    }

    pub fn issued(&self) -> u32 {
        self.next - 1
    }

    pub fn child(&mut self, parent: &Arc<Block>, payload: Vec<u8>) -> Result<Arc<Block>, CoreError> {
        let id = BlockId(self.next);
        let b = Block::child(parent, id, payload, self.codec)?;
        self.next += 1;
        Ok(b)
    }
}
