//! Trace records: one JSON object per line, `t` first, then the event tag
//! and its fields in declaration order.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use snowfrost_core::frosty::FinalVia;
use snowfrost_core::BitString;

use crate::config::SimConfig;
use crate::error::SimError;

/// A bit string written as `"<len>:<hex>"`, most significant bit first,
/// padded with zeros to a whole byte.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Bits(pub BitString);

impl Bits {
    pub fn encode(s: &BitString) -> String {
        let mut bytes = Vec::with_capacity(s.len().div_ceil(8));
        for w in s.words() {
            bytes.extend_from_slice(&w.to_be_bytes());
        }
        bytes.truncate(s.len().div_ceil(8));
        format!("{}:{}", s.len(), hex::encode(bytes))
    }

    pub fn decode(text: &str) -> Option<BitString> {
        let (len, hex_part) = text.split_once(':')?;
        let len: usize = len.parse().ok()?;
        let bytes = hex::decode(hex_part).ok()?;
        if bytes.len() != len.div_ceil(8) {
            return None;
        }
        let mut s = BitString::with_capacity(len);
        for b in &bytes {
            s.push_word(*b as u64, 8);
        }
        let padding_clear = s.read_word(len, (bytes.len() * 8 - len) as u32).is_none_or(|w| w == 0);
        s.truncate(len);
        padding_clear.then_some(s)
    }
}

impl From<&BitString> for Bits {
    fn from(s: &BitString) -> Self {
        Bits(s.clone())
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&Bits::encode(&self.0))
    }
}

impl Serialize for Bits {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&Bits::encode(&self.0))
    }
}

impl<'de> Deserialize<'de> for Bits {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Bits::decode(&text)
            .map(Bits)
            .ok_or_else(|| serde::de::Error::custom(format!("bad bit string {text:?}")))
    }
}

/// Receivers of an envelope.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Recipients {
    All(AllTag),
    Some(Vec<u32>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllTag {
    All,
}

impl Recipients {
    pub fn all() -> Self {
        Recipients::All(AllTag::All)
    }

    pub fn contains(&self, id: u32) -> bool {
        match self {
            Recipients::All(_) => true,
            Recipients::Some(ids) => ids.contains(&id),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    RunStart {
        config: SimConfig,
        corrupt: Vec<u32>,
        genesis: Bits,
        warnings: Vec<String>,
    },
    Input {
        proc: u32,
        value: bool,
    },
    /// One processor's sample in one round (full traces only).
    Tally {
        proc: u32,
        round: u64,
        ones: u32,
        zeros: u32,
        silent: u32,
    },
    Flip {
        proc: u32,
        round: u64,
        value: bool,
    },
    Decide {
        proc: u32,
        round: u64,
        value: bool,
        rule: usize,
    },
    /// Correct-processor values after a Snowflake⁺ round.
    SnowflakeRound {
        round: u64,
        ones: u32,
        zeros: u32,
        decided: u32,
    },
    Block {
        id: u32,
        parent: u32,
        height: u32,
        /// Corrupted producer, or `None` for the environment.
        producer: Option<u32>,
        label: Bits,
    },
    Final {
        proc: u32,
        round: u64,
        epoch: u64,
        via: FinalVia,
        value: Bits,
    },
    /// Final lengths (in bits) over correct processors after a round.
    ChainRound {
        round: u64,
        min_final: usize,
        max_final: usize,
        max_pref: usize,
    },
    Epoch {
        proc: u32,
        epoch: u64,
    },
    Stuck {
        proc: u32,
        epoch: u64,
        value: Bits,
    },
    /// First epoch certificate held by a correct processor.
    Ec {
        epoch: u64,
        sigma: Bits,
        signers: usize,
    },
    /// First starting certificate held by a correct processor.
    Sc {
        epoch: u64,
        pref_star: Bits,
        votes: usize,
    },
    Proposal {
        round: u64,
        epoch: u64,
        signer: u32,
        digest: String,
        parent: Option<String>,
        qc_prev_round: u64,
        value: Bits,
    },
    Vote {
        proc: u32,
        round: u64,
        epoch: u64,
        stage: u8,
        digest: String,
    },
    /// First quorum certificate for a (proposal, stage) held by a correct
    /// processor.
    Qc {
        round: u64,
        epoch: u64,
        stage: u8,
        digest: String,
        signers: usize,
    },
    Lock {
        proc: u32,
        epoch: u64,
        round: u64,
    },
    Confirm {
        proc: u32,
        epoch: u64,
        digest: String,
        value: Bits,
    },
    Envelope {
        /// Author of the signed payload, when it has one.
        signer: Option<u32>,
        /// Processor that put the envelope on the wire.
        relay: u32,
        kind: String,
        payload: String,
        to: Recipients,
        sent: u64,
        deliver: u64,
    },
    /// An adversary action the network refused.
    Rejected {
        relay: u32,
        reason: String,
    },
    /// A processor became ready after its round's query slot and ran the
    /// round with an all-`H(b₀)` sample.
    LateSample {
        proc: u32,
        round: u64,
    },
    Finish {
        slots: u64,
        halted: bool,
    },
}

impl Event {
    pub fn tag(&self) -> &'static str {
        match self {
            Event::RunStart { .. } => "run-start",
            Event::Input { .. } => "input",
            Event::Tally { .. } => "tally",
            Event::Flip { .. } => "flip",
            Event::Decide { .. } => "decide",
            Event::SnowflakeRound { .. } => "snowflake-round",
            Event::Block { .. } => "block",
            Event::Final { .. } => "final",
            Event::ChainRound { .. } => "chain-round",
            Event::Epoch { .. } => "epoch",
            Event::Stuck { .. } => "stuck",
            Event::Ec { .. } => "ec",
            Event::Sc { .. } => "sc",
            Event::Proposal { .. } => "proposal",
            Event::Vote { .. } => "vote",
            Event::Qc { .. } => "qc",
            Event::Lock { .. } => "lock",
            Event::Confirm { .. } => "confirm",
            Event::Envelope { .. } => "envelope",
            Event::Rejected { .. } => "rejected",
            Event::LateSample { .. } => "late-sample",
            Event::Finish { .. } => "finish",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: u64,
    #[serde(flatten)]
    pub event: Event,
}

/// Serializes one record as a JSON line.
pub fn write_record<W: Write>(out: &mut W, record: &Record) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, record)?;
    out.write_all(b"\n")
}

/// Parses a JSON-lines trace. Fails on malformed lines and on traces
/// without a closing `finish` record.
pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<Record>, SimError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let de = &mut serde_json::Deserializer::from_str(&line);
        let r: Record = serde_path_to_error::deserialize(de).map_err(|e| SimError::Trace {
            line: i + 1,
            message: format!("{}: {}", e.path(), e.inner()),
        })?;
        out.push(r);
    }
    match out.first() {
        Some(Record {
            event: Event::RunStart { .. },
            ..
        }) => {}
        _ => {
            return Err(SimError::Trace {
                line: 1,
                message: "first record must be run-start".into(),
            })
        }
    }
    if !matches!(
        out.last(),
        Some(Record {
            event: Event::Finish { .. },
            ..
        })
    ) {
        return Err(SimError::TruncatedTrace);
    }
    Ok(out)
}

/// Digest rendering used in traces.
pub fn digest_hex(d: &[u8; 32]) -> String {
    hex::encode(d)
}
