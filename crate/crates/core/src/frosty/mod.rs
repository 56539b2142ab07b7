//! Frosty: Snowman in even epochs with stuck detection and the α₃ primed
//! rule, and a two-stage quorum protocol in odd epochs.

mod messages;
mod node;

pub use messages::{
    pref_star, Digest, EpochCertificate, Message, Proposal, QuorumCertificate, SignerSet, Stage, StartVote,
    StartingCertificate, StuckMsg, Vote,
};
pub use node::{EvenRoundOutcome, FinalVia, Fresh, FrostyNode, FrostySnapshot, OddAction, ProposalCheck};

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::snowman::SnowmanParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrostyParams {
    pub k: u32,
    pub alpha1: u32,
    pub alpha2: u32,
    pub alpha3: u32,
    pub beta: u32,
    pub gamma: u32,
}

impl Default for FrostyParams {
    /// `k=80, α₁=41, α₂=72, α₃=48, β=14, γ=300`.
    fn default() -> Self {
        FrostyParams {
            k: 80,
            alpha1: 41,
            alpha2: 72,
            alpha3: 48,
            beta: 14,
            gamma: 300,
        }
    }
}

impl FrostyParams {
    pub fn snowman(&self) -> SnowmanParams {
        SnowmanParams {
            k: self.k,
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            beta: self.beta,
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        self.snowman().validate()?;
        if self.alpha3 == 0 || self.alpha3 > self.k {
            return Err(CoreError::InvalidParams(format!(
                "alpha3={} outside 1..=k",
                self.alpha3
            )));
        }
        if self.gamma == 0 {
            return Err(CoreError::InvalidParams("gamma must be at least 1".into()));
        }
        Ok(())
    }
}

/// `f*`: the greatest integer strictly below `n/3`.
pub fn f_star(n: u32) -> u32 {
    n.saturating_sub(1) / 3
}

/// Size of a quorum certificate, `n − f*`.
pub fn qc_size(n: u32) -> u32 {
    n - f_star(n)
}

/// Least number of stuck messages forming an epoch certificate (`≥ n/5`).
pub fn ec_threshold(n: u32) -> u32 {
    n.div_ceil(5)
}

/// Least number of starting votes forming a starting certificate
/// (`≥ 2n/3`).
pub fn sc_threshold(n: u32) -> u32 {
    (2 * n).div_ceil(3)
}

/// Leader of odd-epoch round `s`: processor `s mod n`.
pub fn leader(round: u64, n: u32) -> u32 {
    (round % n as u64) as u32
}
