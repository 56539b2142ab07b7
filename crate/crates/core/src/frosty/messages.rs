//! Signed messages and certificates exchanged by Frosty processors.
//!
//! Signatures are simulated: a message's `signer` field is trusted, and the
//! simulator is responsible for never letting a faulty processor emit a
//! message in a correct processor's name.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use super::{ec_threshold, qc_size, sc_threshold};
use crate::bits::BitString;
use crate::block::Block;
use crate::error::CoreError;

pub type Digest = [u8; 32];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Stage {
    pub fn number(self) -> u8 {
        match self {
            Stage::One => 1,
            Stage::Two => 2,
        }
    }
}

/// A set of distinct processor ids remembering first-insertion order.
#[derive(Clone, Debug, Default)]
pub struct SignerSet {
    bits: Vec<u64>,
    order: Vec<u32>,
}

impl SignerSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false if `id` was already present.
    pub fn insert(&mut self, id: u32) -> bool {
        let (w, b) = ((id / 64) as usize, id % 64);
        if w >= self.bits.len() {
            self.bits.resize(w + 1, 0);
        }
        if self.bits[w] >> b & 1 == 1 {
            return false;
        }
        self.bits[w] |= 1 << b;
        self.order.push(id);
        true
    }

    pub fn contains(&self, id: u32) -> bool {
        let w = (id / 64) as usize;
        w < self.bits.len() && self.bits[w] >> (id % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Members in insertion order.
    pub fn members(&self) -> &[u32] {
        &self.order
    }
}

fn distinct_in_range(ids: impl Iterator<Item = u32>, n: u32) -> Result<usize, CoreError> {
    let mut set = SignerSet::new();
    for id in ids {
        if id >= n {
            return Err(CoreError::InvalidCertificate(format!("signer {id} out of range")));
        }
        if !set.insert(id) {
            return Err(CoreError::InvalidCertificate(format!("duplicate signer {id}")));
        }
    }
    Ok(set.len())
}

fn hash_bits(h: &mut Sha256, s: &BitString) {
    h.update((s.len() as u64).to_be_bytes());
    for w in s.words() {
        h.update(w.to_be_bytes());
    }
}

/// `(stuck, e, final)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StuckMsg {
    pub epoch: u64,
    pub final_value: Arc<BitString>,
    pub signer: u32,
}

/// At least `n/5` stuck messages for epoch `epoch` with a common string,
/// from distinct signers. Certifies entry into `epoch + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpochCertificate {
    pub epoch: u64,
    pub sigma: Arc<BitString>,
    pub signers: Arc<[u32]>,
}

impl EpochCertificate {
    pub fn next_epoch(&self) -> u64 {
        self.epoch + 1
    }

    pub fn validate(&self, n: u32) -> Result<(), CoreError> {
        let count = distinct_in_range(self.signers.iter().copied(), n)?;
        if (count as u32) < ec_threshold(n) {
            return Err(CoreError::InvalidCertificate(format!(
                "epoch certificate has {count} signers, needs {}",
                ec_threshold(n)
            )));
        }
        Ok(())
    }
}

/// `(start, e, σ)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StartVote {
    pub epoch: u64,
    pub pref: Arc<BitString>,
    pub signer: u32,
}

/// At least `2n/3` starting votes for one epoch from distinct signers.
#[derive(Debug)]
pub struct StartingCertificate {
    epoch: u64,
    votes: Arc<[StartVote]>,
    pref_star: OnceLock<Arc<BitString>>,
}

impl StartingCertificate {
    pub fn new(epoch: u64, votes: Vec<StartVote>) -> Self {
        StartingCertificate {
            epoch,
            votes: votes.into(),
            pref_star: OnceLock::new(),
        }
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn votes(&self) -> &[StartVote] {
        &self.votes
    }

    pub fn validate(&self, n: u32) -> Result<(), CoreError> {
        if let Some(v) = self.votes.iter().find(|v| v.epoch != self.epoch) {
            return Err(CoreError::InvalidCertificate(format!(
                "starting vote for epoch {} in certificate for epoch {}",
                v.epoch, self.epoch
            )));
        }
        let count = distinct_in_range(self.votes.iter().map(|v| v.signer), n)?;
        if (count as u32) < sc_threshold(n) {
            return Err(CoreError::InvalidCertificate(format!(
                "starting certificate has {count} votes, needs {}",
                sc_threshold(n)
            )));
        }
        Ok(())
    }

    /// `Pref*(S)`.
    pub fn pref_star(&self) -> &Arc<BitString> {
        self.pref_star.get_or_init(|| {
            let prefs: Vec<&BitString> = self.votes.iter().map(|v| &*v.pref).collect();
            Arc::new(pref_star(&prefs))
        })
    }

    fn digest_into(&self, h: &mut Sha256) {
        let mut votes: Vec<&StartVote> = self.votes.iter().collect();
        votes.sort_by_key(|v| v.signer);
        h.update(self.epoch.to_be_bytes());
        h.update((votes.len() as u64).to_be_bytes());
        for v in votes {
            h.update(v.signer.to_be_bytes());
            hash_bits(h, &v.pref);
        }
    }
}

/// The longest string extended by strictly more than half of `prefs`.
///
/// Any two strings each extended by a strict majority share an extending
/// vote, so they are prefix-comparable and the longest is well defined.
pub fn pref_star(prefs: &[&BitString]) -> BitString {
    let half = prefs.len() / 2;
    let mut out = BitString::new();
    let mut active: Vec<&BitString> = prefs.to_vec();
    loop {
        let pos = out.len();
        let ones = active.iter().filter(|p| p.get(pos) == Some(true)).count();
        let zeros = active.iter().filter(|p| p.get(pos) == Some(false)).count();
        let bit = if ones > half {
            true
        } else if zeros > half {
            false
        } else {
            return out;
        };
        out.push(bit);
        active.retain(|p| p.get(pos) == Some(bit));
    }
}

/// `n − f*` votes of one stage for one proposal, from distinct signers.
#[derive(Clone, Debug)]
pub struct QuorumCertificate {
    pub proposal: Arc<Proposal>,
    pub stage: Stage,
    pub signers: Arc<[u32]>,
}

impl QuorumCertificate {
    /// `r(Q)`.
    pub fn round(&self) -> u64 {
        self.proposal.round()
    }

    pub fn validate(&self, n: u32) -> Result<(), CoreError> {
        let count = distinct_in_range(self.signers.iter().copied(), n)?;
        if count as u32 != qc_size(n) {
            return Err(CoreError::InvalidCertificate(format!(
                "quorum certificate has {count} signers, needs exactly {}",
                qc_size(n)
            )));
        }
        Ok(())
    }

    fn digest_into(&self, h: &mut Sha256) {
        let mut s: Vec<u32> = self.signers.to_vec();
        s.sort_unstable();
        h.update([self.stage.number()]);
        h.update(self.proposal.digest());
        h.update((s.len() as u64).to_be_bytes());
        for id in s {
            h.update(id.to_be_bytes());
        }
    }
}

/// `r(Q⁺)` with the empty certificate at round 0.
pub(crate) fn lock_round(q: &Option<QuorumCertificate>) -> u64 {
    q.as_ref().map_or(0, |q| q.round())
}

/// A non-empty proposal. The empty proposal is represented by `None`
/// wherever a parent may be empty, with `None` also standing for its
/// stage 1 certificate.
pub struct Proposal {
    round: u64,
    epoch: u64,
    parent: Option<Arc<Proposal>>,
    qc_prev: Option<QuorumCertificate>,
    final_value: Arc<BitString>,
    sc: Arc<StartingCertificate>,
    signer: u32,
    tip: Option<Arc<Block>>,
    digest: Digest,
    validity: OnceLock<(u32, bool)>,
}

impl Proposal {
    /// Builds a proposal. `tip` optionally carries the blocks of `final`
    /// and is not part of the proposal's identity.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        round: u64,
        epoch: u64,
        parent: Option<Arc<Proposal>>,
        qc_prev: Option<QuorumCertificate>,
        final_value: Arc<BitString>,
        sc: Arc<StartingCertificate>,
        signer: u32,
        tip: Option<Arc<Block>>,
    ) -> Arc<Proposal> {
        let mut h = Sha256::new();
        h.update(b"proposal");
        h.update(round.to_be_bytes());
        h.update(epoch.to_be_bytes());
        h.update(parent.as_ref().map_or([0u8; 32], |p| p.digest));
        match &qc_prev {
            Some(q) => {
                h.update([1u8]);
                q.digest_into(&mut h);
            }
            None => h.update([0u8]),
        }
        hash_bits(&mut h, &final_value);
        sc.digest_into(&mut h);
        h.update(signer.to_be_bytes());
        let digest: Digest = h.finalize().into();
        Arc::new(Proposal {
            round,
            epoch,
            parent,
            qc_prev,
            final_value,
            sc,
            signer,
            tip,
            digest,
            validity: OnceLock::new(),
        })
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn parent(&self) -> Option<&Arc<Proposal>> {
        self.parent.as_ref()
    }

    pub fn qc_prev(&self) -> Option<&QuorumCertificate> {
        self.qc_prev.as_ref()
    }

    pub fn final_value(&self) -> &Arc<BitString> {
        &self.final_value
    }

    pub fn sc(&self) -> &Arc<StartingCertificate> {
        &self.sc
    }

    pub fn signer(&self) -> u32 {
        self.signer
    }

    pub fn tip(&self) -> Option<&Arc<Block>> {
        self.tip.as_ref()
    }

    pub fn digest(&self) -> Digest {
        self.digest
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(self.digest)
    }

    /// `r(QCprev(P))`.
    pub fn qc_prev_round(&self) -> u64 {
        lock_round(&self.qc_prev)
    }

    /// Whether `self` is `other` or one of its descendants.
    pub fn descends_from(&self, other: &Digest) -> bool {
        let mut cur = Some(self);
        while let Some(p) = cur {
            if &p.digest == other {
                return true;
            }
            cur = p.parent.as_deref();
        }
        false
    }

    /// Structural validity: every condition for `M`-validity except
    /// membership, which holds for any proposal a processor has received
    /// (embedded parents and certificates arrive with it).
    pub fn check(&self, n: u32) -> Result<(), CoreError> {
        let bad = |m: String| Err(CoreError::InvalidCertificate(m));
        let mut cur = Some(self);
        while let Some(p) = cur {
            if let Some((cached_n, true)) = p.validity.get() {
                if *cached_n == n {
                    return Ok(());
                }
            }
            match (&p.parent, &p.qc_prev) {
                (None, None) => {}
                (Some(par), Some(q)) => {
                    if q.stage != Stage::One || q.proposal.digest != par.digest {
                        return bad("QCprev is not a stage 1 QC for the parent".into());
                    }
                    q.validate(n)?;
                    if par.epoch != p.epoch {
                        return bad("epoch differs from parent".into());
                    }
                    if par.final_value != p.final_value {
                        return bad("final differs from parent".into());
                    }
                }
                _ => return bad("parent and QCprev disagree".into()),
            }
            if p.sc.epoch != p.epoch {
                return bad(format!(
                    "starting certificate for epoch {} in proposal for epoch {}",
                    p.sc.epoch, p.epoch
                ));
            }
            p.sc.validate(n)?;
            if !p.final_value.extends(p.sc.pref_star()) {
                return bad("final does not extend Pref*(SC)".into());
            }
            cur = p.parent.as_deref();
        }
        Ok(())
    }

    /// Cached [`Proposal::check`].
    pub fn is_valid(&self, n: u32) -> bool {
        if let Some((cached_n, ok)) = self.validity.get() {
            if *cached_n == n {
                return *ok;
            }
        }
        let ok = self.check(n).is_ok();
        let _ = self.validity.set((n, ok));
        ok
    }
}

impl fmt::Debug for Proposal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Proposal")
            .field("digest", &&self.digest_hex()[..12])
            .field("round", &self.round)
            .field("epoch", &self.epoch)
            .field(
                "parent",
                &self.parent.as_ref().map(|p| p.digest_hex()[..12].to_string()),
            )
            .field("final_len", &self.final_value.len())
            .field("signer", &self.signer)
            .finish()
    }
}

impl PartialEq for Proposal {
    fn eq(&self, other: &Self) -> bool {
        self.digest == other.digest
    }
}

impl Eq for Proposal {}

#[derive(Clone, Debug)]
pub struct Vote {
    pub proposal: Arc<Proposal>,
    pub stage: Stage,
    pub signer: u32,
}

/// Everything a Frosty processor may receive outside the sampling
/// exchange.
#[derive(Clone, Debug)]
pub enum Message {
    Stuck(StuckMsg),
    Ec(Arc<EpochCertificate>),
    Start(StartVote),
    Proposal(Arc<Proposal>),
    Vote(Vote),
    Qc(QuorumCertificate),
    Block(Arc<Block>),
}

impl Message {
    /// Short tag used in traces.
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Stuck(_) => "stuck",
            Message::Ec(_) => "ec",
            Message::Start(_) => "start",
            Message::Proposal(_) => "proposal",
            Message::Vote(_) => "vote",
            Message::Qc(_) => "qc",
            Message::Block(_) => "block",
        }
    }

    /// The processor in whose name the message is signed, if any.
    pub fn signer(&self) -> Option<u32> {
        match self {
            Message::Stuck(m) => Some(m.signer),
            Message::Start(v) => Some(v.signer),
            Message::Proposal(p) => Some(p.signer),
            Message::Vote(v) => Some(v.signer),
            Message::Ec(_) | Message::Qc(_) | Message::Block(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> BitString {
        BitString::parse(s).unwrap()
    }

    #[test]
    fn pref_star_unanimous() {
        let a = bs("0110");
        assert_eq!(pref_star(&[&a, &a, &a]), a);
    }

    #[test]
    fn pref_star_tie_stops() {
        let a = bs("0100");
        let b = bs("0111");
        assert_eq!(pref_star(&[&a, &b]), bs("01"));
        let c = bs("1");
        assert_eq!(pref_star(&[&a, &c]), BitString::new());
    }

    #[test]
    fn signer_set_rejects_duplicates() {
        let mut s = SignerSet::new();
        assert!(s.insert(5));
        assert!(s.insert(130));
        assert!(!s.insert(5));
        assert_eq!(s.members(), &[5, 130]);
        assert!(s.contains(130));
        assert!(!s.contains(4));
    }

    fn sc(n: u32, epoch: u64, pref: &BitString) -> Arc<StartingCertificate> {
        let votes = (0..sc_threshold(n))
            .map(|i| StartVote {
                epoch,
                pref: Arc::new(pref.clone()),
                signer: i,
            })
            .collect();
        Arc::new(StartingCertificate::new(epoch, votes))
    }

    #[test]
    fn first_proposal_valid_and_qc_checked() {
        let n = 7;
        let g = bs("1010");
        let s = sc(n, 1, &g);
        let p = Proposal::new(1, 1, None, None, Arc::new(bs("101011")), s.clone(), 1, None);
        assert!(p.is_valid(n));
        let short = Proposal::new(1, 1, None, None, Arc::new(bs("10")), s.clone(), 1, None);
        assert!(!short.is_valid(n));
        let q = QuorumCertificate {
            proposal: p.clone(),
            stage: Stage::One,
            signers: vec![0, 1, 2, 3, 4].into(),
        };
        let child = Proposal::new(
            2,
            1,
            Some(p.clone()),
            Some(q.clone()),
            p.final_value().clone(),
            s.clone(),
            2,
            None,
        );
        assert!(child.is_valid(n));
        assert!(child.descends_from(&p.digest()));
        let thin = QuorumCertificate {
            signers: vec![0, 1, 2, 3].into(),
            ..q.clone()
        };
        let bad = Proposal::new(
            2,
            1,
            Some(p.clone()),
            Some(thin),
            p.final_value().clone(),
            s.clone(),
            2,
            None,
        );
        assert!(!bad.is_valid(n));
        let dup = QuorumCertificate {
            signers: vec![0, 1, 2, 3, 3].into(),
            ..q.clone()
        };
        assert!(dup.validate(n).is_err());
        let other_final = Proposal::new(2, 1, Some(p.clone()), Some(q), Arc::new(bs("1010111")), s, 2, None);
        assert!(!other_final.is_valid(n));
    }

    #[test]
    fn digest_ignores_vote_order() {
        let g = Arc::new(bs("1"));
        let mk = |order: &[u32]| {
            let votes = order
                .iter()
                .map(|&i| StartVote {
                    epoch: 1,
                    pref: g.clone(),
                    signer: i,
                })
                .collect();
            let s = Arc::new(StartingCertificate::new(1, votes));
            Proposal::new(1, 1, None, None, g.clone(), s, 0, None)
        };
        assert_eq!(mk(&[0, 1, 2, 3, 4]).digest(), mk(&[4, 3, 2, 1, 0]).digest());
        assert_ne!(mk(&[0, 1, 2, 3, 4]).digest(), mk(&[0, 1, 2, 3, 5]).digest());
    }
}
