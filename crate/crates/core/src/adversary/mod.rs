//! Static Byzantine adversary.
//!
//! The adversary fixes its controlled participants and bribed distributors
//! before a run. It never touches ground-truth lists directly: everything a
//! strategy may use is collected into a [`Knowledge`] value, which holds the
//! controlled parties' own lists and round-1 messages plus the full segments
//! of distributors that chose to disclose.

mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::listgen::{combine_segments, ReceiverList, Segment, SenderList};
use crate::protocol::{make_claim, relay_step, Claim, ProtocolMessage};
use crate::types::{Bit, PartyId, Role};

pub use oracle::{
    forge_success_closed_form, forge_success_oracle, heuristic_forge_estimate, OracleError,
    MAX_ENUMERATION_LENGTH,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdversaryError {
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error("strategy {strategy} cannot drive the {role}")]
    UnsupportedRole { strategy: Strategy, role: Role },
    #[error("{0} is not a participant")]
    NotAParticipant(PartyId),
    #[error("{0} is not a list distributor")]
    NotADistributor(PartyId),
    #[error("only {honest} honest participants remain, at least 3 are required")]
    TooFewHonest { honest: usize },
    #[error("disclosure probability must lie strictly between 0 and 1, got {0}")]
    InvalidProbability(f64),
    #[error("{0} is not controlled by the adversary")]
    NotControlled(PartyId),
    #[error("the adversary holds no list for {0}")]
    MissingList(PartyId),
}

/// Named behaviour for controlled participants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Follow the protocol exactly.
    HonestMimic,
    /// Send nothing.
    Silent,
    /// Random bit with a random, always too short, position list.
    RandomJunk,
    /// Sender: consistent claims for different bits to different honest
    /// receivers. Receiver: forward the round-1 message to half of the honest
    /// receivers and flag to the rest.
    Equivocate,
    /// Receiver only: forge a claim for the opposite bit towards the first
    /// honest receiver, forward the genuine claim to everyone else.
    Forge,
    /// Receiver only: like `Forge`, but only when every segment has been
    /// disclosed; otherwise behave honestly.
    OmniscientForge,
    /// Send the flag to everyone.
    FlagAlways,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::HonestMimic,
        Strategy::Silent,
        Strategy::RandomJunk,
        Strategy::Equivocate,
        Strategy::Forge,
        Strategy::OmniscientForge,
        Strategy::FlagAlways,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::HonestMimic => "honest-mimic",
            Strategy::Silent => "silent",
            Strategy::RandomJunk => "random-junk",
            Strategy::Equivocate => "equivocate",
            Strategy::Forge => "forge",
            Strategy::OmniscientForge => "omniscient-forge",
            Strategy::FlagAlways => "flag-always",
        }
    }

    pub fn is_forging(self) -> bool {
        matches!(self, Strategy::Forge | Strategy::OmniscientForge)
    }

    pub fn supports(self, role: Role) -> bool {
        role == Role::Receiver || !self.is_forging()
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = AdversaryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| AdversaryError::UnknownStrategy(s.to_string()))
    }
}

/// Which distributors the adversary tries to bribe.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Bribed {
    All,
    #[default]
    None,
    Parties(BTreeSet<PartyId>),
}

impl Bribed {
    pub fn contains(&self, distributor: PartyId) -> bool {
        match self {
            Bribed::All => true,
            Bribed::None => false,
            Bribed::Parties(set) => set.contains(&distributor),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BribedRepr {
    Keyword(String),
    Parties(BTreeSet<PartyId>),
}

impl Serialize for Bribed {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Bribed::All => BribedRepr::Keyword("all".into()),
            Bribed::None => BribedRepr::Keyword("none".into()),
            Bribed::Parties(set) => BribedRepr::Parties(set.clone()),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Bribed {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match BribedRepr::deserialize(deserializer)? {
            BribedRepr::Keyword(k) if k == "all" => Ok(Bribed::All),
            BribedRepr::Keyword(k) if k == "none" => Ok(Bribed::None),
            BribedRepr::Keyword(k) => Err(serde::de::Error::custom(format!(
                "bribed must be \"all\", \"none\" or a list of distributor indices, got {k:?}"
            ))),
            BribedRepr::Parties(set) if set.is_empty() => Ok(Bribed::None),
            BribedRepr::Parties(set) => Ok(Bribed::Parties(set)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarySpec {
    pub controlled: BTreeSet<PartyId>,
    pub bribed: Bribed,
    pub disclosure_probability: f64,
    pub sender_strategy: Strategy,
    pub receiver_strategy: Strategy,
}

impl Default for AdversarySpec {
    fn default() -> Self {
        Self {
            controlled: BTreeSet::new(),
            bribed: Bribed::None,
            disclosure_probability: 0.5,
            sender_strategy: Strategy::HonestMimic,
            receiver_strategy: Strategy::HonestMimic,
        }
    }
}

impl AdversarySpec {
    /// Checks the spec against `n` participants and `d` distributors.
    pub fn validate(&self, n: usize, d: usize) -> Result<(), AdversaryError> {
        for p in &self.controlled {
            if p.0 < 1 || p.0 > n {
                return Err(AdversaryError::NotAParticipant(*p));
            }
        }
        let honest = n - self.controlled.len();
        if honest < 3 {
            return Err(AdversaryError::TooFewHonest { honest });
        }
        if let Bribed::Parties(set) = &self.bribed {
            for p in set {
                if p.0 <= n || p.0 > n + d {
                    return Err(AdversaryError::NotADistributor(*p));
                }
            }
        }
        let p = self.disclosure_probability;
        if !(p > 0.0 && p < 1.0) {
            return Err(AdversaryError::InvalidProbability(p));
        }
        if !self.sender_strategy.supports(Role::Sender) {
            return Err(AdversaryError::UnsupportedRole {
                strategy: self.sender_strategy,
                role: Role::Sender,
            });
        }
        Ok(())
    }

    pub fn is_controlled(&self, party: PartyId) -> bool {
        self.controlled.contains(&party)
    }

    /// Whether any controlled participant runs a forging strategy.
    pub fn can_forge(&self) -> bool {
        self.controlled.iter().any(|p| *p != PartyId::SENDER) && self.receiver_strategy.is_forging()
    }
}

/// Everything the adversary is allowed to look at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Knowledge {
    disclosed: Vec<Option<Segment>>,
    sender_list: Option<SenderList>,
    receiver_lists: BTreeMap<PartyId, ReceiverList>,
    round1: BTreeMap<PartyId, Option<ProtocolMessage>>,
}

impl Knowledge {
    pub fn disclosed_mask(&self) -> Vec<bool> {
        self.disclosed.iter().map(Option::is_some).collect()
    }

    /// Every distributor disclosed, so every party's list is known.
    pub fn is_complete(&self) -> bool {
        self.disclosed.iter().all(Option::is_some)
    }

    /// Disclosed segment by distributor ordinal (0 for `P(n+1)`).
    pub fn disclosed_segment(&self, ordinal: usize) -> Option<&Segment> {
        self.disclosed.get(ordinal).and_then(Option::as_ref)
    }

    pub fn sender_list(&self) -> Option<&SenderList> {
        self.sender_list.as_ref()
    }

    pub fn receiver_list(&self, party: PartyId) -> Option<&ReceiverList> {
        self.receiver_lists.get(&party)
    }

    /// Round-1 message received by a controlled receiver, if any arrived.
    pub fn round1_message(&self, party: PartyId) -> Option<&ProtocolMessage> {
        self.round1.get(&party).and_then(Option::as_ref)
    }

    /// Records what a controlled receiver got from the sender in round 1.
    pub fn observe_round1(&mut self, party: PartyId, msg: Option<ProtocolMessage>) {
        if self.receiver_lists.contains_key(&party) {
            self.round1.insert(party, msg);
        }
    }
}

/// Flips one coin per bribed distributor and assembles the adversary's
/// knowledge. Unbribed distributors never disclose.
pub fn resolve_bribes<R: Rng + ?Sized>(
    spec: &AdversarySpec,
    segments: &[Segment],
    rng: &mut R,
) -> Knowledge {
    let disclosed = segments
        .iter()
        .map(|seg| {
            let leaks =
                spec.bribed.contains(seg.distributor) && rng.gen_bool(spec.disclosure_probability);
            leaks.then(|| seg.clone())
        })
        .collect();

    let sender_list = spec
        .is_controlled(PartyId::SENDER)
        .then(|| combine_segments(segments.iter().map(Segment::sender_slice).collect()))
        .and_then(Result::ok);
    let receiver_lists = spec
        .controlled
        .iter()
        .filter(|p| **p != PartyId::SENDER)
        .filter_map(|p| {
            let slices = segments
                .iter()
                .map(|s| s.receiver_slice(*p))
                .collect::<Option<Vec<_>>>()?;
            combine_segments(slices).ok().map(|l| (*p, l))
        })
        .collect();

    Knowledge {
        disclosed,
        sender_list,
        receiver_lists,
        round1: BTreeMap::new(),
    }
}

/// Per-receiver instruction for an equivocating sender.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitAssignment {
    /// The honest claim for this bit.
    Consistent(Bit),
    /// The honest claim for this bit with its last position dropped, which
    /// every receiver rejects.
    Truncated(Bit),
}

/// Builds a (possibly different) claim for every receiver from the sender's
/// real list.
pub fn split_sender_claims(
    sender_list: &SenderList,
    assignment: &BTreeMap<PartyId, SplitAssignment>,
) -> BTreeMap<PartyId, Claim> {
    assignment
        .iter()
        .map(|(k, a)| {
            let claim = match *a {
                SplitAssignment::Consistent(b) => make_claim(b, sender_list),
                SplitAssignment::Truncated(b) => {
                    let mut c = make_claim(b, sender_list);
                    c.positions.pop();
                    c
                }
            };
            (*k, claim)
        })
        .collect()
}

/// Fabricates a claim for `target_bit` aimed at `target`.
///
/// Positions whose value on the target's list is known from disclosed
/// segments come first: agreement positions of `target_bit`, then discord
/// positions where the target holds `target_bit`. The rest is drawn uniformly
/// from the undisclosed positions where the forger's own list holds
/// `target_bit`, excluding positions the sender claimed for the other bit.
/// If the sender's claim already carries `target_bit` it is returned as is.
pub fn forge_claim<R: Rng + ?Sized>(
    target_bit: Bit,
    own_list: &ReceiverList,
    sender_claim: Option<&Claim>,
    know: &Knowledge,
    target: PartyId,
    rng: &mut R,
) -> Claim {
    if let Some(c) = sender_claim.filter(|c| c.bit == target_bit) {
        return c.clone();
    }
    let needed = own_list.len() / 3;
    let excluded: BTreeSet<usize> = sender_claim
        .map(|c| c.positions.iter().copied().collect())
        .unwrap_or_default();

    let mut known_agreement = Vec::new();
    let mut known_discord = Vec::new();
    let mut candidates = Vec::new();
    for s in 0..own_list.segment_count() {
        let range = own_list.segment_range(s);
        let offset = range.start;
        match know.disclosed_segment(s) {
            Some(seg) => {
                let target_list = seg.receiver(target);
                for (j, t) in seg.sender.iter().enumerate() {
                    match t.agreement_bit() {
                        Some(b) if b == target_bit => known_agreement.push(offset + j),
                        Some(_) => {}
                        None => {
                            if target_list.and_then(|l| l.get(j)) == Some(&target_bit) {
                                known_discord.push(offset + j);
                            }
                        }
                    }
                }
            }
            None => candidates.extend(
                range.filter(|x| own_list.get(*x) == Some(target_bit) && !excluded.contains(x)),
            ),
        }
    }

    let mut positions: Vec<usize> = known_agreement
        .into_iter()
        .chain(known_discord)
        .take(needed)
        .collect();
    let remaining = (needed - positions.len()).min(candidates.len());
    positions.extend(
        index::sample(rng, candidates.len(), remaining)
            .into_iter()
            .map(|i| candidates[i]),
    );
    positions.sort_unstable();
    Claim::new(target_bit, positions)
}

/// A message produced by a controlled participant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outgoing {
    pub to: PartyId,
    pub message: ProtocolMessage,
    /// Set on claims fabricated by a forging strategy.
    pub forged: bool,
}

impl Outgoing {
    fn plain(to: PartyId, message: ProtocolMessage) -> Self {
        Self {
            to,
            message,
            forged: false,
        }
    }
}

/// Round inputs visible to one controlled participant.
#[derive(Debug, Clone, Copy)]
pub struct ActContext<'a> {
    pub party: PartyId,
    pub role: Role,
    /// All receivers `P2..=Pn`.
    pub receivers: &'a [PartyId],
    /// The value an honest sender would send; used by sender strategies.
    pub sender_input: Bit,
    pub knowledge: &'a Knowledge,
}

fn junk_claim<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Claim {
    let short = rng.gen_range(0..len / 3);
    let mut positions = index::sample(rng, len, short).into_vec();
    positions.sort_unstable();
    Claim::new(Bit::from(rng.gen_bool(0.5)), positions)
}

/// Runs the configured strategy for one controlled participant.
pub fn adversary_act<R: Rng + ?Sized>(
    ctx: &ActContext<'_>,
    spec: &AdversarySpec,
    rng: &mut R,
) -> Result<Vec<Outgoing>, AdversaryError> {
    if !spec.is_controlled(ctx.party) {
        return Err(AdversaryError::NotControlled(ctx.party));
    }
    let honest: Vec<PartyId> = ctx
        .receivers
        .iter()
        .copied()
        .filter(|r| !spec.is_controlled(*r))
        .collect();
    match ctx.role {
        Role::Sender => sender_act(ctx, spec.sender_strategy, &honest, rng),
        Role::Receiver => receiver_act(ctx, spec.receiver_strategy, &honest, rng),
    }
}

fn sender_act<R: Rng + ?Sized>(
    ctx: &ActContext<'_>,
    strategy: Strategy,
    honest: &[PartyId],
    rng: &mut R,
) -> Result<Vec<Outgoing>, AdversaryError> {
    let list = ctx
        .knowledge
        .sender_list()
        .ok_or(AdversaryError::MissingList(ctx.party))?;
    let to_all = |msg: ProtocolMessage| {
        ctx.receivers
            .iter()
            .map(|r| Outgoing::plain(*r, msg.clone()))
            .collect::<Vec<_>>()
    };
    Ok(match strategy {
        Strategy::HonestMimic => to_all(ProtocolMessage::Claim(make_claim(ctx.sender_input, list))),
        Strategy::Silent => Vec::new(),
        Strategy::FlagAlways => to_all(ProtocolMessage::Flag),
        Strategy::RandomJunk => ctx
            .receivers
            .iter()
            .map(|r| Outgoing::plain(*r, ProtocolMessage::Claim(junk_claim(list.len(), rng))))
            .collect(),
        Strategy::Equivocate => {
            let first_half = honest.len().div_ceil(2);
            let assignment = ctx
                .receivers
                .iter()
                .map(|r| {
                    let bit = match honest.iter().position(|h| h == r) {
                        Some(i) if i >= first_half => ctx.sender_input.flip(),
                        _ => ctx.sender_input,
                    };
                    (*r, SplitAssignment::Consistent(bit))
                })
                .collect();
            split_sender_claims(list, &assignment)
                .into_iter()
                .map(|(r, c)| Outgoing::plain(r, ProtocolMessage::Claim(c)))
                .collect()
        }
        Strategy::Forge | Strategy::OmniscientForge => {
            return Err(AdversaryError::UnsupportedRole {
                strategy,
                role: Role::Sender,
            })
        }
    })
}

fn receiver_act<R: Rng + ?Sized>(
    ctx: &ActContext<'_>,
    strategy: Strategy,
    honest: &[PartyId],
    rng: &mut R,
) -> Result<Vec<Outgoing>, AdversaryError> {
    let know = ctx.knowledge;
    let list = know
        .receiver_list(ctx.party)
        .ok_or(AdversaryError::MissingList(ctx.party))?;
    let received = know.round1_message(ctx.party);
    let to_all = |msg: ProtocolMessage| {
        ctx.receivers
            .iter()
            .map(|r| Outgoing::plain(*r, msg.clone()))
            .collect::<Vec<_>>()
    };
    let honest_relay = || to_all(relay_step(received, list));

    Ok(match strategy {
        Strategy::HonestMimic => honest_relay(),
        Strategy::Silent => Vec::new(),
        Strategy::FlagAlways => to_all(ProtocolMessage::Flag),
        Strategy::RandomJunk => ctx
            .receivers
            .iter()
            .map(|r| Outgoing::plain(*r, ProtocolMessage::Claim(junk_claim(list.len(), rng))))
            .collect(),
        Strategy::Equivocate => {
            let Some(msg) = received else {
                return Ok(to_all(ProtocolMessage::Flag));
            };
            let others: Vec<PartyId> = honest.iter().copied().filter(|h| *h != ctx.party).collect();
            let first_half = others.len().div_ceil(2);
            ctx.receivers
                .iter()
                .map(|r| match others.iter().position(|h| h == r) {
                    Some(i) if i >= first_half => Outgoing::plain(*r, ProtocolMessage::Flag),
                    _ => Outgoing::plain(*r, msg.clone()),
                })
                .collect()
        }
        Strategy::OmniscientForge if !know.is_complete() => honest_relay(),
        Strategy::Forge | Strategy::OmniscientForge => {
            let Some(target) = honest.iter().copied().find(|h| *h != ctx.party) else {
                return Ok(honest_relay());
            };
            let sender_claim = received.and_then(ProtocolMessage::claim);
            let target_bit = match sender_claim {
                Some(c) => c.bit.flip(),
                None => Bit::from(rng.gen_bool(0.5)),
            };
            let forged = forge_claim(target_bit, list, sender_claim, know, target, rng);
            let forwarded = received.cloned().unwrap_or(ProtocolMessage::Flag);
            ctx.receivers
                .iter()
                .map(|r| {
                    if *r == target {
                        Outgoing {
                            to: *r,
                            message: ProtocolMessage::Claim(forged.clone()),
                            forged: true,
                        }
                    } else {
                        Outgoing::plain(*r, forwarded.clone())
                    }
                })
                .collect()
        }
    })
}
