//! Agreement stage: sender claim, receiver relay, and the decision rule.
//!
//! Round 1: the sender sends each receiver a [`Claim`] (a bit plus every
//! position where that bit appears on the sender list). Round 2: each receiver
//! checks the claim against its own list and either forwards it verbatim or
//! sends [`ProtocolMessage::Flag`] to every receiver, itself included.
//! Round 3: each receiver runs [`decide`] over its [`Inbox`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::listgen::{positions_of, ReceiverList, SenderList};
use crate::types::{Bit, PartyId};

/// A bit together with the positions that are supposed to back it.
///
/// Claims arriving from the network are untrusted, so the position list is
/// not validated on construction; [`check_claim`] does that.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Claim {
    pub bit: Bit,
    pub positions: Vec<usize>,
}

impl Claim {
    pub fn new(bit: Bit, positions: Vec<usize>) -> Self {
        Self { bit, positions }
    }

    /// Strictly ascending, within `0..len` and exactly `len / 3` entries long.
    pub fn is_well_formed(&self, len: usize) -> bool {
        self.positions.len() * 3 == len
            && self.positions.windows(2).all(|w| w[0] < w[1])
            && self.positions.last().is_none_or(|p| *p < len)
    }
}

impl fmt::Display for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:[", self.bit)?;
        for (i, p) in self.positions.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ProtocolMessage {
    Claim(Claim),
    /// "I have received an inconsistent message."
    Flag,
}

impl ProtocolMessage {
    pub fn claim(&self) -> Option<&Claim> {
        match self {
            ProtocolMessage::Claim(c) => Some(c),
            ProtocolMessage::Flag => None,
        }
    }
}

/// Rendered as `bit:[p1,p2,...]` or `BOT`.
impl fmt::Display for ProtocolMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolMessage::Claim(c) => c.fmt(f),
            ProtocolMessage::Flag => f.write_str("BOT"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MessageParseError {
    Malformed(String),
}

impl std::str::FromStr for ProtocolMessage {
    type Err = MessageParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MessageParseError::Malformed(s.to_string());
        if s == "BOT" {
            return Ok(ProtocolMessage::Flag);
        }
        let (bit, rest) = s.split_once(':').ok_or_else(bad)?;
        let bit = bit
            .parse::<u8>()
            .ok()
            .and_then(|b| Bit::try_from(b).ok())
            .ok_or_else(bad)?;
        let inner = rest
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(bad)?;
        let positions = if inner.is_empty() {
            Vec::new()
        } else {
            inner
                .split(',')
                .map(|p| p.parse::<usize>().map_err(|_| bad()))
                .collect::<Result<_, _>>()?
        };
        Ok(ProtocolMessage::Claim(Claim { bit, positions }))
    }
}

/// Final output of a participant; `Abort` is the symbol ⊥.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Value(Bit),
    Abort,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Value(b) => write!(f, "{b}"),
            Decision::Abort => f.write_str("BOT"),
        }
    }
}

/// How to treat a complement of H that mixes failing claims and flags.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecideRule {
    /// A mixed complement aborts.
    #[default]
    Literal,
    /// A mixed complement still decides the common value.
    Merged,
}

impl fmt::Display for DecideRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecideRule::Literal => f.write_str("literal"),
            DecideRule::Merged => f.write_str("merged"),
        }
    }
}

impl std::str::FromStr for DecideRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "literal" => Ok(DecideRule::Literal),
            "merged" => Ok(DecideRule::Merged),
            other => Err(format!(
                "unknown decide rule {other:?} (expected literal or merged)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("inbox has no message from {0}")]
    IncompleteInbox(PartyId),
    #[error("{0} is not an expected round-2 sender")]
    UnexpectedSender(PartyId),
}

/// Round-2 messages collected by one receiver, including its own.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inbox {
    messages: BTreeMap<PartyId, Option<ProtocolMessage>>,
}

impl Inbox {
    /// Empty inbox expecting one message from each of `receivers`.
    pub fn new(receivers: impl IntoIterator<Item = PartyId>) -> Self {
        Self {
            messages: receivers.into_iter().map(|r| (r, None)).collect(),
        }
    }

    pub fn insert(&mut self, from: PartyId, msg: ProtocolMessage) -> Result<(), ProtocolError> {
        match self.messages.get_mut(&from) {
            Some(slot) => {
                *slot = Some(msg);
                Ok(())
            }
            None => Err(ProtocolError::UnexpectedSender(from)),
        }
    }

    /// Maps every still-missing message to [`ProtocolMessage::Flag`] and
    /// returns the parties that were silent.
    pub fn fill_missing(&mut self) -> Vec<PartyId> {
        let mut silent = Vec::new();
        for (party, slot) in self.messages.iter_mut() {
            if slot.is_none() {
                *slot = Some(ProtocolMessage::Flag);
                silent.push(*party);
            }
        }
        silent
    }

    pub fn get(&self, from: PartyId) -> Option<&ProtocolMessage> {
        self.messages.get(&from).and_then(Option::as_ref)
    }

    pub fn senders(&self) -> impl Iterator<Item = PartyId> + '_ {
        self.messages.keys().copied()
    }
}

/// The sender's honest claim for `b`.
pub fn make_claim(b: Bit, sender_list: &SenderList) -> Claim {
    Claim {
        bit: b,
        positions: positions_of(sender_list, b),
    }
}

/// `true` iff the claim is well formed for this list length and every listed
/// position holds the claimed bit on `list`.
pub fn check_claim(claim: &Claim, list: &ReceiverList) -> bool {
    claim.is_well_formed(list.len())
        && claim
            .positions
            .iter()
            .all(|&x| list.get(x) == Some(claim.bit))
}

/// An honest receiver's round-2 message. A missing round-1 message counts as
/// inconsistent.
pub fn relay_step(received: Option<&ProtocolMessage>, list: &ReceiverList) -> ProtocolMessage {
    match received {
        Some(ProtocolMessage::Claim(c)) if check_claim(c, list) => {
            ProtocolMessage::Claim(c.clone())
        }
        _ => ProtocolMessage::Flag,
    }
}

/// Round-3 decision of an honest receiver.
///
/// With `H` the set of consistent claims: conflicting bits in `H` abort;
/// otherwise `|H| >= 2` decides the common bit when every other message is a
/// failing claim, or every other message is a flag. Everything else aborts.
pub fn decide(
    inbox: &Inbox,
    list: &ReceiverList,
    rule: DecideRule,
) -> Result<Decision, ProtocolError> {
    let mut consistent_bits = Vec::new();
    let (mut failing, mut flags) = (0usize, 0usize);
    for (party, slot) in &inbox.messages {
        match slot {
            None => return Err(ProtocolError::IncompleteInbox(*party)),
            Some(ProtocolMessage::Claim(c)) if check_claim(c, list) => consistent_bits.push(c.bit),
            Some(ProtocolMessage::Claim(_)) => failing += 1,
            Some(ProtocolMessage::Flag) => flags += 1,
        }
    }
    if consistent_bits.len() < 2 {
        return Ok(Decision::Abort);
    }
    let common = consistent_bits[0];
    if consistent_bits.iter().any(|b| *b != common) {
        return Ok(Decision::Abort);
    }
    let accepted = match rule {
        DecideRule::Literal => failing == 0 || flags == 0,
        DecideRule::Merged => true,
    };
    Ok(if accepted {
        Decision::Value(common)
    } else {
        Decision::Abort
    })
}

/// The honest sender outputs the bit it sent.
pub fn sender_decision(b: Bit) -> Decision {
    Decision::Value(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Trit;

    fn rlist(v: &[u8]) -> ReceiverList {
        ReceiverList::single(
            PartyId(2),
            v.iter().map(|x| Bit::try_from(*x).unwrap()).collect(),
        )
    }

    fn slist(v: &[u8]) -> SenderList {
        SenderList::single(
            PartyId::SENDER,
            v.iter().map(|x| Trit::try_from(*x).unwrap()).collect(),
        )
    }

    fn claim(bit: u8, positions: &[usize]) -> ProtocolMessage {
        ProtocolMessage::Claim(Claim::new(Bit::try_from(bit).unwrap(), positions.to_vec()))
    }

    fn inbox(msgs: &[(usize, ProtocolMessage)]) -> Inbox {
        let mut ib = Inbox::new(msgs.iter().map(|(p, _)| PartyId(*p)));
        for (p, m) in msgs {
            ib.insert(PartyId(*p), m.clone()).unwrap();
        }
        ib
    }

    #[test]
    fn claims_from_sender_list() {
        let l1 = slist(&[0, 1, 2, 0, 1, 2]);
        assert_eq!(
            make_claim(Bit::Zero, &l1),
            Claim::new(Bit::Zero, vec![0, 3])
        );
        assert_eq!(make_claim(Bit::One, &l1), Claim::new(Bit::One, vec![1, 4]));
    }

    #[test]
    fn check_claim_examples() {
        let l2 = rlist(&[0, 1, 0, 0, 1, 1]);
        assert!(check_claim(&Claim::new(Bit::Zero, vec![0, 3]), &l2));
        assert!(!check_claim(&Claim::new(Bit::One, vec![2, 5]), &l2));
        assert!(!check_claim(&Claim::new(Bit::Zero, vec![0]), &l2));
        assert!(!check_claim(&Claim::new(Bit::Zero, vec![]), &l2));
        assert!(!check_claim(&Claim::new(Bit::Zero, vec![3, 0]), &l2));
        assert!(!check_claim(&Claim::new(Bit::Zero, vec![0, 0]), &l2));
        assert!(!check_claim(&Claim::new(Bit::One, vec![4, 6]), &l2));
    }

    #[test]
    fn relay_examples() {
        let l2 = rlist(&[0, 1, 0, 0, 1, 1]);
        let good = claim(0, &[0, 3]);
        assert_eq!(relay_step(Some(&good), &l2), good);
        assert_eq!(
            relay_step(Some(&claim(1, &[2, 5])), &l2),
            ProtocolMessage::Flag
        );
        assert_eq!(
            relay_step(Some(&ProtocolMessage::Flag), &l2),
            ProtocolMessage::Flag
        );
        assert_eq!(relay_step(None, &l2), ProtocolMessage::Flag);
    }

    // Receiver list used by the decision examples: ones at 1,2,4,5; zeros at 0,3.
    fn decision_list() -> ReceiverList {
        rlist(&[0, 1, 1, 0, 1, 1])
    }

    #[test]
    fn all_consistent_same_bit_decides() {
        let ib = inbox(&[
            (2, claim(1, &[1, 4])),
            (3, claim(1, &[1, 4])),
            (4, claim(1, &[2, 5])),
        ]);
        assert_eq!(
            decide(&ib, &decision_list(), DecideRule::Literal).unwrap(),
            Decision::Value(Bit::One)
        );
    }

    #[test]
    fn conflicting_consistent_bits_abort() {
        let ib = inbox(&[(2, claim(0, &[0, 3])), (3, claim(1, &[1, 4]))]);
        for rule in [DecideRule::Literal, DecideRule::Merged] {
            assert_eq!(
                decide(&ib, &decision_list(), rule).unwrap(),
                Decision::Abort
            );
        }
    }

    #[test]
    fn flag_complement_decides() {
        let ib = inbox(&[
            (2, claim(1, &[1, 4])),
            (3, ProtocolMessage::Flag),
            (4, claim(1, &[1, 4])),
        ]);
        assert_eq!(
            decide(&ib, &decision_list(), DecideRule::Literal).unwrap(),
            Decision::Value(Bit::One)
        );
    }

    #[test]
    fn failing_complement_decides() {
        let ib = inbox(&[
            (2, claim(1, &[1, 4])),
            (3, claim(1, &[1, 4])),
            (4, claim(0, &[1, 4])),
        ]);
        assert_eq!(
            decide(&ib, &decision_list(), DecideRule::Literal).unwrap(),
            Decision::Value(Bit::One)
        );
    }

    #[test]
    fn mixed_complement_depends_on_rule() {
        let ib = inbox(&[
            (2, claim(1, &[1, 4])),
            (3, claim(1, &[1, 4])),
            (4, claim(0, &[0, 1])),
            (5, ProtocolMessage::Flag),
        ]);
        assert_eq!(
            decide(&ib, &decision_list(), DecideRule::Literal).unwrap(),
            Decision::Abort
        );
        assert_eq!(
            decide(&ib, &decision_list(), DecideRule::Merged).unwrap(),
            Decision::Value(Bit::One)
        );
    }

    #[test]
    fn single_consistent_claim_aborts() {
        let ib = inbox(&[
            (2, claim(1, &[1, 4])),
            (3, ProtocolMessage::Flag),
            (4, ProtocolMessage::Flag),
        ]);
        assert_eq!(
            decide(&ib, &decision_list(), DecideRule::Merged).unwrap(),
            Decision::Abort
        );
    }

    #[test]
    fn incomplete_inbox_is_an_error() {
        let mut ib = Inbox::new([PartyId(2), PartyId(3)]);
        ib.insert(PartyId(2), ProtocolMessage::Flag).unwrap();
        assert_eq!(
            decide(&ib, &decision_list(), DecideRule::Literal),
            Err(ProtocolError::IncompleteInbox(PartyId(3)))
        );
        assert_eq!(
            ib.insert(PartyId(9), ProtocolMessage::Flag),
            Err(ProtocolError::UnexpectedSender(PartyId(9)))
        );
        assert_eq!(ib.fill_missing(), vec![PartyId(3)]);
        assert_eq!(ib.get(PartyId(3)), Some(&ProtocolMessage::Flag));
    }

    #[test]
    fn sender_outputs_its_bit() {
        assert_eq!(sender_decision(Bit::Zero), Decision::Value(Bit::Zero));
        assert_eq!(sender_decision(Bit::One), Decision::Value(Bit::One));
    }

    #[test]
    fn message_text_form() {
        let m = claim(1, &[2, 7, 9]);
        assert_eq!(m.to_string(), "1:[2,7,9]");
        assert_eq!("1:[2,7,9]".parse::<ProtocolMessage>().unwrap(), m);
        assert_eq!(ProtocolMessage::Flag.to_string(), "BOT");
        assert_eq!(
            "BOT".parse::<ProtocolMessage>().unwrap(),
            ProtocolMessage::Flag
        );
        assert_eq!("0:[]".parse::<ProtocolMessage>().unwrap(), claim(0, &[]));
        assert!("2:[1]".parse::<ProtocolMessage>().is_err());
        assert!("1:2,3".parse::<ProtocolMessage>().is_err());
    }
}
