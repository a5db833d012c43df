//! Correlated reference lists.
//!
//! Every distributor produces one [`Segment`]: a trit list for the sender and
//! one bit list per receiver. The lists agree wherever the sender holds 0 or 1;
//! on the sender's discord positions (value 2) each receiver holds a balanced,
//! independently drawn bit pattern that nobody else learns.
//!
//! Participants concatenate the slices they received from distributors
//! `n+1, ..., n+d` into a [`CombinedReferenceList`].
//!
//! # Text form
//!
//! Lists are written one per line with symbols separated by commas. Lines
//! starting with `#` carry metadata. A segment is
//!
//! ```text
//! # segment P5
//! 0,1,2,0,1,2
//! 0,1,1,0,1,0
//! 0,1,0,0,1,1
//! ```
//!
//! where the first data line is the sender list and the following lines are
//! the receivers `P2, P3, ...` in order. A combined list is
//!
//! ```text
//! # combined P2 boundaries=0,6
//! 0,1,1,0,1,0,1,1,0,0,0,1
//! ```

use std::fmt::{self, Write as _};
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::types::{Bit, PartyId, Trit};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ListError {
    #[error("segment length must be a positive multiple of 6, got {0}")]
    InvalidLength(usize),
    #[error("at least 2 receivers are required, got {0}")]
    TooFewReceivers(usize),
    #[error("cannot combine an empty sequence of segments")]
    Empty,
    #[error("slice from {distributor} has length {found}, expected {expected}")]
    LengthMismatch {
        distributor: PartyId,
        expected: usize,
        found: usize,
    },
    #[error("slice belongs to {found}, expected {expected}")]
    PartyMismatch { expected: PartyId, found: PartyId },
    #[error("distributor {0} contributes more than one slice")]
    DuplicateDistributor(PartyId),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// A symbol that can appear on a reference list.
pub trait ListSymbol: Copy + Eq + fmt::Debug + fmt::Display {
    fn from_u8(v: u8) -> Option<Self>;
}

impl ListSymbol for Bit {
    fn from_u8(v: u8) -> Option<Self> {
        Bit::try_from(v).ok()
    }
}

impl ListSymbol for Trit {
    fn from_u8(v: u8) -> Option<Self> {
        Trit::try_from(v).ok()
    }
}

/// One distributor's output.
///
/// `receivers[i]` is the list of party `P(i + 2)`. Fields are public so that
/// malformed segments can be built and fed to [`verify_segment`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub distributor: PartyId,
    pub sender: Vec<Trit>,
    pub receivers: Vec<Vec<Bit>>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.sender.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sender.is_empty()
    }

    pub fn receiver_count(&self) -> usize {
        self.receivers.len()
    }

    pub fn receiver(&self, party: PartyId) -> Option<&[Bit]> {
        party
            .0
            .checked_sub(2)
            .and_then(|i| self.receivers.get(i))
            .map(Vec::as_slice)
    }

    pub fn receiver_mut(&mut self, party: PartyId) -> Option<&mut Vec<Bit>> {
        party
            .0
            .checked_sub(2)
            .and_then(|i| self.receivers.get_mut(i))
    }

    pub fn discord_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.sender
            .iter()
            .enumerate()
            .filter(|(_, t)| **t == Trit::Discord)
            .map(|(j, _)| j)
    }

    pub fn sender_slice(&self) -> ListSlice<Trit> {
        ListSlice {
            party: PartyId::SENDER,
            distributor: self.distributor,
            entries: self.sender.clone(),
        }
    }

    pub fn receiver_slice(&self, party: PartyId) -> Option<ListSlice<Bit>> {
        self.receiver(party).map(|entries| ListSlice {
            party,
            distributor: self.distributor,
            entries: entries.to_vec(),
        })
    }
}

/// The part of one segment delivered to one participant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListSlice<S> {
    pub party: PartyId,
    pub distributor: PartyId,
    pub entries: Vec<S>,
}

/// Concatenation of a participant's slices in distributor order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombinedReferenceList<S> {
    party: PartyId,
    entries: Vec<S>,
    boundaries: Vec<usize>,
}

pub type SenderList = CombinedReferenceList<Trit>;
pub type ReceiverList = CombinedReferenceList<Bit>;

impl<S: ListSymbol> CombinedReferenceList<S> {
    /// Wraps a single unsegmented list. Mostly useful in tests.
    pub fn single(party: PartyId, entries: Vec<S>) -> Self {
        Self {
            party,
            entries,
            boundaries: vec![0],
        }
    }

    pub fn party(&self) -> PartyId {
        self.party
    }

    pub fn entries(&self) -> &[S] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, position: usize) -> Option<S> {
        self.entries.get(position).copied()
    }

    /// Start offset of every segment.
    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn segment_count(&self) -> usize {
        self.boundaries.len()
    }

    pub fn segment_range(&self, index: usize) -> Range<usize> {
        let start = self.boundaries[index];
        let end = self
            .boundaries
            .get(index + 1)
            .copied()
            .unwrap_or(self.entries.len());
        start..end
    }

    /// Index of the segment containing `position`.
    pub fn segment_of(&self, position: usize) -> usize {
        match self.boundaries.binary_search(&position) {
            Ok(i) => i,
            Err(i) => i - 1,
        }
    }
}

/// Draws a fresh segment for `receiver_count` receivers.
///
/// The sender list is a uniform shuffle of `m/3` copies each of 0, 1 and 2.
/// Each receiver copies the sender on the agreement positions and receives its
/// own uniform shuffle of `m/6` zeros and `m/6` ones on the discord positions.
pub fn generate_segment<R: Rng + ?Sized>(
    distributor: PartyId,
    m: usize,
    receiver_count: usize,
    rng: &mut R,
) -> Result<Segment, ListError> {
    if m == 0 || !m.is_multiple_of(6) {
        return Err(ListError::InvalidLength(m));
    }
    if receiver_count < 2 {
        return Err(ListError::TooFewReceivers(receiver_count));
    }
    let third = m / 3;
    let mut sender: Vec<Trit> = Trit::ALL
        .iter()
        .flat_map(|t| std::iter::repeat_n(*t, third))
        .collect();
    sender.shuffle(rng);

    let discord: Vec<usize> = sender
        .iter()
        .enumerate()
        .filter(|(_, t)| **t == Trit::Discord)
        .map(|(j, _)| j)
        .collect();
    let mut pattern: Vec<Bit> = Bit::ALL
        .iter()
        .flat_map(|b| std::iter::repeat_n(*b, m / 6))
        .collect();

    let receivers = (0..receiver_count)
        .map(|_| {
            let mut list: Vec<Bit> = sender
                .iter()
                .map(|t| t.agreement_bit().unwrap_or(Bit::Zero))
                .collect();
            pattern.shuffle(rng);
            for (&j, &b) in discord.iter().zip(&pattern) {
                list[j] = b;
            }
            list
        })
        .collect();

    Ok(Segment {
        distributor,
        sender,
        receivers,
    })
}

/// A broken list property, numbered as in the construction rules:
/// 1 length, 2 sender symbol counts, 4/5 forced agreement, 6 discord balance.
/// Rule 3 (receiver lists are binary) holds by construction of [`Bit`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Length {
        m: usize,
    },
    ListLength {
        party: PartyId,
        len: usize,
        expected: usize,
    },
    NoReceivers,
    SenderCounts {
        zeros: usize,
        ones: usize,
        discords: usize,
        expected: usize,
    },
    ForcedMismatch {
        receiver: PartyId,
        position: usize,
        expected: Bit,
    },
    DiscordImbalance {
        receiver: PartyId,
        zeros: usize,
        ones: usize,
    },
}

impl Violation {
    pub fn property(&self) -> u8 {
        match self {
            Violation::Length { .. } | Violation::ListLength { .. } => 1,
            Violation::SenderCounts { .. } => 2,
            Violation::NoReceivers => 3,
            Violation::ForcedMismatch {
                expected: Bit::Zero,
                ..
            } => 4,
            Violation::ForcedMismatch {
                expected: Bit::One, ..
            } => 5,
            Violation::DiscordImbalance { .. } => 6,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "property {}: ", self.property())?;
        match self {
            Violation::Length { m } => write!(f, "length {m} is not a positive multiple of 6"),
            Violation::ListLength {
                party,
                len,
                expected,
            } => write!(f, "list of {party} has length {len}, expected {expected}"),
            Violation::NoReceivers => f.write_str("segment carries no receiver lists"),
            Violation::SenderCounts {
                zeros,
                ones,
                discords,
                expected,
            } => write!(
                f,
                "sender counts {zeros}/{ones}/{discords} of 0/1/2, expected {expected} each"
            ),
            Violation::ForcedMismatch {
                receiver,
                position,
                expected,
            } => write!(
                f,
                "{receiver} differs from forced value {expected} at position {position}"
            ),
            Violation::DiscordImbalance {
                receiver,
                zeros,
                ones,
            } => write!(
                f,
                "{receiver} holds {zeros} zeros and {ones} ones on discord positions"
            ),
        }
    }
}

/// Checks every list property. An empty result means the segment is valid.
pub fn verify_segment(seg: &Segment) -> Vec<Violation> {
    let mut out = Vec::new();
    let m = seg.sender.len();
    if m == 0 || !m.is_multiple_of(6) {
        out.push(Violation::Length { m });
    }
    if seg.receivers.is_empty() {
        out.push(Violation::NoReceivers);
    }

    let count = |t: Trit| seg.sender.iter().filter(|s| **s == t).count();
    let (zeros, ones, discords) = (count(Trit::Zero), count(Trit::One), count(Trit::Discord));
    if !m.is_multiple_of(3) || zeros != m / 3 || ones != m / 3 || discords != m / 3 {
        out.push(Violation::SenderCounts {
            zeros,
            ones,
            discords,
            expected: m / 3,
        });
    }

    for (i, list) in seg.receivers.iter().enumerate() {
        let receiver = PartyId(i + 2);
        if list.len() != m {
            out.push(Violation::ListLength {
                party: receiver,
                len: list.len(),
                expected: m,
            });
        }
        let (mut d0, mut d1) = (0, 0);
        for (position, (t, b)) in seg.sender.iter().zip(list).enumerate() {
            match t.agreement_bit() {
                Some(expected) if expected != *b => out.push(Violation::ForcedMismatch {
                    receiver,
                    position,
                    expected,
                }),
                Some(_) => {}
                None if *b == Bit::Zero => d0 += 1,
                None => d1 += 1,
            }
        }
        if d0 != d1 {
            out.push(Violation::DiscordImbalance {
                receiver,
                zeros: d0,
                ones: d1,
            });
        }
    }
    out
}

/// Concatenates one participant's slices in ascending distributor order.
pub fn combine_segments<S: ListSymbol>(
    mut slices: Vec<ListSlice<S>>,
) -> Result<CombinedReferenceList<S>, ListError> {
    let first = slices.first().ok_or(ListError::Empty)?;
    let party = first.party;
    let m = first.entries.len();
    slices.sort_by_key(|s| s.distributor);
    let mut entries = Vec::with_capacity(m * slices.len());
    let mut boundaries = Vec::with_capacity(slices.len());
    for (k, slice) in slices.iter().enumerate() {
        if slice.party != party {
            return Err(ListError::PartyMismatch {
                expected: party,
                found: slice.party,
            });
        }
        if slice.entries.len() != m {
            return Err(ListError::LengthMismatch {
                distributor: slice.distributor,
                expected: m,
                found: slice.entries.len(),
            });
        }
        if k > 0 && slices[k - 1].distributor == slice.distributor {
            return Err(ListError::DuplicateDistributor(slice.distributor));
        }
        boundaries.push(entries.len());
        entries.extend_from_slice(&slice.entries);
    }
    Ok(CombinedReferenceList {
        party,
        entries,
        boundaries,
    })
}

/// All positions where the sender list holds `b`, ascending.
pub fn positions_of(list: &SenderList, b: Bit) -> Vec<usize> {
    let target = Trit::from(b);
    list.entries
        .iter()
        .enumerate()
        .filter(|(_, t)| **t == target)
        .map(|(j, _)| j)
        .collect()
}

fn write_symbols<S: fmt::Display>(out: &mut String, symbols: &[S]) {
    for (i, s) in symbols.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{s}");
    }
    out.push('\n');
}

fn parse_symbols<S: ListSymbol>(line: &str, line_no: usize) -> Result<Vec<S>, ListError> {
    if line.is_empty() {
        return Ok(Vec::new());
    }
    line.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<u8>()
                .ok()
                .and_then(S::from_u8)
                .ok_or_else(|| ListError::Parse {
                    line: line_no,
                    message: format!("invalid symbol {tok:?}"),
                })
        })
        .collect()
}

fn parse_party(tok: &str, line_no: usize) -> Result<PartyId, ListError> {
    tok.strip_prefix('P')
        .and_then(|n| n.parse().ok())
        .map(PartyId)
        .ok_or_else(|| ListError::Parse {
            line: line_no,
            message: format!("invalid party {tok:?}"),
        })
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub fn format_segment(seg: &Segment) -> String {
    let mut out = format!("# segment {}\n", seg.distributor);
    write_symbols(&mut out, &seg.sender);
    for list in &seg.receivers {
        write_symbols(&mut out, list);
    }
    out
}

pub fn parse_segment(text: &str) -> Result<Segment, ListError> {
    let mut lines = data_lines(text);
    let (line_no, header) = lines.next().ok_or(ListError::Parse {
        line: 1,
        message: "empty input".into(),
    })?;
    let distributor = match header.strip_prefix("# segment ") {
        Some(p) => parse_party(p.trim(), line_no)?,
        None => {
            return Err(ListError::Parse {
                line: line_no,
                message: "expected `# segment P<k>` header".into(),
            })
        }
    };
    let mut data = lines.filter(|(_, l)| !l.starts_with('#'));
    let (line_no, sender_line) = data.next().ok_or(ListError::Parse {
        line: line_no + 1,
        message: "missing sender list".into(),
    })?;
    let sender = parse_symbols(sender_line, line_no)?;
    let receivers = data
        .map(|(n, l)| parse_symbols(l, n))
        .collect::<Result<_, _>>()?;
    Ok(Segment {
        distributor,
        sender,
        receivers,
    })
}

pub fn format_combined<S: ListSymbol>(list: &CombinedReferenceList<S>) -> String {
    let bounds: Vec<String> = list.boundaries.iter().map(|b| b.to_string()).collect();
    let mut out = format!(
        "# combined {} boundaries={}\n",
        list.party,
        bounds.join(",")
    );
    write_symbols(&mut out, &list.entries);
    out
}

pub fn parse_combined<S: ListSymbol>(text: &str) -> Result<CombinedReferenceList<S>, ListError> {
    let mut lines = data_lines(text);
    let (line_no, header) = lines.next().ok_or(ListError::Parse {
        line: 1,
        message: "empty input".into(),
    })?;
    let bad_header = || ListError::Parse {
        line: line_no,
        message: "expected `# combined P<k> boundaries=<list>` header".into(),
    };
    let rest = header.strip_prefix("# combined ").ok_or_else(bad_header)?;
    let (party_tok, bounds_tok) = rest.split_once(' ').ok_or_else(bad_header)?;
    let party = parse_party(party_tok, line_no)?;
    let boundaries = bounds_tok
        .strip_prefix("boundaries=")
        .ok_or_else(bad_header)?
        .split(',')
        .map(|b| b.trim().parse::<usize>().map_err(|_| bad_header()))
        .collect::<Result<Vec<_>, _>>()?;
    let (data_no, data) = lines.next().unwrap_or((line_no + 1, ""));
    let entries = parse_symbols(data, data_no)?;
    let ascending = boundaries.first() == Some(&0)
        && boundaries.windows(2).all(|w| w[0] < w[1])
        && (boundaries.len() == 1 || boundaries.last().is_some_and(|b| *b < entries.len()));
    if !ascending {
        return Err(ListError::Parse {
            line: line_no,
            message: "boundaries must start at 0 and increase within the list".into(),
        });
    }
    Ok(CombinedReferenceList {
        party,
        entries,
        boundaries,
    })
}
