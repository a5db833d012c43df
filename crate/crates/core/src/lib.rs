//! Detectable Byzantine agreement from distributed correlated lists.
//!
//! A sender broadcasts one bit to `n - 1` receivers. Before the run, `d`
//! semi-honest distributors hand every participant a correlated reference list
//! over confidential channels ([`listgen`]). Receivers use those lists to tell
//! genuine claims from forged ones ([`protocol`]), so every honest party
//! either outputs the same bit or aborts.
//!
//! [`adversary`] models a static Byzantine adversary that may also bribe
//! distributors, and provides exact forging probabilities. [`sim`] runs whole
//! trials and batches.
//!
//! Probability math is generic over [`scalar::Probability`]; the aliases below
//! name the two instantiations used throughout.

pub mod adversary;
pub mod listgen;
pub mod protocol;
pub mod scalar;
pub mod sim;
pub mod stats;
pub mod types;

pub use adversary::{AdversarySpec, Bribed, Knowledge, Strategy};
pub use listgen::{CombinedReferenceList, ReceiverList, Segment, SenderList};
pub use protocol::{Claim, DecideRule, Decision, Inbox, ProtocolMessage};
pub use scalar::Probability;
pub use sim::{BatchReport, SimConfig, TrialReport};
pub use types::{Bit, PartyId, Role, Trit};

/// Exact rational probability.
pub type ExactProbability = num_rational::BigRational;

/// Floating-point probability used for reporting.
pub type ApproxProbability = f64;
