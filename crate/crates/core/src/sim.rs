//! Round-synchronous simulation of complete protocol runs.
//!
//! A trial generates `d` segments, hands the adversary its [`Knowledge`], and
//! then steps all participants through three rounds separated by barriers:
//! every message of round `r` is computed before any of them is delivered, and
//! nothing of round `r + 1` is computed before delivery completes.
//!
//! # Randomness
//!
//! Trial `i` of a batch seeds `ChaCha20Rng::seed_from_u64(master_seed)` and
//! switches it to stream `i`. From that generator three 32-byte seeds are drawn
//! in order for the list, bribery and adversary generators. Trials therefore
//! do not depend on each other or on execution order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::adversary::{
    adversary_act, resolve_bribes, ActContext, AdversaryError, AdversarySpec, Knowledge, Outgoing,
};
use crate::listgen::{
    combine_segments, generate_segment, ListError, ReceiverList, Segment, SenderList,
};
use crate::protocol::{
    check_claim, decide, make_claim, relay_step, sender_decision, DecideRule, Decision, Inbox,
    ProtocolError, ProtocolMessage,
};
use crate::stats::{z_for_confidence, RateEstimate};
use crate::types::{Bit, PartyId, Role};

pub const SCHEMA_VERSION: u32 = 1;

/// Confidence level of every interval in a [`BatchReport`].
pub const REPORT_CONFIDENCE: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("participants must be at least 3, got {0}")]
    TooFewParticipants(usize),
    #[error("distributors must be at least 1")]
    NoDistributors,
    #[error("segment_length must be a positive multiple of 6, got {0}")]
    InvalidSegmentLength(usize),
    #[error("trials must be at least 1")]
    NoTrials,
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    List(#[from] ListError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Sender plus receivers.
    pub participants: usize,
    pub distributors: usize,
    pub segment_length: usize,
    pub sender_input: Bit,
    pub adversary: AdversarySpec,
    pub trials: u64,
    pub master_seed: u64,
    pub decide_rule: DecideRule,
    /// Keep the full message transcript in every [`TrialReport`].
    #[serde(default)]
    pub record_transcripts: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            participants: 4,
            distributors: 2,
            segment_length: 12,
            sender_input: Bit::One,
            adversary: AdversarySpec::default(),
            trials: 1000,
            master_seed: 42,
            decide_rule: DecideRule::Literal,
            record_transcripts: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.participants < 3 {
            return Err(SimError::TooFewParticipants(self.participants));
        }
        if self.distributors == 0 {
            return Err(SimError::NoDistributors);
        }
        if self.segment_length == 0 || !self.segment_length.is_multiple_of(6) {
            return Err(SimError::InvalidSegmentLength(self.segment_length));
        }
        if self.trials == 0 {
            return Err(SimError::NoTrials);
        }
        self.adversary
            .validate(self.participants, self.distributors)?;
        Ok(())
    }

    pub fn receivers(&self) -> Vec<PartyId> {
        (2..=self.participants).map(PartyId).collect()
    }

    pub fn honest_participants(&self) -> BTreeSet<PartyId> {
        (1..=self.participants)
            .map(PartyId)
            .filter(|p| !self.adversary.is_controlled(*p))
            .collect()
    }

    pub fn combined_length(&self) -> usize {
        self.distributors * self.segment_length
    }
}

/// Generator for trial `trial_index` under `master_seed`.
pub fn trial_rng(master_seed: u64, trial_index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}

/// Stage-1 output: every segment and every participant's combined list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct World {
    pub segments: Vec<Segment>,
    pub sender_list: SenderList,
    pub receiver_lists: BTreeMap<PartyId, ReceiverList>,
}

impl World {
    pub fn generate<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Result<Self, SimError> {
        let n = cfg.participants;
        let segments = (0..cfg.distributors)
            .map(|i| generate_segment(PartyId(n + 1 + i), cfg.segment_length, n - 1, rng))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_segments(segments)
    }

    pub fn from_segments(segments: Vec<Segment>) -> Result<Self, SimError> {
        let sender_list = combine_segments(segments.iter().map(Segment::sender_slice).collect())?;
        let receiver_count = segments.first().map_or(0, Segment::receiver_count);
        let receiver_lists = (2..receiver_count + 2)
            .map(PartyId)
            .map(|p| {
                let slices = segments
                    .iter()
                    .map(|s| s.receiver_slice(p).ok_or(ListError::Empty))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((p, combine_segments(slices)?))
            })
            .collect::<Result<_, ListError>>()?;
        Ok(Self {
            segments,
            sender_list,
            receiver_lists,
        })
    }
}

/// One transcript line. `message: None` marks an expected message that never
/// arrived and was consumed as the flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptRecord {
    pub round: u8,
    pub from: PartyId,
    pub to: PartyId,
    pub message: Option<ProtocolMessage>,
}

/// `round from to message`, e.g. `1 P1 P2 1:[0,4]`, `2 P3 P2 BOT` or
/// `2 P4 P2 NONE`.
impl fmt::Display for TranscriptRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} ", self.round, self.from, self.to)?;
        match &self.message {
            Some(m) => m.fmt(f),
            None => f.write_str("NONE"),
        }
    }
}

impl Serialize for TranscriptRecord {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PartyOutcome {
    pub party: PartyId,
    pub role: Role,
    pub honest: bool,
    /// `None` for controlled participants.
    pub decision: Option<Decision>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialReport {
    pub trial: u64,
    pub parties: Vec<PartyOutcome>,
    pub disclosed: Vec<bool>,
    pub full_knowledge: bool,
    pub agreement: bool,
    pub validity: Option<bool>,
    pub honest_success: Option<bool>,
    pub forge_attempts: u64,
    pub forge_successes: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transcript: Option<Vec<TranscriptRecord>>,
}

impl TrialReport {
    pub fn decisions(&self) -> BTreeMap<PartyId, Decision> {
        self.parties
            .iter()
            .filter_map(|p| p.decision.map(|d| (p.party, d)))
            .collect()
    }

    pub fn to_canonical_line(&self) -> String {
        serde_json::to_string(self).expect("trial report serializes")
    }
}

/// All honest parties abort, or all decide one common value.
pub fn eval_agreement(decisions: &BTreeMap<PartyId, Decision>, honest: &BTreeSet<PartyId>) -> bool {
    let mut outputs = honest.iter().filter_map(|p| decisions.get(p));
    match outputs.next() {
        None => true,
        Some(first) => outputs.all(|d| d == first),
    }
}

/// `None` unless every participant is honest; then every decision must be
/// the sender's input.
pub fn eval_validity(
    decisions: &BTreeMap<PartyId, Decision>,
    honest: &BTreeSet<PartyId>,
    all_honest: bool,
    sender_input: Bit,
) -> Option<bool> {
    all_honest.then(|| all_decide(decisions, honest, sender_input))
}

/// `None` unless the sender is honest; then every honest decision must be the
/// sender's input.
pub fn eval_honest_success(
    decisions: &BTreeMap<PartyId, Decision>,
    honest: &BTreeSet<PartyId>,
    sender_honest: bool,
    sender_input: Bit,
) -> Option<bool> {
    sender_honest.then(|| all_decide(decisions, honest, sender_input))
}

fn all_decide(decisions: &BTreeMap<PartyId, Decision>, honest: &BTreeSet<PartyId>, b: Bit) -> bool {
    honest
        .iter()
        .all(|p| decisions.get(p) == Some(&Decision::Value(b)))
}

/// Keeps the first message per (from, to) pair.
fn deliver(
    outgoing: &[(PartyId, Outgoing)],
    receivers: &[PartyId],
) -> BTreeMap<PartyId, BTreeMap<PartyId, ProtocolMessage>> {
    let mut boxes: BTreeMap<PartyId, BTreeMap<PartyId, ProtocolMessage>> =
        receivers.iter().map(|r| (*r, BTreeMap::new())).collect();
    for (from, out) in outgoing {
        if let Some(b) = boxes.get_mut(&out.to) {
            b.entry(*from).or_insert_with(|| out.message.clone());
        }
    }
    boxes
}

/// Draws the lists and bribery outcome of trial `trial_index`, and returns
/// the generator reserved for the adversary.
pub fn prepare_trial(
    cfg: &SimConfig,
    trial_index: u64,
) -> Result<(World, Knowledge, ChaCha20Rng), SimError> {
    cfg.validate()?;
    let mut rng = trial_rng(cfg.master_seed, trial_index);
    let mut list_rng = ChaCha20Rng::from_seed(rng.gen());
    let mut bribe_rng = ChaCha20Rng::from_seed(rng.gen());
    let adversary_rng = ChaCha20Rng::from_seed(rng.gen());

    let world = World::generate(cfg, &mut list_rng)?;
    let knowledge = resolve_bribes(&cfg.adversary, &world.segments, &mut bribe_rng);
    Ok((world, knowledge, adversary_rng))
}

/// Runs trial `trial_index` of `cfg`.
pub fn run_trial(cfg: &SimConfig, trial_index: u64) -> Result<TrialReport, SimError> {
    let (world, knowledge, mut adversary_rng) = prepare_trial(cfg, trial_index)?;
    run_agreement(cfg, trial_index, &world, knowledge, &mut adversary_rng)
}

/// Runs the agreement stage on a prepared world. The adversary only ever sees
/// `knowledge` plus what its parties receive during the rounds.
pub fn run_agreement<R: Rng + ?Sized>(
    cfg: &SimConfig,
    trial_index: u64,
    world: &World,
    mut knowledge: Knowledge,
    adversary_rng: &mut R,
) -> Result<TrialReport, SimError> {
    let spec = &cfg.adversary;
    let receivers = cfg.receivers();
    let honest = cfg.honest_participants();
    let sender_honest = honest.contains(&PartyId::SENDER);
    let mut transcript = Vec::new();

    // Round 1.
    let round1: Vec<(PartyId, Outgoing)> = if sender_honest {
        let claim = make_claim(cfg.sender_input, &world.sender_list);
        receivers
            .iter()
            .map(|r| {
                (
                    PartyId::SENDER,
                    Outgoing {
                        to: *r,
                        message: ProtocolMessage::Claim(claim.clone()),
                        forged: false,
                    },
                )
            })
            .collect()
    } else {
        let ctx = ActContext {
            party: PartyId::SENDER,
            role: Role::Sender,
            receivers: &receivers,
            sender_input: cfg.sender_input,
            knowledge: &knowledge,
        };
        adversary_act(&ctx, spec, adversary_rng)?
            .into_iter()
            .map(|o| (PartyId::SENDER, o))
            .collect()
    };
    let delivered1 = deliver(&round1, &receivers);
    let first_message = |r: PartyId| delivered1[&r].get(&PartyId::SENDER);
    for r in &receivers {
        transcript.push(TranscriptRecord {
            round: 1,
            from: PartyId::SENDER,
            to: *r,
            message: first_message(*r).cloned(),
        });
        if spec.is_controlled(*r) {
            knowledge.observe_round1(*r, first_message(*r).cloned());
        }
    }

    // Round 2.
    let mut round2 = Vec::new();
    for r in &receivers {
        if spec.is_controlled(*r) {
            let ctx = ActContext {
                party: *r,
                role: Role::Receiver,
                receivers: &receivers,
                sender_input: cfg.sender_input,
                knowledge: &knowledge,
            };
            round2.extend(
                adversary_act(&ctx, spec, adversary_rng)?
                    .into_iter()
                    .map(|o| (*r, o)),
            );
        } else {
            let msg = relay_step(first_message(*r), &world.receiver_lists[r]);
            round2.extend(receivers.iter().map(|to| {
                (
                    *r,
                    Outgoing {
                        to: *to,
                        message: msg.clone(),
                        forged: false,
                    },
                )
            }));
        }
    }
    let (mut forge_attempts, mut forge_successes) = (0, 0);
    for (_, out) in round2.iter().filter(|(_, o)| o.forged) {
        forge_attempts += 1;
        let passes = out
            .message
            .claim()
            .is_some_and(|c| check_claim(c, &world.receiver_lists[&out.to]));
        forge_successes += u64::from(passes);
    }
    let delivered2 = deliver(&round2, &receivers);

    // Round 3.
    let mut parties = vec![PartyOutcome {
        party: PartyId::SENDER,
        role: Role::Sender,
        honest: sender_honest,
        decision: sender_honest.then(|| sender_decision(cfg.sender_input)),
    }];
    for r in &receivers {
        for from in &receivers {
            transcript.push(TranscriptRecord {
                round: 2,
                from: *from,
                to: *r,
                message: delivered2[r].get(from).cloned(),
            });
        }
        let is_honest = honest.contains(r);
        let decision = if is_honest {
            let mut inbox = Inbox::new(receivers.iter().copied());
            for (from, msg) in &delivered2[r] {
                inbox.insert(*from, msg.clone())?;
            }
            inbox.fill_missing();
            Some(decide(&inbox, &world.receiver_lists[r], cfg.decide_rule)?)
        } else {
            None
        };
        parties.push(PartyOutcome {
            party: *r,
            role: Role::Receiver,
            honest: is_honest,
            decision,
        });
    }

    let decisions: BTreeMap<PartyId, Decision> = parties
        .iter()
        .filter_map(|p| p.decision.map(|d| (p.party, d)))
        .collect();
    let all_honest = honest.len() == cfg.participants;
    Ok(TrialReport {
        trial: trial_index,
        parties,
        disclosed: knowledge.disclosed_mask(),
        full_knowledge: knowledge.is_complete(),
        agreement: eval_agreement(&decisions, &honest),
        validity: eval_validity(&decisions, &honest, all_honest, cfg.sender_input),
        honest_success: eval_honest_success(&decisions, &honest, sender_honest, cfg.sender_input),
        forge_attempts,
        forge_successes,
        transcript: cfg.record_transcripts.then_some(transcript),
    })
}

/// Additive tallies over trials. `merge` is associative and commutative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchCounts {
    pub trials: u64,
    pub agreement: u64,
    pub all_abort: u64,
    pub common_value: u64,
    pub disagreement: u64,
    pub validity_applicable: u64,
    pub validity: u64,
    pub honest_success_applicable: u64,
    pub honest_success: u64,
    pub forge_attempts: u64,
    pub forge_successes: u64,
    pub full_knowledge: u64,
}

impl BatchCounts {
    pub fn from_trial(report: &TrialReport) -> Self {
        let honest: Vec<Decision> = report
            .parties
            .iter()
            .filter(|p| p.honest)
            .filter_map(|p| p.decision)
            .collect();
        let all_abort = honest.iter().all(|d| *d == Decision::Abort);
        let common_value = !all_abort && honest.iter().all(|d| Some(d) == honest.first());
        Self {
            trials: 1,
            agreement: u64::from(report.agreement),
            all_abort: u64::from(all_abort),
            common_value: u64::from(common_value),
            disagreement: u64::from(!all_abort && !common_value),
            validity_applicable: u64::from(report.validity.is_some()),
            validity: u64::from(report.validity == Some(true)),
            honest_success_applicable: u64::from(report.honest_success.is_some()),
            honest_success: u64::from(report.honest_success == Some(true)),
            forge_attempts: report.forge_attempts,
            forge_successes: report.forge_successes,
            full_knowledge: u64::from(report.full_knowledge),
        }
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            trials: self.trials + other.trials,
            agreement: self.agreement + other.agreement,
            all_abort: self.all_abort + other.all_abort,
            common_value: self.common_value + other.common_value,
            disagreement: self.disagreement + other.disagreement,
            validity_applicable: self.validity_applicable + other.validity_applicable,
            validity: self.validity + other.validity,
            honest_success_applicable: self.honest_success_applicable
                + other.honest_success_applicable,
            honest_success: self.honest_success + other.honest_success,
            forge_attempts: self.forge_attempts + other.forge_attempts,
            forge_successes: self.forge_successes + other.forge_successes,
            full_knowledge: self.full_knowledge + other.full_knowledge,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRates {
    pub agreement: RateEstimate,
    pub all_abort: RateEstimate,
    pub common_value: RateEstimate,
    pub validity: RateEstimate,
    pub honest_success: RateEstimate,
    pub forge_success: RateEstimate,
    pub full_knowledge: RateEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub schema_version: u32,
    pub config: SimConfig,
    pub confidence: f64,
    pub counts: BatchCounts,
    pub rates: BatchRates,
}

impl BatchReport {
    pub fn from_counts(config: SimConfig, counts: BatchCounts) -> Self {
        let z = z_for_confidence(REPORT_CONFIDENCE);
        let rate = |k, n| RateEstimate::new(k, n, z);
        let rates = BatchRates {
            agreement: rate(counts.agreement, counts.trials),
            all_abort: rate(counts.all_abort, counts.trials),
            common_value: rate(counts.common_value, counts.trials),
            validity: rate(counts.validity, counts.validity_applicable),
            honest_success: rate(counts.honest_success, counts.honest_success_applicable),
            forge_success: rate(counts.forge_successes, counts.forge_attempts),
            full_knowledge: rate(counts.full_knowledge, counts.trials),
        };
        Self {
            schema_version: SCHEMA_VERSION,
            config,
            confidence: REPORT_CONFIDENCE,
            counts,
            rates,
        }
    }

    pub fn to_canonical_line(&self) -> String {
        serde_json::to_string(self).expect("batch report serializes")
    }
}

/// Runs trials `0..cfg.trials` in parallel and aggregates them.
pub fn run_batch(cfg: &SimConfig) -> Result<BatchReport, SimError> {
    cfg.validate()?;
    let counts = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, i).map(|r| BatchCounts::from_trial(&r)))
        .try_reduce(BatchCounts::default, |a, b| Ok(a.merge(b)))?;
    Ok(BatchReport::from_counts(cfg.clone(), counts))
}
