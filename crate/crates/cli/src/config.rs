//! Scenario files.
//!
//! A scenario is a TOML document. Every field is optional and falls back to
//! the defaults shown here:
//!
//! ```toml
//! schema_version = 1
//! scenario = "all-honest"
//! output = "human"              # or "machine"
//!
//! [sim]
//! receivers = 3                 # n - 1
//! distributors = 2              # d
//! segment_length = 12           # m, a positive multiple of 6
//! sender_input = 1
//! trials = 1000
//! seed = 42
//! decide_rule = "literal"       # or "merged"
//!
//! [adversary]
//! controlled = []               # participant indices, 1 is the sender
//! bribed = "none"               # "all", "none" or distributor indices
//! p = 0.5                       # disclosure probability of a bribed distributor
//! sender_strategy = "honest-mimic"
//! receiver_strategy = "honest-mimic"
//!
//! [sweep]                       # every non-empty list is swept; the cartesian
//! segment_length = []           # product of all lists gives the batches
//! distributors = []
//! p = []
//! sender_strategy = []
//! receiver_strategy = []
//!
//! [checks]                      # omitted checks use the defaults below
//! agreement = true              # always on unless a receiver forges
//! validity = true               # default: on when nobody is controlled
//! honest_success = false
//! all_abort = false
//! forge_oracle = false          # forge rate inside the CI of the exact value
//! full_knowledge = false        # full-knowledge rate inside the CI of p^d
//! ```

use std::collections::BTreeSet;
use std::path::Path;

use dba_core::{AdversarySpec, Bit, Bribed, DecideRule, PartyId, SimConfig, Strategy};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Human,
    Machine,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "human" => Ok(OutputFormat::Human),
            "machine" => Ok(OutputFormat::Machine),
            other => Err(format!(
                "unknown output format {other:?} (expected human or machine)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub receivers: usize,
    pub distributors: usize,
    pub segment_length: usize,
    pub sender_input: Bit,
    pub trials: u64,
    pub seed: u64,
    pub decide_rule: DecideRule,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            receivers: 3,
            distributors: 2,
            segment_length: 12,
            sender_input: Bit::One,
            trials: 1000,
            seed: 42,
            decide_rule: DecideRule::Literal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdversarySection {
    pub controlled: BTreeSet<PartyId>,
    pub bribed: Bribed,
    pub p: f64,
    pub sender_strategy: Strategy,
    pub receiver_strategy: Strategy,
}

impl Default for AdversarySection {
    fn default() -> Self {
        Self {
            controlled: BTreeSet::new(),
            bribed: Bribed::None,
            p: 0.5,
            sender_strategy: Strategy::HonestMimic,
            receiver_strategy: Strategy::HonestMimic,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub segment_length: Vec<usize>,
    pub distributors: Vec<usize>,
    pub p: Vec<f64>,
    pub sender_strategy: Vec<Strategy>,
    pub receiver_strategy: Vec<Strategy>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checks {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validity: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub honest_success: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub all_abort: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forge_oracle: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_knowledge: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub scenario: String,
    pub output: OutputFormat,
    pub sim: SimSection,
    pub adversary: AdversarySection,
    pub sweep: Sweep,
    pub checks: Checks,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenario: "custom".into(),
            output: OutputFormat::Human,
            sim: SimSection::default(),
            adversary: AdversarySection::default(),
            sweep: Sweep::default(),
            checks: Checks::default(),
        }
    }
}

/// One batch of a scenario: a label for the swept values and its config.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub label: Vec<(String, String)>,
    pub config: SimConfig,
}

impl SweepPoint {
    pub fn label_text(&self) -> String {
        if self.label.is_empty() {
            return "base".into();
        }
        self.label
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let scenario: Scenario = toml::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    fn base_config(&self) -> SimConfig {
        SimConfig {
            participants: self.sim.receivers + 1,
            distributors: self.sim.distributors,
            segment_length: self.sim.segment_length,
            sender_input: self.sim.sender_input,
            adversary: AdversarySpec {
                controlled: self.adversary.controlled.clone(),
                bribed: self.adversary.bribed.clone(),
                disclosure_probability: self.adversary.p,
                sender_strategy: self.adversary.sender_strategy,
                receiver_strategy: self.adversary.receiver_strategy,
            },
            trials: self.sim.trials,
            master_seed: self.sim.seed,
            decide_rule: self.sim.decide_rule,
            record_transcripts: false,
        }
    }

    /// Cartesian product of the sweep lists, in a fixed order.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut points = vec![SweepPoint {
            label: Vec::new(),
            config: self.base_config(),
        }];
        fn expand<T: ToString + Clone>(
            points: Vec<SweepPoint>,
            name: &str,
            values: &[T],
            apply: impl Fn(&mut SimConfig, T),
        ) -> Vec<SweepPoint> {
            if values.is_empty() {
                return points;
            }
            points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map({
                        let apply = &apply;
                        move |v| {
                            let mut next = p.clone();
                            next.label.push((name.to_string(), v.to_string()));
                            apply(&mut next.config, v.clone());
                            next
                        }
                    })
                })
                .collect()
        }
        let s = &self.sweep;
        points = expand(points, "segment_length", &s.segment_length, |c, v| {
            c.segment_length = v
        });
        points = expand(points, "distributors", &s.distributors, |c, v| {
            c.distributors = v
        });
        points = expand(points, "p", &s.p, |c, v| {
            c.adversary.disclosure_probability = v
        });
        points = expand(points, "sender_strategy", &s.sender_strategy, |c, v| {
            c.adversary.sender_strategy = v
        });
        points = expand(points, "receiver_strategy", &s.receiver_strategy, |c, v| {
            c.adversary.receiver_strategy = v
        });
        points
    }

    /// Rejects anything that would not produce a valid batch, naming the field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!(
                    "unsupported version {}, expected {SCHEMA_VERSION}",
                    self.schema_version
                ),
            ));
        }
        let mut lengths = self.sweep.segment_length.clone();
        lengths.push(self.sim.segment_length);
        for m in lengths {
            if m == 0 || m % 6 != 0 {
                return Err(invalid(
                    "segment_length",
                    format!("m must be a positive multiple of 6 (list property 1), got {m}"),
                ));
            }
        }
        if self.sim.receivers < 2 {
            return Err(invalid("receivers", "at least 2 receivers are required"));
        }
        if self.sim.distributors == 0 || self.sweep.distributors.contains(&0) {
            return Err(invalid(
                "distributors",
                "at least 1 distributor is required",
            ));
        }
        if self.sim.trials == 0 {
            return Err(invalid("trials", "at least 1 trial is required"));
        }
        let n = self.sim.receivers + 1;
        for p in &self.adversary.controlled {
            if p.0 == 0 || p.0 > n {
                return Err(invalid(
                    "controlled",
                    format!("{p} is not a participant (participants are P1..P{n})"),
                ));
            }
        }
        let honest = n - self.adversary.controlled.len();
        if honest < 3 {
            return Err(invalid(
                "controlled",
                format!("honest participants must be at least 3, got {honest}"),
            ));
        }
        for p in std::iter::once(&self.adversary.p).chain(&self.sweep.p) {
            if !(*p > 0.0 && *p < 1.0) {
                return Err(invalid(
                    "p",
                    format!("must lie strictly between 0 and 1, got {p}"),
                ));
            }
        }
        let sender_strategies =
            std::iter::once(&self.adversary.sender_strategy).chain(&self.sweep.sender_strategy);
        for s in sender_strategies {
            if s.is_forging() {
                return Err(invalid(
                    "sender_strategy",
                    format!("{s} is a receiver-only strategy"),
                ));
            }
        }
        for point in self.points() {
            point
                .config
                .validate()
                .map_err(|e| invalid("adversary", e.to_string()))?;
        }
        Ok(())
    }
}

const BUILT_IN: &[(&str, &str)] = &[
    (
        "all-honest",
        include_str!("../../../scenarios/all-honest.toml"),
    ),
    (
        "equivocating-sender",
        include_str!("../../../scenarios/equivocating-sender.toml"),
    ),
    (
        "forging-receiver",
        include_str!("../../../scenarios/forging-receiver.toml"),
    ),
    ("bribery", include_str!("../../../scenarios/bribery.toml")),
    (
        "forge-curve",
        include_str!("../../../scenarios/forge-curve.toml"),
    ),
    (
        "strategy-suite",
        include_str!("../../../scenarios/strategy-suite.toml"),
    ),
];

pub fn built_in_names() -> impl Iterator<Item = &'static str> {
    BUILT_IN.iter().map(|(n, _)| *n)
}

pub fn built_in(name: &str) -> Result<Scenario, ConfigError> {
    BUILT_IN
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ConfigError::UnknownScenario(name.to_string()))
        .and_then(|(_, text)| Scenario::from_toml(text))
}

pub fn parse_config(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_toml(&text)
}

/// Command-line overrides; every `Some` replaces the file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub receivers: Option<usize>,
    pub distributors: Option<usize>,
    pub segment_length: Option<usize>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub p: Option<f64>,
    pub sender_input: Option<Bit>,
    pub sender_strategy: Option<Strategy>,
    pub receiver_strategy: Option<Strategy>,
    pub decide_rule: Option<DecideRule>,
    pub controlled: Option<BTreeSet<PartyId>>,
    pub bribed: Option<Bribed>,
    pub output: Option<OutputFormat>,
}

impl Overrides {
    pub fn apply(&self, mut s: Scenario) -> Result<Scenario, ConfigError> {
        macro_rules! set {
            ($src:ident => $($dst:tt)+) => {
                if let Some(v) = self.$src.clone() {
                    s.$($dst)+ = v;
                }
            };
        }
        set!(receivers => sim.receivers);
        set!(distributors => sim.distributors);
        set!(segment_length => sim.segment_length);
        set!(trials => sim.trials);
        set!(seed => sim.seed);
        set!(sender_input => sim.sender_input);
        set!(decide_rule => sim.decide_rule);
        set!(p => adversary.p);
        set!(sender_strategy => adversary.sender_strategy);
        set!(receiver_strategy => adversary.receiver_strategy);
        set!(controlled => adversary.controlled);
        set!(bribed => adversary.bribed);
        set!(output => output);
        // An explicit flag pins the value, so drop the matching sweep list.
        if self.segment_length.is_some() {
            s.sweep.segment_length.clear();
        }
        if self.distributors.is_some() {
            s.sweep.distributors.clear();
        }
        if self.p.is_some() {
            s.sweep.p.clear();
        }
        if self.sender_strategy.is_some() {
            s.sweep.sender_strategy.clear();
        }
        if self.receiver_strategy.is_some() {
            s.sweep.receiver_strategy.clear();
        }
        s.validate()?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let s = Scenario::from_toml("scenario = \"all-honest\"\n").unwrap();
        assert_eq!(s.scenario, "all-honest");
        let cfg = &s.points()[0].config;
        assert_eq!(
            (
                cfg.participants,
                cfg.distributors,
                cfg.segment_length,
                cfg.trials,
                cfg.master_seed
            ),
            (4, 2, 12, 1000, 42)
        );
        assert_eq!(cfg.adversary.disclosure_probability, 0.5);
    }

    #[test]
    fn rejects_bad_segment_length() {
        let err = Scenario::from_toml("[sim]\nsegment_length = 7\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("segment_length:"), "{msg}");
        assert!(msg.contains("multiple of 6"), "{msg}");
    }

    #[test]
    fn rejects_too_few_honest() {
        let err = Scenario::from_toml("[adversary]\ncontrolled = [3, 4]\n").unwrap_err();
        assert!(err
            .to_string()
            .contains("honest participants must be at least 3"));
    }

    #[test]
    fn rejects_unknown_fields_and_strategies() {
        assert!(Scenario::from_toml("[sim]\nsegment_lenght = 6\n").is_err());
        assert!(Scenario::from_toml("[adversary]\nreceiver_strategy = \"teleport\"\n").is_err());
        let err =
            Scenario::from_toml("[adversary]\ncontrolled = [1]\nsender_strategy = \"forge\"\n")
                .unwrap_err();
        assert!(err.to_string().starts_with("sender_strategy:"));
        let err = Scenario::from_toml("[adversary]\np = 1.0\n").unwrap_err();
        assert!(err.to_string().starts_with("p:"));
        let err = Scenario::from_toml("[adversary]\nbribed = [2]\n").unwrap_err();
        assert!(err.to_string().contains("not a list distributor"), "{err}");
    }

    #[test]
    fn sweep_expands_in_order() {
        let s =
            Scenario::from_toml("[sweep]\nsegment_length = [6, 12]\np = [0.25, 0.75]\n").unwrap();
        let labels: Vec<String> = s.points().iter().map(SweepPoint::label_text).collect();
        assert_eq!(
            labels,
            [
                "segment_length=6 p=0.25",
                "segment_length=6 p=0.75",
                "segment_length=12 p=0.25",
                "segment_length=12 p=0.75"
            ]
        );
    }

    #[test]
    fn built_ins_parse() {
        for name in built_in_names() {
            let s = built_in(name).unwrap();
            assert_eq!(s.scenario, name);
        }
        assert!(matches!(
            built_in("nope"),
            Err(ConfigError::UnknownScenario(_))
        ));
    }

    #[test]
    fn overrides_win_over_file() {
        let s = built_in("forge-curve").unwrap();
        let o = Overrides {
            segment_length: Some(24),
            trials: Some(10),
            ..Overrides::default()
        };
        let s = o.apply(s).unwrap();
        assert_eq!(s.points().len(), 1);
        assert_eq!(s.points()[0].config.segment_length, 24);
        assert_eq!(s.points()[0].config.trials, 10);
        let bad = Overrides {
            segment_length: Some(8),
            ..Overrides::default()
        };
        assert!(bad.apply(built_in("all-honest").unwrap()).is_err());
    }
}
