//! Runs scenarios and evaluates their checks against reference values.

use dba_core::adversary::{
    forge_success_closed_form, forge_success_oracle, heuristic_forge_estimate,
    MAX_ENUMERATION_LENGTH,
};
use dba_core::sim::{run_batch, SimError};
use dba_core::{BatchReport, Bribed, ExactProbability, PartyId, SimConfig, Strategy};
use serde::Serialize;

use crate::config::{Checks, Scenario, SweepPoint};

/// Exact forging probability for one target, with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForgeReference {
    pub value: f64,
    /// Rational form, when no bribery mixes in the disclosure probability.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
    pub method: &'static str,
}

/// Values the measured rates are compared against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reference {
    /// `p^d` when every distributor is bribed, `0` otherwise.
    pub full_knowledge: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forge_success: Option<ForgeReference>,
    /// `(1/2)^(M/3)`, the coarse estimate for the forge rate.
    pub forge_heuristic: f64,
    /// Expected honest-success rate under forging receivers; a lower bound
    /// (union bound) with more than one forger.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub honest_success_expected: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchOutcome {
    pub point: Vec<(String, String)>,
    pub report: BatchReport,
    pub reference: Reference,
    pub checks: Vec<CheckResult>,
}

impl BatchOutcome {
    pub fn label_text(&self) -> String {
        SweepPoint {
            label: self.point.clone(),
            config: self.report.config.clone(),
        }
        .label_text()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub scenario: String,
    pub batches: Vec<BatchOutcome>,
}

impl ScenarioOutcome {
    pub fn passed(&self) -> bool {
        self.batches
            .iter()
            .all(|b| b.checks.iter().all(|c| c.passed))
    }

    pub fn failures(&self) -> Vec<String> {
        self.batches
            .iter()
            .flat_map(|b| {
                b.checks
                    .iter()
                    .filter(|c| !c.passed)
                    .map(move |c| format!("{}: {}: {}", b.label_text(), c.name, c.detail))
            })
            .collect()
    }
}

fn bribed_count(cfg: &SimConfig) -> usize {
    match &cfg.adversary.bribed {
        Bribed::All => cfg.distributors,
        Bribed::None => 0,
        Bribed::Parties(set) => set.len(),
    }
}

fn forging_receivers(cfg: &SimConfig) -> usize {
    cfg.adversary
        .controlled
        .iter()
        .filter(|p| **p != PartyId::SENDER)
        .count()
}

/// Exact single-target forge probability with `k` of `d` segments disclosed.
fn forge_given_disclosed(m: usize, d: usize, k: usize) -> (ExactProbability, &'static str) {
    let mask: Vec<bool> = (0..d).map(|s| s < k).collect();
    if d * m <= MAX_ENUMERATION_LENGTH {
        let p = forge_success_oracle(m, d, &mask, 1).expect("validated arguments");
        (p, "enumeration")
    } else {
        let p = forge_success_closed_form(m, d, &mask, 1).expect("validated arguments");
        (p, "closed-form")
    }
}

fn binomial_pmf(n: usize, k: usize, p: f64) -> f64 {
    let c: f64 = dba_core::scalar::binomial(n, k);
    c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

pub fn reference(cfg: &SimConfig) -> Reference {
    use dba_core::Probability;
    let (m, d) = (cfg.segment_length, cfg.distributors);
    let p = cfg.adversary.disclosure_probability;
    let bribed = bribed_count(cfg);
    let full_knowledge = if bribed == d { p.powi(d as i32) } else { 0.0 };
    let sender_honest = !cfg.adversary.is_controlled(PartyId::SENDER);
    let forgers = forging_receivers(cfg);

    let forge_success = match cfg.adversary.receiver_strategy {
        _ if forgers == 0 || !sender_honest => None,
        Strategy::Forge if bribed == 0 => {
            let (exact, method) = forge_given_disclosed(m, d, 0);
            Some(ForgeReference {
                value: exact.to_f64(),
                exact: Some(exact.to_string()),
                method,
            })
        }
        Strategy::Forge => {
            let mut method = "";
            let value = (0..=bribed)
                .map(|k| {
                    let (exact, how) = forge_given_disclosed(m, d, k);
                    method = how;
                    binomial_pmf(bribed, k, p) * exact.to_f64()
                })
                .sum();
            Some(ForgeReference {
                value,
                exact: None,
                method,
            })
        }
        // Only attempts once every segment is known, and then always succeeds.
        Strategy::OmniscientForge => Some(ForgeReference {
            value: 1.0,
            exact: Some("1".into()),
            method: "full-knowledge",
        }),
        _ => None,
    };
    let honest_success_expected = match (&forge_success, cfg.adversary.receiver_strategy) {
        (Some(f), Strategy::Forge) => Some((1.0 - forgers as f64 * f.value).max(0.0)),
        (Some(_), _) => Some(1.0 - full_knowledge),
        _ => None,
    };
    Reference {
        full_knowledge,
        forge_success,
        forge_heuristic: heuristic_forge_estimate(cfg.combined_length()),
        honest_success_expected,
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed,
        detail,
    }
}

pub fn evaluate_checks(
    checks: &Checks,
    report: &BatchReport,
    reference: &Reference,
) -> Vec<CheckResult> {
    let cfg = &report.config;
    let c = &report.counts;
    let r = &report.rates;
    let mut out = Vec::new();
    // Without a forging receiver an agreement failure is a bug, so the check
    // cannot be switched off.
    if checks.agreement.unwrap_or(false) || !cfg.adversary.can_forge() {
        out.push(check(
            "agreement",
            c.agreement == c.trials,
            format!("{}/{} trials reached agreement", c.agreement, c.trials),
        ));
    }
    if checks
        .validity
        .unwrap_or(cfg.adversary.controlled.is_empty())
    {
        out.push(check(
            "validity",
            c.validity_applicable == c.trials && c.validity == c.trials,
            format!(
                "{}/{} trials decided the sender input",
                c.validity, c.validity_applicable
            ),
        ));
    }
    if checks.honest_success.unwrap_or(false) {
        out.push(check(
            "honest_success",
            c.honest_success_applicable > 0 && c.honest_success == c.honest_success_applicable,
            format!(
                "{}/{} trials decided the sender input",
                c.honest_success, c.honest_success_applicable
            ),
        ));
    }
    if checks.all_abort.unwrap_or(false) {
        out.push(check(
            "all_abort",
            c.all_abort == c.trials,
            format!(
                "{}/{} trials had every honest receiver abort",
                c.all_abort, c.trials
            ),
        ));
    }
    if checks.forge_oracle.unwrap_or(false) {
        let (passed, detail) = match &reference.forge_success {
            Some(f) if c.forge_attempts > 0 => (
                r.forge_success.contains(f.value),
                format!(
                    "rate {:.6} in [{:.6}, {:.6}], exact {:.6}",
                    r.forge_success.rate, r.forge_success.low, r.forge_success.high, f.value
                ),
            ),
            Some(_) => (false, "no forge attempts".to_string()),
            None => (false, "no forging receiver to compare".to_string()),
        };
        out.push(check("forge_oracle", passed, detail));
    }
    if checks.full_knowledge.unwrap_or(false) {
        out.push(check(
            "full_knowledge",
            r.full_knowledge.contains(reference.full_knowledge),
            format!(
                "rate {:.6} in [{:.6}, {:.6}], expected {:.6}",
                r.full_knowledge.rate,
                r.full_knowledge.low,
                r.full_knowledge.high,
                reference.full_knowledge
            ),
        ));
    }
    out
}

pub fn run_point(checks: &Checks, point: &SweepPoint) -> Result<BatchOutcome, SimError> {
    let report = run_batch(&point.config)?;
    let reference = reference(&point.config);
    let checks = evaluate_checks(checks, &report, &reference);
    Ok(BatchOutcome {
        point: point.label.clone(),
        report,
        reference,
        checks,
    })
}

pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioOutcome, SimError> {
    let batches = scenario
        .points()
        .iter()
        .map(|p| run_point(&scenario.checks, p))
        .collect::<Result<_, _>>()?;
    Ok(ScenarioOutcome {
        scenario: scenario.scenario.clone(),
        batches,
    })
}
