use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dba_cli::config::{built_in, built_in_names, parse_config};
use dba_cli::{emit_report, run_scenario, OutputFormat, Overrides, Scenario};
use dba_core::adversary::{
    forge_success_closed_form, forge_success_oracle, heuristic_forge_estimate,
    MAX_ENUMERATION_LENGTH,
};
use dba_core::listgen::{format_combined, format_segment};
use dba_core::sim::{prepare_trial, run_agreement};
use dba_core::{Bit, Bribed, DecideRule, ExactProbability, PartyId, Probability, Strategy};

#[derive(Parser)]
#[command(
    name = "dba",
    version,
    about = "Detectable Byzantine agreement simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and print its report. Exits 1 if a check fails.
    Run(ScenarioArgs),
    /// Run one trial and dump its lists, transcript and outcome.
    Trial {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Trial index within the batch.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Print the resolved scenario as TOML.
    Config(ScenarioArgs),
    /// List the built-in scenarios.
    Scenarios,
    /// Exact probability that a forged claim passes an honest receiver.
    Oracle {
        #[arg(long, short = 'm')]
        segment_length: usize,
        #[arg(long, short = 'd', default_value_t = 1)]
        distributors: usize,
        /// Number of disclosed segments.
        #[arg(long, default_value_t = 0)]
        disclosed: usize,
        /// Honest receivers that must all accept a forged claim.
        #[arg(long, default_value_t = 1)]
        targets: usize,
    },
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Scenario file.
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Built-in scenario name (see `dba scenarios`).
    #[arg(long)]
    scenario: Option<String>,
    /// Number of receivers, n - 1.
    #[arg(long)]
    receivers: Option<usize>,
    #[arg(long, short = 'd')]
    distributors: Option<usize>,
    #[arg(long, short = 'm')]
    segment_length: Option<usize>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Disclosure probability of a bribed distributor.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, value_parser = parse_bit)]
    sender_input: Option<Bit>,
    #[arg(long)]
    sender_strategy: Option<Strategy>,
    #[arg(long)]
    receiver_strategy: Option<Strategy>,
    #[arg(long)]
    decide_rule: Option<DecideRule>,
    /// Controlled participants, e.g. `4` or `1,4`; `none` for nobody.
    #[arg(long, value_parser = parse_parties)]
    controlled: Option<BTreeSet<PartyId>>,
    /// Bribed distributors: `all`, `none` or indices such as `5,6`.
    #[arg(long, value_parser = parse_bribed)]
    bribed: Option<Bribed>,
    #[arg(long)]
    output: Option<OutputFormat>,
}

fn parse_bit(s: &str) -> Result<Bit, String> {
    match s {
        "0" => Ok(Bit::Zero),
        "1" => Ok(Bit::One),
        _ => Err(format!("expected 0 or 1, got {s:?}")),
    }
}

fn parse_parties(s: &str) -> Result<BTreeSet<PartyId>, String> {
    if s == "none" || s.is_empty() {
        return Ok(BTreeSet::new());
    }
    s.split(',')
        .map(|p| {
            let p = p.trim().trim_start_matches('P');
            p.parse()
                .map(PartyId)
                .map_err(|_| format!("bad party index {p:?}"))
        })
        .collect()
}

fn parse_bribed(s: &str) -> Result<Bribed, String> {
    match s {
        "all" => Ok(Bribed::All),
        "none" => Ok(Bribed::None),
        _ => parse_parties(s).map(Bribed::Parties),
    }
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<Scenario> {
        let base = match (&self.config, &self.scenario) {
            (Some(path), _) => parse_config(path)?,
            (None, Some(name)) => built_in(name)?,
            (None, None) => Scenario::default(),
        };
        let overrides = Overrides {
            receivers: self.receivers,
            distributors: self.distributors,
            segment_length: self.segment_length,
            trials: self.trials,
            seed: self.seed,
            p: self.p,
            sender_input: self.sender_input,
            sender_strategy: self.sender_strategy,
            receiver_strategy: self.receiver_strategy,
            decide_rule: self.decide_rule,
            controlled: self.controlled.clone(),
            bribed: self.bribed.clone(),
            output: self.output,
        };
        Ok(overrides.apply(base)?)
    }
}

fn dump_trial(args: &ScenarioArgs, index: u64) -> Result<()> {
    let scenario = args.resolve()?;
    let points = scenario.points();
    if points.len() != 1 {
        bail!(
            "scenario sweeps {} points; pin the swept values with flags to dump one trial",
            points.len()
        );
    }
    let mut cfg = points[0].config.clone();
    cfg.record_transcripts = true;
    cfg.validate()?;

    let (world, knowledge, mut adversary_rng) = prepare_trial(&cfg, index)?;
    let report = run_agreement(&cfg, index, &world, knowledge, &mut adversary_rng)?;

    for seg in &world.segments {
        print!("{}", format_segment(seg));
    }
    print!("{}", format_combined(&world.sender_list));
    for list in world.receiver_lists.values() {
        print!("{}", format_combined(list));
    }
    println!("# transcript");
    for record in report.transcript.iter().flatten() {
        println!("{record}");
    }
    println!("# outcome");
    println!("{}", report.to_canonical_line());
    Ok(())
}

fn oracle(m: usize, d: usize, disclosed: usize, targets: usize) -> Result<()> {
    if disclosed > d {
        bail!("disclosed segments ({disclosed}) exceed distributors ({d})");
    }
    let mask: Vec<bool> = (0..d).map(|s| s < disclosed).collect();
    let (exact, method): (ExactProbability, _) = if d * m <= MAX_ENUMERATION_LENGTH {
        (forge_success_oracle(m, d, &mask, targets)?, "enumeration")
    } else {
        (
            forge_success_closed_form(m, d, &mask, targets)?,
            "closed-form",
        )
    };
    let heuristic: f64 = heuristic_forge_estimate(d * m);
    println!("m={m} d={d} disclosed={disclosed} targets={targets}");
    println!("exact      {exact}");
    println!("value      {:.6e}", exact.to_f64());
    println!("method     {method}");
    println!("heuristic  {:.6e}", heuristic.powi(targets as i32));
    Ok(())
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let scenario = args.resolve()?;
            let outcome = run_scenario(&scenario).context("batch failed")?;
            print!("{}", emit_report(&outcome, scenario.output));
            if !outcome.passed() {
                for f in outcome.failures() {
                    eprintln!("check failed: {f}");
                }
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Trial { scenario, index } => dump_trial(&scenario, index)?,
        Command::Config(args) => print!("{}", args.resolve()?.to_toml()),
        Command::Scenarios => {
            for name in built_in_names() {
                println!("{name}");
            }
        }
        Command::Oracle {
            segment_length,
            distributors,
            disclosed,
            targets,
        } => oracle(segment_length, distributors, disclosed, targets)?,
    }
    Ok(ExitCode::SUCCESS)
}
