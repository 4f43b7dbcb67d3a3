//! `bfmech` — generate, run, audit, and benchmark budget-feasible
//! procurement mechanisms on exact-rational market instances.
//!
//! Exit codes: 0 on success (including a clean audit), 1 when an audit ran
//! to completion but a property check failed, 2 on usage errors (bad flags,
//! malformed files, or a mechanism/valuation mismatch).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use bfmech::gen::{generate, Family, GenConfig};
use bfmech::mechanisms::{
    BrokenGreedyIsk, DetIsk, GreedyIsk, GreedySm, Mechanism, RandIsk, SmExact, SmFrac,
};
use bfmech::oracle::{brute_force_opt, empirical_ratio, EmpiricalRatio};
use bfmech::payments::{audit, run_with_payments};
use bfmech::rat::format_rat;
use bfmech::{rat_int, Instance, Rat};

use bfmech_cli::{instance_to_doc, parse, render};

#[derive(Parser)]
#[command(
    name = "bfmech",
    version,
    about = "Budget-feasible procurement: truthful mechanisms over exact-rational markets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct MarketArgs {
    /// Instance family: knapsack, matching, forest, partition-matroid,
    /// kd-matching, coverage
    #[arg(long)]
    family: String,
    /// Number of agents (edges, for the graph families)
    #[arg(long, visible_alias = "edges", default_value_t = 6)]
    agents: usize,
    /// Hyperedge arity for kd-matching; ignored elsewhere
    #[arg(long, default_value_t = 3)]
    k: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded random instance as a JSON document
    Gen {
        #[command(flatten)]
        market: MarketArgs,
        /// Generator seed; equal seeds give byte-identical documents
        #[arg(long)]
        seed: u64,
        /// Write the document here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a mechanism on an instance file at truthful bids
    Run {
        /// Path to a JSON instance document
        #[arg(long)]
        instance: PathBuf,
        /// Mechanism name (see `--help` for the list)
        #[arg(long)]
        mechanism: String,
        /// Lottery seed; required by rand-isk
        #[arg(long)]
        seed: Option<u64>,
        /// Also report the exhaustive optimum and the value ratio
        #[arg(long)]
        oracle: bool,
    },
    /// Audit incentive properties on an instance file; exits 1 on failure
    Audit {
        /// Path to a JSON instance document
        #[arg(long)]
        instance: PathBuf,
        /// Mechanism name (see `--help` for the list)
        #[arg(long)]
        mechanism: String,
        /// Lottery seed; required by rand-isk
        #[arg(long)]
        seed: Option<u64>,
        /// Probe-grid density per agent for the monotonicity sweep
        #[arg(long, default_value_t = 4)]
        grid: usize,
    },
    /// Benchmark mechanisms over a range of seeded instances (CSV output)
    Bench {
        #[command(flatten)]
        market: MarketArgs,
        /// Number of instances; seeds run from --seed upward
        #[arg(long, default_value_t = 20)]
        trials: u64,
        /// First generator seed (also the lottery seed per trial)
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Mechanism to benchmark; repeat the flag to compare several
        #[arg(long = "mechanism", required = true)]
        mechanisms: Vec<String>,
        /// Write CSV here instead of stdout
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

const MECHANISM_NAMES: [&str; 7] = [
    "greedy-sm",
    "mechanism-sm",
    "mechanism-sm-frac",
    "greedy-isk",
    "det-isk",
    "rand-isk",
    "broken-greedy-isk",
];

fn mechanism_by_name(name: &str, seed: Option<u64>) -> Result<Box<dyn Mechanism>> {
    Ok(match name {
        "greedy-sm" => Box::new(GreedySm),
        "mechanism-sm" => Box::new(SmExact),
        "mechanism-sm-frac" => Box::new(SmFrac),
        "greedy-isk" => Box::new(GreedyIsk),
        "det-isk" => Box::new(DetIsk),
        "rand-isk" => Box::new(RandIsk::new(
            seed.ok_or_else(|| anyhow!("rand-isk draws a lottery: pass an explicit --seed"))?,
        )),
        "broken-greedy-isk" => Box::new(BrokenGreedyIsk),
        other => bail!("unknown mechanism {other:?}; expected one of {MECHANISM_NAMES:?}"),
    })
}

fn market_config(market: &MarketArgs, seed: u64) -> Result<GenConfig> {
    let family: Family = market.family.parse().map_err(|e| anyhow!("{e}"))?;
    let mut config = GenConfig::new(family, market.agents, seed);
    config.k = market.k;
    Ok(config)
}

fn load_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (_, instance) = parse(&text)?;
    Ok(instance)
}

fn oracle_optimum(instance: &Instance) -> Result<Rat> {
    let costs: Vec<Rat> = instance.agents.iter().map(|a| a.true_cost.clone()).collect();
    let (_, opt) = brute_force_opt(&instance.valuation, &costs, &instance.budget)
        .map_err(|e| anyhow!("oracle: {e}"))?;
    Ok(opt)
}

#[derive(Serialize)]
struct PaymentDoc {
    id: usize,
    amount: String,
}

#[derive(Serialize)]
struct RunReport {
    mechanism: String,
    winners: Vec<usize>,
    payments: Vec<PaymentDoc>,
    value: String,
    total_payment: String,
    budget: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    opt: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ratio: Option<String>,
}

fn cmd_gen(market: &MarketArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    let config = market_config(market, seed)?;
    let instance = generate(&config).map_err(|e| anyhow!("{e}"))?;
    let text = render(&instance_to_doc(&instance)?)?;
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_run(path: &Path, mechanism: &str, seed: Option<u64>, oracle: bool) -> Result<()> {
    let instance = load_instance(path)?;
    let mech = mechanism_by_name(mechanism, seed)?;
    let bids = instance.truthful_bids();
    let outcome = run_with_payments(mech.as_ref(), &instance, &bids).map_err(|e| anyhow!("{e}"))?;
    let (opt, ratio) = if oracle {
        let opt = oracle_optimum(&instance)?;
        let ratio = empirical_ratio(&opt, &outcome.value);
        (Some(format_rat(&opt)), Some(ratio.to_string()))
    } else {
        (None, None)
    };
    let report = RunReport {
        mechanism: mech.name().to_string(),
        winners: outcome.winners.iter().copied().collect(),
        payments: outcome
            .winners
            .iter()
            .map(|&id| PaymentDoc { id, amount: format_rat(&outcome.payments[&id]) })
            .collect(),
        value: format_rat(&outcome.value),
        total_payment: format_rat(&outcome.total_payment()),
        budget: format_rat(&instance.budget),
        opt,
        ratio,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_audit(path: &Path, mechanism: &str, seed: Option<u64>, grid: usize) -> Result<ExitCode> {
    let instance = load_instance(path)?;
    let mech = mechanism_by_name(mechanism, seed)?;
    let report = audit(mech.as_ref(), &instance, grid).map_err(|e| anyhow!("{e}"))?;
    for check in &report.checks {
        if check.passed {
            println!("check {}: pass", check.property);
        } else {
            println!("check {}: FAIL", check.property);
            if let Some(witness) = &check.counterexample {
                println!("  counterexample: {witness}");
            }
        }
    }
    println!(
        "total-payment {} budget {} digest {:016x}",
        format_rat(&report.payment_total),
        format_rat(&report.budget),
        report.digest
    );
    if report.all_passed() {
        println!("audit verdict: pass");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("audit verdict: FAIL {:?}", report.failed_properties());
        Ok(ExitCode::from(1))
    }
}

struct BenchStats {
    ratios: Vec<EmpiricalRatio>,
}

impl BenchStats {
    fn max_ratio(&self) -> String {
        let mut best: Option<&Rat> = None;
        for r in &self.ratios {
            match r {
                EmpiricalRatio::Infinite => return "inf".into(),
                EmpiricalRatio::Finite(r) => {
                    if best.is_none_or(|b| r > b) {
                        best = Some(r);
                    }
                }
            }
        }
        best.map(format_rat).unwrap_or_default()
    }

    fn mean_ratio(&self) -> String {
        let mut total: Rat = rat_int(0);
        for r in &self.ratios {
            match r {
                EmpiricalRatio::Infinite => return "inf".into(),
                EmpiricalRatio::Finite(r) => total += r,
            }
        }
        if self.ratios.is_empty() {
            String::new()
        } else {
            format_rat(&(total / rat_int(self.ratios.len() as i64)))
        }
    }
}

fn cmd_bench(
    market: &MarketArgs,
    trials: u64,
    first_seed: u64,
    mechanisms: &[String],
    csv_path: Option<&Path>,
) -> Result<()> {
    let mut writer: csv::Writer<Box<dyn Write>> = csv::Writer::from_writer(match csv_path {
        Some(path) => Box::new(
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        ),
        None => Box::new(std::io::stdout()),
    });
    writer.write_record(["seed", "mechanism", "value", "opt", "ratio", "total_payment", "budget"])?;

    let mut stats: Vec<BenchStats> =
        mechanisms.iter().map(|_| BenchStats { ratios: Vec::new() }).collect();

    for trial in 0..trials {
        let seed = first_seed + trial;
        let config = market_config(market, seed)?;
        let instance = generate(&config).map_err(|e| anyhow!("{e}"))?;
        let bids = instance.truthful_bids();
        let opt = oracle_optimum(&instance)?;
        for (mech_ix, name) in mechanisms.iter().enumerate() {
            let mech = mechanism_by_name(name, Some(seed))?;
            let outcome =
                run_with_payments(mech.as_ref(), &instance, &bids).map_err(|e| anyhow!("{e}"))?;
            let ratio = empirical_ratio(&opt, &outcome.value);
            writer.write_record([
                seed.to_string(),
                mech.name().to_string(),
                format_rat(&outcome.value),
                format_rat(&opt),
                ratio.to_string(),
                format_rat(&outcome.total_payment()),
                format_rat(&instance.budget),
            ])?;
            stats[mech_ix].ratios.push(ratio);
        }
    }

    for (mech_ix, name) in mechanisms.iter().enumerate() {
        writer.write_record([
            "max".to_string(),
            name.clone(),
            String::new(),
            String::new(),
            stats[mech_ix].max_ratio(),
            String::new(),
            String::new(),
        ])?;
        writer.write_record([
            "mean".to_string(),
            name.clone(),
            String::new(),
            String::new(),
            stats[mech_ix].mean_ratio(),
            String::new(),
            String::new(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen { market, seed, out } => cmd_gen(market, *seed, out.as_deref()).map(|()| ExitCode::SUCCESS),
        Command::Run { instance, mechanism, seed, oracle } => {
            cmd_run(instance, mechanism, *seed, *oracle).map(|()| ExitCode::SUCCESS)
        }
        Command::Audit { instance, mechanism, seed, grid } => {
            cmd_audit(instance, mechanism, *seed, *grid)
        }
        Command::Bench { market, trials, seed, mechanisms, csv } => {
            cmd_bench(market, *trials, *seed, mechanisms, csv.as_deref()).map(|()| ExitCode::SUCCESS)
        }
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
