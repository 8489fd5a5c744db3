use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cogmac::belief::{BetaBelief, Belief};
use cogmac::harness::{emit_results, format_sig9, run_experiment, ExperimentConfig, OutputFormat, Overrides};
use cogmac::multi_user::known_theta_report;
use cogmac::planning::{gittins_index, optimal_value_with_budget, stopping_index, GittinsParams, GittinsTable, DEFAULT_STATE_BUDGET};
use cogmac::verify::{run_criterion, VerifyOptions, CRITERIA};
use cogmac::{Error, Result, ThetaVector};

#[derive(Parser)]
#[command(name = "cogmac", version, about = "Cognitive medium-access planners, solvers and simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact planner value, stopping index or Gittins indices
    Plan {
        #[command(subcommand)]
        what: Plan,
    },
    /// Symmetric optimum, proportional strategy and decay constants for a known θ
    Solve(SolveArgs),
    /// Run a single- or multi-user Monte Carlo experiment
    Sim(SimArgs),
    /// Run the acceptance checks and print one line per criterion
    Verify(VerifyArgs),
}

#[derive(Args)]
struct BetaArgs {
    /// Beta a parameters, one per channel
    #[arg(long, value_delimiter = ',')]
    a: Option<Vec<f64>>,
    /// Beta b parameters, one per channel
    #[arg(long, value_delimiter = ',')]
    b: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Plan {
    /// Optimal expected throughput over T slots by dynamic programming
    Dp {
        #[command(flatten)]
        beta: BetaArgs,
        /// Manifest supplying [prior] (or [theta] for the channel count) and [block]
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        channels: usize,
        #[arg(long)]
        slots: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        bits: f64,
        #[arg(long, default_value_t = DEFAULT_STATE_BUDGET)]
        budget: u128,
        /// Include the full policy table
        #[arg(long)]
        policy: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stopping index of one Beta channel over T slots
    Stopping {
        #[command(flatten)]
        beta: BetaArgs,
        #[arg(long)]
        slots: usize,
    },
    /// Gittins index of a Beta arm, or the whole table with --table
    Gittins {
        #[command(flatten)]
        beta: BetaArgs,
        #[arg(long, default_value_t = 0.9)]
        discount: f64,
        #[arg(long, default_value_t = 400)]
        truncation: u32,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        #[arg(long)]
        table: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: String,
    },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    theta: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    users: usize,
    #[arg(long, default_value_t = 1)]
    slots: u64,
    #[arg(long, default_value_t = 1.0)]
    bits: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long, value_delimiter = ',')]
    theta: Option<Vec<f64>>,
    #[arg(long)]
    slots: Option<usize>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = VerifyOptions::default().seed)]
    seed: u64,
    /// Directory for the Monte Carlo result files
    #[arg(long)]
    out: Option<PathBuf>,
    /// Criteria to run (default: all)
    #[arg(long, value_delimiter = ',')]
    only: Option<Vec<u32>>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or_default().to_owned();
            eprintln!("cogmac: error[usage]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Plan { what } => plan(what),
        Command::Solve(a) => solve(a),
        Command::Sim(a) => sim(a),
        Command::Verify(a) => return verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cogmac: error[{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes `contents` to `dir/name`, or to stdout without a directory.
fn deliver(out: Option<&Path>, name: &str, contents: &str) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            let path = dir.join(name);
            fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
            log::info!("wrote {}", path.display());
        }
        None => print!("{contents}"),
    }
    Ok(())
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn beta_belief(beta: &BetaArgs, n_channels: usize) -> Result<BetaBelief> {
    let a = beta.a.clone().unwrap_or_else(|| vec![1.0; n_channels]);
    let b = beta.b.clone().unwrap_or_else(|| vec![1.0; a.len()]);
    BetaBelief::new(a, b)
}

fn plan(what: Plan) -> Result<()> {
    match what {
        Plan::Dp {
            beta,
            config,
            channels,
            slots,
            bits,
            budget,
            policy,
            out,
        } => {
            let (belief, horizon, bits) = match config {
                Some(path) => {
                    let c = ExperimentConfig::from_path(&path, &Overrides { slots, ..Overrides::default() })?;
                    (c.strategy_prior().to_belief()?, c.block.n_slots, c.block.bits_per_slot)
                }
                None => {
                    let horizon = slots.ok_or_else(|| Error::InvalidConfig("--slots is required".into()))?;
                    (Belief::from(beta_belief(&beta, channels)?), horizon, bits)
                }
            };
            let result = optimal_value_with_budget(&belief, horizon, bits, budget)?;
            let text = if policy {
                json(&result)
            } else {
                json(&serde_json::json!({
                    "value": result.value,
                    "first_channel": result.first_action + 1,
                    "horizon": result.horizon,
                    "bits_per_slot": result.bits_per_slot,
                    "n_states": result.n_states(),
                }))
            };
            deliver(out.as_deref(), "plan.json", &text)
        }
        Plan::Stopping { beta, slots } => {
            let belief = Belief::from(beta_belief(&beta, 1)?);
            let index = stopping_index(&belief, slots)?;
            print!("{}", json(&serde_json::json!({ "horizon": slots, "index": index })));
            Ok(())
        }
        Plan::Gittins {
            beta,
            discount,
            truncation,
            tolerance,
            table,
            out,
            format,
        } => {
            let params = GittinsParams {
                discount,
                state_truncation: truncation,
                tolerance,
            };
            if table {
                let t = GittinsTable::build(params)?;
                let format: OutputFormat = format.parse()?;
                let mut rows = Vec::new();
                for n in 2..truncation {
                    for a in 1..n {
                        rows.push((a, n - a, t.get(a, n - a).expect("in table")));
                    }
                }
                let (name, text) = match format {
                    OutputFormat::Csv => {
                        let mut s = String::from("a,b,index\n");
                        for (a, b, v) in rows {
                            s.push_str(&format!("{a},{b},{}\n", format_sig9(v)));
                        }
                        ("gittins_table.csv", s)
                    }
                    OutputFormat::Json => ("gittins_table.json", json(&serde_json::json!({ "params": params, "rows": rows }))),
                };
                deliver(out.as_deref(), name, &text)
            } else {
                let b = beta_belief(&beta, 1)?;
                let indices = (0..b.n_channels())
                    .map(|i| {
                        let (a, bb) = b.params(i);
                        gittins_index(a, bb, &params)
                    })
                    .collect::<Result<Vec<_>>>()?;
                for (i, g) in indices.iter().enumerate() {
                    if !g.meets_tolerance {
                        log::warn!(
                            "channel {}: truncation bound {:.2e} exceeds the tolerance; raise --truncation",
                            i + 1,
                            g.truncation_bound
                        );
                    }
                }
                deliver(out.as_deref(), "gittins.json", &json(&indices))
            }
        }
    }
}

fn solve(a: SolveArgs) -> Result<()> {
    let theta = ThetaVector::new(a.theta)?;
    let report = known_theta_report(&theta, a.users, a.slots, a.bits)?;
    deliver(a.out.as_deref(), "solve.json", &json(&report))
}

fn sim(a: SimArgs) -> Result<()> {
    let overrides = Overrides {
        seed: a.seed,
        strategy: a.strategy.map(|s| s.parse()).transpose()?,
        theta: a.theta,
        slots: a.slots,
        users: a.users,
        replications: a.replications,
        out: a.out,
        format: a.format.map(|f| f.parse()).transpose()?,
    };
    let config = match &a.config {
        Some(path) => ExperimentConfig::from_path(path, &overrides)?,
        None => ExperimentConfig::from_overrides(&overrides)?,
    };
    let stats = run_experiment(&config)?;
    match &config.output_path {
        Some(dir) => {
            emit_results(&stats, &config.outputs, config.format, dir)?;
        }
        None => print!("{}", json(&stats.summary)),
    }
    Ok(())
}

fn verify(a: VerifyArgs) -> ExitCode {
    let opts = VerifyOptions { seed: a.seed, out: a.out };
    let ids: Vec<u32> = a.only.unwrap_or_else(|| CRITERIA.collect());
    let mut failed = 0;
    for id in ids {
        match run_criterion(id, &opts) {
            Ok(r) => {
                println!("{r}");
                failed += usize::from(!r.passed);
            }
            Err(e) => {
                println!("FAIL [{id:>2}] error[{}]: {e}", e.code());
                failed += 1;
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        eprintln!("cogmac: error[verify]: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
