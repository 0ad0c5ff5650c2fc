//! Command-line front end. Exit codes: 0 success, 1 usage or configuration
//! error, 2 numerical failure, 3 I/O error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use super::experiment::{self, ExperimentOptions};
use super::output;
use super::scenario::{load_scenario, AlgorithmChoice, Scenario};
use super::verify;
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "coordsim", version, about = "Distributed coordination-gain simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct ScenarioArgs {
    /// Preset name (STAR-C1, COMP-C1, RAND-C1, RAND-C2, LINE-EX) or scenario file
    #[arg(long)]
    scenario: String,
}

#[derive(Debug, clap::Args)]
struct RunOverrides {
    /// dual, steep, ind or all
    #[arg(long = "algo")]
    algo: Option<AlgorithmChoice>,
    #[arg(long)]
    frames: Option<u64>,
    /// One seed or a comma-separated list
    #[arg(long = "seed", value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Keep every k-th frame in the trace CSV
    #[arg(long, default_value_t = 1)]
    record_every: u64,
}

impl RunOverrides {
    fn apply(&self, sc: &mut Scenario) {
        if let Some(a) = self.algo {
            sc.algorithm = a;
        }
        if let Some(f) = self.frames {
            sc.frames = f;
        }
        if !self.seeds.is_empty() {
            sc.seeds = self.seeds.clone();
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the update algorithms and write traces and summaries
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        overrides: RunOverrides,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the regularized problem exactly
    Exact {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        beta: Option<f64>,
        /// Increasing β values for continuation, e.g. 1,10,100,1000
        #[arg(long, value_delimiter = ',')]
        schedule: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the Nash equilibrium of the coordination game
    Game {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the scenario over several β values
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        overrides: RunOverrides,
        #[arg(long, value_delimiter = ',', required = true)]
        betas: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the property suite
    Verify,
    /// Print gnuplot column descriptions for a CSV written by this tool
    Columns {
        #[arg(long)]
        csv: PathBuf,
    },
}

fn with_scenario(args: &ScenarioArgs) -> Result<Scenario> {
    load_scenario(&args.scenario)
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Run {
            scenario,
            overrides,
            beta,
            out,
        } => {
            let mut sc = with_scenario(&scenario)?;
            overrides.apply(&mut sc);
            if let Some(b) = beta {
                sc.beta = b;
            }
            let opts = ExperimentOptions {
                record_every: overrides.record_every.max(1),
                out_dir: Some(out.clone()),
            };
            let res = experiment::run_experiment(&sc, &opts)?;
            for s in &res.summaries {
                let dev = s.deviation_inf.map(|d| format!(", deviation {d:.4}")).unwrap_or_default();
                println!(
                    "{} {} seed {}: final gain {:.4}{} ({} frames, {} events)",
                    s.scenario, s.algorithm, s.seed, s.final_gain, dev, s.frames, s.cdm_events
                );
                if let Some(n) = &s.notice {
                    println!("  note: {n}");
                }
            }
            println!("wrote {}", out.display());
            Ok(0)
        }
        Command::Exact {
            scenario,
            beta,
            schedule,
            out,
        } => {
            let sc = with_scenario(&scenario)?;
            let sch = (!schedule.is_empty()).then_some(schedule.as_slice());
            let rep = experiment::exact_report(&sc, beta, sch)?;
            experiment::write_exact(&out, &rep)?;
            println!(
                "{} beta {}: gain {:.6}, residual {:.2e}, gap bound {:.4}",
                rep.scenario, rep.beta, rep.gain, rep.residual, rep.gap_bound
            );
            for (k, v) in &rep.lambda.0 {
                println!("  lambda_{k} = {v:.6}");
            }
            Ok(0)
        }
        Command::Game { scenario, beta, out } => {
            let sc = with_scenario(&scenario)?;
            let beta = beta.unwrap_or(sc.beta);
            let (rep, ne) = experiment::nash_report(&sc, beta)?;
            experiment::write_nash(&out, &rep, &ne)?;
            println!(
                "{} beta {}: NE gain {:.6}, social optimum {:.6}, gap {:.2e} (bound {:.4}), {} rounds",
                rep.scenario, beta, rep.gain_ne, rep.social_gain, rep.gap_to_social_opt, rep.poa_bound, rep.rounds
            );
            Ok(0)
        }
        Command::Sweep {
            scenario,
            overrides,
            betas,
            out,
        } => {
            let mut sc = with_scenario(&scenario)?;
            overrides.apply(&mut sc);
            let opts = ExperimentOptions {
                record_every: overrides.record_every.max(1),
                out_dir: Some(out.clone()),
            };
            let res = experiment::sweep_beta(&sc, &betas, &opts)?;
            println!("{}", SWEEP_TABLE_HEADER);
            for r in &res.rows {
                println!(
                    "{:>8} {:>6} {:>14.4} {:>14.1} {:>6}/{}",
                    r.beta, r.algorithm, r.converged_gain, r.frames_to_convergence, r.settled_runs, r.runs
                );
            }
            Ok(0)
        }
        Command::Verify => {
            let results = verify::run_verify();
            for r in &results {
                println!("{}", r.line());
            }
            Ok(if results.iter().all(|r| r.passed) { 0 } else { 2 })
        }
        Command::Columns { csv } => {
            let text = std::fs::read_to_string(&csv)?;
            let header = output::csv_header(&text).ok_or_else(|| Error::usage("CSV has no header row"))?;
            print!("{}", output::gnuplot_columns(header, &csv.display().to_string()));
            Ok(0)
        }
    }
}

const SWEEP_TABLE_HEADER: &str = "    beta   algo           gain  frames-to-conv settled";

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
