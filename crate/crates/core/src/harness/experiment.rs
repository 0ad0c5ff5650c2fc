//! Experiment orchestration: (algorithm × seed) cells on a worker pool,
//! oracle comparison, β sweeps and the reports written to disk.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::output::{self, LabeledVector};
use super::scenario::Scenario;
use crate::coord::{self, Algorithm, RunOptions, Trace};
use crate::error::{Error, Result};
use crate::game::{self, GameInstance, NashResult};
use crate::graph::{Network, ENUMERATION_CAP};
use crate::oracle::{self, ExactSolution, SolverOptions};

pub const THREADS_ENV: &str = "COORDSIM_THREADS";
/// Trailing window of the convergence detector, in frames.
pub const CONVERGENCE_WINDOW: usize = 100;
/// Relative gain change below which a window counts as settled.
pub const CONVERGENCE_RTOL: f64 = 1e-4;

/// Worker pool sized by `COORDSIM_THREADS` when set.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::config(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::config(e.to_string()))
}

/// First frame after which the gain never again moves by more than
/// `rtol` (relative) across any trailing `window`-frame span. `None` if the
/// series has not settled by its last frame.
pub fn frames_to_convergence(gains: &[f64], window: usize, rtol: f64) -> Option<u64> {
    if gains.len() <= window {
        return None;
    }
    let settled = |t: usize| {
        let (a, b) = (gains[t], gains[t - window]);
        a.is_finite() && b.is_finite() && (a - b).abs() <= rtol * a.abs()
    };
    let mut first = None;
    for t in (window..gains.len()).rev() {
        if settled(t) {
            first = Some(t as u64);
        } else {
            break;
        }
    }
    first
}

/// `|V|·ln 2/β`
pub fn gap_bound(net: &Network, beta: f64) -> f64 {
    net.node_count() as f64 * std::f64::consts::LN_2 / beta
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub algorithm: Algorithm,
    pub beta: f64,
    pub seed: u64,
    pub frames: u64,
    pub cdm_events: u64,
    pub messages: u64,
    pub clamp_events: u64,
    pub final_gain: f64,
    pub final_sbar: LabeledVector,
    pub final_theta: LabeledVector,
    pub oracle_gain: Option<f64>,
    pub oracle_lambda: Option<LabeledVector>,
    pub deviation_inf: Option<f64>,
    pub gap_bound: f64,
    pub frames_to_convergence: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notice: Option<String>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOptions {
    /// Keep every k-th frame record in memory and in the trace CSV.
    pub record_every: u64,
    /// Directory receiving per-cell traces and summaries.
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            record_every: 1,
            out_dir: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub summaries: Vec<RunSummary>,
    pub traces: Vec<Trace>,
    pub oracle: Option<ExactSolution>,
}

fn oracle_for(scenario: &Scenario, net: &Network) -> Result<(Option<ExactSolution>, Option<String>)> {
    if net.node_count() > ENUMERATION_CAP {
        return Ok((
            None,
            Some(format!(
                "oracle comparison disabled: {} nodes exceed the enumeration cap {}",
                net.node_count(),
                ENUMERATION_CAP
            )),
        ));
    }
    let spec = scenario.objective_spec()?;
    let sol = oracle::solve_a_cg_opt(net, &spec, scenario.beta, &SolverOptions::default())?;
    Ok((Some(sol), None))
}

fn cell_stem(algorithm: Algorithm, seed: u64) -> String {
    format!("{algorithm}_seed{seed}")
}

/// Runs every (algorithm, seed) cell of the scenario. With an output
/// directory each cell writes `trace_<algo>_seed<s>.csv` and
/// `summary_<algo>_seed<s>.json` as soon as it finishes, and the merged
/// `summary.json` is written at the end.
pub fn run_experiment(scenario: &Scenario, opts: &ExperimentOptions) -> Result<ExperimentResult> {
    scenario.validate()?;
    let net = scenario.network()?;
    let spec = scenario.objective_spec()?;
    let params = scenario.params(&net, &spec, scenario.beta)?;
    let (exact, notice) = oracle_for(scenario, &net)?;
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir)?;
    }

    let cells: Vec<(Algorithm, u64)> = scenario
        .algorithm
        .algorithms()
        .into_iter()
        .flat_map(|a| scenario.seeds.iter().map(move |&s| (a, s)))
        .collect();

    let pool = worker_pool()?;
    let results: Vec<Result<(RunSummary, Trace)>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(algorithm, seed)| {
                let mut ro = RunOptions::new(scenario.frames, seed);
                ro.record_every = opts.record_every;
                ro.scenario = scenario.id.clone();
                let trace = coord::run(&net, &spec, algorithm, params, &ro)?;
                let deviation = exact.as_ref().map(|x| trace.final_s_bar.sup_distance(&x.lambda_star));
                let summary = RunSummary {
                    scenario: scenario.id.clone(),
                    algorithm,
                    beta: scenario.beta,
                    seed,
                    frames: trace.frames,
                    cdm_events: trace.total_events,
                    messages: trace.total_messages,
                    clamp_events: trace.clamp_events,
                    final_gain: *trace.gains.last().expect("at least one frame"),
                    final_sbar: LabeledVector::new(&net, &trace.final_s_bar),
                    final_theta: LabeledVector::new(&net, &trace.final_theta),
                    oracle_gain: exact.as_ref().map(|x| x.gain),
                    oracle_lambda: exact.as_ref().map(|x| LabeledVector::new(&net, &x.lambda_star)),
                    deviation_inf: deviation,
                    gap_bound: gap_bound(&net, scenario.beta),
                    frames_to_convergence: frames_to_convergence(&trace.gains, CONVERGENCE_WINDOW, CONVERGENCE_RTOL),
                    notice: notice.clone(),
                };
                if let Some(dir) = &opts.out_dir {
                    let stem = cell_stem(algorithm, seed);
                    let f = std::fs::File::create(dir.join(format!("trace_{stem}.csv")))?;
                    output::write_trace_csv(std::io::BufWriter::new(f), &net, &trace)?;
                    output::write_json(&dir.join(format!("summary_{stem}.json")), &summary)?;
                }
                Ok((summary, trace))
            })
            .collect()
    });

    let mut summaries = Vec::with_capacity(results.len());
    let mut traces = Vec::with_capacity(results.len());
    for r in results {
        let (s, t) = r?;
        summaries.push(s);
        traces.push(t);
    }
    if let Some(dir) = &opts.out_dir {
        output::write_json(&dir.join("summary.json"), &summaries)?;
    }
    Ok(ExperimentResult {
        summaries,
        traces,
        oracle: exact,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub beta: f64,
    pub algorithm: Algorithm,
    /// Mean final gain over seeds.
    pub converged_gain: f64,
    /// Mean over seeds; a run that never settles counts as its full length.
    pub frames_to_convergence: f64,
    pub settled_runs: usize,
    pub runs: usize,
    pub oracle_gain: Option<f64>,
    pub gap_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub scenario: String,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub const CSV_HEADER: &'static str =
        "beta,algorithm,converged_gain,frames_to_convergence,settled_runs,runs,oracle_gain,gap_bound";

    pub fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{},{},{},{},{}",
                    r.beta,
                    r.algorithm,
                    r.converged_gain,
                    r.frames_to_convergence,
                    r.settled_runs,
                    r.runs,
                    r.oracle_gain.map(|g| g.to_string()).unwrap_or_default(),
                    r.gap_bound
                )
            })
            .collect()
    }
}

/// Runs the scenario at each β and aggregates per algorithm.
pub fn sweep_beta(scenario: &Scenario, betas: &[f64], opts: &ExperimentOptions) -> Result<SweepResult> {
    if betas.is_empty() {
        return Err(Error::config("beta list is empty"));
    }
    if let Some(b) = betas.iter().find(|&&b| !(b > 0.0 && b.is_finite())) {
        return Err(Error::config(format!("beta must be positive, got {b}")));
    }
    let mut sorted = betas.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut rows = Vec::new();
    for beta in sorted {
        let mut sc = scenario.clone();
        sc.beta = beta;
        let cell_opts = ExperimentOptions {
            record_every: opts.record_every,
            out_dir: opts.out_dir.as_ref().map(|d| d.join(format!("beta_{beta}"))),
        };
        let res = run_experiment(&sc, &cell_opts)?;
        for alg in sc.algorithm.algorithms() {
            let runs: Vec<&RunSummary> = res.summaries.iter().filter(|s| s.algorithm == alg).collect();
            let n = runs.len() as f64;
            let settled = runs.iter().filter(|s| s.frames_to_convergence.is_some()).count();
            rows.push(SweepRow {
                beta,
                algorithm: alg,
                converged_gain: runs.iter().map(|s| s.final_gain).sum::<f64>() / n,
                frames_to_convergence: runs
                    .iter()
                    .map(|s| s.frames_to_convergence.unwrap_or(s.frames) as f64)
                    .sum::<f64>()
                    / n,
                settled_runs: settled,
                runs: runs.len(),
                oracle_gain: res.oracle.as_ref().map(|x| x.gain),
                gap_bound: runs[0].gap_bound,
            });
        }
    }
    let result = SweepResult {
        scenario: scenario.id.clone(),
        rows,
    };
    if let Some(dir) = &opts.out_dir {
        output::write_csv(&dir.join("sweep.csv"), SweepResult::CSV_HEADER, result.csv_rows())?;
        output::write_json(&dir.join("sweep.json"), &result)?;
    }
    Ok(result)
}

#[derive(Clone, Debug, Serialize)]
pub struct ExactReport {
    pub scenario: String,
    pub beta: f64,
    pub schedule: Vec<f64>,
    pub theta: LabeledVector,
    pub lambda: LabeledVector,
    pub gain: f64,
    pub dual_value: f64,
    pub residual: f64,
    pub iterations: usize,
    pub gap_bound: f64,
}

/// Solves at a single β, or along an increasing schedule when one is given.
pub fn exact_report(scenario: &Scenario, beta: Option<f64>, schedule: Option<&[f64]>) -> Result<ExactReport> {
    let net = scenario.network()?;
    let spec = scenario.objective_spec()?;
    let (sol, schedule) = match schedule {
        Some(sch) => {
            let mut sch = sch.to_vec();
            if let Some(b) = beta {
                if sch.last().is_none_or(|&l| b > l) {
                    sch.push(b);
                }
            }
            let res = oracle::solve_cg_opt(&net, &spec, &sch, oracle::DEFAULT_TOL)?;
            (res.solution, sch)
        }
        None => {
            let b = beta.unwrap_or(scenario.beta);
            (oracle::solve_a_cg_opt(&net, &spec, b, &SolverOptions::default())?, vec![b])
        }
    };
    Ok(ExactReport {
        scenario: scenario.id.clone(),
        beta: sol.beta,
        schedule,
        theta: LabeledVector::new(&net, &sol.theta_star),
        lambda: LabeledVector::new(&net, &sol.lambda_star),
        gain: sol.gain,
        dual_value: sol.dual_value,
        residual: sol.residual,
        iterations: sol.iterations,
        gap_bound: gap_bound(&net, sol.beta),
    })
}

pub fn write_exact(dir: &Path, report: &ExactReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    output::write_json(&dir.join("exact.json"), report)
}

#[derive(Clone, Debug, Serialize)]
pub struct NashReport {
    pub scenario: String,
    pub beta: f64,
    pub theta_ne: LabeledVector,
    pub lambda_ne: LabeledVector,
    pub potential_value: f64,
    pub gain_ne: f64,
    pub social_gain: f64,
    pub gap_to_social_opt: f64,
    pub poa_bound: f64,
    pub poa_ratio: Option<f64>,
    pub residual: f64,
    pub rounds: usize,
    pub final_alpha: f64,
    pub oracle_distance: f64,
}

pub const NE_TOL: f64 = 1e-8;
pub const NE_MAX_ROUNDS: usize = 100_000;

pub fn nash_report(scenario: &Scenario, beta: f64) -> Result<(NashReport, NashResult)> {
    let net = scenario.network()?;
    let spec = scenario.objective_spec()?;
    let bounds = scenario.clamp_bounds(&net, &spec, beta)?;
    let g = GameInstance::with_bounds(net.clone(), spec, beta, bounds)?;
    let ne = game::find_ne(&g, NE_TOL, NE_MAX_ROUNDS, scenario.alpha)?;
    let report = NashReport {
        scenario: scenario.id.clone(),
        beta,
        theta_ne: LabeledVector::new(&net, &ne.theta_ne),
        lambda_ne: LabeledVector::new(&net, &ne.lambda_ne),
        potential_value: ne.potential_value,
        gain_ne: ne.gain_ne,
        social_gain: ne.social_gain,
        gap_to_social_opt: ne.gap_to_social_opt,
        poa_bound: ne.poa_bound,
        poa_ratio: ne.poa_ratio,
        residual: ne.residual,
        rounds: ne.rounds,
        final_alpha: ne.final_alpha,
        oracle_distance: ne.oracle_distance,
    };
    Ok((report, ne))
}

pub fn write_nash(dir: &Path, report: &NashReport, ne: &NashResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    output::write_json(&dir.join("nash.json"), report)?;
    output::write_csv(
        &dir.join("potential_ascent.csv"),
        "round,potential,displacement",
        ne.history
            .iter()
            .map(|r| format!("{},{},{}", r.round, r.potential, r.displacement)),
    )
}
