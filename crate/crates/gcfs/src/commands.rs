//! The four experiment commands and their file outputs.

use std::path::{Path, PathBuf};

use gcfs_core::markov::{
    chain_mean_delay, steady_state_closed_form_a1, steady_state_roots, steady_state_truncated,
    ChainParams,
};
use gcfs_core::meanfield::{default_tolerance, solve_threshold};
use gcfs_core::metrics::{compare_distributions, relative_error, replication_stats};
use gcfs_core::metrics::{DistributionComparison, ReplicationStats};
use gcfs_core::sim::{pool, simulate, SimConfig};
use gcfs_core::{
    MeanFieldSolution, Policy, Scenario, SimSummary, StationaryDistribution, Status,
    TrafficModel,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, SweepAxis};
use crate::error::CliError;
use crate::output::{ensure_dir, num, write_csv, write_json};

/// Stationary laws needing more states than this are not tabulated.
pub const MAX_STATIONARY_STATES: usize = 1_000_000;

/// Resolved run settings after CLI, environment and config precedence.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub workers: usize,
    pub seeds: Vec<u64>,
}

impl RunOptions {
    /// Flag and environment values arrive merged through clap; the config
    /// and built-in defaults fill the rest.
    pub fn resolve(
        cfg: &ExperimentConfig,
        out: Option<PathBuf>,
        workers: Option<usize>,
        seed: Option<u64>,
    ) -> Result<Self, CliError> {
        let out_dir = out
            .or_else(|| cfg.output_dir())
            .unwrap_or_else(|| PathBuf::from("out"));
        let workers = match workers.or(cfg.run.workers) {
            Some(0) => {
                return Err(CliError::Config {
                    field: "workers".into(),
                    message: "must be at least 1".into(),
                })
            }
            Some(w) => w,
            None => std::thread::available_parallelism().map_or(1, usize::from),
        };
        let seeds = match seed {
            Some(s) => vec![s],
            None => cfg.run.seeds.clone(),
        };
        Ok(Self {
            out_dir,
            workers,
            seeds,
        })
    }

    fn pool(&self) -> Result<rayon::ThreadPool, CliError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| CliError::io(&self.out_dir, std::io::Error::other(e)))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelEcho {
    pub channel: String,
    pub users: usize,
    pub snr: f64,
    pub symbols_per_slot: f64,
    pub theta: Vec<f64>,
    pub packet_bits: f64,
    pub arrival_bits: f64,
}

impl ModelEcho {
    fn of(cfg: &ExperimentConfig, s: &Scenario) -> Self {
        let channel = match &cfg.channel {
            crate::config::ChannelSection::Rayleigh => "rayleigh".to_string(),
            crate::config::ChannelSection::Uniform { h_max } => format!("uniform({h_max:?})"),
            crate::config::ChannelSection::Table { path } => format!("table:{}", path.display()),
        };
        Self {
            channel,
            users: s.system.users(),
            snr: s.system.snr(),
            symbols_per_slot: s.system.symbols_per_slot(),
            theta: s.traffic.theta().to_vec(),
            packet_bits: s.traffic.packet_bits(),
            arrival_bits: s.traffic.mean_arrival_bits(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StationarySummary {
    /// `closed_form`, `roots` or `truncated`.
    pub solver: &'static str,
    pub truncation: usize,
    pub tail_bound: f64,
    pub mean_packets: f64,
    pub chain_delay_slots: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub model: ModelEcho,
    pub solution: MeanFieldSolution,
    /// `None` when unstable or when the law needs too many states.
    pub stationary: Option<StationarySummary>,
}

/// Mean-field solution and stationary law for one scenario.
pub struct Analysis {
    pub scenario: Scenario,
    pub solution: MeanFieldSolution,
    pub stationary: Option<(StationaryDistribution, &'static str)>,
}

impl Analysis {
    pub fn run(cfg: &ExperimentConfig, power: Option<f64>, theta1: Option<f64>) -> Result<Self, CliError> {
        let scenario = cfg.scenario(power, theta1)?;
        let tol = default_tolerance(&scenario.traffic, &scenario.system);
        let solution = solve_threshold(&scenario.channel, &scenario.traffic, &scenario.system, tol)?;
        let stationary = stationary(&scenario.traffic, &solution)?;
        Ok(Self {
            scenario,
            solution,
            stationary,
        })
    }

    pub fn report(&self, cfg: &ExperimentConfig) -> Result<AnalysisReport, CliError> {
        let stationary = self.stationary.as_ref().map(|(d, solver)| StationarySummary {
            solver,
            truncation: d.truncation(),
            tail_bound: d.tail_bound(),
            mean_packets: d.mean(),
            chain_delay_slots: chain_mean_delay(d, &self.scenario.traffic).ok(),
        });
        Ok(AnalysisReport {
            model: ModelEcho::of(cfg, &self.scenario),
            solution: self.solution,
            stationary,
        })
    }

    /// Policy to simulate; the threshold rule defaults to the mean-field `h_th`.
    pub fn policy(&self, cfg: &ExperimentConfig) -> Policy {
        cfg.policy(self.solution.threshold)
    }
}

/// Closed form for one arrival per slot, otherwise characteristic roots with
/// the truncated solve as fallback.
fn stationary(
    traffic: &TrafficModel,
    solution: &MeanFieldSolution,
) -> Result<Option<(StationaryDistribution, &'static str)>, CliError> {
    let p = solution.service_prob;
    if solution.status == Status::Unstable || p.is_nan() || p <= 0.0 {
        return Ok(None);
    }
    let params = ChainParams::from_traffic(traffic, p)?;
    let k = params.default_truncation();
    if k > MAX_STATIONARY_STATES {
        return Ok(None);
    }
    if params.max_arrivals() == 1 {
        return Ok(Some((steady_state_closed_form_a1(params.theta()[1], p)?, "closed_form")));
    }
    match steady_state_roots(&params, k) {
        Ok(d) => Ok(Some((d, "roots"))),
        Err(_) => Ok(Some((steady_state_truncated(&params, k, 1e-12)?, "truncated"))),
    }
}

fn stationary_rows(d: &StationaryDistribution) -> impl Iterator<Item = Vec<String>> + '_ {
    d.probs()
        .iter()
        .enumerate()
        .map(|(i, p)| vec![i.to_string(), num(Some(*p))])
}

pub fn analyze(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(&opts.out_dir)?;
    let a = Analysis::run(cfg, None, None)?;
    let mut written = vec![write_json(&opts.out_dir, "analysis.json", &a.report(cfg)?)?];
    if let Some((d, _)) = &a.stationary {
        written.push(write_csv(
            &opts.out_dir,
            "stationary.csv",
            &["state", "probability"],
            stationary_rows(d),
        )?);
    }
    Ok(written)
}

fn sim_config(cfg: &ExperimentConfig, seed: u64, trace: bool) -> SimConfig {
    SimConfig {
        horizon: cfg.run.horizon,
        warmup: cfg.run.warmup(),
        seed,
        record_trace: trace,
    }
}

/// Runs `(scenario, seed)` jobs on the worker pool; results keep job order.
fn run_jobs(
    opts: &RunOptions,
    jobs: &[(&Scenario, Policy, SimConfig)],
) -> Result<Vec<SimSummary>, CliError> {
    let pool = opts.pool()?;
    let out: Vec<_> = pool.install(|| {
        jobs.par_iter()
            .map(|(s, policy, c)| simulate(s, *policy, c))
            .collect()
    });
    out.into_iter().map(|r| r.map_err(CliError::from)).collect()
}

fn write_seed_outputs(dir: &Path, runs: &[SimSummary]) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    for r in runs {
        let mut bare = r.clone();
        let trace = bare.trace.take();
        written.push(write_json(dir, &format!("summary_seed{}.json", r.seed), &bare)?);
        if let Some(rows) = trace {
            written.push(write_csv(
                dir,
                &format!("trace_seed{}.csv", r.seed),
                &["t", "total_queue_bits", "served_bits", "served_count"],
                rows.iter().map(|row| {
                    vec![
                        row.t.to_string(),
                        num(Some(row.total_queue_bits)),
                        num(Some(row.served_bits)),
                        row.served_count.to_string(),
                    ]
                }),
            )?);
        }
    }
    Ok(written)
}

fn simulate_seeds(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
    a: &Analysis,
) -> Result<(Vec<SimSummary>, SimSummary), CliError> {
    let policy = a.policy(cfg);
    let jobs: Vec<_> = opts
        .seeds
        .iter()
        .map(|&seed| (&a.scenario, policy, sim_config(cfg, seed, cfg.run.trace)))
        .collect();
    let runs = run_jobs(opts, &jobs)?;
    let pooled = pool(&runs)?;
    Ok((runs, pooled))
}

pub fn simulate_cmd(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(&opts.out_dir)?;
    let a = Analysis::run(cfg, None, None)?;
    let (runs, pooled) = simulate_seeds(cfg, opts, &a)?;
    let mut written = write_seed_outputs(&opts.out_dir, &runs)?;
    written.push(write_json(&opts.out_dir, "summary_pooled.json", &pooled)?);
    Ok(written)
}

#[derive(Debug, Clone, Serialize)]
pub struct DelayComparison {
    /// `1/p - 1`; `None` when unstable.
    pub theory: Option<f64>,
    /// Pooled Little delay.
    pub simulation: f64,
    pub relative_error: Option<f64>,
    pub packet_delay_slots: f64,
    pub per_seed: ReplicationStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct ServiceComparison {
    pub theory: f64,
    pub empirical: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub theory: AnalysisReport,
    pub simulation: SimSummary,
    pub delay: DelayComparison,
    pub service_prob: ServiceComparison,
    pub distribution: Option<DistributionComparison>,
}

fn compare_point(
    cfg: &ExperimentConfig,
    a: &Analysis,
    runs: &[SimSummary],
) -> Result<CompareReport, CliError> {
    let pooled = pool(runs)?;
    let theory = a.solution.delay_slots;
    let per_seed: Vec<f64> = runs.iter().map(|r| r.mean_delay_slots).collect();
    let distribution = match &a.stationary {
        Some((d, _)) => Some(compare_distributions(&pooled.histogram_pmf(), d)?),
        None => None,
    };
    Ok(CompareReport {
        theory: a.report(cfg)?,
        delay: DelayComparison {
            theory,
            simulation: pooled.mean_delay_slots,
            relative_error: theory.map(|d| relative_error(pooled.mean_delay_slots, d)),
            packet_delay_slots: pooled.packet_delay_slots,
            per_seed: replication_stats(&per_seed)?,
        },
        service_prob: ServiceComparison {
            theory: a.solution.service_prob,
            empirical: pooled.service_fraction,
            abs_error: (pooled.service_fraction - a.solution.service_prob).abs(),
        },
        distribution,
        simulation: pooled,
    })
}

pub fn compare(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(&opts.out_dir)?;
    let a = Analysis::run(cfg, None, None)?;
    let (runs, _) = simulate_seeds(cfg, opts, &a)?;
    let report = compare_point(cfg, &a, &runs)?;
    let mut written = vec![write_json(&opts.out_dir, "compare.json", &report)?];
    let empirical = report.simulation.histogram_pmf();
    let theory: &[f64] = a.stationary.as_ref().map_or(&[], |(d, _)| d.probs());
    let states = empirical.len().max(theory.len());
    written.push(write_csv(
        &opts.out_dir,
        "histogram.csv",
        &["state", "empirical", "theory"],
        (0..states).map(|k| {
            vec![
                k.to_string(),
                num(Some(empirical.get(k).copied().unwrap_or(0.0))),
                num(theory.get(k).copied().or(a.stationary.as_ref().map(|_| 0.0))),
            ]
        }),
    )?);
    Ok(written)
}

/// Header of `sweep.csv`.
pub const SWEEP_HEADER: [&str; 10] = [
    "axis_value",
    "theta1",
    "D_theory",
    "D_sim",
    "p",
    "h_th",
    "tv_distance",
    "status",
    "deficit",
    "diverged",
];

#[derive(Debug, Clone, Copy)]
struct SweepPoint {
    axis_value: f64,
    power: Option<f64>,
    theta1: Option<f64>,
}

fn sweep_points(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>, CliError> {
    let sw = cfg.sweep.as_ref().ok_or_else(|| CliError::Config {
        field: "sweep".into(),
        message: "the sweep command needs a [sweep] table".into(),
    })?;
    Ok(match sw.axis {
        SweepAxis::Power => {
            let rates: Vec<Option<f64>> = match &sw.theta1 {
                Some(list) => list.iter().map(|&t| Some(t)).collect(),
                None => vec![None],
            };
            rates
                .iter()
                .flat_map(|&theta1| {
                    sw.values.iter().map(move |&v| SweepPoint {
                        axis_value: v,
                        power: Some(v),
                        theta1,
                    })
                })
                .collect()
        }
        SweepAxis::Theta1 => sw
            .values
            .iter()
            .map(|&v| SweepPoint {
                axis_value: v,
                power: None,
                theta1: Some(v),
            })
            .collect(),
    })
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::OverProvisioned => "over_provisioned",
        Status::Balanced => "balanced",
        Status::Unstable => "unstable",
    }
}

pub fn sweep(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<PathBuf>, CliError> {
    let points = sweep_points(cfg)?;
    ensure_dir(&opts.out_dir)?;
    let analyses = points
        .iter()
        .map(|p| Analysis::run(cfg, p.power, p.theta1))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<_> = analyses
        .iter()
        .flat_map(|a| {
            let policy = a.policy(cfg);
            opts.seeds
                .iter()
                .map(move |&seed| (&a.scenario, policy, sim_config(cfg, seed, false)))
        })
        .collect();
    let runs = run_jobs(opts, &jobs)?;
    let per_point = opts.seeds.len();
    let mut rows = Vec::with_capacity(points.len());
    for ((pt, a), chunk) in points.iter().zip(&analyses).zip(runs.chunks(per_point)) {
        let r = compare_point(cfg, a, chunk)?;
        let theta = a.scenario.traffic.theta();
        let theta1 = if theta.len() == 2 { Some(theta[1]) } else { None };
        rows.push(vec![
            num(Some(pt.axis_value)),
            num(theta1),
            num(r.delay.theory),
            num(Some(r.delay.simulation)),
            num(Some(a.solution.service_prob)),
            num(Some(a.solution.threshold)),
            num(r.distribution.as_ref().map(|d| d.tv_distance)),
            status_name(a.solution.status).to_string(),
            num(a.solution.deficit_bits),
            r.simulation.diverged.to_string(),
        ]);
    }
    Ok(vec![write_csv(&opts.out_dir, "sweep.csv", &SWEEP_HEADER, rows)?])
}

