//! Full comparison runs over (environment, agent, seed) cells.
//!
//! Cells are independent and run on the rayon pool. Each cell writes only its
//! own checkpoint and learning curve; the per-agent trace bundles, the metric
//! tables and `summary.json` are assembled afterwards by a single writer, in
//! the fixed cell order, so output bytes never depend on scheduling.
//!
//! Files written to the output directory:
//!
//! | file | content |
//! |---|---|
//! | `checkpoint_<env>_<agent>_<seed>.json` | final policy parameters |
//! | `curve_<env>_<agent>_<seed>.csv` | `episode,total_reward,rl_loss,esd_loss` |
//! | `traces_<env>_<agent>.json` | evaluation traces with mean and std curves |
//! | `metrics.csv` | one row per cell |
//! | `table.csv` | seed-averaged comparison, one row per environment |
//! | `summary.json` | config, per-cell results, averages, directional checks |

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::env::{self, EnvConfig, EnvKind, Landmarks};
use crate::error::{Error, Result};
use crate::esd::{self, EsdParams};
use crate::metrics::{self, MetricSummary, RolloutTrace};
use crate::policy::PolicyParams;
use crate::scalar::ls_slope;
use crate::streams::{stream_rng, Stream};
use crate::trainer::{AgentKind, CurvePoint, TrainOutcome, Trainer};

/// Jerk below which a REINFORCE hover profile counts as flat.
pub const FLAT_JERK: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub env: EnvKind,
    pub agent: AgentKind,
    pub seed: u64,
}

impl Cell {
    fn stem(&self) -> String {
        format!("{}_{}_{}", self.env, self.agent, self.seed)
    }
}

pub fn checkpoint_path(dir: &Path, cell: Cell) -> PathBuf {
    dir.join(format!("checkpoint_{}.json", cell.stem()))
}

pub fn curve_path(dir: &Path, cell: Cell) -> PathBuf {
    dir.join(format!("curve_{}.csv", cell.stem()))
}

pub fn traces_path(dir: &Path, env: EnvKind, agent: AgentKind) -> PathBuf {
    dir.join(format!("traces_{env}_{agent}.json"))
}

/// Scalar metrics of one evaluated cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub mean_jerk: f64,
    pub mean_oscillations: f64,
    pub timing_variance: f64,
    pub timing_std: f64,
    pub n_rollouts: usize,
    pub n_committed: usize,
    pub non_committal: bool,
    /// Least-squares slope of the mean probability curve per step.
    pub curve_slope: f64,
}

impl From<&MetricSummary<f64>> for CellMetrics {
    fn from(m: &MetricSummary<f64>) -> Self {
        Self {
            mean_jerk: m.mean_jerk,
            mean_oscillations: m.mean_oscillations,
            timing_variance: m.timing_variance,
            timing_std: m.timing_std,
            n_rollouts: m.n_rollouts,
            n_committed: m.n_committed,
            non_committal: m.non_committal,
            curve_slope: ls_slope(&m.mean_curve),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellStatus {
    Ok { metrics: CellMetrics },
    Failed { error: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    #[serde(flatten)]
    pub cell: Cell,
    #[serde(flatten)]
    pub status: CellStatus,
}

impl CellReport {
    pub fn metrics(&self) -> Option<&CellMetrics> {
        match &self.status {
            CellStatus::Ok { metrics } => Some(metrics),
            CellStatus::Failed { .. } => None,
        }
    }
}

/// Seed average of one (environment, agent) pair over its successful cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentAverage {
    pub env: EnvKind,
    pub agent: AgentKind,
    pub n_seeds: usize,
    pub mean_jerk: Option<f64>,
    pub mean_oscillations: Option<f64>,
    pub timing_variance: Option<f64>,
    pub n_committed: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedVote {
    pub seed: u64,
    pub pass: bool,
}

/// Per-seed vote on the expected ordering between the two agents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionalCheck {
    pub env: EnvKind,
    pub rule: String,
    pub votes: usize,
    pub required: usize,
    pub seeds: Vec<SeedVote>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub cells: Vec<CellReport>,
    pub averages: Vec<AgentAverage>,
    pub checks: Vec<DirectionalCheck>,
}

impl ExperimentReport {
    pub fn cell(&self, env: EnvKind, agent: AgentKind, seed: u64) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.cell == Cell { env, agent, seed })
    }

    pub fn check(&self, env: EnvKind) -> Option<&DirectionalCheck> {
        self.checks.iter().find(|c| c.env == env)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CellReport> {
        self.cells.iter().filter(|c| c.metrics().is_none())
    }
}

/// Trains one cell from its seed.
pub fn train_cell(cfg: &ExperimentConfig, cell: Cell) -> Result<TrainOutcome<f64>> {
    let mut train = cfg.train.clone();
    train.seed = cell.seed;
    Trainer::new(cell.env, cell.agent, cfg.env.clone(), train, cfg.esd)?.train()
}

/// Replays `cfg.rollouts` evaluation signals of `seed` through a frozen policy.
pub fn evaluate(
    cfg: &ExperimentConfig,
    policy: &PolicyParams<f64>,
    env: EnvKind,
    seed: u64,
) -> Result<(Vec<RolloutTrace<f64>>, MetricSummary<f64>)> {
    let mut rng = stream_rng(seed, Stream::Evaluation);
    let traces = metrics::collect_rollouts(policy, env, &cfg.env, cfg.rollouts, &mut rng)?;
    let summary = metrics::aggregate(&traces, cfg.threshold)?;
    Ok((traces, summary))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn opt_num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("episode,total_reward,rl_loss,esd_loss\n");
    for p in curve {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.episode,
            p.total_reward,
            p.rl_loss,
            opt_num(p.esd_loss)
        );
    }
    out
}

pub fn write_curve(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    write(path, &curve_csv(curve))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedTrace {
    pub seed: u64,
    pub landmarks: Landmarks,
    pub p: Vec<f64>,
}

/// Plot-ready evaluation traces of one agent on one environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceBundle {
    pub env: EnvKind,
    pub agent: AgentKind,
    pub seeds: Vec<u64>,
    pub mean_curve: Vec<f64>,
    pub std_curve: Vec<f64>,
    pub traces: Vec<SeedTrace>,
}

impl TraceBundle {
    /// Pools the traces of every listed seed.
    pub fn build(
        env: EnvKind,
        agent: AgentKind,
        per_seed: &[(u64, Vec<RolloutTrace<f64>>)],
        threshold: f64,
    ) -> Result<Self> {
        let pooled: Vec<RolloutTrace<f64>> = per_seed.iter().flat_map(|(_, t)| t.iter().cloned()).collect();
        let (mean_curve, std_curve) = if pooled.is_empty() {
            (Vec::new(), Vec::new())
        } else {
            let m = metrics::aggregate(&pooled, threshold)?;
            (m.mean_curve, m.std_curve)
        };
        Ok(Self {
            env,
            agent,
            seeds: per_seed.iter().map(|(s, _)| *s).collect(),
            mean_curve,
            std_curve,
            traces: per_seed
                .iter()
                .flat_map(|(seed, traces)| {
                    traces.iter().map(|t| SeedTrace {
                        seed: *seed,
                        landmarks: t.landmarks,
                        p: t.p.clone(),
                    })
                })
                .collect(),
        })
    }
}

/// One training episode signal alongside its filter trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeExport {
    pub env: EnvKind,
    pub seed: u64,
    pub landmarks: Landmarks,
    pub s: Vec<f64>,
    pub z: Vec<f64>,
}

/// The first training signal of `seed` and its filtered version.
pub fn export_episode(
    env_kind: EnvKind,
    cfg: &EnvConfig,
    esd_params: &EsdParams<f64>,
    seed: u64,
) -> Result<EpisodeExport> {
    let mut rng = stream_rng(seed, Stream::TrainSignals);
    let signal = env::generate::<f64, _>(env_kind, cfg, &mut rng);
    let z = esd::trajectory(&signal.s, esd_params)?;
    Ok(EpisodeExport {
        env: env_kind,
        seed,
        landmarks: signal.landmarks,
        s: signal.s,
        z,
    })
}

fn rule_text(env: EnvKind) -> &'static str {
    match env {
        EnvKind::Drift => "dprl.oscillations < reinforce.oscillations && dprl.timing_variance < reinforce.timing_variance",
        EnvKind::Hover => "(reinforce.n_committed == 0 || reinforce.jerk < 0.02) && dprl.jerk > reinforce.jerk && dprl.oscillations > 0",
        EnvKind::Window => "dprl.jerk > reinforce.jerk && dprl.n_committed > reinforce.n_committed && dprl.curve_slope > 0",
    }
}

/// Whether one seed shows the expected ordering on `env`.
pub fn seed_vote(env: EnvKind, reinforce: &CellMetrics, dprl: &CellMetrics) -> bool {
    match env {
        EnvKind::Drift => {
            dprl.mean_oscillations < reinforce.mean_oscillations && dprl.timing_variance < reinforce.timing_variance
        }
        EnvKind::Hover => {
            let flat = reinforce.n_committed == 0 || reinforce.mean_jerk < FLAT_JERK;
            flat && dprl.mean_jerk > reinforce.mean_jerk && dprl.mean_oscillations > 0.0
        }
        EnvKind::Window => {
            dprl.mean_jerk > reinforce.mean_jerk && dprl.n_committed > reinforce.n_committed && dprl.curve_slope > 0.0
        }
    }
}

/// Votes needed out of `n` seeds: 80%, rounded up.
pub fn required_votes(n: usize) -> usize {
    (4 * n).div_ceil(5)
}

fn directional_checks(cfg: &ExperimentConfig, cells: &[CellReport]) -> Vec<DirectionalCheck> {
    if !(cfg.agents.contains(&AgentKind::Reinforce) && cfg.agents.contains(&AgentKind::DpRl)) {
        return Vec::new();
    }
    let find = |env, agent, seed| {
        cells
            .iter()
            .find(|c| c.cell == Cell { env, agent, seed })
            .and_then(CellReport::metrics)
    };
    cfg.envs
        .iter()
        .map(|&env| {
            let seeds: Vec<SeedVote> = cfg
                .seeds
                .iter()
                .map(|&seed| SeedVote {
                    seed,
                    // a failed cell is a vote against
                    pass: match (find(env, AgentKind::Reinforce, seed), find(env, AgentKind::DpRl, seed)) {
                        (Some(r), Some(d)) => seed_vote(env, r, d),
                        _ => false,
                    },
                })
                .collect();
            let votes = seeds.iter().filter(|v| v.pass).count();
            let required = required_votes(seeds.len());
            DirectionalCheck {
                env,
                rule: rule_text(env).to_string(),
                votes,
                required,
                seeds,
                passed: votes >= required,
            }
        })
        .collect()
}

fn mean_of(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn averages(cfg: &ExperimentConfig, cells: &[CellReport]) -> Vec<AgentAverage> {
    let mut out = Vec::new();
    for &env in &cfg.envs {
        for &agent in &cfg.agents {
            let ms: Vec<&CellMetrics> = cells
                .iter()
                .filter(|c| c.cell.env == env && c.cell.agent == agent)
                .filter_map(CellReport::metrics)
                .collect();
            let avg = |f: fn(&CellMetrics) -> f64| mean_of(&ms.iter().map(|m| f(m)).collect::<Vec<_>>());
            out.push(AgentAverage {
                env,
                agent,
                n_seeds: ms.len(),
                mean_jerk: avg(|m| m.mean_jerk),
                mean_oscillations: avg(|m| m.mean_oscillations),
                timing_variance: avg(|m| m.timing_variance),
                n_committed: avg(|m| m.n_committed as f64),
            });
        }
    }
    out
}

/// Comparison table: one row per environment, REINFORCE then DP-RL for each
/// metric. Missing agents leave empty fields.
pub fn table_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(
        "env,reinforce_jerk,dprl_jerk,reinforce_oscillations,dprl_oscillations,\
         reinforce_timing_variance,dprl_timing_variance\n",
    );
    let fmt = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
    for &env in &report.config.envs {
        let get = |agent| report.averages.iter().find(|a| a.env == env && a.agent == agent);
        let r = get(AgentKind::Reinforce);
        let d = get(AgentKind::DpRl);
        let _ = writeln!(
            out,
            "{env},{},{},{},{},{},{}",
            fmt(r.and_then(|a| a.mean_jerk)),
            fmt(d.and_then(|a| a.mean_jerk)),
            fmt(r.and_then(|a| a.mean_oscillations)),
            fmt(d.and_then(|a| a.mean_oscillations)),
            fmt(r.and_then(|a| a.timing_variance)),
            fmt(d.and_then(|a| a.timing_variance)),
        );
    }
    out
}

/// Per-cell rows; failed cells keep their identity and status.
pub fn metrics_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(
        "env,agent,seed,status,mean_jerk,mean_oscillations,timing_variance,timing_std,\
         n_committed,non_committal,curve_slope\n",
    );
    for c in &report.cells {
        let Cell { env, agent, seed } = c.cell;
        match &c.status {
            CellStatus::Ok { metrics: m } => {
                let _ = writeln!(
                    out,
                    "{env},{agent},{seed},ok,{},{},{},{},{},{},{}",
                    m.mean_jerk,
                    m.mean_oscillations,
                    m.timing_variance,
                    m.timing_std,
                    m.n_committed,
                    m.non_committal,
                    m.curve_slope
                );
            }
            CellStatus::Failed { .. } => {
                let _ = writeln!(out, "{env},{agent},{seed},failed,,,,,,,");
            }
        }
    }
    out
}

struct CellRun {
    cell: Cell,
    result: Result<(Vec<RolloutTrace<f64>>, CellMetrics)>,
}

fn run_cell(cfg: &ExperimentConfig, cell: Cell) -> CellRun {
    let attempt = || -> Result<(Vec<RolloutTrace<f64>>, CellMetrics)> {
        let outcome = train_cell(cfg, cell)?;
        outcome.params.save(&checkpoint_path(&cfg.out_dir, cell))?;
        write_curve(&curve_path(&cfg.out_dir, cell), &outcome.curve)?;
        let (traces, summary) = evaluate(cfg, &outcome.params, cell.env, cell.seed)?;
        Ok((traces, CellMetrics::from(&summary)))
    };
    CellRun {
        cell,
        result: attempt(),
    }
}

/// Cells in output order: environment, then agent, then seed.
pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &env in &cfg.envs {
        for &agent in &cfg.agents {
            for &seed in &cfg.seeds {
                out.push(Cell { env, agent, seed });
            }
        }
    }
    out
}

/// Trains, evaluates and reports every cell, writing all artifacts to
/// `cfg.out_dir`. Failed cells are recorded and the rest still run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let runs: Vec<CellRun> = cells(cfg).into_par_iter().map(|cell| run_cell(cfg, cell)).collect();

    let cell_reports: Vec<CellReport> = runs
        .iter()
        .map(|r| CellReport {
            cell: r.cell,
            status: match &r.result {
                Ok((_, m)) => CellStatus::Ok { metrics: m.clone() },
                Err(e) => CellStatus::Failed { error: e.to_string() },
            },
        })
        .collect();

    for &env in &cfg.envs {
        for &agent in &cfg.agents {
            let per_seed: Vec<(u64, Vec<RolloutTrace<f64>>)> = runs
                .iter()
                .filter(|r| r.cell.env == env && r.cell.agent == agent)
                .filter_map(|r| r.result.as_ref().ok().map(|(t, _)| (r.cell.seed, t.clone())))
                .collect();
            let bundle = TraceBundle::build(env, agent, &per_seed, cfg.threshold)?;
            write(&traces_path(dir, env, agent), &serde_json::to_string(&bundle)?)?;
        }
    }

    let report = ExperimentReport {
        config: cfg.clone(),
        averages: averages(cfg, &cell_reports),
        checks: directional_checks(cfg, &cell_reports),
        cells: cell_reports,
    };
    write(&dir.join("metrics.csv"), &metrics_csv(&report))?;
    write(&dir.join("table.csv"), &table_csv(&report))?;
    write(
        &dir.join("summary.json"),
        &(serde_json::to_string_pretty(&report)? + "\n"),
    )?;
    Ok(report)
}
