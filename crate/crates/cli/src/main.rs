use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dprl::experiment::{self, Cell, TraceBundle};
use dprl::{ExperimentConfig, PolicyParams};

/// Train and compare REINFORCE and prior-regularised agents on scalar-signal tasks.
#[derive(Parser, Debug)]
#[command(name = "dprl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train every selected cell and write checkpoints and learning curves.
    Train(Common),
    /// Evaluate saved checkpoints and write trace bundles.
    Eval(Common),
    /// Train, evaluate and write the comparison table and summary.
    Compare(Common),
    /// Short single-seed comparison plus one filtered signal per environment.
    Demo(Common),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// TOML config with dotted keys; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// drift, hover, window, a comma list, or all.
    #[arg(long)]
    env: Option<String>,
    /// reinforce, dprl, or both.
    #[arg(long)]
    agent: Option<String>,
    #[arg(long, alias = "seed", value_name = "SEEDS")]
    seeds: Option<String>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    rollouts: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any config key, e.g. `--set env.sustain_lag=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl Common {
    fn overrides(&self) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                out.push((key.to_string(), v));
            }
        };
        push("experiment.envs", self.env.clone());
        push("experiment.agents", self.agent.clone());
        push("experiment.seeds", self.seeds.clone());
        push("train.episodes", self.episodes.map(|v| v.to_string()));
        push("train.lambda", self.lambda.map(|v| format!("{v:?}")));
        push("train.gamma", self.gamma.map(|v| format!("{v:?}")));
        push("experiment.rollouts", self.rollouts.map(|v| v.to_string()));
        for item in &self.sets {
            let Some((k, v)) = item.split_once('=') else {
                bail!("--set expects KEY=VALUE, got `{item}`");
            };
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }

    fn resolve(&self, base: ExperimentConfig) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load_onto(base, self.config.as_deref(), &self.overrides()?)?;
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        Ok(cfg)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn train(cfg: &ExperimentConfig) -> Result<bool> {
    create_dir(&cfg.out_dir)?;
    let mut ok = true;
    for cell in experiment::cells(cfg) {
        match experiment::train_cell(cfg, cell) {
            Ok(outcome) => {
                outcome.params.save(&experiment::checkpoint_path(&cfg.out_dir, cell))?;
                experiment::write_curve(&experiment::curve_path(&cfg.out_dir, cell), &outcome.curve)?;
                let tail = &outcome.curve[outcome.curve.len().saturating_sub(50)..];
                let reward = tail.iter().map(|p| p.total_reward).sum::<f64>() / tail.len().max(1) as f64;
                println!(
                    "{} {} seed {}: mean reward over last {} episodes {reward:.4}",
                    cell.env,
                    cell.agent,
                    cell.seed,
                    tail.len()
                );
            }
            Err(e) => {
                ok = false;
                eprintln!("{} {} seed {}: failed: {e}", cell.env, cell.agent, cell.seed);
            }
        }
    }
    Ok(ok)
}

fn eval(cfg: &ExperimentConfig) -> Result<bool> {
    println!("env,agent,seed,mean_jerk,mean_oscillations,timing_variance,n_committed");
    for &env in &cfg.envs {
        for &agent in &cfg.agents {
            let mut per_seed = Vec::new();
            for &seed in &cfg.seeds {
                let path = experiment::checkpoint_path(&cfg.out_dir, Cell { env, agent, seed });
                let policy = PolicyParams::load(&path)?;
                let (traces, m) = experiment::evaluate(cfg, &policy, env, seed)?;
                println!(
                    "{env},{agent},{seed},{},{},{},{}",
                    m.mean_jerk, m.mean_oscillations, m.timing_variance, m.n_committed
                );
                per_seed.push((seed, traces));
            }
            let bundle = TraceBundle::build(env, agent, &per_seed, cfg.threshold)?;
            let path = experiment::traces_path(&cfg.out_dir, env, agent);
            fs::write(&path, serde_json::to_string(&bundle)?).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(true)
}

fn compare(cfg: &ExperimentConfig) -> Result<bool> {
    let report = experiment::run_experiment(cfg)?;
    print!("{}", experiment::table_csv(&report));
    for f in report.failures() {
        eprintln!("{} {} seed {}: {:?}", f.cell.env, f.cell.agent, f.cell.seed, f.status);
    }
    for c in &report.checks {
        let mark = if c.passed { "pass" } else { "fail" };
        println!(
            "{}: {}/{} seeds (need {}) {mark}",
            c.env,
            c.votes,
            c.seeds.len(),
            c.required
        );
    }
    println!("wrote {}", cfg.out_dir.display());
    let clean = report.failures().next().is_none();
    Ok(clean)
}

fn demo_base() -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        seeds: vec![0],
        rollouts: 20,
        out_dir: PathBuf::from("demo_out"),
        ..ExperimentConfig::default()
    };
    cfg.train.episodes = 300;
    cfg
}

fn demo(cfg: &ExperimentConfig) -> Result<bool> {
    create_dir(&cfg.out_dir)?;
    for &env in &cfg.envs {
        let ex = experiment::export_episode(env, &cfg.env, &cfg.esd, cfg.seeds[0])?;
        let path = cfg.out_dir.join(format!("episode_{env}.json"));
        fs::write(&path, serde_json::to_string_pretty(&ex)?).with_context(|| format!("writing {}", path.display()))?;
    }
    compare(cfg)
}

fn run() -> Result<bool> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Train(c) => train(&c.resolve(ExperimentConfig::default())?),
        Command::Eval(c) => eval(&c.resolve(ExperimentConfig::default())?),
        Command::Compare(c) => compare(&c.resolve(ExperimentConfig::default())?),
        Command::Demo(c) => demo(&c.resolve(demo_base())?),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
