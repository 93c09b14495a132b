//! Acceptance gate: one line per criterion, non-zero exit if any fails.
//!
//! The three directional criteria share a single full default experiment; a
//! second identical run checks end-to-end determinism. The remaining
//! criteria are oracle comparisons on seeded random instances.

mod common;

use std::fs;
use std::process::ExitCode;

use common::*;
use dprl::env::{self, EnvConfig};
use dprl::esd::{self, EsdParams, EsdState};
use dprl::experiment::{self, ExperimentReport};
use dprl::metrics::{decision_time, jerk, oscillation_count};
use dprl::optim::Adam;
use dprl::policy::{Activation, PolicyParams};
use dprl::streams::{stream_rng, Stream};
use dprl::trainer::{compute_returns, AgentKind, TrainConfig, Trainer};
use dprl::{EnvKind, ExperimentConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRADIENT_INSTANCES: usize = 200;
const GRADIENT_TOL: f64 = 1e-4;
const RETURN_TOL: f64 = 1e-12;
const FIXED_POINT_TOL: f64 = 1e-15;
const HAND_VALUE_TOL: f64 = 1e-12;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn directional(report: &ExperimentReport, env: EnvKind) -> Outcome {
    let Some(check) = report.check(env) else {
        return outcome(false, "no check recorded");
    };
    let mut detail = format!("{}/{} seeds (need {})", check.votes, check.seeds.len(), check.required);
    for vote in &check.seeds {
        let get = |agent| report.cell(env, agent, vote.seed).and_then(|c| c.metrics());
        if let (Some(r), Some(d)) = (get(AgentKind::Reinforce), get(AgentKind::DpRl)) {
            detail.push_str(&format!(
                "\n      seed {}: {} | jerk {:.4}/{:.4} osc {:.2}/{:.2} tv {:.2}/{:.2} committed {}/{} slope {:.5}",
                vote.seed,
                if vote.pass { "yes" } else { "no " },
                r.mean_jerk,
                d.mean_jerk,
                r.mean_oscillations,
                d.mean_oscillations,
                r.timing_variance,
                d.timing_variance,
                r.n_committed,
                d.n_committed,
                d.curve_slope,
            ));
        } else {
            detail.push_str(&format!("\n      seed {}: cell failed", vote.seed));
        }
    }
    outcome(check.passed, detail)
}

fn filter_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(401);
    let random_params = |rng: &mut ChaCha8Rng| EsdParams {
        alpha_up: rng.random_range(0.01..=1.0),
        alpha_down: rng.random_range(0.01..=1.0),
        beta: rng.random_range(0.0..=1.0),
        clamp_output: true,
    };

    let mut worst_rest = 0.0f64;
    for _ in 0..1000 {
        let s: f64 = rng.random();
        let p = EsdParams {
            clamp_output: rng.random(),
            ..random_params(&mut rng)
        };
        let next = EsdState { z: s, v: 0.0 }.advance(s, &p);
        worst_rest = worst_rest.max((next.z - s).abs()).max(next.v.abs());
    }

    let p = EsdParams::<f64>::default();
    let z1 = EsdState { z: 0.0, v: 0.0 }.advance(1.0, &p);
    let z2 = z1.advance(1.0, &p);
    let hand_err = (z1.z - 0.15).abs().max((z2.z - 0.3675).abs());

    // equal gaps above and below: the moves differ by the rate ratio
    let mut worst_ratio = 0.0f64;
    for _ in 0..1000 {
        let p = random_params(&mut rng);
        let z: f64 = rng.random_range(0.2..0.8);
        let gap: f64 = rng.random_range(0.01..0.2);
        let up = EsdState { z, v: 0.0 }.advance(z + gap, &p).z - z;
        let down = z - EsdState { z, v: 0.0 }.advance(z - gap, &p).z;
        let ratio = down / up;
        worst_ratio = worst_ratio.max((ratio - p.alpha_down / p.alpha_up).abs() / (p.alpha_down / p.alpha_up));
    }

    let mut bounded = true;
    for _ in 0..1000 {
        let p = random_params(&mut rng);
        let len = rng.random_range(1..=200);
        let s: Vec<f64> = (0..len).map(|_| rng.random()).collect();
        bounded &= esd::trajectory(&s, &p).unwrap().iter().all(|z| (0.0..=1.0).contains(z));
    }

    let pass = worst_rest <= FIXED_POINT_TOL && hand_err < HAND_VALUE_TOL && worst_ratio < 1e-9 && bounded;
    outcome(
        pass,
        format!(
            "rest-state drift {worst_rest:.1e}, hand-value error {hand_err:.1e}, rate-ratio error {worst_ratio:.1e}, bounded {bounded}"
        ),
    )
}

fn gradient_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(501);
    let mut worst_rl = 0.0f64;
    let mut worst_prior = 0.0f64;
    let (mut n_rl, mut n_prior) = (0, 0);
    while n_rl < GRADIENT_INSTANCES || n_prior < GRADIENT_INSTANCES {
        let act = if rng.random::<bool>() {
            Activation::Relu
        } else {
            Activation::Tanh
        };
        let policy = random_policy(&mut rng, act);
        let len = rng.random_range(1..=40);
        let gamma = rng.random_range(0.5..=1.0);
        let lambda = rng.random_range(0.1..5.0);
        let prior_term = n_rl >= n_prior;
        let record = random_record(&mut rng, len, prior_term);
        if !kink_free(&policy, &record.signal.s) {
            continue;
        }
        let train = TrainConfig {
            gamma,
            lambda,
            ..TrainConfig::default()
        };
        let s = &record.signal.s;
        if prior_term {
            let tr = Trainer::new(
                EnvKind::Window,
                AgentKind::DpRl,
                EnvConfig::default(),
                train,
                EsdParams::default(),
            )
            .unwrap();
            let (g, _) = tr.episode_gradient(&policy, &record).unwrap();
            let z = record.targets.clone().unwrap();
            let fd = fd_gradient(&policy, |p| prior_loss_ref(p, s, &z, lambda));
            worst_prior = worst_prior.max(relative_error(&flatten(&g), &fd));
            n_prior += 1;
        } else {
            let tr = Trainer::new(
                EnvKind::Window,
                AgentKind::Reinforce,
                EnvConfig::default(),
                train,
                EsdParams::default(),
            )
            .unwrap();
            let (g, _) = tr.episode_gradient(&policy, &record).unwrap();
            let returns = returns_direct(&record.rewards, gamma);
            let fd = fd_gradient(&policy, |p| rl_loss_ref(p, s, &record.actions, &returns));
            worst_rl = worst_rl.max(relative_error(&flatten(&g), &fd));
            n_rl += 1;
        }
    }
    outcome(
        worst_rl < GRADIENT_TOL && worst_prior < GRADIENT_TOL,
        format!("likelihood term worst {worst_rl:.2e} over {n_rl}, prior term worst {worst_prior:.2e} over {n_prior}"),
    )
}

fn return_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(601);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let gamma = rng.random_range(0.0..=1.0);
        let rewards: Vec<f64> = (0..100).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = compute_returns(&rewards, gamma).unwrap();
        let slow = returns_direct(&rewards, gamma);
        for (a, b) in fast.iter().zip(&slow) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(
        worst <= RETURN_TOL,
        format!("worst |diff| {worst:.1e} over 1000 vectors"),
    )
}

fn zero_lambda_identity() -> Outcome {
    let mut identical = true;
    let mut compared = 0usize;
    for env_kind in EnvKind::ALL {
        for seed in 0..5u64 {
            let train = TrainConfig {
                lambda: 0.0,
                seed,
                ..TrainConfig::default()
            };
            let make = |agent| {
                Trainer::<f64>::new(
                    env_kind,
                    agent,
                    EnvConfig::default(),
                    train.clone(),
                    EsdParams::default(),
                )
                .unwrap()
            };
            let plain = make(AgentKind::Reinforce);
            let prior = make(AgentKind::DpRl);
            let mut init = stream_rng(seed, Stream::Init);
            let mut a = PolicyParams::init(train.hidden, train.activation, &mut init).unwrap();
            let mut b = a.clone();
            let mut opt_a = Adam::new(train.adam, train.hidden);
            let mut opt_b = Adam::new(train.adam, train.hidden);
            let mut env_rng = stream_rng(seed, Stream::TrainSignals);
            let mut act_a = stream_rng(seed, Stream::Actions);
            let mut act_b = stream_rng(seed, Stream::Actions);
            for _ in 0..train.episodes {
                let signal = env::generate::<f64, _>(env_kind, &plain.env, &mut env_rng);
                let ra = plain.run_episode(&a, signal.clone(), &mut act_a).unwrap();
                let rb = prior.run_episode(&b, signal, &mut act_b).unwrap();
                plain.episode_update(&mut a, &ra, &mut opt_a).unwrap();
                prior.episode_update(&mut b, &rb, &mut opt_b).unwrap();
                identical &= a.values().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits());
                compared += 1;
            }
        }
    }
    outcome(identical, format!("{compared} parameter snapshots compared bitwise"))
}

fn determinism(first: &std::path::Path, cfg: &ExperimentConfig) -> Outcome {
    let second = tempfile::tempdir().unwrap();
    let rerun = ExperimentConfig {
        out_dir: second.path().to_path_buf(),
        ..cfg.clone()
    };
    if let Err(e) = experiment::run_experiment(&rerun) {
        return outcome(false, format!("rerun failed: {e}"));
    }
    let same = |name: &str| fs::read(first.join(name)).unwrap() == fs::read(second.path().join(name)).unwrap();
    let table = same("table.csv");
    let summary = same("summary.json");
    outcome(
        table && summary,
        format!("table.csv identical {table}, summary.json identical {summary}"),
    )
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(901);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let p = random_trace(&mut rng);
        let threshold = if rng.random() { 0.6 } else { rng.random() };
        if jerk(&p).unwrap() != jerk_brute(&p)
            || oscillation_count(&p).unwrap() != oscillations_brute(&p)
            || decision_time(&p, threshold) != decision_time_brute(&p, threshold)
        {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches over 1000 traces"))
}

fn main() -> ExitCode {
    let out = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        out_dir: out.path().to_path_buf(),
        ..ExperimentConfig::default()
    };
    let report = experiment::run_experiment(&cfg);

    let mut results: Vec<(&str, Outcome)> = Vec::new();
    match &report {
        Ok(report) => {
            results.push(("drift directionality", directional(report, EnvKind::Drift)));
            results.push(("hover directionality", directional(report, EnvKind::Hover)));
            results.push(("window directionality", directional(report, EnvKind::Window)));
        }
        Err(e) => {
            for name in ["drift directionality", "hover directionality", "window directionality"] {
                results.push((name, outcome(false, format!("experiment failed: {e}"))));
            }
        }
    }
    results.push(("filter unit suite", filter_suite()));
    results.push(("gradient oracle", gradient_oracle()));
    results.push(("return oracle", return_oracle()));
    results.push(("zero prior weight equals REINFORCE", zero_lambda_identity()));
    results.push(("end-to-end determinism", determinism(out.path(), &cfg)));
    results.push(("metric oracles", metric_oracles()));

    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {}. {name}: {}", i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
