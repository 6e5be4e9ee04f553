//! `rdpg`: train, evaluate and check robust deterministic policy gradient agents.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 runtime or numerical
//! error, 3 acceptance failure (gradient check or infeasible oracle).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use rdpg::checkpoint::{Checkpoint, CheckpointError};
use rdpg::config::{RunConfig, OUTPUT_DIR_ENV};
use rdpg::envs::{EnvSpec, LqGameSpec};
use rdpg::gradcheck::{self, Corruption, GradcheckConfig};
use rdpg::harness::{self, DisturbanceMode, HarnessError, Trainer};
use rdpg::oracle::{self, OracleError};

const CHECKPOINT_FILE: &str = "checkpoint.bin";
const ABORT_CHECKPOINT_FILE: &str = "checkpoint_abort.bin";
const CURVE_FILE: &str = "learning_curve.csv";
const RESOLVED_CONFIG_FILE: &str = "resolved_config.json";
const REPORT_FILE: &str = "eval_report.json";
const EPISODES_FILE: &str = "eval_episodes.csv";

#[derive(Parser)]
#[command(name = "rdpg", version, about = "Robust deterministic policy gradient: train, evaluate, oracle, gradcheck")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a JSON run config; writes checkpoint, learning curve and resolved config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Dotted-path override, e.g. `agent.eta=5`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint with exploration off; writes a JSON report and per-episode CSV.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        /// none | adversary[:sigma] | uniform:<bound> | constant:<w1,w2,...>
        #[arg(long)]
        mode: Option<DisturbanceMode>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Solve the linear-quadratic game and print the saddle point as JSON.
    Oracle {
        /// JSON game spec, or a run config whose env is an LQ game.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = oracle::DEFAULT_GRID_POINTS)]
        grid: usize,
    },
    /// Finite-difference check of every analytic gradient.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, hide = true)]
        corrupt: Option<CorruptArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CorruptArg {
    Param,
    Input,
    Actor,
    Critic,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl std::fmt::Display) -> Self {
        Self { code: 1, message: message.to_string() }
    }
    fn runtime(message: impl std::fmt::Display) -> Self {
        Self { code: 2, message: message.to_string() }
    }
    fn acceptance(message: impl std::fmt::Display) -> Self {
        Self { code: 3, message: message.to_string() }
    }
}

fn output_dir(default: &Path) -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| default.to_path_buf())
}

fn harness_failure(e: HarnessError) -> Failure {
    Failure::runtime(e)
}

fn checkpoint_failure(e: CheckpointError) -> Failure {
    match e {
        CheckpointError::Harness(h) => Failure::runtime(h),
        other => Failure::usage(other),
    }
}

fn train(config: &Path, overrides: &[String], seed: Option<u64>) -> Result<(), Failure> {
    let mut overrides = overrides.to_vec();
    if let Some(s) = seed {
        overrides.push(format!("seed={s}"));
    }
    let cfg = RunConfig::load(config, &overrides).map_err(Failure::usage)?;
    let out = output_dir(&cfg.output_dir);
    harness::write_json(&out.join(RESOLVED_CONFIG_FILE), &cfg).map_err(harness_failure)?;
    let mut trainer =
        Trainer::new(cfg.env.clone(), cfg.agent.clone(), cfg.harness.clone(), cfg.seed).map_err(harness_failure)?;
    let every = cfg.harness.snapshot_every;
    let total = cfg.harness.total_steps;
    while trainer.counters.total_steps < total {
        let next = ((trainer.counters.total_steps / every + 1) * every).min(total);
        if let Err(e) = trainer.run_until(next) {
            let path = out.join(ABORT_CHECKPOINT_FILE);
            let saved = Checkpoint::from_trainer(&trainer, &cfg).save(&path);
            let _ = harness::write_csv(&out.join(CURVE_FILE), &trainer.curve);
            let note = match saved {
                Ok(()) => format!("state saved to {}", path.display()),
                Err(s) => format!("could not save state: {s}"),
            };
            return Err(Failure::runtime(format!("{e}; {note}")));
        }
        if let Some(row) = trainer.curve.last().filter(|r| r.step == trainer.counters.total_steps) {
            eprintln!(
                "step {:>9}  episodes {:>6}  mean cost {:>12.4}  std {:>10.4}  critic loss {:.4e}",
                row.step, row.episodes, row.mean_cost, row.std_cost, row.critic_loss_1
            );
        }
    }
    harness::write_csv(&out.join(CURVE_FILE), &trainer.curve).map_err(harness_failure)?;
    Checkpoint::from_trainer(&trainer, &cfg).save(&out.join(CHECKPOINT_FILE)).map_err(checkpoint_failure)?;
    println!("{}", out.display());
    Ok(())
}

fn eval(path: &Path, episodes: Option<usize>, mode: Option<DisturbanceMode>, seed: Option<u64>) -> Result<(), Failure> {
    let ck = Checkpoint::load(path).map_err(checkpoint_failure)?;
    let n = episodes.unwrap_or(ck.config.harness.eval_episodes);
    if n == 0 {
        return Err(Failure::usage("--episodes must be >= 1"));
    }
    let mode = mode.unwrap_or_else(|| ck.config.harness.eval_mode.clone());
    let seed = seed.unwrap_or(ck.config.seed);
    let (report, stats) = harness::evaluate(&ck.agent, &ck.config.env, ck.agent.config.eta, n, &mode, seed)
        .map_err(harness_failure)?;
    let out = output_dir(path.parent().unwrap_or(Path::new(".")));
    harness::write_json(&out.join(REPORT_FILE), &report).map_err(harness_failure)?;
    harness::write_episode_csv(&out.join(EPISODES_FILE), &stats).map_err(harness_failure)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn load_game(path: &Path) -> Result<LqGameSpec<f64>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    if value.get("env").is_some() {
        let cfg = RunConfig::from_value(value).map_err(Failure::usage)?;
        return match cfg.env {
            EnvSpec::Lq(lq) => Ok(lq.game),
            EnvSpec::Quadrotor(_) => Err(Failure::usage("oracle needs a linear-quadratic game, config env is quadrotor")),
        };
    }
    serde_json::from_value(value).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn run_oracle(path: &Path, grid: usize) -> Result<(), Failure> {
    let spec = load_game(path)?;
    let classify = |e: OracleError| match e {
        OracleError::SpectralCondition { .. } => Failure::acceptance(format!("infeasible: {e}")),
        OracleError::InvalidSpec(_) | OracleError::InvalidArgument(_) => Failure::usage(e),
        _ => Failure::runtime(e),
    };
    let sol = oracle::solve_game_riccati(&spec, oracle::DEFAULT_TOLERANCE, oracle::DEFAULT_MAX_ITER).map_err(classify)?;
    let margin = oracle::riccati_map(&spec, &sol.p_matrix).map_err(classify)?.spectral_margin;
    let hinf = match oracle::closed_loop_hinf(&spec, &sol.k_gain, grid) {
        Ok(v) => json!(v),
        Err(OracleError::Unstable { .. }) => serde_json::Value::Null,
        Err(e) => return Err(classify(e)),
    };
    let out = json!({
        "p_matrix": sol.p_matrix,
        "k_gain": sol.k_gain,
        "l_gain": sol.l_gain,
        "iterations": sol.iterations,
        "residual": sol.residual,
        "spectral_margin": margin,
        "eta": spec.eta,
        "closed_loop_hinf_norm": hinf,
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(())
}

fn run_gradcheck(seed: u64, corrupt: Option<CorruptArg>) -> Result<(), Failure> {
    let corruption = corrupt.map(|c| match c {
        CorruptArg::Param => Corruption::ParamGradient,
        CorruptArg::Input => Corruption::InputGradient,
        CorruptArg::Actor => Corruption::ActorGradient,
        CorruptArg::Critic => Corruption::CriticGradient,
    });
    let report = gradcheck::run(&GradcheckConfig { seed, corruption, ..Default::default() });
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(Failure::acceptance(format!(
            "gradient check failed ({}): max relative error {:.3e} exceeds {:.0e}",
            failed.join(", "),
            report.max_relative_error,
            report.threshold
        )))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Train { config, overrides, seed } => train(&config, &overrides, seed),
        Command::Eval { checkpoint, episodes, mode, seed } => eval(&checkpoint, episodes, mode, seed),
        Command::Oracle { config, grid } => run_oracle(&config, grid),
        Command::Gradcheck { seed, corrupt } => run_gradcheck(seed, corrupt),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
