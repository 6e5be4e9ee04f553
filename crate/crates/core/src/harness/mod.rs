//! Rollouts, evaluation under injected disturbances, Monte Carlo returns,
//! attenuation metrics and the training loop.

mod io;
mod policy;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use io::{read_csv_rows, write_csv, write_episode_csv, write_json, write_trajectory_csv};
pub use policy::{ConstantPolicy, LinearPolicy, PolicyPair};
pub use train::{CurveRow, HarnessConfig, Trainer, TrainerSnapshot};

use crate::agent::AgentError;
use crate::envs::{EnvError, EnvSpec, Environment};
use crate::rng::{derive_seed, stream_rng, Stream};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("attenuation ratio undefined: total disturbance energy is zero")]
    ZeroDisturbance,
    #[error("{0}")]
    Invalid(String),
    #[error("i/o error on {path}: {detail}")]
    Io { path: String, detail: String },
    #[error("training aborted at step {step}: {source}")]
    Aborted { step: u64, source: Box<HarnessError> },
}

/// Where the disturbance `w` comes from during a rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceMode {
    /// `w = 0`.
    None,
    /// `w = μ_φ(x)`, optionally with Gaussian exploration of the given std.
    AdversaryPolicy {
        #[serde(default)]
        exploration: f64,
    },
    /// Each component i.i.d. uniform in `[-bound, bound]`.
    UniformRandom { bound: f64 },
    Constant { vector: Vec<f64> },
}

impl DisturbanceMode {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            DisturbanceMode::UniformRandom { bound } if !(*bound > 0.0 && bound.is_finite()) => {
                Err(format!("uniform_random bound must be > 0, got {bound}"))
            }
            DisturbanceMode::AdversaryPolicy { exploration } if !(*exploration >= 0.0) => {
                Err(format!("adversary exploration must be >= 0, got {exploration}"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for DisturbanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DisturbanceMode::None => write!(f, "none"),
            DisturbanceMode::AdversaryPolicy { exploration } if *exploration == 0.0 => write!(f, "adversary"),
            DisturbanceMode::AdversaryPolicy { exploration } => write!(f, "adversary:{exploration}"),
            DisturbanceMode::UniformRandom { bound } => write!(f, "uniform:{bound}"),
            DisturbanceMode::Constant { vector } => {
                let parts: Vec<String> = vector.iter().map(|v| v.to_string()).collect();
                write!(f, "constant:{}", parts.join(","))
            }
        }
    }
}

/// `none`, `adversary[:exploration]`, `uniform:<bound>`, `constant:<w1,w2,...>`.
impl FromStr for DisturbanceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let num = |a: &str| a.trim().parse::<f64>().map_err(|e| format!("bad number {a:?} in mode {s:?}: {e}"));
        let mode = match (kind, arg) {
            ("none", None) => DisturbanceMode::None,
            ("adversary" | "adversary_policy", None) => DisturbanceMode::AdversaryPolicy { exploration: 0.0 },
            ("adversary" | "adversary_policy", Some(a)) => DisturbanceMode::AdversaryPolicy { exploration: num(a)? },
            ("uniform" | "uniform_random", Some(a)) => DisturbanceMode::UniformRandom { bound: num(a)? },
            ("constant", Some(a)) => {
                DisturbanceMode::Constant { vector: a.split(',').map(num).collect::<Result<_, _>>()? }
            }
            _ => {
                return Err(format!(
                    "unknown disturbance mode {s:?}; expected none, adversary[:sigma], uniform:<bound> or constant:<w,...>"
                ))
            }
        };
        mode.validate()?;
        Ok(mode)
    }
}

/// Per-episode accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub seed: u64,
    /// Undiscounted `Σ c̃`.
    pub total_user_cost: f64,
    /// `total_user_cost - η²·disturbance_energy`, evaluated in that order.
    pub total_game_cost: f64,
    pub steps: usize,
    pub terminated_early: bool,
    /// `Σ ‖w‖²`.
    pub disturbance_energy: f64,
    /// `Σ γᵏ c_k` with the rollout's discount.
    pub discounted_game_cost: f64,
    pub discounted_user_cost: f64,
    pub discounted_energy: f64,
}

/// One logged step: state and actions before the transition, costs it incurred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub t: usize,
    pub state: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub user_cost: f64,
    pub game_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutOptions {
    pub seed: u64,
    /// `None` runs until the environment reports the episode over; `Some(h)` runs
    /// `h` steps ignoring time limits and stops early only on failure.
    pub horizon: Option<usize>,
    pub gamma: f64,
    pub record: bool,
}

impl RolloutOptions {
    pub fn episode(seed: u64) -> Self {
        Self { seed, horizon: None, gamma: 1.0, record: false }
    }
}

fn disturbance<P: PolicyPair + ?Sized>(
    mode: &DisturbanceMode,
    policy: &P,
    obs: &[f64],
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, HarnessError> {
    Ok(match mode {
        DisturbanceMode::None => vec![0.0; dim],
        DisturbanceMode::AdversaryPolicy { exploration } => policy.adversary_action(obs, *exploration, rng)?,
        DisturbanceMode::UniformRandom { bound } => (0..dim).map(|_| rng.gen_range(-*bound..=*bound)).collect(),
        DisturbanceMode::Constant { vector } => {
            if vector.len() != dim {
                return Err(HarnessError::Invalid(format!(
                    "constant disturbance has length {}, environment expects {dim}",
                    vector.len()
                )));
            }
            vector.clone()
        }
    })
}

/// Rolls one episode from `env.reset(options.seed)`. Disturbance draws come from
/// the `Disturbance` stream of the episode seed.
pub fn rollout<P: PolicyPair + ?Sized>(
    policy: &P,
    env: &mut dyn Environment,
    mode: &DisturbanceMode,
    options: RolloutOptions,
) -> Result<(EpisodeStats, Option<Vec<TrajectoryStep>>), HarnessError> {
    mode.validate().map_err(HarnessError::Invalid)?;
    let eta = env.eta();
    let dim = env.disturbance_dim();
    let mut rng = stream_rng(options.seed, Stream::Disturbance, 0);
    let mut obs = env.reset(options.seed);
    let mut log = options.record.then(Vec::new);
    let mut stats = EpisodeStats {
        seed: options.seed,
        total_user_cost: 0.0,
        total_game_cost: 0.0,
        steps: 0,
        terminated_early: false,
        disturbance_energy: 0.0,
        discounted_game_cost: 0.0,
        discounted_user_cost: 0.0,
        discounted_energy: 0.0,
    };
    let limit = options.horizon.unwrap_or(usize::MAX);
    let mut discount = 1.0;
    while stats.steps < limit {
        let u = policy.user_action(&obs)?;
        let w = disturbance(mode, policy, &obs, dim, &mut rng)?;
        let state = if options.record { env.raw_state() } else { Vec::new() };
        let out = env.step(&u, &w)?;
        let energy: f64 = w.iter().map(|x| x * x).sum();
        stats.total_user_cost += out.user_cost;
        stats.disturbance_energy += energy;
        stats.discounted_game_cost += discount * out.game_cost;
        stats.discounted_user_cost += discount * out.user_cost;
        stats.discounted_energy += discount * energy;
        discount *= options.gamma;
        if let Some(log) = log.as_mut() {
            log.push(TrajectoryStep { t: stats.steps, state, u, w, user_cost: out.user_cost, game_cost: out.game_cost });
        }
        stats.steps += 1;
        obs = out.obs;
        if out.failed {
            stats.terminated_early = true;
            break;
        }
        if out.done && options.horizon.is_none() {
            break;
        }
    }
    stats.total_game_cost = stats.total_user_cost - eta * eta * stats.disturbance_energy;
    Ok((stats, log))
}

/// One full episode with undiscounted accounting.
pub fn run_episode<P: PolicyPair + ?Sized>(
    policy: &P,
    env: &mut dyn Environment,
    mode: &DisturbanceMode,
    seed: u64,
    record: bool,
) -> Result<(EpisodeStats, Option<Vec<TrajectoryStep>>), HarnessError> {
    rollout(policy, env, mode, RolloutOptions { record, ..RolloutOptions::episode(seed) })
}

/// Aggregate statistics over evaluation episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_episodes: usize,
    pub mode: DisturbanceMode,
    pub seed: u64,
    pub mean_cost: f64,
    /// Population standard deviation (divides by `n`).
    pub std_cost: f64,
    pub mean_game_cost: f64,
    pub std_game_cost: f64,
    pub mean_steps: f64,
    pub early_termination_rate: f64,
    /// `None` when no disturbance energy was injected.
    pub attenuation_ratio: Option<f64>,
    pub eta: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean and standard error (sample std / √n).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn aggregate(stats: &[EpisodeStats], mode: &DisturbanceMode, seed: u64, eta: f64) -> Result<EvalReport, HarnessError> {
    if stats.is_empty() {
        return Err(HarnessError::Invalid("need at least one episode".into()));
    }
    let costs: Vec<f64> = stats.iter().map(|s| s.total_user_cost).collect();
    let game: Vec<f64> = stats.iter().map(|s| s.total_game_cost).collect();
    let (mean_cost, std_cost) = mean_std(&costs);
    let (mean_game_cost, std_game_cost) = mean_std(&game);
    let n = stats.len() as f64;
    Ok(EvalReport {
        n_episodes: stats.len(),
        mode: mode.clone(),
        seed,
        mean_cost,
        std_cost,
        mean_game_cost,
        std_game_cost,
        mean_steps: stats.iter().map(|s| s.steps as f64).sum::<f64>() / n,
        early_termination_rate: stats.iter().filter(|s| s.terminated_early).count() as f64 / n,
        attenuation_ratio: attenuation_ratio(stats).ok(),
        eta,
    })
}

/// Seed of evaluation episode `i`.
pub fn evaluation_seed(seed: u64, i: usize) -> u64 {
    derive_seed(seed, Stream::Evaluation, i as u64)
}

/// `n_episodes` independent episodes, each on a fresh environment; results in seed order.
pub fn evaluate_episodes<P: PolicyPair + ?Sized>(
    policy: &P,
    env_spec: &EnvSpec,
    eta: f64,
    n_episodes: usize,
    mode: &DisturbanceMode,
    seed: u64,
) -> Result<Vec<EpisodeStats>, HarnessError> {
    if n_episodes == 0 {
        return Err(HarnessError::Invalid("n_episodes must be >= 1".into()));
    }
    (0..n_episodes)
        .into_par_iter()
        .map(|i| {
            let mut env = env_spec.build(eta)?;
            Ok(run_episode(policy, env.as_mut(), mode, evaluation_seed(seed, i), false)?.0)
        })
        .collect()
}

/// Exploration-free evaluation, aggregated into a report.
pub fn evaluate<P: PolicyPair + ?Sized>(
    policy: &P,
    env_spec: &EnvSpec,
    eta: f64,
    n_episodes: usize,
    mode: &DisturbanceMode,
    seed: u64,
) -> Result<(EvalReport, Vec<EpisodeStats>), HarnessError> {
    let episodes = evaluate_episodes(policy, env_spec, eta, n_episodes, mode, seed)?;
    let env_eta = env_spec.build(eta)?.eta();
    Ok((aggregate(&episodes, mode, seed, env_eta)?, episodes))
}

/// Sample mean and standard error of the discounted game cost over seeded rollouts
/// of `horizon` steps.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_return<P: PolicyPair + ?Sized>(
    policy: &P,
    env_spec: &EnvSpec,
    eta: f64,
    mode: &DisturbanceMode,
    gamma: f64,
    horizon: usize,
    n_rollouts: usize,
    seed: u64,
) -> Result<(f64, f64), HarnessError> {
    if n_rollouts == 0 {
        return Err(HarnessError::Invalid("n_rollouts must be >= 1".into()));
    }
    let returns: Vec<f64> = (0..n_rollouts)
        .into_par_iter()
        .map(|i| {
            let mut env = env_spec.build(eta)?;
            let opts = RolloutOptions {
                seed: derive_seed(seed, Stream::MonteCarlo, i as u64),
                horizon: Some(horizon),
                gamma,
                record: false,
            };
            Ok(rollout(policy, env.as_mut(), mode, opts)?.0.discounted_game_cost)
        })
        .collect::<Result<_, HarnessError>>()?;
    Ok(mean_stderr(&returns))
}

/// `mean(total_user_cost) / mean(disturbance_energy)`.
pub fn attenuation_ratio(stats: &[EpisodeStats]) -> Result<f64, HarnessError> {
    let energy: f64 = stats.iter().map(|s| s.disturbance_energy).sum();
    if stats.is_empty() || energy <= 0.0 {
        return Err(HarnessError::ZeroDisturbance);
    }
    let cost: f64 = stats.iter().map(|s| s.total_user_cost).sum();
    Ok(cost / energy)
}

/// Ratio-of-means estimate with its delta-method standard error, from
/// `(cost, energy)` pairs.
pub fn ratio_with_stderr(pairs: &[(f64, f64)]) -> Result<(f64, f64), HarnessError> {
    let n = pairs.len() as f64;
    let mean_e = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    if pairs.is_empty() || mean_e <= 0.0 {
        return Err(HarnessError::ZeroDisturbance);
    }
    let mean_c = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let r = mean_c / mean_e;
    if pairs.len() < 2 {
        return Ok((r, 0.0));
    }
    let var = pairs.iter().map(|(c, e)| (c - r * e).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((r, (var / n).sqrt() / mean_e))
}
