use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate, DisturbanceMode, HarnessError};
use crate::agent::{AgentConfig, AgentDims, RddpgAgent, ReplayBuffer, TrainMetrics, Transition};
use crate::envs::{EnvSpec, Environment};
use crate::rng::{derive_seed, stream_rng, Stream};

/// Training-loop and evaluation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnessConfig {
    /// Environment steps to train for.
    pub total_steps: u64,
    /// Learning-curve cadence, in environment steps.
    pub snapshot_every: u64,
    pub snapshot_episodes: usize,
    pub snapshot_mode: DisturbanceMode,
    pub eval_episodes: usize,
    pub eval_mode: DisturbanceMode,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            total_steps: 300_000,
            snapshot_every: 5_000,
            snapshot_episodes: 10,
            snapshot_mode: DisturbanceMode::UniformRandom { bound: 0.2 },
            eval_episodes: 500,
            eval_mode: DisturbanceMode::UniformRandom { bound: 0.2 },
        }
    }
}

impl HarnessConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.snapshot_every == 0 {
            errs.push("harness.snapshot_every must be >= 1".into());
        }
        if self.snapshot_episodes == 0 {
            errs.push("harness.snapshot_episodes must be >= 1".into());
        }
        if self.eval_episodes == 0 {
            errs.push("harness.eval_episodes must be >= 1".into());
        }
        for (name, m) in [("snapshot_mode", &self.snapshot_mode), ("eval_mode", &self.eval_mode)] {
            if let Err(e) = m.validate() {
                errs.push(format!("harness.{name}: {e}"));
            }
        }
        errs
    }
}

/// One learning-curve snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub step: u64,
    pub episodes: u64,
    pub updates: u64,
    pub mean_cost: f64,
    pub std_cost: f64,
    pub mean_game_cost: f64,
    pub mean_steps: f64,
    pub early_termination_rate: f64,
    pub critic_loss_1: f64,
    pub critic_loss_2: f64,
    pub actor_objective: Option<f64>,
}

/// Loop counters. Every random draw is indexed by one of these, so they are
/// the whole random state of a run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainerSnapshot {
    pub total_steps: u64,
    pub episodes_started: u64,
    pub updates: u64,
    pub last_metrics: TrainMetrics,
}

/// Single-threaded training state machine.
pub struct Trainer {
    pub env_spec: EnvSpec,
    pub harness: HarnessConfig,
    pub root_seed: u64,
    pub agent: RddpgAgent,
    pub buffer: ReplayBuffer,
    pub counters: TrainerSnapshot,
    pub curve: Vec<CurveRow>,
    env: Box<dyn Environment>,
    obs: Vec<f64>,
}

impl Trainer {
    pub fn new(env_spec: EnvSpec, agent_config: AgentConfig, harness: HarnessConfig, seed: u64) -> Result<Self, HarnessError> {
        let errs: Vec<String> = env_spec.validate().into_iter().chain(harness.validate()).collect();
        if !errs.is_empty() {
            return Err(HarnessError::Invalid(errs.join("; ")));
        }
        let mut env = env_spec.build(agent_config.eta)?;
        let dims = AgentDims { obs_dim: env.obs_dim(), user_box: env.user_box(), w_dim: env.disturbance_dim() };
        let buffer = ReplayBuffer::new(agent_config.buffer_capacity, dims.obs_dim, dims.user_box.dim(), dims.w_dim)?;
        let agent = RddpgAgent::new(agent_config, dims, seed)?;
        let obs = env.reset(derive_seed(seed, Stream::TrainReset, 0));
        Ok(Self {
            env_spec,
            harness,
            root_seed: seed,
            agent,
            buffer,
            counters: TrainerSnapshot { episodes_started: 1, ..Default::default() },
            curve: Vec::new(),
            env,
            obs,
        })
    }

    /// Reassembles a trainer from checkpointed parts.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        env_spec: EnvSpec,
        harness: HarnessConfig,
        root_seed: u64,
        agent: RddpgAgent,
        buffer: ReplayBuffer,
        counters: TrainerSnapshot,
        curve: Vec<CurveRow>,
        env_snapshot: &[f64],
        obs: Vec<f64>,
    ) -> Result<Self, HarnessError> {
        let mut env = env_spec.build(agent.config.eta)?;
        env.restore(env_snapshot)?;
        Ok(Self { env_spec, harness, root_seed, agent, buffer, counters, curve, env, obs })
    }

    pub fn env_snapshot(&self) -> Vec<f64> {
        self.env.snapshot()
    }

    pub fn observation(&self) -> &[f64] {
        &self.obs
    }

    /// Disturbance penalty weight of the environment being trained on.
    pub fn eta(&self) -> f64 {
        self.env.eta()
    }

    fn random_actions(&self, k: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = stream_rng(self.root_seed, Stream::Warmup, k);
        let ub = &self.agent.dims.user_box;
        let u = (0..ub.dim()).map(|i| rng.gen_range(ub.low[i]..=ub.high[i])).collect();
        let b = self.agent.config.w_bound;
        let w = if self.agent.config.adversary_enabled {
            (0..self.agent.w_dim()).map(|_| rng.gen_range(-b..=b)).collect()
        } else {
            vec![0.0; self.agent.w_dim()]
        };
        (u, w)
    }

    /// One environment step, the agent update it triggers, and a learning-curve
    /// snapshot when the cadence is hit.
    pub fn step(&mut self) -> Result<(), HarnessError> {
        let k = self.counters.total_steps;
        let (u, w) = if k < self.agent.config.warmup_steps as u64 {
            self.random_actions(k)
        } else {
            self.agent.select_actions(&self.obs, true, derive_seed(self.root_seed, Stream::Explore, k))?
        };
        let out = self.env.step(&u, &w)?;
        let next_obs = out.obs;
        self.buffer.push(&Transition {
            obs: std::mem::take(&mut self.obs),
            u,
            w,
            cost: out.game_cost,
            next_obs: next_obs.clone(),
            terminal: out.failed,
        })?;
        self.counters.total_steps += 1;
        if self.buffer.len() >= self.agent.config.warmup_steps.max(1) {
            self.counters.updates += 1;
            let n = self.counters.updates;
            self.counters.last_metrics =
                self.agent.train_step(&self.buffer, n, derive_seed(self.root_seed, Stream::Batch, n))?;
        }
        self.obs = if out.done {
            let seed = derive_seed(self.root_seed, Stream::TrainReset, self.counters.episodes_started);
            self.counters.episodes_started += 1;
            self.env.reset(seed)
        } else {
            next_obs
        };
        if self.counters.total_steps.is_multiple_of(self.harness.snapshot_every) {
            self.snapshot()?;
        }
        Ok(())
    }

    fn snapshot(&mut self) -> Result<(), HarnessError> {
        let index = self.counters.total_steps / self.harness.snapshot_every;
        let (report, _) = evaluate(
            &self.agent,
            &self.env_spec,
            self.agent.config.eta,
            self.harness.snapshot_episodes,
            &self.harness.snapshot_mode,
            derive_seed(self.root_seed, Stream::SnapshotEval, index),
        )?;
        let m = self.counters.last_metrics;
        self.curve.push(CurveRow {
            step: self.counters.total_steps,
            episodes: self.counters.episodes_started,
            updates: self.counters.updates,
            mean_cost: report.mean_cost,
            std_cost: report.std_cost,
            mean_game_cost: report.mean_game_cost,
            mean_steps: report.mean_steps,
            early_termination_rate: report.early_termination_rate,
            critic_loss_1: m.critic_loss_1,
            critic_loss_2: m.critic_loss_2,
            actor_objective: m.actor_objective,
        });
        Ok(())
    }

    /// Steps until `total_steps` reaches `target`. Errors carry the failing step.
    pub fn run_until(&mut self, target: u64) -> Result<(), HarnessError> {
        while self.counters.total_steps < target {
            let step = self.counters.total_steps;
            self.step().map_err(|e| HarnessError::Aborted { step, source: Box::new(e) })?;
        }
        Ok(())
    }

    /// Runs to the configured `total_steps`.
    pub fn run(&mut self) -> Result<(), HarnessError> {
        self.run_until(self.harness.total_steps)
    }
}
