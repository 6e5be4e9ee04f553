//! Twin-critic min-max learner: a user actor minimizing and an adversary actor
//! maximizing the same critic, with clipped target smoothing, delayed actor
//! updates and soft target tracking.
//!
//! Networks work in normalized action units: actor outputs are `tanh` values in
//! `[-1, 1]` and critics see normalized `(u, w)`. The affine map to environment
//! units happens only at the environment boundary and in stored transitions.

mod replay;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use replay::{Batch, ReplayBuffer, ReplayLayout, Transition};

use crate::diffnet::{
    soft_update_in_place, DiffnetError, HiddenActivation, Mlp, MlpSpec, Optimizer, OptimizerKind, OutputActivation,
};
use crate::envs::ActionBox;
use crate::rng::{derive_seed, rng_from_seed, Stream};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error("invalid agent configuration: {0}")]
    Config(String),
    #[error("{what} has length {found}, expected {expected}")]
    Dimension { what: &'static str, expected: usize, found: usize },
    #[error("replay buffer is empty")]
    EmptyBuffer,
    #[error("non-finite {what}: {detail}")]
    NonFinite { what: &'static str, detail: String },
    #[error(transparent)]
    Network(#[from] DiffnetError),
}

/// Learner hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub lr_user: f64,
    pub lr_adversary: f64,
    pub lr_critic: f64,
    pub batch_size: usize,
    pub gamma: f64,
    /// Exploration noise std, in normalized action units.
    pub explore_sigma: f64,
    /// Target smoothing noise std, in normalized action units.
    pub target_sigma: f64,
    /// Clip for the target smoothing noise.
    pub target_clip: f64,
    pub soft_rate: f64,
    pub policy_delay: usize,
    pub eta: f64,
    /// Adversary actions live in `[-w_bound, w_bound]^l`.
    pub w_bound: f64,
    pub buffer_capacity: usize,
    pub warmup_steps: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub hidden_activation: HiddenActivation,
    pub optimizer: OptimizerKind,
    /// `false` freezes the adversary at `w ≡ 0` and never updates it (the TD3 ablation).
    pub adversary_enabled: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            lr_user: 1e-4,
            lr_adversary: 1e-4,
            lr_critic: 1e-3,
            batch_size: 256,
            gamma: 0.99,
            explore_sigma: 0.2,
            target_sigma: 0.2,
            target_clip: 0.5,
            soft_rate: 0.005,
            policy_delay: 2,
            eta: 10.0,
            w_bound: 0.1,
            buffer_capacity: 1_000_000,
            warmup_steps: 10_000,
            actor_hidden: vec![256, 256],
            critic_hidden: vec![256, 256],
            hidden_activation: HiddenActivation::Relu,
            optimizer: OptimizerKind::Adam,
            adversary_enabled: true,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("agent.{name} must be > 0, got {v}"));
            }
        };
        positive("lr_user", self.lr_user);
        positive("lr_critic", self.lr_critic);
        positive("eta", self.eta);
        positive("w_bound", self.w_bound);
        if self.adversary_enabled {
            positive("lr_adversary", self.lr_adversary);
        }
        if !(self.gamma >= 0.0 && self.gamma <= 1.0) {
            errs.push(format!("agent.gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(self.soft_rate > 0.0 && self.soft_rate <= 1.0) {
            errs.push(format!("agent.soft_rate must lie in (0, 1], got {}", self.soft_rate));
        }
        for (name, v) in [
            ("explore_sigma", self.explore_sigma),
            ("target_sigma", self.target_sigma),
            ("target_clip", self.target_clip),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                errs.push(format!("agent.{name} must be >= 0, got {v}"));
            }
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("policy_delay", self.policy_delay),
            ("buffer_capacity", self.buffer_capacity),
        ] {
            if v == 0 {
                errs.push(format!("agent.{name} must be >= 1"));
            }
        }
        if self.actor_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            errs.push("agent hidden layer sizes must be >= 1".into());
        }
        errs
    }

    fn actor_spec(&self, obs_dim: usize, out_dim: usize) -> MlpSpec {
        let mut sizes = vec![obs_dim];
        sizes.extend(&self.actor_hidden);
        sizes.push(out_dim);
        MlpSpec::new(sizes, self.hidden_activation, OutputActivation::Tanh)
    }

    fn critic_spec(&self, in_dim: usize) -> MlpSpec {
        let mut sizes = vec![in_dim];
        sizes.extend(&self.critic_hidden);
        sizes.push(1);
        MlpSpec::new(sizes, self.hidden_activation, OutputActivation::Identity)
    }
}

/// Problem dimensions and action boxes the agent is built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentDims {
    pub obs_dim: usize,
    pub user_box: ActionBox,
    pub w_dim: usize,
}

/// Losses and objectives of one training step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub critic_loss_1: f64,
    pub critic_loss_2: f64,
    /// Batch-mean `Q₁(x, π(x), μ(x))` before the actor step; present on actor-update steps.
    pub actor_objective: Option<f64>,
}

/// Gradients of `L_actor = mean Q₁(x, π_θ(x), μ_φ(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorGradients {
    pub objective: f64,
    pub user: Vec<f64>,
    pub adversary: Vec<f64>,
}

/// All eight networks plus optimizer states.
#[derive(Debug, Clone, PartialEq)]
pub struct RddpgAgent {
    pub config: AgentConfig,
    pub dims: AgentDims,
    pub user_actor: Mlp<f64>,
    pub adversary_actor: Mlp<f64>,
    pub user_actor_target: Mlp<f64>,
    pub adversary_actor_target: Mlp<f64>,
    pub critic_1: Mlp<f64>,
    pub critic_2: Mlp<f64>,
    pub critic_1_target: Mlp<f64>,
    pub critic_2_target: Mlp<f64>,
    pub user_opt: Optimizer<f64>,
    pub adversary_opt: Optimizer<f64>,
    pub critic_1_opt: Optimizer<f64>,
    pub critic_2_opt: Optimizer<f64>,
}

/// Network indices within [`RddpgAgent::networks`].
pub const NETWORK_NAMES: [&str; 8] = [
    "user_actor",
    "adversary_actor",
    "user_actor_target",
    "adversary_actor_target",
    "critic_1",
    "critic_2",
    "critic_1_target",
    "critic_2_target",
];

impl RddpgAgent {
    /// Online networks from independent init streams; targets start as copies.
    pub fn new(config: AgentConfig, dims: AgentDims, seed: u64) -> Result<Self, AgentError> {
        let errs = config.validate();
        if !errs.is_empty() {
            return Err(AgentError::Config(errs.join("; ")));
        }
        if dims.obs_dim == 0 || dims.user_box.dim() == 0 || dims.w_dim == 0 {
            return Err(AgentError::Config("observation, user and disturbance dimensions must be >= 1".into()));
        }
        let m = dims.user_box.dim();
        let l = dims.w_dim;
        let init = |k: u64, spec: MlpSpec| Mlp::init(spec, derive_seed(seed, Stream::NetworkInit, k));
        let user_actor = init(0, config.actor_spec(dims.obs_dim, m))?;
        let adversary_actor = if config.adversary_enabled {
            init(1, config.actor_spec(dims.obs_dim, l))?
        } else {
            Mlp::zeros(config.actor_spec(dims.obs_dim, l))?
        };
        let critic_in = dims.obs_dim + m + l;
        let critic_1 = init(2, config.critic_spec(critic_in))?;
        let critic_2 = init(3, config.critic_spec(critic_in))?;
        let opt = |net: &Mlp<f64>| Optimizer::new(config.optimizer, net.params().len());
        Ok(Self {
            user_opt: opt(&user_actor),
            adversary_opt: opt(&adversary_actor),
            critic_1_opt: opt(&critic_1),
            critic_2_opt: opt(&critic_2),
            user_actor_target: user_actor.clone(),
            adversary_actor_target: adversary_actor.clone(),
            critic_1_target: critic_1.clone(),
            critic_2_target: critic_2.clone(),
            user_actor,
            adversary_actor,
            critic_1,
            critic_2,
            config,
            dims,
        })
    }

    pub fn user_dim(&self) -> usize {
        self.dims.user_box.dim()
    }

    pub fn w_dim(&self) -> usize {
        self.dims.w_dim
    }

    pub fn w_box(&self) -> ActionBox {
        ActionBox { low: vec![-self.config.w_bound; self.w_dim()], high: vec![self.config.w_bound; self.w_dim()] }
    }

    pub fn networks(&self) -> [&Mlp<f64>; 8] {
        [
            &self.user_actor,
            &self.adversary_actor,
            &self.user_actor_target,
            &self.adversary_actor_target,
            &self.critic_1,
            &self.critic_2,
            &self.critic_1_target,
            &self.critic_2_target,
        ]
    }

    pub fn networks_mut(&mut self) -> [&mut Mlp<f64>; 8] {
        [
            &mut self.user_actor,
            &mut self.adversary_actor,
            &mut self.user_actor_target,
            &mut self.adversary_actor_target,
            &mut self.critic_1,
            &mut self.critic_2,
            &mut self.critic_1_target,
            &mut self.critic_2_target,
        ]
    }

    pub fn optimizers(&self) -> [&Optimizer<f64>; 4] {
        [&self.user_opt, &self.adversary_opt, &self.critic_1_opt, &self.critic_2_opt]
    }

    pub fn optimizers_mut(&mut self) -> [&mut Optimizer<f64>; 4] {
        [&mut self.user_opt, &mut self.adversary_opt, &mut self.critic_1_opt, &mut self.critic_2_opt]
    }

    fn check_obs(&self, obs: &[f64], batch: usize) -> Result<(), AgentError> {
        if obs.len() != batch * self.dims.obs_dim {
            return Err(AgentError::Dimension { what: "observation", expected: batch * self.dims.obs_dim, found: obs.len() });
        }
        Ok(())
    }

    /// Deterministic user action in normalized units.
    pub fn user_policy_normalized(&self, obs: &[f64]) -> Result<Vec<f64>, AgentError> {
        self.check_obs(obs, 1)?;
        Ok(self.user_actor.forward(obs)?)
    }

    /// Deterministic adversary action in normalized units (zero when disabled).
    pub fn adversary_policy_normalized(&self, obs: &[f64]) -> Result<Vec<f64>, AgentError> {
        self.check_obs(obs, 1)?;
        if !self.config.adversary_enabled {
            return Ok(vec![0.0; self.w_dim()]);
        }
        Ok(self.adversary_actor.forward(obs)?)
    }

    /// `(u, w)` in environment units. With `explore`, Gaussian noise of std
    /// `explore_sigma` (normalized units) is added and the result clipped to the box.
    pub fn select_actions(&self, obs: &[f64], explore: bool, seed: u64) -> Result<(Vec<f64>, Vec<f64>), AgentError> {
        let mut u = self.user_policy_normalized(obs)?;
        let mut w = self.adversary_policy_normalized(obs)?;
        if explore && self.config.explore_sigma > 0.0 {
            let mut rng = rng_from_seed(seed);
            let sigma = self.config.explore_sigma;
            for x in u.iter_mut() {
                *x = (*x + sigma * rng.sample::<f64, _>(StandardNormal)).clamp(-1.0, 1.0);
            }
            if self.config.adversary_enabled {
                for x in w.iter_mut() {
                    *x = (*x + sigma * rng.sample::<f64, _>(StandardNormal)).clamp(-1.0, 1.0);
                }
            }
        }
        Ok((self.dims.user_box.from_normalized(&u), self.w_box().from_normalized(&w)))
    }

    /// Row-major `(obs, u_norm, w_norm)` critic inputs.
    fn critic_inputs(&self, obs: &[f64], u_norm: &[f64], w_norm: &[f64], batch: usize) -> Vec<f64> {
        let (n, m, l) = (self.dims.obs_dim, self.user_dim(), self.w_dim());
        let mut z = Vec::with_capacity(batch * (n + m + l));
        for s in 0..batch {
            z.extend_from_slice(&obs[s * n..(s + 1) * n]);
            z.extend_from_slice(&u_norm[s * m..(s + 1) * m]);
            z.extend_from_slice(&w_norm[s * l..(s + 1) * l]);
        }
        z
    }

    fn normalize_rows(bx: &ActionBox, flat: &[f64]) -> Vec<f64> {
        let d = bx.dim();
        flat.chunks(d).flat_map(|row| bx.to_normalized(row)).collect()
    }

    /// Critic inputs for stored transitions (actions converted to normalized units).
    fn batch_critic_inputs(&self, batch: &Batch) -> Vec<f64> {
        let u = Self::normalize_rows(&self.dims.user_box, &batch.u);
        let w = Self::normalize_rows(&self.w_box(), &batch.w);
        self.critic_inputs(&batch.obs, &u, &w, batch.len)
    }

    fn check_batch(&self, batch: &Batch) -> Result<(), AgentError> {
        if batch.is_empty() {
            return Err(AgentError::Config("batch must be nonempty".into()));
        }
        self.check_obs(&batch.obs, batch.len)?;
        self.check_obs(&batch.next_obs, batch.len)?;
        if batch.u.len() != batch.len * self.user_dim() || batch.w.len() != batch.len * self.w_dim() {
            return Err(AgentError::Dimension { what: "batch actions", expected: batch.len * self.user_dim(), found: batch.u.len() });
        }
        Ok(())
    }

    /// Target actions at `next_obs` with clipped smoothing noise, normalized units.
    pub fn smoothed_target_actions(&self, next_obs: &[f64], batch: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>), AgentError> {
        let mut rng = rng_from_seed(seed);
        let (sigma, clip) = (self.config.target_sigma, self.config.target_clip);
        let mut noisy = |vals: &mut [f64]| {
            if sigma > 0.0 {
                for x in vals.iter_mut() {
                    let eps = (sigma * rng.sample::<f64, _>(StandardNormal)).clamp(-clip, clip);
                    *x = (*x + eps).clamp(-1.0, 1.0);
                }
            }
        };
        let mut u = self.user_actor_target.forward_batch(next_obs, batch)?.output().to_vec();
        noisy(&mut u);
        let w = if self.config.adversary_enabled {
            let mut w = self.adversary_actor_target.forward_batch(next_obs, batch)?.output().to_vec();
            noisy(&mut w);
            w
        } else {
            vec![0.0; batch * self.w_dim()]
        };
        Ok((u, w))
    }

    /// `y = c` for terminal transitions, else `c + γ·min(Q₁', Q₂')(x', ũ, w̃)`.
    pub fn compute_target_y(&self, batch: &Batch, seed: u64) -> Result<Vec<f64>, AgentError> {
        self.check_batch(batch)?;
        let (u, w) = self.smoothed_target_actions(&batch.next_obs, batch.len, seed)?;
        let z = self.critic_inputs(&batch.next_obs, &u, &w, batch.len);
        let q1 = self.critic_1_target.forward_batch(&z, batch.len)?;
        let q2 = self.critic_2_target.forward_batch(&z, batch.len)?;
        let g = self.config.gamma;
        Ok((0..batch.len)
            .map(|s| {
                if batch.terminal[s] {
                    batch.cost[s]
                } else {
                    batch.cost[s] + g * q1.output()[s].min(q2.output()[s])
                }
            })
            .collect())
    }

    /// Mean squared error of one critic against fixed targets, and its parameter gradient.
    pub fn critic_loss_and_gradient(critic: &Mlp<f64>, inputs: &[f64], y: &[f64]) -> Result<(f64, Vec<f64>), AgentError> {
        let b = y.len();
        let cache = critic.forward_batch(inputs, b)?;
        let q = cache.output();
        let inv = 1.0 / b as f64;
        let mut loss = 0.0;
        let mut upstream = Vec::with_capacity(b);
        for s in 0..b {
            let e = q[s] - y[s];
            loss += e * e;
            upstream.push(2.0 * e * inv);
        }
        loss *= inv;
        if !loss.is_finite() {
            return Err(AgentError::NonFinite { what: "critic loss", detail: format!("{loss}") });
        }
        let (grad, _) = critic.backward_batch(&cache, &upstream)?;
        Ok((loss, grad))
    }

    /// One optimizer step on each critic toward a shared target; returns pre-step losses.
    pub fn critic_update(&mut self, batch: &Batch, seed: u64) -> Result<(f64, f64), AgentError> {
        let y = self.compute_target_y(batch, seed)?;
        let z = self.batch_critic_inputs(batch);
        let (l1, g1) = Self::critic_loss_and_gradient(&self.critic_1, &z, &y)?;
        let (l2, g2) = Self::critic_loss_and_gradient(&self.critic_2, &z, &y)?;
        let lr = self.config.lr_critic;
        self.critic_1_opt.step(self.critic_1.params_mut(), &g1, lr)?;
        self.critic_2_opt.step(self.critic_2.params_mut(), &g2, lr)?;
        Ok((l1, l2))
    }

    /// `L_actor = mean_s Q₁(x_s, π_θ(x_s), μ_φ(x_s))` on observations `obs`.
    pub fn actor_objective(&self, obs: &[f64], batch: usize) -> Result<f64, AgentError> {
        self.check_obs(obs, batch)?;
        let u = self.user_actor.forward_batch(obs, batch)?;
        let w = self.adversary_outputs(obs, batch)?;
        let z = self.critic_inputs(obs, u.output(), &w, batch);
        let q = self.critic_1.forward_batch(&z, batch)?;
        Ok(q.output().iter().sum::<f64>() / batch as f64)
    }

    fn adversary_outputs(&self, obs: &[f64], batch: usize) -> Result<Vec<f64>, AgentError> {
        if self.config.adversary_enabled {
            Ok(self.adversary_actor.forward_batch(obs, batch)?.output().to_vec())
        } else {
            Ok(vec![0.0; batch * self.w_dim()])
        }
    }

    /// `∇_θ L_actor` and `∇_φ L_actor` through critic 1's input gradient.
    pub fn actor_gradients(&self, obs: &[f64], batch: usize) -> Result<ActorGradients, AgentError> {
        self.check_obs(obs, batch)?;
        let (n, m, l) = (self.dims.obs_dim, self.user_dim(), self.w_dim());
        let u_cache = self.user_actor.forward_batch(obs, batch)?;
        let w_cache = if self.config.adversary_enabled {
            Some(self.adversary_actor.forward_batch(obs, batch)?)
        } else {
            None
        };
        let w_out = match &w_cache {
            Some(c) => c.output().to_vec(),
            None => vec![0.0; batch * l],
        };
        let z = self.critic_inputs(obs, u_cache.output(), &w_out, batch);
        let q = self.critic_1.forward_batch(&z, batch)?;
        let objective = q.output().iter().sum::<f64>() / batch as f64;
        let upstream = vec![1.0 / batch as f64; batch];
        let (_, dz) = self.critic_1.backward_batch(&q, &upstream)?;
        let width = n + m + l;
        let du: Vec<f64> = (0..batch).flat_map(|s| dz[s * width + n..s * width + n + m].to_vec()).collect();
        let (user, _) = self.user_actor.backward_batch(&u_cache, &du)?;
        let adversary = match &w_cache {
            Some(c) => {
                let dw: Vec<f64> = (0..batch).flat_map(|s| dz[s * width + n + m..(s + 1) * width].to_vec()).collect();
                self.adversary_actor.backward_batch(c, &dw)?.0
            }
            None => vec![0.0; self.adversary_actor.params().len()],
        };
        for (what, g) in [("user actor gradient", &user), ("adversary actor gradient", &adversary)] {
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(AgentError::NonFinite { what, detail: format!("entry {i} = {}", g[i]) });
            }
        }
        Ok(ActorGradients { objective, user, adversary })
    }

    /// Descent on θ, ascent on φ; returns the pre-step objective.
    pub fn actor_update(&mut self, batch: &Batch) -> Result<f64, AgentError> {
        self.check_batch(batch)?;
        let g = self.actor_gradients(&batch.obs, batch.len)?;
        self.user_opt.step(self.user_actor.params_mut(), &g.user, self.config.lr_user)?;
        if self.config.adversary_enabled {
            let ascent: Vec<f64> = g.adversary.iter().map(|v| -v).collect();
            self.adversary_opt.step(self.adversary_actor.params_mut(), &ascent, self.config.lr_adversary)?;
        }
        Ok(g.objective)
    }

    /// `target ← τ·online + (1-τ)·target` for all four pairs.
    pub fn target_soft_update(&mut self) -> Result<(), AgentError> {
        let tau = self.config.soft_rate;
        soft_update_in_place(self.user_actor_target.params_mut(), self.user_actor.params(), tau)?;
        soft_update_in_place(self.adversary_actor_target.params_mut(), self.adversary_actor.params(), tau)?;
        soft_update_in_place(self.critic_1_target.params_mut(), self.critic_1.params(), tau)?;
        soft_update_in_place(self.critic_2_target.params_mut(), self.critic_2.params(), tau)?;
        Ok(())
    }

    /// Critic update every step; actor and target updates when `step_index % policy_delay == 0`.
    pub fn train_step(&mut self, buffer: &ReplayBuffer, step_index: u64, seed: u64) -> Result<TrainMetrics, AgentError> {
        let batch = buffer.sample_batch(self.config.batch_size, derive_seed(seed, Stream::Batch, 0))?;
        self.train_on_batch(&batch, step_index, seed)
    }

    pub fn train_on_batch(&mut self, batch: &Batch, step_index: u64, seed: u64) -> Result<TrainMetrics, AgentError> {
        let (critic_loss_1, critic_loss_2) = self.critic_update(batch, derive_seed(seed, Stream::TargetNoise, 0))?;
        let actor_objective = if step_index.is_multiple_of(self.config.policy_delay as u64) {
            let obj = self.actor_update(batch)?;
            self.target_soft_update()?;
            Some(obj)
        } else {
            None
        };
        Ok(TrainMetrics { critic_loss_1, critic_loss_2, actor_objective })
    }
}

/// Free-function form of [`RddpgAgent::train_step`].
pub fn agent_train_step(
    agent: &mut RddpgAgent,
    buffer: &ReplayBuffer,
    step_index: u64,
    seed: u64,
) -> Result<TrainMetrics, AgentError> {
    agent.train_step(buffer, step_index, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> AgentConfig {
        AgentConfig {
            actor_hidden: vec![5],
            critic_hidden: vec![6],
            hidden_activation: HiddenActivation::Tanh,
            batch_size: 4,
            ..Default::default()
        }
    }

    fn dims() -> AgentDims {
        AgentDims { obs_dim: 2, user_box: ActionBox::new(vec![0.0, -1.0], vec![4.0, 1.0]).unwrap(), w_dim: 1 }
    }

    fn batch(agent: &RddpgAgent, len: usize, seed: u64) -> Batch {
        let mut rng = rng_from_seed(seed);
        let mut ts = Vec::new();
        for k in 0..len {
            let obs: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (u, w) = agent.select_actions(&obs, true, seed + k as u64).unwrap();
            ts.push(Transition {
                next_obs: obs.iter().map(|x| 0.5 * x).collect(),
                obs,
                u,
                w,
                cost: rng.gen_range(0.0..2.0),
                terminal: k % 4 == 3,
            });
        }
        Batch::from_transitions(&ts)
    }

    #[test]
    fn zero_actors_emit_box_midpoints() {
        let mut agent = RddpgAgent::new(tiny_config(), dims(), 1).unwrap();
        agent.user_actor.params_mut().iter_mut().for_each(|p| *p = 0.0);
        agent.adversary_actor.params_mut().iter_mut().for_each(|p| *p = 0.0);
        let (u, w) = agent.select_actions(&[0.3, -0.2], false, 0).unwrap();
        assert_eq!(u, vec![2.0, 0.0]);
        assert_eq!(w, vec![0.0]);
    }

    #[test]
    fn exploration_stays_in_box() {
        let mut cfg = tiny_config();
        cfg.explore_sigma = 5.0;
        let agent = RddpgAgent::new(cfg, dims(), 2).unwrap();
        let wb = agent.w_box();
        for s in 0..2000u64 {
            let obs = [(s as f64 * 0.37).sin() * 10.0, (s as f64).cos()];
            let (u, w) = agent.select_actions(&obs, true, s).unwrap();
            assert!(agent.dims.user_box.contains(&u) && wb.contains(&w));
        }
    }

    #[test]
    fn terminal_target_is_the_cost() {
        let agent = RddpgAgent::new(tiny_config(), dims(), 3).unwrap();
        let mut b = batch(&agent, 4, 9);
        b.terminal = vec![true; 4];
        assert_eq!(agent.compute_target_y(&b, 0).unwrap(), b.cost);
    }

    #[test]
    fn policy_delay_skips_actor_updates() {
        let mut cfg = tiny_config();
        cfg.policy_delay = 2;
        let mut agent = RddpgAgent::new(cfg, dims(), 4).unwrap();
        let b = batch(&agent, 4, 5);
        let before = agent.clone();
        let m = agent.train_on_batch(&b, 1, 0).unwrap();
        assert!(m.actor_objective.is_none());
        assert_eq!(agent.user_actor, before.user_actor);
        assert_eq!(agent.adversary_actor, before.adversary_actor);
        assert_eq!(agent.critic_1_target, before.critic_1_target);
        assert_ne!(agent.critic_1, before.critic_1);
        let m = agent.train_on_batch(&b, 2, 0).unwrap();
        assert!(m.actor_objective.is_some());
        assert_ne!(agent.user_actor, before.user_actor);
    }

    #[test]
    fn disabled_adversary_never_moves() {
        let mut cfg = tiny_config();
        cfg.adversary_enabled = false;
        cfg.policy_delay = 1;
        let mut agent = RddpgAgent::new(cfg, dims(), 6).unwrap();
        let b = batch(&agent, 4, 7);
        for k in 0..5 {
            agent.train_on_batch(&b, k, k).unwrap();
        }
        assert!(agent.adversary_actor.params().iter().all(|&p| p == 0.0));
        assert_eq!(agent.select_actions(&[0.1, 0.2], true, 3).unwrap().1, vec![0.0]);
    }

    #[test]
    fn soft_rate_one_copies_online() {
        let mut cfg = tiny_config();
        cfg.soft_rate = 1.0;
        let mut agent = RddpgAgent::new(cfg, dims(), 8).unwrap();
        let b = batch(&agent, 4, 1);
        agent.critic_update(&b, 0).unwrap();
        agent.target_soft_update().unwrap();
        assert_eq!(agent.critic_1_target.params(), agent.critic_1.params());
    }
}
