//! Environments: quadrotor trajectory tracking and the linear-quadratic game,
//! plus the tracking cost terms and the reference-trajectory family.

pub mod cost;
pub mod lq;
pub mod quadrotor;
pub mod trajectory;

use serde::{Deserialize, Serialize};

pub use cost::{game_cost, tracking_failed, user_cost, CostCoefficients, FAILURE_DISTANCE};
pub use lq::{lq_reset, lq_step, LqEnv, LqEnvSpec, LqGameSpec};
pub use quadrotor::{
    hover_rpm, quad_reset, quad_step, QuadStep, QuadrotorEnv, QuadrotorEnvSpec, QuadrotorParams, QuadrotorState,
    StackedObservation, FRAME_DIM, STACK_DEPTH,
};
pub use trajectory::{trajectory_ref, TrajectoryKind, TrajectorySpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error("invalid environment configuration: {0}")]
    Invalid(String),
    #[error("{what} has length {found}, expected {expected}")]
    Dimension { what: &'static str, expected: usize, found: usize },
    #[error("action component {index} = {value} outside [{low}, {high}]")]
    ActionOutOfRange { index: usize, value: f64, low: f64, high: f64 },
    #[error("non-finite state at step {step}: {detail}")]
    NonFinite { step: usize, detail: String },
}

/// Axis-aligned box of admissible actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionBox {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl ActionBox {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self, EnvError> {
        if low.len() != high.len() {
            return Err(EnvError::Invalid("box bounds differ in length".into()));
        }
        if let Some(i) = low.iter().zip(&high).position(|(l, h)| !(l < h)) {
            return Err(EnvError::Invalid(format!("box axis {i} is empty or degenerate")));
        }
        Ok(Self { low, high })
    }

    /// `[-bound, bound]^dim`.
    pub fn symmetric(dim: usize, bound: f64) -> Result<Self, EnvError> {
        Self::new(vec![-bound; dim], vec![bound; dim])
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.low.iter().zip(&self.high).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn half_width(&self) -> Vec<f64> {
        self.low.iter().zip(&self.high).map(|(l, h)| 0.5 * (h - l)).collect()
    }

    /// Maps a normalized action in `[-1, 1]^dim` to the box.
    pub fn from_normalized(&self, a: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(&x, (&l, &h))| (0.5 * (l + h) + 0.5 * (h - l) * x).clamp(l, h))
            .collect()
    }

    /// Inverse of [`ActionBox::from_normalized`].
    pub fn to_normalized(&self, a: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(&x, (&l, &h))| (x - 0.5 * (l + h)) / (0.5 * (h - l)))
            .collect()
    }

    pub fn clip(&self, a: &mut [f64]) {
        for (x, (&l, &h)) in a.iter_mut().zip(self.low.iter().zip(&self.high)) {
            *x = x.clamp(l, h);
        }
    }

    pub fn contains(&self, a: &[f64]) -> bool {
        a.len() == self.dim() && a.iter().zip(self.low.iter().zip(&self.high)).all(|(&x, (&l, &h))| x >= l && x <= h)
    }
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub obs: Vec<f64>,
    /// The user's cost c̃.
    pub user_cost: f64,
    /// The game cost c = c̃ - η²‖w‖².
    pub game_cost: f64,
    /// The failure condition fired; the transition is terminal for bootstrapping.
    pub failed: bool,
    /// The episode is over (failure or time limit).
    pub done: bool,
}

/// Common interface the learner and the harness drive.
pub trait Environment: Send {
    fn obs_dim(&self) -> usize;
    fn user_box(&self) -> ActionBox;
    fn disturbance_dim(&self) -> usize;
    /// Disturbance penalty weight used for the game cost.
    fn eta(&self) -> f64;
    fn max_episode_steps(&self) -> usize;
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn observation(&self) -> Vec<f64>;
    /// Physical state for logging (13 values for the quadrotor, n for the LQ game).
    fn raw_state(&self) -> Vec<f64>;
    fn step(&mut self, u: &[f64], w: &[f64]) -> Result<StepOutcome, EnvError>;
    /// Complete dynamic state as a flat vector, for checkpoints.
    fn snapshot(&self) -> Vec<f64>;
    fn restore(&mut self, data: &[f64]) -> Result<(), EnvError>;
}

/// Serializable environment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Quadrotor(QuadrotorEnvSpec),
    Lq(LqEnvSpec),
}

impl EnvSpec {
    /// Builds the environment. `eta` weights the quadrotor's disturbance penalty;
    /// the LQ game carries its own η.
    pub fn build(&self, eta: f64) -> Result<Box<dyn Environment>, EnvError> {
        Ok(match self {
            EnvSpec::Quadrotor(s) => Box::new(QuadrotorEnv::new(s.clone(), eta)?),
            EnvSpec::Lq(s) => Box::new(LqEnv::new(s.clone())?),
        })
    }

    pub fn validate(&self) -> Vec<String> {
        match self {
            EnvSpec::Quadrotor(s) => s.validate(),
            EnvSpec::Lq(s) => s.validate(),
        }
    }
}
