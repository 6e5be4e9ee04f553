//! Linear-quadratic zero-sum game: `x' = Ax + Bu + Dw`, stage cost
//! `xᵀQx + uᵀRu - η²wᵀw` charged on the pre-transition state.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ActionBox, EnvError, Environment, StepOutcome};
use crate::linalg::Matrix;
use crate::rng::rng_from_seed;
use crate::scalar::{dot, Scalar};

/// Tolerance on symmetry and on the smallest eigenvalue of Q when checking PSD.
const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct LqGameSpec<T: Scalar> {
    #[serde(rename = "a_matrix", alias = "a")]
    pub a: Matrix<T>,
    #[serde(rename = "b_matrix", alias = "b")]
    pub b: Matrix<T>,
    #[serde(rename = "d_matrix", alias = "d")]
    pub d: Matrix<T>,
    #[serde(rename = "q_matrix", alias = "q")]
    pub q: Matrix<T>,
    #[serde(rename = "r_matrix", alias = "r")]
    pub r: Matrix<T>,
    pub eta: T,
    pub gamma: T,
    #[serde(default = "T::one")]
    pub init_state_scale: T,
}

impl<T: Scalar> LqGameSpec<T> {
    /// Checked constructor.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: Matrix<T>,
        b: Matrix<T>,
        d: Matrix<T>,
        q: Matrix<T>,
        r: Matrix<T>,
        eta: T,
        gamma: T,
        init_state_scale: T,
    ) -> Result<Self, EnvError> {
        let spec = Self { a, b, d, q, r, eta, gamma, init_state_scale };
        let errs = spec.validate();
        if errs.is_empty() {
            Ok(spec)
        } else {
            Err(EnvError::Invalid(errs.join("; ")))
        }
    }

    /// One-dimensional game with `init_state_scale = 1`.
    pub fn scalar(a: T, b: T, d: T, q: T, r: T, eta: T, gamma: T) -> Result<Self, EnvError> {
        Self::new(
            Matrix::scalar(a),
            Matrix::scalar(b),
            Matrix::scalar(d),
            Matrix::scalar(q),
            Matrix::scalar(r),
            eta,
            gamma,
            T::one(),
        )
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn user_dim(&self) -> usize {
        self.b.cols()
    }

    pub fn disturbance_dim(&self) -> usize {
        self.d.cols()
    }

    /// Every violated invariant, as readable messages.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let n = self.a.rows();
        let shape_checks = [
            ("a_matrix", self.a.shape(), (n, n)),
            ("b_matrix", (self.b.rows(), 0), (n, 0)),
            ("d_matrix", (self.d.rows(), 0), (n, 0)),
            ("q_matrix", self.q.shape(), (n, n)),
            ("r_matrix", self.r.shape(), (self.b.cols(), self.b.cols())),
        ];
        for (name, found, expected) in shape_checks {
            if found != expected {
                errs.push(format!("{name} has shape {found:?}, expected {expected:?}"));
            }
        }
        if n == 0 || self.b.cols() == 0 || self.d.cols() == 0 {
            errs.push("state, user and disturbance dimensions must be >= 1".into());
        }
        if !errs.is_empty() {
            return errs;
        }
        let tol = T::lit(SYMMETRY_TOL);
        if self.q.asymmetry() > tol {
            errs.push("q_matrix must be symmetric".into());
        } else if let Ok(min) = self.q.min_symmetric_eigenvalue() {
            if min < -tol * (T::one() + self.q.max_abs()) {
                errs.push(format!("q_matrix must be positive semidefinite (min eigenvalue {min})"));
            }
        }
        if self.r.asymmetry() > tol {
            errs.push("r_matrix must be symmetric".into());
        } else if let Ok(min) = self.r.min_symmetric_eigenvalue() {
            if !(min > T::zero()) {
                errs.push(format!("r_matrix must be positive definite (min eigenvalue {min})"));
            }
        }
        if !(self.eta > T::zero() && self.eta.is_finite()) {
            errs.push(format!("eta must be > 0, got {}", self.eta));
        }
        if !(self.gamma > T::zero() && self.gamma <= T::one()) {
            errs.push(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(self.init_state_scale >= T::zero() && self.init_state_scale.is_finite()) {
            errs.push(format!("init_state_scale must be >= 0, got {}", self.init_state_scale));
        }
        errs
    }

    /// `xᵀQx + uᵀRu - η²wᵀw`.
    pub fn stage_cost(&self, x: &[T], u: &[T], w: &[T]) -> T {
        self.user_stage_cost(x, u) - self.eta * self.eta * dot(w, w)
    }

    /// `xᵀQx + uᵀRu`.
    pub fn user_stage_cost(&self, x: &[T], u: &[T]) -> T {
        quad(&self.q, x) + quad(&self.r, u)
    }
}

fn quad<T: Scalar>(m: &Matrix<T>, v: &[T]) -> T {
    m.quadratic_form(v).expect("dimensions checked by caller")
}

/// `x₀` uniform in `[-init_state_scale, init_state_scale]ⁿ`.
pub fn lq_reset<T: Scalar>(spec: &LqGameSpec<T>, seed: u64) -> Vec<T> {
    let mut rng = rng_from_seed(seed);
    let s = spec.init_state_scale.as_f64();
    (0..spec.state_dim())
        .map(|_| if s > 0.0 { T::lit(rng.gen_range(-s..=s)) } else { T::zero() })
        .collect()
}

/// `(Ax + Bu + Dw, xᵀQx + uᵀRu - η²wᵀw)`.
pub fn lq_step<T: Scalar>(x: &[T], u: &[T], w: &[T], spec: &LqGameSpec<T>) -> Result<(Vec<T>, T), EnvError> {
    check_len("state", x, spec.state_dim())?;
    check_len("user action", u, spec.user_dim())?;
    check_len("disturbance", w, spec.disturbance_dim())?;
    let ax = spec.a.matvec(x).expect("checked");
    let bu = spec.b.matvec(u).expect("checked");
    let dw = spec.d.matvec(w).expect("checked");
    let next = (0..x.len()).map(|i| ax[i] + bu[i] + dw[i]).collect();
    Ok((next, spec.stage_cost(x, u, w)))
}

fn check_len<T>(what: &'static str, v: &[T], expected: usize) -> Result<(), EnvError> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(EnvError::Dimension { what, expected, found: v.len() })
    }
}

fn default_u_bound() -> f64 {
    2.0
}

fn default_episode_steps() -> usize {
    100
}

/// Environment description for the linear-quadratic game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqEnvSpec {
    pub game: LqGameSpec<f64>,
    /// User actions live in `[-u_bound, u_bound]^m`.
    #[serde(default = "default_u_bound")]
    pub u_bound: f64,
    /// Episodes are truncated (not terminated) after this many steps.
    #[serde(default = "default_episode_steps")]
    pub episode_steps: usize,
    /// Start every episode here instead of sampling.
    #[serde(default)]
    pub fixed_initial_state: Option<Vec<f64>>,
}

impl LqEnvSpec {
    pub fn new(game: LqGameSpec<f64>) -> Self {
        Self { game, u_bound: default_u_bound(), episode_steps: default_episode_steps(), fixed_initial_state: None }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = self.game.validate();
        if !(self.u_bound > 0.0 && self.u_bound.is_finite()) {
            errs.push(format!("u_bound must be > 0, got {}", self.u_bound));
        }
        if self.episode_steps < 1 {
            errs.push("episode_steps must be >= 1".into());
        }
        if let Some(x0) = &self.fixed_initial_state {
            if x0.len() != self.game.state_dim() {
                errs.push(format!(
                    "fixed_initial_state has length {}, expected {}",
                    x0.len(),
                    self.game.state_dim()
                ));
            }
        }
        errs
    }
}

/// The LQ game as an episodic environment; the observation is the state itself.
#[derive(Debug, Clone)]
pub struct LqEnv {
    spec: LqEnvSpec,
    x: Vec<f64>,
    t: usize,
}

impl LqEnv {
    pub fn new(spec: LqEnvSpec) -> Result<Self, EnvError> {
        let errs = spec.validate();
        if !errs.is_empty() {
            return Err(EnvError::Invalid(errs.join("; ")));
        }
        let x = vec![0.0; spec.game.state_dim()];
        Ok(Self { spec, x, t: 0 })
    }

    pub fn spec(&self) -> &LqEnvSpec {
        &self.spec
    }

    /// Overrides the current state (e.g. to start from a chosen `x₀`).
    pub fn set_state(&mut self, x: &[f64]) -> Result<(), EnvError> {
        check_len("state", x, self.spec.game.state_dim())?;
        self.x = x.to_vec();
        self.t = 0;
        Ok(())
    }
}

impl Environment for LqEnv {
    fn obs_dim(&self) -> usize {
        self.spec.game.state_dim()
    }

    fn user_box(&self) -> ActionBox {
        let m = self.spec.game.user_dim();
        ActionBox { low: vec![-self.spec.u_bound; m], high: vec![self.spec.u_bound; m] }
    }

    fn disturbance_dim(&self) -> usize {
        self.spec.game.disturbance_dim()
    }

    fn eta(&self) -> f64 {
        self.spec.game.eta
    }

    fn max_episode_steps(&self) -> usize {
        self.spec.episode_steps
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.x = match &self.spec.fixed_initial_state {
            Some(x0) => x0.clone(),
            None => lq_reset(&self.spec.game, seed),
        };
        self.t = 0;
        self.x.clone()
    }

    fn observation(&self) -> Vec<f64> {
        self.x.clone()
    }

    fn raw_state(&self) -> Vec<f64> {
        self.x.clone()
    }

    fn step(&mut self, u: &[f64], w: &[f64]) -> Result<StepOutcome, EnvError> {
        let (next, game_cost) = lq_step(&self.x, u, w, &self.spec.game)?;
        let user_cost = self.spec.game.user_stage_cost(&self.x, u);
        self.t += 1;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(EnvError::NonFinite { step: self.t, detail: format!("state {next:?}") });
        }
        self.x = next;
        Ok(StepOutcome {
            obs: self.x.clone(),
            user_cost,
            game_cost,
            failed: false,
            done: self.t >= self.spec.episode_steps,
        })
    }

    fn snapshot(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        v.push(self.t as f64);
        v
    }

    fn restore(&mut self, data: &[f64]) -> Result<(), EnvError> {
        let n = self.spec.game.state_dim();
        if data.len() != n + 1 {
            return Err(EnvError::Dimension { what: "lq snapshot", expected: n + 1, found: data.len() });
        }
        self.x = data[..n].to_vec();
        self.t = data[n] as usize;
        Ok(())
    }
}
