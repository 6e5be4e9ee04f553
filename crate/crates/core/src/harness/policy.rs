use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::HarnessError;
use crate::agent::RddpgAgent;
use crate::linalg::Matrix;

/// A user controller and an adversary, both acting in environment units.
pub trait PolicyPair: Sync {
    fn user_action(&self, obs: &[f64]) -> Result<Vec<f64>, HarnessError>;

    /// The adversary's action, perturbed by `exploration`-scaled Gaussian noise.
    /// Only consulted in the adversary-policy disturbance mode.
    fn adversary_action(&self, obs: &[f64], exploration: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, HarnessError>;
}

/// Deterministic actors of a trained agent. Adversary exploration is in
/// normalized units and clipped to the disturbance box.
impl PolicyPair for RddpgAgent {
    fn user_action(&self, obs: &[f64]) -> Result<Vec<f64>, HarnessError> {
        Ok(self.dims.user_box.from_normalized(&self.user_policy_normalized(obs)?))
    }

    fn adversary_action(&self, obs: &[f64], exploration: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, HarnessError> {
        let mut w = self.adversary_policy_normalized(obs)?;
        if exploration > 0.0 && self.config.adversary_enabled {
            for x in w.iter_mut() {
                *x = (*x + exploration * rng.sample::<f64, _>(StandardNormal)).clamp(-1.0, 1.0);
            }
        }
        Ok(self.w_box().from_normalized(&w))
    }
}

/// `u = -Kx`, `w = Lx`, unclipped. Exploration noise has std `exploration · noise_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPolicy {
    pub k_gain: Matrix<f64>,
    pub l_gain: Matrix<f64>,
    pub noise_scale: f64,
}

impl PolicyPair for LinearPolicy {
    fn user_action(&self, obs: &[f64]) -> Result<Vec<f64>, HarnessError> {
        let kx = self.k_gain.matvec(obs).map_err(|e| HarnessError::Invalid(e.to_string()))?;
        Ok(kx.into_iter().map(|v| -v).collect())
    }

    fn adversary_action(&self, obs: &[f64], exploration: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, HarnessError> {
        let mut w = self.l_gain.matvec(obs).map_err(|e| HarnessError::Invalid(e.to_string()))?;
        if exploration > 0.0 {
            for x in w.iter_mut() {
                *x += exploration * self.noise_scale * rng.sample::<f64, _>(StandardNormal);
            }
        }
        Ok(w)
    }
}

/// Fixed actions regardless of the observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantPolicy {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
}

impl PolicyPair for ConstantPolicy {
    fn user_action(&self, _obs: &[f64]) -> Result<Vec<f64>, HarnessError> {
        Ok(self.u.clone())
    }

    fn adversary_action(&self, _obs: &[f64], _exploration: f64, _rng: &mut ChaCha8Rng) -> Result<Vec<f64>, HarnessError> {
        Ok(self.w.clone())
    }
}
