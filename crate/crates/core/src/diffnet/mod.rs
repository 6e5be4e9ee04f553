//! Feed-forward networks with exact reverse-mode gradients, plus the optimizer
//! and soft-update primitives used by the learner.

mod mlp;
mod optim;

pub use mlp::{ForwardCache, HiddenActivation, Mlp, MlpSpec, OutputActivation};
pub use optim::{adam_step, AdamState, Optimizer, OptimizerKind, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiffnetError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("{what} has length {found}, expected {expected}")]
    Dimension { what: &'static str, expected: usize, found: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("{0}")]
    InvalidRate(String),
}

/// `rate·online + (1-rate)·target`, elementwise.
pub fn soft_update<T: Scalar>(target: &[T], online: &[T], rate: T) -> Result<Vec<T>, DiffnetError> {
    let mut out = target.to_vec();
    soft_update_in_place(&mut out, online, rate)?;
    Ok(out)
}

/// In-place form of [`soft_update`].
pub fn soft_update_in_place<T: Scalar>(target: &mut [T], online: &[T], rate: T) -> Result<(), DiffnetError> {
    if !(rate > T::zero() && rate <= T::one()) {
        return Err(DiffnetError::InvalidRate(format!("soft update rate must lie in (0, 1], got {rate}")));
    }
    if target.len() != online.len() {
        return Err(DiffnetError::Dimension { what: "online parameters", expected: target.len(), found: online.len() });
    }
    if rate == T::one() {
        target.copy_from_slice(online);
        return Ok(());
    }
    let keep = T::one() - rate;
    for (t, &o) in target.iter_mut().zip(online) {
        *t = rate * o + keep * *t;
    }
    Ok(())
}
