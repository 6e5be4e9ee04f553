use serde::{Deserialize, Serialize};

use super::DiffnetError;
use crate::scalar::Scalar;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Moment estimates for Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub first_moment: Vec<T>,
    pub second_moment: Vec<T>,
    pub step_count: u64,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Scalar> AdamState<T> {
    /// Fresh state with the default coefficients (0.9, 0.999, 1e-8).
    pub fn new(len: usize) -> Self {
        Self {
            first_moment: vec![T::zero(); len],
            second_moment: vec![T::zero(); len],
            step_count: 0,
            beta1: T::lit(ADAM_BETA1),
            beta2: T::lit(ADAM_BETA2),
            epsilon: T::lit(ADAM_EPSILON),
        }
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }

    /// One bias-corrected Adam step applied to `params` in place.
    pub fn step(&mut self, params: &mut [T], grad: &[T], lr: T) -> Result<(), DiffnetError> {
        check_step_args(params.len(), grad, lr, self.len())?;
        self.step_count += 1;
        let t = i32::try_from(self.step_count).unwrap_or(i32::MAX);
        let c1 = T::one() - self.beta1.powi(t);
        let c2 = T::one() - self.beta2.powi(t);
        let (b1, b2) = (self.beta1, self.beta2);
        for i in 0..params.len() {
            let g = grad[i];
            let m = b1 * self.first_moment[i] + (T::one() - b1) * g;
            let v = b2 * self.second_moment[i] + (T::one() - b2) * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            let m_hat = m / c1;
            let v_hat = v / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

fn check_step_args<T: Scalar>(n: usize, grad: &[T], lr: T, state_len: usize) -> Result<(), DiffnetError> {
    if grad.len() != n {
        return Err(DiffnetError::Dimension { what: "gradient", expected: n, found: grad.len() });
    }
    if state_len != n {
        return Err(DiffnetError::Dimension { what: "optimizer state", expected: n, found: state_len });
    }
    if !(lr > T::zero()) {
        return Err(DiffnetError::InvalidRate(format!("learning rate must be > 0, got {lr}")));
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(DiffnetError::NonFinite(format!("gradient entry {i} is {}", grad[i])));
    }
    Ok(())
}

/// Functional form: returns the updated parameters and state, leaving the inputs untouched.
pub fn adam_step<T: Scalar>(
    params: &[T],
    grad: &[T],
    lr: T,
    state: &AdamState<T>,
) -> Result<(Vec<T>, AdamState<T>), DiffnetError> {
    let mut p = params.to_vec();
    let mut s = state.clone();
    s.step(&mut p, grad, lr)?;
    Ok((p, s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

/// Gradient-descent optimizer attached to one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer<T> {
    Adam(AdamState<T>),
    /// Plain SGD; tracks only the number of steps taken.
    Sgd { step_count: u64 },
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, len: usize) -> Self {
        match kind {
            OptimizerKind::Adam => Optimizer::Adam(AdamState::new(len)),
            OptimizerKind::Sgd => Optimizer::Sgd { step_count: 0 },
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        match self {
            Optimizer::Adam(_) => OptimizerKind::Adam,
            Optimizer::Sgd { .. } => OptimizerKind::Sgd,
        }
    }

    pub fn step_count(&self) -> u64 {
        match self {
            Optimizer::Adam(s) => s.step_count,
            Optimizer::Sgd { step_count } => *step_count,
        }
    }

    /// Descent step: moves `params` against `grad`.
    pub fn step(&mut self, params: &mut [T], grad: &[T], lr: T) -> Result<(), DiffnetError> {
        match self {
            Optimizer::Adam(s) => s.step(params, grad, lr),
            Optimizer::Sgd { step_count } => {
                check_step_args(params.len(), grad, lr, params.len())?;
                *step_count += 1;
                for (p, &g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let state = AdamState::<f64>::new(3);
        let (p, s) = adam_step(&[1.0, -2.0, 0.5], &[0.0; 3], 1e-3, &state).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(s.first_moment, vec![0.0; 3]);
        assert_eq!(s.second_moment, vec![0.0; 3]);
        assert_eq!(s.step_count, 1);
    }

    #[test]
    fn first_step_moves_each_coordinate_by_about_lr() {
        // m̂ = g, v̂ = g², so the step is lr·g/(|g| + ε).
        let lr: f64 = 0.01;
        let g: [f64; 3] = [3.0, -0.5, 1e-3];
        let (p, _) = adam_step(&[0.0; 3], &g, lr, &AdamState::new(3)).unwrap();
        for (pi, gi) in p.iter().zip(g) {
            let expected = -lr * gi / (gi.abs() + ADAM_EPSILON);
            assert!((pi - expected).abs() < 1e-15, "{pi} vs {expected}");
            assert!((pi.abs() - lr).abs() < 1e-6);
        }
    }

    #[test]
    fn repeated_calls_are_deterministic() {
        let s = AdamState::<f64>::new(2);
        let a = adam_step(&[1.0, 2.0], &[0.3, -0.7], 0.1, &s).unwrap();
        let b = adam_step(&[1.0, 2.0], &[0.3, -0.7], 0.1, &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_non_finite_and_bad_rates() {
        let s = AdamState::<f64>::new(1);
        assert!(matches!(adam_step(&[0.0], &[f64::NAN], 0.1, &s), Err(DiffnetError::NonFinite(_))));
        assert!(matches!(adam_step(&[0.0], &[1.0], 0.0, &s), Err(DiffnetError::InvalidRate(_))));
        assert!(matches!(adam_step(&[0.0, 1.0], &[1.0], 0.1, &s), Err(DiffnetError::Dimension { .. })));
    }

    #[test]
    fn sgd_is_plain_gradient_descent() {
        let mut opt = Optimizer::<f64>::new(OptimizerKind::Sgd, 2);
        let mut p = vec![1.0, 1.0];
        opt.step(&mut p, &[2.0, -4.0], 0.25).unwrap();
        assert_eq!(p, vec![0.5, 2.0]);
        assert_eq!(opt.step_count(), 1);
    }
}
