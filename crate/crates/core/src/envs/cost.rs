use serde::{Deserialize, Serialize};

/// Position error (m) at which tracking counts as failed.
pub const FAILURE_DISTANCE: f64 = 5.0;

/// Scaling factors of the tracking cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostCoefficients {
    /// Position error weight.
    pub alpha: f64,
    /// Velocity error weight.
    pub beta: f64,
    /// Attitude weight.
    pub epsilon: f64,
    /// Failure penalty.
    pub zeta: f64,
}

impl Default for CostCoefficients {
    fn default() -> Self {
        Self { alpha: 10.0, beta: 1.0, epsilon: 1.0, zeta: 1000.0 }
    }
}

impl CostCoefficients {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("epsilon", self.epsilon), ("zeta", self.zeta)] {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("cost.{name} must be positive, got {v}"));
            }
        }
        errs
    }
}

fn norm_sq(v: &[f64; 3]) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

/// ‖e_p‖ ≥ 5 m, or roll or pitch magnitude at least π/2.
pub fn tracking_failed(e_p: &[f64; 3], euler: &[f64; 3]) -> bool {
    let half_pi = std::f64::consts::FRAC_PI_2;
    norm_sq(e_p).sqrt() >= FAILURE_DISTANCE || euler[0].abs() >= half_pi || euler[1].abs() >= half_pi
}

/// c̃ = α‖e_p‖² + β‖e_v‖² + ε‖ρ‖² + (ζ if failed).
pub fn user_cost(
    e_p: &[f64; 3],
    e_v: &[f64; 3],
    euler: &[f64; 3],
    failed: bool,
    coeffs: &CostCoefficients,
) -> f64 {
    let penalty = if failed { coeffs.zeta } else { 0.0 };
    coeffs.alpha * norm_sq(e_p) + coeffs.beta * norm_sq(e_v) + coeffs.epsilon * norm_sq(euler) + penalty
}

/// c = c̃ - η²‖w‖².
pub fn game_cost(user_cost: f64, w: &[f64], eta: f64) -> f64 {
    let energy: f64 = w.iter().map(|x| x * x).sum();
    user_cost - eta * eta * energy
}

#[cfg(test)]
mod tests {
    use super::*;

    const Z: [f64; 3] = [0.0; 3];

    #[test]
    fn unit_position_error_costs_alpha() {
        let c = CostCoefficients::default();
        assert_eq!(user_cost(&[1.0, 0.0, 0.0], &Z, &Z, false, &c), 10.0);
        assert_eq!(user_cost(&Z, &Z, &Z, false, &c), 0.0);
    }

    #[test]
    fn far_error_triggers_penalty() {
        let c = CostCoefficients::default();
        let e_p = [6.0, 0.0, 0.0];
        let failed = tracking_failed(&e_p, &Z);
        assert!(failed);
        assert_eq!(user_cost(&e_p, &Z, &Z, failed, &c), 1360.0);
        assert!(tracking_failed(&Z, &[0.0, -std::f64::consts::FRAC_PI_2, 0.0]));
        assert!(!tracking_failed(&[4.99, 0.0, 0.0], &[1.0, 1.0, 3.0]));
    }

    #[test]
    fn game_cost_examples() {
        assert!((game_cost(10.0, &[0.1, 0.0, 0.0], 10.0) - 9.0).abs() < 1e-12);
        assert_eq!(game_cost(7.25, &[0.0, 0.0, 0.0], 10.0), 7.25);
        assert!((game_cost(0.0, &[0.1, 0.1, 0.1], 10.0) + 3.0).abs() < 1e-12);
    }

    #[test]
    fn coefficients_must_be_positive() {
        let c = CostCoefficients { beta: 0.0, zeta: -1.0, ..Default::default() };
        assert_eq!(c.validate().len(), 2);
    }
}
