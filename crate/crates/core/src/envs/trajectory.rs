use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Hover,
    Circle,
    Helix,
    Lemniscate,
}

/// Reference trajectory, parameterized in closed form.
///
/// With `t = time_index · control_dt`, `θ = angular_rate · t` and center `c`:
/// - hover: `c`
/// - circle: `c + radius·(cos θ, sin θ, 0)`
/// - helix: circle plus `climb_rate·t` along z
/// - lemniscate (Gerono): `c + radius·(sin θ, sin θ cos θ, 0)`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    pub center: [f64; 3],
    #[serde(default)]
    pub radius: f64,
    #[serde(default)]
    pub angular_rate: f64,
    #[serde(default)]
    pub climb_rate: f64,
    pub duration_steps: usize,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self::hover([0.0, 0.0, 1.0], 480)
    }
}

impl TrajectorySpec {
    pub fn hover(center: [f64; 3], duration_steps: usize) -> Self {
        Self { kind: TrajectoryKind::Hover, center, radius: 0.0, angular_rate: 0.0, climb_rate: 0.0, duration_steps }
    }

    pub fn circle(center: [f64; 3], radius: f64, angular_rate: f64, duration_steps: usize) -> Self {
        Self { kind: TrajectoryKind::Circle, center, radius, angular_rate, climb_rate: 0.0, duration_steps }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            errs.push(format!("trajectory.radius must be >= 0, got {}", self.radius));
        }
        if self.duration_steps < 1 {
            errs.push("trajectory.duration_steps must be >= 1".into());
        }
        if !(self.angular_rate.is_finite() && self.climb_rate.is_finite() && self.center.iter().all(|c| c.is_finite())) {
            errs.push("trajectory parameters must be finite".into());
        }
        errs
    }
}

/// Target position and its exact time derivative at `t = time_index · control_dt`.
pub fn trajectory_ref(traj: &TrajectorySpec, time_index: usize, control_dt: f64) -> ([f64; 3], [f64; 3]) {
    position_velocity_at(traj, time_index as f64 * control_dt)
}

/// Same as [`trajectory_ref`] at a continuous time `t` (seconds).
pub fn position_velocity_at(traj: &TrajectorySpec, t: f64) -> ([f64; 3], [f64; 3]) {
    let c = traj.center;
    let (r, w) = (traj.radius, traj.angular_rate);
    let th = w * t;
    match traj.kind {
        TrajectoryKind::Hover => (c, [0.0; 3]),
        TrajectoryKind::Circle | TrajectoryKind::Helix => {
            let climb = if traj.kind == TrajectoryKind::Helix { traj.climb_rate } else { 0.0 };
            (
                [c[0] + r * th.cos(), c[1] + r * th.sin(), c[2] + climb * t],
                [-r * w * th.sin(), r * w * th.cos(), climb],
            )
        }
        TrajectoryKind::Lemniscate => (
            [c[0] + r * th.sin(), c[1] + r * th.sin() * th.cos(), c[2]],
            [r * w * th.cos(), r * w * (2.0 * th).cos(), 0.0],
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hover_is_constant() {
        let t = TrajectorySpec::hover([0.0, 0.0, 1.0], 10);
        for k in [0, 3, 10] {
            assert_eq!(trajectory_ref(&t, k, 1.0 / 48.0), ([0.0, 0.0, 1.0], [0.0; 3]));
        }
    }

    #[test]
    fn circle_starts_on_positive_x_axis() {
        let t = TrajectorySpec::circle([1.0, 2.0, 3.0], 1.0, 0.7, 100);
        let (p, v) = trajectory_ref(&t, 0, 1.0 / 48.0);
        assert_eq!(p, [2.0, 2.0, 3.0]);
        assert_eq!(v, [0.0, 0.7, 0.0]);
    }

    #[test]
    fn validation_catches_bad_fields() {
        let mut t = TrajectorySpec::circle([0.0; 3], -1.0, 1.0, 0);
        assert_eq!(t.validate().len(), 2);
        t.radius = 1.0;
        t.duration_steps = 5;
        assert!(t.validate().is_empty());
    }
}
