//! Rigid-body quadrotor in an X configuration with per-rotor thrust, body-frame
//! disturbance forces and semi-implicit Euler integration.
//!
//! Rotor layout (body frame, x forward, y left, z up), arm length `l`, `a = l/√2`:
//!
//! | rotor | position  | spin sign for yaw torque |
//! |-------|-----------|--------------------------|
//! | 1     | (+a, +a)  | -                        |
//! | 2     | (-a, +a)  | +                        |
//! | 3     | (-a, -a)  | -                        |
//! | 4     | (+a, -a)  | +                        |
//!
//! Rotors 1 and 3 spin opposite to rotors 2 and 4.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cost::{game_cost, tracking_failed, user_cost, CostCoefficients};
use super::trajectory::{trajectory_ref, TrajectorySpec};
use super::{ActionBox, EnvError, Environment, StepOutcome};
use crate::rng::rng_from_seed;

/// Values per observation frame: e_p (3), e_v (3), quaternion (4), angular velocity (3).
pub const FRAME_DIM: usize = 13;
/// Number of stacked frames in an observation.
pub const STACK_DEPTH: usize = 4;
/// Uniform per-axis reset perturbation (m) around the trajectory start.
pub const RESET_PERTURBATION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadrotorParams {
    pub mass: f64,
    pub arm_length: f64,
    /// Thrust per rotor is `k_f · rpm²` (N).
    pub k_f: f64,
    /// Reaction torque per rotor is `k_m · rpm²` (N·m).
    pub k_m: f64,
    pub inertia_xx: f64,
    pub inertia_yy: f64,
    pub inertia_zz: f64,
    pub drag_xy: f64,
    pub drag_z: f64,
    pub gravity: f64,
    pub physics_dt: f64,
    pub control_dt: f64,
    pub rpm_max: f64,
}

impl Default for QuadrotorParams {
    /// Crazyflie 2.0.
    fn default() -> Self {
        Self {
            mass: 0.027,
            arm_length: 0.0397,
            k_f: 3.16e-10,
            k_m: 7.94e-12,
            inertia_xx: 1.4e-3,
            inertia_yy: 1.4e-3,
            inertia_zz: 2.17e-3,
            drag_xy: 9.18e-7,
            drag_z: 10.31e-7,
            gravity: 9.81,
            physics_dt: 1.0 / 240.0,
            control_dt: 1.0 / 48.0,
            rpm_max: 21713.714,
        }
    }
}

impl QuadrotorParams {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let fields = [
            ("mass", self.mass),
            ("arm_length", self.arm_length),
            ("k_f", self.k_f),
            ("k_m", self.k_m),
            ("inertia_xx", self.inertia_xx),
            ("inertia_yy", self.inertia_yy),
            ("inertia_zz", self.inertia_zz),
            ("drag_xy", self.drag_xy),
            ("drag_z", self.drag_z),
            ("gravity", self.gravity),
            ("physics_dt", self.physics_dt),
            ("control_dt", self.control_dt),
            ("rpm_max", self.rpm_max),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("params.{name} must be strictly positive, got {v}"));
            }
        }
        if self.physics_dt > 0.0 && self.control_dt > 0.0 {
            let ratio = self.control_dt / self.physics_dt;
            if ratio < 0.5 || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
                errs.push(format!(
                    "params.control_dt ({}) must be an integer multiple of params.physics_dt ({})",
                    self.control_dt, self.physics_dt
                ));
            }
        }
        errs
    }

    /// Physics substeps per control step.
    pub fn substeps(&self) -> usize {
        (self.control_dt / self.physics_dt).round() as usize
    }
}

/// Per-rotor speed that balances gravity: `√(m·g / (4·k_f))`.
pub fn hover_rpm(params: &QuadrotorParams) -> f64 {
    (params.mass * params.gravity / (4.0 * params.k_f)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrotorState {
    pub position: [f64; 3],
    /// World frame.
    pub velocity: [f64; 3],
    /// Unit quaternion `(w, x, y, z)`, body to world.
    pub quaternion: [f64; 4],
    /// Body frame.
    pub angular_velocity: [f64; 3],
    pub time_index: usize,
}

impl QuadrotorState {
    pub fn at_rest(position: [f64; 3]) -> Self {
        Self {
            position,
            velocity: [0.0; 3],
            quaternion: [1.0, 0.0, 0.0, 0.0],
            angular_velocity: [0.0; 3],
            time_index: 0,
        }
    }

    /// Roll, pitch, yaw (Z-Y-X convention).
    pub fn euler_angles(&self) -> [f64; 3] {
        quat_to_euler(&self.quaternion)
    }

    /// position, velocity, quaternion, angular velocity.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(13);
        v.extend_from_slice(&self.position);
        v.extend_from_slice(&self.velocity);
        v.extend_from_slice(&self.quaternion);
        v.extend_from_slice(&self.angular_velocity);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|x| x.is_finite())
    }

    pub fn kinetic_energy(&self, params: &QuadrotorParams) -> f64 {
        let v = &self.velocity;
        let w = &self.angular_velocity;
        0.5 * params.mass * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
            + 0.5 * (params.inertia_xx * w[0] * w[0] + params.inertia_yy * w[1] * w[1] + params.inertia_zz * w[2] * w[2])
    }
}

/// The last four per-step feature frames, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedObservation {
    pub frames: [[f64; FRAME_DIM]; STACK_DEPTH],
}

impl StackedObservation {
    pub fn filled(frame: [f64; FRAME_DIM]) -> Self {
        Self { frames: [frame; STACK_DEPTH] }
    }

    pub fn push(&mut self, frame: [f64; FRAME_DIM]) {
        self.frames.rotate_left(1);
        self.frames[STACK_DEPTH - 1] = frame;
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.frames.iter().flatten().copied().collect()
    }
}

/// `[e_p, e_v, q, ω]` against the trajectory target at the state's time index.
pub fn observation_frame(state: &QuadrotorState, traj: &TrajectorySpec, params: &QuadrotorParams) -> [f64; FRAME_DIM] {
    let (e_p, e_v) = tracking_errors(state, traj, params);
    let mut f = [0.0; FRAME_DIM];
    f[0..3].copy_from_slice(&e_p);
    f[3..6].copy_from_slice(&e_v);
    f[6..10].copy_from_slice(&state.quaternion);
    f[10..13].copy_from_slice(&state.angular_velocity);
    f
}

/// `(p_target - p, v_target - v)`.
pub fn tracking_errors(state: &QuadrotorState, traj: &TrajectorySpec, params: &QuadrotorParams) -> ([f64; 3], [f64; 3]) {
    let (p_t, v_t) = trajectory_ref(traj, state.time_index, params.control_dt);
    let e_p = std::array::from_fn(|i| p_t[i] - state.position[i]);
    let e_v = std::array::from_fn(|i| v_t[i] - state.velocity[i]);
    (e_p, e_v)
}

/// Reset with the default ±0.1 m perturbation.
pub fn quad_reset(params: &QuadrotorParams, traj: &TrajectorySpec, seed: u64) -> (QuadrotorState, StackedObservation) {
    quad_reset_with(params, traj, seed, RESET_PERTURBATION)
}

/// Trajectory start plus a uniform per-axis offset in `[-perturbation, perturbation]`,
/// at rest with identity attitude.
pub fn quad_reset_with(
    params: &QuadrotorParams,
    traj: &TrajectorySpec,
    seed: u64,
    perturbation: f64,
) -> (QuadrotorState, StackedObservation) {
    let mut rng = rng_from_seed(seed);
    let (start, _) = trajectory_ref(traj, 0, params.control_dt);
    let position = std::array::from_fn(|i| {
        let offset = if perturbation > 0.0 { rng.gen_range(-perturbation..=perturbation) } else { 0.0 };
        start[i] + offset
    });
    let state = QuadrotorState::at_rest(position);
    let obs = StackedObservation::filled(observation_frame(&state, traj, params));
    (state, obs)
}

/// Outcome of one control step.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadStep {
    pub state: QuadrotorState,
    pub cost_user: f64,
    /// Episode over: failure or time limit reached.
    pub terminal: bool,
    /// The failure/penalty condition fired.
    pub failed: bool,
}

/// Integrates one control step (`control_dt / physics_dt` substeps) and scores the new state.
pub fn quad_step(
    state: &QuadrotorState,
    rpm: &[f64; 4],
    disturbance_force: &[f64; 3],
    params: &QuadrotorParams,
    traj: &TrajectorySpec,
    coeffs: &CostCoefficients,
) -> Result<QuadStep, EnvError> {
    for (i, &r) in rpm.iter().enumerate() {
        if !(r >= 0.0 && r <= params.rpm_max) {
            return Err(EnvError::ActionOutOfRange { index: i, value: r, low: 0.0, high: params.rpm_max });
        }
    }
    let mut next = state.clone();
    for _ in 0..params.substeps() {
        next = substep(&next, rpm, disturbance_force, params);
    }
    next.time_index += 1;
    if !next.is_finite() {
        return Err(EnvError::NonFinite { step: next.time_index, detail: format!("{next:?}") });
    }
    let (e_p, e_v) = tracking_errors(&next, traj, params);
    let euler = next.euler_angles();
    let failed = tracking_failed(&e_p, &euler);
    let cost_user = user_cost(&e_p, &e_v, &euler, failed, coeffs);
    let terminal = failed || next.time_index >= traj.duration_steps;
    Ok(QuadStep { state: next, cost_user, terminal, failed })
}

/// Collective thrust (N) and body torques (N·m) for the given rotor speeds.
pub fn rotor_wrench(rpm: &[f64; 4], params: &QuadrotorParams) -> (f64, [f64; 3]) {
    let f: [f64; 4] = std::array::from_fn(|i| params.k_f * rpm[i] * rpm[i]);
    let m: [f64; 4] = std::array::from_fn(|i| params.k_m * rpm[i] * rpm[i]);
    let a = params.arm_length / std::f64::consts::SQRT_2;
    let torque = [(f[0] + f[1] - f[2] - f[3]) * a, (-f[0] + f[1] + f[2] - f[3]) * a, -m[0] + m[1] - m[2] + m[3]];
    (f.iter().sum(), torque)
}

/// One semi-implicit Euler physics substep. The disturbance is a body-frame force
/// applied at the center of mass.
pub fn substep(state: &QuadrotorState, rpm: &[f64; 4], disturbance_body: &[f64; 3], params: &QuadrotorParams) -> QuadrotorState {
    let dt = params.physics_dt;
    let (thrust, torque) = rotor_wrench(rpm, params);
    let body_force = [disturbance_body[0], disturbance_body[1], thrust + disturbance_body[2]];
    let world = quat_rotate(&state.quaternion, &body_force);
    let v = state.velocity;
    let drag = [-params.drag_xy * v[0], -params.drag_xy * v[1], -params.drag_z * v[2]];
    let accel = [
        (world[0] + drag[0]) / params.mass,
        (world[1] + drag[1]) / params.mass,
        (world[2] + drag[2]) / params.mass - params.gravity,
    ];

    let inertia = [params.inertia_xx, params.inertia_yy, params.inertia_zz];
    let w = state.angular_velocity;
    let iw = [inertia[0] * w[0], inertia[1] * w[1], inertia[2] * w[2]];
    let gyro = cross(&w, &iw);
    let alpha: [f64; 3] = std::array::from_fn(|i| (torque[i] - gyro[i]) / inertia[i]);

    let velocity: [f64; 3] = std::array::from_fn(|i| v[i] + accel[i] * dt);
    let position: [f64; 3] = std::array::from_fn(|i| state.position[i] + velocity[i] * dt);
    let angular_velocity: [f64; 3] = std::array::from_fn(|i| w[i] + alpha[i] * dt);

    let q = state.quaternion;
    let omega_q = [0.0, angular_velocity[0], angular_velocity[1], angular_velocity[2]];
    let qdot = quat_mul(&q, &omega_q);
    let mut quaternion: [f64; 4] = std::array::from_fn(|i| q[i] + 0.5 * qdot[i] * dt);
    normalize_quat(&mut quaternion);

    QuadrotorState { position, velocity, quaternion, angular_velocity, time_index: state.time_index }
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Hamilton product.
pub fn quat_mul(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

fn normalize_quat(q: &mut [f64; 4]) {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    for x in q.iter_mut() {
        *x /= n;
    }
}

/// Rotates a body-frame vector into the world frame.
pub fn quat_rotate(q: &[f64; 4], v: &[f64; 3]) -> [f64; 3] {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    [
        (1.0 - 2.0 * (y * y + z * z)) * v[0] + 2.0 * (x * y - w * z) * v[1] + 2.0 * (x * z + w * y) * v[2],
        2.0 * (x * y + w * z) * v[0] + (1.0 - 2.0 * (x * x + z * z)) * v[1] + 2.0 * (y * z - w * x) * v[2],
        2.0 * (x * z - w * y) * v[0] + 2.0 * (y * z + w * x) * v[1] + (1.0 - 2.0 * (x * x + y * y)) * v[2],
    ]
}

/// Roll, pitch, yaw in the Z-Y-X convention.
pub fn quat_to_euler(q: &[f64; 4]) -> [f64; 3] {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
    let pitch = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0).asin();
    let yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
    [roll, pitch, yaw]
}

/// Environment description for quadrotor tracking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadrotorEnvSpec {
    #[serde(default)]
    pub params: QuadrotorParams,
    #[serde(default)]
    pub trajectory: TrajectorySpec,
    #[serde(default)]
    pub cost: CostCoefficients,
    #[serde(default = "default_perturbation")]
    pub reset_perturbation: f64,
}

fn default_perturbation() -> f64 {
    RESET_PERTURBATION
}

impl Default for QuadrotorEnvSpec {
    fn default() -> Self {
        Self {
            params: QuadrotorParams::default(),
            trajectory: TrajectorySpec::default(),
            cost: CostCoefficients::default(),
            reset_perturbation: RESET_PERTURBATION,
        }
    }
}

impl QuadrotorEnvSpec {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = self.params.validate();
        errs.extend(self.trajectory.validate());
        errs.extend(self.cost.validate());
        if !(self.reset_perturbation >= 0.0 && self.reset_perturbation.is_finite()) {
            errs.push(format!("reset_perturbation must be >= 0, got {}", self.reset_perturbation));
        }
        errs
    }
}

/// Tracking environment with stacked observations.
#[derive(Debug, Clone)]
pub struct QuadrotorEnv {
    spec: QuadrotorEnvSpec,
    eta: f64,
    state: QuadrotorState,
    frames: StackedObservation,
}

impl QuadrotorEnv {
    pub fn new(spec: QuadrotorEnvSpec, eta: f64) -> Result<Self, EnvError> {
        let errs = spec.validate();
        if !errs.is_empty() {
            return Err(EnvError::Invalid(errs.join("; ")));
        }
        if !(eta > 0.0) {
            return Err(EnvError::Invalid(format!("eta must be > 0, got {eta}")));
        }
        let (state, frames) = quad_reset_with(&spec.params, &spec.trajectory, 0, 0.0);
        Ok(Self { spec, eta, state, frames })
    }

    pub fn spec(&self) -> &QuadrotorEnvSpec {
        &self.spec
    }

    pub fn state(&self) -> &QuadrotorState {
        &self.state
    }

    /// Places the vehicle in an arbitrary state and refills the frame stack from it.
    pub fn set_state(&mut self, state: QuadrotorState) {
        self.frames = StackedObservation::filled(observation_frame(&state, &self.spec.trajectory, &self.spec.params));
        self.state = state;
    }
}

impl Environment for QuadrotorEnv {
    fn obs_dim(&self) -> usize {
        FRAME_DIM * STACK_DEPTH
    }

    fn user_box(&self) -> ActionBox {
        ActionBox { low: vec![0.0; 4], high: vec![self.spec.params.rpm_max; 4] }
    }

    fn disturbance_dim(&self) -> usize {
        3
    }

    fn eta(&self) -> f64 {
        self.eta
    }

    fn max_episode_steps(&self) -> usize {
        self.spec.trajectory.duration_steps
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let (state, frames) =
            quad_reset_with(&self.spec.params, &self.spec.trajectory, seed, self.spec.reset_perturbation);
        self.state = state;
        self.frames = frames;
        self.frames.flatten()
    }

    fn observation(&self) -> Vec<f64> {
        self.frames.flatten()
    }

    fn raw_state(&self) -> Vec<f64> {
        self.state.to_vec()
    }

    fn step(&mut self, u: &[f64], w: &[f64]) -> Result<StepOutcome, EnvError> {
        let rpm: [f64; 4] = u.try_into().map_err(|_| EnvError::Dimension { what: "rpm", expected: 4, found: u.len() })?;
        let force: [f64; 3] =
            w.try_into().map_err(|_| EnvError::Dimension { what: "disturbance", expected: 3, found: w.len() })?;
        let out = quad_step(&self.state, &rpm, &force, &self.spec.params, &self.spec.trajectory, &self.spec.cost)?;
        self.state = out.state;
        self.frames.push(observation_frame(&self.state, &self.spec.trajectory, &self.spec.params));
        Ok(StepOutcome {
            obs: self.frames.flatten(),
            user_cost: out.cost_user,
            game_cost: game_cost(out.cost_user, w, self.eta),
            failed: out.failed,
            done: out.terminal,
        })
    }

    fn snapshot(&self) -> Vec<f64> {
        let mut v = self.state.to_vec();
        v.push(self.state.time_index as f64);
        v.extend(self.frames.flatten());
        v
    }

    fn restore(&mut self, data: &[f64]) -> Result<(), EnvError> {
        let expected = 14 + FRAME_DIM * STACK_DEPTH;
        if data.len() != expected {
            return Err(EnvError::Dimension { what: "quadrotor snapshot", expected, found: data.len() });
        }
        self.state = QuadrotorState {
            position: [data[0], data[1], data[2]],
            velocity: [data[3], data[4], data[5]],
            quaternion: [data[6], data[7], data[8], data[9]],
            angular_velocity: [data[10], data[11], data[12]],
            time_index: data[13] as usize,
        };
        for (k, frame) in self.frames.frames.iter_mut().enumerate() {
            frame.copy_from_slice(&data[14 + k * FRAME_DIM..14 + (k + 1) * FRAME_DIM]);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hover_setup() -> (QuadrotorParams, TrajectorySpec, CostCoefficients) {
        (QuadrotorParams::default(), TrajectorySpec::hover([0.0, 0.0, 1.0], 480), CostCoefficients::default())
    }

    #[test]
    fn hover_rpm_matches_thrust_balance() {
        let p = QuadrotorParams::default();
        let r = hover_rpm(&p);
        assert!((r - 1.4476e4).abs() < 1.0, "{r}");
        assert!((4.0 * p.k_f * r * r - p.mass * p.gravity).abs() < 1e-15);
    }

    #[test]
    fn hover_holds_altitude_for_one_control_step() {
        let (p, t, c) = hover_setup();
        let r = hover_rpm(&p);
        let s = QuadrotorState::at_rest([0.0, 0.0, 1.0]);
        let out = quad_step(&s, &[r; 4], &[0.0; 3], &p, &t, &c).unwrap();
        assert!(out.state.velocity[2].abs() < 1e-6);
        assert!(!out.terminal);
    }

    #[test]
    fn free_fall_single_substep() {
        let p = QuadrotorParams::default();
        let s = QuadrotorState::at_rest([0.0, 0.0, 1.0]);
        let next = substep(&s, &[0.0; 4], &[0.0; 3], &p);
        assert!((next.velocity[2] - (-9.81 / 240.0)).abs() < 1e-12);
        assert!((next.velocity[2] + 0.040875).abs() < 1e-12);
    }

    #[test]
    fn reset_is_seeded_and_bounded() {
        let (p, t, _) = hover_setup();
        assert_eq!(quad_reset(&p, &t, 5), quad_reset(&p, &t, 5));
        for seed in 0..1000 {
            let (s, obs) = quad_reset(&p, &t, seed);
            assert!((s.position[0]).abs() <= 0.1 && s.position[1].abs() <= 0.1 && (s.position[2] - 1.0).abs() <= 0.1);
            assert_eq!(s.velocity, [0.0; 3]);
            assert_eq!(s.quaternion, [1.0, 0.0, 0.0, 0.0]);
            assert!(obs.frames.iter().all(|f| *f == obs.frames[0]));
        }
    }

    #[test]
    fn out_of_range_rpm_rejected() {
        let (p, t, c) = hover_setup();
        let s = QuadrotorState::at_rest([0.0, 0.0, 1.0]);
        let err = quad_step(&s, &[0.0, -1.0, 0.0, 0.0], &[0.0; 3], &p, &t, &c).unwrap_err();
        assert!(matches!(err, EnvError::ActionOutOfRange { index: 1, .. }));
        assert!(quad_step(&s, &[p.rpm_max + 1.0, 0.0, 0.0, 0.0], &[0.0; 3], &p, &t, &c).is_err());
    }

    #[test]
    fn non_finite_state_aborts() {
        let (p, t, c) = hover_setup();
        let mut s = QuadrotorState::at_rest([0.0, 0.0, 1.0]);
        s.velocity[0] = f64::NAN;
        assert!(matches!(quad_step(&s, &[0.0; 4], &[0.0; 3], &p, &t, &c), Err(EnvError::NonFinite { .. })));
    }

    #[test]
    fn episode_ends_at_duration() {
        let (p, _, c) = hover_setup();
        let t = TrajectorySpec::hover([0.0, 0.0, 1.0], 2);
        let r = hover_rpm(&p);
        let s0 = QuadrotorState::at_rest([0.0, 0.0, 1.0]);
        let s1 = quad_step(&s0, &[r; 4], &[0.0; 3], &p, &t, &c).unwrap();
        assert!(!s1.terminal);
        let s2 = quad_step(&s1.state, &[r; 4], &[0.0; 3], &p, &t, &c).unwrap();
        assert!(s2.terminal && !s2.failed);
    }

    #[test]
    fn yaw_torque_signs_follow_spin_directions() {
        let p = QuadrotorParams::default();
        let (_, tau) = rotor_wrench(&[0.0, 1e4, 0.0, 1e4], &p);
        assert!(tau[2] > 0.0 && tau[0].abs() < 1e-18 && tau[1].abs() < 1e-18);
        let (_, tau) = rotor_wrench(&[1e4, 1e4, 0.0, 0.0], &p);
        assert!(tau[0] > 0.0);
    }

    #[test]
    fn euler_extraction_of_known_rotations() {
        let h = std::f64::consts::FRAC_PI_4;
        let roll = [h.cos(), h.sin(), 0.0, 0.0]; // 90° about x
        let e = quat_to_euler(&roll);
        assert!((e[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let yaw = [h.cos(), 0.0, 0.0, h.sin()];
        assert!((quat_to_euler(&yaw)[2] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn env_snapshot_restore_round_trip() {
        let mut env = QuadrotorEnv::new(QuadrotorEnvSpec::default(), 10.0).unwrap();
        env.reset(3);
        env.step(&[15000.0, 14000.0, 15000.0, 14500.0], &[0.05, 0.0, -0.02]).unwrap();
        let snap = env.snapshot();
        let next = env.step(&[14000.0; 4], &[0.0; 3]).unwrap();
        env.restore(&snap).unwrap();
        assert_eq!(env.step(&[14000.0; 4], &[0.0; 3]).unwrap(), next);
    }
}
