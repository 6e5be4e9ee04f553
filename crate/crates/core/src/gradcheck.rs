//! Finite-difference battery for every analytic gradient the learner uses.
//!
//! Each check compares an analytic gradient `a` with a central difference `n`
//! by `‖a − n‖₂ / max(‖a‖₂, ‖n‖₂)`. ReLU draws whose pre-activations sit within
//! [`KINK_MARGIN`] of zero are redrawn, since the difference quotient straddles
//! the kink there.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, AgentDims, RddpgAgent};
use crate::diffnet::{HiddenActivation, Mlp, MlpSpec, OutputActivation};
use crate::envs::ActionBox;
use crate::rng::rng_from_seed;

pub const DEFAULT_THRESHOLD: f64 = 1e-5;
pub const DEFAULT_STEP: f64 = 1e-6;
pub const KINK_MARGIN: f64 = 1e-4;

/// Negative-control hook: perturbs one analytic entry before comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corruption {
    ParamGradient,
    InputGradient,
    ActorGradient,
    CriticGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckConfig {
    pub seed: u64,
    pub random_nets: usize,
    pub chain_instances: usize,
    pub critic_instances: usize,
    pub step: f64,
    pub threshold: f64,
    pub corruption: Option<Corruption>,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            random_nets: 100,
            chain_instances: 20,
            critic_instances: 20,
            step: DEFAULT_STEP,
            threshold: DEFAULT_THRESHOLD,
            corruption: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub instances: usize,
    pub max_relative_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub seed: u64,
    pub threshold: f64,
    pub checks: Vec<CheckResult>,
    pub max_relative_error: f64,
    pub passed: bool,
}

pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    let scale = norm(analytic).max(norm(numeric));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// `(f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h` for every coordinate `i`.
pub fn central_difference(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let plus = f(&probe);
            probe[i] = x[i] - h;
            let minus = f(&probe);
            probe[i] = x[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Smallest |pre-activation| over hidden ReLU units, or infinity for tanh nets.
pub fn relu_margin(net: &Mlp<f64>, input: &[f64], batch: usize) -> f64 {
    if net.spec().hidden_activation != HiddenActivation::Relu {
        return f64::INFINITY;
    }
    let sizes = &net.spec().layer_sizes;
    let hidden_layers = sizes.len() - 2;
    let mut margin = f64::INFINITY;
    for s in 0..batch {
        let mut x = input[s * sizes[0]..(s + 1) * sizes[0]].to_vec();
        for l in 0..hidden_layers {
            let (w, b) = net.layer(l);
            let n_in = sizes[l];
            x = (0..sizes[l + 1])
                .map(|j| {
                    let z = b[j] + w[j * n_in..(j + 1) * n_in].iter().zip(&x).map(|(a, c)| a * c).sum::<f64>();
                    margin = margin.min(z.abs());
                    z.max(0.0)
                })
                .collect();
        }
    }
    margin
}

fn corrupt(g: &mut [f64]) {
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
    if let Some(v) = g.first_mut() {
        *v += 1e-2 * norm;
    }
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-bound..=bound)).collect()
}

fn random_spec(rng: &mut ChaCha8Rng) -> MlpSpec {
    let depth = rng.gen_range(1..=3);
    let mut sizes = vec![rng.gen_range(1..=6)];
    sizes.extend((0..depth).map(|_| rng.gen_range(1..=8)));
    sizes.push(rng.gen_range(1..=4));
    let hidden = if rng.gen_bool(0.5) { HiddenActivation::Relu } else { HiddenActivation::Tanh };
    let output = if rng.gen_bool(0.5) { OutputActivation::Tanh } else { OutputActivation::Identity };
    MlpSpec { layer_sizes: sizes, hidden_activation: hidden, output_activation: output }
}

/// Parameter and input gradients of `Σ upstream · output` for random nets.
fn check_random_nets(cfg: &GradcheckConfig, rng: &mut ChaCha8Rng) -> (CheckResult, CheckResult) {
    let (mut worst_p, mut worst_x) = (0.0f64, 0.0f64);
    let mut done = 0;
    while done < cfg.random_nets {
        let spec = random_spec(rng);
        let batch = rng.gen_range(1..=3);
        let mut net = Mlp::<f64>::init(spec.clone(), rng.gen()).expect("valid random spec");
        let bias_scale = 0.5;
        for (l, _) in spec.layer_sizes.windows(2).enumerate() {
            let (_, b) = net.layer_mut(l);
            b.iter_mut().for_each(|v| *v = rng.gen_range(-bias_scale..=bias_scale));
        }
        let input = uniform_vec(rng, batch * spec.input_dim(), 1.5);
        let upstream = uniform_vec(rng, batch * spec.output_dim(), 1.0);
        if relu_margin(&net, &input, batch) < KINK_MARGIN {
            continue;
        }
        done += 1;
        let cache = net.forward_batch(&input, batch).expect("dims agree");
        let (mut gp, mut gx) = net.backward_batch(&cache, &upstream).expect("dims agree");
        if cfg.corruption == Some(Corruption::ParamGradient) {
            corrupt(&mut gp);
        }
        if cfg.corruption == Some(Corruption::InputGradient) {
            corrupt(&mut gx);
        }
        let dot = |out: &[f64]| out.iter().zip(&upstream).map(|(a, b)| a * b).sum::<f64>();
        let mut probe = net.clone();
        let np = central_difference(
            |p| {
                probe.params_mut().copy_from_slice(p);
                dot(probe.forward_batch(&input, batch).expect("dims agree").output())
            },
            net.params(),
            cfg.step,
        );
        let nx = central_difference(
            |x| dot(net.forward_batch(x, batch).expect("dims agree").output()),
            &input,
            cfg.step,
        );
        worst_p = worst_p.max(relative_error(&gp, &np));
        worst_x = worst_x.max(relative_error(&gx, &nx));
    }
    let result = |name: &str, e: f64| CheckResult {
        name: name.into(),
        instances: cfg.random_nets,
        max_relative_error: e,
        passed: e < cfg.threshold,
    };
    (result("mlp parameter gradient", worst_p), result("mlp input gradient", worst_x))
}

fn tiny_agent(rng: &mut ChaCha8Rng) -> (RddpgAgent, Vec<f64>, usize) {
    let hidden = if rng.gen_bool(0.5) { HiddenActivation::Relu } else { HiddenActivation::Tanh };
    let config = AgentConfig {
        actor_hidden: vec![rng.gen_range(2..=6)],
        critic_hidden: vec![rng.gen_range(2..=6), rng.gen_range(2..=6)],
        hidden_activation: hidden,
        ..AgentConfig::default()
    };
    let dims = AgentDims {
        obs_dim: 2,
        user_box: ActionBox::symmetric(rng.gen_range(1..=2), 2.0).expect("nonempty box"),
        w_dim: rng.gen_range(1..=2),
    };
    let mut agent = RddpgAgent::new(config, dims, rng.gen()).expect("valid config");
    // Nonzero biases so the critic is not odd-symmetric at initialization.
    for net in agent.networks_mut() {
        let n_layers = net.spec().num_layers();
        for l in 0..n_layers {
            let (_, b) = net.layer_mut(l);
            b.iter_mut().for_each(|v| *v = rng.gen_range(-0.5..=0.5));
        }
    }
    let batch = 4;
    let obs = uniform_vec(rng, batch * 2, 1.5);
    (agent, obs, batch)
}

fn chain_margin(agent: &RddpgAgent, obs: &[f64], batch: usize) -> f64 {
    let u = agent.user_actor.forward_batch(obs, batch).expect("dims agree");
    let w = agent.adversary_actor.forward_batch(obs, batch).expect("dims agree");
    let (n, m, l) = (agent.dims.obs_dim, agent.user_dim(), agent.w_dim());
    let z: Vec<f64> = (0..batch)
        .flat_map(|s| {
            let mut row = obs[s * n..(s + 1) * n].to_vec();
            row.extend_from_slice(&u.output()[s * m..(s + 1) * m]);
            row.extend_from_slice(&w.output()[s * l..(s + 1) * l]);
            row
        })
        .collect();
    relu_margin(&agent.user_actor, obs, batch)
        .min(relu_margin(&agent.adversary_actor, obs, batch))
        .min(relu_margin(&agent.critic_1, &z, batch))
}

/// Actor objective through critic 1, for user and adversary parameters.
fn check_actor_chain(cfg: &GradcheckConfig, rng: &mut ChaCha8Rng) -> CheckResult {
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < cfg.chain_instances {
        let (agent, obs, batch) = tiny_agent(rng);
        if chain_margin(&agent, &obs, batch) < KINK_MARGIN {
            continue;
        }
        done += 1;
        let mut g = agent.actor_gradients(&obs, batch).expect("finite gradients");
        if cfg.corruption == Some(Corruption::ActorGradient) {
            corrupt(&mut g.user);
        }
        let mut probe = agent.clone();
        let nu = central_difference(
            |p| {
                probe.user_actor.params_mut().copy_from_slice(p);
                probe.actor_objective(&obs, batch).expect("dims agree")
            },
            agent.user_actor.params(),
            cfg.step,
        );
        let mut probe = agent.clone();
        let nw = central_difference(
            |p| {
                probe.adversary_actor.params_mut().copy_from_slice(p);
                probe.actor_objective(&obs, batch).expect("dims agree")
            },
            agent.adversary_actor.params(),
            cfg.step,
        );
        worst = worst.max(relative_error(&g.user, &nu)).max(relative_error(&g.adversary, &nw));
    }
    CheckResult {
        name: "actor-through-critic chain".into(),
        instances: cfg.chain_instances,
        max_relative_error: worst,
        passed: worst < cfg.threshold,
    }
}

/// Mean squared critic loss against fixed targets.
fn check_critic_loss(cfg: &GradcheckConfig, rng: &mut ChaCha8Rng) -> CheckResult {
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < cfg.critic_instances {
        let (agent, _, batch) = tiny_agent(rng);
        let width = agent.critic_1.input_dim();
        let z = uniform_vec(rng, batch * width, 1.5);
        let y = uniform_vec(rng, batch, 2.0);
        if relu_margin(&agent.critic_1, &z, batch) < KINK_MARGIN {
            continue;
        }
        done += 1;
        let (_, mut g) = RddpgAgent::critic_loss_and_gradient(&agent.critic_1, &z, &y).expect("finite loss");
        if cfg.corruption == Some(Corruption::CriticGradient) {
            corrupt(&mut g);
        }
        let mut probe = agent.critic_1.clone();
        let n = central_difference(
            |p| {
                probe.params_mut().copy_from_slice(p);
                RddpgAgent::critic_loss_and_gradient(&probe, &z, &y).expect("finite loss").0
            },
            agent.critic_1.params(),
            cfg.step,
        );
        worst = worst.max(relative_error(&g, &n));
    }
    CheckResult {
        name: "critic loss".into(),
        instances: cfg.critic_instances,
        max_relative_error: worst,
        passed: worst < cfg.threshold,
    }
}

/// Runs every check. Deterministic in `cfg`.
pub fn run(cfg: &GradcheckConfig) -> GradcheckReport {
    let mut rng = rng_from_seed(cfg.seed);
    let (p, x) = check_random_nets(cfg, &mut rng);
    let chain = check_actor_chain(cfg, &mut rng);
    let critic = check_critic_loss(cfg, &mut rng);
    let checks = vec![p, x, chain, critic];
    let max_relative_error = checks.iter().map(|c| c.max_relative_error).fold(0.0, f64::max);
    GradcheckReport {
        seed: cfg.seed,
        threshold: cfg.threshold,
        passed: checks.iter().all(|c| c.passed),
        checks,
        max_relative_error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64, corruption: Option<Corruption>) -> GradcheckConfig {
        GradcheckConfig { seed, random_nets: 10, chain_instances: 3, critic_instances: 3, corruption, ..Default::default() }
    }

    #[test]
    fn quadratic_difference_is_exact_enough() {
        let g = central_difference(|x| x[0] * x[0] + 3.0 * x[1], &[2.0, -1.0], 1e-6);
        assert!(relative_error(&g, &[4.0, 3.0]) < 1e-9);
    }

    #[test]
    fn clean_battery_passes() {
        let r = run(&small(1, None));
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn every_corruption_is_caught() {
        for c in [Corruption::ParamGradient, Corruption::InputGradient, Corruption::ActorGradient, Corruption::CriticGradient] {
            let r = run(&small(1, Some(c)));
            assert!(!r.passed, "{c:?} slipped through");
        }
    }

    #[test]
    fn same_seed_same_report() {
        assert_eq!(run(&small(4, None)), run(&small(4, None)));
    }
}
