use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DiffnetError;
use crate::scalar::{axpy, dot, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenActivation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Identity,
    Tanh,
}

/// Shape of a feed-forward network: `layer_sizes[0]` inputs, `layer_sizes.last()` outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: HiddenActivation,
    pub output_activation: OutputActivation,
}

impl MlpSpec {
    pub fn new(
        layer_sizes: Vec<usize>,
        hidden_activation: HiddenActivation,
        output_activation: OutputActivation,
    ) -> Self {
        Self { layer_sizes, hidden_activation, output_activation }
    }

    pub fn validate(&self) -> Result<(), DiffnetError> {
        if self.layer_sizes.len() < 2 {
            return Err(DiffnetError::InvalidSpec(format!(
                "need at least 2 layer sizes, got {}",
                self.layer_sizes.len()
            )));
        }
        if let Some(i) = self.layer_sizes.iter().position(|&n| n == 0) {
            return Err(DiffnetError::InvalidSpec(format!("layer {i} has size 0")));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated spec")
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Σ_l (n_l·n_{l+1} + n_{l+1}).
    pub fn param_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// A feed-forward network whose parameters live in one flat vector.
///
/// Layout, layer by layer: the weight matrix of layer `l` (row-major,
/// `n_{l+1}` rows of `n_l` inputs, so row `j` holds the weights into output
/// unit `j`), immediately followed by that layer's `n_{l+1}` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    spec: MlpSpec,
    params: Vec<T>,
    offsets: Vec<usize>,
}

/// Per-layer activations of a batched forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    batch: usize,
    // activations[0] is the input; activations[l + 1] the output of layer l.
    activations: Vec<Vec<T>>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Network outputs, row-major `batch × output_dim`.
    pub fn output(&self) -> &[T] {
        self.activations.last().expect("cache has at least the input")
    }

    pub fn input(&self) -> &[T] {
        &self.activations[0]
    }
}

fn layer_offsets(spec: &MlpSpec) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(spec.num_layers() + 1);
    let mut at = 0;
    for w in spec.layer_sizes.windows(2) {
        offsets.push(at);
        at += w[0] * w[1] + w[1];
    }
    offsets.push(at);
    offsets
}

impl<T: Scalar> Mlp<T> {
    /// Weights uniform in `[-1/√fan_in, 1/√fan_in]` from a ChaCha8 stream seeded with `seed`
    /// (drawn in parameter order), biases zero.
    pub fn init(spec: MlpSpec, seed: u64) -> Result<Self, DiffnetError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(spec.param_count());
        for w in spec.layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(T::lit(rng.gen_range(-bound..=bound)));
            }
            params.extend(std::iter::repeat_n(T::zero(), fan_out));
        }
        let offsets = layer_offsets(&spec);
        Ok(Self { spec, params, offsets })
    }

    pub fn zeros(spec: MlpSpec) -> Result<Self, DiffnetError> {
        spec.validate()?;
        let params = vec![T::zero(); spec.param_count()];
        let offsets = layer_offsets(&spec);
        Ok(Self { spec, params, offsets })
    }

    pub fn from_params(spec: MlpSpec, params: Vec<T>) -> Result<Self, DiffnetError> {
        spec.validate()?;
        if params.len() != spec.param_count() {
            return Err(DiffnetError::Dimension {
                what: "parameter vector",
                expected: spec.param_count(),
                found: params.len(),
            });
        }
        let offsets = layer_offsets(&spec);
        Ok(Self { spec, params, offsets })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[T]) -> Result<(), DiffnetError> {
        if params.len() != self.params.len() {
            return Err(DiffnetError::Dimension {
                what: "parameter vector",
                expected: self.params.len(),
                found: params.len(),
            });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    /// `(weights, biases)` of layer `l`.
    pub fn layer(&self, l: usize) -> (&[T], &[T]) {
        let (n_in, n_out) = (self.spec.layer_sizes[l], self.spec.layer_sizes[l + 1]);
        let start = self.offsets[l];
        let w = &self.params[start..start + n_in * n_out];
        let b = &self.params[start + n_in * n_out..start + n_in * n_out + n_out];
        (w, b)
    }

    /// Mutable `(weights, biases)` of layer `l`.
    pub fn layer_mut(&mut self, l: usize) -> (&mut [T], &mut [T]) {
        let (n_in, n_out) = (self.spec.layer_sizes[l], self.spec.layer_sizes[l + 1]);
        let start = self.offsets[l];
        let block = &mut self.params[start..start + n_in * n_out + n_out];
        block.split_at_mut(n_in * n_out)
    }

    fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), DiffnetError> {
        if expected != found {
            return Err(DiffnetError::Dimension { what, expected, found });
        }
        Ok(())
    }

    /// Forward pass for a single input vector.
    pub fn forward(&self, input: &[T]) -> Result<Vec<T>, DiffnetError> {
        Ok(self.forward_batch(input, 1)?.output().to_vec())
    }

    /// Forward pass for `batch` inputs stored row-major in `input`.
    pub fn forward_batch(&self, input: &[T], batch: usize) -> Result<ForwardCache<T>, DiffnetError> {
        Self::check_len("input", batch * self.input_dim(), input.len())?;
        let n_layers = self.spec.num_layers();
        let mut activations = Vec::with_capacity(n_layers + 1);
        activations.push(input.to_vec());
        for l in 0..n_layers {
            let (n_in, n_out) = (self.spec.layer_sizes[l], self.spec.layer_sizes[l + 1]);
            let (w, b) = self.layer(l);
            let x = &activations[l];
            let mut y = vec![T::zero(); batch * n_out];
            for s in 0..batch {
                let xs = &x[s * n_in..(s + 1) * n_in];
                let ys = &mut y[s * n_out..(s + 1) * n_out];
                for j in 0..n_out {
                    ys[j] = b[j] + dot(&w[j * n_in..(j + 1) * n_in], xs);
                }
            }
            let last = l + 1 == n_layers;
            apply_activation(&mut y, self.activation_of(last));
            activations.push(y);
        }
        Ok(ForwardCache { batch, activations })
    }

    fn activation_of(&self, last: bool) -> Act {
        if last {
            match self.spec.output_activation {
                OutputActivation::Identity => Act::Identity,
                OutputActivation::Tanh => Act::Tanh,
            }
        } else {
            match self.spec.hidden_activation {
                HiddenActivation::Relu => Act::Relu,
                HiddenActivation::Tanh => Act::Tanh,
            }
        }
    }

    /// Gradients of `upstream · output` for a single input: `(param_grad, input_grad)`.
    pub fn backward(&self, input: &[T], upstream: &[T]) -> Result<(Vec<T>, Vec<T>), DiffnetError> {
        let cache = self.forward_batch(input, 1)?;
        self.backward_batch(&cache, upstream)
    }

    /// Backward pass through a cached batch.
    ///
    /// Returns the parameter gradient of `Σ_s upstream_s · output_s` (summed over
    /// the batch, in sample order) and the per-sample input gradients (row-major).
    pub fn backward_batch(
        &self,
        cache: &ForwardCache<T>,
        upstream: &[T],
    ) -> Result<(Vec<T>, Vec<T>), DiffnetError> {
        let batch = cache.batch;
        Self::check_len("upstream gradient", batch * self.output_dim(), upstream.len())?;
        let n_layers = self.spec.num_layers();
        let mut param_grad = vec![T::zero(); self.params.len()];
        let mut delta = upstream.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.spec.layer_sizes[l], self.spec.layer_sizes[l + 1]);
            let y = &cache.activations[l + 1];
            activation_backward(&mut delta, y, self.activation_of(l + 1 == n_layers));
            let x = &cache.activations[l];
            let start = self.offsets[l];
            {
                let (gw, gb) = param_grad[start..start + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for s in 0..batch {
                    let xs = &x[s * n_in..(s + 1) * n_in];
                    let ds = &delta[s * n_out..(s + 1) * n_out];
                    for j in 0..n_out {
                        let d = ds[j];
                        if d != T::zero() {
                            axpy(d, xs, &mut gw[j * n_in..(j + 1) * n_in]);
                        }
                        gb[j] += d;
                    }
                }
            }
            let (w, _) = self.layer(l);
            let mut prev = vec![T::zero(); batch * n_in];
            for s in 0..batch {
                let ds = &delta[s * n_out..(s + 1) * n_out];
                let ps = &mut prev[s * n_in..(s + 1) * n_in];
                for j in 0..n_out {
                    let d = ds[j];
                    if d != T::zero() {
                        axpy(d, &w[j * n_in..(j + 1) * n_in], ps);
                    }
                }
            }
            delta = prev;
        }
        Ok((param_grad, delta))
    }
}

#[derive(Clone, Copy)]
enum Act {
    Identity,
    Relu,
    Tanh,
}

fn apply_activation<T: Scalar>(y: &mut [T], act: Act) {
    match act {
        Act::Identity => {}
        Act::Relu => y.iter_mut().for_each(|v| *v = v.max(T::zero())),
        Act::Tanh => y.iter_mut().for_each(|v| *v = v.tanh()),
    }
}

// Derivatives expressed through the post-activation value.
fn activation_backward<T: Scalar>(delta: &mut [T], y: &[T], act: Act) {
    match act {
        Act::Identity => {}
        Act::Relu => {
            for (d, &v) in delta.iter_mut().zip(y) {
                if v <= T::zero() {
                    *d = T::zero();
                }
            }
        }
        Act::Tanh => {
            for (d, &v) in delta.iter_mut().zip(y) {
                *d *= T::one() - v * v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(sizes: &[usize]) -> MlpSpec {
        MlpSpec::new(sizes.to_vec(), HiddenActivation::Tanh, OutputActivation::Identity)
    }

    #[test]
    fn init_is_seed_deterministic() {
        let a = Mlp::<f64>::init(spec(&[2, 1]), 7).unwrap();
        let b = Mlp::<f64>::init(spec(&[2, 1]), 7).unwrap();
        assert_eq!(a.params(), b.params());
        let c = Mlp::<f64>::init(spec(&[2, 1]), 8).unwrap();
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn param_count_follows_layout_rule() {
        let net = Mlp::<f64>::init(spec(&[2, 3, 1]), 0).unwrap();
        assert_eq!(net.params().len(), 2 * 3 + 3 + 3 + 1);
        assert_eq!(net.params().len(), 13);
    }

    #[test]
    fn biases_start_at_zero_and_weights_within_fan_in_bound() {
        let net = Mlp::<f64>::init(spec(&[4, 2]), 123).unwrap();
        let (w, b) = net.layer(0);
        assert!(b.iter().all(|&x| x == 0.0));
        assert!(w.iter().all(|&x| x.abs() <= 0.5));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(matches!(Mlp::<f64>::init(spec(&[3, 0, 1]), 0), Err(DiffnetError::InvalidSpec(_))));
        assert!(matches!(Mlp::<f64>::init(spec(&[3]), 0), Err(DiffnetError::InvalidSpec(_))));
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::<f64>::zeros(spec(&[3, 4, 2])).unwrap();
        assert_eq!(net.forward(&[1.0, -5.0, 2.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn tanh_output_stays_in_open_interval() {
        let s = MlpSpec::new(vec![2, 8, 3], HiddenActivation::Relu, OutputActivation::Tanh);
        let net = Mlp::<f64>::init(s, 3).unwrap();
        for k in 0..50 {
            let x = [k as f64 - 25.0, 0.3 * k as f64];
            assert!(net.forward(&x).unwrap().iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn identity_layer_maps_input_through() {
        let net = Mlp::from_params(spec(&[2, 2]), vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(net.forward(&[3.0, -2.0]).unwrap(), vec![3.0, -2.0]);
        let (_, gin) = net.backward(&[3.0, -2.0], &[1.0, 0.0]).unwrap();
        assert_eq!(gin, vec![1.0, 0.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = Mlp::<f64>::init(spec(&[3, 5, 2]), 1).unwrap();
        let (gp, gi) = net.backward(&[0.1, 0.2, 0.3], &[0.0, 0.0]).unwrap();
        assert!(gp.iter().chain(&gi).all(|&g| g == 0.0));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let net = Mlp::<f64>::init(spec(&[3, 2]), 1).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(DiffnetError::Dimension { expected: 3, found: 1, .. })));
        assert!(matches!(
            net.backward(&[1.0, 2.0, 3.0], &[1.0]),
            Err(DiffnetError::Dimension { expected: 2, found: 1, .. })
        ));
        assert!(Mlp::from_params(spec(&[3, 2]), vec![0.0; 3]).is_err());
    }

    #[test]
    fn batch_forward_matches_single_forward_bitwise() {
        let net = Mlp::<f64>::init(spec(&[3, 7, 2]), 9).unwrap();
        let inputs = [0.1, -0.4, 2.0, 1.5, 0.0, -0.3];
        let cache = net.forward_batch(&inputs, 2).unwrap();
        assert_eq!(&cache.output()[..2], net.forward(&inputs[..3]).unwrap().as_slice());
        assert_eq!(&cache.output()[2..], net.forward(&inputs[3..]).unwrap().as_slice());
    }

    #[test]
    fn f32_network_runs() {
        let net = Mlp::<f32>::init(spec(&[2, 4, 1]), 5).unwrap();
        let (gp, gi) = net.backward(&[0.5, -0.5], &[1.0]).unwrap();
        assert_eq!(gp.len(), net.params().len());
        assert_eq!(gi.len(), 2);
    }
}
