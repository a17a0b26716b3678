use rand::Rng;

use crate::gridworld::{Action, OBSERVATION_LEN};
use crate::{Error, Result};

/// Default layer sizes: observation, two hidden layers, one value per action.
pub const DEFAULT_SIZES: [usize; 4] = [OBSERVATION_LEN, 128, 64, Action::COUNT];

pub type ActionValues = [f64; Action::COUNT];

/// Fully connected layer. Weights are stored input-major (`weights[i * outputs + j]`)
/// so a sparse input only touches the rows of its nonzero entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.outputs..(i + 1) * self.outputs];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
    }
}

/// Multilayer perceptron: rectified-linear hidden layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    layers: Vec<Dense>,
}

/// Per-layer outputs kept from a forward pass for backpropagation.
/// `values[0]` is the input, `values[k]` the post-activation output of layer k.
#[derive(Debug, Clone, Default)]
pub struct Activations {
    values: Vec<Vec<f64>>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.values.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl QNetwork {
    /// Uniform initialisation in `±1/sqrt(fan_in)` for weights and biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = QNetwork::zeros(sizes)?;
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidParams(format!("bad layer sizes {sizes:?}")));
        }
        if *sizes.last().unwrap() != Action::COUNT {
            return Err(Error::Dimension { expected: Action::COUNT, got: *sizes.last().unwrap() });
        }
        let layers = sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(QNetwork { layers })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        let sizes: Vec<usize> = match layers.first() {
            Some(first) => std::iter::once(first.inputs).chain(layers.iter().map(|l| l.outputs)).collect(),
            None => return Err(Error::InvalidParams("network needs at least one layer".into())),
        };
        let mut net = QNetwork::zeros(&sizes)?;
        for (i, (dst, src)) in net.layers.iter_mut().zip(layers).enumerate() {
            if src.inputs != sizes[i] || src.weights.len() != src.inputs * src.outputs || src.bias.len() != src.outputs {
                return Err(Error::InvalidParams(format!("layer {i} has inconsistent shapes")));
            }
            *dst = src;
        }
        Ok(net)
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs).chain(self.layers.iter().map(|l| l.outputs)).collect()
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Flat view of every parameter, layer by layer, weights before biases.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    /// A network of the same shape with every parameter zero.
    pub fn zeros_like(&self) -> Self {
        QNetwork::zeros(&self.sizes()).expect("shape already validated")
    }

    pub fn forward(&self, obs: &[f64]) -> Result<ActionValues> {
        let mut acts = Activations::default();
        self.forward_cached(obs, &mut acts)?;
        let mut out = [0.0; Action::COUNT];
        out.copy_from_slice(acts.output());
        Ok(out)
    }

    /// Forward pass keeping intermediate activations (buffers are reused).
    pub fn forward_cached(&self, obs: &[f64], acts: &mut Activations) -> Result<()> {
        if obs.len() != self.input_len() {
            return Err(Error::Dimension { expected: self.input_len(), got: obs.len() });
        }
        acts.values.resize_with(self.layers.len() + 1, Vec::new);
        acts.values[0].clear();
        acts.values[0].extend_from_slice(obs);
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let (done, rest) = acts.values.split_at_mut(k + 1);
            let out = &mut rest[0];
            out.resize(layer.outputs, 0.0);
            layer.forward(&done[k], out);
            if k != last {
                for v in out.iter_mut() {
                    *v = v.max(0.0);
                }
            }
        }
        Ok(())
    }

    /// Adds `d loss / d params` to `grads` given the activations of one sample
    /// and `d loss / d output`.
    pub fn accumulate_gradient(&self, acts: &Activations, d_out: &[f64], grads: &mut QNetwork) {
        let mut delta = d_out.to_vec();
        let mut next = Vec::new();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let g = &mut grads.layers[k];
            let input = &acts.values[k];
            for (b, d) in g.bias.iter_mut().zip(&delta) {
                *b += d;
            }
            let need_input_grad = k > 0;
            if need_input_grad {
                next.clear();
                next.resize(layer.inputs, 0.0);
            }
            for (i, &xi) in input.iter().enumerate() {
                let lo = i * layer.outputs;
                let hi = lo + layer.outputs;
                if xi != 0.0 {
                    for (gw, d) in g.weights[lo..hi].iter_mut().zip(&delta) {
                        *gw += xi * d;
                    }
                }
                // hidden inputs are post-ReLU, so zero input means zero derivative
                if need_input_grad && xi > 0.0 {
                    next[i] = layer.weights[lo..hi].iter().zip(&delta).map(|(w, d)| w * d).sum();
                }
            }
            if need_input_grad {
                std::mem::swap(&mut delta, &mut next);
            }
        }
    }

    /// `self -= lr * grads`.
    pub fn sgd_step(&mut self, grads: &QNetwork, lr: f64) {
        for (p, g) in self.params_mut().zip(grads.params()) {
            *p -= lr * g;
        }
    }

    pub fn copy_from(&mut self, other: &QNetwork) {
        self.clone_from(other);
    }
}

/// Adam moment estimates over a network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: QNetwork,
    v: QNetwork,
    t: u64,
}

impl AdamState {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(net: &QNetwork) -> Self {
        AdamState { m: net.zeros_like(), v: net.zeros_like(), t: 0 }
    }

    /// One bias-corrected Adam step of size `lr` along `grads`.
    pub fn step(&mut self, net: &mut QNetwork, grads: &QNetwork, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t as i32);
        let c2 = 1.0 - Self::BETA2.powi(self.t as i32);
        let it = net.params_mut().zip(grads.params()).zip(self.m.params_mut().zip(self.v.params_mut()));
        for ((p, g), (m, v)) in it {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn squared_loss(net: &QNetwork, obs: &[f64], action: usize, target: f64) -> f64 {
        let q = net.forward(obs).unwrap();
        (q[action] - target).powi(2)
    }

    fn analytic_grad(net: &QNetwork, obs: &[f64], action: usize, target: f64) -> Vec<f64> {
        let mut acts = Activations::default();
        net.forward_cached(obs, &mut acts).unwrap();
        let mut d_out = vec![0.0; Action::COUNT];
        d_out[action] = 2.0 * (acts.output()[action] - target);
        let mut grads = net.zeros_like();
        net.accumulate_gradient(&acts, &d_out, &mut grads);
        grads.params().copied().collect()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = QNetwork::zeros(&DEFAULT_SIZES).unwrap();
        assert_eq!(net.forward(&[1.0; OBSERVATION_LEN]).unwrap(), [0.0; 3]);
    }

    #[test]
    fn dimension_mismatch() {
        let net = QNetwork::zeros(&DEFAULT_SIZES).unwrap();
        assert!(matches!(net.forward(&[0.0; 5]), Err(Error::Dimension { expected: 129, got: 5 })));
        assert!(QNetwork::zeros(&[4, 2]).is_err());
        assert!(QNetwork::zeros(&[3]).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = QNetwork::new(&[6, 5, 4, 3], &mut rng).unwrap();
        let obs: Vec<f64> = (0..6).map(|i| if i % 2 == 0 { rng.gen_range(-1.0..1.0) } else { 1.0 }).collect();
        let (action, target) = (1, 0.7);
        let analytic = analytic_grad(&net, &obs, action, target);
        let h = 1e-5;
        for idx in 0..net.param_count() {
            let orig = *net.params().nth(idx).unwrap();
            *net.params_mut().nth(idx).unwrap() = orig + h;
            let plus = squared_loss(&net, &obs, action, target);
            *net.params_mut().nth(idx).unwrap() = orig - h;
            let minus = squared_loss(&net, &obs, action, target);
            *net.params_mut().nth(idx).unwrap() = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let denom = analytic[idx].abs().max(numeric.abs()).max(1e-8);
            assert!((analytic[idx] - numeric).abs() / denom <= 1e-4, "param {idx}: {} vs {numeric}", analytic[idx]);
        }
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.1, 0.9, 0.3]), 1);
        assert_eq!(argmax(&[0.5, 0.5, 0.1]), 0);
        assert_eq!(argmax(&[0.0, 0.2, 0.2]), 1);
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = QNetwork::new(&DEFAULT_SIZES, &mut rng).unwrap();
        let obs: Vec<f64> = (0..OBSERVATION_LEN).map(|i| (i % 5 == 0) as u8 as f64).collect();
        let a = net.forward(&obs).unwrap();
        assert_eq!(a, net.forward(&obs).unwrap());
        assert!(a.iter().all(|v| v.is_finite()));
    }
}
