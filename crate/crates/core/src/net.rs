//! Small feedforward networks with reverse-mode differentiation.
//!
//! The pipeline needs exactly two architectures — a Gaussian policy head
//! pair and a bounded scalar reward head — so this is a fixed-structure
//! MLP, not a general autodiff engine: tanh hidden layers feeding one or
//! more named output heads, each with its own activation. Gradients are
//! exact reverse-mode and are checked against central finite differences
//! in the test suite.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::vec3::Vec3;

/// Activation functions available to layers and heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Tanh,
    Softplus,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Tanh => z.tanh(),
            // ln(1 + e^z), evaluated stably for large |z|.
            Activation::Softplus => {
                if z > 30.0 {
                    z
                } else if z < -30.0 {
                    z.exp()
                } else {
                    z.exp().ln_1p()
                }
            }
        }
    }

    /// Derivative, given both pre-activation and output.
    fn derivative(self, z: f64, out: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Tanh => 1.0 - out * out,
            Activation::Softplus => 1.0 / (1.0 + (-z).exp()),
        }
    }
}

/// One named output head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub name: String,
    pub size: usize,
    pub activation: Activation,
}

/// Architecture of a network: input plus hidden sizes, the shared hidden
/// activation, and the output heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    /// `[input, hidden_1, ..., hidden_L]`; at least one hidden layer.
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub heads: Vec<HeadSpec>,
}

impl NetSpec {
    pub fn new(layer_sizes: Vec<usize>, heads: Vec<HeadSpec>) -> Result<Self> {
        let spec = NetSpec {
            layer_sizes,
            hidden_activation: Activation::Tanh,
            heads,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::Config(
                "net needs an input size and at least one hidden layer".into(),
            ));
        }
        if self.layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config("all layer sizes must be >= 1".into()));
        }
        if self.heads.is_empty() {
            return Err(Error::Config("net needs at least one output head".into()));
        }
        if self.heads.iter().any(|h| h.size == 0) {
            return Err(Error::Config("all head sizes must be >= 1".into()));
        }
        Ok(())
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    fn last_hidden(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Total number of parameters (weights + biases, all layers + heads).
    pub fn weight_count(&self) -> usize {
        let mut n = 0;
        for w in self.layer_sizes.windows(2) {
            n += w[0] * w[1] + w[1];
        }
        for head in &self.heads {
            n += self.last_hidden() * head.size + head.size;
        }
        n
    }

    pub fn head_index(&self, name: &str) -> Result<usize> {
        self.heads
            .iter()
            .position(|h| h.name == name)
            .ok_or_else(|| Error::Domain(format!("no head named {name}")))
    }
}

/// Intermediate activations retained by a forward pass for backprop.
#[derive(Debug, Clone)]
pub struct Tape {
    input: Vec<f64>,
    /// Post-activation of each hidden layer.
    hidden: Vec<Vec<f64>>,
    /// Pre-activation of each head.
    head_pre: Vec<Vec<f64>>,
    /// Output of each head.
    head_out: Vec<Vec<f64>>,
}

impl Tape {
    pub fn outputs(&self) -> &[Vec<f64>] {
        &self.head_out
    }
}

/// Gradients from a backward pass.
#[derive(Debug, Clone)]
pub struct Grads {
    /// Same layout as [`Mlp::weights`].
    pub weights: Vec<f64>,
    /// Gradient with respect to the input vector.
    pub input: Vec<f64>,
}

/// A feedforward network: architecture plus a flat parameter vector.
///
/// Layout: for each hidden layer, the `out x in` weight matrix
/// (row-major) followed by the bias; then the same for each head in
/// declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub spec: NetSpec,
    pub weights: Vec<f64>,
}

impl Mlp {
    /// Fan-in scaled uniform initialization, deterministic in `rng`.
    /// Biases start at zero.
    pub fn init(spec: NetSpec, rng: &mut Stream) -> Result<Self> {
        spec.validate()?;
        let mut weights = Vec::with_capacity(spec.weight_count());
        let mut push_layer = |fan_in: usize, fan_out: usize, rng: &mut Stream| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                weights.push(rng.gen_range(-bound..bound));
            }
            for _ in 0..fan_out {
                weights.push(0.0);
            }
        };
        for w in spec.layer_sizes.windows(2) {
            push_layer(w[0], w[1], rng);
        }
        for head in &spec.heads {
            push_layer(spec.last_hidden(), head.size, rng);
        }
        Ok(Mlp { spec, weights })
    }

    /// All-zero parameters; useful as a degenerate reference point.
    pub fn zeros(spec: NetSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.weight_count();
        Ok(Mlp {
            spec,
            weights: vec![0.0; n],
        })
    }

    fn affine(weights: &[f64], offset: usize, input: &[f64], out_size: usize) -> Vec<f64> {
        let in_size = input.len();
        let mut out = Vec::with_capacity(out_size);
        for o in 0..out_size {
            let row = &weights[offset + o * in_size..offset + (o + 1) * in_size];
            let mut z = weights[offset + out_size * in_size + o];
            for (w, x) in row.iter().zip(input) {
                z += w * x;
            }
            out.push(z);
        }
        out
    }

    /// Forward pass returning per-head outputs.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self.forward_cached(input)?.head_out)
    }

    /// Forward pass that retains the activations needed by [`backward`].
    ///
    /// [`backward`]: Mlp::backward
    pub fn forward_cached(&self, input: &[f64]) -> Result<Tape> {
        if input.len() != self.spec.input_size() {
            return Err(Error::Domain(format!(
                "input length {} != expected {}",
                input.len(),
                self.spec.input_size()
            )));
        }
        let mut offset = 0;
        let mut hidden = Vec::with_capacity(self.spec.layer_sizes.len() - 1);
        let mut current: &[f64] = input;
        for w in self.spec.layer_sizes.windows(2) {
            let mut z = Self::affine(&self.weights, offset, current, w[1]);
            offset += w[0] * w[1] + w[1];
            for v in &mut z {
                *v = self.spec.hidden_activation.apply(*v);
            }
            hidden.push(z);
            current = hidden.last().unwrap();
        }
        let mut head_pre = Vec::with_capacity(self.spec.heads.len());
        let mut head_out = Vec::with_capacity(self.spec.heads.len());
        for head in &self.spec.heads {
            let pre = Self::affine(&self.weights, offset, current, head.size);
            offset += self.spec.last_hidden() * head.size + head.size;
            let out = pre.iter().map(|&z| head.activation.apply(z)).collect();
            head_pre.push(pre);
            head_out.push(out);
        }
        Ok(Tape {
            input: input.to_vec(),
            hidden,
            head_pre,
            head_out,
        })
    }

    /// Reverse-mode pass. `head_grads` holds dLoss/dOutput for each head
    /// (zero vectors for heads the loss ignores). Returns gradients with
    /// respect to every parameter and to the input.
    pub fn backward(&self, tape: &Tape, head_grads: &[Vec<f64>]) -> Result<Grads> {
        if head_grads.len() != self.spec.heads.len() {
            return Err(Error::Domain(format!(
                "expected {} head gradients, got {}",
                self.spec.heads.len(),
                head_grads.len()
            )));
        }
        for (k, g) in head_grads.iter().enumerate() {
            if g.len() != self.spec.heads[k].size {
                return Err(Error::Domain(format!(
                    "head {k} gradient length {} != {}",
                    g.len(),
                    self.spec.heads[k].size
                )));
            }
        }

        let mut grads = vec![0.0; self.weights.len()];
        let last_hidden = tape.hidden.last().expect("spec has a hidden layer");
        let mut d_last = vec![0.0; last_hidden.len()];

        // Heads sit at the end of the weight vector.
        let hidden_params: usize = self
            .spec
            .layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum();
        let mut offset = hidden_params;
        for (k, head) in self.spec.heads.iter().enumerate() {
            let in_size = last_hidden.len();
            for o in 0..head.size {
                let dz = head_grads[k][o]
                    * head
                        .activation
                        .derivative(tape.head_pre[k][o], tape.head_out[k][o]);
                for i in 0..in_size {
                    grads[offset + o * in_size + i] += dz * last_hidden[i];
                    d_last[i] += self.weights[offset + o * in_size + i] * dz;
                }
                grads[offset + head.size * in_size + o] += dz;
            }
            offset += in_size * head.size + head.size;
        }

        // Hidden layers, last to first.
        let mut d_out = d_last;
        let mut layer_offsets = Vec::new();
        let mut acc = 0;
        for w in self.spec.layer_sizes.windows(2) {
            layer_offsets.push(acc);
            acc += w[0] * w[1] + w[1];
        }
        for l in (0..tape.hidden.len()).rev() {
            let h = &tape.hidden[l];
            let prev: &[f64] = if l == 0 { &tape.input } else { &tape.hidden[l - 1] };
            let in_size = prev.len();
            let offset = layer_offsets[l];
            let mut d_prev = vec![0.0; in_size];
            for o in 0..h.len() {
                // Hidden activation derivative from the output value.
                let dz = d_out[o] * self.spec.hidden_activation.derivative(0.0, h[o]);
                for i in 0..in_size {
                    grads[offset + o * in_size + i] += dz * prev[i];
                    d_prev[i] += self.weights[offset + o * in_size + i] * dz;
                }
                grads[offset + h.len() * in_size + o] += dz;
            }
            d_out = d_prev;
        }

        Ok(Grads {
            weights: grads,
            input: d_out,
        })
    }
}

/// Adam: stochastic gradient steps with per-parameter scaling from
/// decaying first and second moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(learning_rate: f64, param_count: usize) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
        }
    }

    pub fn step(&mut self, weights: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(weights.len(), grads.len());
        debug_assert_eq!(weights.len(), self.m.len());
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..weights.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            weights[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Log-density of an isotropic 3-D Gaussian at `a` with mean `mu` and
/// shared per-dimension variance `var`.
pub fn gaussian_logpdf(a: Vec3, mu: Vec3, var: f64) -> Result<f64> {
    if !var.is_finite() || var <= 0.0 {
        return Err(Error::Domain(format!("variance must be positive, got {var}")));
    }
    let d2 = (a[0] - mu[0]).powi(2) + (a[1] - mu[1]).powi(2) + (a[2] - mu[2]).powi(2);
    Ok(-1.5 * (2.0 * std::f64::consts::PI * var).ln() - d2 / (2.0 * var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use rand::Rng;

    fn scalar_net(w1: f64, b1: f64, w2: f64, b2: f64, head: Activation) -> Mlp {
        let spec = NetSpec::new(
            vec![1, 1],
            vec![HeadSpec {
                name: "out".into(),
                size: 1,
                activation: head,
            }],
        )
        .unwrap();
        Mlp {
            spec,
            weights: vec![w1, b1, w2, b2],
        }
    }

    #[test]
    fn zero_net_tanh_head_outputs_zero() {
        let spec = NetSpec::new(
            vec![5, 8],
            vec![HeadSpec {
                name: "r".into(),
                size: 1,
                activation: Activation::Tanh,
            }],
        )
        .unwrap();
        let net = Mlp::zeros(spec).unwrap();
        let out = net.forward(&[0.3, -0.4, 0.5, 0.1, 0.9]).unwrap();
        assert_eq!(out[0][0], 0.0);
    }

    #[test]
    fn tanh_head_stays_in_open_interval() {
        let spec = NetSpec::new(
            vec![3, 16],
            vec![HeadSpec {
                name: "r".into(),
                size: 1,
                activation: Activation::Tanh,
            }],
        )
        .unwrap();
        let mut rng = seeded_rng(5);
        let net = Mlp::init(spec, &mut rng).unwrap();
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let out = net.forward(&x).unwrap()[0][0];
            assert!(out > -1.0 && out < 1.0, "tanh head escaped (-1,1): {out}");
        }
    }

    #[test]
    fn hand_computed_forward_pass() {
        // 1 input -> 1 tanh hidden -> 1 linear head.
        // z = 0.5*0.8 + 0.25 = 0.65; h = tanh(0.65); out = 2h + 0.1.
        let net = scalar_net(0.5, 0.25, 2.0, 0.1, Activation::Linear);
        let out = net.forward(&[0.8]).unwrap()[0][0];
        assert!((out - 1.2433399321702348).abs() < 1e-15, "got {out}");

        let net = scalar_net(0.5, 0.25, 2.0, 0.1, Activation::Tanh);
        let out = net.forward(&[0.8]).unwrap()[0][0];
        assert!((out - 0.8464054747658176).abs() < 1e-15, "got {out}");
    }

    #[test]
    fn shape_mismatch_is_domain_error() {
        let net = scalar_net(0.5, 0.25, 2.0, 0.1, Activation::Linear);
        assert!(net.forward(&[0.1, 0.2]).is_err());
        let tape = net.forward_cached(&[0.1]).unwrap();
        assert!(net.backward(&tape, &[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_parameter_gradient() {
        let mut rng = seeded_rng(11);
        let spec = NetSpec::new(
            vec![4, 6, 6],
            vec![
                HeadSpec {
                    name: "a".into(),
                    size: 2,
                    activation: Activation::Linear,
                },
                HeadSpec {
                    name: "b".into(),
                    size: 1,
                    activation: Activation::Tanh,
                },
            ],
        )
        .unwrap();
        let net = Mlp::init(spec, &mut rng).unwrap();
        let tape = net.forward_cached(&[0.1, -0.2, 0.3, 0.7]).unwrap();
        let grads = net
            .backward(&tape, &[vec![0.0, 0.0], vec![0.0]])
            .unwrap();
        assert!(grads.weights.iter().all(|&g| g == 0.0));
        assert!(grads.input.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn tanh_head_gradient_at_zero_preactivation_has_unit_slope() {
        // Zero weights: head pre-activation is 0, tanh'(0) = 1, so the
        // head bias gradient equals the upstream gradient exactly.
        let spec = NetSpec::new(
            vec![2, 3],
            vec![HeadSpec {
                name: "r".into(),
                size: 1,
                activation: Activation::Tanh,
            }],
        )
        .unwrap();
        let net = Mlp::zeros(spec).unwrap();
        let tape = net.forward_cached(&[0.4, -0.6]).unwrap();
        let grads = net.backward(&tape, &[vec![1.0]]).unwrap();
        let bias_grad = *grads.weights.last().unwrap();
        assert_eq!(bias_grad, 1.0);
    }

    /// Central-difference check of `backward` on the scalar projection
    /// J = sum_k u_k . out_k with random upstream vectors u.
    fn gradcheck(spec: NetSpec, seed: u64) -> f64 {
        let mut rng = seeded_rng(seed);
        let mut net = Mlp::init(spec.clone(), &mut rng).unwrap();
        let input: Vec<f64> = (0..spec.input_size())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let upstream: Vec<Vec<f64>> = spec
            .heads
            .iter()
            .map(|h| (0..h.size).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();

        let scalar = |net: &Mlp| -> f64 {
            let outs = net.forward(&input).unwrap();
            outs.iter()
                .zip(&upstream)
                .map(|(o, u)| o.iter().zip(u).map(|(a, b)| a * b).sum::<f64>())
                .sum()
        };

        let tape = net.forward_cached(&input).unwrap();
        let analytic = net.backward(&tape, &upstream).unwrap();

        let h = 1e-5;
        let mut max_rel = 0.0f64;
        for i in 0..net.weights.len() {
            let orig = net.weights[i];
            net.weights[i] = orig + h;
            let plus = scalar(&net);
            net.weights[i] = orig - h;
            let minus = scalar(&net);
            net.weights[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic.weights[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
            max_rel = max_rel.max(rel);
        }
        max_rel
    }

    #[test]
    fn backward_matches_central_differences_over_20_seeds() {
        let specs = vec![
            NetSpec::new(
                vec![5, 8, 8],
                vec![
                    HeadSpec {
                        name: "mu".into(),
                        size: 3,
                        activation: Activation::Linear,
                    },
                    HeadSpec {
                        name: "logvar".into(),
                        size: 1,
                        activation: Activation::Linear,
                    },
                ],
            )
            .unwrap(),
            NetSpec::new(
                vec![8, 8, 8],
                vec![HeadSpec {
                    name: "r".into(),
                    size: 1,
                    activation: Activation::Tanh,
                }],
            )
            .unwrap(),
            NetSpec::new(
                vec![3, 4],
                vec![HeadSpec {
                    name: "s".into(),
                    size: 2,
                    activation: Activation::Softplus,
                }],
            )
            .unwrap(),
        ];
        for spec in specs {
            for seed in 0..20 {
                let max_rel = gradcheck(spec.clone(), 1000 + seed);
                assert!(
                    max_rel < 1e-4,
                    "gradcheck failed for {:?} seed {seed}: max rel err {max_rel}",
                    spec.layer_sizes
                );
            }
        }
    }

    #[test]
    fn input_gradient_matches_central_differences() {
        let mut rng = seeded_rng(77);
        let spec = NetSpec::new(
            vec![4, 6],
            vec![HeadSpec {
                name: "r".into(),
                size: 1,
                activation: Activation::Tanh,
            }],
        )
        .unwrap();
        let net = Mlp::init(spec, &mut rng).unwrap();
        let mut input = vec![0.3, -0.1, 0.7, 0.2];
        let tape = net.forward_cached(&input).unwrap();
        let analytic = net.backward(&tape, &[vec![1.0]]).unwrap();
        let h = 1e-5;
        for i in 0..input.len() {
            let orig = input[i];
            input[i] = orig + h;
            let plus = net.forward(&input).unwrap()[0][0];
            input[i] = orig - h;
            let minus = net.forward(&input).unwrap()[0][0];
            input[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let rel = (analytic.input[i] - numeric).abs()
                / analytic.input[i].abs().max(numeric.abs()).max(1e-3);
            assert!(rel < 1e-4, "input grad {i}: rel err {rel}");
        }
    }

    #[test]
    fn gaussian_logpdf_examples() {
        // At the mean with unit variance: -(3/2) ln(2 pi).
        let v = gaussian_logpdf([0.0; 3], [0.0; 3], 1.0).unwrap();
        assert!((v - (-2.756815599614018)).abs() < 1e-12, "got {v}");

        // Translation invariance.
        let a = [0.3, -0.2, 0.9];
        let mu = [0.1, 0.1, 0.5];
        let t = [5.0, -3.0, 2.0];
        let v1 = gaussian_logpdf(a, mu, 0.7).unwrap();
        let v2 = gaussian_logpdf(
            [a[0] + t[0], a[1] + t[1], a[2] + t[2]],
            [mu[0] + t[0], mu[1] + t[1], mu[2] + t[2]],
            0.7,
        )
        .unwrap();
        assert!((v1 - v2).abs() < 1e-12);

        // Monotone decreasing in distance from the mean.
        let mut prev = f64::INFINITY;
        for k in 1..10 {
            let d = k as f64 * 0.1;
            let v = gaussian_logpdf([d, 0.0, 0.0], [0.0; 3], 0.5).unwrap();
            assert!(v < prev);
            prev = v;
        }

        assert!(gaussian_logpdf([0.0; 3], [0.0; 3], 0.0).is_err());
        assert!(gaussian_logpdf([0.0; 3], [0.0; 3], -1.0).is_err());
    }

    #[test]
    fn adam_reduces_a_quadratic() {
        // Minimize (w - 3)^2 from w = 0.
        let mut w = vec![0.0];
        let mut opt = Adam::new(0.05, 1);
        for _ in 0..2000 {
            let g = vec![2.0 * (w[0] - 3.0)];
            opt.step(&mut w, &g);
        }
        assert!((w[0] - 3.0).abs() < 1e-3, "got {}", w[0]);
    }
}
