use rand::Rng;
use serde::{Deserialize, Serialize};

/// Fully connected layer, weights stored row-major as `out_dim × in_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    /// Uniform in `±1/sqrt(fan_in)`, zero bias.
    pub fn init<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (in_dim.max(1) as f64).sqrt();
        Dense {
            in_dim,
            out_dim,
            weights: (0..in_dim * out_dim)
                .map(|_| rng.gen_range(-bound..=bound))
                .collect(),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Dense {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        self.weights
            .chunks_exact(self.in_dim.max(1))
            .take(self.out_dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b)
            .collect()
    }

    /// Accumulates parameter gradients for upstream `dy` and returns `dL/dx`.
    fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Dense) -> Vec<f64> {
        let mut dx = vec![0.0; self.in_dim];
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.bias[o] += g;
            let row = o * self.in_dim;
            for i in 0..self.in_dim {
                grad.weights[row + i] += g * x[i];
                dx[i] += g * self.weights[row + i];
            }
        }
        dx
    }
}

/// One tanh hidden layer followed by a sigmoid output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub hidden: Dense,
    pub output: Dense,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    pub input: Vec<f64>,
    pub hidden: Vec<f64>,
    pub probs: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Mlp {
    pub fn init<R: Rng>(in_dim: usize, hidden: usize, out_dim: usize, rng: &mut R) -> Self {
        Mlp {
            hidden: Dense::init(in_dim, hidden, rng),
            output: Dense::init(hidden, out_dim, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            hidden: Dense::zeros(self.hidden.in_dim, self.hidden.out_dim),
            output: Dense::zeros(self.output.in_dim, self.output.out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.hidden.in_dim
    }

    pub fn forward(&self, input: Vec<f64>) -> MlpTrace {
        let hidden: Vec<f64> = self.hidden.forward(&input).into_iter().map(f64::tanh).collect();
        let probs = self.output.forward(&hidden).into_iter().map(sigmoid).collect();
        MlpTrace {
            input,
            hidden,
            probs,
        }
    }

    pub fn probs(&self, input: &[f64]) -> Vec<f64> {
        self.forward(input.to_vec()).probs
    }

    /// Given `dL/dlogits`, accumulates into `grad` and returns `dL/dinput`.
    pub fn backward(&self, trace: &MlpTrace, d_logits: &[f64], grad: &mut Mlp) -> Vec<f64> {
        let d_hidden = self.output.backward(&trace.hidden, d_logits, &mut grad.output);
        let d_pre: Vec<f64> = d_hidden
            .iter()
            .zip(&trace.hidden)
            .map(|(d, h)| d * (1.0 - h * h))
            .collect();
        self.hidden.backward(&trace.input, &d_pre, &mut grad.hidden)
    }

    pub(crate) fn buffers(&self) -> [&Vec<f64>; 4] {
        [&self.hidden.weights, &self.hidden.bias, &self.output.weights, &self.output.bias]
    }

    pub(crate) fn buffers_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [
            &mut self.hidden.weights,
            &mut self.hidden.bias,
            &mut self.output.weights,
            &mut self.output.bias,
        ]
    }
}
