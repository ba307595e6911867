use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::util::seeded_rng;

use super::loss::{sigmoid, sigmoid_bce, softmax_ce};
use super::ClassifyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Softmax,
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `in × out`, so a batch is `X · W + b`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weights: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }
}

/// Fully connected network: hidden layers with ReLU, linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub head: Head,
}

/// Per-example training targets, one row per example.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Classes(Vec<usize>),
    Bits(Array2<bool>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes(c) => c.len(),
            Targets::Bits(b) => b.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, rows: &[usize]) -> Targets {
        match self {
            Targets::Classes(c) => Targets::Classes(rows.iter().map(|&i| c[i]).collect()),
            Targets::Bits(b) => Targets::Bits(b.select(Axis(0), rows)),
        }
    }
}

/// Gradients with the same shapes as [`Mlp::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

/// Prediction for one example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Prediction {
    Class(usize),
    Classes(Vec<usize>),
}

impl Prediction {
    pub fn classes(&self) -> Vec<usize> {
        match self {
            Prediction::Class(c) => vec![*c],
            Prediction::Classes(c) => c.clone(),
        }
    }
}

/// Argmax with ties going to the smallest index.
pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > values[best] { i } else { best })
}

/// Decision rule applied to raw scores.
pub fn decide(head: Head, logits: &[f64]) -> Prediction {
    match head {
        Head::Softmax => Prediction::Class(argmax(logits)),
        Head::Sigmoid => {
            let on: Vec<usize> = logits
                .iter()
                .enumerate()
                .filter(|(_, &s)| sigmoid(s) >= 0.5)
                .map(|(i, _)| i)
                .collect();
            if on.is_empty() {
                Prediction::Classes(vec![argmax(logits)])
            } else {
                Prediction::Classes(on)
            }
        }
    }
}

impl Mlp {
    /// Glorot-uniform weights and zero biases. `output_scale` multiplies the
    /// final layer's weights.
    pub fn new(
        input_dim: usize,
        hidden: &[usize],
        classes: usize,
        head: Head,
        seed: u64,
        output_scale: f64,
    ) -> Self {
        let mut rng: ChaCha8Rng = seeded_rng(seed, 0x6d6c70);
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(classes);
        let n_layers = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let mut limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                if i + 1 == n_layers {
                    limit *= output_scale;
                }
                let mut d = Dense::zeros(fan_in, fan_out);
                d.weights.mapv_inplace(|_| rng.random_range(-1.0..=1.0) * limit);
                d
            })
            .collect();
        Mlp { layers, head }
    }

    pub fn zeros(input_dim: usize, hidden: &[usize], classes: usize, head: Head) -> Self {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(classes);
        Mlp {
            layers: dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            head,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").outputs()
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(Dense::outputs));
        dims
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Raw scores for a batch.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>, ClassifyError> {
        if x.ncols() != self.input_dim() {
            return Err(ClassifyError::DimMismatch {
                expected: self.input_dim(),
                found: x.ncols(),
            });
        }
        let last = self.layers.len() - 1;
        let mut a = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            a = a.dot(&layer.weights) + &layer.bias;
            if i < last {
                a.mapv_inplace(|v| v.max(0.0));
            }
        }
        Ok(a)
    }

    /// Raw scores `s` for one feature vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, ClassifyError> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("contiguous slice");
        Ok(self.forward_batch(view)?.row(0).to_vec())
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction, ClassifyError> {
        Ok(decide(self.head, &self.forward(x)?))
    }

    /// Mean loss over the batch and its gradient for every parameter.
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<'_, f64>,
        targets: &Targets,
    ) -> Result<(f64, Gradients), ClassifyError> {
        if x.ncols() != self.input_dim() {
            return Err(ClassifyError::DimMismatch {
                expected: self.input_dim(),
                found: x.ncols(),
            });
        }
        let n = x.nrows();
        assert_eq!(n, targets.len(), "one target per example");
        let last = self.layers.len() - 1;

        // Forward, keeping each layer's input activation.
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weights) + &layer.bias;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            activations.push(a);
            a = z;
        }
        let logits = a;

        let mut loss = 0.0;
        let mut delta = Array2::<f64>::zeros(logits.raw_dim());
        for (r, row) in logits.rows().into_iter().enumerate() {
            let row = row.to_vec();
            let (l, g) = match (self.head, targets) {
                (Head::Softmax, Targets::Classes(c)) => softmax_ce(&row, c[r]),
                (Head::Sigmoid, Targets::Bits(b)) => {
                    let bits: Vec<bool> = b.row(r).to_vec();
                    sigmoid_bce(&row, &bits)
                }
                (Head::Softmax, Targets::Bits(_)) | (Head::Sigmoid, Targets::Classes(_)) => {
                    return Err(ClassifyError::HeadMismatch)
                }
            };
            loss += l;
            for (d, g) in delta.row_mut(r).iter_mut().zip(g) {
                *d = g / n as f64;
            }
        }
        loss /= n as f64;

        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let input = &activations[i];
            let dw = input.t().dot(&delta);
            let db = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut next = delta.dot(&self.layers[i].weights.t());
                // ReLU derivative: the stored activation is positive where the unit was on.
                Zip::from(&mut next).and(input).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = next;
            }
            grads.push(Dense { weights: dw, bias: db });
        }
        grads.reverse();
        Ok((loss, Gradients { layers: grads }))
    }

    pub fn loss(&self, x: ArrayView2<'_, f64>, targets: &Targets) -> Result<f64, ClassifyError> {
        self.loss_and_gradients(x, targets).map(|(l, _)| l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    step: i32,
    m: Vec<Dense>,
    v: Vec<Dense>,
}

impl Adam {
    pub fn new(cfg: AdamConfig, model: &Mlp) -> Self {
        let zeros = || {
            model
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs(), l.outputs()))
                .collect::<Vec<_>>()
        };
        Adam {
            cfg,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn step(&mut self, model: &mut Mlp, grads: &Gradients) {
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.step);
        let c2 = 1.0 - beta2.powi(self.step);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (((layer, g), m), v) in model
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            Zip::from(&mut layer.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .and(&g.weights)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(&mut layer.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&g.bias)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
    }
}
