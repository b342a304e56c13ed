use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

pub const DEFAULT_HIDDEN: [usize; 4] = [64, 128, 256, 512];
pub const DEFAULT_DROPOUT: [f64; 4] = [0.20, 0.25, 0.15, 0.20];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Affine layer `x · w + b` with `w` shaped (inputs, outputs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            w: Array2::zeros((inputs, outputs)),
            b: Array1::zeros(outputs),
        }
    }
}

/// Multilayer perceptron mapping a state to one Q-value per action. Hidden
/// layers use ReLU followed by inverted dropout in training mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    pub layers: Vec<Dense>,
    pub dropout: Vec<f64>,
    pub step_count: u64,
}

/// Activations kept for backpropagation.
pub(crate) struct Cache {
    /// Input to each layer (post-dropout for hidden layers).
    pub inputs: Vec<Array2<f64>>,
    /// Pre-activation of each hidden layer.
    pub pre: Vec<Array2<f64>>,
    /// Dropout scale per hidden unit (0 or 1/(1-p)); `None` in eval mode.
    pub masks: Vec<Option<Array2<f64>>>,
    pub output: Array2<f64>,
}

impl QNetwork {
    /// He-uniform weights, zero biases.
    pub fn new(input: usize, hidden: &[usize], dropout: &[f64], actions: usize, rng: &mut SimRng) -> Result<Self> {
        let mut net = Self::zeros(input, hidden, dropout, actions)?;
        for layer in &mut net.layers {
            let limit = (6.0 / layer.w.nrows() as f64).sqrt();
            layer.w.mapv_inplace(|_| rng.random_range(-limit..limit));
        }
        Ok(net)
    }

    pub fn zeros(input: usize, hidden: &[usize], dropout: &[f64], actions: usize) -> Result<Self> {
        if dropout.len() != hidden.len() {
            return Err(Error::Config(format!(
                "{} dropout rates for {} hidden layers",
                dropout.len(),
                hidden.len()
            )));
        }
        if let Some(p) = dropout.iter().find(|p| !(0.0..1.0).contains(*p)) {
            return Err(Error::Config(format!("dropout rate {p} outside [0, 1)")));
        }
        if input == 0 || actions == 0 || hidden.contains(&0) {
            return Err(Error::Config("network layers need at least one unit".into()));
        }
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(actions);
        Ok(Self {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            dropout: dropout.to_vec(),
            step_count: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.layers.last().unwrap().w.ncols()
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| l.w.dim()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    pub fn weight_sq_norm(&self) -> f64 {
        self.layers.iter().map(|l| l.w.iter().map(|v| v * v).sum::<f64>()).sum()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        Ok(())
    }

    /// Q-values for a batch of states (one row each). `rng` is only drawn
    /// from in training mode.
    pub fn forward(&self, x: ArrayView2<f64>, mode: Mode, rng: &mut SimRng) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let dropout_rng = match mode {
            Mode::Train => Some(rng),
            Mode::Eval => None,
        };
        Ok(self.forward_cache(x, dropout_rng).output)
    }

    /// Deterministic evaluation-mode Q-values.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        Ok(self.forward_cache(x, None).output)
    }

    pub(crate) fn forward_cache(&self, x: ArrayView2<f64>, mut dropout_rng: Option<&mut SimRng>) -> Cache {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut masks = Vec::with_capacity(last);
        let mut a = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = a.dot(&layer.w) + &layer.b;
            inputs.push(a);
            if i == last {
                return Cache {
                    inputs,
                    pre,
                    masks,
                    output: z,
                };
            }
            let mut h = z.mapv(|v| v.max(0.0));
            let p = self.dropout[i];
            let mask = match dropout_rng.as_deref_mut() {
                Some(rng) if p > 0.0 => {
                    let scale = 1.0 / (1.0 - p);
                    let m = Array2::from_shape_fn(h.dim(), |_| {
                        if rng.random::<f64>() < p {
                            0.0
                        } else {
                            scale
                        }
                    });
                    h *= &m;
                    Some(m)
                }
                _ => None,
            };
            pre.push(z);
            masks.push(mask);
            a = h;
        }
        unreachable!("network has an output layer")
    }

    /// Parameter gradients given dLoss/dOutput.
    pub(crate) fn backward(&self, cache: &Cache, d_out: Array2<f64>) -> Vec<Dense> {
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        let mut delta = d_out;
        for i in (0..self.layers.len()).rev() {
            let gw = cache.inputs[i].t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            grads.push(Dense { w: gw, b: gb });
            if i == 0 {
                break;
            }
            let mut d = delta.dot(&self.layers[i].w.t());
            if let Some(m) = &cache.masks[i - 1] {
                d *= m;
            }
            Zip::from(&mut d)
                .and(&cache.pre[i - 1])
                .for_each(|g, &z| {
                    if z <= 0.0 {
                        *g = 0.0
                    }
                });
            delta = d;
        }
        grads.reverse();
        grads
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
