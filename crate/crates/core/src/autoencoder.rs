//! Single-hidden-layer autoencoder trained with RMSProp on mean squared
//! reconstruction error.
//!
//! ```text
//! h  = act(W_en x + b_en)
//! x' = act(W_de h + b_de)
//! ```
//!
//! `act` is the identity by default; the sigmoid is available as an option.
//! The hidden activations `h` are the extracted features.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Identity,
    Sigmoid,
}

impl Activation {
    fn apply(self, a: &mut Array2<f64>) {
        if self == Activation::Sigmoid {
            a.mapv_inplace(sigmoid);
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, out: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Identity => Array2::ones(out.raw_dim()),
            Activation::Sigmoid => out.mapv(|y| y * (1.0 - y)),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    pub iterations: usize,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub activation: Activation,
    pub seed: u64,
}

impl AutoencoderConfig {
    pub fn new(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            learning_rate: 0.01,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
            iterations: 500,
            batch_size: None,
            activation: Activation::Identity,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.input_dim == 0 || self.hidden_dim == 0 {
            return bad(format!(
                "autoencoder dims must be positive (d={}, M={})",
                self.input_dim, self.hidden_dim
            ));
        }
        if self.iterations == 0 {
            return bad("autoencoder iterations must be positive".into());
        }
        if self.batch_size == Some(0) {
            return bad("batch_size must be positive".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.rmsprop_decay > 0.0 && self.rmsprop_decay < 1.0) {
            return bad(format!(
                "rmsprop_decay must lie in (0, 1), got {}",
                self.rmsprop_decay
            ));
        }
        if !(self.rmsprop_epsilon.is_finite() && self.rmsprop_epsilon > 0.0) {
            return bad(format!(
                "rmsprop_epsilon must be > 0, got {}",
                self.rmsprop_epsilon
            ));
        }
        Ok(())
    }
}

/// Encoder/decoder parameters, or gradients with the same shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// M×d
    pub w_en: Array2<f64>,
    pub b_en: Array1<f64>,
    /// d×M
    pub w_de: Array2<f64>,
    pub b_de: Array1<f64>,
}

impl Params {
    fn zeros(d: usize, m: usize) -> Self {
        Self {
            w_en: Array2::zeros((m, d)),
            b_en: Array1::zeros(m),
            w_de: Array2::zeros((d, m)),
            b_de: Array1::zeros(d),
        }
    }

    fn all_finite(&self) -> bool {
        self.w_en
            .iter()
            .chain(&self.b_en)
            .chain(&self.w_de)
            .chain(&self.b_de)
            .all(|v| v.is_finite())
    }
}

/// Glorot-uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// One RMSProp step on a single tensor.
///
/// `cache <- decay * cache + (1 - decay) * g^2`, then
/// `param <- param - lr * g / (sqrt(cache) + eps)`.
pub fn rmsprop_step<'a>(
    param: impl IntoIterator<Item = &'a mut f64>,
    cache: impl IntoIterator<Item = &'a mut f64>,
    grad: impl IntoIterator<Item = &'a f64>,
    lr: f64,
    decay: f64,
    eps: f64,
) {
    for ((p, c), g) in param.into_iter().zip(cache).zip(grad) {
        *c = decay * *c + (1.0 - decay) * g * g;
        *p -= lr * g / (c.sqrt() + eps);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    pub config: AutoencoderConfig,
    pub params: Params,
    cache: Params,
    pub loss_history: Vec<f64>,
}

/// Batch forward pass, kept for backpropagation.
struct Trace {
    hidden: Array2<f64>,
    output: Array2<f64>,
}

impl AutoencoderModel {
    pub fn init(config: AutoencoderConfig) -> Result<Self> {
        config.validate()?;
        let (d, m) = (config.input_dim, config.hidden_dim);
        let mut prng = rng::derived(config.seed, "ae/init");
        let limit = glorot_limit(d, m);
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite positive limit");
        let mut params = Params::zeros(d, m);
        params.w_en.iter_mut().for_each(|w| *w = dist.sample(&mut prng));
        params.w_de.iter_mut().for_each(|w| *w = dist.sample(&mut prng));
        Ok(Self {
            cache: Params::zeros(d, m),
            params,
            config,
            loss_history: Vec::new(),
        })
    }

    /// Build a model from explicit parameters (shapes checked against `config`).
    pub fn from_params(config: AutoencoderConfig, params: Params) -> Result<Self> {
        config.validate()?;
        let (d, m) = (config.input_dim, config.hidden_dim);
        let shapes_ok = params.w_en.dim() == (m, d)
            && params.b_en.len() == m
            && params.w_de.dim() == (d, m)
            && params.b_de.len() == d;
        if !shapes_ok {
            return Err(Error::Config("parameter shapes do not match config".into()));
        }
        Ok(Self {
            cache: Params::zeros(d, m),
            params,
            config,
            loss_history: Vec::new(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.config.hidden_dim
    }

    fn trace(&self, batch: &Array2<f64>) -> Trace {
        let act = self.config.activation;
        let mut hidden = batch.dot(&self.params.w_en.t()) + &self.params.b_en;
        act.apply(&mut hidden);
        let mut output = hidden.dot(&self.params.w_de.t()) + &self.params.b_de;
        act.apply(&mut output);
        Trace { hidden, output }
    }

    /// `(h, x')` for one input vector.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let batch = ArrayView1::from(x).insert_axis(Axis(0)).to_owned();
        let t = self.trace(&batch);
        Ok((t.hidden.row(0).to_vec(), t.output.row(0).to_vec()))
    }

    /// Batch MSE and its gradient with respect to every parameter.
    ///
    /// The loss is the mean over samples and dimensions of `(x' - x)^2`.
    pub fn loss_and_gradients(&self, batch: &Array2<f64>) -> Result<(f64, Params)> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: batch.ncols(),
            });
        }
        if batch.nrows() == 0 {
            return Err(Error::InsufficientData("empty batch".into()));
        }
        let act = self.config.activation;
        let t = self.trace(batch);
        let diff = &t.output - batch;
        let scale = 1.0 / (batch.len() as f64);
        let loss = diff.mapv(|v| v * v).sum() * scale;

        // dL/d(pre-activation) at the output, then back through the decoder.
        let delta_out = diff * (2.0 * scale) * act.derivative_from_output(&t.output);
        let grad_w_de = delta_out.t().dot(&t.hidden);
        let grad_b_de = delta_out.sum_axis(Axis(0));
        let delta_hidden = delta_out.dot(&self.params.w_de) * act.derivative_from_output(&t.hidden);
        let grad_w_en = delta_hidden.t().dot(batch);
        let grad_b_en = delta_hidden.sum_axis(Axis(0));

        Ok((
            loss,
            Params {
                w_en: grad_w_en,
                b_en: grad_b_en,
                w_de: grad_w_de,
                b_de: grad_b_de,
            },
        ))
    }

    fn apply_rmsprop(&mut self, g: &Params) {
        let (lr, decay, eps) = (
            self.config.learning_rate,
            self.config.rmsprop_decay,
            self.config.rmsprop_epsilon,
        );
        let (p, c) = (&mut self.params, &mut self.cache);
        rmsprop_step(
            p.w_en.iter_mut(),
            c.w_en.iter_mut(),
            g.w_en.iter(),
            lr,
            decay,
            eps,
        );
        rmsprop_step(
            p.b_en.iter_mut(),
            c.b_en.iter_mut(),
            g.b_en.iter(),
            lr,
            decay,
            eps,
        );
        rmsprop_step(
            p.w_de.iter_mut(),
            c.w_de.iter_mut(),
            g.w_de.iter(),
            lr,
            decay,
            eps,
        );
        rmsprop_step(
            p.b_de.iter_mut(),
            c.b_de.iter_mut(),
            g.b_de.iter(),
            lr,
            decay,
            eps,
        );
    }

    /// Run `config.iterations` RMSProp steps on the (unlabeled) features of `data`.
    ///
    /// Mini-batches come from a seeded per-epoch shuffle; each iteration
    /// consumes the next batch. The recorded loss is the batch MSE before
    /// the step.
    pub fn train(mut self, data: &Dataset) -> Result<Self> {
        if data.dims() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: data.dims(),
            });
        }
        if data.is_empty() {
            return Err(Error::InsufficientData(
                "autoencoder needs at least one sample".into(),
            ));
        }
        let x = feature_matrix(data);
        let n = x.nrows();
        let batch_size = self.config.batch_size.unwrap_or(n).min(n);
        let batches_per_epoch = n.div_ceil(batch_size);
        let mut prng = rng::derived(self.config.seed, "ae/batches");
        let mut order: Vec<usize> = (0..n).collect();
        let full = batch_size == n;

        for iteration in 0..self.config.iterations {
            let slot = iteration % batches_per_epoch;
            let (loss, grads) = if full {
                self.loss_and_gradients(&x)?
            } else {
                if slot == 0 {
                    order.shuffle(&mut prng);
                }
                let rows = &order[slot * batch_size..((slot + 1) * batch_size).min(n)];
                self.loss_and_gradients(&x.select(Axis(0), rows))?
            };
            if !loss.is_finite() {
                return Err(Error::Divergence { iteration, loss });
            }
            self.loss_history.push(loss);
            self.apply_rmsprop(&grads);
            if !self.params.all_finite() {
                return Err(Error::Divergence {
                    iteration,
                    loss: f64::NAN,
                });
            }
        }
        Ok(self)
    }

    /// Mean reconstruction MSE over a whole dataset.
    pub fn reconstruction_error(&self, data: &Dataset) -> Result<f64> {
        let x = feature_matrix(data);
        Ok(self.loss_and_gradients(&x)?.0)
    }

    /// Replace each sample by its hidden representation; labels and subjects are kept.
    pub fn encode(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.dims() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: ds.dims(),
            });
        }
        if ds.is_empty() {
            return Dataset::new(Vec::new(), self.hidden_dim(), ds.num_classes(), ds.num_subjects());
        }
        let t = self.trace(&feature_matrix(ds));
        let features = t.hidden.outer_iter().map(|r| r.to_vec()).collect();
        ds.with_features(features)
    }

    pub fn to_file(&self) -> AutoencoderFile {
        let rows = |a: &Array2<f64>| a.outer_iter().map(|r| r.to_vec()).collect();
        AutoencoderFile {
            config: self.config.clone(),
            w_en: rows(&self.params.w_en),
            b_en: self.params.b_en.to_vec(),
            w_de: rows(&self.params.w_de),
            b_de: self.params.b_de.to_vec(),
            loss_history: self.loss_history.clone(),
        }
    }

    pub fn from_file(file: AutoencoderFile) -> Result<Self> {
        let matrix = |rows: Vec<Vec<f64>>, r: usize, c: usize| -> Result<Array2<f64>> {
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            Array2::from_shape_vec((r, c), flat).map_err(|e| Error::Config(format!("bad weight matrix: {e}")))
        };
        let (d, m) = (file.config.input_dim, file.config.hidden_dim);
        let params = Params {
            w_en: matrix(file.w_en, m, d)?,
            b_en: Array1::from(file.b_en),
            w_de: matrix(file.w_de, d, m)?,
            b_de: Array1::from(file.b_de),
        };
        let mut model = Self::from_params(file.config, params)?;
        model.loss_history = file.loss_history;
        Ok(model)
    }
}

/// JSON persistence layout: row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderFile {
    pub config: AutoencoderConfig,
    pub w_en: Vec<Vec<f64>>,
    pub b_en: Vec<f64>,
    pub w_de: Vec<Vec<f64>>,
    pub b_de: Vec<f64>,
    pub loss_history: Vec<f64>,
}

pub fn feature_matrix(ds: &Dataset) -> Array2<f64> {
    let flat: Vec<f64> = ds
        .samples()
        .iter()
        .flat_map(|s| s.features.iter().copied())
        .collect();
    Array2::from_shape_vec((ds.len(), ds.dims()), flat).expect("dataset rows have uniform length")
}

/// Mean over dimensions of `(x - x')^2`.
pub fn mse(x: &[f64], reconstructed: &[f64]) -> Result<f64> {
    if x.len() != reconstructed.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: reconstructed.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::Input("mse of empty vectors".into()));
    }
    let sum: f64 = x.iter().zip(reconstructed).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / x.len() as f64)
}
