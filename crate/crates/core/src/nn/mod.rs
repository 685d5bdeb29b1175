//! Dense feed-forward autoencoder: parameters, traced forward pass,
//! backpropagation and plain SGD.

mod checkpoint;
mod loss;

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;

use crate::error::{invalid, shape, Error, Result};
use crate::matrix::Matrix;
use crate::seed::rng_from;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use loss::{bce_loss, l1_loss, loss_value, LossKind, BCE_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    /// ReLU'(0) is taken as 0.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
            Activation::Identity => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Sigmoid),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "identity" => Ok(Activation::Identity),
            _ => Err(invalid(format!("unknown activation {s:?}"))),
        }
    }
}

/// One dense layer: `out = act(W·in + b)` with `W` stored `out_dim × in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Matrix, biases: Vec<f64>, activation: Activation) -> Result<Self> {
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(invalid("layer dimensions must be >= 1"));
        }
        if biases.len() != weights.rows() {
            return Err(shape(format!("{} biases for {} output nodes", biases.len(), weights.rows())));
        }
        Ok(Self { weights, biases, activation })
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self { weights: Matrix::zeros(out_dim, in_dim), biases: vec![0.0; out_dim], activation }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    /// Pre-activations and activations for a batch.
    fn forward(&self, input: &Matrix) -> (Matrix, Matrix) {
        let (b, out) = (input.rows(), self.out_dim());
        let mut z = Matrix::zeros(b, out);
        let mut a = Matrix::zeros(b, out);
        for i in 0..b {
            let x = input.row(i);
            let zr = z.row_mut(i);
            for (o, zo) in zr.iter_mut().enumerate() {
                *zo = self.biases[o] + dot(self.weights.row(o), x);
            }
            for (ao, &zo) in a.row_mut(i).iter_mut().zip(z.row(i)) {
                *ao = self.activation.apply(zo);
            }
        }
        (z, a)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// An encoder or a decoder: an ordered stack of layers with its own
/// learning rate, so halves from different parents can be recombined.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub learning_rate: f64,
}

impl Network {
    pub fn new(layers: Vec<Layer>, learning_rate: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid("network needs at least one layer"));
        }
        for w in layers.windows(2) {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(shape(format!("layer output {} feeds layer input {}", w[0].out_dim(), w[1].in_dim())));
            }
        }
        check_rate(learning_rate)?;
        Ok(Self { layers, learning_rate })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn weight_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len()).sum()
    }

    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.in_dim() {
            return Err(shape(format!("input has {} columns, network expects {}", input.cols(), self.in_dim())));
        }
        let mut x = self.layers[0].forward(input).1;
        for layer in &self.layers[1..] {
            x = layer.forward(&x).1;
        }
        Ok(x)
    }
}

fn check_rate(lr: f64) -> Result<()> {
    if !(lr.is_finite() && lr > 0.0) {
        return Err(invalid(format!("learning rate must be positive and finite, got {lr}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub encoder: Network,
    pub decoder: Network,
}

impl Autoencoder {
    pub fn new(encoder: Network, decoder: Network) -> Result<Self> {
        if encoder.out_dim() != decoder.in_dim() {
            return Err(shape(format!(
                "encoder emits {} latent values, decoder expects {}",
                encoder.out_dim(),
                decoder.in_dim()
            )));
        }
        if encoder.in_dim() != decoder.out_dim() {
            return Err(shape(format!(
                "encoder input {} differs from decoder output {}",
                encoder.in_dim(),
                decoder.out_dim()
            )));
        }
        Ok(Self { encoder, decoder })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.in_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }

    pub fn weight_count(&self) -> usize {
        self.encoder.weight_count() + self.decoder.weight_count()
    }

    /// Encoder layers followed by decoder layers.
    pub fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.encoder.layers.iter().chain(&self.decoder.layers)
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut Layer> {
        self.encoder.layers.iter_mut().chain(self.decoder.layers.iter_mut())
    }

    pub fn set_learning_rate(&mut self, lr: f64) -> Result<()> {
        check_rate(lr)?;
        self.encoder.learning_rate = lr;
        self.decoder.learning_rate = lr;
        Ok(())
    }
}

/// Layer sizes and activations of an autoencoder. The decoder mirrors the
/// encoder's hidden sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub latent_dim: usize,
    pub hidden_activation: Activation,
    pub latent_activation: Activation,
    pub output_activation: Activation,
    /// Encoder weights start uniform in `±gain/sqrt(in_dim)`.
    pub encoder_init_gain: f64,
    /// Decoder weights start uniform in `±gain/sqrt(in_dim)`.
    pub decoder_init_gain: f64,
}

impl Architecture {
    /// One ReLU layer `n → latent`, one sigmoid layer `latent → n`.
    pub fn shallow(input_dim: usize, latent_dim: usize) -> Self {
        Self {
            input_dim,
            hidden: Vec::new(),
            latent_dim,
            hidden_activation: Activation::Relu,
            latent_activation: Activation::Relu,
            output_activation: Activation::Sigmoid,
            encoder_init_gain: DEFAULT_ENCODER_GAIN,
            decoder_init_gain: DEFAULT_DECODER_GAIN,
        }
    }

    pub fn encoder_sizes(&self) -> Vec<usize> {
        let mut v = vec![self.input_dim];
        v.extend(&self.hidden);
        v.push(self.latent_dim);
        v
    }

    pub fn decoder_sizes(&self) -> Vec<usize> {
        let mut v = vec![self.latent_dim];
        v.extend(self.hidden.iter().rev());
        v.push(self.input_dim);
        v
    }

    pub fn param_count(&self) -> usize {
        let count = |s: &[usize]| s.windows(2).map(|w| w[0] * w[1] + w[1]).sum::<usize>();
        count(&self.encoder_sizes()) + count(&self.decoder_sizes())
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.latent_dim == 0 || self.hidden.contains(&0) {
            return Err(invalid("architecture dimensions must be >= 1"));
        }
        for g in [self.encoder_init_gain, self.decoder_init_gain] {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(invalid("init gains must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// A wide encoder and a near-zero decoder: outputs start close to 0.5, so
/// sigmoid units are not saturated on the wrong side before the latent code
/// separates the inputs. Under L1 loss a saturated wrong output barely moves.
pub const DEFAULT_ENCODER_GAIN: f64 = 4.0;
pub const DEFAULT_DECODER_GAIN: f64 = 0.1;

/// Weights uniform in `±gain/sqrt(in_dim)` with the gain of their half,
/// biases zero.
pub fn init_model(arch: &Architecture, learning_rate: f64, seed: u64) -> Result<Autoencoder> {
    arch.validate()?;
    check_rate(learning_rate)?;
    let mut rng = rng_from(seed);
    let mut build = |sizes: &[usize], last: Activation, gain: f64| -> Result<Network> {
        let n_layers = sizes.len() - 1;
        let layers = (0..n_layers)
            .map(|i| {
                let (fan_in, fan_out) = (sizes[i], sizes[i + 1]);
                let bound = gain / (fan_in as f64).sqrt();
                let data = (0..fan_in * fan_out).map(|_| rng.gen_range(-bound..=bound)).collect();
                let act = if i + 1 == n_layers { last } else { arch.hidden_activation };
                Layer::new(Matrix::from_vec(fan_out, fan_in, data)?, vec![0.0; fan_out], act)
            })
            .collect::<Result<Vec<_>>>()?;
        Network::new(layers, learning_rate)
    };
    let encoder = build(&arch.encoder_sizes(), arch.latent_activation, arch.encoder_init_gain)?;
    let decoder = build(&arch.decoder_sizes(), arch.output_activation, arch.decoder_init_gain)?;
    Autoencoder::new(encoder, decoder)
}

/// Post-activation values of every traversed layer (encoder then decoder),
/// each `batch × out_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub layers: Vec<Matrix>,
}

struct Cache {
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
    post: Vec<Matrix>,
}

fn forward_cached(model: &Autoencoder, batch: &Matrix) -> Result<Cache> {
    if batch.cols() != model.input_dim() {
        return Err(shape(format!("batch has {} columns, model expects {}", batch.cols(), model.input_dim())));
    }
    let n = model.encoder.layers.len() + model.decoder.layers.len();
    let mut cache = Cache { inputs: Vec::with_capacity(n), pre: Vec::with_capacity(n), post: Vec::with_capacity(n) };
    let mut x = batch.clone();
    for layer in model.layers() {
        let (z, a) = layer.forward(&x);
        cache.inputs.push(x);
        cache.pre.push(z);
        x = a.clone();
        cache.post.push(a);
    }
    Ok(cache)
}

/// Reconstructs `batch`; the activation trace is returned iff `trace`.
pub fn forward(model: &Autoencoder, batch: &Matrix, trace: bool) -> Result<(Matrix, Option<ActivationTrace>)> {
    if batch.cols() != model.input_dim() {
        return Err(shape(format!("batch has {} columns, model expects {}", batch.cols(), model.input_dim())));
    }
    if !trace {
        let z = model.encoder.forward(batch)?;
        return Ok((model.decoder.forward(&z)?, None));
    }
    let mut post = Vec::with_capacity(model.encoder.layers.len() + model.decoder.layers.len());
    let mut x = batch.clone();
    for layer in model.layers() {
        x = layer.forward(&x).1;
        post.push(x.clone());
    }
    Ok((x, Some(ActivationTrace { layers: post })))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

/// Gradient of one network, layer-congruent with it.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad { weights: Matrix::zeros(l.out_dim(), l.in_dim()), biases: vec![0.0; l.out_dim()] })
                .collect(),
        }
    }

    fn congruent(&self, net: &Network) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weights.shape() == l.weights.shape() && g.biases.len() == l.biases.len())
    }
}

/// Gradients of the mean loss over `batch` for encoder and decoder, and the
/// loss itself.
pub fn backward(model: &Autoencoder, batch: &Matrix, loss: LossKind) -> Result<(Gradients, Gradients, f64)> {
    let cache = forward_cached(model, batch)?;
    let output = cache.post.last().unwrap();
    let value = loss_value(loss, batch, output)?;
    let mut delta = loss::output_gradient(loss, batch, output);

    let layers: Vec<&Layer> = model.layers().collect();
    let mut grads: Vec<LayerGrad> = Vec::with_capacity(layers.len());
    for li in (0..layers.len()).rev() {
        let layer = layers[li];
        let (z, a, input) = (&cache.pre[li], &cache.post[li], &cache.inputs[li]);
        // dL/dz = dL/da ⊙ act'(z)
        for (d, (&zv, &av)) in delta.as_mut_slice().iter_mut().zip(z.as_slice().iter().zip(a.as_slice())) {
            *d *= layer.activation.derivative(zv, av);
        }
        let mut gw = Matrix::zeros(layer.out_dim(), layer.in_dim());
        let mut gb = vec![0.0; layer.out_dim()];
        for i in 0..batch.rows() {
            let x = input.row(i);
            for (o, &d) in delta.row(i).iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                for (g, &xv) in gw.row_mut(o).iter_mut().zip(x) {
                    *g += d * xv;
                }
            }
        }
        if li > 0 {
            let mut next = Matrix::zeros(batch.rows(), layer.in_dim());
            for i in 0..batch.rows() {
                let out = next.row_mut(i);
                for (o, &d) in delta.row(i).iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    for (nv, &w) in out.iter_mut().zip(layer.weights.row(o)) {
                        *nv += d * w;
                    }
                }
            }
            delta = next;
        }
        grads.push(LayerGrad { weights: gw, biases: gb });
    }
    grads.reverse();
    let dec = grads.split_off(model.encoder.layers.len());
    Ok((Gradients { layers: grads }, Gradients { layers: dec }, value))
}

/// `θ ← θ − lr·∇θ` on both halves, each with its own learning rate. Zeroed
/// (pruned) weights are updated like any other.
pub fn sgd_step(model: &mut Autoencoder, enc: &Gradients, dec: &Gradients) -> Result<()> {
    if !enc.congruent(&model.encoder) || !dec.congruent(&model.decoder) {
        return Err(shape("gradients are not congruent with the model"));
    }
    apply_step(&mut model.encoder, enc);
    apply_step(&mut model.decoder, dec);
    Ok(())
}

fn apply_step(net: &mut Network, grads: &Gradients) {
    let lr = net.learning_rate;
    for (layer, g) in net.layers.iter_mut().zip(&grads.layers) {
        for (w, &gw) in layer.weights.as_mut_slice().iter_mut().zip(g.weights.as_slice()) {
            *w -= lr * gw;
        }
        for (b, &gb) in layer.biases.iter_mut().zip(&g.biases) {
            *b -= lr * gb;
        }
    }
}

/// Non-zero parameter tallies, split by half and by weights/biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParamCounts {
    pub encoder_weights: usize,
    pub encoder_weights_nonzero: usize,
    pub encoder_biases: usize,
    pub encoder_biases_nonzero: usize,
    pub decoder_weights: usize,
    pub decoder_weights_nonzero: usize,
    pub decoder_biases: usize,
    pub decoder_biases_nonzero: usize,
}

impl ParamCounts {
    pub fn encoder_nonzero(&self) -> usize {
        self.encoder_weights_nonzero + self.encoder_biases_nonzero
    }

    pub fn decoder_nonzero(&self) -> usize {
        self.decoder_weights_nonzero + self.decoder_biases_nonzero
    }

    pub fn nonzero(&self) -> usize {
        self.encoder_nonzero() + self.decoder_nonzero()
    }

    pub fn weights_nonzero(&self) -> usize {
        self.encoder_weights_nonzero + self.decoder_weights_nonzero
    }

    pub fn total_weights(&self) -> usize {
        self.encoder_weights + self.decoder_weights
    }

    pub fn total_params(&self) -> usize {
        self.encoder_weights + self.encoder_biases + self.decoder_weights + self.decoder_biases
    }
}

pub fn nonzero_count(model: &Autoencoder) -> ParamCounts {
    let tally = |net: &Network| {
        let mut c = (0, 0, 0, 0);
        for l in &net.layers {
            c.0 += l.weights.len();
            c.1 += l.weights.as_slice().iter().filter(|&&w| w != 0.0).count();
            c.2 += l.biases.len();
            c.3 += l.biases.iter().filter(|&&b| b != 0.0).count();
        }
        c
    };
    let e = tally(&model.encoder);
    let d = tally(&model.decoder);
    ParamCounts {
        encoder_weights: e.0,
        encoder_weights_nonzero: e.1,
        encoder_biases: e.2,
        encoder_biases_nonzero: e.3,
        decoder_weights: d.0,
        decoder_weights_nonzero: d.1,
        decoder_biases: d.2,
        decoder_biases_nonzero: d.3,
    }
}
