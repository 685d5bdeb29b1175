//! Pruning operators. Pruning writes `0.0` into selected parameters; array
//! shapes never change and later gradient steps may revive a pruned weight.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng as _;

use crate::error::{invalid, shape, Error, Result};
use crate::matrix::Matrix;
use crate::nn::{forward, nonzero_count, Autoencoder, Layer};
use crate::seed::Rng;

/// Added to node variances before inverting them.
pub const VARIANCE_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrunerKind {
    None,
    Random,
    Variance,
    Conjunctive,
}

impl PrunerKind {
    pub const ALL: [PrunerKind; 4] =
        [PrunerKind::None, PrunerKind::Random, PrunerKind::Variance, PrunerKind::Conjunctive];

    pub fn as_str(self) -> &'static str {
        match self {
            PrunerKind::None => "none",
            PrunerKind::Random => "random",
            PrunerKind::Variance => "variance",
            PrunerKind::Conjunctive => "conjunctive",
        }
    }
}

impl fmt::Display for PrunerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PrunerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| invalid(format!("unknown pruner {s:?}")))
    }
}

/// Which end of a weight its activation variance is read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceKey {
    #[default]
    Destination,
    Source,
}

impl fmt::Display for VarianceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarianceKey::Destination => "destination",
            VarianceKey::Source => "source",
        })
    }
}

impl FromStr for VarianceKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "destination" => Ok(VarianceKey::Destination),
            "source" => Ok(VarianceKey::Source),
            _ => Err(invalid(format!("unknown variance key {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrunerSpec {
    pub kind: PrunerKind,
    /// Fraction `p_a` of all weights removed per event (random, variance).
    pub fraction: f64,
    /// Normalized-activation threshold (conjunctive).
    pub threshold: f64,
    /// Held-out sample count `h` (conjunctive).
    pub heldout: usize,
    pub variance_key: VarianceKey,
}

impl Default for PrunerSpec {
    fn default() -> Self {
        Self {
            kind: PrunerKind::None,
            fraction: 0.1,
            threshold: 0.1,
            heldout: 5,
            variance_key: VarianceKey::Destination,
        }
    }
}

impl PrunerSpec {
    pub fn validate(&self) -> Result<()> {
        check_fraction(self.fraction)?;
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(invalid(format!("conjunctive threshold {} outside [0,1]", self.threshold)));
        }
        if self.kind == PrunerKind::Conjunctive && self.heldout == 0 {
            return Err(invalid("conjunctive pruning needs at least one held-out sample"));
        }
        Ok(())
    }
}

fn check_fraction(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("pruning fraction {p} outside [0,1]")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Half {
    Encoder,
    Decoder,
}

impl fmt::Display for Half {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Half::Encoder => "encoder",
            Half::Decoder => "decoder",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerPrune {
    pub half: Half,
    pub layer: usize,
    /// Parameters chosen by the operator.
    pub selected: usize,
    /// Of those, how many were non-zero before.
    pub zeroed: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PruneReport {
    pub layers: Vec<LayerPrune>,
}

impl PruneReport {
    pub fn zeroed(&self) -> usize {
        self.layers.iter().map(|l| l.zeroed).sum()
    }

    pub fn selected(&self) -> usize {
        self.layers.iter().map(|l| l.selected).sum()
    }
}

/// Percentage of weights still non-zero, overall and per half.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preserved {
    pub total: f64,
    pub encoder: f64,
    pub decoder: f64,
}

pub fn preserved_percentage(model: &Autoencoder) -> Preserved {
    let c = nonzero_count(model);
    let pct = |a: usize, b: usize| if b == 0 { 100.0 } else { 100.0 * a as f64 / b as f64 };
    Preserved {
        total: pct(c.weights_nonzero(), c.total_weights()),
        encoder: pct(c.encoder_weights_nonzero, c.encoder_weights),
        decoder: pct(c.decoder_weights_nonzero, c.decoder_weights),
    }
}

fn layer_position(model: &Autoencoder, li: usize) -> (Half, usize) {
    let n_enc = model.encoder.layers.len();
    if li < n_enc {
        (Half::Encoder, li)
    } else {
        (Half::Decoder, li - n_enc)
    }
}

/// Zeroes weights addressed by global index (encoder layers then decoder
/// layers, each row-major).
fn zero_weights(model: &mut Autoencoder, mut positions: Vec<usize>) -> PruneReport {
    positions.sort_unstable();
    let n_layers = model.layers().count();
    let mut report = PruneReport::default();
    let mut offset = 0;
    let mut it = positions.into_iter().peekable();
    for li in 0..n_layers {
        let (half, idx) = layer_position(model, li);
        let layer = model.layers_mut().nth(li).unwrap();
        let len = layer.weights.len();
        let mut entry = LayerPrune { half, layer: idx, selected: 0, zeroed: 0 };
        let w = layer.weights.as_mut_slice();
        while let Some(&p) = it.peek() {
            if p >= offset + len {
                break;
            }
            let slot = &mut w[p - offset];
            entry.selected += 1;
            if *slot != 0.0 {
                entry.zeroed += 1;
            }
            *slot = 0.0;
            it.next();
        }
        if entry.selected > 0 {
            report.layers.push(entry);
        }
        offset += len;
    }
    report
}

fn prune_count(fraction: f64, weights: usize) -> usize {
    ((fraction * weights as f64).floor() as usize).min(weights)
}

/// Zeroes `⌊p_a·W⌋` distinct weights chosen uniformly over both halves.
/// Biases are never selected.
pub fn prune_random(model: &mut Autoencoder, fraction: f64, rng: &mut Rng) -> Result<PruneReport> {
    check_fraction(fraction)?;
    let w = model.weight_count();
    let amount = prune_count(fraction, w);
    if amount == 0 {
        return Ok(PruneReport::default());
    }
    let picked = index::sample(rng, w, amount).into_vec();
    Ok(zero_weights(model, picked))
}

/// Per-node population variance of post-activation values over a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeStats {
    /// Variance of each input feature.
    pub input: Vec<f64>,
    /// One vector per layer, encoder first.
    pub layers: Vec<Vec<f64>>,
}

fn column_variance(m: &Matrix) -> Vec<f64> {
    let rows = m.rows() as f64;
    let mut mean = vec![0.0; m.cols()];
    for row in m.iter_rows() {
        for (acc, &v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= rows);
    let mut var = vec![0.0; m.cols()];
    for row in m.iter_rows() {
        for ((acc, &v), &mu) in var.iter_mut().zip(row).zip(&mean) {
            *acc += (v - mu) * (v - mu);
        }
    }
    var.iter_mut().for_each(|v| *v /= rows);
    var
}

pub fn collect_node_variance(model: &Autoencoder, data: &Matrix) -> Result<NodeStats> {
    if data.rows() == 0 {
        return Err(invalid("node statistics need at least one sample"));
    }
    let (_, trace) = forward(model, data, true)?;
    let trace = trace.expect("trace requested");
    Ok(NodeStats { input: column_variance(data), layers: trace.layers.iter().map(column_variance).collect() })
}

/// Unnormalized selection weight `1/(var + ε)` for every weight, in global
/// weight order.
pub fn variance_scores(model: &Autoencoder, stats: &NodeStats, key: VarianceKey) -> Result<Vec<f64>> {
    let layers: Vec<&Layer> = model.layers().collect();
    if stats.layers.len() != layers.len()
        || stats.input.len() != model.input_dim()
        || layers.iter().zip(&stats.layers).any(|(l, s)| l.out_dim() != s.len())
    {
        return Err(shape("node statistics do not match the model"));
    }
    let mut scores = Vec::with_capacity(model.weight_count());
    for (li, layer) in layers.iter().enumerate() {
        let dest = &stats.layers[li];
        let src = if li == 0 { &stats.input } else { &stats.layers[li - 1] };
        for &d in dest.iter().take(layer.out_dim()) {
            for &s in src.iter().take(layer.in_dim()) {
                let v = match key {
                    VarianceKey::Destination => d,
                    VarianceKey::Source => s,
                };
                scores.push(1.0 / (v + VARIANCE_EPS));
            }
        }
    }
    Ok(scores)
}

/// Zeroes `⌊p_a·W⌋` weights sampled without replacement, each weight drawn
/// with probability proportional to its inverse activation variance.
pub fn prune_variance(
    model: &mut Autoencoder,
    stats: &NodeStats,
    fraction: f64,
    key: VarianceKey,
    rng: &mut Rng,
) -> Result<PruneReport> {
    check_fraction(fraction)?;
    let scores = variance_scores(model, stats, key)?;
    let amount = prune_count(fraction, scores.len());
    if amount == 0 {
        return Ok(PruneReport::default());
    }
    let picked = index::sample_weighted(rng, scores.len(), |i| scores[i], amount)
        .map_err(|e| invalid(format!("weighted sampling failed: {e}")))?
        .into_vec();
    Ok(zero_weights(model, picked))
}

/// Row-wise min-max normalization; constant rows map to 0.
fn below_threshold(activations: &Matrix, threshold: f64) -> Vec<Vec<bool>> {
    activations
        .iter_rows()
        .map(|row| {
            let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            row.iter()
                .map(|&v| {
                    let norm = if span > 0.0 { (v - lo) / span } else { 0.0 };
                    norm < threshold
                })
                .collect()
        })
        .collect()
}

/// Node selection for one layer from held-out activations (`h × nodes`).
///
/// A node is selected when its normalized activation is below `threshold`
/// for every remaining sample. While nothing is selected, one uniformly
/// chosen sample is dropped and the conjunction recomputed; once every
/// sample has been dropped the selection is empty.
pub fn conjunctive_select(activations: &Matrix, threshold: f64, rng: &mut Rng) -> Vec<bool> {
    let nodes = activations.cols();
    let rows = below_threshold(activations, threshold);
    let mut remaining: Vec<usize> = (0..rows.len()).collect();
    loop {
        if remaining.is_empty() {
            return vec![false; nodes];
        }
        let sel: Vec<bool> = (0..nodes).map(|j| remaining.iter().all(|&r| rows[r][j])).collect();
        if sel.iter().any(|&s| s) {
            return sel;
        }
        let drop = rng.gen_range(0..remaining.len());
        remaining.remove(drop);
    }
}

/// Applies [`conjunctive_select`] to every layer, zeroing the incoming
/// weights and bias of each selected node.
pub fn prune_conjunctive(
    model: &mut Autoencoder,
    heldout: &Matrix,
    threshold: f64,
    rng: &mut Rng,
) -> Result<PruneReport> {
    if heldout.rows() == 0 {
        return Err(invalid("conjunctive pruning needs at least one held-out sample"));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(invalid(format!("conjunctive threshold {threshold} outside [0,1]")));
    }
    let (_, trace) = forward(model, heldout, true)?;
    let trace = trace.expect("trace requested");
    let mut report = PruneReport::default();
    for (li, acts) in trace.layers.iter().enumerate() {
        let sel = conjunctive_select(acts, threshold, rng);
        let (half, idx) = layer_position(model, li);
        let layer = model.layers_mut().nth(li).unwrap();
        let mut entry = LayerPrune { half, layer: idx, selected: 0, zeroed: 0 };
        for (o, _) in sel.iter().enumerate().filter(|(_, &s)| s) {
            for w in layer.weights.row_mut(o) {
                entry.selected += 1;
                if *w != 0.0 {
                    entry.zeroed += 1;
                }
                *w = 0.0;
            }
            entry.selected += 1;
            if layer.biases[o] != 0.0 {
                entry.zeroed += 1;
            }
            layer.biases[o] = 0.0;
        }
        if entry.selected > 0 {
            report.layers.push(entry);
        }
    }
    Ok(report)
}

/// Runs the operator named by `spec`. `train` feeds variance statistics and
/// `heldout` feeds conjunctive probing.
pub fn apply_pruner(
    spec: &PrunerSpec,
    model: &mut Autoencoder,
    train: &Matrix,
    heldout: &Matrix,
    rng: &mut Rng,
) -> Result<PruneReport> {
    match spec.kind {
        PrunerKind::None => Ok(PruneReport::default()),
        PrunerKind::Random => prune_random(model, spec.fraction, rng),
        PrunerKind::Variance => {
            let stats = collect_node_variance(model, train)?;
            prune_variance(model, &stats, spec.fraction, spec.variance_key, rng)
        }
        PrunerKind::Conjunctive => prune_conjunctive(model, heldout, spec.threshold, rng),
    }
}

#[cfg(test)]
mod tests;
