//! Spatial cooperative coevolution of encoders and decoders on a ring, and
//! the single-autoencoder baseline that shares its training and pruning
//! hooks.
//!
//! Each generation every cell copies the centers of its `2r+1` neighbors,
//! mutates their learning rates, scores every encoder × decoder pairing,
//! picks one encoder and one decoder by tournament, trains that pair for an
//! epoch, scores the neighborhood again, possibly prunes the trained pair,
//! and installs the best-scoring pairing as its new center. Cells only read the previous
//! generation's centers, so they run concurrently.

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::matrix::Matrix;
use crate::nn::{
    backward, forward, init_model, loss_value, nonzero_count, sgd_step, Architecture, Autoencoder, LossKind, Network,
};
use crate::pruning::{apply_pruner, preserved_percentage, Preserved, PruneReport, PrunerKind, PrunerSpec};
use crate::schedule::{prune_probability, ScheduleKind, ScheduleSpec};
use crate::seed::{derive, stream_rng, Rng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct CoevParams {
    /// Ring size `Z`.
    pub cells: usize,
    /// Neighborhood radius `r`.
    pub radius: usize,
    /// Tournament size `τ`.
    pub tournament: usize,
    /// Learning-rate mutation probability `β`.
    pub mutation_prob: f64,
    /// Standard deviation of the log-normal learning-rate step.
    pub mutation_sigma: f64,
    pub lr_min: f64,
    pub lr_max: f64,
    pub batch_size: usize,
    /// Samples in the per-generation evaluation batch.
    pub eval_batch: usize,
    pub epochs: usize,
    pub schedule: ScheduleSpec,
    pub pruner: PrunerSpec,
    pub loss: LossKind,
}

impl Default for CoevParams {
    fn default() -> Self {
        Self {
            cells: 5,
            radius: 1,
            tournament: 2,
            mutation_prob: 0.5,
            mutation_sigma: 0.1,
            lr_min: 1e-8,
            lr_max: 1e-1,
            batch_size: 5,
            eval_batch: 20,
            epochs: 400,
            schedule: ScheduleSpec::with_defaults(ScheduleKind::Fixed, 400),
            pruner: PrunerSpec::default(),
            loss: LossKind::L1,
        }
    }
}

impl CoevParams {
    pub fn neighborhood_size(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells == 0 {
            return Err(invalid("ring needs at least one cell"));
        }
        if self.neighborhood_size() > self.cells {
            return Err(invalid(format!(
                "neighborhood size {} exceeds ring size {}",
                self.neighborhood_size(),
                self.cells
            )));
        }
        if self.tournament == 0 || self.tournament > self.neighborhood_size() {
            return Err(invalid(format!(
                "tournament size {} must lie in [1, {}]",
                self.tournament,
                self.neighborhood_size()
            )));
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(invalid(format!("mutation probability {} outside [0,1]", self.mutation_prob)));
        }
        if !(self.mutation_sigma >= 0.0 && self.mutation_sigma.is_finite()) {
            return Err(invalid("mutation sigma must be finite and >= 0"));
        }
        if !(0.0 < self.lr_min && self.lr_min <= self.lr_max && self.lr_max.is_finite()) {
            return Err(invalid("learning-rate bounds must satisfy 0 < min <= max"));
        }
        if self.batch_size == 0 || self.eval_batch == 0 {
            return Err(invalid("batch sizes must be >= 1"));
        }
        if self.schedule.total_epochs != self.epochs {
            return Err(invalid("schedule length must equal the number of epochs"));
        }
        self.schedule.validate()?;
        self.pruner.validate()
    }
}

/// Dense inputs for one run.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub train: Matrix,
    pub test: Matrix,
    /// Probes for conjunctive pruning; never trained on.
    pub heldout: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    radius: usize,
    cells: Vec<Autoencoder>,
}

impl Ring {
    /// `cells` independently initialized autoencoders; cell `k` draws its
    /// weights from the `(seed, init, k)` stream.
    pub fn build(cells: usize, radius: usize, arch: &Architecture, learning_rate: f64, seed: u64) -> Result<Self> {
        if cells == 0 || 2 * radius + 1 > cells {
            return Err(invalid(format!("neighborhood size {} exceeds ring size {cells}", 2 * radius + 1)));
        }
        let cells = (0..cells)
            .map(|k| init_model(arch, learning_rate, derive(seed, Stream::Init, k as u64, 0)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { radius, cells })
    }

    pub fn from_cells(cells: Vec<Autoencoder>, radius: usize) -> Result<Self> {
        if cells.is_empty() || 2 * radius + 1 > cells.len() {
            return Err(invalid("neighborhood larger than ring"));
        }
        Ok(Self { radius, cells })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn cells(&self) -> &[Autoencoder] {
        &self.cells
    }

    pub fn neighborhood_size(&self) -> usize {
        2 * self.radius + 1
    }

    /// Cell indices `k−r ..= k+r` modulo `Z`; the center sits at position `r`.
    pub fn neighborhood(&self, k: usize) -> Vec<usize> {
        let z = self.cells.len();
        (0..self.neighborhood_size()).map(|i| (k + z + i - self.radius) % z).collect()
    }

    /// Copies of the neighborhood centers of cell `k`.
    pub fn subpopulation(&self, k: usize) -> Subpopulation {
        let (encoders, decoders) = self
            .neighborhood(k)
            .into_iter()
            .map(|i| (self.cells[i].encoder.clone(), self.cells[i].decoder.clone()))
            .unzip();
        Subpopulation { encoders, decoders }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subpopulation {
    pub encoders: Vec<Network>,
    pub decoders: Vec<Network>,
}

impl Subpopulation {
    pub fn len(&self) -> usize {
        self.encoders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encoders.is_empty()
    }

    pub fn pair(&self, e: usize, d: usize) -> Result<Autoencoder> {
        Autoencoder::new(self.encoders[e].clone(), self.decoders[d].clone())
    }
}

/// Loss of encoder `i` composed with decoder `j`, for all `i, j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessMatrix {
    size: usize,
    values: Vec<f64>,
}

impl FitnessMatrix {
    pub fn from_values(size: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != size * size {
            return Err(invalid("fitness matrix must be square"));
        }
        Ok(Self { size, values })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, e: usize, d: usize) -> f64 {
        self.values[e * self.size + d]
    }

    /// Best loss encoder `e` achieves with any decoder.
    pub fn encoder_fitness(&self, e: usize) -> f64 {
        (0..self.size).map(|d| self.get(e, d)).fold(f64::INFINITY, f64::min)
    }

    /// Best loss decoder `d` achieves with any encoder.
    pub fn decoder_fitness(&self, d: usize) -> f64 {
        (0..self.size).map(|e| self.get(e, d)).fold(f64::INFINITY, f64::min)
    }

    /// Lowest-loss pairing; ties go to the first in row-major order.
    pub fn argmin(&self) -> (usize, usize) {
        let mut best = 0;
        for i in 1..self.values.len() {
            if self.values[i] < self.values[best] {
                best = i;
            }
        }
        (best / self.size, best % self.size)
    }

    pub fn min(&self) -> f64 {
        let (e, d) = self.argmin();
        self.get(e, d)
    }
}

pub fn evaluate_pairs(sub: &Subpopulation, batch: &Matrix, loss: LossKind) -> Result<FitnessMatrix> {
    if batch.rows() == 0 {
        return Err(invalid("evaluation batch is empty"));
    }
    let s = sub.len();
    let latents = sub.encoders.iter().map(|e| e.forward(batch)).collect::<Result<Vec<_>>>()?;
    let mut values = Vec::with_capacity(s * s);
    for z in &latents {
        for d in &sub.decoders {
            values.push(loss_value(loss, batch, &d.forward(z)?)?);
        }
    }
    FitnessMatrix::from_values(s, values)
}

fn tournament(fitness: impl Fn(usize) -> f64, s: usize, tau: usize, rng: &mut Rng) -> usize {
    let mut entrants = index::sample(rng, s, tau).into_vec();
    entrants.sort_unstable();
    let mut best = entrants[0];
    for &i in &entrants[1..] {
        if fitness(i) < fitness(best) {
            best = i;
        }
    }
    best
}

/// Independent tournaments of `τ` distinct entrants for the encoder role
/// (row minimum) and the decoder role (column minimum). Returns the winning
/// encoder and decoder indices.
pub fn tournament_select(fitness: &FitnessMatrix, tau: usize, rng: &mut Rng) -> Result<(usize, usize)> {
    let s = fitness.size();
    if tau == 0 || tau > s {
        return Err(invalid(format!("tournament size {tau} must lie in [1, {s}]")));
    }
    let e = tournament(|i| fitness.encoder_fitness(i), s, tau, rng);
    let d = tournament(|j| fitness.decoder_fitness(j), s, tau, rng);
    Ok((e, d))
}

/// With probability `β` per network, multiplies its learning rate by
/// `exp(g)`, `g ~ N(0, σ²)`, then clamps to `[lr_min, lr_max]`.
pub fn mutate_learning_rate(
    sub: &mut Subpopulation,
    beta: f64,
    sigma: f64,
    bounds: (f64, f64),
    rng: &mut Rng,
) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(invalid(format!("mutation probability {beta} outside [0,1]")));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
    for net in sub.encoders.iter_mut().chain(sub.decoders.iter_mut()) {
        if rng.gen_bool(beta) {
            let step = normal.sample(rng);
            net.learning_rate = (net.learning_rate * step.exp()).clamp(bounds.0, bounds.1);
        }
    }
    Ok(())
}

/// One pass of minibatch SGD over `train` in a shuffled order.
pub fn train_epoch(
    model: &mut Autoencoder,
    train: &Matrix,
    batch_size: usize,
    loss: LossKind,
    rng: &mut Rng,
) -> Result<()> {
    let mut order: Vec<usize> = (0..train.rows()).collect();
    order.shuffle(rng);
    for chunk in order.chunks(batch_size) {
        let batch = train.select_rows(chunk);
        let (ge, gd, _) = backward(model, &batch, loss)?;
        sgd_step(model, &ge, &gd)?;
    }
    Ok(())
}

/// One Bernoulli draw with `p_p(t)`; on success applies the pruner.
pub fn prune_step(
    model: &mut Autoencoder,
    params: &CoevParams,
    data: &TrainingData,
    t: usize,
    neighborhood_size: usize,
    rng: &mut Rng,
) -> Result<Option<PruneReport>> {
    let p = prune_probability(&params.schedule, t, neighborhood_size)?;
    let fire = rng.gen::<f64>() < p;
    if !fire || params.pruner.kind == PrunerKind::None {
        return Ok(None);
    }
    apply_pruner(&params.pruner, model, &data.train, &data.heldout, rng).map(Some)
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub center: Autoencoder,
    pub prune: Option<PruneReport>,
    /// Lowest entry of the pre-training fitness matrix.
    pub min_selection_loss: f64,
}

/// One generation of one cell. `center` is the position of the cell's own
/// pair inside `sub`; `seed`/`cell`/`t` select the RNG streams. The new
/// center is the lowest-loss pairing of the neighborhood after training.
pub fn cell_step(
    mut sub: Subpopulation,
    center: usize,
    data: &TrainingData,
    params: &CoevParams,
    seed: u64,
    cell: usize,
    t: usize,
) -> Result<CellOutcome> {
    let (c, tt) = (cell as u64, t as u64);
    let mut evolve = stream_rng(seed, Stream::Evolve, c, tt);
    let mut shuffle = stream_rng(seed, Stream::Shuffle, c, tt);
    let mut prune = stream_rng(seed, Stream::Prune, c, tt);

    mutate_learning_rate(
        &mut sub,
        params.mutation_prob,
        params.mutation_sigma,
        (params.lr_min, params.lr_max),
        &mut evolve,
    )?;
    let m = data.train.rows();
    let eval_idx = index::sample(&mut evolve, m, params.eval_batch.min(m)).into_vec();
    let eval = data.train.select_rows(&eval_idx);

    let fitness = evaluate_pairs(&sub, &eval, params.loss)?;
    let (e, d) = tournament_select(&fitness, params.tournament, &mut evolve)?;
    let mut trained = sub.pair(e, d)?;
    train_epoch(&mut trained, &data.train, params.batch_size, params.loss, &mut shuffle)?;

    // The trained pair takes the cell's own slot and the neighborhood is
    // scored again. Pruning happens after scoring, so a pruned pair competes
    // with its pre-pruning loss.
    sub.encoders[center] = trained.encoder;
    sub.decoders[center] = trained.decoder;
    let after = evaluate_pairs(&sub, &eval, params.loss)?;
    let mut pruned = sub.pair(center, center)?;
    let report = prune_step(&mut pruned, params, data, t, sub.len(), &mut prune)?;
    sub.encoders[center] = pruned.encoder;
    sub.decoders[center] = pruned.decoder;
    let (be, bd) = after.argmin();
    Ok(CellOutcome { center: sub.pair(be, bd)?, prune: report, min_selection_loss: fitness.min() })
}

/// Per-epoch state of one autoencoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// `None` for the single-autoencoder baseline.
    pub cell: Option<usize>,
    pub train_loss: f64,
    pub test_loss: f64,
    pub preserved: Preserved,
    pub nonzero_params: usize,
    pub learning_rate: f64,
    pub prune_event: bool,
    pub min_selection_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneEvent {
    pub epoch: usize,
    pub cell: Option<usize>,
    pub report: PruneReport,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub best: Autoencoder,
    pub best_cell: Option<usize>,
    /// Epoch 0 is the initial state; epochs `1..=T` follow each generation.
    pub history: Vec<EpochMetrics>,
    pub prune_log: Vec<PruneEvent>,
}

fn dataset_loss(model: &Autoencoder, x: &Matrix, loss: LossKind) -> Result<f64> {
    let (out, _) = forward(model, x, false)?;
    loss_value(loss, x, &out)
}

fn measure(
    model: &Autoencoder,
    data: &TrainingData,
    loss: LossKind,
    epoch: usize,
    cell: Option<usize>,
    prune_event: bool,
    min_selection_loss: Option<f64>,
) -> Result<EpochMetrics> {
    Ok(EpochMetrics {
        epoch,
        cell,
        train_loss: dataset_loss(model, &data.train, loss)?,
        test_loss: dataset_loss(model, &data.test, loss)?,
        preserved: preserved_percentage(model),
        nonzero_params: nonzero_count(model).nonzero(),
        learning_rate: 0.5 * (model.encoder.learning_rate + model.decoder.learning_rate),
        prune_event,
        min_selection_loss,
    })
}

/// A Lipi run advanced one generation at a time.
#[derive(Debug, Clone)]
pub struct LipiRun {
    ring: Ring,
    params: CoevParams,
    seed: u64,
    epoch: usize,
    history: Vec<EpochMetrics>,
    prune_log: Vec<PruneEvent>,
}

impl LipiRun {
    /// Records the epoch-0 state of every cell.
    pub fn new(data: &TrainingData, ring: Ring, params: &CoevParams, seed: u64) -> Result<Self> {
        params.validate()?;
        if ring.len() != params.cells || ring.radius() != params.radius {
            return Err(invalid("ring shape does not match parameters"));
        }
        let mut history = Vec::with_capacity((params.epochs + 1) * ring.len());
        let initial = ring
            .cells
            .par_iter()
            .enumerate()
            .map(|(k, m)| measure(m, data, params.loss, 0, Some(k), false, None))
            .collect::<Result<Vec<_>>>()?;
        history.extend(initial);
        Ok(Self { ring, params: params.clone(), seed, epoch: 0, history, prune_log: Vec::new() })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.params.epochs
    }

    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    pub fn history(&self) -> &[EpochMetrics] {
        &self.history
    }

    pub fn prune_log(&self) -> &[PruneEvent] {
        &self.prune_log
    }

    /// Runs the next generation; returns `false` once all epochs are done.
    /// Work is spread over the current rayon pool; results do not depend on
    /// its size.
    pub fn step(&mut self, data: &TrainingData) -> Result<bool> {
        if self.is_done() {
            return Ok(false);
        }
        let t = self.epoch + 1;
        let (ring, params, seed) = (&self.ring, &self.params, self.seed);
        let outcomes = (0..ring.len())
            .into_par_iter()
            .map(|k| {
                let out = cell_step(ring.subpopulation(k), ring.radius, data, params, seed, k, t)?;
                let m = measure(
                    &out.center,
                    data,
                    params.loss,
                    t,
                    Some(k),
                    out.prune.is_some(),
                    Some(out.min_selection_loss),
                )?;
                Ok((out, m))
            })
            .collect::<Result<Vec<_>>>()?;
        // Generation barrier: centers are swapped only after every cell is done.
        for (k, (out, m)) in outcomes.into_iter().enumerate() {
            if let Some(report) = out.prune {
                self.prune_log.push(PruneEvent { epoch: t, cell: Some(k), report });
            }
            self.ring.cells[k] = out.center;
            self.history.push(m);
        }
        self.epoch = t;
        Ok(true)
    }

    /// Index of the cell with the lowest training loss in the latest epoch.
    pub fn best_cell(&self) -> usize {
        let last = &self.history[self.history.len() - self.ring.len()..];
        let mut best = 0;
        for k in 1..last.len() {
            if last[k].train_loss < last[best].train_loss {
                best = k;
            }
        }
        best
    }

    pub fn finish(self) -> RunResult {
        let best = self.best_cell();
        RunResult {
            best: self.ring.cells[best].clone(),
            best_cell: Some(best),
            history: self.history,
            prune_log: self.prune_log,
        }
    }
}

/// Runs `params.epochs` synchronized generations over `ring` and returns the
/// center with the lowest training loss.
pub fn run_lipi(data: &TrainingData, ring: Ring, params: &CoevParams, seed: u64) -> Result<RunResult> {
    let mut run = LipiRun::new(data, ring, params, seed)?;
    while run.step(data)? {}
    Ok(run.finish())
}

/// Plain SGD on one autoencoder, advanced one epoch at a time. The model and
/// its RNG streams are those of ring cell 0.
#[derive(Debug, Clone)]
pub struct CanonicalRun {
    model: Autoencoder,
    params: CoevParams,
    seed: u64,
    epoch: usize,
    history: Vec<EpochMetrics>,
    prune_log: Vec<PruneEvent>,
}

impl CanonicalRun {
    pub fn new(
        data: &TrainingData,
        arch: &Architecture,
        learning_rate: f64,
        params: &CoevParams,
        seed: u64,
    ) -> Result<Self> {
        if params.schedule.total_epochs != params.epochs {
            return Err(invalid("schedule length must equal the number of epochs"));
        }
        params.schedule.validate()?;
        params.pruner.validate()?;
        if params.batch_size == 0 {
            return Err(invalid("batch size must be >= 1"));
        }
        let model = init_model(arch, learning_rate, derive(seed, Stream::Init, 0, 0))?;
        let mut history = Vec::with_capacity(params.epochs + 1);
        history.push(measure(&model, data, params.loss, 0, None, false, None)?);
        Ok(Self { model, params: params.clone(), seed, epoch: 0, history, prune_log: Vec::new() })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.params.epochs
    }

    pub fn model(&self) -> &Autoencoder {
        &self.model
    }

    pub fn history(&self) -> &[EpochMetrics] {
        &self.history
    }

    pub fn prune_log(&self) -> &[PruneEvent] {
        &self.prune_log
    }

    /// One epoch of SGD followed by the pruning hook; `false` once done.
    pub fn step(&mut self, data: &TrainingData) -> Result<bool> {
        if self.is_done() {
            return Ok(false);
        }
        let t = self.epoch + 1;
        let mut shuffle = stream_rng(self.seed, Stream::Shuffle, 0, t as u64);
        let mut prune = stream_rng(self.seed, Stream::Prune, 0, t as u64);
        train_epoch(&mut self.model, &data.train, self.params.batch_size, self.params.loss, &mut shuffle)?;
        let report = prune_step(&mut self.model, &self.params, data, t, 1, &mut prune)?;
        self.history.push(measure(&self.model, data, self.params.loss, t, None, report.is_some(), None)?);
        if let Some(report) = report {
            self.prune_log.push(PruneEvent { epoch: t, cell: None, report });
        }
        self.epoch = t;
        Ok(true)
    }

    pub fn finish(self) -> RunResult {
        RunResult { best: self.model, best_cell: None, history: self.history, prune_log: self.prune_log }
    }
}

pub fn run_canonical(
    data: &TrainingData,
    arch: &Architecture,
    learning_rate: f64,
    params: &CoevParams,
    seed: u64,
) -> Result<RunResult> {
    let mut run = CanonicalRun::new(data, arch, learning_rate, params, seed)?;
    while run.step(data)? {}
    Ok(run.finish())
}

#[cfg(test)]
mod tests;
