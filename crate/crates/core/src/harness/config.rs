//! Experiment configuration and its flat `key = value` text form.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::coevolution::CoevParams;
use crate::error::{invalid, parse_err, Error, Result};
use crate::nn::{Activation, Architecture, LossKind, DEFAULT_DECODER_GAIN, DEFAULT_ENCODER_GAIN};
use crate::pruning::{PrunerKind, PrunerSpec, VarianceKey};
use crate::schedule::{default_final_window, ScheduleKind, ScheduleSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trainer {
    Canonical,
    Lipi,
}

impl Trainer {
    pub const ALL: [Trainer; 2] = [Trainer::Canonical, Trainer::Lipi];

    pub fn as_str(self) -> &'static str {
        match self {
            Trainer::Canonical => "canonical",
            Trainer::Lipi => "lipi",
        }
    }
}

impl fmt::Display for Trainer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Trainer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" => Ok(Trainer::Canonical),
            "lipi" => Ok(Trainer::Lipi),
            _ => Err(invalid(format!("unknown trainer {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub per: usize,
    pub q: f64,
    pub hidden: Vec<usize>,
    pub latent: usize,
    pub hidden_activation: Activation,
    pub latent_activation: Activation,
    pub output_activation: Activation,
    pub encoder_init_gain: f64,
    pub decoder_init_gain: f64,
    pub trainer: Trainer,
    pub learning_rate: f64,
    pub cells: usize,
    pub radius: usize,
    pub tournament: usize,
    pub mutation_prob: f64,
    pub mutation_sigma: f64,
    pub lr_min: f64,
    pub lr_max: f64,
    pub batch_size: usize,
    pub eval_batch: usize,
    pub epochs: usize,
    pub schedule: ScheduleKind,
    pub schedule_c: f64,
    /// `None` means `⌈0.1·epochs⌉`.
    pub final_window: Option<usize>,
    pub pruner: PrunerKind,
    pub prune_fraction: f64,
    pub conj_threshold: f64,
    pub heldout: usize,
    pub variance_key: VarianceKey,
    pub loss: LossKind,
    pub trials: usize,
    pub seed: u64,
}

/// Named configuration presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Small enough for a full sweep in minutes.
    Desk,
    /// Full experimental scale: n=1000, 30 trials of 400 epochs.
    Full,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            _ => Err(invalid(format!("unknown profile {s:?}"))),
        }
    }
}

impl ExperimentConfig {
    pub fn profile(p: Profile) -> Self {
        match p {
            Profile::Desk => Self::desk(),
            Profile::Full => Self::full(),
        }
    }

    pub fn full() -> Self {
        Self {
            n: 1000,
            k: 10,
            per: 10,
            q: 0.05,
            hidden: Vec::new(),
            latent: 30,
            hidden_activation: Activation::Relu,
            latent_activation: Activation::Relu,
            output_activation: Activation::Sigmoid,
            encoder_init_gain: DEFAULT_ENCODER_GAIN,
            decoder_init_gain: DEFAULT_DECODER_GAIN,
            trainer: Trainer::Lipi,
            learning_rate: 1e-5,
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
            schedule: ScheduleKind::Exponential,
            schedule_c: 0.5,
            final_window: None,
            pruner: PrunerKind::None,
            prune_fraction: 0.3,
            conj_threshold: 0.1,
            heldout: 5,
            variance_key: VarianceKey::Destination,
            loss: LossKind::L1,
            trials: 30,
            seed: 0,
        }
    }

    pub fn desk() -> Self {
        Self {
            n: 128,
            k: 6,
            per: 10,
            latent: 12,
            epochs: 100,
            trials: 10,
            learning_rate: 4.0,
            lr_max: 40.0,
            ..Self::full()
        }
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            input_dim: self.n,
            hidden: self.hidden.clone(),
            latent_dim: self.latent,
            hidden_activation: self.hidden_activation,
            latent_activation: self.latent_activation,
            output_activation: self.output_activation,
            encoder_init_gain: self.encoder_init_gain,
            decoder_init_gain: self.decoder_init_gain,
        }
    }

    pub fn final_window(&self) -> usize {
        self.final_window.unwrap_or_else(|| default_final_window(self.epochs))
    }

    pub fn schedule_spec(&self) -> ScheduleSpec {
        ScheduleSpec {
            kind: self.schedule,
            c: self.schedule_c,
            total_epochs: self.epochs,
            final_window: self.final_window(),
        }
    }

    pub fn pruner_spec(&self) -> PrunerSpec {
        PrunerSpec {
            kind: self.pruner,
            fraction: self.prune_fraction,
            threshold: self.conj_threshold,
            heldout: self.heldout,
            variance_key: self.variance_key,
        }
    }

    /// Coevolution parameters; for the canonical trainer the ring is a
    /// single cell.
    pub fn coev_params(&self) -> CoevParams {
        let (cells, radius, tournament) = match self.trainer {
            Trainer::Lipi => (self.cells, self.radius, self.tournament),
            Trainer::Canonical => (1, 0, 1),
        };
        CoevParams {
            cells,
            radius,
            tournament,
            mutation_prob: self.mutation_prob,
            mutation_sigma: self.mutation_sigma,
            lr_min: self.lr_min,
            lr_max: self.lr_max,
            batch_size: self.batch_size,
            eval_batch: self.eval_batch,
            epochs: self.epochs,
            schedule: self.schedule_spec(),
            pruner: self.pruner_spec(),
            loss: self.loss,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.per == 0 {
            return Err(invalid("n, k and per must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(invalid(format!("q={} outside [0,1]", self.q)));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate must be positive"));
        }
        if self.pruner == PrunerKind::Conjunctive && self.heldout == 0 {
            return Err(invalid("heldout must be >= 1 for conjunctive pruning"));
        }
        self.architecture().validate()?;
        self.coev_params().validate()
    }

    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn p<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| invalid(format!("bad value {v:?} for {key}")))
        }
        match key {
            "n" => self.n = p(key, value)?,
            "k" => self.k = p(key, value)?,
            "per" => self.per = p(key, value)?,
            "q" => self.q = p(key, value)?,
            "hidden" => {
                self.hidden = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| p(key, s))
                    .collect::<Result<_>>()?
            }
            "latent" => self.latent = p(key, value)?,
            "hidden_activation" => self.hidden_activation = value.parse()?,
            "latent_activation" => self.latent_activation = value.parse()?,
            "output_activation" => self.output_activation = value.parse()?,
            "encoder_init_gain" => self.encoder_init_gain = p(key, value)?,
            "decoder_init_gain" => self.decoder_init_gain = p(key, value)?,
            "trainer" => self.trainer = value.parse()?,
            "learning_rate" => self.learning_rate = p(key, value)?,
            "cells" => self.cells = p(key, value)?,
            "radius" => self.radius = p(key, value)?,
            "tournament" => self.tournament = p(key, value)?,
            "mutation_prob" => self.mutation_prob = p(key, value)?,
            "mutation_sigma" => self.mutation_sigma = p(key, value)?,
            "lr_min" => self.lr_min = p(key, value)?,
            "lr_max" => self.lr_max = p(key, value)?,
            "batch_size" => self.batch_size = p(key, value)?,
            "eval_batch" => self.eval_batch = p(key, value)?,
            "epochs" => self.epochs = p(key, value)?,
            "schedule" => self.schedule = value.parse()?,
            "schedule_c" => self.schedule_c = p(key, value)?,
            "final_window" => self.final_window = if value == "auto" { None } else { Some(p(key, value)?) },
            "pruner" => self.pruner = value.parse()?,
            "prune_fraction" => self.prune_fraction = p(key, value)?,
            "conj_threshold" => self.conj_threshold = p(key, value)?,
            "heldout" => self.heldout = p(key, value)?,
            "variance_key" => self.variance_key = value.parse()?,
            "loss" => self.loss = value.parse()?,
            "trials" => self.trials = p(key, value)?,
            "seed" => self.seed = p(key, value)?,
            _ => return Err(invalid(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file on top of `self`. Blank lines and `#`
    /// comments are ignored; unknown keys are errors.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| parse_err(i + 1, "expected `key = value`"))?;
            self.set(key.trim(), value.trim()).map_err(|e| parse_err(i + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::desk();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let hidden: Vec<String> = self.hidden.iter().map(usize::to_string).collect();
        let fw = self.final_window.map_or_else(|| "auto".to_string(), |v| v.to_string());
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn fmt::Display| writeln!(s, "{k} = {v}").unwrap();
        kv("n", &self.n);
        kv("k", &self.k);
        kv("per", &self.per);
        kv("q", &self.q);
        kv("hidden", &hidden.join(","));
        kv("latent", &self.latent);
        kv("hidden_activation", &self.hidden_activation);
        kv("latent_activation", &self.latent_activation);
        kv("output_activation", &self.output_activation);
        kv("encoder_init_gain", &self.encoder_init_gain);
        kv("decoder_init_gain", &self.decoder_init_gain);
        kv("trainer", &self.trainer);
        kv("learning_rate", &self.learning_rate);
        kv("cells", &self.cells);
        kv("radius", &self.radius);
        kv("tournament", &self.tournament);
        kv("mutation_prob", &self.mutation_prob);
        kv("mutation_sigma", &self.mutation_sigma);
        kv("lr_min", &self.lr_min);
        kv("lr_max", &self.lr_max);
        kv("batch_size", &self.batch_size);
        kv("eval_batch", &self.eval_batch);
        kv("epochs", &self.epochs);
        kv("schedule", &self.schedule);
        kv("schedule_c", &self.schedule_c);
        kv("final_window", &fw);
        kv("pruner", &self.pruner);
        kv("prune_fraction", &self.prune_fraction);
        kv("conj_threshold", &self.conj_threshold);
        kv("heldout", &self.heldout);
        kv("variance_key", &self.variance_key);
        kv("loss", &self.loss);
        kv("trials", &self.trials);
        kv("seed", &self.seed);
        s
    }

    /// File-name stem identifying the trainer/pruner/schedule combination.
    pub fn label(&self) -> String {
        if self.pruner == PrunerKind::None {
            format!("{}_none", self.trainer)
        } else {
            format!("{}_{}_{}", self.trainer, self.pruner, self.schedule)
        }
    }
}
