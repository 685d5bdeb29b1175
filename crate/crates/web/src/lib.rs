//! WebAssembly bindings for the browser demo in `www/`.
//!
//! The plain-Rust types ([`Preview`], [`Session`]) hold the logic so they can
//! be tested natively; the `Js*` wrappers only convert errors.

use wasm_bindgen::prelude::*;

use coevo_prune::coevolution::{CanonicalRun, EpochMetrics, LipiRun, Ring, TrainingData};
use coevo_prune::harness::{trial_seed, ExperimentConfig, Trainer, TrialProblem};
use coevo_prune::schedule::{prune_probability, ScheduleKind, ScheduleSpec};
use coevo_prune::Result;

/// `p_p(t)` for `t = 0..=epochs`.
pub fn curve(kind: &str, c: f64, epochs: usize, neighborhood: usize) -> Result<Vec<f64>> {
    let kind: ScheduleKind = kind.parse()?;
    let final_window = coevo_prune::schedule::default_final_window(epochs);
    let spec = ScheduleSpec::new(kind, c, epochs, final_window)?;
    (0..=epochs).map(|t| prune_probability(&spec, t, neighborhood)).collect()
}

/// One trial's training split with its cluster labels and oracle loss.
#[derive(Debug, Clone)]
pub struct Preview {
    pub n: usize,
    pub k: usize,
    pub bits: Vec<u8>,
    pub clusters: Vec<u32>,
    pub centroids: Vec<u8>,
    pub oracle_loss: f64,
}

fn desk_config(pairs: &[(&str, String)]) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::desk();
    for (k, v) in pairs {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn preview(n: usize, k: usize, per: usize, q: f64, seed: u32) -> Result<Preview> {
    let cfg =
        desk_config(&[("n", n.to_string()), ("k", k.to_string()), ("per", per.to_string()), ("q", q.to_string())])?;
    let p = TrialProblem::build(&cfg, u64::from(seed))?;
    let bits = (0..p.train.len()).flat_map(|i| p.train.sample(i).to_vec()).collect();
    Ok(Preview {
        n,
        k,
        bits,
        clusters: p.train.source_index().iter().map(|&c| c as u32).collect(),
        centroids: p.centroids.bits().to_vec(),
        oracle_loss: p.oracle_test_loss()?,
    })
}

#[derive(Debug, Clone)]
enum Run {
    Lipi(LipiRun),
    Canonical(CanonicalRun),
}

/// A desk-sized training run advanced a few epochs at a time.
#[derive(Debug, Clone)]
pub struct Session {
    data: TrainingData,
    run: Run,
    oracle_loss: f64,
    total: usize,
}

impl Session {
    pub fn new(trainer: &str, pruner: &str, schedule: &str, epochs: usize, seed: u32) -> Result<Self> {
        let cfg = desk_config(&[
            ("trainer", trainer.to_string()),
            ("pruner", pruner.to_string()),
            ("schedule", schedule.to_string()),
            ("epochs", epochs.to_string()),
            ("seed", seed.to_string()),
        ])?;
        let seed = trial_seed(cfg.seed, 0);
        let problem = TrialProblem::build(&cfg, seed)?;
        let data = problem.training_data();
        let params = cfg.coev_params();
        let arch = cfg.architecture();
        let run = match cfg.trainer {
            Trainer::Canonical => Run::Canonical(CanonicalRun::new(&data, &arch, cfg.learning_rate, &params, seed)?),
            Trainer::Lipi => {
                let ring = Ring::build(params.cells, params.radius, &arch, cfg.learning_rate, seed)?;
                Run::Lipi(LipiRun::new(&data, ring, &params, seed)?)
            }
        };
        Ok(Self { data, run, oracle_loss: problem.oracle_test_loss()?, total: cfg.epochs })
    }

    /// Advances up to `epochs` epochs; `false` once the run is complete.
    pub fn step(&mut self, epochs: usize) -> Result<bool> {
        for _ in 0..epochs {
            let more = match &mut self.run {
                Run::Lipi(r) => r.step(&self.data)?,
                Run::Canonical(r) => r.step(&self.data)?,
            };
            if !more {
                return Ok(false);
            }
        }
        Ok(self.epoch() < self.total)
    }

    pub fn epoch(&self) -> usize {
        match &self.run {
            Run::Lipi(r) => r.epoch(),
            Run::Canonical(r) => r.epoch(),
        }
    }

    pub fn total_epochs(&self) -> usize {
        self.total
    }

    pub fn oracle_loss(&self) -> f64 {
        self.oracle_loss
    }

    /// One entry per epoch: the cell with the lowest training loss.
    pub fn selected(&self) -> Vec<EpochMetrics> {
        let history = match &self.run {
            Run::Lipi(r) => r.history(),
            Run::Canonical(r) => r.history(),
        };
        let mut out: Vec<EpochMetrics> = Vec::new();
        for m in history {
            match out.last_mut() {
                Some(last) if last.epoch == m.epoch => {
                    if m.train_loss < last.train_loss {
                        *last = m.clone();
                    }
                }
                _ => out.push(m.clone()),
            }
        }
        out
    }

    /// Epochs in which at least one pruning event happened.
    pub fn prune_epochs(&self) -> Vec<u32> {
        let log = match &self.run {
            Run::Lipi(r) => r.prune_log(),
            Run::Canonical(r) => r.prune_log(),
        };
        let mut epochs: Vec<u32> = log.iter().map(|e| e.epoch as u32).collect();
        epochs.dedup();
        epochs
    }
}

fn js(e: coevo_prune::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = scheduleCurve)]
pub fn schedule_curve(
    kind: &str,
    c: f64,
    epochs: usize,
    neighborhood: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    curve(kind, c, epochs, neighborhood).map_err(js)
}

#[wasm_bindgen(js_name = DatasetPreview)]
pub struct JsPreview(Preview);

#[wasm_bindgen(js_class = DatasetPreview)]
impl JsPreview {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, k: usize, per: usize, q: f64, seed: u32) -> std::result::Result<JsPreview, JsError> {
        preview(n, k, per, q, seed).map(JsPreview).map_err(js)
    }

    #[wasm_bindgen(getter)]
    pub fn n(&self) -> usize {
        self.0.n
    }

    #[wasm_bindgen(getter)]
    pub fn k(&self) -> usize {
        self.0.k
    }

    /// Row-major sample bits.
    #[wasm_bindgen(getter)]
    pub fn bits(&self) -> Vec<u8> {
        self.0.bits.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn clusters(&self) -> Vec<u32> {
        self.0.clusters.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn centroids(&self) -> Vec<u8> {
        self.0.centroids.clone()
    }

    #[wasm_bindgen(getter, js_name = oracleLoss)]
    pub fn oracle_loss(&self) -> f64 {
        self.0.oracle_loss
    }
}

#[wasm_bindgen(js_name = TrainingSession)]
pub struct JsSession(Session);

#[wasm_bindgen(js_class = TrainingSession)]
impl JsSession {
    #[wasm_bindgen(constructor)]
    pub fn new(
        trainer: &str,
        pruner: &str,
        schedule: &str,
        epochs: usize,
        seed: u32,
    ) -> std::result::Result<JsSession, JsError> {
        Session::new(trainer, pruner, schedule, epochs, seed).map(JsSession).map_err(js)
    }

    pub fn step(&mut self, epochs: usize) -> std::result::Result<bool, JsError> {
        self.0.step(epochs).map_err(js)
    }

    #[wasm_bindgen(getter)]
    pub fn epoch(&self) -> usize {
        self.0.epoch()
    }

    #[wasm_bindgen(getter, js_name = totalEpochs)]
    pub fn total_epochs(&self) -> usize {
        self.0.total_epochs()
    }

    #[wasm_bindgen(getter, js_name = oracleLoss)]
    pub fn oracle_loss(&self) -> f64 {
        self.0.oracle_loss()
    }

    #[wasm_bindgen(js_name = trainLoss)]
    pub fn train_loss(&self) -> Vec<f64> {
        self.0.selected().iter().map(|m| m.train_loss).collect()
    }

    #[wasm_bindgen(js_name = testLoss)]
    pub fn test_loss(&self) -> Vec<f64> {
        self.0.selected().iter().map(|m| m.test_loss).collect()
    }

    pub fn preserved(&self) -> Vec<f64> {
        self.0.selected().iter().map(|m| m.preserved.total).collect()
    }

    #[wasm_bindgen(js_name = pruneEpochs)]
    pub fn prune_epochs(&self) -> Vec<u32> {
        self.0.prune_epochs()
    }
}
