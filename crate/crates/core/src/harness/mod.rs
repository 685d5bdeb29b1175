//! Multi-trial experiment runner: builds each trial's problem from derived
//! seeds, trains it, and turns the run history into metrics rows, prune log
//! lines and a seed manifest.

pub mod config;
pub mod metrics;
pub mod plot;
pub mod report;
pub mod stats;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::coevolution::{run_canonical, run_lipi, PruneEvent, Ring, RunResult, TrainingData};
use crate::error::{invalid, Result};
use crate::problem::{
    generate_centroids, generate_dataset, generate_heldout, oracle_cluster_loss, BitDataset, CentroidSet, Split,
};
use crate::seed::{derive, Stream};

pub use config::{ExperimentConfig, Profile, Trainer};
pub use metrics::{read_csv, write_csv, MetricsRow, CSV_HEADER};

/// Seed of trial `i` under master seed `seed`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_add(trial as u64)
}

/// Per-purpose seeds of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub trial: u64,
    pub centroids: u64,
    pub train: u64,
    pub test: u64,
    pub heldout: u64,
}

impl TrialSeeds {
    pub fn new(trial_seed: u64) -> Self {
        let d = |s| derive(trial_seed, s, 0, 0);
        Self {
            trial: trial_seed,
            centroids: d(Stream::Centroids),
            train: d(Stream::TrainData),
            test: d(Stream::TestData),
            heldout: d(Stream::HeldOut),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialProblem {
    pub seeds: TrialSeeds,
    pub centroids: CentroidSet,
    pub train: BitDataset,
    pub test: BitDataset,
    pub heldout: BitDataset,
}

impl TrialProblem {
    pub fn build(cfg: &ExperimentConfig, trial_seed: u64) -> Result<Self> {
        let seeds = TrialSeeds::new(trial_seed);
        let centroids = generate_centroids(cfg.k, cfg.n, seeds.centroids)?;
        let train = generate_dataset(&centroids, cfg.per, cfg.q, seeds.train, Split::Train)?;
        let test = generate_dataset(&centroids, cfg.per, cfg.q, seeds.test, Split::Test)?;
        let heldout = generate_heldout(&centroids, cfg.heldout.max(1), cfg.q, seeds.heldout)?;
        Ok(Self { seeds, centroids, train, test, heldout })
    }

    pub fn training_data(&self) -> TrainingData {
        TrainingData { train: self.train.to_matrix(), test: self.test.to_matrix(), heldout: self.heldout.to_matrix() }
    }

    /// Per-bit loss of the nearest-centroid reconstruction on the test split.
    pub fn oracle_test_loss(&self) -> Result<f64> {
        oracle_cluster_loss(&self.test, &self.centroids)
    }
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: usize,
    pub seeds: TrialSeeds,
    pub oracle_test_loss: f64,
    pub run: RunResult,
}

pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialResult> {
    cfg.validate()?;
    let seed = trial_seed(cfg.seed, trial);
    let problem = TrialProblem::build(cfg, seed)?;
    let data = problem.training_data();
    let params = cfg.coev_params();
    let arch = cfg.architecture();
    let run = match cfg.trainer {
        Trainer::Canonical => run_canonical(&data, &arch, cfg.learning_rate, &params, seed)?,
        Trainer::Lipi => {
            let ring = Ring::build(params.cells, params.radius, &arch, cfg.learning_rate, seed)?;
            run_lipi(&data, ring, &params, seed)?
        }
    };
    Ok(TrialResult { trial, seeds: problem.seeds, oracle_test_loss: problem.oracle_test_loss()?, run })
}

/// Runs every trial of `cfg`, using `workers` threads when given (the
/// global rayon pool otherwise). Output is independent of the thread count.
pub fn run_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<Vec<TrialResult>> {
    cfg.validate()?;
    let go = || (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect::<Result<Vec<_>>>();
    match workers {
        Some(0) => Err(invalid("workers must be >= 1")),
        Some(w) => {
            rayon::ThreadPoolBuilder::new().num_threads(w).build().map_err(|e| invalid(e.to_string()))?.install(go)
        }
        None => go(),
    }
}

pub fn metrics_rows(results: &[TrialResult]) -> Vec<MetricsRow> {
    let mut rows = Vec::new();
    for r in results {
        for m in &r.run.history {
            rows.push(MetricsRow {
                trial: r.trial,
                epoch: m.epoch,
                cell: m.cell.map_or(-1, |c| c as i64),
                train_loss: m.train_loss,
                test_loss: m.test_loss,
                preserved_total: m.preserved.total,
                preserved_encoder: m.preserved.encoder,
                preserved_decoder: m.preserved.decoder,
                nonzero_params: m.nonzero_params,
                learning_rate: m.learning_rate,
                prune_event: m.prune_event,
            });
        }
    }
    rows
}

fn prune_line(out: &mut String, trial: usize, cfg: &ExperimentConfig, e: &PruneEvent) {
    let cell = e.cell.map_or(-1, |c| c as i64);
    for l in &e.report.layers {
        writeln!(out, "{trial},{},{cell},{},{}.{},{}", e.epoch, cfg.pruner, l.half, l.layer, l.zeroed).unwrap();
    }
}

/// One line per pruned layer: `trial,epoch,cell,operator,layer,zeroed`.
pub fn prune_log(cfg: &ExperimentConfig, results: &[TrialResult]) -> String {
    let mut out = String::from("trial,epoch,cell,operator,layer,zeroed\n");
    for r in results {
        for e in &r.run.prune_log {
            prune_line(&mut out, r.trial, cfg, e);
        }
    }
    out
}

/// Everything needed to re-run any single trial: the full configuration
/// followed by each trial's derived seeds.
pub fn seed_manifest(cfg: &ExperimentConfig, results: &[TrialResult]) -> String {
    let mut out = String::from("# configuration\n");
    out.push_str(&cfg.to_text());
    out.push_str("# trial seeds: trial_seed centroids train test heldout, then the oracle test loss\n");
    out.push_str("# rerun trial i alone with `seed = <trial_seed>` and `trials = 1`\n");
    for r in results {
        let s = r.seeds;
        writeln!(
            out,
            "# trial {} {} {} {} {} {} {}",
            r.trial, s.trial, s.centroids, s.train, s.test, s.heldout, r.oracle_test_loss
        )
        .unwrap();
    }
    out
}

/// The row that represents trial output at one epoch: the lowest training
/// loss among that epoch's rows (ties to the lowest cell).
pub fn select_rows(rows: &[MetricsRow]) -> Vec<MetricsRow> {
    let mut best: std::collections::BTreeMap<(usize, usize), MetricsRow> = Default::default();
    for r in rows {
        best.entry((r.trial, r.epoch))
            .and_modify(|b| {
                if r.train_loss < b.train_loss || (r.train_loss == b.train_loss && r.cell < b.cell) {
                    *b = r.clone();
                }
            })
            .or_insert_with(|| r.clone());
    }
    best.into_values().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    pub mean_test: f64,
    pub median_test: f64,
    pub q1_test: f64,
    pub q3_test: f64,
    pub median_train: f64,
    pub median_preserved: f64,
}

/// Cross-trial statistics of the selected row per epoch.
pub fn epoch_summary(rows: &[MetricsRow]) -> Vec<EpochSummary> {
    let selected = select_rows(rows);
    let mut by_epoch: std::collections::BTreeMap<usize, Vec<&MetricsRow>> = Default::default();
    for r in &selected {
        by_epoch.entry(r.epoch).or_default().push(r);
    }
    by_epoch
        .into_iter()
        .map(|(epoch, rs)| {
            let col = |f: fn(&MetricsRow) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<_>>();
            let test = col(|r| r.test_loss);
            EpochSummary {
                epoch,
                mean_test: stats::mean(&test).unwrap(),
                median_test: stats::median(&test).unwrap(),
                q1_test: stats::quantile(&test, 0.25).unwrap(),
                q3_test: stats::quantile(&test, 0.75).unwrap(),
                median_train: stats::median(&col(|r| r.train_loss)).unwrap(),
                median_preserved: stats::median(&col(|r| r.preserved_total)).unwrap(),
            }
        })
        .collect()
}

pub fn summary_csv(summary: &[EpochSummary]) -> String {
    let mut out = String::from(
        "epoch,mean_test_loss,median_test_loss,q1_test_loss,q3_test_loss,median_train_loss,median_preserved\n",
    );
    for s in summary {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.epoch, s.mean_test, s.median_test, s.q1_test, s.q3_test, s.median_train, s.median_preserved
        )
        .unwrap();
    }
    out
}

/// The 19 configurations of a sweep for one trainer: no pruning, then every
/// pruner under every schedule.
pub fn sweep_configs(base: &ExperimentConfig, trainer: Trainer) -> Vec<ExperimentConfig> {
    use crate::pruning::PrunerKind;
    use crate::schedule::ScheduleKind;
    let mut out = vec![ExperimentConfig { trainer, pruner: PrunerKind::None, ..base.clone() }];
    for pruner in [PrunerKind::Random, PrunerKind::Variance, PrunerKind::Conjunctive] {
        for schedule in ScheduleKind::ALL {
            out.push(ExperimentConfig { trainer, pruner, schedule, ..base.clone() });
        }
    }
    out
}

/// Writes `<label>.csv`, `<label>.summary.csv`, `<label>.prune.csv` and
/// `<label>.manifest` into `dir` and returns the metrics path.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, results: &[TrialResult]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let label = cfg.label();
    let rows = metrics_rows(results);
    let metrics = dir.join(format!("{label}.csv"));
    std::fs::write(&metrics, write_csv(&rows))?;
    std::fs::write(dir.join(format!("{label}.summary.csv")), summary_csv(&epoch_summary(&rows)))?;
    std::fs::write(dir.join(format!("{label}.prune.csv")), prune_log(cfg, results))?;
    std::fs::write(dir.join(format!("{label}.manifest")), seed_manifest(cfg, results))?;
    Ok(metrics)
}
