//! Final-epoch comparison across the metrics files of a sweep.

use std::fmt::Write as _;
use std::path::Path;

use super::config::Trainer;
use super::metrics::{read_csv, MetricsRow};
use super::{select_rows, stats};
use crate::error::{invalid, Result};
use crate::pruning::PrunerKind;
use crate::schedule::ScheduleKind;

/// Trainer, pruner and schedule recovered from a file stem such as
/// `lipi_conjunctive_final_n` or `canonical_none`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Label {
    pub trainer: Trainer,
    pub pruner: PrunerKind,
    pub schedule: Option<ScheduleKind>,
}

impl Label {
    pub fn parse(stem: &str) -> Result<Self> {
        let mut parts = stem.splitn(3, '_');
        let trainer = parts.next().unwrap_or("").parse()?;
        let pruner: PrunerKind = parts.next().ok_or_else(|| invalid(format!("bad label {stem:?}")))?.parse()?;
        let schedule = match (pruner, parts.next()) {
            (PrunerKind::None, None) => None,
            (PrunerKind::None, Some(_)) | (_, None) => return Err(invalid(format!("bad label {stem:?}"))),
            (_, Some(s)) => Some(s.parse()?),
        };
        Ok(Self { trainer, pruner, schedule })
    }

    /// With one autoencoder the neighborhood has size one, so the population
    /// schedule is the fixed schedule.
    pub fn degenerate(&self) -> bool {
        self.trainer == Trainer::Canonical && self.schedule == Some(ScheduleKind::Population)
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.schedule {
            None => write!(f, "{}_none", self.trainer),
            Some(s) => write!(f, "{}_{}_{}", self.trainer, self.pruner, s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialFinal {
    pub trial: usize,
    pub cell: i64,
    pub train_loss: f64,
    pub test_loss: f64,
    pub preserved_total: f64,
    pub preserved_encoder: f64,
    pub preserved_decoder: f64,
    /// Train/test loss correlation over the trial's epochs.
    pub pearson: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSummary {
    pub label: Label,
    pub trials: Vec<TrialFinal>,
    pub median_test: f64,
    pub median_train: f64,
    pub median_preserved_total: f64,
    pub median_preserved_encoder: f64,
    pub median_preserved_decoder: f64,
    pub median_pearson: Option<f64>,
}

impl ConfigSummary {
    pub fn test_losses(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.test_loss).collect()
    }
}

pub fn summarize_rows(label: Label, rows: &[MetricsRow]) -> Result<ConfigSummary> {
    if rows.is_empty() {
        return Err(invalid(format!("{label}: no metrics rows")));
    }
    let selected = select_rows(rows);
    let mut trials = Vec::new();
    let mut start = 0;
    while start < selected.len() {
        let trial = selected[start].trial;
        let end = selected[start..].iter().position(|r| r.trial != trial).map_or(selected.len(), |p| start + p);
        let series = &selected[start..end];
        let last = series.last().unwrap();
        let train: Vec<f64> = series.iter().map(|r| r.train_loss).collect();
        let test: Vec<f64> = series.iter().map(|r| r.test_loss).collect();
        trials.push(TrialFinal {
            trial,
            cell: last.cell,
            train_loss: last.train_loss,
            test_loss: last.test_loss,
            preserved_total: last.preserved_total,
            preserved_encoder: last.preserved_encoder,
            preserved_decoder: last.preserved_decoder,
            pearson: stats::pearson(&train, &test),
        });
        start = end;
    }
    let col = |f: fn(&TrialFinal) -> f64| stats::median(&trials.iter().map(f).collect::<Vec<_>>()).unwrap();
    let pearsons: Vec<f64> = trials.iter().filter_map(|t| t.pearson).collect();
    Ok(ConfigSummary {
        label,
        median_test: col(|t| t.test_loss),
        median_train: col(|t| t.train_loss),
        median_preserved_total: col(|t| t.preserved_total),
        median_preserved_encoder: col(|t| t.preserved_encoder),
        median_preserved_decoder: col(|t| t.preserved_decoder),
        median_pearson: stats::median(&pearsons),
        trials,
    })
}

/// Reads `<label>.csv` files; the stem of each path must be a label.
pub fn summarize_files<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<ConfigSummary>> {
    paths
        .iter()
        .map(|p| {
            let p = p.as_ref();
            let stem =
                p.file_stem().and_then(|s| s.to_str()).ok_or_else(|| invalid(format!("bad path {}", p.display())))?;
            let label = Label::parse(stem)?;
            let rows = read_csv(&std::fs::read_to_string(p)?)?;
            summarize_rows(label, &rows)
        })
        .collect()
}

/// Summaries of one trainer ordered by median test loss.
pub fn ranking(summaries: &[ConfigSummary], trainer: Trainer) -> Vec<&ConfigSummary> {
    let mut v: Vec<_> = summaries.iter().filter(|s| s.label.trainer == trainer).collect();
    v.sort_by(|a, b| a.median_test.total_cmp(&b.median_test));
    v
}

/// Lowest median test loss among the pruned configurations of a trainer.
pub fn best_pruned(summaries: &[ConfigSummary], trainer: Trainer) -> Option<&ConfigSummary> {
    ranking(summaries, trainer).into_iter().find(|s| s.label.pruner != PrunerKind::None)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.3}"))
}

/// Plain-text table, one block per trainer, best first.
pub fn render(summaries: &[ConfigSummary]) -> String {
    let mut out = String::new();
    for trainer in Trainer::ALL {
        let ranked = ranking(summaries, trainer);
        if ranked.is_empty() {
            continue;
        }
        writeln!(out, "{trainer}").unwrap();
        writeln!(
            out,
            "  {:<4} {:<32} {:>11} {:>11} {:>9} {:>9} {:>9} {:>8}",
            "rank", "config", "test(med)", "train(med)", "kept%", "enc%", "dec%", "pearson"
        )
        .unwrap();
        for (i, s) in ranked.iter().enumerate() {
            let mut name = s.label.to_string();
            if s.label.degenerate() {
                name.push_str(" (=fixed)");
            }
            writeln!(
                out,
                "  {:<4} {:<32} {:>11.5} {:>11.5} {:>9.2} {:>9.2} {:>9.2} {:>8}",
                i + 1,
                name,
                s.median_test,
                s.median_train,
                s.median_preserved_total,
                s.median_preserved_encoder,
                s.median_preserved_decoder,
                fmt_opt(s.median_pearson)
            )
            .unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_parse() {
        let l = Label::parse("lipi_conjunctive_final_n").unwrap();
        assert_eq!(
            (l.trainer, l.pruner, l.schedule),
            (Trainer::Lipi, PrunerKind::Conjunctive, Some(ScheduleKind::FinalN))
        );
        assert_eq!(l.to_string(), "lipi_conjunctive_final_n");
        let l = Label::parse("canonical_none").unwrap();
        assert_eq!(l.schedule, None);
        assert!(Label::parse("canonical_random_population").unwrap().degenerate());
        assert!(Label::parse("lipi_random").is_err());
        assert!(Label::parse("lipi_none_fixed").is_err());
        assert!(Label::parse("other_none").is_err());
    }

    fn row(trial: usize, epoch: usize, cell: i64, train: f64, test: f64) -> MetricsRow {
        MetricsRow {
            trial,
            epoch,
            cell,
            train_loss: train,
            test_loss: test,
            preserved_total: 90.0,
            preserved_encoder: 80.0,
            preserved_decoder: 100.0,
            nonzero_params: 1,
            learning_rate: 1.0,
            prune_event: false,
        }
    }

    #[test]
    fn final_epoch_uses_best_cell() {
        let rows = vec![
            row(0, 0, 0, 0.5, 0.5),
            row(0, 0, 1, 0.6, 0.6),
            row(0, 1, 0, 0.4, 0.45),
            row(0, 1, 1, 0.3, 0.35),
            row(1, 0, 0, 0.5, 0.5),
            row(1, 0, 1, 0.5, 0.5),
            row(1, 1, 0, 0.2, 0.25),
            row(1, 1, 1, 0.2, 0.9),
        ];
        let s = summarize_rows(Label::parse("lipi_none").unwrap(), &rows).unwrap();
        assert_eq!(s.trials.len(), 2);
        assert_eq!((s.trials[0].cell, s.trials[0].test_loss), (1, 0.35));
        assert_eq!((s.trials[1].cell, s.trials[1].test_loss), (0, 0.25));
        assert!((s.median_test - 0.30).abs() < 1e-12);
        assert!((s.trials[0].pearson.unwrap() - 1.0).abs() < 1e-12);
        assert!(render(&[s]).contains("lipi_none"));
    }
}
