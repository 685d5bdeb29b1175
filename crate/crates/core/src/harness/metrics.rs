//! Metrics CSV schema.

use std::fmt::Write as _;

use crate::error::{parse_err, Result};

pub const CSV_HEADER: &str = "trial,epoch,cell,train_loss,test_loss,preserved_total,preserved_encoder,preserved_decoder,nonzero_params,learning_rate,prune_event";

/// One autoencoder at one epoch of one trial. `cell` is −1 for the
/// canonical trainer.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub trial: usize,
    pub epoch: usize,
    pub cell: i64,
    pub train_loss: f64,
    pub test_loss: f64,
    pub preserved_total: f64,
    pub preserved_encoder: f64,
    pub preserved_decoder: f64,
    pub nonzero_params: usize,
    pub learning_rate: f64,
    pub prune_event: bool,
}

pub fn write_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 96 + CSV_HEADER.len() + 1);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.trial,
            r.epoch,
            r.cell,
            r.train_loss,
            r.test_loss,
            r.preserved_total,
            r.preserved_encoder,
            r.preserved_decoder,
            r.nonzero_params,
            r.learning_rate,
            u8::from(r.prune_event)
        )
        .unwrap();
    }
    out
}

pub fn read_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(parse_err(1, "missing or unexpected metrics header")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(parse_err(lineno, format!("expected 11 fields, found {}", f.len())));
        }
        let num = |idx: usize| -> Result<f64> {
            let v: f64 = f[idx].parse().map_err(|_| parse_err(lineno, format!("bad number {:?}", f[idx])))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, "non-finite value"));
            }
            Ok(v)
        };
        let int = |idx: usize| -> Result<i64> {
            f[idx].parse().map_err(|_| parse_err(lineno, format!("bad integer {:?}", f[idx])))
        };
        let nonneg = |idx: usize| -> Result<usize> {
            usize::try_from(int(idx)?).map_err(|_| parse_err(lineno, "negative count"))
        };
        let prune_event = match f[10] {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(lineno, format!("bad prune_event {other:?}"))),
        };
        rows.push(MetricsRow {
            trial: nonneg(0)?,
            epoch: nonneg(1)?,
            cell: int(2)?,
            train_loss: num(3)?,
            test_loss: num(4)?,
            preserved_total: num(5)?,
            preserved_encoder: num(6)?,
            preserved_decoder: num(7)?,
            nonzero_params: nonneg(8)?,
            learning_rate: num(9)?,
            prune_event,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn csv_round_trip(trial in 0usize..50, epoch in 0usize..500, cell in -1i64..20,
                          a in 0.0f64..2.0, b in 0.0f64..2.0, p in 0.0f64..=100.0,
                          nz in 0usize..100_000, lr in 1e-8f64..10.0, ev in any::<bool>()) {
            let row = MetricsRow { trial, epoch, cell, train_loss: a, test_loss: b, preserved_total: p,
                preserved_encoder: p, preserved_decoder: 100.0 - p, nonzero_params: nz, learning_rate: lr, prune_event: ev };
            let back = read_csv(&write_csv(std::slice::from_ref(&row))).unwrap();
            prop_assert_eq!(back, vec![row]);
        }
    }

    #[test]
    fn malformed_lines_report_their_number() {
        let text = format!("{CSV_HEADER}\n0,0,-1,0.5,0.5,100,100,100,10,1,0\n0,1,-1,x,0.5,100,100,100,10,1,0\n");
        assert!(matches!(read_csv(&text), Err(crate::Error::Parse { line: 3, .. })));
        assert!(read_csv("trial,epoch\n").is_err());
        let short = format!("{CSV_HEADER}\n0,0,-1\n");
        assert!(matches!(read_csv(&short), Err(crate::Error::Parse { line: 2, .. })));
    }
}
