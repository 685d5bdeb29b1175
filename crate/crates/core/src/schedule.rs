//! Pruning schedules: the probability `p_p(t)` that a pruning event fires at
//! epoch `t` of `T`.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScheduleKind {
    Fixed,
    Increase,
    Decrease,
    Population,
    Exponential,
    FinalN,
}

impl ScheduleKind {
    pub const ALL: [ScheduleKind; 6] = [
        ScheduleKind::Fixed,
        ScheduleKind::Increase,
        ScheduleKind::Decrease,
        ScheduleKind::Population,
        ScheduleKind::Exponential,
        ScheduleKind::FinalN,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScheduleKind::Fixed => "fixed",
            ScheduleKind::Increase => "increase",
            ScheduleKind::Decrease => "decrease",
            ScheduleKind::Population => "population",
            ScheduleKind::Exponential => "exponential",
            ScheduleKind::FinalN => "final_n",
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| invalid(format!("unknown schedule {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    /// Base probability `C`.
    pub c: f64,
    /// Total epochs `T`.
    pub total_epochs: usize,
    /// Final-window length `t_p`, used by `final_n` only.
    pub final_window: usize,
}

/// `⌈0.1·T⌉`, at least 1.
pub fn default_final_window(total_epochs: usize) -> usize {
    total_epochs.div_ceil(10).max(1)
}

impl ScheduleSpec {
    pub fn new(kind: ScheduleKind, c: f64, total_epochs: usize, final_window: usize) -> Result<Self> {
        let spec = Self { kind, c, total_epochs, final_window };
        spec.validate()?;
        Ok(spec)
    }

    /// Default `C = 0.5` and `t_p = ⌈0.1·T⌉`.
    pub fn with_defaults(kind: ScheduleKind, total_epochs: usize) -> Self {
        Self { kind, c: 0.5, total_epochs, final_window: default_final_window(total_epochs) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.c) {
            return Err(invalid(format!("schedule constant C={} outside [0,1]", self.c)));
        }
        if self.kind == ScheduleKind::FinalN
            && !(1 <= self.final_window && self.final_window <= self.total_epochs.max(1))
        {
            return Err(invalid(format!(
                "final window t_p={} must lie in [1, T={}]",
                self.final_window, self.total_epochs
            )));
        }
        Ok(())
    }
}

/// Probability of a pruning event at epoch `t ∈ [0, T]`.
pub fn prune_probability(spec: &ScheduleSpec, t: usize, neighborhood_size: usize) -> Result<f64> {
    spec.validate()?;
    let total = spec.total_epochs;
    if t > total {
        return Err(invalid(format!("epoch {t} beyond schedule length {total}")));
    }
    if neighborhood_size == 0 {
        return Err(invalid("neighborhood size must be >= 1"));
    }
    let c = spec.c;
    let frac = if total == 0 { 0.0 } else { t as f64 / total as f64 };
    let p = match spec.kind {
        ScheduleKind::Fixed => c,
        ScheduleKind::Increase => c * frac,
        ScheduleKind::Decrease => c * (1.0 - frac),
        ScheduleKind::Population => c / neighborhood_size as f64,
        ScheduleKind::Exponential => {
            if total == 0 {
                0.0
            } else {
                c * (1.0 - (-2.0 * t as f64 / total as f64).exp())
            }
        }
        ScheduleKind::FinalN => {
            if t + spec.final_window > total {
                c
            } else {
                0.0
            }
        }
    };
    Ok(p.clamp(0.0, 1.0))
}
