use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, shape, Error, Result};
use crate::matrix::Matrix;

/// Clamp applied to predictions before taking logarithms.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossKind {
    #[default]
    L1,
    Bce,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::L1 => "l1",
            LossKind::Bce => "bce",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(LossKind::L1),
            "bce" => Ok(LossKind::Bce),
            _ => Err(invalid(format!("unknown loss {s:?}"))),
        }
    }
}

fn check(x: &Matrix, y: &Matrix) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(shape(format!("loss on {:?} vs {:?}", x.shape(), y.shape())));
    }
    if x.is_empty() {
        return Err(shape("loss on an empty batch"));
    }
    Ok(())
}

/// Mean absolute error per element.
pub fn l1_loss(x: &Matrix, recon: &Matrix) -> Result<f64> {
    check(x, recon)?;
    let sum: f64 = x.as_slice().iter().zip(recon.as_slice()).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / x.len() as f64)
}

/// Mean binary cross-entropy per element, predictions clamped to `[ε, 1−ε]`.
pub fn bce_loss(x: &Matrix, recon: &Matrix) -> Result<f64> {
    check(x, recon)?;
    let sum: f64 = x
        .as_slice()
        .iter()
        .zip(recon.as_slice())
        .map(|(&t, &p)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    Ok(sum / x.len() as f64)
}

pub fn loss_value(kind: LossKind, x: &Matrix, recon: &Matrix) -> Result<f64> {
    match kind {
        LossKind::L1 => l1_loss(x, recon),
        LossKind::Bce => bce_loss(x, recon),
    }
}

/// dLoss/dRecon for the mean loss. The L1 subgradient at zero residual is 0;
/// BCE has zero gradient where the clamp is active.
pub(super) fn output_gradient(kind: LossKind, x: &Matrix, recon: &Matrix) -> Matrix {
    let scale = 1.0 / x.len() as f64;
    let mut g = Matrix::zeros(x.rows(), x.cols());
    for ((gv, &t), &p) in g.as_mut_slice().iter_mut().zip(x.as_slice()).zip(recon.as_slice()) {
        *gv = match kind {
            LossKind::L1 => {
                let r = p - t;
                if r > 0.0 {
                    scale
                } else if r < 0.0 {
                    -scale
                } else {
                    0.0
                }
            }
            LossKind::Bce => {
                if p <= BCE_EPS || p >= 1.0 - BCE_EPS {
                    0.0
                } else {
                    scale * (p - t) / (p * (1.0 - p))
                }
            }
        };
    }
    g
}
