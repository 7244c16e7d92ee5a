use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-ray error shape.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `‖Ĉ − c‖²`.
    #[default]
    Squared,
    /// `‖Ĉ − c‖₂`, non-smooth at zero error.
    Unsquared,
}

/// How per-ray errors combine over a batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhotometricLoss {
    pub kind: LossKind,
    pub reduction: Reduction,
}

impl PhotometricLoss {
    /// One ray's contribution to the batch loss and its gradient with
    /// respect to the predicted color.
    #[inline]
    pub fn ray<T: Real>(&self, pred: [T; 3], gt: [T; 3], batch: usize) -> (T, [T; 3]) {
        let scale = match self.reduction {
            Reduction::Mean => T::one() / T::from_usize(batch.max(1)).unwrap(),
            Reduction::Sum => T::one(),
        };
        let diff = [pred[0] - gt[0], pred[1] - gt[1], pred[2] - gt[2]];
        let sq = diff[0] * diff[0] + diff[1] * diff[1] + diff[2] * diff[2];
        match self.kind {
            LossKind::Squared => {
                let k = T::lit(2.0) * scale;
                (sq * scale, [diff[0] * k, diff[1] * k, diff[2] * k])
            }
            LossKind::Unsquared => {
                let norm = sq.sqrt();
                if norm == T::zero() {
                    return (T::zero(), [T::zero(); 3]);
                }
                let k = scale / norm;
                (norm * scale, [diff[0] * k, diff[1] * k, diff[2] * k])
            }
        }
    }
}

/// Batch loss and `∂loss/∂pred`.
pub fn photometric_loss<T: Real>(
    pred: &[[T; 3]],
    gt: &[[T; 3]],
    loss: PhotometricLoss,
) -> Result<(T, Vec<[T; 3]>)> {
    if pred.len() != gt.len() {
        return Err(Error::InvalidShape(format!(
            "{} predictions for {} targets",
            pred.len(),
            gt.len()
        )));
    }
    let mut total = T::zero();
    let mut grads = Vec::with_capacity(pred.len());
    for (&p, &g) in pred.iter().zip(gt) {
        let (l, d) = loss.ray(p, g, pred.len());
        total += l;
        grads.push(d);
    }
    Ok((total, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_predictions() {
        for kind in [LossKind::Squared, LossKind::Unsquared] {
            let loss = PhotometricLoss {
                kind,
                reduction: Reduction::Mean,
            };
            let x = [[0.2, 0.4, 0.6], [0.9, 0.1, 0.3]];
            let (l, g) = photometric_loss(&x, &x, loss).unwrap();
            assert_eq!(l, 0.0);
            assert!(g.iter().flatten().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_ray_squared() {
        let (l, g) =
            photometric_loss(&[[0.6, 0.5, 0.5]], &[[0.5, 0.5, 0.5]], PhotometricLoss::default())
                .unwrap();
        assert!((l - 0.01f64).abs() < 1e-15);
        assert!((g[0][0] - 0.2).abs() < 1e-15 && g[0][1] == 0.0 && g[0][2] == 0.0);
    }

    #[test]
    fn homogeneity_and_modes() {
        let gt = [[0.5; 3], [0.1, 0.2, 0.3]];
        let a = [[0.6, 0.4, 0.5], [0.2, 0.2, 0.1]];
        let b: Vec<[f64; 3]> = a
            .iter()
            .zip(&gt)
            .map(|(p, g)| [0, 1, 2].map(|k| g[k] + 2.0 * (p[k] - g[k])))
            .collect();
        let (la, _) = photometric_loss(&a, &gt, PhotometricLoss::default()).unwrap();
        let (lb, _) = photometric_loss(&b, &gt, PhotometricLoss::default()).unwrap();
        assert!((lb - 4.0 * la).abs() < 1e-14);

        let sum = PhotometricLoss {
            kind: LossKind::Squared,
            reduction: Reduction::Sum,
        };
        let (ls, _) = photometric_loss(&a, &gt, sum).unwrap();
        assert!((ls - 2.0 * la).abs() < 1e-14);

        let literal = PhotometricLoss {
            kind: LossKind::Unsquared,
            reduction: Reduction::Sum,
        };
        let (lu, gu) = photometric_loss(&[[0.8, 0.5, 0.5]], &[[0.5, 0.1, 0.5]], literal).unwrap();
        assert!((lu - 0.5f64).abs() < 1e-12);
        assert!((gu[0][0] - 0.6).abs() < 1e-12 && (gu[0][1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        assert!(photometric_loss(&[[0.0f64; 3]], &[], PhotometricLoss::default()).is_err());
    }
}
