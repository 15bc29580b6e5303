use serde::{Deserialize, Serialize};

use super::{EvalError, Interpolation};
use crate::Scalar;

/// Precision/recall after each detection, in ranked order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PRCurve<T: Scalar = f64> {
    /// `(recall, precision)` pairs; recall is non-decreasing.
    pub points: Vec<(T, T)>,
    pub num_gt: usize,
}

impl<T: Scalar> PRCurve<T> {
    /// Builds the curve from TP/FP labels already sorted by rank.
    pub fn from_outcomes(outcomes: impl IntoIterator<Item = bool>, num_gt: usize) -> Self {
        let (mut tp, mut fp) = (0u64, 0u64);
        let points = outcomes
            .into_iter()
            .map(|is_tp| {
                if is_tp {
                    tp += 1;
                } else {
                    fp += 1;
                }
                let recall = if num_gt == 0 {
                    T::zero()
                } else {
                    T::from_count(tp) / T::from_count(num_gt as u64)
                };
                (recall, T::from_count(tp) / T::from_count(tp + fp))
            })
            .collect();
        Self { points, num_gt }
    }

    /// Running maximum of precision from the right.
    fn envelope(&self) -> Vec<T> {
        let mut env: Vec<T> = self.points.iter().map(|&(_, p)| p).collect();
        for i in (0..env.len().saturating_sub(1)).rev() {
            env[i] = env[i].max(env[i + 1]);
        }
        env
    }
}

pub fn average_precision<T: Scalar>(
    curve: &PRCurve<T>,
    interpolation: Interpolation,
) -> Result<T, EvalError> {
    if curve.num_gt == 0 {
        return Err(EvalError::EmptyGt);
    }
    let env = curve.envelope();
    Ok(match interpolation {
        Interpolation::Point101 => {
            let hundred = T::from_count(100);
            let mut sum = T::zero();
            let mut idx = 0;
            for t in 0..=100u64 {
                let threshold = T::from_count(t) / hundred;
                while idx < curve.points.len() && curve.points[idx].0 < threshold {
                    idx += 1;
                }
                if idx < env.len() {
                    sum = sum + env[idx];
                }
            }
            sum / T::from_count(101)
        }
        Interpolation::AllPoint => {
            let mut prev = T::zero();
            let mut area = T::zero();
            for (&(recall, _), &p) in curve.points.iter().zip(&env) {
                area = area + (recall - prev) * p;
                prev = recall;
            }
            area
        }
    })
}
