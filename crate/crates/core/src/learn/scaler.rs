//! Per-column min-max scaling fitted on the training partition.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(x_train: ArrayView2<'_, f64>) -> Result<Self> {
        if x_train.nrows() == 0 {
            return Err(Error::InsufficientData("scaler needs at least one training row".into()));
        }
        let (min, max) = x_train
            .axis_iter(Axis(1))
            .map(|col| {
                col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                })
            })
            .unzip();
        Ok(MinMaxScaler { min, max })
    }

    pub fn n_features(&self) -> usize {
        self.min.len()
    }

    pub fn scale_value(&self, col: usize, v: f64) -> f64 {
        let span = self.max[col] - self.min[col];
        if span > 0.0 {
            (v - self.min[col]) / span
        } else {
            0.0
        }
    }

    /// Affine map into the training range. Values outside it are not clipped.
    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch { expected: self.n_features(), got: x.ncols() });
        }
        let mut out = x.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            col.mapv_inplace(|v| self.scale_value(j, v));
        }
        Ok(out)
    }
}
