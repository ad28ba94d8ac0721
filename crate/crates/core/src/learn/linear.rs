//! Ordinary least squares and Lasso with an unpenalised intercept.
//!
//! Both solvers centre the design and the target first, so the intercept is
//! recovered as `mean(y) - mean(X) . w` and never enters the penalty.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::canonical_name;
use crate::learn::scaler::MinMaxScaler;
use crate::pretrained::{CurveMode, LinearModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig {
    pub alpha: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig { alpha: 5e-5, max_iter: 100_000, tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub coefficients: Array1<f64>,
    /// `false` when coordinate descent hit `max_iter` first.
    pub converged: bool,
    pub iterations: usize,
    /// Lasso objective after each full sweep; empty for OLS.
    pub objective_trace: Vec<f64>,
}

impl LinearFit {
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.coefficients.len() {
            return Err(Error::DimensionMismatch { expected: self.coefficients.len(), got: x.ncols() });
        }
        Ok(x.dot(&self.coefficients) + self.intercept)
    }

    /// Wraps the fit as a named [`LinearModel`]. When `scaler` is given the
    /// coefficients apply to scaled features, and the scaler ranges become the
    /// model's normalization so it can score raw features.
    pub fn to_model(
        &self,
        name: &str,
        columns: &[String],
        curve_mode: CurveMode,
        scaler: Option<&MinMaxScaler>,
    ) -> Result<LinearModel> {
        if columns.len() != self.coefficients.len() {
            return Err(Error::DimensionMismatch { expected: self.coefficients.len(), got: columns.len() });
        }
        let weights: Vec<(&str, f64)> =
            columns.iter().map(String::as_str).zip(self.coefficients.iter().copied()).collect();
        let mut model = LinearModel::new(name, self.intercept, curve_mode, weights)?;
        if let Some(s) = scaler {
            if s.n_features() != columns.len() {
                return Err(Error::DimensionMismatch { expected: columns.len(), got: s.n_features() });
            }
            let mut ranges = BTreeMap::new();
            for (j, c) in columns.iter().enumerate() {
                ranges.insert(canonical_name(c)?.to_string(), (s.min[j], s.max[j]));
            }
            model = model.with_normalization(ranges);
        }
        Ok(model)
    }
}

fn check_xy(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), got: y.len() });
    }
    if x.nrows() == 0 {
        return Err(Error::InsufficientData("no rows".into()));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite value in design or target".into()));
    }
    Ok(())
}

fn centered(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> (Array2<f64>, Array1<f64>, Array1<f64>, f64) {
    let x_mean = x.mean_axis(Axis(0)).expect("non-empty");
    let y_mean = y.mean().expect("non-empty");
    let xc = &x - &x_mean;
    let yc = &y - y_mean;
    (xc, yc, x_mean, y_mean)
}

/// Least squares via modified Gram-Schmidt QR on the centred design.
///
/// `names` labels columns in the singularity error; pass an empty slice to
/// use positional names.
pub fn ols_fit(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, names: &[String]) -> Result<LinearFit> {
    check_xy(x, y)?;
    let (xc, yc, x_mean, y_mean) = centered(x, y);
    let (n, d) = xc.dim();
    let mut q = Array2::<f64>::zeros((n, d));
    let mut r = Array2::<f64>::zeros((d, d));
    let mut dependent = Vec::new();
    for j in 0..d {
        let original = xc.column(j);
        let scale = original.dot(&original).sqrt();
        let mut v = original.to_owned();
        // two passes keep the basis orthogonal to working precision
        for _ in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&v);
                r[[i, j]] += proj;
                v.scaled_add(-proj, &q.column(i));
            }
        }
        let norm = v.dot(&v).sqrt();
        if scale == 0.0 || norm <= 1e-10 * scale {
            dependent.push(col_name(names, j));
            continue;
        }
        r[[j, j]] = norm;
        q.column_mut(j).assign(&(v / norm));
    }
    if !dependent.is_empty() {
        return Err(Error::Singular(dependent));
    }

    let qty = q.t().dot(&yc);
    let mut w = Array1::<f64>::zeros(d);
    for j in (0..d).rev() {
        let mut s = qty[j];
        for k in j + 1..d {
            s -= r[[j, k]] * w[k];
        }
        w[j] = s / r[[j, j]];
    }
    let intercept = y_mean - x_mean.dot(&w);
    Ok(LinearFit { intercept, coefficients: w, converged: true, iterations: 1, objective_trace: vec![] })
}

fn col_name(names: &[String], j: usize) -> String {
    names.get(j).cloned().unwrap_or_else(|| format!("x{j}"))
}

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// `(1/2N) ||r||^2 + alpha ||w||_1`.
pub fn lasso_objective(residual: ArrayView1<'_, f64>, w: ArrayView1<'_, f64>, alpha: f64) -> f64 {
    let n = residual.len() as f64;
    residual.dot(&residual) / (2.0 * n) + alpha * w.iter().map(|v| v.abs()).sum::<f64>()
}

/// Cyclic coordinate descent with soft-thresholding.
pub fn lasso_fit(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, cfg: &LassoConfig) -> Result<LinearFit> {
    check_xy(x, y)?;
    if !(cfg.alpha >= 0.0 && cfg.alpha.is_finite()) {
        return Err(Error::Validation(format!("alpha must be nonnegative, got {}", cfg.alpha)));
    }
    let (xc, yc, x_mean, y_mean) = centered(x, y);
    let (n, d) = xc.dim();
    let nf = n as f64;
    let col_sq: Vec<f64> = xc.axis_iter(Axis(1)).map(|c| c.dot(&c) / nf).collect();

    let mut w = Array1::<f64>::zeros(d);
    let mut residual = yc;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..d {
            if col_sq[j] == 0.0 {
                continue;
            }
            let col = xc.column(j);
            let old = w[j];
            let rho = col.dot(&residual) / nf + col_sq[j] * old;
            let new = soft_threshold(rho, cfg.alpha) / col_sq[j];
            if new != old {
                residual.scaled_add(old - new, &col);
                w[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        trace.push(lasso_objective(residual.view(), w.view(), cfg.alpha));
        if max_change < cfg.tol {
            converged = true;
            break;
        }
    }
    let intercept = y_mean - x_mean.dot(&w);
    Ok(LinearFit { intercept, coefficients: w, converged, iterations, objective_trace: trace })
}
