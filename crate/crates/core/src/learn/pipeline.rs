//! End-to-end training over a [`FeatureTable`]: select columns, split, scale
//! on the train partition, fit, and report per partition.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::curve::{mos_to_v, v_to_mos, SigmoidParams, MOS_SCALE};
use crate::error::{Error, Result};
use crate::features::{canonical_name, encoded_columns, FeatureTable};
use crate::learn::gbm::{GbmEnsemble, GbmHyper};
use crate::learn::linear::{lasso_fit, ols_fit, LassoConfig};
use crate::learn::scaler::MinMaxScaler;
use crate::learn::split::{sorted_stratified_split, Partition, SplitAssignment, SplitRatios};
use crate::pretrained::{CurveMode, LinearModel, ScoredResult};
use crate::stats::{evaluation_report_for, EvaluationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetTransform {
    /// Fit on MOS directly.
    Identity,
    /// Fit on `ln(q / (100 - q))`.
    #[default]
    Logit,
}

impl TargetTransform {
    pub fn forward(self, mos: f64) -> Result<f64> {
        match self {
            TargetTransform::Identity => Ok(mos),
            TargetTransform::Logit => mos_to_v(mos),
        }
    }

    pub fn inverse(self, v: f64) -> f64 {
        match self {
            TargetTransform::Identity => v,
            TargetTransform::Logit => v_to_mos(v, SigmoidParams::CANONICAL),
        }
    }

    fn curve_mode(self) -> CurveMode {
        match self {
            TargetTransform::Identity => CurveMode::DirectMos,
            TargetTransform::Logit => CurveMode::LogitV,
        }
    }
}

/// Dense design matrix over the named columns. Every cell must be present.
pub fn design_matrix(table: &FeatureTable, columns: &[String]) -> Result<Array2<f64>> {
    let mut x = Array2::zeros((table.len(), columns.len()));
    for (j, name) in columns.iter().enumerate() {
        for (i, v) in table.column(name)?.into_iter().enumerate() {
            x[[i, j]] = v.ok_or_else(|| {
                Error::MissingFeature(format!("{name} (row `{}`)", table.ids[i]))
            })?;
        }
    }
    Ok(x)
}

/// Encoded columns with a value in every row, in encoded order.
pub fn complete_columns(table: &FeatureTable) -> Vec<String> {
    encoded_columns()
        .into_iter()
        .filter(|c| table.column(c).is_ok_and(|v| v.iter().all(Option::is_some)))
        .collect()
}

fn target_values(table: &FeatureTable, name: &str) -> Result<Vec<f64>> {
    table
        .column(name)?
        .into_iter()
        .zip(&table.ids)
        .map(|(v, id)| v.ok_or_else(|| Error::MissingFeature(format!("{name} (row `{id}`)"))))
        .collect()
}

/// A fitted boosting model with the column order and scaler it was trained
/// with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub name: String,
    pub columns: Vec<String>,
    pub scaler: MinMaxScaler,
    pub target: TargetTransform,
    pub ensemble: GbmEnsemble,
}

impl GbmModel {
    /// Predictions on the transformed target scale.
    pub fn predict_table(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        let x = self.scaler.transform(design_matrix(table, &self.columns)?.view())?;
        Ok(self.ensemble.predict(x.view())?.to_vec())
    }

    pub fn importance(&self) -> Vec<(String, f64)> {
        self.columns
            .iter()
            .cloned()
            .zip(crate::learn::gbm::feature_importance(&self.ensemble))
            .collect()
    }
}

/// Any model the toolkit can score with.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Linear(LinearModel),
    Gbm(GbmModel),
}

impl TrainedModel {
    /// Distinguishes the two JSON layouts by the presence of `ensemble`.
    pub fn from_json_str(doc: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(doc).map_err(|e| Error::Parse(e.to_string()))?;
        if value.get("ensemble").is_some() {
            let mut m: GbmModel = serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))?;
            for c in &mut m.columns {
                *c = canonical_name(c)?.to_string();
            }
            if m.scaler.n_features() != m.columns.len() || m.ensemble.n_features != m.columns.len() {
                return Err(Error::Validation("gbm model: column count disagrees with scaler or ensemble".into()));
            }
            Ok(TrainedModel::Gbm(m))
        } else {
            Ok(TrainedModel::Linear(LinearModel::from_json_str(doc)?))
        }
    }

    pub fn to_json_string(&self) -> String {
        match self {
            TrainedModel::Linear(m) => m.to_json_string(),
            TrainedModel::Gbm(m) => serde_json::to_string_pretty(m).expect("model serializes"),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            TrainedModel::Linear(m) => &m.name,
            TrainedModel::Gbm(m) => &m.name,
        }
    }

    /// One score per row. For boosting models `raw_v` is the prediction on
    /// the training target scale.
    pub fn score_table(&self, table: &FeatureTable) -> Result<Vec<ScoredResult>> {
        match self {
            TrainedModel::Linear(m) => table.rows.iter().map(|r| m.score(r)).collect(),
            TrainedModel::Gbm(m) => Ok(m
                .predict_table(table)?
                .into_iter()
                .map(|raw_v| ScoredResult { raw_v, mos: m.target.inverse(raw_v).clamp(0.0, MOS_SCALE) })
                .collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Learner {
    Gbm(GbmHyper),
    Lasso(LassoConfig),
    Ols,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub name: String,
    pub learner: Learner,
    /// Feature columns; `None` selects [`complete_columns`].
    pub columns: Option<Vec<String>>,
    pub target_column: String,
    pub target: TargetTransform,
    pub ratios: SplitRatios,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(learner: Learner) -> Self {
        TrainConfig {
            name: "trained".into(),
            learner,
            columns: None,
            target_column: "mos".into(),
            target: TargetTransform::Logit,
            ratios: SplitRatios::EIGHTY_TEN_TEN,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub split: SplitAssignment,
    /// Metrics on the transformed target scale, one row per partition.
    pub report: EvaluationReport,
    pub warnings: Vec<String>,
}

pub fn train(table: &FeatureTable, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let columns: Vec<String> = match &cfg.columns {
        Some(cols) => cols.iter().map(|c| canonical_name(c).map(str::to_string)).collect::<Result<_>>()?,
        None => complete_columns(table),
    };
    if columns.is_empty() {
        return Err(Error::Validation("no feature columns selected".into()));
    }
    let x = design_matrix(table, &columns)?;
    let y = target_values(table, &cfg.target_column)?
        .into_iter()
        .map(|q| cfg.target.forward(q))
        .collect::<Result<Vec<f64>>>()?;

    let split = sorted_stratified_split(&y, cfg.ratios, cfg.seed)?;
    let train_idx = split.indices(Partition::Train);
    let x_train_raw = x.select(Axis(0), &train_idx);
    let y_train: Vec<f64> = train_idx.iter().map(|&i| y[i]).collect();
    let scaler = MinMaxScaler::fit(x_train_raw.view())?;
    let x_train = scaler.transform(x_train_raw.view())?;
    let x_all = scaler.transform(x.view())?;

    let mut warnings = Vec::new();
    let (model, pred) = match cfg.learner {
        Learner::Gbm(hyper) => {
            let ensemble = GbmEnsemble::fit(x_train.view(), &y_train, &hyper, cfg.seed)?;
            let pred = ensemble.predict(x_all.view())?.to_vec();
            let model = GbmModel {
                name: cfg.name.clone(),
                columns: columns.clone(),
                scaler,
                target: cfg.target,
                ensemble,
            };
            (TrainedModel::Gbm(model), pred)
        }
        Learner::Lasso(lc) => {
            let fit = lasso_fit(x_train.view(), ndarray::ArrayView1::from(&y_train), &lc)?;
            if !fit.converged {
                warnings.push(format!("lasso did not converge within {} sweeps", lc.max_iter));
            }
            let pred = fit.predict(x_all.view())?.to_vec();
            (TrainedModel::Linear(fit.to_model(&cfg.name, &columns, cfg.target.curve_mode(), Some(&scaler))?), pred)
        }
        Learner::Ols => {
            let fit = ols_fit(x_train.view(), ndarray::ArrayView1::from(&y_train), &columns)?;
            let pred = fit.predict(x_all.view())?.to_vec();
            (TrainedModel::Linear(fit.to_model(&cfg.name, &columns, cfg.target.curve_mode(), Some(&scaler))?), pred)
        }
    };

    let labels = split.labels();
    let parts: Vec<&str> = Partition::ALL.iter().map(|p| p.as_str()).collect();
    let report = evaluation_report_for(&pred, &y, &labels, &parts)?;
    Ok(TrainOutcome { model, split, report, warnings })
}
