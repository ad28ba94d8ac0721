//! Linear QoE models and the three built-in published ones.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::curve::{v_to_mos, SigmoidParams, MOS_SCALE};
use crate::error::{Error, Result};
use crate::features::{canonical_name, EncodedFeatures, MEAN_SEQ_PSNR};

pub const GB_TOP10_LINEAR: &str = "gb-top10-linear";
pub const LASSO_FULL: &str = "lasso-full";
pub const LASSO_REFERENCE_FREE: &str = "lasso-reference-free";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveMode {
    /// The linear combination is the MOS.
    DirectMos,
    /// The linear combination is `V`, mapped through the canonical sigmoid.
    LogitV,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub name: String,
    #[serde(rename = "w0")]
    pub intercept_w0: f64,
    pub curve_mode: CurveMode,
    pub requires_reference: bool,
    pub weights: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<BTreeMap<String, (f64, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredResult {
    pub raw_v: f64,
    pub mos: f64,
}

impl LinearModel {
    /// Builds a model, canonicalising weight names and deriving
    /// `requires_reference` from the weights.
    pub fn new(
        name: impl Into<String>,
        intercept_w0: f64,
        curve_mode: CurveMode,
        weights: impl IntoIterator<Item = (impl AsRef<str>, f64)>,
    ) -> Result<Self> {
        let mut canon = BTreeMap::new();
        for (k, w) in weights {
            let key = canonical_name(k.as_ref())?;
            if canon.insert(key.to_string(), w).is_some() {
                return Err(Error::Validation(format!("duplicate weight for `{key}`")));
            }
        }
        let requires_reference = canon.contains_key(MEAN_SEQ_PSNR);
        Ok(LinearModel {
            name: name.into(),
            intercept_w0,
            curve_mode,
            requires_reference,
            weights: canon,
            normalization: None,
        })
    }

    pub fn with_normalization(mut self, ranges: BTreeMap<String, (f64, f64)>) -> Self {
        self.normalization = Some(ranges);
        self
    }

    /// Parses model JSON; weight and normalization keys may use aliases.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn from_json_str(doc: &str) -> Result<Self> {
        let raw: LinearModel = serde_json::from_str(doc).map_err(|e| Error::Parse(e.to_string()))?;
        let mut model = LinearModel::new(raw.name, raw.intercept_w0, raw.curve_mode, raw.weights)?;
        if raw.requires_reference != model.requires_reference {
            return Err(Error::Validation(format!(
                "requires_reference = {} but weights {} {MEAN_SEQ_PSNR}",
                raw.requires_reference,
                if model.requires_reference { "use" } else { "do not use" }
            )));
        }
        if let Some(norm) = raw.normalization {
            let mut canon = BTreeMap::new();
            for (k, (lo, hi)) in norm {
                if !(hi >= lo) {
                    return Err(Error::Validation(format!("normalization `{k}`: max below min")));
                }
                canon.insert(canonical_name(&k)?.to_string(), (lo, hi));
            }
            model.normalization = Some(canon);
        }
        Ok(model)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    fn scaled(&self, feature: &str, x: f64) -> f64 {
        match self.normalization.as_ref().and_then(|n| n.get(feature)) {
            Some(&(lo, hi)) if hi > lo => (x - lo) / (hi - lo),
            Some(_) => 0.0,
            None => x,
        }
    }

    /// `w0 + sum(w_i * psi_i)` before any curve.
    pub fn raw_v(&self, features: &EncodedFeatures) -> Result<f64> {
        let mut v = self.intercept_w0;
        for (name, w) in &self.weights {
            let x = features
                .get(name)?
                .ok_or_else(|| Error::MissingFeature(name.clone()))?;
            v += w * self.scaled(name, x);
        }
        Ok(v)
    }

    pub fn score(&self, features: &EncodedFeatures) -> Result<ScoredResult> {
        if self.requires_reference && features.get(MEAN_SEQ_PSNR)?.is_none() {
            return Err(Error::MissingFeature(MEAN_SEQ_PSNR.to_string()));
        }
        let raw_v = self.raw_v(features)?;
        let mos = match self.curve_mode {
            CurveMode::DirectMos => raw_v,
            CurveMode::LogitV => v_to_mos(raw_v, SigmoidParams::CANONICAL),
        };
        let mos = if mos.is_nan() { mos } else { mos.clamp(0.0, MOS_SCALE) };
        Ok(ScoredResult { raw_v, mos })
    }
}

/// Top-10 importance features, linear fit on raw features, MOS output.
fn gb_top10_linear() -> LinearModel {
    LinearModel::new(
        GB_TOP10_LINEAR,
        37.72,
        CurveMode::DirectMos,
        [
            ("ratio_sequence_level_max_half", 17.7497),
            ("average_video_resolution_px2", 0.0),
            ("mean_seq_psnr_db", 0.4884),
            ("ratio_minimum_sequence_level", -21.7635),
            ("average_rendered_bitrate_kbps", 0.0006),
            ("rebuffer_count", -3.1143),
            ("initial_buffer_time_s", -0.1277),
            ("rebuffer_percentage", -8.9932),
            ("frequency_of_switching_per_s", -0.0848),
            ("maximum_stall_duration_s", -1.4061),
        ],
    )
    .expect("builtin weights use canonical names")
}

/// Lasso on logit targets, uses PSNR.
fn lasso_full() -> LinearModel {
    LinearModel::new(
        LASSO_FULL,
        0.11,
        CurveMode::LogitV,
        [
            ("rebuffer_count", -0.4618),
            ("mean_seq_psnr_db", 0.3957),
            ("average_rendered_bitrate_kbps", 0.4165),
            ("maximum_stall_duration_s", -0.1122),
            ("bitrate_pos_changes_count", -0.1494),
            ("bitrate_max_pos_change_kbps", -0.013),
            ("frequency_of_stalling_per_s", -0.0971),
            ("rebuffer_percentage", -0.5905),
            ("ratio_highest_sequence_level", -0.0611),
            ("ratio_minimum_sequence_level", -0.8315),
            ("ratio_sequence_level_max_half", 0.9112),
            ("average_video_resolution_px2", 0.3147),
            ("ti", -0.1727),
            ("content_animals", 0.0639),
            ("content_animation", 0.0923),
            ("content_food", 0.6206),
            ("content_game", -0.0142),
            ("content_human", -0.0661),
            ("content_movie", -0.0956),
            ("motion_average", -0.3295),
            ("motion_smooth", 0.0223),
        ],
    )
    .expect("builtin weights use canonical names")
}

/// Lasso on logit targets without PSNR, content or motion.
fn lasso_reference_free() -> LinearModel {
    LinearModel::new(
        LASSO_REFERENCE_FREE,
        0.31,
        CurveMode::LogitV,
        [
            ("rebuffer_count", -0.2369),
            ("average_stall_duration_s", -0.0149),
            ("average_rendered_bitrate_kbps", 0.0001),
            ("maximum_stall_duration_s", -0.0076),
            ("bitrate_neg_changes_count", -0.0105),
            ("bitrate_mean_neg_change_kbps", 0.0002),
            ("frequency_of_stalling_per_s", 1.4992),
            ("bitrate_switch_count", 0.1213),
            ("frequency_of_switching_per_s", -0.7385),
            ("rebuffer_percentage", -1.9522),
            ("average_bitrate_switch_magnitude_kbps", 0.0001),
            ("average_relative_bitrate_switch_magnitude_kbps", -0.0002),
            ("ratio_highest_sequence_level", -0.1628),
            ("ratio_minimum_sequence_level", -1.1528),
            ("constant_bitrate", 0.1442),
        ],
    )
    .expect("builtin weights use canonical names")
}

pub fn builtin_models() -> Vec<LinearModel> {
    vec![gb_top10_linear(), lasso_full(), lasso_reference_free()]
}

pub fn builtin_names() -> [&'static str; 3] {
    [GB_TOP10_LINEAR, LASSO_FULL, LASSO_REFERENCE_FREE]
}

pub fn builtin(name: &str) -> Option<LinearModel> {
    builtin_models().into_iter().find(|m| m.name == name)
}
