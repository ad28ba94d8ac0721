//! Session-level QoE features.
//!
//! Every ratio feature shares the denominator `total - initial_buffering`
//! (rendered playback plus stall time). Frequencies divide by the full
//! wall-clock session time, initial buffering included.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::session::{Content, Motion, StreamingSession, VideoMeta};

/// Numeric feature names in canonical order.
pub const NUMERIC_FEATURES: [&str; 25] = [
    "initial_buffer_time_s",
    "rebuffer_percentage",
    "rebuffer_count",
    "average_rendered_bitrate_kbps",
    "bitrate_switch_count",
    "average_bitrate_switch_magnitude_kbps",
    "ratio_highest_ladder_level",
    "average_relative_bitrate_switch_magnitude_kbps",
    "ratio_highest_sequence_level",
    "ratio_minimum_sequence_level",
    "ratio_sequence_level_max_half",
    "average_video_resolution_px2",
    "mean_seq_psnr_db",
    "bitrate_pos_changes_count",
    "bitrate_neg_changes_count",
    "bitrate_max_pos_change_kbps",
    "bitrate_max_neg_change_kbps",
    "bitrate_mean_pos_change_kbps",
    "bitrate_mean_neg_change_kbps",
    "ti",
    "si",
    "frequency_of_stalling_per_s",
    "average_stall_duration_s",
    "maximum_stall_duration_s",
    "frequency_of_switching_per_s",
];

pub const MEAN_SEQ_PSNR: &str = "mean_seq_psnr_db";
pub const CONSTANT_BITRATE: &str = "constant_bitrate";

/// Number of columns after one-hot expansion.
pub const ENCODED_WIDTH: usize = NUMERIC_FEATURES.len() + 10 + 5 + 1;

/// Column names of the encoded table: numerics, `content_*` and `motion_*`
/// alphabetically, then `constant_bitrate`.
pub fn encoded_columns() -> Vec<String> {
    let mut cols: Vec<String> = NUMERIC_FEATURES.iter().map(|s| s.to_string()).collect();
    cols.extend(Content::ALL.iter().map(|c| format!("content_{c}")));
    cols.extend(Motion::ALL.iter().map(|m| format!("motion_{m}")));
    cols.push(CONSTANT_BITRATE.to_string());
    debug_assert_eq!(cols.len(), ENCODED_WIDTH);
    cols
}

/// Position of a canonical column name in [`encoded_columns`].
pub fn column_index(name: &str) -> Option<usize> {
    if let Some(i) = NUMERIC_FEATURES.iter().position(|n| *n == name) {
        return Some(i);
    }
    let base = NUMERIC_FEATURES.len();
    if let Some(rest) = name.strip_prefix("content_") {
        return Content::ALL.iter().position(|c| c.as_str() == rest).map(|i| base + i);
    }
    if let Some(rest) = name.strip_prefix("motion_") {
        return Motion::ALL
            .iter()
            .position(|m| m.as_str() == rest)
            .map(|i| base + Content::ALL.len() + i);
    }
    (name == CONSTANT_BITRATE).then_some(ENCODED_WIDTH - 1)
}

/// Maps shorthand and table-style names onto canonical column names.
///
/// Accepts the canonical names themselves, the unit-less short forms
/// (`frequency_of_stalling`, `average_video_resolution`, ...) and the two
/// published aliases for weighted bitrate and switch magnitude.
pub fn canonical_name(name: &str) -> Result<&'static str> {
    let key = name.trim().to_ascii_lowercase().replace([' ', '-'], "_");
    let alias = match key.as_str() {
        "initial_buffer_time" => Some("initial_buffer_time_s"),
        "average_rendered_bitrate" | "average_weighted_bitrate" => {
            Some("average_rendered_bitrate_kbps")
        }
        "average_bitrate_switch_magnitude" | "average_bitrate_swithcing_magnitude" => {
            Some("average_bitrate_switch_magnitude_kbps")
        }
        "average_relative_bitrate_switch_magnitude"
        | "average_relative_bitrate_swithcing_magnitude" => {
            Some("average_relative_bitrate_switch_magnitude_kbps")
        }
        "average_video_resolution" => Some("average_video_resolution_px2"),
        "mean_seq_psnr" => Some(MEAN_SEQ_PSNR),
        "bitrate_max_pos_change" => Some("bitrate_max_pos_change_kbps"),
        "bitrate_max_neg_change" => Some("bitrate_max_neg_change_kbps"),
        "bitrate_mean_pos_change" => Some("bitrate_mean_pos_change_kbps"),
        "bitrate_mean_neg_change" => Some("bitrate_mean_neg_change_kbps"),
        "frequency_of_stalling" => Some("frequency_of_stalling_per_s"),
        "average_stall_duration" => Some("average_stall_duration_s"),
        "maximum_stall_duration" => Some("maximum_stall_duration_s"),
        "frequency_of_switching" => Some("frequency_of_switching_per_s"),
        _ => None,
    };
    if let Some(a) = alias {
        return Ok(a);
    }
    match column_index(&key) {
        Some(i) if i < NUMERIC_FEATURES.len() => Ok(NUMERIC_FEATURES[i]),
        Some(_) => Ok(static_one_hot_name(&key)),
        None => Err(Error::UnknownFeature(name.to_string())),
    }
}

// Static copies of the one-hot and flag column names.
fn static_one_hot_name(key: &str) -> &'static str {
    const ONE_HOT: [&str; 16] = [
        "content_animals",
        "content_animation",
        "content_architecture",
        "content_food",
        "content_game",
        "content_human",
        "content_movie",
        "content_nature",
        "content_screen",
        "content_sport",
        "motion_average",
        "motion_camera",
        "motion_high",
        "motion_smooth",
        "motion_static",
        "constant_bitrate",
    ];
    ONE_HOT
        .iter()
        .copied()
        .find(|n| *n == key)
        .expect("column_index accepted the key")
}

/// The full per-session characteristic vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub initial_buffer_time_s: f64,
    pub rebuffer_percentage: f64,
    pub rebuffer_count: u32,
    pub average_rendered_bitrate_kbps: f64,
    pub bitrate_switch_count: u32,
    pub average_bitrate_switch_magnitude_kbps: f64,
    pub ratio_highest_ladder_level: f64,
    /// Signed: increases count positive, decreases negative.
    pub average_relative_bitrate_switch_magnitude_kbps: f64,
    pub ratio_highest_sequence_level: f64,
    pub ratio_minimum_sequence_level: f64,
    pub ratio_sequence_level_max_half: f64,
    pub average_video_resolution_px2: f64,
    /// Absent in reference-free mode.
    pub mean_seq_psnr_db: Option<f64>,
    pub bitrate_pos_changes_count: u32,
    pub bitrate_neg_changes_count: u32,
    pub bitrate_max_pos_change_kbps: f64,
    pub bitrate_max_neg_change_kbps: f64,
    pub bitrate_mean_pos_change_kbps: f64,
    pub bitrate_mean_neg_change_kbps: f64,
    pub ti: f64,
    pub si: f64,
    pub frequency_of_stalling_per_s: f64,
    pub average_stall_duration_s: f64,
    pub maximum_stall_duration_s: f64,
    pub frequency_of_switching_per_s: f64,
    pub constant_bitrate: bool,
    pub content: Content,
    pub motion: Motion,
}

fn mean_or_zero(sum: f64, count: u32) -> f64 {
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Computes the feature vector for one session.
pub fn extract_features(s: &StreamingSession, meta: &VideoMeta) -> Result<FeatureVector> {
    if s.video_id != meta.video_id {
        return Err(Error::Validation(format!(
            "session video_id `{}` does not match meta `{}`",
            s.video_id, meta.video_id
        )));
    }
    let t = s.timeline();
    let active = t.active_denominator_s;
    let rendered = t.rendered_playback_s;

    let mut weighted_bitrate = 0.0;
    let mut weighted_width = 0.0;
    let mut weighted_height = 0.0;
    let mut min_level = u32::MAX;
    let mut max_level = 0;
    for seg in &s.segments {
        let level = s.ladder.level(seg.level_index).expect("validated level index");
        weighted_bitrate += level.bitrate_kbps * seg.duration_s;
        weighted_width += level.width_px as f64 * seg.duration_s;
        weighted_height += level.height_px as f64 * seg.duration_s;
        min_level = min_level.min(seg.level_index);
        max_level = max_level.max(seg.level_index);
    }

    let time_where = |pred: &dyn Fn(u32) -> bool| -> f64 {
        s.segments
            .iter()
            .filter(|seg| pred(seg.level_index))
            .fold(0.0, |acc, seg| acc + seg.duration_s)
    };
    let ladder_top = s.ladder.max_index();
    let half = (s.ladder.len() as u32).div_ceil(2);

    let mut switches = 0u32;
    let (mut abs_sum, mut signed_sum) = (0.0, 0.0);
    let (mut pos_n, mut neg_n) = (0u32, 0u32);
    let (mut pos_sum, mut neg_sum) = (0.0, 0.0);
    let (mut pos_max, mut neg_max) = (0.0f64, 0.0f64);
    for pair in s.segments.windows(2) {
        if pair[0].level_index == pair[1].level_index {
            continue;
        }
        switches += 1;
        let delta = s.segment_bitrate(&pair[1]) - s.segment_bitrate(&pair[0]);
        abs_sum += delta.abs();
        signed_sum += delta;
        if delta > 0.0 {
            pos_n += 1;
            pos_sum += delta;
            pos_max = pos_max.max(delta);
        } else {
            neg_n += 1;
            neg_sum += -delta;
            neg_max = neg_max.max(-delta);
        }
    }

    let stall_count = s.stalls.len() as u32;
    let max_stall = s.stalls.iter().map(|st| st.duration_s).fold(0.0, f64::max);

    Ok(FeatureVector {
        initial_buffer_time_s: s.initial_buffering_s,
        rebuffer_percentage: t.stalled_s / active,
        rebuffer_count: stall_count,
        average_rendered_bitrate_kbps: weighted_bitrate / rendered,
        bitrate_switch_count: switches,
        average_bitrate_switch_magnitude_kbps: mean_or_zero(abs_sum, switches),
        ratio_highest_ladder_level: time_where(&|l| l == ladder_top) / active,
        average_relative_bitrate_switch_magnitude_kbps: mean_or_zero(signed_sum, switches),
        ratio_highest_sequence_level: time_where(&|l| l == max_level) / active,
        ratio_minimum_sequence_level: time_where(&|l| l == min_level) / active,
        ratio_sequence_level_max_half: time_where(&|l| l >= half) / active,
        average_video_resolution_px2: (weighted_width / rendered) * (weighted_height / rendered),
        mean_seq_psnr_db: meta.mean_seq_psnr,
        bitrate_pos_changes_count: pos_n,
        bitrate_neg_changes_count: neg_n,
        bitrate_max_pos_change_kbps: pos_max,
        bitrate_max_neg_change_kbps: neg_max,
        bitrate_mean_pos_change_kbps: mean_or_zero(pos_sum, pos_n),
        bitrate_mean_neg_change_kbps: mean_or_zero(neg_sum, neg_n),
        ti: meta.ti,
        si: meta.si,
        frequency_of_stalling_per_s: stall_count as f64 / t.total_duration_s,
        average_stall_duration_s: mean_or_zero(t.stalled_s, stall_count),
        maximum_stall_duration_s: max_stall,
        frequency_of_switching_per_s: switches as f64 / t.total_duration_s,
        constant_bitrate: min_level == max_level,
        content: meta.content,
        motion: meta.motion,
    })
}

impl FeatureVector {
    /// Numeric features in canonical order; `None` only for missing PSNR.
    pub fn numeric(&self) -> [Option<f64>; 25] {
        [
            Some(self.initial_buffer_time_s),
            Some(self.rebuffer_percentage),
            Some(self.rebuffer_count as f64),
            Some(self.average_rendered_bitrate_kbps),
            Some(self.bitrate_switch_count as f64),
            Some(self.average_bitrate_switch_magnitude_kbps),
            Some(self.ratio_highest_ladder_level),
            Some(self.average_relative_bitrate_switch_magnitude_kbps),
            Some(self.ratio_highest_sequence_level),
            Some(self.ratio_minimum_sequence_level),
            Some(self.ratio_sequence_level_max_half),
            Some(self.average_video_resolution_px2),
            self.mean_seq_psnr_db,
            Some(self.bitrate_pos_changes_count as f64),
            Some(self.bitrate_neg_changes_count as f64),
            Some(self.bitrate_max_pos_change_kbps),
            Some(self.bitrate_max_neg_change_kbps),
            Some(self.bitrate_mean_pos_change_kbps),
            Some(self.bitrate_mean_neg_change_kbps),
            Some(self.ti),
            Some(self.si),
            Some(self.frequency_of_stalling_per_s),
            Some(self.average_stall_duration_s),
            Some(self.maximum_stall_duration_s),
            Some(self.frequency_of_switching_per_s),
        ]
    }

    /// Ratio-valued features, each in `[0, 1]`.
    pub fn ratios(&self) -> [f64; 5] {
        [
            self.rebuffer_percentage,
            self.ratio_highest_ladder_level,
            self.ratio_highest_sequence_level,
            self.ratio_minimum_sequence_level,
            self.ratio_sequence_level_max_half,
        ]
    }
}

/// Dense row aligned with [`encoded_columns`].
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedFeatures {
    values: Vec<Option<f64>>,
}

impl EncodedFeatures {
    pub fn from_values(values: Vec<Option<f64>>) -> Result<Self> {
        if values.len() != ENCODED_WIDTH {
            return Err(Error::DimensionMismatch { expected: ENCODED_WIDTH, got: values.len() });
        }
        Ok(EncodedFeatures { values })
    }

    /// Every column present and zero.
    pub fn zeros() -> Self {
        EncodedFeatures { values: vec![Some(0.0); ENCODED_WIDTH] }
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    /// Value of a column; `Ok(None)` when the column exists but is absent.
    pub fn get(&self, name: &str) -> Result<Option<f64>> {
        let idx = column_index(name).ok_or_else(|| Error::UnknownFeature(name.to_string()))?;
        Ok(self.values[idx])
    }

    pub fn set(&mut self, name: &str, value: Option<f64>) -> Result<()> {
        let idx = column_index(name).ok_or_else(|| Error::UnknownFeature(name.to_string()))?;
        self.values[idx] = value;
        Ok(())
    }

    /// Convex combination `alpha * self + (1 - alpha) * other`, absent wherever
    /// either side is absent.
    pub fn lerp(&self, other: &Self, alpha: f64) -> Self {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| Some(alpha * (*a)? + (1.0 - alpha) * (*b)?))
            .collect();
        EncodedFeatures { values }
    }
}

/// One-hot expands content and motion and turns `constant_bitrate` into 0/1.
///
/// The vocabularies are closed enums, so every `FeatureVector` encodes.
pub fn encode_categoricals(v: &FeatureVector) -> EncodedFeatures {
    let mut values: Vec<Option<f64>> = v.numeric().to_vec();
    values.extend(Content::ALL.iter().map(|c| Some(if *c == v.content { 1.0 } else { 0.0 })));
    values.extend(Motion::ALL.iter().map(|m| Some(if *m == v.motion { 1.0 } else { 0.0 })));
    values.push(Some(if v.constant_bitrate { 1.0 } else { 0.0 }));
    EncodedFeatures { values }
}

/// A feature table: row ids plus encoded rows, with any extra numeric
/// columns (for instance a `mos` target) carried alongside.
#[derive(Debug, Clone, Default)]
pub struct FeatureTable {
    pub ids: Vec<String>,
    pub rows: Vec<EncodedFeatures>,
    pub extra_columns: Vec<String>,
    pub extras: Vec<Vec<Option<f64>>>,
}

pub const ID_COLUMN: &str = "session_id";

fn format_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_cell(raw: &str, column: &str, row: usize) -> Result<Option<f64>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Parse(format!("row {row}, column `{column}`: not a number: `{raw}`")))
}

impl FeatureTable {
    pub fn push(&mut self, id: impl Into<String>, row: EncodedFeatures) {
        self.ids.push(id.into());
        self.rows.push(row);
        self.extras.push(vec![None; self.extra_columns.len()]);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Values of a column by name, looking in encoded columns first, then extras.
    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        if let Some(idx) = column_index(name) {
            return Ok(self.rows.iter().map(|r| r.values[idx]).collect());
        }
        let idx = self
            .extra_columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))?;
        Ok(self.extras.iter().map(|r| r[idx]).collect())
    }

    /// Writes `session_id`, the encoded columns, then any extra columns.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![ID_COLUMN.to_string()];
        header.extend(encoded_columns());
        header.extend(self.extra_columns.iter().cloned());
        w.write_record(&header)?;
        for ((id, row), extra) in self.ids.iter().zip(&self.rows).zip(&self.extras) {
            let mut rec = vec![id.clone()];
            rec.extend(row.values.iter().map(|v| format_cell(*v)));
            rec.extend(extra.iter().map(|v| format_cell(*v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table. Headers may use canonical names or any alias accepted by
    /// [`canonical_name`]; unrecognised columns are kept as extras. Encoded
    /// columns missing from the file are absent in every row.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let mut id_col = None;
        let mut mapping: Vec<Result<usize>> = Vec::with_capacity(headers.len());
        let mut extra_columns = Vec::new();
        for (i, h) in headers.iter().enumerate() {
            if h == ID_COLUMN {
                id_col = Some(i);
                mapping.push(Err(Error::UnknownFeature(h.into())));
                continue;
            }
            match canonical_name(h) {
                Ok(name) => mapping.push(Ok(column_index(name).expect("canonical"))),
                Err(_) => {
                    mapping.push(Err(Error::UnknownFeature(h.into())));
                    extra_columns.push(h.to_string());
                }
            }
        }
        let mut table = FeatureTable { extra_columns, ..Default::default() };
        for (row_no, record) in rdr.records().enumerate() {
            let record = record?;
            let mut values = vec![None; ENCODED_WIDTH];
            let mut extra = Vec::with_capacity(table.extra_columns.len());
            for (i, cell) in record.iter().enumerate() {
                if Some(i) == id_col {
                    continue;
                }
                let value = parse_cell(cell, &headers[i], row_no + 1)?;
                match &mapping[i] {
                    Ok(idx) => values[*idx] = value,
                    Err(_) => extra.push(value),
                }
            }
            let id = match id_col {
                Some(c) => record[c].to_string(),
                None => format!("row{}", row_no + 1),
            };
            table.ids.push(id);
            table.rows.push(EncodedFeatures { values });
            table.extras.push(extra);
        }
        Ok(table)
    }
}
