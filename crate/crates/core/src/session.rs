//! Session data model and log parsing.
//!
//! A session log is one JSON document describing the quality ladder the
//! player could choose from, the initial buffering delay, the ordered list of
//! rendered segments and the stall events that interrupted playback.
//!
//! Wall-clock session time is `initial_buffering_s + rendered + stalled`.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityLevel {
    /// 1-based rank within the ladder, 1 = lowest.
    pub index: u32,
    pub bitrate_kbps: f64,
    #[serde(rename = "width")]
    pub width_px: u32,
    #[serde(rename = "height")]
    pub height_px: u32,
}

/// Ordered set of encoded variants. Indices are `1..=len`, bitrates strictly
/// increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QualityLadder {
    levels: Vec<QualityLevel>,
}

impl QualityLadder {
    pub fn new(levels: Vec<QualityLevel>) -> Result<Self> {
        let ladder = QualityLadder { levels };
        ladder.validate()?;
        Ok(ladder)
    }

    fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::Validation("ladder: must not be empty".into()));
        }
        for (pos, level) in self.levels.iter().enumerate() {
            let expected = pos as u32 + 1;
            if level.index != expected {
                return Err(Error::Validation(format!(
                    "ladder[{pos}].index: expected {expected}, got {}",
                    level.index
                )));
            }
            if !(level.bitrate_kbps.is_finite() && level.bitrate_kbps > 0.0) {
                return Err(Error::Validation(format!(
                    "ladder[{pos}].bitrate_kbps: must be positive, got {}",
                    level.bitrate_kbps
                )));
            }
            if level.width_px == 0 || level.height_px == 0 {
                return Err(Error::Validation(format!(
                    "ladder[{pos}]: width and height must be positive"
                )));
            }
            if pos > 0 && level.bitrate_kbps <= self.levels[pos - 1].bitrate_kbps {
                return Err(Error::Validation(format!(
                    "ladder[{pos}].bitrate_kbps: bitrates must strictly increase ({} after {})",
                    level.bitrate_kbps,
                    self.levels[pos - 1].bitrate_kbps
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[QualityLevel] {
        &self.levels
    }

    /// Level by 1-based index.
    pub fn level(&self, index: u32) -> Option<&QualityLevel> {
        index
            .checked_sub(1)
            .and_then(|i| self.levels.get(i as usize))
    }

    /// Index of the top rung.
    pub fn max_index(&self) -> u32 {
        self.levels.len() as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentPlayback {
    #[serde(rename = "level")]
    pub level_index: u32,
    pub duration_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StallEvent {
    /// Playback position at which the stall began.
    pub after_playback_s: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamingSession {
    pub video_id: String,
    pub ladder: QualityLadder,
    pub initial_buffering_s: f64,
    pub segments: Vec<SegmentPlayback>,
    #[serde(default)]
    pub stalls: Vec<StallEvent>,
}

/// Aggregate time quantities shared by every feature formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimelineSummary {
    pub rendered_playback_s: f64,
    pub stalled_s: f64,
    pub total_duration_s: f64,
    /// `total_duration_s - initial_buffering_s`.
    pub active_denominator_s: f64,
}

impl StreamingSession {
    /// Builds and validates a session.
    pub fn new(
        video_id: impl Into<String>,
        ladder: QualityLadder,
        initial_buffering_s: f64,
        segments: Vec<SegmentPlayback>,
        stalls: Vec<StallEvent>,
    ) -> Result<Self> {
        let session = StreamingSession {
            video_id: video_id.into(),
            ladder,
            initial_buffering_s,
            segments,
            stalls,
        };
        session.validate()?;
        Ok(session)
    }

    pub fn from_json_str(doc: &str) -> Result<Self> {
        let session: StreamingSession =
            serde_json::from_str(doc).map_err(|e| Error::Parse(e.to_string()))?;
        session.validate()?;
        Ok(session)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let session: StreamingSession =
            serde_json::from_reader(reader).map_err(|e| Error::Parse(e.to_string()))?;
        session.validate()?;
        Ok(session)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("session serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.ladder.validate()?;
        if !(self.initial_buffering_s.is_finite() && self.initial_buffering_s >= 0.0) {
            return Err(Error::Validation(format!(
                "initial_buffering_s: must be nonnegative, got {}",
                self.initial_buffering_s
            )));
        }
        if self.segments.is_empty() {
            return Err(Error::Validation("segments: must not be empty".into()));
        }
        let top = self.ladder.max_index();
        for (pos, seg) in self.segments.iter().enumerate() {
            if seg.level_index == 0 || seg.level_index > top {
                return Err(Error::Validation(format!(
                    "segments[{pos}].level: {} outside ladder range 1..={top}",
                    seg.level_index
                )));
            }
            if !(seg.duration_s.is_finite() && seg.duration_s > 0.0) {
                return Err(Error::Validation(format!(
                    "segments[{pos}].duration_s: must be positive, got {}",
                    seg.duration_s
                )));
            }
        }
        let rendered: f64 = self.segments.iter().map(|s| s.duration_s).sum();
        for (pos, stall) in self.stalls.iter().enumerate() {
            if !(stall.duration_s.is_finite() && stall.duration_s > 0.0) {
                return Err(Error::Validation(format!(
                    "stalls[{pos}].duration_s: must be positive, got {}",
                    stall.duration_s
                )));
            }
            if !(stall.after_playback_s.is_finite()
                && stall.after_playback_s >= 0.0
                && stall.after_playback_s <= rendered)
            {
                return Err(Error::Validation(format!(
                    "stalls[{pos}].after_playback_s: {} outside rendered playback 0..={rendered}",
                    stall.after_playback_s
                )));
            }
        }
        Ok(())
    }

    pub fn timeline(&self) -> TimelineSummary {
        let rendered_playback_s: f64 = self.segments.iter().fold(0.0, |acc, s| acc + s.duration_s);
        let stalled_s: f64 = self.stalls.iter().fold(0.0, |acc, s| acc + s.duration_s);
        let active_denominator_s = rendered_playback_s + stalled_s;
        TimelineSummary {
            rendered_playback_s,
            stalled_s,
            total_duration_s: self.initial_buffering_s + active_denominator_s,
            active_denominator_s,
        }
    }

    /// Bitrate of the level a segment was rendered at.
    pub fn segment_bitrate(&self, seg: &SegmentPlayback) -> f64 {
        self.ladder
            .level(seg.level_index)
            .expect("validated level index")
            .bitrate_kbps
    }
}

macro_rules! closed_vocab {
    ($(#[$meta:meta])* $name:ident, $kind:literal, { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            /// Every member, alphabetical.
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::UnknownCategory { kind: $kind, value: other.to_string() }),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

closed_vocab!(
    /// Content class of a reference video.
    Content, "content", {
        Animals => "animals",
        Animation => "animation",
        Architecture => "architecture",
        Food => "food",
        Game => "game",
        Human => "human",
        Movie => "movie",
        Nature => "nature",
        Screen => "screen",
        Sport => "sport",
    }
);

closed_vocab!(
    /// Motion class of a reference video.
    Motion, "motion", {
        Average => "average",
        Camera => "camera",
        High => "high",
        Smooth => "smooth",
        Static => "static",
    }
);

/// Side information about one reference video, computed outside this crate.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoMeta {
    pub video_id: String,
    pub fps: f64,
    pub si: f64,
    pub ti: f64,
    pub content: Content,
    pub motion: Motion,
    pub mean_seq_psnr: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct MetaRecord {
    video_id: String,
    fps: f64,
    si: f64,
    ti: f64,
    content: String,
    motion: String,
    #[serde(default, deserialize_with = "csv::invalid_option")]
    mean_seq_psnr: Option<f64>,
}

impl VideoMeta {
    pub fn validate(&self) -> Result<()> {
        let id = &self.video_id;
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Validation(format!("{id}: fps must be positive")));
        }
        if !(self.si.is_finite() && self.si >= 0.0 && self.ti.is_finite() && self.ti >= 0.0) {
            return Err(Error::Validation(format!("{id}: si/ti must be nonnegative")));
        }
        if let Some(psnr) = self.mean_seq_psnr {
            if !(psnr.is_finite() && psnr >= 0.0) {
                return Err(Error::Validation(format!("{id}: mean_seq_psnr must be nonnegative")));
            }
        }
        Ok(())
    }
}

/// Reads the `video_id,fps,si,ti,content,motion,mean_seq_psnr` table, keyed
/// by video id.
pub fn read_video_meta<R: Read>(reader: R) -> Result<HashMap<String, VideoMeta>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = HashMap::new();
    for (line, record) in rdr.deserialize::<MetaRecord>().enumerate() {
        let rec = record.map_err(|e| Error::Parse(format!("meta row {}: {e}", line + 1)))?;
        let meta = VideoMeta {
            content: rec.content.parse()?,
            motion: rec.motion.parse()?,
            video_id: rec.video_id,
            fps: rec.fps,
            si: rec.si,
            ti: rec.ti,
            mean_seq_psnr: rec.mean_seq_psnr,
        };
        meta.validate()?;
        if out.contains_key(&meta.video_id) {
            return Err(Error::Validation(format!("duplicate video_id `{}`", meta.video_id)));
        }
        out.insert(meta.video_id.clone(), meta);
    }
    Ok(out)
}
