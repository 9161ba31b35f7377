//! Ocean level series: harmonic synthesis, tide-gauge ingestion and
//! half-tide segmentation.

mod gauge;
mod segment;
mod synth;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

pub use gauge::{
    ingest_gauge, monthly_windows, read_tide_csv, write_tide_csv, GaugeFormat, IngestOptions, MonthWindow,
};
pub use segment::{segment_half_tides, Direction, HalfTide, DEFAULT_SMOOTH_WINDOW_S};
pub use synth::{random_phases, swansea_constituents, synthesize, Constituent};

/// Per-sample quality flag of a gauge record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QualityFlag {
    Good,
    Improbable,
    Null,
    Interpolated,
}

impl QualityFlag {
    /// Single-character code used in files: `G`, `M`, `N`, `T`.
    pub fn code(self) -> char {
        match self {
            QualityFlag::Good => 'G',
            QualityFlag::Improbable => 'M',
            QualityFlag::Null => 'N',
            QualityFlag::Interpolated => 'T',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'G' => Some(QualityFlag::Good),
            'M' => Some(QualityFlag::Improbable),
            'N' => Some(QualityFlag::Null),
            'T' => Some(QualityFlag::Interpolated),
            _ => None,
        }
    }
}

/// Evenly sampled ocean levels relative to mean sea level.
#[derive(Debug, Clone, PartialEq)]
pub struct TideSeries {
    pub epoch: NaiveDateTime,
    pub dt_s: f64,
    pub levels_m: Vec<f64>,
    pub quality: Vec<QualityFlag>,
}

impl TideSeries {
    /// A series with every sample flagged good.
    pub fn from_levels(epoch: NaiveDateTime, dt_s: f64, levels_m: Vec<f64>) -> Self {
        let quality = vec![QualityFlag::Good; levels_m.len()];
        Self { epoch, dt_s, levels_m, quality }
    }

    pub fn len(&self) -> usize {
        self.levels_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels_m.is_empty()
    }

    pub fn time_s(&self, idx: usize) -> f64 {
        idx as f64 * self.dt_s
    }

    /// Time of the last sample relative to the first.
    pub fn span_s(&self) -> f64 {
        self.len().saturating_sub(1) as f64 * self.dt_s
    }

    pub fn good_count(&self) -> usize {
        self.quality.iter().filter(|q| **q == QualityFlag::Good).count()
    }

    pub fn all_good(&self) -> bool {
        self.good_count() == self.len()
    }

    /// Samples `[start, end)` as a new series starting at the first kept sample.
    pub fn slice(&self, start: usize, end: usize) -> TideSeries {
        let offset = chrono::Duration::milliseconds((self.time_s(start) * 1000.0).round() as i64);
        TideSeries {
            epoch: self.epoch + offset,
            dt_s: self.dt_s,
            levels_m: self.levels_m[start..end].to_vec(),
            quality: self.quality[start..end].to_vec(),
        }
    }
}

/// Default epoch for synthetic series.
pub fn default_epoch() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2000, 1, 1).and_then(|d| d.and_hms_opt(0, 0, 0)).expect("valid date")
}
