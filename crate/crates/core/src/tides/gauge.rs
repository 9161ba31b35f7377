//! Tide-gauge files.
//!
//! Two layouts are read:
//!
//! * `bodc-ascii`: fixed text rows `  <n>) YYYY/MM/DD hh:mm:ss  <level>[flag]  [<residual>[flag]]`,
//!   preceded by any number of free-form header lines. The flag character
//!   following a level is `M` (improbable), `N` (null value) or `T`
//!   (interpolated); no flag means good.
//! * `csv`: `time,level[,flag]` where `time` is either seconds since the epoch
//!   given by a `# epoch: <ISO datetime>` comment, or an ISO datetime. `#`
//!   lines are comments and a non-numeric first row is treated as a header.
//!
//! Missing timestamps inside a file are filled with null samples. Intervals
//! that are not a whole multiple of the smallest interval are rejected.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{default_epoch, QualityFlag, TideSeries};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GaugeFormat {
    BodcAscii,
    Csv,
}

impl FromStr for GaugeFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bodc-ascii" | "bodc" => Ok(GaugeFormat::BodcAscii),
            "csv" => Ok(GaugeFormat::Csv),
            other => Err(format!("unknown gauge format `{other}` (expected bodc-ascii or csv)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestOptions {
    pub format: GaugeFormat,
    /// Subtracted from every level to refer it to mean sea level.
    pub datum_offset_m: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self { format: GaugeFormat::Csv, datum_offset_m: 0.0 }
    }
}

struct RawSample {
    time: NaiveDateTime,
    level: f64,
    flag: QualityFlag,
    line: usize,
}

pub fn ingest_gauge(path: &Path, opts: &IngestOptions) -> Result<TideSeries> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading tide file {}", path.display()), e))?;
    let samples = match opts.format {
        GaugeFormat::BodcAscii => parse_bodc(&text, path)?,
        GaugeFormat::Csv => parse_csv(&text, path)?,
    };
    assemble(samples, path, opts.datum_offset_m)
}

/// Reads a file written by [`write_tide_csv`].
pub fn read_tide_csv(path: &Path) -> Result<TideSeries> {
    ingest_gauge(path, &IngestOptions::default())
}

fn parse_bodc(text: &str, path: &Path) -> Result<Vec<RawSample>> {
    let mut samples = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let first = tokens.next().unwrap_or("");
        let is_row = first.len() > 1
            && first.ends_with(')')
            && first[..first.len() - 1].chars().all(|c| c.is_ascii_digit());
        if !is_row {
            if samples.is_empty() {
                continue;
            }
            return Err(Error::parse(path, line, format!("malformed data row `{trimmed}`")));
        }
        let (Some(date), Some(time), Some(level)) = (tokens.next(), tokens.next(), tokens.next()) else {
            return Err(Error::parse(path, line, "expected date, time and level"));
        };
        let stamp = NaiveDateTime::parse_from_str(&format!("{date} {time}"), "%Y/%m/%d %H:%M:%S")
            .map_err(|e| Error::parse(path, line, format!("bad timestamp `{date} {time}`: {e}")))?;
        let (level, flag) = split_flagged(level).map_err(|m| Error::parse(path, line, m))?;
        samples.push(RawSample { time: stamp, level, flag, line });
    }
    Ok(samples)
}

/// `"4.512M"` → `(4.512, Improbable)`.
fn split_flagged(token: &str) -> std::result::Result<(f64, QualityFlag), String> {
    let digits_end = token.trim_end_matches(|c: char| c.is_ascii_alphabetic()).len();
    let (number, suffix) = token.split_at(digits_end);
    let level = number.parse::<f64>().map_err(|e| format!("bad level `{token}`: {e}"))?;
    let flag = match suffix {
        "" => QualityFlag::Good,
        s if s.len() == 1 => {
            let c = s.chars().next().unwrap_or('?');
            match c.to_ascii_uppercase() {
                'M' | 'N' | 'T' => QualityFlag::from_code(c).unwrap_or(QualityFlag::Null),
                _ => return Err(format!("unknown quality flag `{s}` in `{token}`")),
            }
        }
        s => return Err(format!("unknown quality flag `{s}` in `{token}`")),
    };
    Ok((level, flag))
}

const DATETIME_FORMATS: [&str; 3] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y/%m/%d %H:%M:%S"];

fn parse_datetime(s: &str) -> Option<NaiveDateTime> {
    DATETIME_FORMATS.iter().find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

fn parse_csv(text: &str, path: &Path) -> Result<Vec<RawSample>> {
    let mut epoch = default_epoch();
    for line in text.lines() {
        if let Some(rest) = line.trim().strip_prefix('#') {
            if let Some(value) = rest.trim().strip_prefix("epoch:") {
                epoch = parse_datetime(value.trim()).ok_or_else(|| {
                    Error::parse(path, 0, format!("bad epoch comment `{}`", value.trim()))
                })?;
            }
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut samples = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() < 2 {
            return Err(Error::parse(path, line, "expected at least `time,level`"));
        }
        let (time_field, level_field) = (&record[0], &record[1]);
        let level = match level_field.parse::<f64>() {
            Ok(v) => v,
            Err(_) if row_idx == 0 => continue,
            Err(e) => return Err(Error::parse(path, line, format!("bad level `{level_field}`: {e}"))),
        };
        let time = match time_field.parse::<f64>() {
            Ok(secs) if secs.is_finite() => epoch + Duration::milliseconds((secs * 1000.0).round() as i64),
            _ => parse_datetime(time_field)
                .ok_or_else(|| Error::parse(path, line, format!("bad time `{time_field}`")))?,
        };
        let flag = match record.get(2).unwrap_or("") {
            "" => QualityFlag::Good,
            code => {
                let mut chars = code.chars();
                match (chars.next().and_then(QualityFlag::from_code), chars.next()) {
                    (Some(flag), None) => flag,
                    _ => return Err(Error::parse(path, line, format!("unknown quality flag `{code}`"))),
                }
            }
        };
        samples.push(RawSample { time, level, flag, line });
    }
    Ok(samples)
}

fn assemble(samples: Vec<RawSample>, path: &Path, datum_offset_m: f64) -> Result<TideSeries> {
    let Some(first) = samples.first() else {
        return Err(Error::parse(path, 0, "no samples"));
    };
    let epoch = first.time;
    if samples.len() == 1 {
        return Err(Error::parse(path, first.line, "a tide series needs at least two samples"));
    }
    let mut base_ms = i64::MAX;
    for pair in samples.windows(2) {
        let diff = (pair[1].time - pair[0].time).num_milliseconds();
        if diff <= 0 {
            return Err(Error::parse(path, pair[1].line, "timestamps must be strictly increasing"));
        }
        base_ms = base_ms.min(diff);
    }

    let mut levels = Vec::with_capacity(samples.len());
    let mut quality = Vec::with_capacity(samples.len());
    let mut prev: Option<&RawSample> = None;
    for s in &samples {
        if let Some(p) = prev {
            let diff = (s.time - p.time).num_milliseconds();
            if diff % base_ms != 0 {
                return Err(Error::parse(
                    path,
                    s.line,
                    format!("mixed sample intervals: {} s after a base interval of {} s", diff as f64 / 1e3, base_ms as f64 / 1e3),
                ));
            }
            for _ in 1..diff / base_ms {
                levels.push(f64::NAN);
                quality.push(QualityFlag::Null);
            }
        }
        let mut flag = s.flag;
        if flag == QualityFlag::Good && !s.level.is_finite() {
            flag = QualityFlag::Null;
        }
        levels.push(s.level - datum_offset_m);
        quality.push(flag);
        prev = Some(s);
    }
    Ok(TideSeries { epoch, dt_s: base_ms as f64 / 1e3, levels_m: levels, quality })
}

/// Writes the CSV layout read by [`read_tide_csv`]; levels round-trip bit-exactly.
pub fn write_tide_csv<W: Write>(series: &TideSeries, mut out: W, provenance: &[(&str, String)]) -> Result<()> {
    let io = |e| Error::io("writing tide csv", e);
    writeln!(out, "# epoch: {}", series.epoch.format("%Y-%m-%dT%H:%M:%S")).map_err(io)?;
    writeln!(out, "# dt_s: {}", series.dt_s).map_err(io)?;
    for (k, v) in provenance {
        writeln!(out, "# {k}: {v}").map_err(io)?;
    }
    writeln!(out, "time_s,level_m,flag").map_err(io)?;
    for (i, (level, flag)) in series.levels_m.iter().zip(&series.quality).enumerate() {
        writeln!(out, "{},{},{}", series.time_s(i), level, flag.code()).map_err(io)?;
    }
    Ok(())
}

/// Calendar month coverage of a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthWindow {
    pub year: i32,
    pub month: u32,
    pub start_idx: usize,
    pub end_idx: usize,
    /// Samples a complete month holds at the series interval.
    pub expected: usize,
    pub good: usize,
}

impl MonthWindow {
    pub fn good_fraction(&self) -> f64 {
        self.good as f64 / self.expected as f64
    }

    /// A month is usable when its good fraction reaches `threshold` (1.0 keeps only clean months).
    pub fn is_usable(&self, threshold: f64) -> bool {
        self.good_fraction() >= threshold
    }

    pub fn label(&self) -> String {
        format!("{:04}-{:02}", self.year, self.month)
    }
}

fn month_start(year: i32, month: u32) -> NaiveDateTime {
    NaiveDate::from_ymd_opt(year, month, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid month start")
}

fn next_month(year: i32, month: u32) -> (i32, u32) {
    if month == 12 {
        (year + 1, 1)
    } else {
        (year, month + 1)
    }
}

pub fn monthly_windows(series: &TideSeries) -> Vec<MonthWindow> {
    let mut windows = Vec::new();
    if series.is_empty() {
        return windows;
    }
    let dt_ms = (series.dt_s * 1000.0).round() as i64;
    let time_of = |i: usize| series.epoch + Duration::milliseconds(i as i64 * dt_ms);
    let first = series.epoch;
    let (mut year, mut month) = (first.year(), first.month());
    let mut idx = 0;
    while idx < series.len() {
        let start = month_start(year, month);
        let (ny, nm) = next_month(year, month);
        let end = month_start(ny, nm);
        let mut end_idx = idx;
        while end_idx < series.len() && time_of(end_idx) < end {
            end_idx += 1;
        }
        let expected = ((end - start).num_milliseconds() / dt_ms) as usize;
        let good = series.quality[idx..end_idx].iter().filter(|q| **q == QualityFlag::Good).count();
        windows.push(MonthWindow { year, month, start_idx: idx, end_idx, expected, good });
        idx = end_idx;
        (year, month) = (ny, nm);
    }
    windows
}
