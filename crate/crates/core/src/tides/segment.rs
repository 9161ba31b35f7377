use serde::{Deserialize, Serialize};

use super::TideSeries;
use crate::error::{Error, Result};

pub const DEFAULT_SMOOTH_WINDOW_S: f64 = 1800.0;

/// Extrema closer than this are treated as noise around slack water.
const MIN_EXTREMA_GAP_S: f64 = 2.0 * 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Rising ocean, ending at high water.
    Flood,
    /// Falling ocean, ending at low water.
    Ebb,
}

/// Interval between consecutive ocean extrema, as sample indices of the
/// segmented series. Consecutive half-tides share their boundary sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfTide {
    pub start_idx: usize,
    pub end_idx: usize,
    pub direction: Direction,
    /// Ocean level at `end_idx`.
    pub extreme_m: f64,
}

impl HalfTide {
    pub fn duration_s(&self, dt_s: f64) -> f64 {
        (self.end_idx - self.start_idx) as f64 * dt_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    High,
    Low,
}

/// Splits `series` at its high and low waters.
///
/// Extrema are located as first-difference sign changes of a centred moving
/// average over `smooth_window_s`, then moved to the raw extremum within one
/// window. The leading and trailing partial half-tides are kept so the result
/// tiles the whole series.
pub fn segment_half_tides(series: &TideSeries, smooth_window_s: f64) -> Result<Vec<HalfTide>> {
    let n = series.len();
    let levels = &series.levels_m;
    if let Some(i) = levels.iter().position(|v| !v.is_finite()) {
        return Err(Error::Segmentation(format!("non-finite level at sample {i}")));
    }
    let window = ((smooth_window_s / series.dt_s).round() as usize).max(1);
    let half = window / 2;
    let smooth = moving_average(levels, half);

    let mut extrema: Vec<(usize, Kind)> = Vec::new();
    let mut last_sign = 0i8;
    for i in 1..n {
        let d = smooth[i] - smooth[i - 1];
        let sign = if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            0
        };
        if sign == 0 {
            continue;
        }
        if last_sign != 0 && sign != last_sign {
            // The turning point is the last sample before the slope changed sign.
            let kind = if last_sign > 0 { Kind::High } else { Kind::Low };
            let idx = refine(levels, i - 1, half.max(1), kind);
            push_extremum(&mut extrema, levels, idx, kind);
        }
        last_sign = sign;
    }
    extrema.retain(|(idx, _)| *idx > 0 && *idx < n - 1);
    prune_close_pairs(&mut extrema, levels, (MIN_EXTREMA_GAP_S / series.dt_s).ceil() as usize);
    if extrema.len() < 2 {
        return Err(Error::Segmentation(format!(
            "found {} extrema; at least 2 are needed (is the series at least one tidal cycle long?)",
            extrema.len()
        )));
    }

    let mut bounds = Vec::with_capacity(extrema.len() + 2);
    bounds.push(0);
    bounds.extend(extrema.iter().map(|(i, _)| *i));
    bounds.push(n - 1);
    Ok(bounds
        .windows(2)
        .map(|w| {
            let (start_idx, end_idx) = (w[0], w[1]);
            let direction = if levels[end_idx] > levels[start_idx] { Direction::Flood } else { Direction::Ebb };
            HalfTide { start_idx, end_idx, direction, extreme_m: levels[end_idx] }
        })
        .collect())
}

fn moving_average(levels: &[f64], half: usize) -> Vec<f64> {
    let n = levels.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in levels {
        prefix.push(prefix.last().copied().unwrap_or(0.0) + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

fn refine(levels: &[f64], center: usize, radius: usize, kind: Kind) -> usize {
    let lo = center.saturating_sub(radius);
    let hi = (center + radius + 1).min(levels.len());
    let mut best = center;
    for i in lo..hi {
        let better = match kind {
            Kind::High => levels[i] > levels[best],
            Kind::Low => levels[i] < levels[best],
        };
        if better {
            best = i;
        }
    }
    best
}

/// Keeps extrema alternating high/low and strictly increasing in index.
fn push_extremum(extrema: &mut Vec<(usize, Kind)>, levels: &[f64], idx: usize, kind: Kind) {
    if let Some(&(last_idx, last_kind)) = extrema.last() {
        if last_kind == kind {
            let more_extreme = match kind {
                Kind::High => levels[idx] > levels[last_idx],
                Kind::Low => levels[idx] < levels[last_idx],
            };
            if more_extreme {
                extrema.pop();
                extrema.push((idx, kind));
            }
            return;
        }
        if idx <= last_idx {
            return;
        }
    }
    extrema.push((idx, kind));
}

/// Removes adjacent high/low pairs closer than `min_gap` samples, smallest
/// level swing first. Removing a pair keeps the sequence alternating.
fn prune_close_pairs(extrema: &mut Vec<(usize, Kind)>, levels: &[f64], min_gap: usize) {
    loop {
        let candidate = extrema
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1].0 - w[0].0 < min_gap)
            .map(|(j, w)| (j, (levels[w[1].0] - levels[w[0].0]).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match candidate {
            Some((j, _)) => {
                extrema.drain(j..j + 2);
            }
            None => break,
        }
    }
}
