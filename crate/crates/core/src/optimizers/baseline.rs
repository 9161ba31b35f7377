use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::basin::{basin_hopping, BasinOptions};
use super::grid::{grid_search, GridSpec};
use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::lagoon::{Lagoon, LagoonState, OceanTrack};
use crate::schemes::{HeadSchedule, HeadTriple, SchemeController, SchemeKind, SchemeSpec, SchemeState};
use crate::tides::{segment_half_tides, TideSeries};

/// Head search box and grid resolutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub h_start_m: (f64, f64),
    pub h_min_m: (f64, f64),
    pub hs_start_m: (f64, f64),
    pub initial_resolution_m: f64,
    pub final_resolution_m: f64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            h_start_m: (1.0, 6.0),
            h_min_m: (1.0, 3.0),
            hs_start_m: (1.0, 5.0),
            initial_resolution_m: 1.0,
            final_resolution_m: 0.01,
        }
    }
}

impl SearchSpace {
    /// Bounds for one half-tide's variables under `kind`.
    pub fn bounds(&self, kind: SchemeKind) -> Vec<(f64, f64)> {
        let mut b = vec![self.h_start_m, self.h_min_m];
        if kind == SchemeKind::Variant {
            b.push(self.hs_start_m);
        }
        b
    }

    fn grid(&self, kind: SchemeKind, windows: usize) -> GridSpec {
        let one = self.bounds(kind);
        GridSpec {
            bounds: (0..windows).flat_map(|_| one.iter().copied()).collect(),
            initial_resolution: self.initial_resolution_m,
            final_resolution: self.final_resolution_m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.h_start_m, self.h_min_m, self.hs_start_m].iter().all(|(lo, hi)| *lo > 0.0 && lo <= hi)
            && self.initial_resolution_m > 0.0
            && self.final_resolution_m > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid search space: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    #[serde(rename = "CH")]
    Ch,
    #[serde(rename = "CHV")]
    Chv,
    #[serde(rename = "EHT")]
    Eht,
    #[serde(rename = "EHTV")]
    Ehtv,
    #[serde(rename = "EHN")]
    Ehn,
    #[serde(rename = "EHNV")]
    Ehnv,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 6] =
        [BaselineKind::Ch, BaselineKind::Chv, BaselineKind::Eht, BaselineKind::Ehtv, BaselineKind::Ehn, BaselineKind::Ehnv];

    pub fn scheme(self) -> SchemeKind {
        match self {
            BaselineKind::Ch | BaselineKind::Eht | BaselineKind::Ehn => SchemeKind::Classic,
            BaselineKind::Chv | BaselineKind::Ehtv | BaselineKind::Ehnv => SchemeKind::Variant,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Ch => "CH",
            BaselineKind::Chv => "CHV",
            BaselineKind::Eht => "EHT",
            BaselineKind::Ehtv => "EHTV",
            BaselineKind::Ehn => "EHN",
            BaselineKind::Ehnv => "EHNV",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown baseline `{s}` (expected one of CH, CHV, EHT, EHTV, EHN, EHNV)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub space: SearchSpace,
    pub basin: BasinOptions,
    pub smooth_window_s: f64,
    /// Seeds the stochastic EHNV search; recorded in every report.
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            space: SearchSpace::default(),
            basin: BasinOptions::default(),
            smooth_window_s: crate::tides::DEFAULT_SMOOTH_WINDOW_S,
            seed: 0,
        }
    }
}

impl BaselineConfig {
    /// Reads `search.*` (box as `lo, hi` pairs and resolutions), `basin.*`,
    /// `segment.smooth_window_s` and `baseline.seed` over the defaults.
    pub fn from_config(cfg: &mut KvConfig) -> Result<Self> {
        let d = Self::default();
        let mut pair = |key: &str, default: (f64, f64)| -> Result<(f64, f64)> {
            match cfg.get_list::<f64>(key)? {
                None => Ok(default),
                Some(v) if v.len() == 2 => Ok((v[0], v[1])),
                Some(v) => Err(Error::Config(format!("`{key}` needs two values `lo, hi`, got {v:?}"))),
            }
        };
        let space = SearchSpace {
            h_start_m: pair("search.h_start_m", d.space.h_start_m)?,
            h_min_m: pair("search.h_min_m", d.space.h_min_m)?,
            hs_start_m: pair("search.hs_start_m", d.space.hs_start_m)?,
            initial_resolution_m: cfg.get_or("search.initial_resolution_m", d.space.initial_resolution_m)?,
            final_resolution_m: cfg.get_or("search.final_resolution_m", d.space.final_resolution_m)?,
        };
        space.validate()?;
        let basin = BasinOptions {
            iterations: cfg.get_or("basin.iterations", d.basin.iterations)?,
            step_scale: cfg.get_or("basin.step_scale", d.basin.step_scale)?,
            temperature_fraction: cfg.get_or("basin.temperature_fraction", d.basin.temperature_fraction)?,
            ..d.basin
        };
        if basin.iterations == 0 || !(basin.step_scale > 0.0) || !(basin.temperature_fraction >= 0.0) {
            return Err(Error::Config(format!("invalid basin-hopping options {basin:?}")));
        }
        Ok(Self {
            space,
            basin,
            smooth_window_s: cfg.get_or("segment.smooth_window_s", d.smooth_window_s)?,
            seed: cfg.get_or("baseline.seed", d.seed)?,
        })
    }
}

/// Lagoon state carried from one half-tide window into the next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarriedState {
    pub lagoon: LagoonState,
    pub scheme: SchemeState,
}

impl CarriedState {
    pub fn initial(lagoon: &Lagoon) -> Self {
        Self { lagoon: lagoon.initial_state(), scheme: SchemeState::default() }
    }
}

/// A tide resampled onto the physics grid together with its half-tide split.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedTide {
    pub track: OceanTrack,
    /// Physics step where each half-tide begins; the first is 0.
    pub boundaries: Vec<usize>,
}

impl SegmentedTide {
    pub fn new(lagoon: &Lagoon, tide: &TideSeries, smooth_window_s: f64) -> Result<Self> {
        let track = lagoon.track(tide)?;
        let halves = segment_half_tides(tide, smooth_window_s)?;
        let boundaries = halves.iter().map(|h| track.step_at(tide.time_s(h.start_idx))).collect();
        Ok(Self { track, boundaries })
    }

    pub fn half_tides(&self) -> usize {
        self.boundaries.len()
    }

    /// Physics steps covered by half-tides `halves`.
    pub fn steps(&self, halves: Range<usize>) -> Range<usize> {
        let end = self.boundaries.get(halves.end).copied().unwrap_or(self.track.len());
        self.boundaries[halves.start]..end
    }
}

/// Energy (Wh) of running `triples` over consecutive half-tides starting at
/// `first`, from `carried`. Returns the state at the end of the window.
pub fn evaluate_window(
    lagoon: &Lagoon,
    kind: SchemeKind,
    tide: &SegmentedTide,
    first: usize,
    triples: &[HeadTriple],
    carried: CarriedState,
) -> Result<(f64, CarriedState)> {
    let halves = first..(first + triples.len()).min(tide.half_tides());
    let boundaries = tide.boundaries[halves.clone()].to_vec();
    let mut controller =
        SchemeController::new(kind, HeadSchedule::per_half_tide(triples.to_vec()), boundaries)?.with_state(carried.scheme);
    let mut state = carried.lagoon;
    let energy = lagoon.simulate(&tide.track, tide.steps(halves), &mut state, &mut controller, |_| {})?;
    Ok((energy, CarriedState { lagoon: state, scheme: controller.state() }))
}

/// Energy (Wh) of a whole schedule over the whole tide, from rest.
pub fn evaluate(lagoon: &Lagoon, spec: &SchemeSpec, tide: &SegmentedTide) -> Result<f64> {
    let mut controller = SchemeController::new(spec.scheme, spec.schedule.clone(), tide.boundaries.clone())?;
    let mut state = lagoon.initial_state();
    lagoon.simulate(&tide.track, 0..tide.track.len(), &mut state, &mut controller, |_| {})
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub kind: BaselineKind,
    pub schedule: SchemeSpec,
    pub predicted_energy_gwh: f64,
    pub applied_energy_gwh: f64,
    pub evaluations: usize,
    pub half_tides_predicted: usize,
    pub half_tides_measured: usize,
    pub seed: u64,
    pub wall_time_s: f64,
}

fn split(x: &[f64], kind: SchemeKind) -> Vec<HeadTriple> {
    x.chunks(kind.arity()).map(|c| kind.triple(c)).collect()
}

/// Runs one baseline: optimize heads on `prediction`, then apply the frozen
/// schedule to `measured` with half-tides matched by index.
pub fn run_baseline(
    kind: BaselineKind,
    lagoon: &Lagoon,
    prediction: &TideSeries,
    measured: &TideSeries,
    cfg: &BaselineConfig,
) -> Result<OptimizationReport> {
    cfg.space.validate()?;
    let started = Instant::now();
    let pred = SegmentedTide::new(lagoon, prediction, cfg.smooth_window_s)?;
    let meas = SegmentedTide::new(lagoon, measured, cfg.smooth_window_s)?;
    if pred.half_tides().abs_diff(meas.half_tides()) > 1 {
        return Err(Error::Segmentation(format!(
            "prediction has {} half-tides but measured has {}; cannot transfer heads by index",
            pred.half_tides(),
            meas.half_tides()
        )));
    }

    let scheme = kind.scheme();
    let (schedule, evaluations) = match kind {
        BaselineKind::Ch | BaselineKind::Chv => optimize_constant(lagoon, scheme, &pred, cfg),
        BaselineKind::Eht | BaselineKind::Ehtv => optimize_sequential(lagoon, scheme, &pred, cfg, false)?,
        BaselineKind::Ehn => optimize_sequential(lagoon, scheme, &pred, cfg, true)?,
        BaselineKind::Ehnv => optimize_basin(lagoon, scheme, &pred, cfg)?,
    };
    let spec = SchemeSpec { scheme, schedule };
    let predicted = evaluate(lagoon, &spec, &pred)?;
    let applied = evaluate(lagoon, &spec, &meas)?;
    Ok(OptimizationReport {
        kind,
        schedule: spec,
        predicted_energy_gwh: predicted / 1e9,
        applied_energy_gwh: applied / 1e9,
        evaluations,
        half_tides_predicted: pred.half_tides(),
        half_tides_measured: meas.half_tides(),
        seed: cfg.seed,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

fn optimize_constant(
    lagoon: &Lagoon,
    scheme: SchemeKind,
    tide: &SegmentedTide,
    cfg: &BaselineConfig,
) -> (HeadSchedule, usize) {
    let result = grid_search(&cfg.space.grid(scheme, 1), |x| {
        let spec = SchemeSpec { scheme, schedule: HeadSchedule::Constant(scheme.triple(x)) };
        // The track is checked finite on construction, so evaluation cannot fail.
        evaluate(lagoon, &spec, tide).unwrap_or(f64::NAN)
    });
    (HeadSchedule::Constant(scheme.triple(&result.best)), result.evaluations)
}

/// One grid search per half-tide with state carried forward. With
/// `look_ahead`, each search also optimizes the following half-tide jointly
/// and commits only the current one.
fn optimize_sequential(
    lagoon: &Lagoon,
    scheme: SchemeKind,
    tide: &SegmentedTide,
    cfg: &BaselineConfig,
    look_ahead: bool,
) -> Result<(HeadSchedule, usize)> {
    let n = tide.half_tides();
    let mut carried = CarriedState::initial(lagoon);
    let mut committed = Vec::with_capacity(n);
    let mut evaluations = 0;
    for k in 0..n {
        let windows = if look_ahead && k + 1 < n { 2 } else { 1 };
        let result = grid_search(&cfg.space.grid(scheme, windows), |x| {
            evaluate_window(lagoon, scheme, tide, k, &split(x, scheme), carried).map_or(f64::NAN, |(e, _)| e)
        });
        evaluations += result.evaluations;
        let chosen = split(&result.best, scheme)[0];
        carried = evaluate_window(lagoon, scheme, tide, k, &[chosen], carried)?.1;
        committed.push(chosen);
    }
    Ok((HeadSchedule::per_half_tide(committed), evaluations))
}

/// Look-ahead search over the current and next half-tide by basin hopping.
/// Each search starts from the single-window grid optimum, repeated for the
/// next half-tide.
fn optimize_basin(
    lagoon: &Lagoon,
    scheme: SchemeKind,
    tide: &SegmentedTide,
    cfg: &BaselineConfig,
) -> Result<(HeadSchedule, usize)> {
    let n = tide.half_tides();
    let one = cfg.space.bounds(scheme);
    let mut carried = CarriedState::initial(lagoon);
    let mut committed: Vec<HeadTriple> = Vec::with_capacity(n);
    let mut evaluations = 0;
    for k in 0..n {
        let warm = grid_search(&cfg.space.grid(scheme, 1), |x| {
            evaluate_window(lagoon, scheme, tide, k, &[scheme.triple(x)], carried).map_or(f64::NAN, |(e, _)| e)
        });
        evaluations += warm.evaluations;

        let windows = if k + 1 < n { 2 } else { 1 };
        let bounds: Vec<(f64, f64)> = (0..windows).flat_map(|_| one.iter().copied()).collect();
        let x0: Vec<f64> = (0..windows).flat_map(|_| warm.best.iter().copied()).collect();
        let objective = |x: &[f64]| {
            // Negative energy in MWh keeps the Metropolis scale sensible.
            evaluate_window(lagoon, scheme, tide, k, &split(x, scheme), carried).map_or(f64::NAN, |(e, _)| -e / 1e6)
        };
        let opts = BasinOptions { seed: cfg.seed.wrapping_add(k as u64), ..cfg.basin };
        let result = basin_hopping(&objective, &x0, &bounds, &opts);
        evaluations += result.evaluations;
        let chosen = split(&result.x, scheme)[0];
        carried = evaluate_window(lagoon, scheme, tide, k, &[chosen], carried)?.1;
        committed.push(chosen);
    }
    Ok((HeadSchedule::per_half_tide(committed), evaluations))
}
