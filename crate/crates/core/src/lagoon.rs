//! 0D lagoon model: the lagoon level changes by the net structure flow over
//! the wetted area, integrated with a fixed 60 s backward-difference step.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::hydraulics::{orifice_flow, power_from_flow, turbine_flow_power, Hydraulics, RampState};
use crate::tides::{QualityFlag, TideSeries};

/// Lagoon wetted area as a piecewise-linear function of level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaProfile {
    breakpoints: Vec<(f64, f64)>,
}

impl AreaProfile {
    pub const SWANSEA_PLACEHOLDER_M2: f64 = 11.5e6;

    pub fn constant(area_m2: f64) -> Self {
        Self { breakpoints: vec![(0.0, area_m2)] }
    }

    /// `(level_m, area_m2)` pairs with strictly increasing levels.
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::Config("area profile needs at least one breakpoint".into()));
        }
        if breakpoints.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Config("area profile levels must be strictly increasing".into()));
        }
        if breakpoints.iter().any(|(l, a)| !l.is_finite() || !(*a > 0.0) || !a.is_finite()) {
            return Err(Error::Config("area profile areas must be positive and finite".into()));
        }
        Ok(Self { breakpoints })
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    /// Linear between breakpoints, constant beyond the ends.
    pub fn area_at(&self, level_m: f64) -> f64 {
        let bp = &self.breakpoints;
        if level_m <= bp[0].0 {
            return bp[0].1;
        }
        let last = bp[bp.len() - 1];
        if level_m >= last.0 {
            return last.1;
        }
        let upper = bp.partition_point(|(l, _)| *l <= level_m);
        let (l0, a0) = bp[upper - 1];
        let (l1, a1) = bp[upper];
        a0 + (a1 - a0) * (level_m - l0) / (l1 - l0)
    }
}

impl Default for AreaProfile {
    fn default() -> Self {
        Self::constant(Self::SWANSEA_PLACEHOLDER_M2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurbineMode {
    Off,
    Idle,
    Generate,
}

impl TurbineMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TurbineMode::Off => "off",
            TurbineMode::Idle => "idle",
            TurbineMode::Generate => "generate",
        }
    }
}

/// What the operator asks of the structures for one physics step. Turbine
/// modes apply to every unit at once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureCommand {
    pub turbine_mode: TurbineMode,
    /// Open fraction of the sluice area; 0 means offline.
    pub sluice_fraction: f64,
}

impl StructureCommand {
    pub const HOLD: StructureCommand = StructureCommand { turbine_mode: TurbineMode::Off, sluice_fraction: 0.0 };

    pub fn new(turbine_mode: TurbineMode, sluice_fraction: f64) -> Self {
        Self { turbine_mode, sluice_fraction: sluice_fraction.clamp(0.0, 1.0) }
    }
}

impl Default for StructureCommand {
    fn default() -> Self {
        Self::HOLD
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagoonState {
    pub t_s: f64,
    pub level_m: f64,
    pub turbine_ramp: RampState,
    pub sluice_ramp: RampState,
    pub mode: StructureCommand,
}

impl LagoonState {
    /// Lagoon at `level_m` with both structure groups at rest.
    pub fn at_rest(level_m: f64, zeta: f64) -> Self {
        Self {
            t_s: 0.0,
            level_m,
            turbine_ramp: RampState::new(zeta),
            sluice_ramp: RampState::new(zeta),
            mode: StructureCommand::HOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t_s: f64,
    pub ocean_m: f64,
    /// Lagoon level at the start of the step.
    pub lagoon_m: f64,
    pub turbine_flow_m3s: f64,
    pub sluice_flow_m3s: f64,
    pub power_w: f64,
    pub mode: StructureCommand,
}

/// What a controller may look at before choosing the command for a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantView {
    pub step: usize,
    pub t_s: f64,
    pub ocean_m: f64,
    pub lagoon_m: f64,
    /// Command in force during the previous step.
    pub mode: StructureCommand,
}

impl PlantView {
    pub fn head_m(&self) -> f64 {
        self.ocean_m - self.lagoon_m
    }
}

pub trait Controller {
    fn command(&mut self, view: &PlantView) -> StructureCommand;
}

impl<F> Controller for F
where
    F: FnMut(&PlantView) -> StructureCommand,
{
    fn command(&mut self, view: &PlantView) -> StructureCommand {
        self(view)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub hydraulics: Hydraulics,
    pub area: AreaProfile,
    pub zeta: f64,
    pub dt_s: f64,
    /// Installed capacity used for capacity factors only.
    pub capacity_mw: f64,
    /// Longest run of missing tide samples bridged by interpolation; `None`
    /// allows no missing samples.
    pub max_gap_s: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            hydraulics: Hydraulics::default(),
            area: AreaProfile::default(),
            zeta: 0.4,
            dt_s: 60.0,
            capacity_mw: 320.0,
            max_gap_s: None,
        }
    }
}

impl SimConfig {
    /// Reads hydraulics keys plus `lagoon.area_m2`, `lagoon.area_profile`
    /// (`level:area, level:area, …`), `ramp.zeta`, `sim.dt_s`,
    /// `sim.capacity_mw` and `sim.max_gap_s`.
    pub fn from_config(cfg: &mut KvConfig) -> Result<Self> {
        let d = Self::default();
        let hydraulics = Hydraulics::from_config(cfg)?;
        let constant: Option<f64> = cfg.get("lagoon.area_m2")?;
        let profile: Option<Vec<String>> = cfg.get_list("lagoon.area_profile")?;
        let area = match (constant, profile) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("set either lagoon.area_m2 or lagoon.area_profile, not both".into()))
            }
            (Some(a), None) => AreaProfile::new(vec![(0.0, a)])?,
            (None, Some(points)) => AreaProfile::new(
                points
                    .iter()
                    .map(|p| {
                        let (l, a) = p
                            .split_once(':')
                            .ok_or_else(|| Error::Config(format!("area breakpoint `{p}` is not `level:area`")))?;
                        let parse = |s: &str| {
                            s.trim().parse::<f64>().map_err(|e| Error::Config(format!("area breakpoint `{p}`: {e}")))
                        };
                        Ok((parse(l)?, parse(a)?))
                    })
                    .collect::<Result<Vec<_>>>()?,
            )?,
            (None, None) => d.area,
        };
        let sim = Self {
            hydraulics,
            area,
            zeta: cfg.get_or("ramp.zeta", d.zeta)?,
            dt_s: cfg.get_or("sim.dt_s", d.dt_s)?,
            capacity_mw: cfg.get_or("sim.capacity_mw", d.capacity_mw)?,
            max_gap_s: cfg.get("sim.max_gap_s")?,
        };
        sim.validate()?;
        Ok(sim)
    }

    pub fn validate(&self) -> Result<()> {
        self.hydraulics.validate()?;
        if !(self.zeta > 0.0 && self.zeta <= 1.0) {
            return Err(Error::Config(format!("ramp.zeta must lie in (0, 1], got {}", self.zeta)));
        }
        if !(self.dt_s > 0.0) {
            return Err(Error::Config(format!("sim.dt_s must be positive, got {}", self.dt_s)));
        }
        if !(self.capacity_mw > 0.0) {
            return Err(Error::Config("sim.capacity_mw must be positive".into()));
        }
        Ok(())
    }
}

/// Ocean levels resampled onto the physics grid `t_k = k · dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct OceanTrack {
    pub dt_s: f64,
    pub levels_m: Vec<f64>,
}

impl OceanTrack {
    /// Linear interpolation between good samples. Runs of bad samples longer
    /// than `max_gap_s` (default: none allowed) are rejected.
    pub fn from_series(series: &TideSeries, dt_s: f64, max_gap_s: Option<f64>) -> Result<Self> {
        let good: Vec<usize> = (0..series.len())
            .filter(|&i| series.quality[i] == QualityFlag::Good && series.levels_m[i].is_finite())
            .collect();
        let tolerance = max_gap_s.unwrap_or(series.dt_s);
        let first = *good.first().ok_or_else(|| Error::TideGap {
            start_s: 0.0,
            end_s: series.span_s(),
            gap_s: series.span_s(),
            tolerance_s: tolerance,
        })?;
        let last = *good.last().unwrap_or(&first);
        if first != 0 || last != series.len() - 1 {
            let (start_s, end_s) = if first != 0 { (0.0, series.time_s(first)) } else { (series.time_s(last), series.span_s()) };
            return Err(Error::TideGap { start_s, end_s, gap_s: end_s - start_s, tolerance_s: tolerance });
        }
        for pair in good.windows(2) {
            let gap = series.time_s(pair[1]) - series.time_s(pair[0]);
            if gap > tolerance + 1e-9 {
                return Err(Error::TideGap {
                    start_s: series.time_s(pair[0]),
                    end_s: series.time_s(pair[1]),
                    gap_s: gap,
                    tolerance_s: tolerance,
                });
            }
        }

        let steps = (series.span_s() / dt_s + 1e-9).floor() as usize + 1;
        let mut levels = Vec::with_capacity(steps);
        let mut g = 0;
        for k in 0..steps {
            let t = k as f64 * dt_s;
            while g + 1 < good.len() && series.time_s(good[g + 1]) <= t {
                g += 1;
            }
            let (i0, t0) = (good[g], series.time_s(good[g]));
            let level = if t == t0 || g + 1 == good.len() {
                series.levels_m[i0]
            } else {
                let (i1, t1) = (good[g + 1], series.time_s(good[g + 1]));
                let w = (t - t0) / (t1 - t0);
                series.levels_m[i0] + w * (series.levels_m[i1] - series.levels_m[i0])
            };
            levels.push(level);
        }
        Ok(Self { dt_s, levels_m: levels })
    }

    pub fn len(&self) -> usize {
        self.levels_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels_m.is_empty()
    }

    /// Physics step index of a time on the source series.
    pub fn step_at(&self, t_s: f64) -> usize {
        ((t_s / self.dt_s).round() as usize).min(self.len())
    }
}

/// Result of driving the lagoon over a span of the physics grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<StepRecord>,
    pub total_energy_wh: f64,
    pub final_state: LagoonState,
}

/// The lagoon simulator. Cheap to clone; holds configuration only.
#[derive(Debug, Clone, PartialEq)]
pub struct Lagoon {
    cfg: SimConfig,
}

impl Lagoon {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn dt_s(&self) -> f64 {
        self.cfg.dt_s
    }

    /// Lagoon at mean sea level with structures at rest.
    pub fn initial_state(&self) -> LagoonState {
        LagoonState::at_rest(0.0, self.cfg.zeta)
    }

    /// Advances `state` by one physics step under `cmd` and returns what happened during it.
    pub fn step(&self, state: &mut LagoonState, ocean_m: f64, cmd: StructureCommand) -> Result<StepRecord> {
        if !ocean_m.is_finite() {
            return Err(Error::NonFinite { what: "ocean level", t_s: state.t_s });
        }
        let h = &self.cfg.hydraulics;
        let count = h.turbine.count as f64;
        let head = ocean_m - state.level_m;

        let (turbine_target, hill_efficiency) = match cmd.turbine_mode {
            TurbineMode::Generate => match turbine_flow_power(&h.turbine, &h.chart, &h.efficiency, head) {
                Ok(point) => (point.flow_m3s * count, Some(point.efficiency)),
                Err(Error::TurbineGated { .. }) => (0.0, None),
                Err(e) => return Err(e),
            },
            TurbineMode::Idle => (count * orifice_flow(h.turbine.idle_area_m2(), h.turbine.idle_cd, head), None),
            TurbineMode::Off => (0.0, None),
        };
        let sluice_target = orifice_flow(h.sluice.area_m2 * cmd.sluice_fraction, h.sluice.cd, head);

        let turbine_flow = state.turbine_ramp.step(turbine_target);
        let sluice_flow = state.sluice_ramp.step(sluice_target);
        let power = match hill_efficiency {
            Some(ef) => power_from_flow(turbine_flow, head, ef, &h.efficiency, h.turbine.power_cap_w.map(|c| c * count)),
            None => 0.0,
        };

        let record = StepRecord {
            t_s: state.t_s,
            ocean_m,
            lagoon_m: state.level_m,
            turbine_flow_m3s: turbine_flow,
            sluice_flow_m3s: sluice_flow,
            power_w: power,
            mode: cmd,
        };
        let area = self.cfg.area.area_at(state.level_m);
        state.level_m += (turbine_flow + sluice_flow) / area * self.cfg.dt_s;
        state.t_s += self.cfg.dt_s;
        state.mode = cmd;
        Ok(record)
    }

    /// Drives steps `range` of `track` from `state`, handing each record to
    /// `sink`. Returns the energy produced in Wh.
    pub fn simulate<C, S>(
        &self,
        track: &OceanTrack,
        range: std::ops::Range<usize>,
        state: &mut LagoonState,
        controller: &mut C,
        mut sink: S,
    ) -> Result<f64>
    where
        C: Controller + ?Sized,
        S: FnMut(&StepRecord),
    {
        let mut energy_wh = 0.0;
        let dt_h = self.cfg.dt_s / 3600.0;
        for step in range {
            let ocean_m = track.levels_m[step];
            let view = PlantView { step, t_s: state.t_s, ocean_m, lagoon_m: state.level_m, mode: state.mode };
            let cmd = controller.command(&view);
            let record = self.step(state, ocean_m, cmd)?;
            energy_wh += record.power_w * dt_h;
            sink(&record);
        }
        Ok(energy_wh)
    }

    /// Runs a whole tide from the lagoon at mean sea level.
    pub fn run<C>(&self, tide: &TideSeries, controller: &mut C) -> Result<RunOutput>
    where
        C: Controller + ?Sized,
    {
        let track = self.track(tide)?;
        self.run_track(&track, controller)
    }

    pub fn run_track<C>(&self, track: &OceanTrack, controller: &mut C) -> Result<RunOutput>
    where
        C: Controller + ?Sized,
    {
        let mut state = self.initial_state();
        let mut records = Vec::with_capacity(track.len());
        let total_energy_wh = self.simulate(track, 0..track.len(), &mut state, controller, |r| records.push(*r))?;
        Ok(RunOutput { records, total_energy_wh, final_state: state })
    }

    pub fn track(&self, tide: &TideSeries) -> Result<OceanTrack> {
        OceanTrack::from_series(tide, self.cfg.dt_s, self.cfg.max_gap_s)
    }

    pub fn capacity_factor(&self, energy_wh: f64, steps: usize) -> f64 {
        let hours = steps as f64 * self.cfg.dt_s / 3600.0;
        if hours == 0.0 {
            0.0
        } else {
            energy_wh / (self.cfg.capacity_mw * 1e6 * hours)
        }
    }
}

pub const RECORD_COLUMNS: [&str; 8] = [
    "t_s",
    "ocean_m",
    "lagoon_m",
    "turbine_flow_m3s",
    "sluice_flow_m3s",
    "power_w",
    "turbine_mode",
    "sluice_fraction",
];

/// Writes records as CSV, preceded by `# key: value` provenance lines.
pub fn write_records_csv<W: Write>(records: &[StepRecord], mut out: W, provenance: &[(&str, String)]) -> Result<()> {
    let io = |e| Error::io("writing run records", e);
    for (k, v) in provenance {
        writeln!(out, "# {k}: {v}").map_err(io)?;
    }
    writeln!(out, "{}", RECORD_COLUMNS.join(",")).map_err(io)?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.t_s,
            r.ocean_m,
            r.lagoon_m,
            r.turbine_flow_m3s,
            r.sluice_flow_m3s,
            r.power_w,
            r.mode.turbine_mode.as_str(),
            r.mode.sluice_fraction
        )
        .map_err(io)?;
    }
    Ok(())
}

/// JSON summary emitted next to every run CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: String,
    pub label: String,
    pub total_energy_gwh: f64,
    pub capacity_factor: f64,
    pub steps: usize,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub tool_version: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tides::{default_epoch, random_phases, swansea_constituents, synthesize};
    use approx::assert_relative_eq;

    fn lagoon() -> Lagoon {
        Lagoon::new(SimConfig::default()).unwrap()
    }

    #[test]
    fn area_profile_interpolates_and_extrapolates() {
        let p = AreaProfile::new(vec![(-2.0, 10e6), (0.0, 11e6), (2.0, 12e6)]).unwrap();
        assert_eq!(p.area_at(-5.0), 10e6);
        assert_eq!(p.area_at(5.0), 12e6);
        assert_relative_eq!(p.area_at(1.0), 11.5e6);
        assert_relative_eq!(p.area_at(-1.5), 10.25e6);
        assert!(AreaProfile::new(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(AreaProfile::new(vec![(0.0, -1.0)]).is_err());
    }

    #[test]
    fn level_update_matches_hand_value() {
        // Q_T = +5000 m³/s with ramps already settled.
        let lagoon = lagoon();
        let mut state = lagoon.initial_state();
        state.sluice_ramp.flow_m3s = 5000.0;
        let head = 5000.0 / 800.0 / (2.0 * crate::hydraulics::GRAVITY).sqrt();
        let target_head = head * head;
        lagoon.step(&mut state, target_head, StructureCommand::new(TurbineMode::Off, 1.0)).unwrap();
        assert_relative_eq!(state.level_m, 0.026087, max_relative = 1e-5);
    }

    #[test]
    fn holding_keeps_level_constant() {
        let lagoon = lagoon();
        let mut state = lagoon.initial_state();
        state.level_m = 1.5;
        for k in 0..100 {
            let r = lagoon.step(&mut state, 3.0 * (k as f64 * 0.01).sin(), StructureCommand::HOLD).unwrap();
            assert_eq!(r.power_w, 0.0);
        }
        assert_eq!(state.level_m, 1.5);
    }

    #[test]
    fn zero_head_idle_has_no_flow() {
        let lagoon = lagoon();
        let mut state = lagoon.initial_state();
        let r = lagoon.step(&mut state, 0.0, StructureCommand::new(TurbineMode::Idle, 1.0)).unwrap();
        assert_eq!((r.turbine_flow_m3s, r.sluice_flow_m3s), (0.0, 0.0));
        assert_eq!(state.level_m, 0.0);
    }

    #[test]
    fn generate_below_minimum_head_is_gated() {
        let lagoon = lagoon();
        let mut state = lagoon.initial_state();
        let r = lagoon.step(&mut state, 0.8, StructureCommand::new(TurbineMode::Generate, 0.0)).unwrap();
        assert_eq!(r.power_w, 0.0);
        assert_eq!(r.turbine_flow_m3s, 0.0);
    }

    #[test]
    fn generating_power_follows_ramped_flow() {
        let lagoon = lagoon();
        let mut state = lagoon.initial_state();
        state.level_m = 4.0;
        let r = lagoon.step(&mut state, 0.0, StructureCommand::new(TurbineMode::Generate, 0.0)).unwrap();
        // One ramp step closes 40 % of the gap to 16 units at 4 m.
        assert_relative_eq!(r.turbine_flow_m3s, -0.4 * 16.0 * 468.8124, max_relative = 1e-5);
        assert_relative_eq!(r.power_w, 0.4 * 16.0 * 12.8406e6, max_relative = 1e-4);
    }

    #[test]
    fn non_finite_ocean_is_an_error() {
        let lagoon = lagoon();
        let mut state = lagoon.initial_state();
        assert!(matches!(
            lagoon.step(&mut state, f64::NAN, StructureCommand::HOLD),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn constant_ocean_yields_no_energy() {
        let tide = TideSeries::from_levels(default_epoch(), 60.0, vec![0.0; 1440]);
        let out = lagoon()
            .run(&tide, &mut |_: &PlantView| StructureCommand::new(TurbineMode::Generate, 1.0))
            .unwrap();
        assert_eq!(out.total_energy_wh, 0.0);
        assert_eq!(out.records.len(), 1440);
    }

    #[test]
    fn track_interpolates_coarse_series() {
        let tide = TideSeries::from_levels(default_epoch(), 900.0, vec![0.0, 1.5, 3.0]);
        let track = OceanTrack::from_series(&tide, 60.0, None).unwrap();
        assert_eq!(track.len(), 31);
        assert_eq!(track.levels_m[15], 1.5);
        assert_relative_eq!(track.levels_m[5], 0.5);
        assert_eq!(track.levels_m[30], 3.0);
    }

    #[test]
    fn gaps_beyond_tolerance_rejected() {
        let mut tide = TideSeries::from_levels(default_epoch(), 900.0, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        tide.quality[2] = QualityFlag::Null;
        let err = OceanTrack::from_series(&tide, 60.0, None).unwrap_err();
        assert!(matches!(err, Error::TideGap { start_s, end_s, .. } if start_s == 900.0 && end_s == 2700.0));
        let ok = OceanTrack::from_series(&tide, 60.0, Some(1800.0)).unwrap();
        assert_relative_eq!(ok.levels_m[30], 2.0);
        tide.quality[0] = QualityFlag::Improbable;
        assert!(OceanTrack::from_series(&tide, 60.0, Some(1800.0)).is_err());
    }

    #[test]
    fn records_csv_has_exact_columns() {
        let tide = synthesize(&swansea_constituents(Some(random_phases(1))), 3600.0, 60.0);
        let out = lagoon().run(&tide, &mut |_: &PlantView| StructureCommand::HOLD).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&out.records, &mut buf, &[("seed", "1".into())]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# seed: 1"));
        assert_eq!(
            lines.next(),
            Some("t_s,ocean_m,lagoon_m,turbine_flow_m3s,sluice_flow_m3s,power_w,turbine_mode,sluice_fraction")
        );
        assert_eq!(lines.count(), 60);
    }

    #[test]
    fn config_area_profile() {
        let mut cfg = KvConfig::parse_str("lagoon.area_profile = -4:8e6, 0:11.5e6, 4:13e6\nramp.zeta = 0.5\n", "c").unwrap();
        let sim = SimConfig::from_config(&mut cfg).unwrap();
        cfg.finish().unwrap();
        assert_eq!(sim.area.breakpoints().len(), 3);
        assert_eq!(sim.zeta, 0.5);
        let mut bad = KvConfig::parse_str("ramp.zeta = 0\n", "c").unwrap();
        assert!(SimConfig::from_config(&mut bad).is_err());
    }
}
