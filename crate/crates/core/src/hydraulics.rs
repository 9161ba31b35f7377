//! Turbine and sluice hydraulics for a low-head bulb-turbine barrage.
//!
//! Heads are signed: `head = ocean − lagoon`, so a positive head drives water
//! into the lagoon (flood) and a negative head drives it out (ebb). Flows use
//! the same sign convention.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::config::KvConfig;
use crate::error::{Error, Result};

/// Seawater density (kg/m³).
pub const SEAWATER_DENSITY: f64 = 1024.0;
/// Gravitational acceleration (m/s²).
pub const GRAVITY: f64 = 9.81;

/// Physical turbine specification, shared by all units in the powerhouse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurbinePlant {
    pub diameter_m: f64,
    pub poles: u32,
    pub grid_hz: f64,
    pub count: u32,
    /// Minimum head at which a unit can generate.
    pub h_mt_m: f64,
    /// Discharge coefficient of an idling unit treated as an orifice.
    pub idle_cd: f64,
    /// Orifice area of an idling unit; `None` uses the runner swept area.
    pub idle_area_m2: Option<f64>,
    /// Optional per-unit power ceiling.
    pub power_cap_w: Option<f64>,
}

impl Default for TurbinePlant {
    fn default() -> Self {
        Self {
            diameter_m: 7.35,
            poles: 95,
            grid_hz: 50.0,
            count: 16,
            h_mt_m: 1.0,
            idle_cd: 1.36,
            idle_area_m2: None,
            power_cap_w: None,
        }
    }
}

impl TurbinePlant {
    pub fn validate(&self) -> Result<()> {
        let ok = self.diameter_m > 0.0
            && self.poles > 0
            && self.grid_hz > 0.0
            && self.h_mt_m >= 0.0
            && self.idle_cd > 0.0
            && self.idle_area_m2.map_or(true, |a| a > 0.0)
            && self.power_cap_w.map_or(true, |p| p > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid turbine plant: {self:?}")))
        }
    }

    /// Synchronous rotational speed `120 f / poles` in rpm.
    pub fn rotational_speed_rpm(&self) -> f64 {
        120.0 * self.grid_hz / self.poles as f64
    }

    pub fn swept_area_m2(&self) -> f64 {
        PI * (self.diameter_m / 2.0).powi(2)
    }

    pub fn idle_area_m2(&self) -> f64 {
        self.idle_area_m2.unwrap_or_else(|| self.swept_area_m2())
    }
}

/// Linearised maximum-power path through the hill chart: unit discharge and
/// hydraulic efficiency as functions of unit speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillChart {
    pub q11_slope: f64,
    pub q11_intercept: f64,
    pub q11_cap: f64,
    pub n11_cap_threshold: f64,
    pub ef_slope: f64,
    pub ef_intercept: f64,
    pub ef_clamp: bool,
}

impl Default for HillChart {
    fn default() -> Self {
        Self {
            q11_slope: 0.0166,
            q11_intercept: 0.4861,
            q11_cap: 4.75,
            n11_cap_threshold: 255.0,
            ef_slope: -0.0019,
            ef_intercept: 1.2461,
            ef_clamp: true,
        }
    }
}

impl HillChart {
    /// Piecewise unit discharge. The two branches do not meet at the threshold
    /// (4.719 below, 4.75 above) and are kept that way.
    pub fn unit_discharge(&self, n11: f64) -> f64 {
        if n11 <= self.n11_cap_threshold {
            self.q11_slope * n11 + self.q11_intercept
        } else {
            self.q11_cap
        }
    }

    pub fn efficiency(&self, n11: f64) -> f64 {
        let ef = self.ef_slope * n11 + self.ef_intercept;
        if self.ef_clamp {
            ef.clamp(0.0, 1.0)
        } else {
            ef
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q11_cap > 0.0 && self.n11_cap_threshold > 0.0 && self.q11_intercept > 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid hill chart: {self:?}")))
        }
    }
}

/// Electro-mechanical efficiencies applied on top of the hill-chart efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyChain {
    pub generator: f64,
    pub transformer: f64,
    pub water_friction: f64,
    pub drivetrain: f64,
    pub availability: f64,
    /// Extra factor for flood generation (bulb orientation favours ebb).
    pub flood_orientation: f64,
}

impl Default for EfficiencyChain {
    fn default() -> Self {
        Self {
            generator: 0.97,
            transformer: 0.995,
            water_friction: 0.95,
            drivetrain: 0.972,
            availability: 0.95,
            flood_orientation: 0.90,
        }
    }
}

impl EfficiencyChain {
    /// `C_E`, the product of the five direction-independent factors.
    pub fn combined(&self) -> f64 {
        self.generator * self.transformer * self.water_friction * self.drivetrain * self.availability
    }

    /// Combined factor for a signed head; the orientation penalty applies to flood only.
    pub fn for_head(&self, head_m: f64) -> f64 {
        if head_m > 0.0 {
            self.combined() * self.flood_orientation
        } else {
            self.combined()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fractions = [
            self.generator,
            self.transformer,
            self.water_friction,
            self.drivetrain,
            self.availability,
            self.flood_orientation,
        ];
        if fractions.iter().all(|f| *f > 0.0 && *f <= 1.0) {
            Ok(())
        } else {
            Err(Error::Config(format!("efficiencies must lie in (0, 1]: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SluiceBank {
    pub area_m2: f64,
    pub cd: f64,
}

impl Default for SluiceBank {
    fn default() -> Self {
        Self { area_m2: 800.0, cd: 1.0 }
    }
}

/// Flow state of one structure group under the momentum ramp.
///
/// `zeta` is the fraction of the gap to the target closed per physics step, so
/// after `k` steps toward a constant target the residual is `(1 − zeta)^k` of
/// the initial gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampState {
    pub zeta: f64,
    pub flow_m3s: f64,
}

impl RampState {
    pub fn new(zeta: f64) -> Self {
        Self { zeta, flow_m3s: 0.0 }
    }

    pub fn step(&mut self, target_flow_m3s: f64) -> f64 {
        self.flow_m3s = ramp_step(self.flow_m3s, target_flow_m3s, self.zeta);
        self.flow_m3s
    }
}

/// One momentum-ramp update from `current` toward `target`.
pub fn ramp_step(current: f64, target: f64, zeta: f64) -> f64 {
    target - (1.0 - zeta) * (target - current)
}

/// Unit speed `n11 = S_p · D / √|H|`.
pub fn unit_speed(plant: &TurbinePlant, head_m: f64) -> Result<f64> {
    if head_m == 0.0 || !head_m.is_finite() {
        return Err(Error::Domain(format!("unit speed undefined at head {head_m} m")));
    }
    Ok(plant.rotational_speed_rpm() * plant.diameter_m / head_m.abs().sqrt())
}

/// Operating point of a single generating unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurbinePoint {
    pub n11: f64,
    pub q11: f64,
    pub efficiency: f64,
    /// Signed flow through one unit.
    pub flow_m3s: f64,
    /// Electrical power of one unit.
    pub power_w: f64,
}

/// Flow and power of one generating unit at `head_m`.
///
/// Fails with [`Error::TurbineGated`] below the minimum generating head.
pub fn turbine_flow_power(
    plant: &TurbinePlant,
    chart: &HillChart,
    eff: &EfficiencyChain,
    head_m: f64,
) -> Result<TurbinePoint> {
    let abs_head = head_m.abs();
    if abs_head < plant.h_mt_m || abs_head == 0.0 {
        return Err(Error::TurbineGated { head_m, h_mt_m: plant.h_mt_m });
    }
    let n11 = unit_speed(plant, head_m)?;
    let q11 = chart.unit_discharge(n11);
    let efficiency = chart.efficiency(n11);
    let flow = q11 * plant.diameter_m.powi(2) * abs_head.sqrt();
    let power = power_from_flow(flow, head_m, efficiency, eff, plant.power_cap_w);
    Ok(TurbinePoint { n11, q11, efficiency, flow_m3s: flow.copysign(head_m), power_w: power })
}

/// `P = ρ g |Q| |H| Ef C_E` (orientation factor on flood), optionally capped.
pub fn power_from_flow(
    flow_m3s: f64,
    head_m: f64,
    hill_efficiency: f64,
    eff: &EfficiencyChain,
    cap_w: Option<f64>,
) -> f64 {
    let p = SEAWATER_DENSITY * GRAVITY * flow_m3s.abs() * head_m.abs() * hill_efficiency * eff.for_head(head_m);
    match cap_w {
        Some(cap) => p.min(cap),
        None => p,
    }
}

/// Orifice discharge `cd · A · √(2 g |H|)`, signed with the head.
pub fn orifice_flow(area_m2: f64, cd: f64, head_m: f64) -> f64 {
    if head_m == 0.0 {
        return 0.0;
    }
    (cd * area_m2 * (2.0 * GRAVITY * head_m.abs()).sqrt()).copysign(head_m)
}

/// The full set of hydraulic parameters of the barrage.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Hydraulics {
    pub turbine: TurbinePlant,
    pub chart: HillChart,
    pub efficiency: EfficiencyChain,
    pub sluice: SluiceBank,
}

impl Hydraulics {
    pub fn validate(&self) -> Result<()> {
        self.turbine.validate()?;
        self.chart.validate()?;
        self.efficiency.validate()?;
        if self.sluice.area_m2 > 0.0 && self.sluice.cd > 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid sluice bank: {:?}", self.sluice)))
        }
    }

    /// Reads `turbine.*`, `chart.*`, `efficiency.*` and `sluice.*` keys over the defaults.
    pub fn from_config(cfg: &mut KvConfig) -> Result<Self> {
        let d = Self::default();
        let turbine = TurbinePlant {
            diameter_m: cfg.get_or("turbine.diameter_m", d.turbine.diameter_m)?,
            poles: cfg.get_or("turbine.poles", d.turbine.poles)?,
            grid_hz: cfg.get_or("turbine.grid_hz", d.turbine.grid_hz)?,
            count: cfg.get_or("turbine.count", d.turbine.count)?,
            h_mt_m: cfg.get_or("turbine.h_mt_m", d.turbine.h_mt_m)?,
            idle_cd: cfg.get_or("turbine.idle_cd", d.turbine.idle_cd)?,
            idle_area_m2: cfg.get("turbine.idle_area_m2")?,
            power_cap_w: cfg.get::<f64>("turbine.power_cap_mw")?.map(|mw| mw * 1e6),
        };
        let chart = HillChart {
            q11_slope: cfg.get_or("chart.q11_slope", d.chart.q11_slope)?,
            q11_intercept: cfg.get_or("chart.q11_intercept", d.chart.q11_intercept)?,
            q11_cap: cfg.get_or("chart.q11_cap", d.chart.q11_cap)?,
            n11_cap_threshold: cfg.get_or("chart.n11_cap_threshold", d.chart.n11_cap_threshold)?,
            ef_slope: cfg.get_or("chart.ef_slope", d.chart.ef_slope)?,
            ef_intercept: cfg.get_or("chart.ef_intercept", d.chart.ef_intercept)?,
            ef_clamp: cfg.get_or("chart.ef_clamp", d.chart.ef_clamp)?,
        };
        let efficiency = EfficiencyChain {
            generator: cfg.get_or("efficiency.generator", d.efficiency.generator)?,
            transformer: cfg.get_or("efficiency.transformer", d.efficiency.transformer)?,
            water_friction: cfg.get_or("efficiency.water_friction", d.efficiency.water_friction)?,
            drivetrain: cfg.get_or("efficiency.drivetrain", d.efficiency.drivetrain)?,
            availability: cfg.get_or("efficiency.availability", d.efficiency.availability)?,
            flood_orientation: cfg.get_or("efficiency.flood_orientation", d.efficiency.flood_orientation)?,
        };
        let sluice = SluiceBank {
            area_m2: cfg.get_or("sluice.area_m2", d.sluice.area_m2)?,
            cd: cfg.get_or("sluice.cd", d.sluice.cd)?,
        };
        let h = Self { turbine, chart, efficiency, sluice };
        h.validate()?;
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn swansea() -> (TurbinePlant, HillChart, EfficiencyChain) {
        (TurbinePlant::default(), HillChart::default(), EfficiencyChain::default())
    }

    #[test]
    fn rotational_and_unit_speed() {
        let (plant, ..) = swansea();
        assert_relative_eq!(plant.rotational_speed_rpm(), 63.1579, max_relative = 1e-5);
        assert_relative_eq!(unit_speed(&plant, 4.0).unwrap(), 232.105, max_relative = 1e-5);
        assert_relative_eq!(unit_speed(&plant, -1.0).unwrap(), 464.211, max_relative = 1e-5);
        assert!(matches!(unit_speed(&plant, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn worked_turbine_example() {
        let (plant, chart, eff) = swansea();
        let ebb = turbine_flow_power(&plant, &chart, &eff, -4.0).unwrap();
        assert_relative_eq!(ebb.q11, 4.339, max_relative = 1e-3);
        assert_relative_eq!(ebb.flow_m3s, -468.85, max_relative = 1e-3);
        assert_relative_eq!(ebb.efficiency, 0.80510, max_relative = 1e-4);
        assert_relative_eq!(eff.combined(), 0.84666, max_relative = 1e-5);
        assert_relative_eq!(ebb.power_w, 12.84e6, max_relative = 1e-3);

        let flood = turbine_flow_power(&plant, &chart, &eff, 4.0).unwrap();
        assert_relative_eq!(flood.flow_m3s, 468.81237, max_relative = 1e-6);
        assert_relative_eq!(flood.power_w, 11.56e6, max_relative = 1e-3);
        assert_relative_eq!(flood.power_w, 0.9 * ebb.power_w, max_relative = 1e-12);
    }

    #[test]
    fn q11_jump_at_threshold_is_preserved() {
        let chart = HillChart::default();
        assert_relative_eq!(chart.unit_discharge(255.0), 0.0166 * 255.0 + 0.4861, max_relative = 1e-15);
        assert_relative_eq!(chart.unit_discharge(255.0), 4.7191, max_relative = 1e-12);
        assert_eq!(chart.unit_discharge(255.0 + 1e-9), 4.75);
        assert_eq!(chart.unit_discharge(300.0), 4.75);
    }

    #[test]
    fn efficiency_clamp() {
        let mut chart = HillChart::default();
        assert_eq!(chart.efficiency(50.0), 1.0);
        assert_eq!(chart.efficiency(1000.0), 0.0);
        chart.ef_clamp = false;
        assert!(chart.efficiency(50.0) > 1.0);
    }

    #[test]
    fn gated_below_minimum_head() {
        let (plant, chart, eff) = swansea();
        let err = turbine_flow_power(&plant, &chart, &eff, 0.99).unwrap_err();
        assert!(matches!(err, Error::TurbineGated { .. }));
        assert!(turbine_flow_power(&plant, &chart, &eff, 1.0).is_ok());
    }

    #[test]
    fn power_cap_applies() {
        let (mut plant, chart, eff) = swansea();
        plant.power_cap_w = Some(10e6);
        let p = turbine_flow_power(&plant, &chart, &eff, -4.0).unwrap();
        assert_eq!(p.power_w, 10e6);
    }

    #[test]
    fn orifice_examples() {
        assert_relative_eq!(orifice_flow(800.0, 1.0, 2.0), 5011.3, max_relative = 1e-4);
        assert_eq!(orifice_flow(800.0, 1.0, 0.0), 0.0);
        assert_relative_eq!(orifice_flow(800.0, 1.0, -2.0), -5011.347, max_relative = 1e-6);
        let plant = TurbinePlant::default();
        assert_relative_eq!(plant.idle_area_m2(), 42.43, max_relative = 1e-4);
        assert_relative_eq!(orifice_flow(plant.idle_area_m2(), plant.idle_cd, 2.0), 361.5, max_relative = 1e-3);
    }

    #[test]
    fn ramp_examples() {
        let mut ramp = RampState::new(0.4);
        assert_relative_eq!(ramp.step(1000.0), 400.0, max_relative = 1e-15);
        let mut fixed = RampState { zeta: 0.4, flow_m3s: 250.0 };
        assert_eq!(fixed.step(250.0), 250.0);
        let mut r = RampState::new(0.4);
        for _ in 0..15 {
            r.step(1000.0);
        }
        assert_relative_eq!(1000.0 - r.flow_m3s, 0.470, max_relative = 1e-3);
    }

    #[test]
    fn hydraulics_config_overrides() {
        let mut cfg = KvConfig::parse_str("turbine.count = 8\nsluice.area_m2 = 400\nturbine.idle_area_m2 = 40\n", "c").unwrap();
        let h = Hydraulics::from_config(&mut cfg).unwrap();
        cfg.finish().unwrap();
        assert_eq!(h.turbine.count, 8);
        assert_eq!(h.sluice.area_m2, 400.0);
        assert_eq!(h.turbine.idle_area_m2(), 40.0);
        let mut bad = KvConfig::parse_str("efficiency.generator = 1.5\n", "c").unwrap();
        assert!(Hydraulics::from_config(&mut bad).is_err());
    }

    proptest! {
        #[test]
        fn flow_symmetric_power_flood_factor(h in 1.0f64..10.0) {
            let (plant, chart, eff) = swansea();
            let flood = turbine_flow_power(&plant, &chart, &eff, h).unwrap();
            let ebb = turbine_flow_power(&plant, &chart, &eff, -h).unwrap();
            prop_assert_eq!(flood.flow_m3s, -ebb.flow_m3s);
            prop_assert!((flood.power_w - 0.9 * ebb.power_w).abs() <= 1e-9 * ebb.power_w);
            prop_assert!(flood.power_w >= 0.0);
            prop_assert!(flood.q11 > 0.0 && flood.q11 <= chart.q11_cap);
            prop_assert!((0.0..=1.0).contains(&flood.efficiency));
        }

        #[test]
        fn power_matches_definition(h in -9.0f64..9.0) {
            prop_assume!(h.abs() >= 1.0);
            let (plant, chart, eff) = swansea();
            let p = turbine_flow_power(&plant, &chart, &eff, h).unwrap();
            let direct = SEAWATER_DENSITY * GRAVITY * p.flow_m3s.abs() * h.abs() * p.efficiency * eff.for_head(h);
            prop_assert!((p.power_w - direct).abs() <= 1e-12 * direct);
        }

        #[test]
        fn ramp_geometric_decay(start in -5000.0f64..5000.0, target in -5000.0f64..5000.0,
                                zeta in 0.05f64..1.0, k in 1usize..30) {
            let mut r = RampState { zeta, flow_m3s: start };
            for _ in 0..k {
                r.step(target);
            }
            let expected = (1.0 - zeta).powi(k as i32) * (target - start).abs();
            prop_assert!(((target - r.flow_m3s).abs() - expected).abs() <= 1e-9 * (1.0 + (target - start).abs()));
        }

        #[test]
        fn orifice_sign_and_magnitude(area in 0.0f64..2000.0, cd in 0.1f64..2.0, h in -8.0f64..8.0) {
            let q = orifice_flow(area, cd, h);
            prop_assert!(q == 0.0 || q.signum() == h.signum());
            prop_assert!((q.abs() - cd * area * (2.0 * GRAVITY * h.abs()).sqrt()).abs() <= 1e-9 * (1.0 + q.abs()));
        }
    }
}
