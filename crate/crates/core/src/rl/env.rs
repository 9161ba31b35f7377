//! The control MDP: 15-minute decisions over the 60 s lagoon simulator.

use crate::error::Result;
use crate::lagoon::{Lagoon, LagoonState, OceanTrack, StepRecord, TurbineMode};
use crate::tides::{random_phases, swansea_constituents, Constituent};

use super::policy::{decode_action, ActionVector};

pub const OBS_DIM: usize = 10;
pub const ACT_DIM: usize = 3;
/// Levels are divided by this before entering the network.
pub const LEVEL_SCALE: f64 = 6.0;
/// Observations beyond this magnitude are outside the training envelope by more than 50 %.
pub const ENVELOPE_WARN: f64 = 1.5;

/// A forward-only stream of ocean levels, one per physics step. The
/// environment is its only reader and takes exactly one sample per step.
pub trait OceanFeed {
    fn next_level(&mut self) -> Option<f64>;
}

/// Replays a resampled tide.
#[derive(Debug, Clone)]
pub struct TrackFeed {
    levels: Vec<f64>,
    pos: usize,
}

impl TrackFeed {
    pub fn new(track: OceanTrack) -> Self {
        Self { levels: track.levels_m, pos: 0 }
    }
}

impl OceanFeed for TrackFeed {
    fn next_level(&mut self) -> Option<f64> {
        let v = self.levels.get(self.pos).copied();
        self.pos += 1;
        v
    }
}

/// Harmonic tide evaluated lazily, one physics step at a time.
#[derive(Debug, Clone)]
pub struct SynthFeed {
    constituents: Vec<Constituent>,
    dt_s: f64,
    step: u64,
}

impl SynthFeed {
    pub fn new(constituents: Vec<Constituent>, dt_s: f64) -> Self {
        Self { constituents, dt_s, step: 0 }
    }

    /// Default constituents with phases drawn from `seed`.
    pub fn from_seed(seed: u64, dt_s: f64) -> Self {
        Self::new(swansea_constituents(Some(random_phases(seed))), dt_s)
    }
}

impl OceanFeed for SynthFeed {
    fn next_level(&mut self) -> Option<f64> {
        let t = self.step as f64 * self.dt_s;
        self.step += 1;
        Some(self.constituents.iter().map(|c| c.level_at(t)).sum())
    }
}

impl<F: OceanFeed + ?Sized> OceanFeed for &mut F {
    fn next_level(&mut self) -> Option<f64> {
        (**self).next_level()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvConfig {
    pub physics_per_action: usize,
    /// Episode length in decisions; `None` runs until the feed ends.
    pub episode_actions: Option<usize>,
    /// MWh per unit reward.
    pub reward_scale_mwh: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self { physics_per_action: 15, episode_actions: Some(2880), reward_scale_mwh: 50.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub obs: [f64; OBS_DIM],
    pub reward: f64,
    pub energy_wh: f64,
    pub done: bool,
}

pub struct TidalEnv<F: OceanFeed> {
    lagoon: Lagoon,
    feed: F,
    cfg: EnvConfig,
    state: LagoonState,
    /// Ocean level at the current time; `None` once the feed is exhausted.
    ocean: Option<f64>,
    prev_block: [f64; 5],
    actions: usize,
    samples_read: usize,
    warned: bool,
}

impl<F: OceanFeed> TidalEnv<F> {
    /// Starts an episode with the lagoon at mean sea level.
    pub fn new(lagoon: Lagoon, feed: F, cfg: EnvConfig) -> Self {
        let state = lagoon.initial_state();
        let mut env =
            Self { lagoon, feed, cfg, state, ocean: None, prev_block: [0.0; 5], actions: 0, samples_read: 0, warned: false };
        env.ocean = env.read();
        env.prev_block = env.block();
        env
    }

    /// Replaces the tide and restarts from rest.
    pub fn reset(&mut self, feed: F) -> [f64; OBS_DIM] {
        self.feed = feed;
        self.state = self.lagoon.initial_state();
        self.actions = 0;
        self.samples_read = 0;
        self.ocean = self.read();
        self.prev_block = self.block();
        self.observation()
    }

    fn read(&mut self) -> Option<f64> {
        let v = self.feed.next_level();
        if v.is_some() {
            self.samples_read += 1;
        }
        v
    }

    fn block(&self) -> [f64; 5] {
        let mode = self.state.mode;
        [
            self.ocean.unwrap_or(f64::NAN) / LEVEL_SCALE,
            self.state.level_m / LEVEL_SCALE,
            if mode.turbine_mode == TurbineMode::Generate { 1.0 } else { 0.0 },
            if mode.turbine_mode == TurbineMode::Idle { 1.0 } else { 0.0 },
            mode.sluice_fraction,
        ]
    }

    /// Current block followed by the block one decision earlier.
    pub fn observation(&self) -> [f64; OBS_DIM] {
        let now = self.block();
        std::array::from_fn(|i| if i < 5 { now[i] } else { self.prev_block[i - 5] })
    }

    pub fn samples_read(&self) -> usize {
        self.samples_read
    }

    pub fn state(&self) -> &LagoonState {
        &self.state
    }

    pub fn is_exhausted(&self) -> bool {
        self.ocean.is_none()
    }

    /// Applies one decision for up to `physics_per_action` steps, feeding
    /// every physics record to `sink`.
    pub fn step_with<S: FnMut(&StepRecord)>(&mut self, action: ActionVector, mut sink: S) -> Result<Transition> {
        let cmd = decode_action(action);
        let before = self.block();
        let dt_h = self.lagoon.dt_s() / 3600.0;
        let mut energy_wh = 0.0;
        for _ in 0..self.cfg.physics_per_action {
            let Some(ocean) = self.ocean else { break };
            let record = self.lagoon.step(&mut self.state, ocean, cmd)?;
            energy_wh += record.power_w * dt_h;
            sink(&record);
            self.ocean = self.read();
        }
        self.prev_block = before;
        self.actions += 1;
        let done = self.ocean.is_none() || self.cfg.episode_actions.is_some_and(|n| self.actions >= n);
        let obs = self.observation();
        if !self.warned && obs.iter().any(|v| v.abs() > ENVELOPE_WARN) {
            self.warned = true;
            log::warn!("observation {obs:?} is outside the training envelope (|x| > {ENVELOPE_WARN})");
        }
        Ok(Transition { obs, reward: energy_wh / 1e6 / self.cfg.reward_scale_mwh, energy_wh, done })
    }

    pub fn step(&mut self, action: ActionVector) -> Result<Transition> {
        self.step_with(action, |_| {})
    }
}
