//! Head-threshold controllers for two-way operation.
//!
//! A scheme cycles each half-tide through Holding, Generating and Sluicing.
//! The classic scheme opens the sluices only once generation ends; the variant
//! scheme may open them during generation once the head falls to `hs_start`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagoon::{Controller, PlantView, StructureCommand, TurbineMode};

/// Default head below which the lagoon counts as level with the ocean.
pub const DEFAULT_EPSILON_M: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadTriple {
    pub h_start_m: f64,
    pub h_min_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hs_start_m: Option<f64>,
}

impl HeadTriple {
    pub fn classic(h_start_m: f64, h_min_m: f64) -> Self {
        Self { h_start_m, h_min_m, hs_start_m: None }
    }

    pub fn variant(h_start_m: f64, h_min_m: f64, hs_start_m: f64) -> Self {
        Self { h_start_m, h_min_m, hs_start_m: Some(hs_start_m) }
    }

    fn validate(&self, kind: SchemeKind) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.h_start_m) || !positive(self.h_min_m) {
            return Err(Error::Config(format!("head thresholds must be positive and finite: {self:?}")));
        }
        match (kind, self.hs_start_m) {
            (SchemeKind::Variant, Some(hs)) if positive(hs) => Ok(()),
            (SchemeKind::Variant, Some(_)) => {
                Err(Error::Config(format!("hs_start must be positive and finite: {self:?}")))
            }
            (SchemeKind::Variant, None) => Err(Error::Config("variant scheme needs hs_start on every triple".into())),
            (SchemeKind::Classic, Some(_)) => {
                Err(Error::Config("classic scheme takes (h_start, h_min) only; hs_start given".into()))
            }
            (SchemeKind::Classic, None) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Classic,
    Variant,
}

impl SchemeKind {
    /// Number of head variables per half-tide.
    pub fn arity(self) -> usize {
        match self {
            SchemeKind::Classic => 2,
            SchemeKind::Variant => 3,
        }
    }

    /// Builds a triple from the first `arity()` values of `x`.
    pub fn triple(self, x: &[f64]) -> HeadTriple {
        match self {
            SchemeKind::Classic => HeadTriple::classic(x[0], x[1]),
            SchemeKind::Variant => HeadTriple::variant(x[0], x[1], x[2]),
        }
    }
}

/// Head triple entry of a per-half-tide schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexedTriple {
    pub half_tide: usize,
    #[serde(flatten)]
    pub heads: HeadTriple,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadSchedule {
    Constant(HeadTriple),
    PerHalfTide(Vec<IndexedTriple>),
}

impl HeadSchedule {
    pub fn per_half_tide(triples: Vec<HeadTriple>) -> Self {
        HeadSchedule::PerHalfTide(
            triples.into_iter().enumerate().map(|(half_tide, heads)| IndexedTriple { half_tide, heads }).collect(),
        )
    }

    /// Triple in force during half-tide `idx`. A per-half-tide schedule shorter
    /// than the segmentation keeps its last triple.
    pub fn triple(&self, idx: usize) -> HeadTriple {
        match self {
            HeadSchedule::Constant(t) => *t,
            HeadSchedule::PerHalfTide(v) => v[idx.min(v.len() - 1)].heads,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            HeadSchedule::Constant(_) => 1,
            HeadSchedule::PerHalfTide(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn triples(&self) -> Vec<HeadTriple> {
        match self {
            HeadSchedule::Constant(t) => vec![*t],
            HeadSchedule::PerHalfTide(v) => v.iter().map(|t| t.heads).collect(),
        }
    }

    pub fn validate(&self, kind: SchemeKind) -> Result<()> {
        match self {
            HeadSchedule::Constant(t) => t.validate(kind),
            HeadSchedule::PerHalfTide(v) => {
                if v.is_empty() {
                    return Err(Error::Config("empty head schedule".into()));
                }
                for (i, t) in v.iter().enumerate() {
                    if t.half_tide != i {
                        return Err(Error::Config(format!(
                            "schedule entry {i} is labelled half-tide {}; entries must be consecutive from 0",
                            t.half_tide
                        )));
                    }
                    t.heads.validate(kind)?;
                }
                Ok(())
            }
        }
    }
}

/// A scheme plus its schedule: the JSON artifact optimizers emit and
/// `simulate` consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub scheme: SchemeKind,
    pub schedule: HeadSchedule,
}

impl SchemeSpec {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate(self.scheme)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Holding,
    Generating,
    Sluicing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeState {
    pub stage: Stage,
    pub half_tide: usize,
    /// Variant only: sluices latched open during the current generation stage.
    pub sluices_open: bool,
}

impl Default for SchemeState {
    fn default() -> Self {
        Self { stage: Stage::Holding, half_tide: 0, sluices_open: false }
    }
}

/// Threshold controller driving the lagoon from a head schedule.
#[derive(Debug, Clone)]
pub struct SchemeController {
    kind: SchemeKind,
    schedule: HeadSchedule,
    /// Physics step at which each half-tide begins, ascending; first entry 0.
    boundaries: Vec<usize>,
    epsilon_m: f64,
    state: SchemeState,
}

impl SchemeController {
    /// `boundaries` holds the physics step where each half-tide starts; an
    /// empty list treats the whole run as one half-tide.
    pub fn new(kind: SchemeKind, schedule: HeadSchedule, boundaries: Vec<usize>) -> Result<Self> {
        schedule.validate(kind)?;
        if boundaries.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("half-tide boundaries must be strictly increasing".into()));
        }
        Ok(Self { kind, schedule, boundaries, epsilon_m: DEFAULT_EPSILON_M, state: SchemeState::default() })
    }

    pub fn classic(schedule: HeadSchedule, boundaries: Vec<usize>) -> Result<Self> {
        Self::new(SchemeKind::Classic, schedule, boundaries)
    }

    pub fn variant(schedule: HeadSchedule, boundaries: Vec<usize>) -> Result<Self> {
        Self::new(SchemeKind::Variant, schedule, boundaries)
    }

    pub fn with_epsilon(mut self, epsilon_m: f64) -> Self {
        self.epsilon_m = epsilon_m;
        self
    }

    /// Resumes from a stage carried over from an earlier window.
    pub fn with_state(mut self, state: SchemeState) -> Self {
        self.state = state;
        self
    }

    pub fn state(&self) -> SchemeState {
        self.state
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    fn half_tide_at(&self, step: usize) -> usize {
        self.boundaries.partition_point(|&b| b <= step).saturating_sub(1)
    }

    /// Applies the stage rules for one step at head `head_m` and returns the command.
    pub fn decide(&mut self, step: usize, head_m: f64) -> StructureCommand {
        self.state.half_tide = self.half_tide_at(step);
        let t = self.schedule.triple(self.state.half_tide);
        let he = head_m.abs();

        // Rules fire in cycle order so one step can pass through several stages
        // when thresholds overlap; no rule can fire twice.
        if self.state.stage == Stage::Holding && he >= t.h_start_m {
            self.state.stage = Stage::Generating;
            self.state.sluices_open = false;
        }
        if self.state.stage == Stage::Generating && he <= t.h_min_m {
            self.state.stage = Stage::Sluicing;
        }
        if self.state.stage == Stage::Sluicing && he <= self.epsilon_m {
            self.state.stage = Stage::Holding;
        }

        match self.state.stage {
            Stage::Holding => StructureCommand::HOLD,
            Stage::Generating => {
                if let (SchemeKind::Variant, Some(hs)) = (self.kind, t.hs_start_m) {
                    if he <= hs {
                        self.state.sluices_open = true;
                    }
                }
                let fraction = if self.state.sluices_open { 1.0 } else { 0.0 };
                StructureCommand::new(TurbineMode::Generate, fraction)
            }
            Stage::Sluicing => StructureCommand::new(TurbineMode::Idle, 1.0),
        }
    }
}

impl Controller for SchemeController {
    fn command(&mut self, view: &PlantView) -> StructureCommand {
        self.decide(view.step, view.head_m())
    }
}
