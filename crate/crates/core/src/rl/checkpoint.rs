use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::env::{EnvConfig, OceanFeed, TidalEnv, LEVEL_SCALE, OBS_DIM};
use super::network::ActorCritic;
use super::policy::ActionVector;
use super::train::PpoConfig;
use crate::error::{Error, Result};
use crate::lagoon::{Lagoon, SimConfig, StepRecord};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Self-describing policy snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub network: ActorCritic,
    pub params: Vec<f64>,
    pub level_scale: f64,
    pub steps_trained: u64,
    pub ppo: PpoConfig,
    pub sim: SimConfig,
    pub config_hash: String,
    pub tool_version: String,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(format!("writing checkpoint {}", path.display()), e))
    }

    /// Loads a checkpoint, rejecting other format versions.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading checkpoint {}", path.display()), e))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let found = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::CheckpointVersion { found, expected: CHECKPOINT_FORMAT_VERSION });
        }
        let ckpt: Checkpoint = serde_json::from_value(value)?;
        if ckpt.params.len() != ckpt.network.param_count() || ckpt.network.obs_dim != OBS_DIM {
            return Err(Error::Config(format!(
                "checkpoint {} has {} parameters for a network needing {}",
                path.display(),
                ckpt.params.len(),
                ckpt.network.param_count()
            )));
        }
        if ckpt.level_scale != LEVEL_SCALE {
            return Err(Error::Config(format!("checkpoint level scale {} differs from {LEVEL_SCALE}", ckpt.level_scale)));
        }
        Ok(ckpt)
    }
}

/// Deterministic policy output for one observation, mapped to `[0, 1]`.
pub fn greedy_action(net: &ActorCritic, params: &[f64], obs: &[f64; OBS_DIM]) -> Result<ActionVector> {
    let x = Array2::from_shape_vec((1, OBS_DIM), obs.to_vec()).expect("one row");
    let out = net.forward(params, &x.view());
    let mean = out.mean.row(0);
    if mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence(format!("non-finite policy output for observation {obs:?}")));
    }
    Ok(ActionVector::from_raw(mean.as_slice().expect("contiguous")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutput {
    pub records: Vec<StepRecord>,
    pub total_energy_wh: f64,
    pub decisions: usize,
}

/// Drives the lagoon with the mean action until `feed` runs out.
pub fn evaluate_policy<F: OceanFeed>(
    net: &ActorCritic,
    params: &[f64],
    lagoon: &Lagoon,
    feed: F,
    reward_scale_mwh: f64,
) -> Result<EvalOutput> {
    let cfg = EnvConfig { episode_actions: None, reward_scale_mwh, ..Default::default() };
    let mut env = TidalEnv::new(lagoon.clone(), feed, cfg);
    let mut records = Vec::new();
    let mut total_energy_wh = 0.0;
    let mut decisions = 0;
    if env.is_exhausted() {
        return Ok(EvalOutput { records, total_energy_wh, decisions });
    }
    let mut obs = env.observation();
    loop {
        let action = greedy_action(net, params, &obs)?;
        let t = env.step_with(action, |r| records.push(*r))?;
        total_energy_wh += t.energy_wh;
        decisions += 1;
        obs = t.obs;
        if t.done {
            break;
        }
    }
    Ok(EvalOutput { records, total_energy_wh, decisions })
}
