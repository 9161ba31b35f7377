//! Reinforcement-learning control: the lagoon MDP and a PPO trainer for a
//! shared actor-critic network.

mod adam;
mod checkpoint;
mod env;
mod gae;
mod loss;
mod network;
mod policy;
mod train;

pub use adam::{clip_grad_norm, Adam};
pub use checkpoint::{evaluate_policy, greedy_action, Checkpoint, EvalOutput, CHECKPOINT_FORMAT_VERSION};
pub use env::{
    EnvConfig, OceanFeed, SynthFeed, TidalEnv, TrackFeed, Transition, ACT_DIM, ENVELOPE_WARN, LEVEL_SCALE, OBS_DIM,
};
pub use gae::{gae, whiten};
pub use loss::{clipped_surrogate, ppo_loss, Batch, LossConfig, LossOutput, VALUE_COEF};
pub use network::{ActorCritic, ForwardCache};
pub use policy::{decode_action, entropy, log_prob, ActionVector, HALF_LN_TAU};
pub use train::{write_curve_csv, CurveRow, PpoConfig, Trainer, CURVE_COLUMNS};
