use std::collections::VecDeque;
use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{clip_grad_norm, Adam};
use super::env::{EnvConfig, SynthFeed, TidalEnv, ACT_DIM, OBS_DIM};
use super::gae::{gae, whiten};
use super::loss::{ppo_loss, Batch, LossConfig};
use super::network::ActorCritic;
use super::policy::{log_prob, ActionVector};
use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::lagoon::Lagoon;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip_eps: f64,
    pub entropy_beta: f64,
    pub learning_rate: f64,
    /// Decay the learning rate linearly to zero at `max_steps`.
    pub lr_decay: bool,
    /// Decisions collected per environment per update.
    pub rollout_horizon: usize,
    pub minibatch_size: usize,
    pub epochs_per_update: usize,
    pub env_count: usize,
    /// Total decisions across all environments.
    pub max_steps: u64,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub max_grad_norm: f64,
    pub reward_scale_mwh: f64,
    pub episode_actions: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.95,
            clip_eps: 0.2,
            entropy_beta: 5e-3,
            learning_rate: 3e-4,
            lr_decay: true,
            rollout_horizon: 640,
            minibatch_size: 4096,
            epochs_per_update: 3,
            env_count: 64,
            max_steps: 80_000_000,
            seed: 0,
            hidden: vec![128, 128],
            max_grad_norm: 0.5,
            reward_scale_mwh: 50.0,
            episode_actions: 2880,
        }
    }
}

impl PpoConfig {
    /// Reads `ppo.*` keys over the defaults.
    pub fn from_config(cfg: &mut KvConfig) -> Result<Self> {
        let d = Self::default();
        let c = Self {
            gamma: cfg.get_or("ppo.gamma", d.gamma)?,
            lambda: cfg.get_or("ppo.lambda", d.lambda)?,
            clip_eps: cfg.get_or("ppo.clip_eps", d.clip_eps)?,
            entropy_beta: cfg.get_or("ppo.entropy_beta", d.entropy_beta)?,
            learning_rate: cfg.get_or("ppo.learning_rate", d.learning_rate)?,
            lr_decay: cfg.get_or("ppo.lr_decay", d.lr_decay)?,
            rollout_horizon: cfg.get_or("ppo.rollout_horizon", d.rollout_horizon)?,
            minibatch_size: cfg.get_or("ppo.minibatch_size", d.minibatch_size)?,
            epochs_per_update: cfg.get_or("ppo.epochs_per_update", d.epochs_per_update)?,
            env_count: cfg.get_or("ppo.env_count", d.env_count)?,
            max_steps: cfg.get_or("ppo.max_steps", d.max_steps as f64)? as u64,
            seed: cfg.get_or("ppo.seed", d.seed)?,
            hidden: cfg.get_list("ppo.hidden")?.unwrap_or(d.hidden),
            max_grad_norm: cfg.get_or("ppo.max_grad_norm", d.max_grad_norm)?,
            reward_scale_mwh: cfg.get_or("ppo.reward_scale_mwh", d.reward_scale_mwh)?,
            episode_actions: cfg.get_or("ppo.episode_actions", d.episode_actions)?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        let ok = unit(self.gamma)
            && unit(self.lambda)
            && self.clip_eps > 0.0
            && self.entropy_beta >= 0.0
            && self.learning_rate > 0.0
            && self.rollout_horizon > 0
            && self.minibatch_size > 0
            && self.epochs_per_update > 0
            && self.env_count > 0
            && !self.hidden.is_empty()
            && self.hidden.iter().all(|h| *h > 0)
            && self.max_grad_norm > 0.0
            && self.reward_scale_mwh > 0.0
            && self.episode_actions > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid PPO configuration: {self:?}")))
        }
    }

    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            physics_per_action: 15,
            episode_actions: Some(self.episode_actions),
            reward_scale_mwh: self.reward_scale_mwh,
        }
    }

    pub fn network(&self) -> ActorCritic {
        ActorCritic::new(OBS_DIM, self.hidden.clone(), ACT_DIM)
    }
}

/// One row of the learning-curve log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub step: u64,
    /// Mean return of the most recent completed episodes; NaN before the first completes.
    pub mean_episode_reward: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub entropy: f64,
}

pub const CURVE_COLUMNS: &str = "step,mean_episode_reward,clip_fraction,approx_kl,entropy";

pub fn write_curve_csv<W: Write>(rows: &[CurveRow], mut out: W, provenance: &[(&str, String)]) -> Result<()> {
    let io = |e| Error::io("writing learning curve", e);
    for (k, v) in provenance {
        writeln!(out, "# {k}: {v}").map_err(io)?;
    }
    writeln!(out, "{CURVE_COLUMNS}").map_err(io)?;
    for r in rows {
        let mean = if r.mean_episode_reward.is_nan() { String::new() } else { r.mean_episode_reward.to_string() };
        writeln!(out, "{},{},{},{},{}", r.step, mean, r.clip_fraction, r.approx_kl, r.entropy).map_err(io)?;
    }
    Ok(())
}

struct Worker {
    env: TidalEnv<SynthFeed>,
    obs: [f64; OBS_DIM],
    rng: ChaCha8Rng,
    episode_return: f64,
}

impl Worker {
    fn new(lagoon: &Lagoon, cfg: &EnvConfig, mut rng: ChaCha8Rng) -> Self {
        let feed = SynthFeed::from_seed(rng.next_u64(), lagoon.dt_s());
        let env = TidalEnv::new(lagoon.clone(), feed, *cfg);
        let obs = env.observation();
        Self { env, obs, rng, episode_return: 0.0 }
    }
}

/// Per-environment rollout storage.
#[derive(Default)]
struct Segment {
    obs: Vec<[f64; OBS_DIM]>,
    raw: Vec<[f64; ACT_DIM]>,
    log_probs: Vec<f64>,
    values: Vec<f64>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
}

pub struct Trainer {
    cfg: PpoConfig,
    lagoon: Lagoon,
    net: ActorCritic,
    params: Vec<f64>,
    adam: Adam,
    workers: Vec<Worker>,
    rng: ChaCha8Rng,
    steps: u64,
    recent: VecDeque<f64>,
}

impl Trainer {
    pub fn new(cfg: PpoConfig, lagoon: Lagoon) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let net = cfg.network();
        let params = net.init_params(&mut rng);
        let env_cfg = cfg.env_config();
        // Each environment gets an independent stream derived from the master seed.
        let workers = (0..cfg.env_count)
            .map(|i| {
                let mut stream = ChaCha8Rng::seed_from_u64(cfg.seed);
                stream.set_stream(i as u64 + 1);
                Worker::new(&lagoon, &env_cfg, stream)
            })
            .collect();
        Ok(Self { adam: Adam::new(net.param_count()), cfg, lagoon, net, params, workers, rng, steps: 0, recent: VecDeque::new() })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn network(&self) -> &ActorCritic {
        &self.net
    }

    pub fn config(&self) -> &PpoConfig {
        &self.cfg
    }

    pub fn is_done(&self) -> bool {
        self.steps >= self.cfg.max_steps
    }

    /// Collects one rollout from every environment and performs the PPO update.
    pub fn update(&mut self) -> Result<CurveRow> {
        let horizon = self.cfg.rollout_horizon;
        let n_env = self.workers.len();
        let mut segments: Vec<Segment> = (0..n_env).map(|_| Segment::default()).collect();

        for _ in 0..horizon {
            let obs = Array2::from_shape_fn((n_env, OBS_DIM), |(i, j)| self.workers[i].obs[j]);
            let out = self.net.forward(&self.params, &obs.view());
            if out.mean.iter().chain(out.value.iter()).any(|v| !v.is_finite()) {
                return Err(Error::Divergence("non-finite network output during rollout".into()));
            }
            let log_std = self.net.log_std(&self.params).to_vec();
            let lagoon_steps: Vec<Result<(usize, [f64; ACT_DIM], f64, f64, f64, bool)>> = self
                .workers
                .par_iter_mut()
                .enumerate()
                .map(|(i, w)| {
                    let mean = out.mean.row(i);
                    let raw: [f64; ACT_DIM] = std::array::from_fn(|j| {
                        let z: f64 = StandardNormal.sample(&mut w.rng);
                        mean[j] + log_std[j].exp() * z
                    });
                    let lp = log_prob(&raw, mean.as_slice().expect("contiguous"), &log_std);
                    let t = w.env.step(ActionVector::from_raw(&raw))?;
                    w.episode_return += t.reward;
                    w.obs = t.obs;
                    Ok((i, raw, lp, out.value[i], t.reward, t.done))
                })
                .collect();
            for r in lagoon_steps {
                let (i, raw, lp, value, reward, done) = r?;
                let seg = &mut segments[i];
                seg.obs.push(obs.row(i).as_slice().expect("contiguous").try_into().expect("obs width"));
                seg.raw.push(raw);
                seg.log_probs.push(lp);
                seg.values.push(value);
                seg.rewards.push(reward);
                seg.dones.push(done);
                if done {
                    let w = &mut self.workers[i];
                    self.recent.push_back(w.episode_return);
                    if self.recent.len() > n_env.max(10) {
                        self.recent.pop_front();
                    }
                    w.episode_return = 0.0;
                    let feed = SynthFeed::from_seed(w.rng.next_u64(), self.lagoon.dt_s());
                    w.obs = w.env.reset(feed);
                }
            }
        }
        self.steps += (horizon * n_env) as u64;

        let last_obs = Array2::from_shape_fn((n_env, OBS_DIM), |(i, j)| self.workers[i].obs[j]);
        let bootstrap = self.net.forward(&self.params, &last_obs.view()).value;
        let total = horizon * n_env;
        let mut all_obs = Array2::zeros((total, OBS_DIM));
        let mut all_raw = Array2::zeros((total, ACT_DIM));
        let (mut log_probs, mut values, mut advantages, mut returns) =
            (Vec::with_capacity(total), Vec::with_capacity(total), Vec::with_capacity(total), Vec::with_capacity(total));
        for (i, seg) in segments.iter().enumerate() {
            let (adv, ret) = gae(&seg.rewards, &seg.values, &seg.dones, bootstrap[i], self.cfg.gamma, self.cfg.lambda);
            for t in 0..horizon {
                let row = i * horizon + t;
                all_obs.row_mut(row).assign(&ndarray::ArrayView1::from(&seg.obs[t]));
                all_raw.row_mut(row).assign(&ndarray::ArrayView1::from(&seg.raw[t]));
            }
            log_probs.extend_from_slice(&seg.log_probs);
            values.extend_from_slice(&seg.values);
            advantages.extend(adv);
            returns.extend(ret);
        }
        whiten(&mut advantages);

        let progress = self.steps.min(self.cfg.max_steps) as f64 / self.cfg.max_steps.max(1) as f64;
        let lr = if self.cfg.lr_decay { self.cfg.learning_rate * (1.0 - progress).max(0.0) } else { self.cfg.learning_rate };
        let loss_cfg = LossConfig { clip_eps: self.cfg.clip_eps, entropy_beta: self.cfg.entropy_beta };
        let mb = self.cfg.minibatch_size.min(total);
        let mut order: Vec<usize> = (0..total).collect();
        let (mut clip_sum, mut kl_sum, mut ent, mut batches) = (0.0, 0.0, 0.0, 0);
        for _ in 0..self.cfg.epochs_per_update {
            order.shuffle(&mut self.rng);
            for chunk in order.chunks(mb) {
                let batch = Batch {
                    obs: all_obs.select(ndarray::Axis(0), chunk),
                    raw_actions: all_raw.select(ndarray::Axis(0), chunk),
                    old_log_probs: chunk.iter().map(|&k| log_probs[k]).collect(),
                    old_values: chunk.iter().map(|&k| values[k]).collect(),
                    advantages: chunk.iter().map(|&k| advantages[k]).collect(),
                    returns: chunk.iter().map(|&k| returns[k]).collect(),
                };
                let mut out = ppo_loss(&self.net, &self.params, &batch, &loss_cfg)?;
                clip_grad_norm(&mut out.grad, self.cfg.max_grad_norm);
                self.adam.step(&mut self.params, &out.grad, lr);
                if self.params.iter().any(|p| !p.is_finite()) {
                    return Err(Error::Divergence("non-finite parameters after update".into()));
                }
                clip_sum += out.clip_fraction;
                kl_sum += out.approx_kl;
                ent = out.entropy;
                batches += 1;
            }
        }
        let mean_episode_reward =
            if self.recent.is_empty() { f64::NAN } else { self.recent.iter().sum::<f64>() / self.recent.len() as f64 };
        Ok(CurveRow {
            step: self.steps,
            mean_episode_reward,
            clip_fraction: clip_sum / batches as f64,
            approx_kl: kl_sum / batches as f64,
            entropy: ent,
        })
    }

    /// Runs updates until `max_steps`, calling `on_update` after each one.
    pub fn train<C>(&mut self, mut on_update: C) -> Result<Vec<CurveRow>>
    where
        C: FnMut(&Trainer, &CurveRow) -> Result<()>,
    {
        let mut curve = Vec::new();
        while !self.is_done() {
            let row = self.update()?;
            on_update(self, &row)?;
            curve.push(row);
        }
        Ok(curve)
    }
}
