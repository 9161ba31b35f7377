use ndarray::{Array1, Array2};

use super::network::ActorCritic;
use super::policy::{entropy, log_prob};
use crate::error::{Error, Result};

/// Value-loss weight; fixed.
pub const VALUE_COEF: f64 = 0.5;

/// Minibatch of transitions with finalized advantages.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub obs: Array2<f64>,
    /// Pre-clip Gaussian samples.
    pub raw_actions: Array2<f64>,
    pub old_log_probs: Vec<f64>,
    pub old_values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.old_log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub clip_eps: f64,
    pub entropy_beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Fraction of samples whose ratio left `[1 − ε, 1 + ε]`.
    pub clip_fraction: f64,
    /// Estimate of KL(old ‖ new): mean of `(r − 1) − ln r`.
    pub approx_kl: f64,
    pub grad: Vec<f64>,
}

/// Per-sample clipped surrogate `min(r·Â, clip(r, 1 − ε, 1 + ε)·Â)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * advantage)
}

/// Clipped-surrogate policy loss plus clipped value loss minus the entropy
/// bonus, with its gradient with respect to every parameter.
pub fn ppo_loss(net: &ActorCritic, params: &[f64], batch: &Batch, cfg: &LossConfig) -> Result<LossOutput> {
    let n = batch.len();
    let nf = n as f64;
    let eps = cfg.clip_eps;
    let cache = net.forward(params, &batch.obs.view());
    let log_std = net.log_std(params);
    let inv_var: Vec<f64> = log_std.iter().map(|s| (-2.0 * s).exp()).collect();
    let act = net.act_dim;

    let mut d_mean = Array2::zeros((n, act));
    let mut d_value = Array1::zeros(n);
    let mut d_log_std = vec![-cfg.entropy_beta; act];
    let (mut policy_loss, mut value_loss, mut clipped, mut kl) = (0.0, 0.0, 0, 0.0);

    for i in 0..n {
        let raw = batch.raw_actions.row(i);
        let mean = cache.mean.row(i);
        let lp = log_prob(raw.as_slice().expect("contiguous"), mean.as_slice().expect("contiguous"), log_std);
        let ratio = (lp - batch.old_log_probs[i]).exp();
        let adv = batch.advantages[i];
        let unclipped = ratio * adv;
        let surrogate = clipped_surrogate(ratio, adv, eps);
        policy_loss -= surrogate / nf;
        if (ratio - 1.0).abs() > eps {
            clipped += 1;
        }
        kl += (ratio - 1.0 - ratio.ln()) / nf;
        // The clipped branch is constant in the parameters.
        if unclipped <= surrogate {
            let d_lp = -unclipped / nf;
            for j in 0..act {
                let diff = raw[j] - mean[j];
                d_mean[[i, j]] += d_lp * diff * inv_var[j];
                d_log_std[j] += d_lp * (diff * diff * inv_var[j] - 1.0);
            }
        }

        let v = cache.value[i];
        let v_old = batch.old_values[i];
        let ret = batch.returns[i];
        let delta = v - v_old;
        let v_clipped = v_old + delta.clamp(-eps, eps);
        let (e1, e2) = ((v - ret).powi(2), (v_clipped - ret).powi(2));
        value_loss += e1.max(e2) / nf;
        d_value[i] = VALUE_COEF / nf
            * if e1 >= e2 {
                2.0 * (v - ret)
            } else if delta.abs() < eps {
                2.0 * (v_clipped - ret)
            } else {
                0.0
            };
    }

    let ent = entropy(log_std);
    let loss = policy_loss + VALUE_COEF * value_loss - cfg.entropy_beta * ent;
    if !loss.is_finite() {
        return Err(Error::Divergence(format!(
            "non-finite PPO loss (policy {policy_loss}, value {value_loss}, entropy {ent}, log_std {log_std:?})"
        )));
    }
    let grad = net.backward(params, &cache, &d_mean, &d_value, &d_log_std);
    Ok(LossOutput {
        loss,
        policy_loss,
        value_loss,
        entropy: ent,
        clip_fraction: clipped as f64 / nf,
        approx_kl: kl,
        grad,
    })
}
