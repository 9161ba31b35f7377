use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::local::{clip, nelder_mead, LocalOptions, LocalResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasinOptions {
    /// Local minimizations performed, the first one from `x0` included.
    pub iterations: usize,
    /// Half-width of the uniform perturbation per coordinate.
    pub step_scale: f64,
    /// Metropolis temperature as a fraction of the best |value| seen so far.
    pub temperature_fraction: f64,
    pub seed: u64,
    pub local: LocalOptions,
}

impl Default for BasinOptions {
    fn default() -> Self {
        Self { iterations: 50, step_scale: 0.5, temperature_fraction: 0.01, seed: 0, local: LocalOptions::default() }
    }
}

/// Basin hopping: perturb, descend locally, accept by the Metropolis rule.
/// Minimizes `objective` and returns the best point ever visited.
pub fn basin_hopping<F>(objective: &F, x0: &[f64], bounds: &[(f64, f64)], opts: &BasinOptions) -> LocalResult
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut current = nelder_mead(objective, x0, bounds, &opts.local);
    let mut evaluations = current.evaluations;
    let mut best = current.clone();

    for _ in 1..opts.iterations.max(1) {
        let mut trial_start: Vec<f64> = current
            .x
            .iter()
            .map(|v| if opts.step_scale > 0.0 { v + rng.random_range(-opts.step_scale..opts.step_scale) } else { *v })
            .collect();
        clip(&mut trial_start, bounds);
        let trial = nelder_mead(objective, &trial_start, bounds, &opts.local);
        evaluations += trial.evaluations;

        let temperature = opts.temperature_fraction * best.value.abs();
        let accept = trial.value <= current.value
            || (temperature > 0.0 && rng.random::<f64>() < (-(trial.value - current.value) / temperature).exp());
        if trial.value < best.value {
            best = trial.clone();
        }
        if accept {
            current = trial;
        }
    }
    best.evaluations = evaluations;
    best
}
