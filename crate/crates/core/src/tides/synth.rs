use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{default_epoch, TideSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constituent {
    pub name: String,
    pub amplitude_m: f64,
    pub period_hr: f64,
    pub phase_rad: f64,
}

impl Constituent {
    pub fn new(name: &str, amplitude_m: f64, period_hr: f64, phase_rad: f64) -> Self {
        Self { name: name.to_string(), amplitude_m, period_hr, phase_rad }
    }

    /// Angular frequency in rad/s.
    pub fn omega(&self) -> f64 {
        TAU / (self.period_hr * 3600.0)
    }

    pub fn level_at(&self, t_s: f64) -> f64 {
        self.amplitude_m * (self.omega() * t_s + self.phase_rad).sin()
    }
}

/// M2, S2, N2 and K1 at Swansea Bay with the given phases (zero when `None`).
pub fn swansea_constituents(phases: Option<[f64; 4]>) -> Vec<Constituent> {
    let p = phases.unwrap_or([0.0; 4]);
    vec![
        Constituent::new("M2", 3.20, 12.42, p[0]),
        Constituent::new("S2", 1.14, 12.0, p[1]),
        Constituent::new("N2", 0.61, 12.66, p[2]),
        Constituent::new("K1", 0.08, 23.93, p[3]),
    ]
}

/// Sum of sinusoids sampled at `t = 0, dt, …` for all `t < span_s`.
pub fn synthesize(constituents: &[Constituent], span_s: f64, dt_s: f64) -> TideSeries {
    let n = (span_s / dt_s).ceil() as usize;
    let levels = (0..n)
        .map(|i| {
            let t = i as f64 * dt_s;
            constituents.iter().map(|c| c.level_at(t)).sum()
        })
        .collect();
    TideSeries::from_levels(default_epoch(), dt_s, levels)
}

/// Four phase lags drawn uniformly from `[0, 2π)`, reproducible from `seed`.
pub fn random_phases(seed: u64) -> [f64; 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::array::from_fn(|_| rng.random_range(0.0..TAU))
}
