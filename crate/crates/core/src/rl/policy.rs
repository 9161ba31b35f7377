//! Diagonal Gaussian policy, action mapping and the hierarchical decoder.

use serde::{Deserialize, Serialize};

use crate::lagoon::{StructureCommand, TurbineMode};

/// `0.5 · ln(2π)`.
pub const HALF_LN_TAU: f64 = 0.918_938_533_204_672_8;

/// Three policy outputs in `[0, 1]`: generate node, idle node, sluice opening.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionVector(pub [f64; 3]);

impl ActionVector {
    /// Clips a raw Gaussian sample to `[-1, 1]` and maps it affinely onto `[0, 1]`.
    pub fn from_raw(raw: &[f64]) -> Self {
        ActionVector(std::array::from_fn(|j| (raw[j].clamp(-1.0, 1.0) + 1.0) / 2.0))
    }
}

/// Node 1 at or above 0.5 generates; otherwise node 2 at or above 0.5 idles;
/// otherwise turbines are off. Node 3 is the sluice opening.
pub fn decode_action(a: ActionVector) -> StructureCommand {
    let [n1, n2, n3] = a.0;
    let mode = if n1 >= 0.5 {
        TurbineMode::Generate
    } else if n2 >= 0.5 {
        TurbineMode::Idle
    } else {
        TurbineMode::Off
    };
    StructureCommand::new(mode, n3)
}

/// Log-density of `x` under a diagonal Gaussian with the given mean and log-std.
pub fn log_prob(x: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    x.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((x, m), s)| {
            let z = (x - m) / s.exp();
            -0.5 * z * z - s - HALF_LN_TAU
        })
        .sum()
}

/// Differential entropy of the diagonal Gaussian.
pub fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|s| 0.5 + HALF_LN_TAU + s).sum()
}
