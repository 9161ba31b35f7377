//! Shared fixtures for the benchmarks.

use tidal_core::lagoon::{Lagoon, SimConfig};
use tidal_core::tides::{random_phases, swansea_constituents, synthesize, TideSeries};

/// A 31-day synthetic tide at 60 s.
pub fn month(seed: u64) -> TideSeries {
    synthesize(&swansea_constituents(Some(random_phases(seed))), 31.0 * 86400.0, 60.0)
}

pub fn lagoon() -> Lagoon {
    Lagoon::new(SimConfig::default()).expect("default configuration is valid")
}
