//! Baseline head optimization: grid refinement, basin hopping and the six
//! literature baselines built on them.

mod basin;
mod baseline;
mod grid;
mod local;

pub use basin::{basin_hopping, BasinOptions};
pub use baseline::{
    evaluate, evaluate_window, run_baseline, BaselineConfig, BaselineKind, CarriedState, OptimizationReport,
    SearchSpace, SegmentedTide,
};
pub use grid::{grid_search, GridResult, GridSpec};
pub use local::{nelder_mead, LocalOptions, LocalResult};
