use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use tidal_core::lagoon::{Lagoon, RunSummary, SimConfig};
use tidal_core::optimizers::{run_baseline, BaselineConfig, BaselineKind};
use tidal_core::tides::read_tide_csv;

use crate::common::{load_config, stem, usage, with_provenance, write_json, Provenance, TOOL_VERSION};

/// Optimize a head-schedule baseline on a prediction and apply it to the measured tide.
///
/// Baselines: CH and CHV (one constant triple for the whole series), EHT and
/// EHTV (a triple per half-tide, greedy), EHN (per half-tide with one
/// half-tide of look-ahead, grid search) and EHNV (look-ahead, basin
/// hopping). Without --pred the measured series is also the prediction.
#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// CH, CHV, EHT, EHTV, EHN or EHNV
    #[arg(long, value_parser = parse_kind)]
    baseline: BaselineKind,
    /// Measured tide CSV the schedule is applied to
    #[arg(long)]
    measured: PathBuf,
    /// Predicted tide CSV the heads are optimized on [default: --measured]
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Key-value config file (sim keys plus search.*, basin.*, segment.smooth_window_s, baseline.seed)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Optimization report JSON
    #[arg(long)]
    report: PathBuf,
    /// Schedule JSON, accepted by `simulate --schedule`
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Run summary JSON for `compare`
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Label stored in the summary [default: measured file stem]
    #[arg(long)]
    label: Option<String>,
}

fn parse_kind(s: &str) -> Result<BaselineKind, String> {
    s.parse().map_err(|e: tidal_core::Error| e.to_string())
}

pub fn run(a: OptimizeArgs, seed: Option<u64>) -> Result<()> {
    let mut kv = load_config(a.config.as_deref())?;
    if let Some(s) = seed {
        kv.set("baseline.seed", s);
    }
    let sim = SimConfig::from_config(&mut kv)?;
    let cfg = BaselineConfig::from_config(&mut kv)?;
    kv.finish()?;
    let lagoon = Lagoon::new(sim)?;
    let measured = read_tide_csv(&a.measured)?;
    let prediction = match &a.pred {
        Some(p) => read_tide_csv(p)?,
        None => measured.clone(),
    };
    if prediction.dt_s != measured.dt_s {
        return Err(usage(format!(
            "prediction interval {} s differs from measured interval {} s",
            prediction.dt_s, measured.dt_s
        )));
    }
    kv.set("optimize.baseline", a.baseline);
    kv.set("optimize.perfect_forecast", a.pred.is_none());
    let prov = Provenance::from_config(&kv, Some(cfg.seed));

    let report = run_baseline(a.baseline, &lagoon, &prediction, &measured, &cfg)?;
    log::info!(
        "{}: predicted {:.6} GWh, applied {:.6} GWh, {} evaluations, {:.1} s",
        report.kind,
        report.predicted_energy_gwh,
        report.applied_energy_gwh,
        report.evaluations,
        report.wall_time_s
    );
    write_json(&a.report, &with_provenance(&report, &prov)?)?;
    if let Some(p) = &a.schedule {
        write_json(p, &report.schedule)?;
    }
    if let Some(p) = &a.summary {
        let track_len = lagoon.track(&measured)?.len();
        let summary = RunSummary {
            method: report.kind.to_string(),
            label: a.label.clone().unwrap_or_else(|| stem(&a.measured)),
            total_energy_gwh: report.applied_energy_gwh,
            capacity_factor: lagoon.capacity_factor(report.applied_energy_gwh * 1e9, track_len),
            steps: track_len,
            config_hash: prov.config_hash.clone(),
            seed: Some(cfg.seed),
            tool_version: TOOL_VERSION.into(),
        };
        write_json(p, &summary)?;
    }
    Ok(())
}
