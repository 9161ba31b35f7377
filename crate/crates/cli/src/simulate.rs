use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use tidal_core::lagoon::{write_records_csv, Lagoon, RunSummary, SimConfig};
use tidal_core::schemes::{HeadSchedule, SchemeController, SchemeKind, SchemeSpec};
use tidal_core::tides::{read_tide_csv, segment_half_tides, DEFAULT_SMOOTH_WINDOW_S};

use crate::common::{create, load_config, stem, usage, write_json, Provenance, TOOL_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    /// Two heads: h_start, h_min
    Classic,
    /// Three heads: h_start, h_min, hs_start
    Variant,
}

impl From<Scheme> for SchemeKind {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Classic => SchemeKind::Classic,
            Scheme::Variant => SchemeKind::Variant,
        }
    }
}

/// Run a head-threshold operating scheme over a tide.
///
/// Heads come either from --heads (one constant triple) or from --schedule, a
/// schedule JSON as written by `optimize --schedule`. Writes the per-step
/// records CSV and a summary JSON.
#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Tide CSV from `tide synth` or `tide ingest`
    #[arg(long)]
    tide: PathBuf,
    #[arg(long, value_enum)]
    scheme: Option<Scheme>,
    /// Comma-separated heads in metres (2 for classic, 3 for variant)
    #[arg(long, conflicts_with = "schedule")]
    heads: Option<String>,
    /// Schedule JSON (constant or per-half-tide)
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Key-value config file (lagoon, turbine, sluice, ramp and sim keys)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Records CSV
    #[arg(long, short)]
    out: PathBuf,
    /// Summary JSON
    #[arg(long)]
    summary: PathBuf,
    /// Label stored in the summary [default: tide file stem]
    #[arg(long)]
    label: Option<String>,
}

fn scheme_spec(a: &SimulateArgs) -> Result<SchemeSpec> {
    match (&a.heads, &a.schedule) {
        (Some(heads), None) => {
            let kind: SchemeKind = a.scheme.ok_or_else(|| usage("--heads needs --scheme"))?.into();
            let values = heads
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| usage(format!("--heads `{heads}`: {e}")))?;
            if values.len() != kind.arity() {
                return Err(usage(format!(
                    "{kind:?} scheme takes {} heads, got {} (`{heads}`)",
                    kind.arity(),
                    values.len()
                )));
            }
            let spec = SchemeSpec { scheme: kind, schedule: HeadSchedule::Constant(kind.triple(&values)) };
            spec.validate().map_err(|e| usage(e.to_string()))?;
            Ok(spec)
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let spec: SchemeSpec =
                serde_json::from_str(&text).with_context(|| format!("parsing schedule {}", path.display()))?;
            if let Some(s) = a.scheme {
                if SchemeKind::from(s) != spec.scheme {
                    return Err(usage(format!("--scheme {s:?} contradicts the {:?} schedule file", spec.scheme)));
                }
            }
            spec.validate()?;
            Ok(spec)
        }
        _ => Err(usage("give exactly one of --heads or --schedule")),
    }
}

pub fn run(a: SimulateArgs) -> Result<()> {
    let spec = scheme_spec(&a)?;
    let mut kv = load_config(a.config.as_deref())?;
    let sim = SimConfig::from_config(&mut kv)?;
    let smooth: f64 = kv.get_or("segment.smooth_window_s", DEFAULT_SMOOTH_WINDOW_S)?;
    kv.finish()?;
    let tide = read_tide_csv(&a.tide)?;
    let lagoon = Lagoon::new(sim)?;
    let track = lagoon.track(&tide)?;
    let boundaries =
        segment_half_tides(&tide, smooth)?.iter().map(|h| track.step_at(tide.time_s(h.start_idx))).collect();
    let mut controller = SchemeController::new(spec.scheme, spec.schedule.clone(), boundaries)?;
    let out = lagoon.run_track(&track, &mut controller)?;

    kv.set("simulate.schedule", serde_json::to_string(&spec)?);
    let prov = Provenance::from_config(&kv, None);
    let mut w = create(&a.out)?;
    write_records_csv(&out.records, &mut w, &prov.pairs())?;
    w.flush()?;
    let summary = RunSummary {
        method: match spec.scheme {
            SchemeKind::Classic => "classic".into(),
            SchemeKind::Variant => "variant".into(),
        },
        label: a.label.clone().unwrap_or_else(|| stem(&a.tide)),
        total_energy_gwh: out.total_energy_wh / 1e9,
        capacity_factor: lagoon.capacity_factor(out.total_energy_wh, out.records.len()),
        steps: out.records.len(),
        config_hash: prov.config_hash.clone(),
        seed: None,
        tool_version: TOOL_VERSION.into(),
    };
    write_json(&a.summary, &summary)?;
    log::info!("{}: {:.6} GWh over {} steps", summary.label, summary.total_energy_gwh, summary.steps);
    Ok(())
}
