use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Subcommand};
use tidal_core::config::KvConfig;
use tidal_core::tides::{
    ingest_gauge, monthly_windows, random_phases, swansea_constituents, synthesize, write_tide_csv, Constituent,
    GaugeFormat, IngestOptions,
};

use crate::common::{create, usage, Provenance};

/// Length of a synthetic "month".
pub const MONTH_DAYS: f64 = 31.0;

#[derive(Debug, Subcommand)]
pub enum TideCommand {
    /// Sum of harmonic constituents sampled every --dt seconds.
    ///
    /// Without --constituents the four default constituents (M2, S2, N2, K1)
    /// are used with phases drawn from --seed. A month is 31 days.
    Synth(SynthArgs),
    /// Read a tide-gauge file, flag bad samples and write the tide CSV.
    ///
    /// Formats: `bodc-ascii` (numbered rows `n) YYYY/MM/DD hh:mm:ss level[flag] ...`,
    /// flags M improbable, N null, T interpolated) and `csv` (`time,level[,flag]`).
    /// A per-month coverage report is printed to stderr.
    Ingest(IngestArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of 31-day months
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    months: u32,
    /// Sample interval in seconds
    #[arg(long, default_value_t = 60.0)]
    dt: f64,
    /// Constituents as `name:amplitude_m:period_hr[:phase_rad]`, comma separated
    #[arg(long)]
    constituents: Option<String>,
    /// Output tide CSV
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Gauge file
    input: PathBuf,
    /// `bodc-ascii` or `csv`
    #[arg(long, default_value = "csv")]
    format: GaugeFormat,
    /// Subtracted from every level (metres) to refer the series to mean sea level
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    datum: f64,
    /// Keep only this calendar month (`YYYY-MM`)
    #[arg(long)]
    month: Option<String>,
    /// Output tide CSV
    #[arg(long, short)]
    out: PathBuf,
}

pub fn run(cmd: TideCommand, seed: Option<u64>) -> Result<()> {
    match cmd {
        TideCommand::Synth(a) => synth(a, seed),
        TideCommand::Ingest(a) => ingest(a),
    }
}

fn parse_constituents(spec: &str) -> Result<Vec<Constituent>> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let parts: Vec<&str> = item.split(':').collect();
            if !(3..=4).contains(&parts.len()) {
                return Err(usage(format!("constituent `{item}` is not `name:amplitude_m:period_hr[:phase_rad]`")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| usage(format!("constituent `{item}`: {e}")));
            let c = Constituent::new(parts[0], num(parts[1])?, num(parts[2])?, parts.get(3).map_or(Ok(0.0), |p| num(p))?);
            if !(c.amplitude_m >= 0.0) || !(c.period_hr > 0.0) || !c.phase_rad.is_finite() {
                return Err(usage(format!("constituent `{item}` needs amplitude >= 0 and period > 0")));
            }
            Ok(c)
        })
        .collect()
}

fn synth(a: SynthArgs, seed: Option<u64>) -> Result<()> {
    if !(a.dt > 0.0) {
        return Err(usage("--dt must be positive"));
    }
    let seed = seed.unwrap_or(0);
    let constituents = match &a.constituents {
        Some(s) => parse_constituents(s)?,
        None => swansea_constituents(Some(random_phases(seed))),
    };
    if constituents.is_empty() {
        return Err(usage("no constituents given"));
    }
    let series = synthesize(&constituents, a.months as f64 * MONTH_DAYS * 86400.0, a.dt);

    let mut kv = KvConfig::new();
    kv.set("tide.months", a.months);
    kv.set("tide.dt_s", a.dt);
    kv.set("tide.seed", seed);
    kv.set(
        "tide.constituents",
        constituents
            .iter()
            .map(|c| format!("{}:{}:{}:{}", c.name, c.amplitude_m, c.period_hr, c.phase_rad))
            .collect::<Vec<_>>()
            .join(","),
    );
    let prov = Provenance::from_config(&kv, Some(seed));
    let mut out = create(&a.out)?;
    write_tide_csv(&series, &mut out, &prov.pairs())?;
    out.flush()?;
    log::info!("wrote {} samples to {}", series.len(), a.out.display());
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<()> {
    let opts = IngestOptions { format: a.format, datum_offset_m: a.datum };
    let mut series = ingest_gauge(&a.input, &opts)?;
    let windows = monthly_windows(&series);
    for w in &windows {
        eprintln!(
            "{}  samples {:>6}/{:<6}  good {:6.2}%  {}",
            w.label(),
            w.good,
            w.expected,
            100.0 * w.good_fraction(),
            if w.is_usable(1.0) { "usable" } else { "rejected" }
        );
    }
    if let Some(label) = &a.month {
        let w = windows
            .iter()
            .find(|w| &w.label() == label)
            .ok_or_else(|| usage(format!("month {label} is not covered by {}", a.input.display())))?;
        series = series.slice(w.start_idx, w.end_idx);
    }

    let mut kv = KvConfig::new();
    kv.set("ingest.input", a.input.display());
    kv.set("ingest.format", format!("{:?}", a.format));
    kv.set("ingest.datum_m", a.datum);
    if let Some(m) = &a.month {
        kv.set("ingest.month", m);
    }
    let prov = Provenance::from_config(&kv, None);
    let mut out = create(&a.out)?;
    write_tide_csv(&series, &mut out, &prov.pairs()).context("writing ingested tide")?;
    out.flush()?;
    Ok(())
}
