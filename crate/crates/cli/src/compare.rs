use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use tidal_core::config::KvConfig;
use tidal_core::lagoon::RunSummary;

use crate::common::{create, usage, Provenance};

/// Join run summaries into a per-month energy table.
///
/// One row per method, one column per month label (GWh), then the mean and
/// the population standard deviation across that method's months. Rows and
/// columns keep the order in which they first appear on the command line.
#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Summary JSON files from simulate, optimize or evaluate (at least two)
    #[arg(required = true, num_args = 2..)]
    summaries: Vec<PathBuf>,
    /// Output table CSV
    #[arg(long, short)]
    out: PathBuf,
}

pub struct Table {
    pub methods: Vec<String>,
    pub labels: Vec<String>,
    /// `cells[m][l]` in GWh.
    pub cells: Vec<Vec<Option<f64>>>,
}

fn position(v: &mut Vec<String>, s: &str) -> usize {
    v.iter().position(|x| x == s).unwrap_or_else(|| {
        v.push(s.to_string());
        v.len() - 1
    })
}

pub fn build(summaries: &[RunSummary]) -> Result<Table> {
    let mut t = Table { methods: Vec::new(), labels: Vec::new(), cells: Vec::new() };
    for s in summaries {
        let m = position(&mut t.methods, &s.method);
        let l = position(&mut t.labels, &s.label);
        t.cells.resize_with(t.methods.len(), Vec::new);
        for row in &mut t.cells {
            row.resize(t.labels.len(), None);
        }
        if t.cells[m][l].replace(s.total_energy_gwh).is_some() {
            return Err(usage(format!("two summaries for method {} on {}", s.method, s.label)));
        }
    }
    Ok(t)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn run(a: CompareArgs) -> Result<()> {
    let summaries = a
        .summaries
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<RunSummary>(&text).with_context(|| format!("parsing summary {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let table = build(&summaries)?;

    let mut kv = KvConfig::new();
    kv.set("compare.inputs", summaries.iter().map(|s| s.config_hash.as_str()).collect::<Vec<_>>().join(","));
    let prov = Provenance::from_config(&kv, None);
    let mut w = create(&a.out)?;
    for (k, v) in prov.pairs() {
        writeln!(w, "# {k}: {v}")?;
    }
    write!(w, "method")?;
    for l in &table.labels {
        write!(w, ",{l}")?;
    }
    writeln!(w, ",mean_gwh,std_gwh")?;
    for (m, row) in table.methods.iter().zip(&table.cells) {
        write!(w, "{m}")?;
        for c in row {
            match c {
                Some(v) => write!(w, ",{v}")?,
                None => write!(w, ",")?,
            }
        }
        let present: Vec<f64> = row.iter().flatten().copied().collect();
        let (mean, std) = mean_std(&present);
        writeln!(w, ",{mean},{std}")?;
    }
    w.flush()?;
    Ok(())
}
