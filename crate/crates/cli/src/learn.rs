use std::io::Write;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use tidal_core::lagoon::{write_records_csv, Lagoon, RunSummary, SimConfig};
use tidal_core::rl::{
    evaluate_policy, write_curve_csv, Checkpoint, CurveRow, PpoConfig, TrackFeed, Trainer, CHECKPOINT_FORMAT_VERSION,
    LEVEL_SCALE,
};
use tidal_core::tides::{random_phases, read_tide_csv, swansea_constituents, synthesize};

use crate::common::{create, load_config, stem, usage, write_json, Provenance, TOOL_VERSION};
use crate::tide::MONTH_DAYS;

/// Train a PPO agent on synthetic tides.
///
/// Each episode draws fresh constituent phases from the environment's seeded
/// stream. Writes `curve.csv` (step, mean_episode_reward, clip_fraction,
/// approx_kl, entropy), `checkpoint.json` at the end and
/// `checkpoint_<step>.json` every `train.checkpoint_every` steps.
#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Key-value config file (ppo.*, sim keys, train.checkpoint_every)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides ppo.max_steps
    #[arg(long)]
    steps: Option<u64>,
    /// Output directory
    #[arg(long)]
    out_dir: PathBuf,
}

/// Run a trained policy deterministically (mean action) over a tide.
///
/// The tide is either a tide CSV (--tide) or a synthetic series drawn from the
/// training generator with --seed as the evaluation seed. The lagoon
/// configuration is the one stored in the checkpoint.
#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Tide CSV [default: synthetic tide from --seed]
    #[arg(long)]
    tide: Option<PathBuf>,
    /// Months of synthetic tide when --tide is absent
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    months: u32,
    /// Records CSV
    #[arg(long, short)]
    out: PathBuf,
    /// Summary JSON
    #[arg(long)]
    summary: PathBuf,
    /// Method name stored in the summary
    #[arg(long, default_value = "PPO")]
    method: String,
    /// Label stored in the summary [default: tide file stem or synth-<seed>]
    #[arg(long)]
    label: Option<String>,
}

pub fn train(a: TrainArgs, seed: Option<u64>) -> Result<()> {
    let mut kv = load_config(a.config.as_deref())?;
    if let Some(s) = seed {
        kv.set("ppo.seed", s);
    }
    if let Some(s) = a.steps {
        kv.set("ppo.max_steps", s);
    }
    let sim = SimConfig::from_config(&mut kv)?;
    let ppo = PpoConfig::from_config(&mut kv)?;
    let every: Option<u64> = kv.get("train.checkpoint_every")?;
    kv.finish()?;
    if every == Some(0) {
        return Err(usage("train.checkpoint_every must be positive"));
    }
    let prov = Provenance::from_config(&kv, Some(ppo.seed));
    std::fs::create_dir_all(&a.out_dir)?;

    let snapshot = |t: &Trainer| Checkpoint {
        format_version: CHECKPOINT_FORMAT_VERSION,
        network: t.network().clone(),
        params: t.params().to_vec(),
        level_scale: LEVEL_SCALE,
        steps_trained: t.steps(),
        ppo: ppo.clone(),
        sim: sim.clone(),
        config_hash: prov.config_hash.clone(),
        tool_version: TOOL_VERSION.into(),
    };
    let mut trainer = Trainer::new(ppo.clone(), Lagoon::new(sim.clone())?)?;
    let mut next_save = every;
    let mut updates = 0usize;
    let curve = trainer.train(|t, row: &CurveRow| {
        updates += 1;
        if updates % 10 == 0 || t.is_done() {
            log::info!(
                "step {:>10}  mean episode reward {:9.3}  clip {:.3}  kl {:.5}  entropy {:.3}",
                row.step,
                row.mean_episode_reward,
                row.clip_fraction,
                row.approx_kl,
                row.entropy
            );
        }
        if let Some(at) = next_save.filter(|at| t.steps() >= *at) {
            snapshot(t).save(&a.out_dir.join(format!("checkpoint_{}.json", t.steps())))?;
            next_save = Some(at + every.unwrap_or(at));
        }
        Ok(())
    })?;
    snapshot(&trainer).save(&a.out_dir.join("checkpoint.json"))?;
    let mut w = create(&a.out_dir.join("curve.csv"))?;
    write_curve_csv(&curve, &mut w, &prov.pairs())?;
    w.flush()?;
    log::info!("trained {} steps; outputs in {}", trainer.steps(), a.out_dir.display());
    Ok(())
}

pub fn evaluate(a: EvaluateArgs, seed: Option<u64>) -> Result<()> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let lagoon = Lagoon::new(ckpt.sim.clone())?;
    let (tide, label) = match (&a.tide, seed) {
        (Some(p), _) => (read_tide_csv(p)?, stem(p)),
        (None, Some(s)) => {
            let span = a.months as f64 * MONTH_DAYS * 86400.0;
            (synthesize(&swansea_constituents(Some(random_phases(s))), span, lagoon.dt_s()), format!("synth-{s}"))
        }
        (None, None) => return Err(usage("give --tide or an evaluation --seed")),
    };
    let feed = TrackFeed::new(lagoon.track(&tide)?);
    let out = evaluate_policy(&ckpt.network, &ckpt.params, &lagoon, feed, ckpt.ppo.reward_scale_mwh)?;

    let mut kv = tidal_core::config::KvConfig::new();
    kv.set("evaluate.checkpoint_hash", &ckpt.config_hash);
    kv.set("evaluate.steps_trained", ckpt.steps_trained);
    kv.set("evaluate.tide", a.tide.as_ref().map_or_else(|| format!("synth:{}", a.months), |p| p.display().to_string()));
    let prov = Provenance::from_config(&kv, if a.tide.is_some() { None } else { seed });
    let mut w = create(&a.out)?;
    write_records_csv(&out.records, &mut w, &prov.pairs())?;
    w.flush()?;
    let summary = RunSummary {
        method: a.method.clone(),
        label: a.label.clone().unwrap_or(label),
        total_energy_gwh: out.total_energy_wh / 1e9,
        capacity_factor: lagoon.capacity_factor(out.total_energy_wh, out.records.len()),
        steps: out.records.len(),
        config_hash: prov.config_hash.clone(),
        seed: prov.seed,
        tool_version: TOOL_VERSION.into(),
    };
    write_json(&a.summary, &summary)?;
    log::info!("{} on {}: {:.6} GWh", summary.method, summary.label, summary.total_energy_gwh);
    Ok(())
}
