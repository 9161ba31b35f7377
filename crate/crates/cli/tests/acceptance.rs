//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any fails.

use std::cell::Cell;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::rc::Rc;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tidal_core::config::KvConfig;
use tidal_core::hydraulics::{ramp_step, turbine_flow_power, unit_speed, EfficiencyChain, HillChart, TurbinePlant};
use tidal_core::lagoon::{Lagoon, OceanTrack, SimConfig, StepRecord};
use tidal_core::optimizers::{grid_search, run_baseline, BaselineConfig, BaselineKind, GridSpec};
use tidal_core::rl::{
    evaluate_policy, gae, greedy_action, log_prob, ppo_loss, ActorCritic, Batch, EnvConfig, LossConfig, OceanFeed,
    PpoConfig, TidalEnv, TrackFeed, Trainer, LEVEL_SCALE, OBS_DIM,
};
use tidal_core::schemes::{HeadSchedule, HeadTriple, SchemeController, SchemeKind};
use tidal_core::tides::{random_phases, segment_half_tides, swansea_constituents, synthesize, TideSeries};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const MONTH_S: f64 = 31.0 * 86400.0;
/// Seed of the synthetic month shared by the baseline and training criteria.
const MONTH_SEED: u64 = 2024;

fn month(seed: u64) -> TideSeries {
    synthesize(&swansea_constituents(Some(random_phases(seed))), MONTH_S, 60.0)
}

fn lagoon() -> Lagoon {
    Lagoon::new(SimConfig::default()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn boundaries(tide: &TideSeries, track: &OceanTrack) -> Vec<usize> {
    segment_half_tides(tide, 3600.0).unwrap().iter().map(|h| track.step_at(tide.time_s(h.start_idx))).collect()
}

fn ac1_hydraulics() -> Outcome {
    // Hand evaluation from the plant constants: 95 poles on a 50 Hz grid, D = 7.35 m, |H| = 4 m.
    let sp = 120.0 * 50.0 / 95.0;
    let n11 = sp * 7.35 / 4f64.sqrt();
    let q11 = 0.0166 * n11 + 0.4861;
    let qt = q11 * 7.35 * 7.35 * 4f64.sqrt();
    let ef = -0.0019 * n11 + 1.2461;
    let ce = 0.97 * 0.995 * 0.95 * 0.972 * 0.95;
    let p_ebb = 1024.0 * 9.81 * qt * 4.0 * ef * ce;
    let p_flood = p_ebb * 0.90;
    let hand = [
        ("S_p", sp, 63.1579),
        ("n11", n11, 232.105),
        ("Q11", q11, 4.339),
        ("Qt", qt, 468.85),
        ("Ef", ef, 0.80510),
        ("C_E", ce, 0.84666),
        ("P ebb", p_ebb, 12.84e6),
        ("P flood", p_flood, 11.56e6),
    ];
    for (name, value, published) in hand {
        ensure!(rel(value, published) <= 1e-3, "hand {name} = {value} vs {published}");
    }

    let plant = TurbinePlant::default();
    let (chart, eff) = (HillChart::default(), EfficiencyChain::default());
    let ebb = turbine_flow_power(&plant, &chart, &eff, -4.0).map_err(|e| e.to_string())?;
    let flood = turbine_flow_power(&plant, &chart, &eff, 4.0).map_err(|e| e.to_string())?;
    let code = [
        ("S_p", plant.rotational_speed_rpm(), sp),
        ("n11", unit_speed(&plant, 4.0).unwrap(), n11),
        ("Q11", ebb.q11, q11),
        ("Qt", ebb.flow_m3s.abs(), qt),
        ("Ef", ebb.efficiency, ef),
        ("C_E", eff.combined(), ce),
        ("P ebb", ebb.power_w, p_ebb),
        ("P flood", flood.power_w, p_flood),
    ];
    for (name, value, expected) in code {
        ensure!(rel(value, expected) <= 1e-3, "{name}: implementation {value} vs hand {expected}");
    }
    ensure!(ebb.flow_m3s < 0.0 && flood.flow_m3s > 0.0, "flow signs do not follow the head");
    Ok(format!("P = {:.3} MW ebb, {:.3} MW flood, Qt = {:.2} m3/s", ebb.power_w / 1e6, flood.power_w / 1e6, qt))
}

fn ac2_ramp() -> Outcome {
    let zeta = 0.4;
    let mut q = 1.0;
    for _ in 0..15 {
        q = ramp_step(q, 0.0, zeta);
    }
    ensure!((q - 0.6f64.powi(15)).abs() <= 1e-12, "residual {q} vs 0.6^15");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let target = rng.random_range(-1e4..1e4);
        let start = rng.random_range(-1e4..1e4);
        let z = rng.random_range(0.01..1.0);
        ensure!(ramp_step(target, target, z) == target, "target {target} is not a fixed point");
        let mut q = start;
        for k in 1..=20 {
            q = ramp_step(q, target, z);
            let expect = (1.0f64 - z).powi(k) * (start - target);
            ensure!(((q - target) - expect).abs() <= 1e-9 * (start - target).abs().max(1.0), "gap after {k} steps");
        }
    }
    Ok("0.6^15 residual exact; 1000 random fixed-point and decay cases".into())
}

fn ac3_mass() -> Outcome {
    let lagoon = lagoon();
    let tide = month(MONTH_SEED);
    let track = lagoon.track(&tide).map_err(|e| e.to_string())?;
    let schedule = HeadSchedule::Constant(HeadTriple::classic(4.0, 1.0));
    let mut ctl = SchemeController::new(SchemeKind::Classic, schedule, boundaries(&tide, &track)).unwrap();
    let out = lagoon.run_track(&track, &mut ctl).map_err(|e| e.to_string())?;
    ensure!(out.records.len() == 44_640, "{} steps", out.records.len());
    let dt = lagoon.dt_s();
    let (mut volume, mut gross, mut path) = (0.0, 0.0, 0.0);
    for (i, r) in out.records.iter().enumerate() {
        volume += (r.turbine_flow_m3s + r.sluice_flow_m3s) * dt;
        gross += (r.turbine_flow_m3s.abs() + r.sluice_flow_m3s.abs()) * dt;
        let next = out.records.get(i + 1).map_or(out.final_state.level_m, |n| n.lagoon_m);
        path += lagoon.config().area.area_at(r.lagoon_m) * (next - r.lagoon_m);
    }
    let residual = (volume - path).abs() / gross;
    ensure!(residual <= 1e-9, "relative residual {residual:e}");
    Ok(format!("44640 steps, residual {residual:.2e} of gross throughput {:.3e} m3", gross))
}

fn ac4_schemes() -> Outcome {
    let lagoon = lagoon();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut steps = 0;
    for case in 0..100 {
        let days = rng.random_range(1.0..4.0);
        let tide = synthesize(&swansea_constituents(Some(random_phases(rng.random()))), days * 86400.0, 60.0);
        let track = lagoon.track(&tide).unwrap();
        let b = boundaries(&tide, &track);
        let classic: Vec<HeadTriple> =
            (0..b.len()).map(|_| HeadTriple::classic(rng.random_range(1.0..6.0), rng.random_range(1.0..3.0))).collect();
        let variant: Vec<HeadTriple> = classic
            .iter()
            .map(|t| HeadTriple::variant(t.h_start_m, t.h_min_m, rng.random_range(0.01..t.h_min_m)))
            .collect();
        let mut c = SchemeController::new(SchemeKind::Classic, HeadSchedule::per_half_tide(classic), b.clone()).unwrap();
        let mut v = SchemeController::new(SchemeKind::Variant, HeadSchedule::per_half_tide(variant), b).unwrap();
        let a = lagoon.run_track(&track, &mut c).unwrap();
        let z = lagoon.run_track(&track, &mut v).unwrap();
        let same = a.records.iter().zip(&z.records).all(|(x, y)| {
            x.mode.turbine_mode == y.mode.turbine_mode && x.mode.sluice_fraction.to_bits() == y.mode.sluice_fraction.to_bits()
        });
        ensure!(same && a.records.len() == z.records.len(), "case {case}: command streams differ");
        steps += a.records.len();
    }
    Ok(format!("100 cases, {steps} commands bit-identical"))
}

struct Baselines {
    energies: Vec<(BaselineKind, f64, f64)>,
}

impl Baselines {
    fn get(&self, k: BaselineKind) -> f64 {
        self.energies.iter().find(|(b, ..)| *b == k).map(|(_, e, _)| *e).unwrap()
    }
}

fn compute_baselines() -> Result<Baselines, String> {
    let lagoon = lagoon();
    let tide = month(MONTH_SEED);
    let cfg = BaselineConfig::default();
    let mut energies = Vec::new();
    for kind in [BaselineKind::Ch, BaselineKind::Chv, BaselineKind::Eht, BaselineKind::Ehtv, BaselineKind::Ehn] {
        let started = Instant::now();
        let r = run_baseline(kind, &lagoon, &tide, &tide, &cfg).map_err(|e| format!("{kind}: {e}"))?;
        if r.predicted_energy_gwh != r.applied_energy_gwh {
            return Err(format!("{kind}: perfect forecast applied {} != predicted {}", r.applied_energy_gwh, r.predicted_energy_gwh));
        }
        energies.push((kind, r.applied_energy_gwh, started.elapsed().as_secs_f64()));
    }
    Ok(Baselines { energies })
}

fn ac5_dominance(b: &Result<Baselines, String>) -> Outcome {
    let b = b.as_ref().map_err(Clone::clone)?;
    use BaselineKind::*;
    let (ch, chv, eht, ehtv, ehn) = (b.get(Ch), b.get(Chv), b.get(Eht), b.get(Ehtv), b.get(Ehn));
    ensure!(eht >= ch && eht > ch, "EHT {eht} vs CH {ch}");
    ensure!(chv >= ch, "CHV {chv} < CH {ch}");
    ensure!(ehtv >= eht, "EHTV {ehtv} < EHT {eht}");
    ensure!(ehn >= eht, "EHN {ehn} < EHT {eht}");
    let gain = (ehn - eht) / eht;
    ensure!(gain <= 0.005, "EHN gain {:.3}% exceeds 0.5%", 100.0 * gain);
    let time = |k| b.energies.iter().find(|(x, ..)| *x == k).unwrap().2;
    ensure!(time(Ch) < 60.0, "CH took {:.1} s", time(Ch));
    ensure!(time(Eht) < 600.0, "EHT took {:.1} s", time(Eht));
    let list: Vec<String> = b.energies.iter().map(|(k, e, t)| format!("{k} {e:.3} GWh ({t:.1} s)")).collect();
    Ok(format!("{}; EHN gain {:.3}%", list.join(", "), 100.0 * gain))
}

fn ac6_grid() -> Outcome {
    let planted = [3.2871, 1.6143, 2.9037];
    let spec = GridSpec { bounds: vec![(1.0, 6.0), (1.0, 3.0), (1.0, 5.0)], initial_resolution: 1.0, final_resolution: 0.01 };
    let r = grid_search(&spec, |x| -x.iter().zip(&planted).map(|(a, b)| (a - b).powi(2)).sum::<f64>());
    ensure!(r.pass_best.len() == 8, "{} passes", r.pass_best.len());
    ensure!(r.pass_best.windows(2).all(|w| w[1] >= w[0]), "best value decreased: {:?}", r.pass_best);
    for (x, p) in r.best.iter().zip(&planted) {
        ensure!((x - p).abs() <= 0.0078125, "recovered {:?} vs planted {planted:?}", r.best);
    }
    Ok(format!("8 monotone passes, {} evaluations, best {:?}", r.evaluations, r.best))
}

fn ac7_ppo() -> Outcome {
    // GAE hand cases.
    let (adv, _) = gae(&[1.0, 1.0], &[0.0, 0.0], &[false, false], 0.0, 0.99, 0.95);
    ensure!((adv[0] - 1.9405).abs() <= 1e-12, "A0 = {}", adv[0]);
    let (r, v, d) = ([0.5, -1.0, 2.0], [0.1, 0.4, -0.3], [false; 3]);
    let (adv, _) = gae(&r, &v, &d, 0.7, 0.9, 0.0);
    let td = [0.5 + 0.9 * 0.4 - 0.1, -1.0 + 0.9 * -0.3 - 0.4, 2.0 + 0.9 * 0.7 + 0.3];
    for (a, t) in adv.iter().zip(&td) {
        ensure!((a - t).abs() <= 1e-12, "lambda 0: {adv:?} vs {td:?}");
    }
    let (adv, _) = gae(&r, &v, &d, 0.7, 1.0, 1.0);
    let mc = [1.5 + 0.7 - 0.1, 1.0 + 0.7 - 0.4, 2.0 + 0.7 + 0.3];
    for (a, m) in adv.iter().zip(&mc) {
        ensure!((a - m).abs() <= 1e-12, "lambda 1: {adv:?} vs {mc:?}");
    }

    // Finite-difference check of the loss gradient on a 2-[4]-3 network.
    let net = ActorCritic::new(2, vec![4], 3);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut p = net.init_params(&mut rng);
    for x in &mut p {
        *x += rng.random_range(-0.3..0.3);
    }
    let n = 16;
    let obs = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0));
    let raw = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.5..1.5));
    let cache = net.forward(&p, &obs.view());
    let offsets = [0.0, 0.05, -0.05, 0.6, -0.6, 0.35, -0.4, 0.1];
    let batch = Batch {
        old_log_probs: (0..n)
            .map(|i| {
                log_prob(raw.row(i).as_slice().unwrap(), cache.mean.row(i).as_slice().unwrap(), net.log_std(&p))
                    + offsets[i % 8]
            })
            .collect(),
        old_values: (0..n).map(|i| cache.value[i] + offsets[(i + 3) % 8]).collect(),
        advantages: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
        returns: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
        obs,
        raw_actions: raw,
    };
    let cfg = LossConfig { clip_eps: 0.2, entropy_beta: 5e-3 };
    let out = ppo_loss(&net, &p, &batch, &cfg).map_err(|e| e.to_string())?;
    ensure!(out.clip_fraction > 0.0 && out.clip_fraction < 1.0, "batch does not exercise clipping");
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..p.len() {
        let (mut hi, mut lo) = (p.clone(), p.clone());
        hi[i] += h;
        lo[i] -= h;
        let fd = (ppo_loss(&net, &hi, &batch, &cfg).unwrap().loss - ppo_loss(&net, &lo, &batch, &cfg).unwrap().loss) / (2.0 * h);
        let err = (fd - out.grad[i]).abs() / fd.abs().max(out.grad[i].abs()).max(1e-6);
        worst = worst.max(err);
    }
    ensure!(worst <= 1e-4, "worst relative gradient error {worst:e}");
    Ok(format!("GAE cases exact; {} gradients, worst relative error {worst:.1e}", p.len()))
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn ac8_training(b: &Result<Baselines, String>) -> Outcome {
    let b = b.as_ref().map_err(Clone::clone)?;
    let (ch, eht) = (b.get(BaselineKind::Ch), b.get(BaselineKind::Eht));
    let path = workspace_root().join("configs/desk.conf");
    let mut kv = KvConfig::from_file(&path).map_err(|e| e.to_string())?;
    let cfg = PpoConfig::from_config(&mut kv).map_err(|e| e.to_string())?;
    kv.finish().map_err(|e| e.to_string())?;
    ensure!(cfg.max_steps >= 2_000_000, "desk config trains only {} steps", cfg.max_steps);
    let started = Instant::now();
    let lagoon = lagoon();
    let mut trainer = Trainer::new(cfg, lagoon.clone()).map_err(|e| e.to_string())?;
    trainer.train(|_, _| Ok(())).map_err(|e| e.to_string())?;
    let feed = TrackFeed::new(lagoon.track(&month(MONTH_SEED)).unwrap());
    let eval = evaluate_policy(trainer.network(), trainer.params(), &lagoon, feed, 50.0).map_err(|e| e.to_string())?;
    let agent = eval.total_energy_wh / 1e9;
    let summary = format!(
        "{} steps in {:.0} s: agent {agent:.3} GWh, CH {ch:.3}, EHT {eht:.3} ({:.1}% of EHT)",
        trainer.steps(),
        started.elapsed().as_secs_f64(),
        100.0 * agent / eht
    );
    ensure!(agent >= ch, "{summary}: below CH");
    ensure!(agent >= 0.7 * eht, "{summary}: below 70% of EHT");
    Ok(summary)
}

struct Instrumented {
    levels: Vec<f64>,
    reads: Rc<Cell<usize>>,
}

impl OceanFeed for Instrumented {
    fn next_level(&mut self) -> Option<f64> {
        let i = self.reads.get();
        let v = self.levels.get(i).copied();
        if v.is_some() {
            self.reads.set(i + 1);
        }
        v
    }
}

fn ac9_causality() -> Outcome {
    let net = ActorCritic::new(OBS_DIM, vec![16, 16], 3);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut params = net.init_params(&mut rng);
    for p in &mut params {
        *p += rng.random_range(-1.0..1.0);
    }
    let levels = month(5).levels_m[..4320].to_vec();
    let reads = Rc::new(Cell::new(0));
    let feed = Instrumented { levels: levels.clone(), reads: reads.clone() };
    let mut env = TidalEnv::new(lagoon(), feed, EnvConfig { episode_actions: None, ..Default::default() });
    let mut obs = env.observation();
    let mut decisions = 0;
    loop {
        ensure!(reads.get() == 15 * decisions + 1, "decision {decisions} saw {} samples", reads.get());
        ensure!(obs[0] == levels[15 * decisions] / LEVEL_SCALE, "decision {decisions} observed a non-current level");
        let t = env.step(greedy_action(&net, &params, &obs).unwrap()).map_err(|e| e.to_string())?;
        decisions += 1;
        obs = t.obs;
        if t.done {
            break;
        }
    }

    let run = |levels: Vec<f64>| -> Vec<StepRecord> {
        let track = OceanTrack { dt_s: 60.0, levels_m: levels };
        evaluate_policy(&net, &params, &lagoon(), TrackFeed::new(track), 50.0).unwrap().records
    };
    let reference = run(levels.clone());
    for k in [1, 15, 16, 2000, levels.len() - 1] {
        let mut future = levels.clone();
        for v in &mut future[k..] {
            *v += 2.5;
        }
        ensure!(run(future)[..k] == reference[..k], "perturbing samples from {k} changed earlier steps");
    }
    Ok(format!("{decisions} decisions each read exactly 15m+1 samples; future perturbations invisible"))
}

fn tidal(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tidal"))
        .current_dir(dir)
        .arg("--threads")
        .arg("1")
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("tidal {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
    }
}

/// File contents without wall-clock fields.
fn stable(path: &Path) -> Result<String, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text.lines().filter(|l| !l.contains("wall_time_s")).collect::<Vec<_>>().join("\n"))
}

fn ac10_determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    std::fs::write(
        root.path().join("train.conf"),
        "ppo.env_count = 4\nppo.rollout_horizon = 64\nppo.minibatch_size = 128\nppo.hidden = 16, 16\n\
         ppo.max_steps = 1e4\nppo.episode_actions = 200\ntrain.checkpoint_every = 5000\n",
    )
    .unwrap();
    let runs = ["a", "b"];
    for r in runs {
        let d = root.path().join(r);
        std::fs::create_dir(&d).unwrap();
        tidal(&d, &["tide", "synth", "--months", "1", "--seed", "7", "--out", "tide.csv"])?;
        tidal(&d, &["simulate", "--tide", "tide.csv", "--scheme", "classic", "--heads", "4,1", "--out", "sim.csv", "--summary", "sim.json"])?;
        tidal(&d, &["optimize", "--baseline", "CH", "--measured", "tide.csv", "--report", "ch_report.json", "--schedule", "ch_schedule.json", "--summary", "ch.json"])?;
        tidal(&d, &["simulate", "--tide", "tide.csv", "--schedule", "ch_schedule.json", "--out", "ch_sim.csv", "--summary", "ch_sim.json"])?;
        tidal(&d, &["train", "--config", "../train.conf", "--seed", "3", "--out-dir", "train"])?;
        tidal(&d, &["evaluate", "--checkpoint", "train/checkpoint.json", "--seed", "11", "--out", "eval.csv", "--summary", "eval.json"])?;
        tidal(&d, &["compare", "ch.json", "eval.json", "--out", "table.csv"])?;
    }
    let files = [
        "tide.csv",
        "sim.csv",
        "sim.json",
        "ch_report.json",
        "ch_schedule.json",
        "ch.json",
        "ch_sim.csv",
        "train/checkpoint.json",
        "train/checkpoint_5120.json",
        "train/curve.csv",
        "eval.csv",
        "eval.json",
        "table.csv",
    ];
    for f in files {
        let a = stable(&root.path().join("a").join(f))?;
        let b = stable(&root.path().join("b").join(f))?;
        ensure!(a == b, "{f} differs between identical runs");
        ensure!(a.contains("config_hash") && a.contains("tool_version") || f.ends_with("schedule.json"), "{f} lacks provenance");
    }
    Ok(format!("7 commands run twice with --threads 1; {} output files byte-identical", files.len()))
}

fn main() {
    let baselines = compute_baselines();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("AC1 hydraulics point oracle", Box::new(ac1_hydraulics)),
        ("AC2 momentum ramp", Box::new(ac2_ramp)),
        ("AC3 mass conservation", Box::new(ac3_mass)),
        ("AC4 scheme equivalence", Box::new(ac4_schemes)),
        ("AC5 baseline dominance", Box::new(|| ac5_dominance(&baselines))),
        ("AC6 grid search", Box::new(ac6_grid)),
        ("AC7 PPO correctness", Box::new(ac7_ppo)),
        ("AC8 desk-scale training", Box::new(|| ac8_training(&baselines))),
        ("AC9 causality audit", Box::new(ac9_causality)),
        ("AC10 determinism", Box::new(ac10_determinism)),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
