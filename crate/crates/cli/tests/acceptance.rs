//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any fails.
//!
//! The pipeline criteria run the `vmsr` binary end to end on
//! `tests/acceptance.toml`. Set `VMSR_ACCEPTANCE_RUN=<dir>` to keep (or
//! reuse) that run directory. Positional arguments select criteria, e.g.
//! `cargo test -p vmsr-cli --test acceptance -- 1 3`.

#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::Rng as _;
use vmsr_core::eval::metrics::{compute_adt, compute_max_distance};
use vmsr_core::eval::paired_bootstrap;
use vmsr_core::nn::gradcheck::{check_gradients, RELATIVE_TOLERANCE, STRAIGHT_THROUGH_TOLERANCE};
use vmsr_core::nn::gumbel::{gumbel_noise, relax, straight_through_backward};
use vmsr_core::nn::params::{init_linear, Grads};
use vmsr_core::nn::mlp::MlpSpec;
use vmsr_core::nn::gru::GruSpec;
use vmsr_core::pipeline::subroutines::{clip_loss, soft_sample, PreparedClip};
use vmsr_core::pipeline::{train_subroutines, PseudoLabeledClip};
use vmsr_core::rng::{rng_from, tag, Rng};
use vmsr_core::sim::{geodesic_field, Cell};
use vmsr_core::{Action, Observation, ParamStore, SubroutineArch, SubroutineHyper};

const CONFIGS: usize = 20;
const BOOTSTRAP_RESAMPLES: usize = 10_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn failed(detail: impl Into<String>) -> Outcome {
    outcome(false, detail)
}

// ---------------------------------------------------------------- criterion 1

fn uniform(rng: &mut Rng, n: usize, lim: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-lim..lim)).collect()
}

fn mlp_check(seed: u64) -> f64 {
    let mut rng = rng_from(seed, &[tag("acceptance-mlp")]);
    let depth = rng.random_range(1..=3);
    let widths: Vec<usize> = (0..=depth).map(|_| rng.random_range(1..=7)).collect();
    let spec = MlpSpec::new(widths.clone()).unwrap();
    let mut store = ParamStore::new();
    for l in 0..spec.layers() {
        init_linear(&mut store, &MlpSpec::layer_name("m", l), widths[l], widths[l + 1], 1.0, &mut rng);
    }
    let x = uniform(&mut rng, widths[0], 1.0);
    let r = uniform(&mut rng, widths[depth], 1.0);
    let loss = |s: &ParamStore| {
        let (y, _) = spec.forward(s, "m", &x).unwrap();
        y.iter().zip(&r).map(|(a, b)| a * b + 0.5 * a * a).sum::<f64>()
    };
    let (y, cache) = spec.forward(&store, "m", &x).unwrap();
    let dy: Vec<f64> = y.iter().zip(&r).map(|(a, b)| a + b).collect();
    let mut grads = Grads::new();
    spec.backward(&store, "m", &cache, &dy, &mut grads).unwrap();
    check_gradients(&store, &grads, loss, 1e-3).max_rel_error
}

fn gru_check(seed: u64) -> f64 {
    let mut rng = rng_from(seed, &[tag("acceptance-gru")]);
    let spec = GruSpec::new(rng.random_range(1..=5), rng.random_range(1..=6)).unwrap();
    let mut store = ParamStore::new();
    spec.init(&mut store, "g", &mut rng);
    let steps = rng.random_range(1..=6);
    let xs: Vec<Vec<f64>> = (0..steps).map(|_| uniform(&mut rng, spec.input, 1.0)).collect();
    let h0 = uniform(&mut rng, spec.hidden, 0.5);
    let target = uniform(&mut rng, spec.hidden, 1.0);
    let loss = |s: &ParamStore| {
        let mut h = h0.clone();
        let mut total = 0.0;
        for x in &xs {
            h = spec.step(s, "g", x, &h).unwrap().0;
            total += h.iter().zip(&target).map(|(a, b)| a * b).sum::<f64>();
        }
        total
    };
    let mut caches = Vec::new();
    let mut h = h0.clone();
    for x in &xs {
        let (nh, c) = spec.step(&store, "g", x, &h).unwrap();
        caches.push(c);
        h = nh;
    }
    let mut grads = Grads::new();
    let mut dh = vec![0.0; spec.hidden];
    for c in caches.iter().rev() {
        for (d, t) in dh.iter_mut().zip(&target) {
            *d += t;
        }
        dh = spec.backward(&store, "g", c, &dh, &mut grads).unwrap().1;
    }
    check_gradients(&store, &grads, loss, 1e-3).max_rel_error
}

/// Linear logits, a straight-through sample `y = hard - soft* + soft` and a
/// quadratic loss on `y`. The anchor `soft*` is the soft sample at the
/// unperturbed parameters, so finite differences see the relaxed path.
fn straight_through_check(seed: u64) -> f64 {
    let mut rng = rng_from(seed, &[tag("acceptance-st")]);
    let (k, d) = (rng.random_range(2..=6), rng.random_range(1..=5));
    let tau = rng.random_range(0.3..1.5);
    let mut store = ParamStore::new();
    init_linear(&mut store, "st", d, k, 2.0, &mut rng);
    let x = uniform(&mut rng, d, 1.0);
    let c = uniform(&mut rng, k, 1.0);
    let noise = gumbel_noise(k, &mut rng);
    let logits = |s: &ParamStore| {
        let (w, b) = (s.get("st.w").unwrap().data(), s.get("st.b").unwrap().data());
        (0..k)
            .map(|i| b[i] as f64 + (0..d).map(|j| w[i * d + j] as f64 * x[j]).sum::<f64>())
            .collect::<Vec<f64>>()
    };
    let base = relax(&logits(&store), &noise, tau).unwrap();
    let loss = |s: &ParamStore| {
        let soft = relax(&logits(s), &noise, tau).unwrap().soft;
        (0..k)
            .map(|i| {
                let y = base.hard[i] - base.soft[i] + soft[i];
                c[i] * y + 0.5 * y * y
            })
            .sum::<f64>()
    };
    let dy: Vec<f64> = (0..k).map(|i| c[i] + base.hard[i]).collect();
    let dl = straight_through_backward(&base.soft, tau, &dy);
    let mut grads = Grads::new();
    {
        let gw = grads.buf("st.w", k * d);
        for i in 0..k {
            for j in 0..d {
                gw[i * d + j] += dl[i] * x[j];
            }
        }
    }
    grads.buf("st.b", k).iter_mut().zip(&dl).for_each(|(g, v)| *g += v);
    check_gradients(&store, &grads, loss, 1e-3).max_rel_error
}

fn random_clip(arch: &SubroutineArch, rng: &mut Rng) -> PseudoLabeledClip {
    PseudoLabeledClip {
        video_id: 0,
        observations: (0..arch.horizon)
            .map(|_| Observation {
                depths: (0..arch.ray_count).map(|_| rng.random_range(0.0..1.0)).collect(),
            })
            .collect(),
        pseudo_actions: (1..arch.horizon).map(|_| Action::ALL[rng.random_range(0..4)]).collect(),
    }
}

/// Joint loss over a two-clip batch, through the policy, the
/// straight-through latent, the encoder and the affordance head.
fn joint_loss_check(seed: u64) -> f64 {
    let mut rng = rng_from(seed, &[tag("acceptance-joint")]);
    let arch = SubroutineArch {
        ray_count: rng.random_range(2..=6),
        n_subroutines: rng.random_range(2..=4),
        horizon: rng.random_range(2..=5),
        features: rng.random_range(2..=5),
        hidden: rng.random_range(2..=6),
        encoder_hidden: rng.random_range(2..=5),
        affordance_hidden: rng.random_range(2..=4),
    };
    let mut params = arch.init(seed).unwrap();
    let scale = rng.random_range(5.0..50.0) as f32;
    for v in params.get_mut("encoder.l1.w").unwrap().data_mut() {
        *v *= scale;
    }
    let clips: Vec<PreparedClip> = (0..2)
        .map(|_| PreparedClip::new(&arch, &random_clip(&arch, &mut rng)).unwrap())
        .collect();
    let noises: Vec<Vec<f64>> = (0..2).map(|_| gumbel_noise(arch.n_subroutines, &mut rng)).collect();
    let tau = rng.random_range(0.5..1.0);
    let aff = rng.random_range(0.1..1.5);
    let anchors: Vec<Vec<f64>> = clips
        .iter()
        .zip(&noises)
        .map(|(c, n)| soft_sample(&arch, &params, c, n, tau).unwrap())
        .collect();
    let mut grads = Grads::new();
    for (c, n) in clips.iter().zip(&noises) {
        clip_loss(&arch, &params, c, n, tau, aff, None, Some(&mut grads)).unwrap();
    }
    let loss = |p: &ParamStore| {
        clips
            .iter()
            .zip(&noises)
            .zip(&anchors)
            .map(|((c, n), a)| clip_loss(&arch, p, c, n, tau, aff, Some(a), None).unwrap().loss)
            .sum::<f64>()
    };
    check_gradients(&params, &grads, loss, 1e-3).max_rel_error
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    type Suite = (&'static str, fn(u64) -> f64, f64);
    let suites: [Suite; 4] = [
        ("mlp", mlp_check, RELATIVE_TOLERANCE),
        ("gru", gru_check, RELATIVE_TOLERANCE),
        ("straight-through", straight_through_check, STRAIGHT_THROUGH_TOLERANCE),
        ("joint", joint_loss_check, STRAIGHT_THROUGH_TOLERANCE),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, check, tol) in suites {
        let worst = (0..CONFIGS as u64).map(check).fold(0.0, f64::max);
        pass &= worst < tol;
        parts.push(format!("{name} max rel err {worst:.1e} (< {tol:.0e})"));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    parts.push(format!("{CONFIGS} configs each, {secs:.1}s"));
    outcome(pass, parts.join(", "))
}

// ---------------------------------------------------------------- criterion 3

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut unreachable_mismatch = 0;
    for seed in 0..20u64 {
        let mut rng = rng_from(seed, &[tag("acceptance-oracle")]);
        let map = oracle::random_map(&mut rng, 30);
        let free: Vec<Cell> = map.free_cells().collect();
        let sources: Vec<Cell> = (0..rng.random_range(1..=3)).map(|_| free[rng.random_range(0..free.len())]).collect();
        let field = geodesic_field(&map, &sources).unwrap();
        for (&got, want) in field.values().iter().zip(oracle::nearest_source(&map, &sources)) {
            if want.is_finite() {
                worst = worst.max((got - want).abs());
            } else if got.is_finite() {
                unreachable_mismatch += 1;
            }
        }
        let len = rng.random_range(0..80);
        let traj = oracle::random_walk(&map, &mut rng, len);
        worst = worst.max((compute_adt(&map, &traj).unwrap() - oracle::adt(&map, &traj)).abs());
        worst = worst.max((compute_max_distance(&map, &traj).unwrap() - oracle::max_distance(&map, &traj)).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-6 && unreachable_mismatch == 0 && secs < 60.0,
        format!("20 maps, max abs err {worst:.1e} m, {unreachable_mismatch} reachability mismatches, {secs:.1}s"),
    )
}

// ------------------------------------------------------- criterion 4 (synthetic)

/// Clips whose actions are all RotateLeft or all RotateRight, with
/// observations that carry no information about the mode.
fn two_mode_clips(arch: &SubroutineArch, n: usize, seed: u64) -> Vec<PseudoLabeledClip> {
    let mut rng = rng_from(seed, &[tag("two-mode")]);
    (0..n)
        .map(|i| {
            let a = if i % 2 == 0 { Action::RotateLeft } else { Action::RotateRight };
            PseudoLabeledClip {
                video_id: i as u32,
                observations: (0..arch.horizon)
                    .map(|_| Observation {
                        depths: (0..arch.ray_count).map(|_| rng.random_range(0.0..1.0)).collect(),
                    })
                    .collect(),
                pseudo_actions: vec![a; arch.horizon - 1],
            }
        })
        .collect()
}

fn two_mode() -> (bool, String, f64) {
    let start = Instant::now();
    let arch = SubroutineArch::new(16, 4, 10);
    let clips = two_mode_clips(&arch, 512, 0);
    let (model, _) = train_subroutines(&clips, &arch, &SubroutineHyper { epochs: 150, ..SubroutineHyper::default() }, 0).unwrap();
    let zl = model.assign(&[Action::RotateLeft; 9]).unwrap();
    let zr = model.assign(&[Action::RotateRight; 9]).unwrap();
    let held_out: Vec<PreparedClip> = two_mode_clips(&arch, 200, 1)
        .iter()
        .map(|c| PreparedClip::new(&arch, c).unwrap())
        .collect();
    let (cond, marg) = model.conditioning_accuracy(&held_out).unwrap();
    let pass = zl != zr && cond > 0.95;
    let detail = format!("two-mode z {zl} vs {zr}, conditioned acc {cond:.3} (marginal {marg:.3})");
    (pass, detail, start.elapsed().as_secs_f64())
}

// ------------------------------------------------------------- pipeline runs

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_vmsr")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join(name)
}

fn vmsr(config: &Path, out: &Path, args: &[&str]) -> Result<(), String> {
    let output = Command::new(bin())
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .map_err(|e| format!("cannot run vmsr: {e}"))?;
    if output.status.success() {
        Ok(())
    } else {
        Err(format!(
            "`vmsr {}` exited with {}: {}",
            args.join(" "),
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        ))
    }
}

const PIPELINE: [&str; 9] = [
    "gen-envs",
    "collect",
    "train-inverse",
    "label",
    "train-subroutines",
    "explore",
    "iou",
    "ablate",
    "hrl",
];

fn full_run(out: &Path) -> Result<(), String> {
    let done = out.join("hrl/point_goal_dense/manifest.json");
    if done.is_file() {
        eprintln!("reusing pipeline outputs in {}", out.display());
        return Ok(());
    }
    let cfg = config("acceptance.toml");
    for verb in PIPELINE {
        eprintln!("running vmsr {verb}");
        vmsr(&cfg, out, &[verb])?;
    }
    eprintln!("running vmsr hrl --reward dense");
    vmsr(&config("acceptance_dense.toml"), out, &["hrl"])
}

type Rows = Vec<HashMap<String, String>>;

fn read_csv(path: &Path) -> Result<Rows, String> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let headers = rd.headers().map_err(|e| e.to_string())?.clone();
    rd.records()
        .map(|r| {
            let r = r.map_err(|e| e.to_string())?;
            Ok(headers.iter().zip(r.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        })
        .collect()
}

fn num(row: &HashMap<String, String>, key: &str) -> Result<f64, String> {
    row.get(key)
        .ok_or_else(|| format!("missing column {key}"))?
        .parse()
        .map_err(|e| format!("column {key}: {e}"))
}

fn wall_time(run: &Path, rel: &str) -> Result<f64, String> {
    let path = run.join(rel).join("manifest.json");
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    v["wall_time_s"].as_f64().ok_or_else(|| format!("{} has no wall_time_s", path.display()))
}

fn metric(run: &Path, file: &str, name: &str) -> Result<f64, String> {
    let rows = read_csv(&run.join(file))?;
    let row = rows
        .iter()
        .find(|r| r.get("metric").map(String::as_str) == Some(name))
        .ok_or_else(|| format!("{file} has no {name}"))?;
    num(row, "value")
}

fn criterion_2(run: &Path) -> Result<Outcome, String> {
    let train = metric(run, "inverse/metrics.csv", "train_samples")?;
    let val = metric(run, "inverse/metrics.csv", "val_samples")?;
    let acc = metric(run, "inverse/metrics.csv", "eval_map_accuracy")?;
    let secs = wall_time(run, "inverse")?;
    Ok(outcome(
        train + val == 45_000.0 && acc >= 0.9 && secs < 300.0,
        format!("{} interaction samples, Eval-map accuracy {acc:.4} (>= 0.90), {secs:.0}s", train + val),
    ))
}

fn criterion_4(run: &Path) -> Result<Outcome, String> {
    let (synthetic, detail, synth_secs) = two_mode();
    let same = metric(run, "iou/iou.csv", "same_subroutine_iou")?;
    let cross = metric(run, "iou/iou.csv", "cross_subroutine_iou")?;
    let secs = synth_secs + wall_time(run, "subroutines")? + wall_time(run, "iou")?;
    Ok(outcome(
        synthetic && cross < same && secs < 600.0,
        format!("{detail}; N=4 IoU cross {cross:.3} < same {same:.3}; {secs:.0}s"),
    ))
}

const BASELINES: [&str; 3] = ["random", "forward_bias", "forward_rotate_on_collision"];
const METRICS: [&str; 3] = ["adt", "max_distance", "collision_rate"];

fn criterion_5(run: &Path) -> Result<Outcome, String> {
    let rows = read_csv(&run.join("explore/significance.csv"))?;
    let mut missing = Vec::new();
    let mut weak = Vec::new();
    for b in BASELINES {
        for m in METRICS {
            match rows.iter().find(|r| r["method"] == "vmsr" && r["baseline"] == b && r["metric"] == m) {
                None => missing.push(format!("{b}/{m}")),
                Some(r) => {
                    if r["better"] != "true" || num(r, "confidence")? < 0.95 {
                        weak.push(format!("{b}/{m} [{:.3}, {:.3}]", num(r, "lo")?, num(r, "hi")?));
                    }
                }
            }
        }
    }
    let summary = read_csv(&run.join("explore/summary.csv"))?;
    let starts = summary
        .iter()
        .find(|r| r["method"] == "vmsr")
        .map(|r| num(r, "n_starts"))
        .transpose()?
        .unwrap_or(0.0);
    let maps = read_csv(&run.join("explore/per_start.csv"))?
        .iter()
        .map(|r| r["map_id"].clone())
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    let secs = wall_time(run, "explore")?;
    let pass = missing.is_empty() && weak.is_empty() && maps >= 2 && starts >= 200.0 && secs < 1200.0;
    let mut detail = format!("{}/9 margins significant at 95%, {maps} Etest maps, {starts} starts, {secs:.0}s", 9 - missing.len() - weak.len());
    if !missing.is_empty() {
        detail += &format!("; missing {}", missing.join(" "));
    }
    if !weak.is_empty() {
        detail += &format!("; not significant {}", weak.join(" "));
    }
    Ok(outcome(pass, detail))
}

/// Per-start means keyed by `(map, start)`.
type Starts = BTreeMap<(u32, u32), f64>;

/// Per-start means of `metric`, keyed by value, then by method.
fn per_start(run: &Path, axis: &str, metric: &str) -> Result<BTreeMap<String, BTreeMap<String, Starts>>, String> {
    let rows = read_csv(&run.join(format!("ablate/{axis}/ablation_per_start.csv")))?;
    let mut out: BTreeMap<String, BTreeMap<String, Starts>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r["metric"] == metric) {
        let key = (num(r, "map_id")? as u32, num(r, "start_id")? as u32);
        out.entry(r["value"].clone()).or_default().entry(r["method"].clone()).or_default().insert(key, num(r, "mean")?);
    }
    Ok(out)
}

fn paired(a: &BTreeMap<(u32, u32), f64>, b: &BTreeMap<(u32, u32), f64>) -> Result<(Vec<f64>, Vec<f64>), String> {
    if a.keys().ne(b.keys()) {
        return Err("per-start samples are not paired".into());
    }
    Ok((a.values().copied().collect(), b.values().copied().collect()))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Non-inferiority of affordance sampling: the one-sided 95% upper bound of
/// `collision(affordance) - collision(uniform)` stays below a margin of 10%
/// of the uniform collision rate.
fn criterion_6(run: &Path) -> Result<Outcome, String> {
    let data = per_start(run, "affordance_vs_random", "collision_rate")?;
    let methods = data.values().next().ok_or("empty affordance ablation")?;
    let aff = methods.get("vmsr").ok_or("no affordance rows")?;
    let uni = methods.get("vmsr_uniform_z").ok_or("no uniform rows")?;
    let (a, u) = paired(aff, uni)?;
    let margin = 0.1 * mean(&u);
    let b = paired_bootstrap(&a, &u, BOOTSTRAP_RESAMPLES, 0.90, 0).map_err(|e| e.to_string())?;
    let pass = b.hi < margin;
    Ok(outcome(
        pass,
        format!(
            "collision affordance {:.4} vs uniform {:.4}, diff {:+.4}, 95% upper bound {:+.4} {} margin {margin:.4} ({} starts)",
            mean(&a),
            mean(&u),
            b.mean_diff,
            b.hi,
            if pass { "<" } else { ">=" },
            a.len()
        ),
    ))
}

fn criterion_7(run: &Path) -> Result<Outcome, String> {
    let data = per_start(run, "n_interaction_samples", "max_distance")?;
    let mut budgets: Vec<(usize, &Starts)> = data
        .iter()
        .map(|(v, m)| Ok((v.parse::<usize>().map_err(|e| e.to_string())?, m.get("vmsr").ok_or("no vmsr rows")?)))
        .collect::<Result<_, String>>()?;
    budgets.sort_by_key(|b| b.0);
    let grid: Vec<usize> = budgets.iter().map(|b| b.0).collect();
    if grid != [5_000, 15_000, 45_000, 90_000] {
        return Ok(failed(format!("unexpected budget grid {grid:?}")));
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for w in budgets.windows(2) {
        let (lo, hi) = paired(w[0].1, w[1].1)?;
        let b = paired_bootstrap(&hi, &lo, BOOTSTRAP_RESAMPLES, 0.95, 0).map_err(|e| e.to_string())?;
        let decrease = b.hi < 0.0;
        if w[0].0 < 45_000 {
            pass &= !decrease;
        }
        parts.push(format!("{}K {:.2} -> {}K {:.2} [{:+.2}, {:+.2}]", w[0].0 / 1000, mean(&lo), w[1].0 / 1000, mean(&hi), b.lo, b.hi));
    }
    let (m45, m90) = (mean(&paired(budgets[2].1, budgets[3].1)?.0), mean(&paired(budgets[2].1, budgets[3].1)?.1));
    let change = (m90 - m45).abs() / m45;
    pass &= change < 0.10;
    parts.push(format!("45K->90K change {:.1}% (< 10%)", 100.0 * change));
    Ok(outcome(pass, format!("max distance {}", parts.join(", "))))
}

fn criterion_8(run: &Path) -> Result<Outcome, String> {
    let rows = read_csv(&run.join("hrl/point_goal_sparse/ratio.csv"))?;
    let steps = |scheme: &str| -> Result<(Option<f64>, f64), String> {
        let r = rows.iter().find(|r| r["scheme"] == scheme).ok_or_else(|| format!("no {scheme} row"))?;
        Ok((r["median_steps"].parse().ok(), num(r, "seeds")?))
    };
    let (vmsr, vmsr_seeds) = steps("vmsr")?;
    let (random, random_seeds) = steps("random")?;
    let speedup = match (vmsr, random) {
        (Some(v), Some(r)) => Some(r / v),
        (Some(_), None) => Some(f64::INFINITY),
        _ => None,
    };
    let tele = read_csv(&run.join("hrl/point_goal_dense/telescoping.csv"))?;
    let mut tele_max: f64 = 0.0;
    let mut episodes = 0.0;
    for r in &tele {
        tele_max = tele_max.max(num(r, "max_telescoping_error")?);
        episodes += num(r, "episodes")?;
    }
    let secs = wall_time(run, "hrl/point_goal_sparse")? + wall_time(run, "hrl/point_goal_dense")?;
    let fmt = |s: Option<f64>| s.map_or("not reached".to_string(), |v| format!("{v:.0}"));
    Ok(outcome(
        vmsr_seeds >= 3.0 && random_seeds >= 3.0 && speedup.is_some_and(|s| s >= 1.5) && episodes > 0.0 && tele_max <= 1e-5 && secs < 1800.0,
        format!(
            "median steps to 0.8 success vmsr {} vs random {} over {vmsr_seeds} seeds (speedup {}, >= 1.5); dense telescoping max err {tele_max:.1e} over {episodes} episodes; {secs:.0}s",
            fmt(vmsr),
            fmt(random),
            speedup.map_or("n/a".into(), |s| if s.is_finite() { format!("{s:.2}x") } else { "inf".into() }),
        ),
    ))
}

// ---------------------------------------------------------------- criterion 9

fn csv_files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap().flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "csv") {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn criterion_9() -> Result<Outcome, String> {
    let cfg = config("tiny.toml");
    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    for d in &dirs {
        for verb in PIPELINE.iter().chain(&["report"]) {
            vmsr(&cfg, d.path(), &[verb])?;
        }
    }
    let (a, b) = (csv_files(dirs[0].path()), csv_files(dirs[1].path()));
    if a != b {
        return Ok(failed(format!("runs produced different CSV sets: {a:?} vs {b:?}")));
    }
    let differing: Vec<String> = a
        .iter()
        .filter(|rel| std::fs::read(dirs[0].path().join(rel)).ok() != std::fs::read(dirs[1].path().join(rel)).ok())
        .map(|rel| rel.display().to_string())
        .collect();
    Ok(outcome(
        differing.is_empty() && !a.is_empty(),
        if differing.is_empty() {
            format!("{} metric CSVs byte-identical across two end-to-end runs", a.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    ))
}

// ---------------------------------------------------------------------- main

const NAMES: [&str; 9] = [
    "gradient integrity",
    "inverse model accuracy",
    "geodesic and metric oracles",
    "subroutine separability",
    "exploration ordering",
    "affordance non-inferiority",
    "sample-budget ablation",
    "hrl sample efficiency",
    "determinism",
];

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).filter(|n| (1..=9).contains(n)).collect();
    let wanted = |n: usize| selected.is_empty() || selected.contains(&n);

    let needs_run = [2, 4, 5, 6, 7, 8].iter().any(|&n| wanted(n));
    let tmp;
    let run_dir = match std::env::var_os("VMSR_ACCEPTANCE_RUN") {
        Some(d) => PathBuf::from(d),
        None => {
            tmp = tempfile::tempdir().expect("temp dir");
            tmp.path().to_path_buf()
        }
    };
    let pipeline = if needs_run { full_run(&run_dir) } else { Ok(()) };
    let from_run = |f: fn(&Path) -> Result<Outcome, String>| match &pipeline {
        Ok(()) => f(&run_dir).unwrap_or_else(failed),
        Err(e) => failed(format!("pipeline failed: {e}")),
    };

    let mut all = true;
    for n in (1..=9).filter(|&n| wanted(n)) {
        let started = Instant::now();
        let o = match n {
            1 => criterion_1(),
            2 => from_run(criterion_2),
            3 => criterion_3(),
            4 => from_run(criterion_4),
            5 => from_run(criterion_5),
            6 => from_run(criterion_6),
            7 => from_run(criterion_7),
            8 => from_run(criterion_8),
            _ => criterion_9().unwrap_or_else(failed),
        };
        all &= o.pass;
        println!(
            "criterion {n} {}: {} ({}) [{:.1}s]",
            NAMES[n - 1],
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            started.elapsed().as_secs_f64()
        );
    }
    if !all {
        std::process::exit(1);
    }
}
