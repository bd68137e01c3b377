//! One function per verb. Each reads the manifests of its inputs, checks
//! their stage hashes against the current configuration and writes its
//! artifacts plus a manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use vmsr_core::eval::benchmark::{benchmark_starts, episode_seed_tags, run_episode};
use vmsr_core::eval::report::{format_table, per_start_rows, read_csv, summary_rows, svg_top_view, write_csv, SummaryRow};
use vmsr_core::eval::{
    ablation_rows, paired_bootstrap, run_ablation, run_exploration_benchmark, subroutine_iou, AblationAxis, AblationInputs, BenchmarkResult, Entry, Method,
};
use vmsr_core::hrl::curves::{read_curves_csv, write_curves_csv, write_ratio_csv, NOT_REACHED};
use vmsr_core::hrl::{
    compare_sample_efficiency, init_flat_policy, init_hierarchical_policy, init_seed, make_task, train_a2c, FlatInit, HierarchicalPolicy, InitSources,
    LearningCurve, TaskSpec, TrainReport,
};
use vmsr_core::nn::checkpoint;
use vmsr_core::pipeline::labeling::{load_labeled, save_labeled};
use vmsr_core::pipeline::{collect_interaction_data, CollectSpec};
use vmsr_core::rng::{derive_seed, rng_from, tag};
use vmsr_core::sim::generate_maze;
use vmsr_core::workflow::{collect_stage, inverse_stage, label_stage, stage_seed, subroutine_stage, video_stage};
use vmsr_core::{
    BaselineKind, Bundle, InitScheme, InteractionDataset, InverseModel, LatentSource, MazeMap, Metric, RewardMode, SubroutineModel, TaskKind,
    VideoDataset,
};

use crate::artifacts::{chain_hash, write_json, InputRef, Layout, Manifest, Recorder, Stage, MANIFEST_FILE};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::plots::{line_chart, Series};

/// Rows of the exploration table, in order.
pub const TABLE_METHODS: [&str; 4] = ["vmsr", "random", "forward_bias", "forward_rotate_on_collision"];
pub const BOOTSTRAP_RESAMPLES: usize = 10_000;

/// The configuration as seen by one command.
pub struct Ctx {
    pub cfg: RunConfig,
    pub seed: u64,
    pub layout: Layout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub value: f64,
}

fn metric(name: &str, value: f64) -> MetricRow {
    MetricRow { metric: name.into(), value }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceRow {
    pub method: String,
    pub baseline: String,
    pub metric: String,
    /// Mean over starts of `method − baseline`.
    pub mean_diff: f64,
    pub lo: f64,
    pub hi: f64,
    pub confidence: f64,
    /// The interval excludes zero on the side favoring `method`.
    pub better: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationStartRow {
    pub axis: String,
    pub value: String,
    pub method: String,
    pub map_id: usize,
    pub start_id: usize,
    pub metric: String,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelescopingRow {
    pub scheme: String,
    pub seed: u64,
    pub episodes: usize,
    pub env_steps: u64,
    pub max_telescoping_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HrlOptions {
    pub task: Option<TaskKind>,
    pub reward: Option<RewardMode>,
    pub flat: bool,
    pub freeze: bool,
}

impl Ctx {
    /// Applies the command-line overrides; `cfg` becomes the effective
    /// configuration.
    pub fn new(mut cfg: RunConfig, seed: Option<u64>, out: Option<PathBuf>) -> Self {
        let seed = seed.unwrap_or(cfg.seed);
        let root = out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("runs"));
        cfg.seed = seed;
        cfg.out = Some(root.clone());
        Ctx {
            cfg,
            seed,
            layout: Layout::new(root),
        }
    }

    fn stage_dir(&self, stage: Stage) -> Result<PathBuf, CliError> {
        self.layout.create(Path::new(stage.dir()))
    }

    // Stage hashes. Each covers the settings its stage reads plus the
    // hashes of its inputs, so a change anywhere upstream invalidates it.

    pub fn h_envs(&self) -> String {
        let c = &self.cfg;
        chain_hash("envs", &(&c.splits, &c.maze, &c.hrl.point_goal_map, &c.hrl.area_goal_map), &[])
    }

    /// Interaction collection covers the default budget and the largest
    /// sample budget of the ablation.
    pub fn collect_spec(&self) -> CollectSpec {
        let base = self.cfg.pipeline.collect;
        let per = base.steps_per_start.max(1);
        let need = self.cfg.ablation.max_budget().div_ceil(per);
        CollectSpec {
            n_starts: base.n_starts.max(need),
            ..base
        }
    }

    pub fn default_budget(&self) -> usize {
        let c = self.cfg.pipeline.collect;
        c.n_starts * c.steps_per_start
    }

    pub fn h_collect(&self) -> String {
        let p = &self.cfg.pipeline;
        chain_hash("collect", &(self.seed, &p.agent, self.collect_spec(), &p.videos), &[&self.h_envs()])
    }

    pub fn h_inverse(&self) -> String {
        let p = &self.cfg.pipeline;
        chain_hash(
            "inverse",
            &(self.seed, &p.collect, &p.inverse, self.cfg.eval.inverse_test_starts),
            &[&self.h_collect()],
        )
    }

    pub fn h_labels(&self) -> String {
        chain_hash("labels", &(), &[&self.h_inverse()])
    }

    pub fn h_subroutines(&self) -> String {
        let p = &self.cfg.pipeline;
        chain_hash(
            "subroutines",
            &(self.seed, p.horizon, p.clip_stride, p.n_subroutines, &p.subroutines),
            &[&self.h_labels()],
        )
    }

    pub fn h_explore(&self, vmsr: bool) -> String {
        let e = &self.cfg.eval;
        let sub = if vmsr { self.h_subroutines() } else { String::new() };
        chain_hash("explore", &(self.seed, &e.benchmark, e.svg_runs, vmsr), &[&self.h_envs(), &sub])
    }

    pub fn h_iou(&self) -> String {
        chain_hash("iou", &(self.seed, &self.cfg.eval.iou), &[&self.h_subroutines()])
    }

    pub fn h_ablate(&self, axis: AblationAxis) -> String {
        chain_hash(
            "ablate",
            &(self.seed, axis, self.cfg.ablation.grid(axis), &self.cfg.eval.benchmark),
            &[&self.h_subroutines()],
        )
    }

    fn hrl_needs_bundle(&self, flat: bool) -> bool {
        flat || self.cfg.hrl.schemes.iter().any(|s| *s != InitScheme::Random)
    }

    pub fn h_hrl(&self, kind: TaskKind, reward: RewardMode, flat: bool, freeze: bool) -> String {
        let mut hrl = self.cfg.hrl.clone();
        hrl.task = kind;
        hrl.reward = reward;
        hrl.flat = flat;
        hrl.a2c.freeze_subpolicies = freeze;
        let sub = if self.hrl_needs_bundle(flat) { self.h_subroutines() } else { String::new() };
        chain_hash("hrl", &(self.seed, &hrl), &[&self.h_envs(), &sub])
    }

    // Loading artifacts.

    fn split_path(&self, split: &str, seed: u64) -> PathBuf {
        self.layout.dir(Stage::Envs).join(split).join(format!("map_{seed}.maze"))
    }

    fn hrl_map_path(&self, kind: TaskKind) -> PathBuf {
        self.layout.dir(Stage::Envs).join("hrl").join(format!("{}.maze", task_name(kind)))
    }

    fn load_map(path: &Path) -> Result<MazeMap, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| vmsr_core::Error::io(path, e))?;
        Ok(MazeMap::from_text(&text)?)
    }

    pub fn load_split(&self, split: &str) -> Result<(Vec<MazeMap>, InputRef), CliError> {
        let (_, r) = self.layout.require(Stage::Envs, &self.h_envs())?;
        let s = self
            .cfg
            .splits
            .named()
            .into_iter()
            .find(|(n, _)| *n == split)
            .map(|(_, s)| s)
            .expect("known split");
        let maps = s.seeds().map(|seed| Self::load_map(&self.split_path(split, seed))).collect::<Result<Vec<_>, _>>()?;
        Ok((maps, r))
    }

    pub fn load_interaction(&self) -> Result<(InteractionDataset, InputRef), CliError> {
        let (_, r) = self.layout.require(Stage::Collect, &self.h_collect())?;
        let data = InteractionDataset::load(&self.layout.dir(Stage::Collect).join("interaction.bin"))?;
        Ok((data, r))
    }

    pub fn load_videos(&self) -> Result<(VideoDataset, InputRef), CliError> {
        let (_, r) = self.layout.require(Stage::Collect, &self.h_collect())?;
        let videos = VideoDataset::load(&self.layout.dir(Stage::Collect).join("videos"))?;
        Ok((videos, r))
    }

    pub fn load_inverse(&self) -> Result<(InverseModel, InputRef), CliError> {
        let (_, r) = self.layout.require(Stage::Inverse, &self.h_inverse())?;
        let params = checkpoint::load(&self.layout.dir(Stage::Inverse).join("inverse.ckpt"))?;
        Ok((InverseModel::from_params(params)?, r))
    }

    /// The subroutine checkpoint, refused when its architecture differs from
    /// the configured one.
    pub fn load_subroutines(&self) -> Result<(SubroutineModel, InputRef), CliError> {
        let (m, r) = self.layout.require(Stage::Subroutines, &self.h_subroutines())?;
        let arch = self.cfg.pipeline.arch();
        let want = chain_hash("arch", &arch, &[]);
        if m.extra.get("arch_hash").and_then(|v| v.as_str()) != Some(want.as_str()) {
            return Err(CliError::Config(format!(
                "subroutine checkpoint architecture differs from the configured {arch:?}"
            )));
        }
        let params = checkpoint::load(&self.layout.dir(Stage::Subroutines).join("subroutines.ckpt"))?;
        Ok((SubroutineModel::from_params(arch, params)?, r))
    }

    pub fn load_bundle(&self) -> Result<(Bundle, Vec<InputRef>), CliError> {
        let (inverse, ri) = self.load_inverse()?;
        let (subroutines, rs) = self.load_subroutines()?;
        Ok((Bundle { inverse, subroutines }, vec![ri, rs]))
    }
}

pub fn task_name(kind: TaskKind) -> &'static str {
    match kind {
        TaskKind::PointGoal => "point_goal",
        TaskKind::AreaGoal => "area_goal",
    }
}

pub fn reward_name(mode: RewardMode) -> &'static str {
    match mode {
        RewardMode::Sparse => "sparse",
        RewardMode::Dense => "dense",
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| vmsr_core::Error::io(path, e).into())
}

pub fn gen_envs(ctx: &Ctx) -> Result<Manifest, CliError> {
    let cfg = &ctx.cfg;
    let dir = ctx.stage_dir(Stage::Envs)?;
    let mut rec = Recorder::start(dir.clone());
    let mut counts = serde_json::Map::new();
    for (name, split) in cfg.splits.named() {
        ctx.layout.create(&Path::new(Stage::Envs.dir()).join(name))?;
        for seed in split.seeds() {
            let map = generate_maze(seed, &cfg.maze)?;
            write_text(&rec.path(&format!("{name}/map_{seed}.maze")), &map.to_text())?;
        }
        counts.insert(name.into(), json!(split.count));
    }
    // Goal tasks run on smaller layouts seeded from the Etest range.
    ctx.layout.create(&Path::new(Stage::Envs.dir()).join("hrl"))?;
    for kind in [TaskKind::PointGoal, TaskKind::AreaGoal] {
        let map = generate_maze(cfg.splits.etest.seed_start, &cfg.hrl.map_spec(kind))?;
        write_text(&rec.path(&format!("hrl/{}.maze", task_name(kind))), &map.to_text())?;
    }
    rec.finish(Stage::Envs.command(), ctx.seed, ctx.h_envs(), Vec::new(), json!({ "maps": counts }))
}

pub fn collect(ctx: &Ctx) -> Result<Manifest, CliError> {
    let (einv, r_envs) = ctx.load_split("einv")?;
    let (evideo, _) = ctx.load_split("evideo")?;
    let dir = ctx.stage_dir(Stage::Collect)?;
    let mut rec = Recorder::start(dir.clone());
    let mut spec = ctx.cfg.pipeline.clone();
    spec.collect = ctx.collect_spec();
    let data = collect_stage(&spec, &einv, ctx.seed)?;
    data.save(&rec.path("interaction.bin"))?;
    let videos = video_stage(&spec, &evideo, ctx.seed)?;
    let vdir = ctx.layout.create(&Path::new(Stage::Collect.dir()).join("videos"))?;
    videos.save(&vdir)?;
    rec.path("videos/videos.bin");
    rec.path("videos/videos.json");
    let extra = json!({
        "interaction_samples": data.len(),
        "default_budget": ctx.default_budget(),
        "videos": videos.clips.len(),
    });
    rec.finish(Stage::Collect.command(), ctx.seed, ctx.h_collect(), vec![r_envs], extra)
}

pub fn train_inverse(ctx: &Ctx) -> Result<Manifest, CliError> {
    let (pool, r_collect) = ctx.load_interaction()?;
    let (eval_maps, _) = ctx.load_split("eval")?;
    let n = ctx.default_budget();
    if pool.len() < n {
        return Err(CliError::Config(format!("collected {} samples, the inverse model needs {n}", pool.len())));
    }
    let data = pool.truncated(n);
    let dir = ctx.stage_dir(Stage::Inverse)?;
    let mut rec = Recorder::start(dir);
    let (model, report) = inverse_stage(&ctx.cfg.pipeline, &data, ctx.seed)?;
    let test_spec = CollectSpec {
        n_starts: ctx.cfg.eval.inverse_test_starts,
        ..ctx.cfg.pipeline.collect
    };
    let test = collect_interaction_data(&eval_maps, &test_spec, &ctx.cfg.pipeline.agent, stage_seed(ctx.seed, "inverse-test"))?;
    let test_accuracy = model.accuracy(&test)?;
    checkpoint::save(&model.params, &rec.path("inverse.ckpt"))?;
    write_json(&rec.path("report.json"), &report)?;
    let rows = vec![
        metric("train_samples", report.train_samples as f64),
        metric("val_samples", report.val_samples as f64),
        metric("val_accuracy", report.val_accuracy),
        metric("eval_map_samples", test.len() as f64),
        metric("eval_map_accuracy", test_accuracy),
    ];
    write_csv(&rec.path("metrics.csv"), &rows)?;
    let extra = json!({ "val_accuracy": report.val_accuracy, "eval_map_accuracy": test_accuracy });
    rec.finish(Stage::Inverse.command(), ctx.seed, ctx.h_inverse(), vec![r_collect], extra)
}

pub fn label(ctx: &Ctx) -> Result<Manifest, CliError> {
    let (inverse, r_inv) = ctx.load_inverse()?;
    let (videos, r_collect) = ctx.load_videos()?;
    let dir = ctx.stage_dir(Stage::Labels)?;
    let mut rec = Recorder::start(dir.clone());
    let (labeled, stats) = label_stage(&inverse, &videos)?;
    save_labeled(&labeled, &videos, &dir)?;
    rec.path("labeled.bin");
    rec.path("labeled.json");
    let names = ["stay", "rotate_left", "rotate_right", "forward"];
    let rows: Vec<MetricRow> = names
        .iter()
        .zip(stats.fractions)
        .map(|(n, f)| metric(&format!("fraction_{n}"), f))
        .chain([metric("labels", stats.total as f64)])
        .collect();
    write_csv(&rec.path("label_stats.csv"), &rows)?;
    rec.finish(Stage::Labels.command(), ctx.seed, ctx.h_labels(), vec![r_inv, r_collect], json!(stats))
}

pub fn train_subroutines(ctx: &Ctx) -> Result<Manifest, CliError> {
    let (_, r_labels) = ctx.layout.require(Stage::Labels, &ctx.h_labels())?;
    let labeled = load_labeled(&ctx.layout.dir(Stage::Labels))?;
    let dir = ctx.stage_dir(Stage::Subroutines)?;
    let mut rec = Recorder::start(dir);
    let (model, report) = subroutine_stage(&ctx.cfg.pipeline, &labeled, ctx.seed)?;
    checkpoint::save(&model.params, &rec.path("subroutines.ckpt"))?;
    write_json(&rec.path("report.json"), &report)?;
    let mut rows = vec![metric("clips", report.clips as f64)];
    if let Some(e) = report.epochs.last() {
        rows.extend([
            metric("loss", e.loss),
            metric("action_loss", e.action_loss),
            metric("affordance_loss", e.affordance_loss),
            metric("accuracy", e.accuracy),
            metric("tau", e.tau),
        ]);
        rows.extend(e.z_counts.iter().enumerate().map(|(z, &c)| metric(&format!("z_count_{z}"), c as f64)));
    }
    write_csv(&rec.path("metrics.csv"), &rows)?;
    if let Some(w) = &report.collapse_warning {
        eprintln!("warning: {w}");
    }
    let extra = json!({
        "arch": model.arch,
        "arch_hash": chain_hash("arch", &model.arch, &[]),
        "collapse_warning": report.collapse_warning,
    });
    rec.finish(Stage::Subroutines.command(), ctx.seed, ctx.h_subroutines(), vec![r_labels], extra)
}

/// Paired bootstraps of `method` against every baseline, per metric.
pub fn significance(result: &BenchmarkResult, method: &str, baselines: &[&str], seed: u64) -> Result<Vec<SignificanceRow>, CliError> {
    let mut rows = Vec::new();
    for (i, b) in baselines.iter().enumerate() {
        for (j, m) in Metric::ALL.into_iter().enumerate() {
            let a = result.per_start(method, m);
            let bb = result.per_start(b, m);
            let boot = paired_bootstrap(&a, &bb, BOOTSTRAP_RESAMPLES, 0.95, derive_seed(seed, &[tag("significance"), i as u64, j as u64]))?;
            let better = if m.lower_is_better() { boot.hi < 0.0 } else { boot.lo > 0.0 };
            rows.push(SignificanceRow {
                method: method.into(),
                baseline: b.to_string(),
                metric: m.name().into(),
                mean_diff: boot.mean_diff,
                lo: boot.lo,
                hi: boot.hi,
                confidence: boot.confidence,
                better,
            });
        }
    }
    Ok(rows)
}

pub fn explore(ctx: &Ctx, baselines_only: bool) -> Result<Manifest, CliError> {
    let (maps, r_envs) = ctx.load_split("etest")?;
    let mut inputs = vec![r_envs];
    let model = if baselines_only {
        None
    } else {
        let (m, r) = ctx.load_subroutines()?;
        inputs.push(r);
        Some(m)
    };
    let dir = ctx.stage_dir(Stage::Explore)?;
    let mut rec = Recorder::start(dir);
    let mut entries = Vec::new();
    if let Some(m) = &model {
        entries.push(Entry {
            method: Method::Vmsr(LatentSource::Affordance),
            model: Some(m),
            n_samples: ctx.default_budget(),
        });
    }
    entries.extend(BaselineKind::ALL.into_iter().map(|k| Entry {
        method: Method::Baseline(k),
        model: None,
        n_samples: 0,
    }));
    let bench = ctx.cfg.eval.benchmark;
    let agent = &ctx.cfg.pipeline.agent;
    let seed = stage_seed(ctx.seed, "explore");
    let result = run_exploration_benchmark(&entries, &maps, &bench, agent, seed)?;
    let summary = summary_rows(&result.summary());
    write_csv(&rec.path("summary.csv"), &summary)?;
    write_csv(&rec.path("per_start.csv"), &per_start_rows(&result))?;
    write_text(&rec.path("table.txt"), &format_table(&summary, &TABLE_METHODS))?;
    if model.is_some() {
        let baselines: Vec<&str> = BaselineKind::ALL.iter().map(|k| k.name()).collect();
        write_csv(&rec.path("significance.csv"), &significance(&result, "vmsr", &baselines, seed)?)?;
    }
    // Top views of the first start of the first map, replaying the
    // benchmark's own episodes.
    if let Some(map) = maps.first() {
        let start = benchmark_starts(&maps[..1], 1, agent, seed)[0][0];
        for e in &entries {
            let runs = (0..ctx.cfg.eval.svg_runs.min(bench.runs_per_start))
                .map(|run| {
                    let mut rng = rng_from(seed, &episode_seed_tags(0, 0, run));
                    run_episode(e, map, start, &bench, agent, &mut rng)
                })
                .collect::<Result<Vec<_>, _>>()?;
            write_text(&rec.path(&format!("topview_{}.svg", e.method.name())), &svg_top_view(map, &runs, 4.0))?;
        }
    }
    let hash = ctx.h_explore(!baselines_only);
    rec.finish(Stage::Explore.command(), ctx.seed, hash, inputs, json!({ "methods": result.methods }))
}

pub fn iou(ctx: &Ctx) -> Result<Manifest, CliError> {
    let (model, r_sub) = ctx.load_subroutines()?;
    let (maps, r_envs) = ctx.load_split("eval")?;
    let dir = ctx.stage_dir(Stage::Iou)?;
    let mut rec = Recorder::start(dir);
    let result = subroutine_iou(&model, &maps, &ctx.cfg.eval.iou, &ctx.cfg.pipeline.agent, stage_seed(ctx.seed, "iou"))?;
    let rows = vec![metric("same_subroutine_iou", result.same_mean), metric("cross_subroutine_iou", result.cross_mean)];
    write_csv(&rec.path("iou.csv"), &rows)?;
    write_csv(&rec.path("iou_per_start.csv"), &result.per_start)?;
    for (s, per_z) in result.examples.iter().take(3).enumerate() {
        let all: Vec<_> = per_z.iter().flatten().cloned().collect();
        write_text(&rec.path(&format!("subroutines_start{s}.svg")), &svg_top_view(&maps[0], &all, 4.0))?;
    }
    let extra = json!({ "same_mean": result.same_mean, "cross_mean": result.cross_mean });
    rec.finish(Stage::Iou.command(), ctx.seed, ctx.h_iou(), vec![r_sub, r_envs], extra)
}

pub fn ablate(ctx: &Ctx, axes: &[AblationAxis]) -> Result<Vec<Manifest>, CliError> {
    let axes = if axes.is_empty() { ctx.cfg.ablation.axes.clone() } else { axes.to_vec() };
    let (pool, r_collect) = ctx.load_interaction()?;
    let (videos, _) = ctx.load_videos()?;
    let (maps, r_envs) = ctx.load_split("etest")?;
    let (bundle, r_bundle) = ctx.load_bundle()?;
    let mut out = Vec::new();
    for axis in axes {
        let rel = Path::new(Stage::Ablate.dir()).join(axis.name());
        let dir = ctx.layout.create(&rel)?;
        let mut rec = Recorder::start(dir);
        let inputs = AblationInputs {
            spec: &ctx.cfg.pipeline,
            interaction: &pool,
            videos: &videos,
            eval_maps: &maps,
            bench: ctx.cfg.eval.benchmark,
            seed: ctx.seed,
            default_bundle: Some(&bundle),
        };
        let result = run_ablation(axis, &ctx.cfg.ablation.grid(axis), &inputs)?;
        write_csv(&rec.path("ablation.csv"), &ablation_rows(&result))?;
        let mut per_start = Vec::new();
        for p in &result.points {
            for r in per_start_rows(&p.result) {
                per_start.push(AblationStartRow {
                    axis: axis.name().into(),
                    value: p.value.clone(),
                    method: r.method,
                    map_id: r.map_id,
                    start_id: r.start_id,
                    metric: r.metric,
                    mean: r.value,
                });
            }
        }
        write_csv(&rec.path("ablation_per_start.csv"), &per_start)?;
        let mut inputs = vec![r_collect.clone(), r_envs.clone()];
        inputs.extend(r_bundle.iter().cloned());
        out.push(rec.finish(Stage::Ablate.command(), ctx.seed, ctx.h_ablate(axis), inputs, json!({ "axis": axis.name() }))?);
    }
    Ok(out)
}

fn dump_failed(dir: &Path, label: &str, seed: u64, policy: &HierarchicalPolicy) -> Result<PathBuf, CliError> {
    let path = dir.join(format!("failed_{label}_seed{seed}.ckpt"));
    checkpoint::save(&policy.params, &path)?;
    Ok(path)
}

fn run_one(
    policy: &mut HierarchicalPolicy,
    task: &vmsr_core::hrl::Task,
    hyper: &vmsr_core::A2cHyper,
    run_seed: u64,
    label: &str,
    seed: u64,
    dir: &Path,
) -> Result<TrainReport, CliError> {
    match train_a2c(policy, task, hyper, run_seed, label) {
        Ok(mut r) => {
            r.curve.seed = seed;
            Ok(r)
        }
        Err(vmsr_core::Error::Numerical(m)) => {
            let path = dump_failed(dir, label, seed, policy)?;
            Err(CliError::Numerical(format!("{label} seed {seed}: {m}; last finite parameters in {}", path.display())))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn hrl(ctx: &Ctx, opts: HrlOptions) -> Result<Manifest, CliError> {
    let cfg = &ctx.cfg.hrl;
    let kind = opts.task.unwrap_or(cfg.task);
    let reward = opts.reward.unwrap_or(cfg.reward);
    let flat = opts.flat || cfg.flat;
    let freeze = opts.freeze || cfg.a2c.freeze_subpolicies;
    let (_, r_envs) = ctx.layout.require(Stage::Envs, &ctx.h_envs())?;
    let map = Ctx::load_map(&ctx.hrl_map_path(kind))?;
    let mut inputs = vec![r_envs];
    let bundle = if ctx.hrl_needs_bundle(flat) {
        let (b, r) = ctx.load_bundle()?;
        inputs.extend(r);
        Some(b)
    } else {
        None
    };
    let rel = PathBuf::from("hrl").join(format!("{}_{}", task_name(kind), reward_name(reward)));
    let dir = ctx.layout.create(&rel)?;
    let mut rec = Recorder::start(dir.clone());
    let spec = TaskSpec {
        kind,
        reward,
        map_id: map.seed(),
        seed: stage_seed(ctx.seed, "hrl-task"),
        max_steps: cfg.max_steps,
    };
    let agent = &ctx.cfg.pipeline.agent;
    let task = make_task(spec, map, agent)?;
    let hyper = vmsr_core::A2cHyper {
        freeze_subpolicies: freeze,
        ..cfg.a2c.clone()
    };
    let arch = ctx.cfg.pipeline.arch();
    let sources = InitSources {
        subroutines: bundle.as_ref().map(|b| &b.subroutines),
        inverse: bundle.as_ref().map(|b| &b.inverse),
    };
    let run_seed = |s: u64| derive_seed(ctx.seed, &[tag("hrl-run"), s]);
    let mut reports = Vec::new();
    for &scheme in &cfg.schemes {
        for &s in &cfg.seeds {
            let mut policy = init_hierarchical_policy(scheme, &arch, sources, cfg.interval, init_seed(run_seed(s)))?;
            reports.push(run_one(&mut policy, &task, &hyper, run_seed(s), scheme.name(), s, &dir)?);
        }
    }
    if flat {
        let mut single_spec = ctx.cfg.pipeline.clone();
        single_spec.n_subroutines = 1;
        let labeled = load_labeled(&ctx.layout.dir(Stage::Labels))?;
        let (single, _) = subroutine_stage(&single_spec, &labeled, ctx.seed)?;
        let single_arch = single_spec.arch();
        for init in [FlatInit::VmsrSingleSubroutine, FlatInit::Random] {
            for &s in &cfg.seeds {
                let mut policy = init_flat_policy(init, Some(&single), &single_arch, cfg.interval, init_seed(run_seed(s)))?;
                reports.push(run_one(&mut policy, &task, &hyper, run_seed(s), init.name(), s, &dir)?);
            }
        }
    }
    let curves: Vec<LearningCurve> = reports.iter().map(|r| r.curve.clone()).collect();
    write_curves_csv(&curves, &rec.path("curves.csv"))?;
    let reference = if cfg.schemes.contains(&InitScheme::Vmsr) {
        InitScheme::Vmsr.name()
    } else {
        cfg.schemes[0].name()
    };
    let ratios = compare_sample_efficiency(&curves, cfg.success_threshold, reference)?;
    write_ratio_csv(&ratios, &rec.path("ratio.csv"))?;
    let tel: Vec<TelescopingRow> = reports
        .iter()
        .map(|r| TelescopingRow {
            scheme: r.curve.scheme.clone(),
            seed: r.curve.seed,
            episodes: r.episodes,
            env_steps: r.env_steps,
            max_telescoping_error: r.max_telescoping_error,
        })
        .collect();
    write_csv(&rec.path("telescoping.csv"), &tel)?;
    let max_tel = tel.iter().map(|t| t.max_telescoping_error).fold(0.0, f64::max);
    let extra = json!({
        "task": task_name(kind),
        "reward": reward_name(reward),
        "freeze_subpolicies": freeze,
        "max_telescoping_error": max_tel,
    });
    rec.finish("hrl", ctx.seed, ctx.h_hrl(kind, reward, flat, freeze), inputs, extra)
}

/// Collates whatever results exist into `report/`. Mixing master seeds is
/// refused unless `force`.
pub fn report(ctx: &Ctx, force: bool) -> Result<Manifest, CliError> {
    let root = &ctx.layout.root;
    let mut found: Vec<(PathBuf, Manifest, InputRef)> = Vec::new();
    let mut rels: Vec<PathBuf> = [Stage::Explore, Stage::Iou].iter().map(|s| PathBuf::from(s.dir())).collect();
    for parent in [Stage::Ablate.dir(), "hrl"] {
        if let Ok(rd) = std::fs::read_dir(root.join(parent)) {
            let mut subs: Vec<PathBuf> = rd.filter_map(|e| e.ok()).filter(|e| e.path().is_dir()).map(|e| Path::new(parent).join(e.file_name())).collect();
            subs.sort();
            rels.extend(subs);
        }
    }
    for rel in rels {
        if root.join(&rel).join(MANIFEST_FILE).is_file() {
            let (m, r) = ctx.layout.read_manifest(&rel, "report")?;
            found.push((rel, m, r));
        }
    }
    let seeds: Vec<u64> = found.iter().map(|(_, m, _)| m.seed).collect();
    if !force && seeds.windows(2).any(|w| w[0] != w[1]) {
        let list: Vec<String> = found.iter().map(|(rel, m, _)| format!("{} (seed {})", rel.display(), m.seed)).collect();
        return Err(CliError::Config(format!(
            "results come from different master seeds: {}; pass --force to report anyway",
            list.join(", ")
        )));
    }
    let dir = ctx.stage_dir(Stage::Report)?;
    let mut rec = Recorder::start(dir);
    let mut text = String::new();
    text.push_str("Exploration benchmark\n");
    let explore_csv = root.join(Stage::Explore.dir()).join("summary.csv");
    let summary: Vec<SummaryRow> = if found.iter().any(|(rel, _, _)| rel == Path::new(Stage::Explore.dir())) {
        read_csv(&explore_csv)?
    } else {
        Vec::new()
    };
    text.push_str(&format_table(&summary, &TABLE_METHODS));
    write_csv(&rec.path("exploration_summary.csv"), &summary)?;
    let sig_path = root.join(Stage::Explore.dir()).join("significance.csv");
    if !summary.is_empty() && sig_path.is_file() {
        let sig: Vec<SignificanceRow> = read_csv(&sig_path)?;
        text.push_str("\nvmsr against baselines (95% paired bootstrap over starts)\n");
        for s in &sig {
            text.push_str(&format!(
                "  {:<28} {:<15} diff {:>9.4} [{:>9.4}, {:>9.4}] {}\n",
                s.baseline,
                s.metric,
                s.mean_diff,
                s.lo,
                s.hi,
                if s.better { "better" } else { "not significant" }
            ));
        }
    }
    for (rel, _, _) in &found {
        let r = rel.to_string_lossy().to_string();
        if r == Stage::Iou.dir() {
            let rows: Vec<MetricRow> = read_csv(&root.join(rel).join("iou.csv"))?;
            text.push_str("\nSubroutine coverage IoU\n");
            for m in rows {
                text.push_str(&format!("  {:<28} {:.4}\n", m.metric, m.value));
            }
        } else if r.starts_with(Stage::Ablate.dir()) {
            let rows: Vec<vmsr_core::eval::AblationRow> = read_csv(&root.join(rel).join("ablation.csv"))?;
            let axis = rel.file_name().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
            text.push_str(&format!("\nAblation: {axis}\n"));
            text.push_str(&format!("  {:<22} {:<16} {:>10} {:>12} {:>14}\n", "value", "method", "ADT (m)", "Max dist (m)", "Collision (%)"));
            let mut keys: Vec<(String, String)> = Vec::new();
            for row in &rows {
                let k = (row.value.clone(), row.method.clone());
                if !keys.contains(&k) {
                    keys.push(k);
                }
            }
            for (value, method) in &keys {
                let get = |m: Metric| rows.iter().find(|r| &r.value == value && &r.method == method && r.metric == m.name()).map_or(f64::NAN, |r| r.mean);
                text.push_str(&format!(
                    "  {:<22} {:<16} {:>10.2} {:>12.2} {:>14.1}\n",
                    value,
                    method,
                    get(Metric::Adt),
                    get(Metric::MaxDistance),
                    get(Metric::CollisionRate) * 100.0
                ));
            }
            if axis != AblationAxis::AffordanceVsRandom.name() {
                let series: Vec<Series> = [Metric::MaxDistance]
                    .into_iter()
                    .map(|m| Series {
                        name: m.name().into(),
                        points: keys
                            .iter()
                            .filter_map(|(v, method)| {
                                let x: f64 = v.parse().ok()?;
                                rows.iter().find(|r| &r.value == v && &r.method == method && r.metric == m.name()).map(|r| (x, r.mean))
                            })
                            .collect(),
                    })
                    .collect();
                write_text(&rec.path(&format!("ablation_{axis}.svg")), &line_chart(&format!("Ablation: {axis}"), &axis, "max distance (m)", &series))?;
            }
        } else if r.starts_with("hrl") {
            let name = rel.file_name().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
            let ratio_text = std::fs::read_to_string(root.join(rel).join("ratio.csv")).map_err(|e| vmsr_core::Error::io(root.join(rel), e))?;
            text.push_str(&format!("\nHRL sample efficiency: {name} (\"{NOT_REACHED}\" = threshold never reached)\n"));
            for line in ratio_text.lines() {
                text.push_str(&format!("  {line}\n"));
            }
            let curves = read_curves_csv(&root.join(rel).join("curves.csv"))?;
            let mut schemes: Vec<String> = Vec::new();
            for c in &curves {
                if !schemes.contains(&c.scheme) {
                    schemes.push(c.scheme.clone());
                }
            }
            let mean_curve = |scheme: &str, f: &dyn Fn(&LearningCurve) -> Vec<f64>| -> Vec<(f64, f64)> {
                let cs: Vec<&LearningCurve> = curves.iter().filter(|c| c.scheme == scheme).collect();
                let ys: Vec<Vec<f64>> = cs.iter().map(|c| f(c)).collect();
                let len = ys.iter().map(Vec::len).min().unwrap_or(0);
                (0..len)
                    .map(|i| (cs[0].points[i].env_steps as f64, ys.iter().map(|y| y[i]).sum::<f64>() / ys.len() as f64))
                    .collect()
            };
            let reward: Vec<Series> = schemes
                .iter()
                .map(|s| Series { name: s.clone(), points: mean_curve(s, &|c| c.monotone_reward()) })
                .collect();
            let success: Vec<Series> = schemes
                .iter()
                .map(|s| Series {
                    name: s.clone(),
                    points: mean_curve(s, &|c| c.points.iter().map(|p| p.success_rate).collect()),
                })
                .collect();
            write_text(&rec.path(&format!("hrl_{name}_reward.svg")), &line_chart(&format!("{name}: reward"), "environment steps", "mean episode reward (running max)", &reward))?;
            write_text(&rec.path(&format!("hrl_{name}_success.svg")), &line_chart(&format!("{name}: success"), "environment steps", "success rate", &success))?;
        }
    }
    write_text(&rec.path("table.txt"), &text)?;
    print!("{text}");
    let inputs = found.into_iter().map(|(_, _, r)| r).collect();
    rec.finish(Stage::Report.command(), ctx.seed, String::new(), inputs, serde_json::Value::Null)
}
