//! Synchronous advantage actor-critic at the meta level.
//!
//! A meta transition is one window: the meta-controller picks `z` at state
//! `s`, subroutine `z` runs for up to `interval` steps, and the window reward
//! is `R = Σ_i γ^i r_i`. Returns chain as `G = R + γ^len · G'`, bootstrapped
//! from the value head at segment ends and on step-cap truncation. Each
//! window contributes
//!
//! ```text
//! −A log π(z|s) − β H(π(·|s)) + c ½ (V(s) − G)²  −  A Σ_i log π_sub(a_i) − β Σ_i H(π_sub)
//! ```
//!
//! with `A = G − V(s)` held constant; the sub-policy terms are dropped when
//! sub-policies are frozen.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::curves::{CurveRecorder, LearningCurve};
use super::policy::{HierarchicalPolicy, META};
use super::task::{Episode, EpisodeLog, Task};
use crate::error::{Error, Result};
use crate::nn::batch::{batch_gradient, clip_global_norm};
use crate::nn::loss::{cross_entropy, entropy, softmax};
use crate::nn::{AdamConfig, Grads};
use crate::pipeline::rollout::sample_index;
use crate::pipeline::subroutines::{POLICY_GRU, POLICY_HEAD};
use crate::rng::{rng_from, tag, Rng};
use crate::sim::{observe, Action};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct A2cHyper {
    pub gamma: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub lr: f64,
    /// Environment copies stepped per update.
    pub n_envs: usize,
    /// Meta decisions per environment per update.
    pub windows_per_update: usize,
    pub grad_clip: f64,
    pub budget_steps: u64,
    pub record_interval: u64,
    /// Completed episodes averaged into each curve point.
    pub smoothing_episodes: usize,
    pub freeze_subpolicies: bool,
}

impl Default for A2cHyper {
    fn default() -> Self {
        A2cHyper {
            gamma: 0.99,
            entropy_coef: 0.001,
            value_coef: 0.5,
            lr: 1e-3,
            n_envs: 8,
            windows_per_update: 4,
            grad_clip: 0.5,
            budget_steps: 200_000,
            record_interval: 5_000,
            smoothing_episodes: 100,
            freeze_subpolicies: false,
        }
    }
}

impl A2cHyper {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma)
            || self.n_envs == 0
            || self.windows_per_update == 0
            || self.record_interval == 0
            || self.smoothing_episodes == 0
            || !(self.lr > 0.0)
        {
            return Err(Error::InvalidArgument(format!("bad A2C hyperparameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum WindowEnd {
    Continue,
    Terminal,
    /// Step cap reached; bootstrap from this value.
    Truncated(f64),
}

#[derive(Debug, Clone)]
struct Window {
    meta_input: Vec<f64>,
    z: usize,
    value: f64,
    obs: Vec<Vec<f64>>,
    actions: Vec<usize>,
    reward: f64,
    discount: f64,
    end: WindowEnd,
}

struct Segment {
    windows: Vec<Window>,
    /// Value of the state after the last window when it did not end the episode.
    bootstrap: f64,
    finished: Vec<EpisodeLog>,
    steps: u64,
}

struct EnvState {
    rng: Rng,
    episode: Episode,
    /// Index into this environment's episode sequence.
    count: u64,
    index: u64,
    n_envs: u64,
}

impl EnvState {
    fn new(task: &Task, index: u64, n_envs: u64, seed: u64) -> Result<(Self, Vec<EpisodeLog>)> {
        let mut logs = Vec::new();
        let first = task.start_episode(task.sample_episode(index)?)?;
        let mut env = EnvState {
            rng: rng_from(seed, &[tag("a2c-env"), index]),
            episode: first,
            count: 0,
            index,
            n_envs,
        };
        env.skip_finished(task, &mut logs)?;
        Ok((env, logs))
    }

    /// Episodes of this environment are `index, index + n, index + 2n, …` in
    /// the task's episode sequence.
    fn next_episode(&mut self, task: &Task, logs: &mut Vec<EpisodeLog>) -> Result<()> {
        logs.push(self.episode.log());
        self.count += 1;
        self.episode = task.start_episode(task.sample_episode(self.index + self.count * self.n_envs)?)?;
        self.skip_finished(task, logs)
    }

    fn skip_finished(&mut self, task: &Task, logs: &mut Vec<EpisodeLog>) -> Result<()> {
        for _ in 0..1000 {
            if !self.episode.done {
                return Ok(());
            }
            logs.push(self.episode.log());
            self.count += 1;
            self.episode = task.start_episode(task.sample_episode(self.index + self.count * self.n_envs)?)?;
        }
        Err(Error::Contract("every sampled episode starts at its goal".into()))
    }
}

fn meta_state(task: &Task, ep: &Episode) -> (Vec<f64>, Vec<f64>) {
    let obs = observe(&ep.pose, &task.agent, task.map()).to_f64();
    let x = HierarchicalPolicy::meta_input(&obs, &ep.goal_features());
    (obs, x)
}

fn collect_segment(policy: &HierarchicalPolicy, task: &Task, env: &mut EnvState, hyper: &A2cHyper) -> Result<Segment> {
    let arch = &policy.arch;
    let mut windows = Vec::with_capacity(hyper.windows_per_update);
    let mut finished = Vec::new();
    let mut steps = 0u64;
    for _ in 0..hyper.windows_per_update {
        let (mut obs, meta_input) = meta_state(task, &env.episode);
        let (logits, value) = policy.meta_forward(&meta_input)?;
        let z = if logits.is_empty() { 0 } else { sample_index(&softmax(&logits), &mut env.rng) };
        let zv = if logits.is_empty() { Vec::new() } else { arch.one_hot(z) };
        let mut h = vec![0.0; arch.hidden];
        let mut w = Window {
            meta_input,
            z,
            value,
            obs: Vec::with_capacity(policy.interval),
            actions: Vec::with_capacity(policy.interval),
            reward: 0.0,
            discount: 1.0,
            end: WindowEnd::Continue,
        };
        for t in 0..policy.interval {
            if t > 0 {
                obs = observe(&env.episode.pose, &task.agent, task.map()).to_f64();
            }
            let (al, h2) = arch.policy_step(&policy.params, &obs, &zv, &h)?;
            h = h2;
            let a = sample_index(&softmax(&al), &mut env.rng);
            let tr = env.episode.step(task, Action::ALL[a])?;
            steps += 1;
            w.obs.push(std::mem::take(&mut obs));
            w.actions.push(a);
            w.reward += w.discount * tr.reward;
            w.discount *= hyper.gamma;
            if tr.done {
                break;
            }
        }
        if env.episode.done {
            w.end = if env.episode.success {
                WindowEnd::Terminal
            } else {
                let (_, x) = meta_state(task, &env.episode);
                WindowEnd::Truncated(policy.meta_forward(&x)?.1)
            };
            env.next_episode(task, &mut finished)?;
        }
        windows.push(w);
    }
    let bootstrap = match windows.last().map(|w| w.end) {
        Some(WindowEnd::Continue) => {
            let (_, x) = meta_state(task, &env.episode);
            policy.meta_forward(&x)?.1
        }
        _ => 0.0,
    };
    Ok(Segment {
        windows,
        bootstrap,
        finished,
        steps,
    })
}

/// Discounted returns of a segment's windows.
fn window_returns(seg: &Segment) -> Vec<f64> {
    let mut out = vec![0.0; seg.windows.len()];
    let mut next = seg.bootstrap;
    for (i, w) in seg.windows.iter().enumerate().rev() {
        let tail = match w.end {
            WindowEnd::Continue => next,
            WindowEnd::Terminal => 0.0,
            WindowEnd::Truncated(v) => v,
        };
        out[i] = w.reward + w.discount * tail;
        next = out[i];
    }
    out
}

/// Gradient of the meta loss with respect to `[logits…, value]` for one
/// transition with advantage `advantage` and return target `ret`.
pub fn meta_output_grad(logits: &[f64], value: f64, z: usize, advantage: f64, ret: f64, hyper: &A2cHyper) -> Vec<f64> {
    let mut g = Vec::with_capacity(logits.len() + 1);
    if !logits.is_empty() {
        let (_, dce) = cross_entropy(logits, z);
        let (_, dh) = entropy(logits);
        g.extend(dce.iter().zip(&dh).map(|(c, h)| advantage * c - hyper.entropy_coef * h));
    }
    g.push(hyper.value_coef * (value - ret));
    g
}

#[derive(Debug, Clone, Copy, Default)]
struct WindowStats {
    value_loss: f64,
    entropy: f64,
}

fn window_gradient(policy: &HierarchicalPolicy, w: &Window, advantage: f64, ret: f64, hyper: &A2cHyper, g: &mut Grads) -> Result<WindowStats> {
    let (logits, value, cache) = policy.meta_forward_cached(&w.meta_input);
    let dout = meta_output_grad(&logits, value, w.z, advantage, ret, hyper);
    policy.meta_spec().backward(&policy.params, META, &cache, &dout, g)?;
    let stats = WindowStats {
        value_loss: 0.5 * (value - ret).powi(2),
        entropy: if logits.is_empty() { 0.0 } else { entropy(&logits).0 },
    };
    if hyper.freeze_subpolicies {
        return Ok(stats);
    }
    let arch = &policy.arch;
    let (gru, head) = (arch.gru(), arch.head());
    let zv = if policy.n_options() == 0 { Vec::new() } else { arch.one_hot(w.z) };
    let mut h = vec![0.0; arch.hidden];
    let mut caches = Vec::with_capacity(w.actions.len());
    let mut dlogits = Vec::with_capacity(w.actions.len());
    for (obs, &a) in w.obs.iter().zip(&w.actions) {
        let (x, fc) = arch.policy_input(&policy.params, obs, &zv);
        let (h2, gc) = gru.step_unchecked(&policy.params, POLICY_GRU, &x, &h);
        let (al, hc) = head.forward_unchecked(&policy.params, POLICY_HEAD, &h2);
        let (_, dce) = cross_entropy(&al, a);
        let (_, dh) = entropy(&al);
        dlogits.push(dce.iter().zip(&dh).map(|(c, e)| advantage * c - hyper.entropy_coef * e).collect::<Vec<_>>());
        caches.push((fc, gc, hc));
        h = h2;
    }
    let mut dh = vec![0.0; arch.hidden];
    for t in (0..caches.len()).rev() {
        let (fc, gc, hc) = &caches[t];
        let dh_head = head.backward(&policy.params, POLICY_HEAD, hc, &dlogits[t], g)?;
        for (a, b) in dh.iter_mut().zip(dh_head) {
            *a += b;
        }
        let (dx, dh_prev) = gru.backward(&policy.params, POLICY_GRU, gc, &dh, g)?;
        arch.policy_input_backward(&policy.params, fc, &dx, g)?;
        dh = dh_prev;
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub curve: LearningCurve,
    pub episodes: usize,
    pub updates: usize,
    pub env_steps: u64,
    /// Largest `|Σ shaping − (d_0 − d_final)|` over all finished episodes.
    pub max_telescoping_error: f64,
}

/// Trains `policy` in place for `hyper.budget_steps` environment steps.
///
/// On a non-finite loss or gradient the update is skipped, `policy` keeps
/// the last finite parameters and a numerical error is returned.
pub fn train_a2c(policy: &mut HierarchicalPolicy, task: &Task, hyper: &A2cHyper, seed: u64, label: &str) -> Result<TrainReport> {
    hyper.validate()?;
    policy.check()?;
    let adam = AdamConfig { lr: hyper.lr, ..AdamConfig::default() };
    let n_envs = hyper.n_envs as u64;
    let mut recorder = CurveRecorder::new(hyper.record_interval, hyper.smoothing_episodes);
    let mut max_tel: f64 = 0.0;
    let mut note = |logs: &[EpisodeLog], rec: &mut CurveRecorder| {
        for l in logs {
            max_tel = max_tel.max(l.telescoping_error());
            rec.episode(l);
        }
    };
    let mut envs = Vec::with_capacity(hyper.n_envs);
    for i in 0..n_envs {
        let (env, logs) = EnvState::new(task, i, n_envs, seed)?;
        note(&logs, &mut recorder);
        envs.push(env);
    }
    let mut env_steps = 0u64;
    let mut updates = 0usize;
    while env_steps < hyper.budget_steps {
        let p = &*policy;
        let segments = envs
            .par_iter_mut()
            .map(|env| collect_segment(p, task, env, hyper))
            .collect::<Result<Vec<_>>>()?;
        let mut items = Vec::new();
        for seg in &segments {
            let returns = window_returns(seg);
            for (w, g) in seg.windows.iter().zip(returns) {
                items.push((w, g - w.value, g));
            }
            env_steps += seg.steps;
            note(&seg.finished, &mut recorder);
        }
        let (mut grads, stats) = batch_gradient(&items, |(w, adv, ret), g| window_gradient(p, w, *adv, *ret, hyper, g));
        let stats = stats.into_iter().collect::<Result<Vec<_>>>()?;
        if !grads.is_finite() || stats.iter().any(|s| !s.value_loss.is_finite() || !s.entropy.is_finite()) {
            return Err(Error::Numerical(format!(
                "A2C loss is not finite after {env_steps} environment steps ({label}, seed {seed})"
            )));
        }
        grads.scale(1.0 / items.len() as f64);
        clip_global_norm(&mut grads, hyper.grad_clip);
        policy.params.accumulate(&grads)?;
        policy.params.adam_step(&adam);
        updates += 1;
        recorder.advance(env_steps);
    }
    let episodes = recorder.episodes();
    Ok(TrainReport {
        curve: recorder.finish(label, seed),
        episodes,
        updates,
        env_steps,
        max_telescoping_error: max_tel,
    })
}
