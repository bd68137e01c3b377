//! Joint training of the trajectory encoder `f`, the latent-conditioned
//! recurrent policy `π(o, z, h)` and the affordance model `α(o)`.
//!
//! Per clip: `e = f(â_1..â_{T−1})`, `z ~ GumbelSoftmax(e, τ)` (hard forward,
//! soft backward), `π` unrolled from a zero hidden state over
//! `(tanh(W o_t + b), z)`, and the loss
//!
//! ```text
//! Σ_t CE(π_t, â_t) + w · CE(α(o_1), argmax z)
//! ```
//!
//! where the affordance target carries no gradient.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::labeling::PseudoLabeledClip;
use crate::error::{Error, Result};
use crate::nn::batch::{batch_gradient, clip_global_norm};
use crate::nn::gumbel::{gumbel_noise, relax, straight_through_backward};
use crate::nn::loss::{argmax, cross_entropy, softmax};
use crate::nn::params::init_linear;
use crate::nn::{AdamConfig, Grads, GruSpec, MlpCache, MlpSpec, ParamStore};
use crate::rng::{rng_from, tag, Rng};
use crate::sim::{Action, Observation};

pub const ENCODER: &str = "encoder";
pub const POLICY_FEAT: &str = "policy.feat";
pub const POLICY_GRU: &str = "policy.gru";
pub const POLICY_HEAD: &str = "policy.head";
pub const AFFORDANCE: &str = "affordance";

/// Clips assigned to one latent above this fraction count as collapsed.
pub const COLLAPSE_FRACTION: f64 = 0.95;
/// Consecutive collapsed epochs before a warning is raised.
pub const COLLAPSE_EPOCHS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubroutineArch {
    pub ray_count: usize,
    pub n_subroutines: usize,
    /// Frames per clip; the encoder sees `horizon − 1` actions.
    pub horizon: usize,
    /// Width of the observation feature layer in front of the GRU.
    pub features: usize,
    pub hidden: usize,
    pub encoder_hidden: usize,
    pub affordance_hidden: usize,
}

impl SubroutineArch {
    pub fn new(ray_count: usize, n_subroutines: usize, horizon: usize) -> Self {
        SubroutineArch {
            ray_count,
            n_subroutines,
            horizon,
            features: 64,
            hidden: 64,
            encoder_hidden: 64,
            affordance_hidden: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ray_count == 0 || self.n_subroutines == 0 || self.horizon < 2 || self.hidden == 0 || self.features == 0 {
            return Err(Error::InvalidArgument(format!("bad subroutine architecture {self:?}")));
        }
        Ok(())
    }

    pub fn encoder(&self) -> MlpSpec {
        MlpSpec {
            widths: vec![(self.horizon - 1) * Action::COUNT, self.encoder_hidden, self.n_subroutines],
        }
    }

    /// Single linear layer; the policy applies tanh to its output.
    pub fn feat(&self) -> MlpSpec {
        MlpSpec {
            widths: vec![self.ray_count, self.features],
        }
    }

    pub fn gru(&self) -> GruSpec {
        GruSpec {
            input: self.features + self.n_subroutines,
            hidden: self.hidden,
        }
    }

    pub fn head(&self) -> MlpSpec {
        MlpSpec {
            widths: vec![self.hidden, Action::COUNT],
        }
    }

    pub fn affordance(&self) -> MlpSpec {
        MlpSpec {
            widths: vec![self.ray_count, self.affordance_hidden, self.n_subroutines],
        }
    }

    pub fn init(&self, seed: u64) -> Result<ParamStore> {
        self.validate()?;
        let mut rng = rng_from(seed, &[tag("subroutine-init")]);
        let mut store = ParamStore::new();
        self.encoder().init(&mut store, ENCODER, &mut rng);
        init_feat(&self.feat(), &mut store, &mut rng);
        self.gru().init(&mut store, POLICY_GRU, &mut rng);
        self.head().init(&mut store, POLICY_HEAD, &mut rng);
        self.affordance().init(&mut store, AFFORDANCE, &mut rng);
        Ok(store)
    }

    pub fn check(&self, store: &ParamStore) -> Result<()> {
        self.encoder().check(store, ENCODER)?;
        self.check_policy(store)?;
        self.affordance().check(store, AFFORDANCE)
    }

    pub fn check_policy(&self, store: &ParamStore) -> Result<()> {
        self.feat().check(store, POLICY_FEAT)?;
        self.gru().check(store, POLICY_GRU)?;
        self.head().check(store, POLICY_HEAD)
    }

    pub fn one_hot(&self, z: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.n_subroutines];
        v[z] = 1.0;
        v
    }

    /// One-hot action sequence fed to the encoder.
    pub fn encoder_input(&self, actions: &[Action]) -> Vec<f64> {
        let mut x = vec![0.0; actions.len() * Action::COUNT];
        for (t, a) in actions.iter().enumerate() {
            x[t * Action::COUNT + a.index()] = 1.0;
        }
        x
    }

    pub fn encode(&self, store: &ParamStore, actions: &[Action]) -> Result<Vec<f64>> {
        if actions.len() + 1 != self.horizon {
            return Err(Error::Shape(format!(
                "encoder expects {} actions, got {}",
                self.horizon - 1,
                actions.len()
            )));
        }
        Ok(self.encoder().forward(store, ENCODER, &self.encoder_input(actions))?.0)
    }

    /// GRU input `tanh(W o + b) ⊕ z`, with the feature cache.
    pub(crate) fn policy_input(&self, store: &ParamStore, obs: &[f64], z: &[f64]) -> (Vec<f64>, FeatCache) {
        let (mut f, cache) = self.feat().forward_unchecked(store, POLICY_FEAT, obs);
        f.iter_mut().for_each(|v| *v = v.tanh());
        let feats = f.clone();
        f.extend_from_slice(z);
        (f, FeatCache { cache, feats })
    }

    /// Backpropagates the feature part of a GRU input gradient.
    pub(crate) fn policy_input_backward(&self, store: &ParamStore, fc: &FeatCache, dx: &[f64], grads: &mut Grads) -> Result<()> {
        let g: Vec<f64> = dx[..self.features]
            .iter()
            .zip(&fc.feats)
            .map(|(d, f)| d * (1.0 - f * f))
            .collect();
        self.feat().backward(store, POLICY_FEAT, &fc.cache, &g, grads)?;
        Ok(())
    }

    /// One recurrent policy step: action logits and the next hidden state.
    pub fn policy_step(&self, store: &ParamStore, obs: &[f64], z: &[f64], hidden: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if obs.len() != self.ray_count || z.len() != self.n_subroutines {
            return Err(Error::Shape(format!(
                "policy expects {} rays and {} latents, got {} and {}",
                self.ray_count,
                self.n_subroutines,
                obs.len(),
                z.len()
            )));
        }
        self.check_policy(store)?;
        let (x, _) = self.policy_input(store, obs, z);
        let (h, _) = self.gru().step(store, POLICY_GRU, &x, hidden)?;
        let (logits, _) = self.head().forward(store, POLICY_HEAD, &h)?;
        Ok((logits, h))
    }

    /// Affordance distribution `p̃` over subroutines.
    pub fn affordance_probs(&self, store: &ParamStore, obs: &Observation) -> Result<Vec<f64>> {
        Ok(softmax(&self.affordance().forward(store, AFFORDANCE, &obs.to_f64())?.0))
    }
}

#[derive(Debug, Clone)]
pub(crate) struct FeatCache {
    cache: MlpCache,
    feats: Vec<f64>,
}

/// Feature layer at Xavier scale; [`MlpSpec::init`] would shrink it as an
/// output layer.
fn init_feat(spec: &MlpSpec, store: &mut ParamStore, rng: &mut Rng) {
    init_linear(store, &MlpSpec::layer_name(POLICY_FEAT, 0), spec.widths[0], spec.widths[1], 1.0, rng);
}

/// A clip converted to network inputs once.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedClip {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub encoder_input: Vec<f64>,
}

impl PreparedClip {
    pub fn new(arch: &SubroutineArch, clip: &PseudoLabeledClip) -> Result<Self> {
        if clip.observations.len() != arch.horizon || clip.pseudo_actions.len() + 1 != arch.horizon {
            return Err(Error::Shape(format!(
                "clip has {} frames and {} actions, horizon is {}",
                clip.observations.len(),
                clip.pseudo_actions.len(),
                arch.horizon
            )));
        }
        if clip.observations.iter().any(|o| o.len() != arch.ray_count) {
            return Err(Error::Shape("clip observation width differs from ray count".into()));
        }
        Ok(PreparedClip {
            obs: clip.observations.iter().map(|o| o.to_f64()).collect(),
            actions: clip.pseudo_actions.iter().map(|a| a.index()).collect(),
            encoder_input: arch.encoder_input(&clip.pseudo_actions),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipEval {
    /// Action term plus weighted affordance term.
    pub loss: f64,
    pub action_loss: f64,
    pub affordance_loss: f64,
    pub z: usize,
    pub correct: usize,
}

/// Loss of one clip for fixed Gumbel noise, with gradients accumulated into
/// `grads` when given.
///
/// With `anchor = Some(s₀)` the latent fed forward is `hard + soft − s₀`
/// instead of `hard`. At `soft = s₀` this has the same value, and its exact
/// derivative equals the straight-through gradient, which makes the
/// straight-through path checkable by finite differences.
#[allow(clippy::too_many_arguments)]
pub fn clip_loss(
    arch: &SubroutineArch,
    store: &ParamStore,
    clip: &PreparedClip,
    noise: &[f64],
    tau: f64,
    affordance_weight: f64,
    anchor: Option<&[f64]>,
    grads: Option<&mut Grads>,
) -> Result<ClipEval> {
    let enc = arch.encoder();
    let gru = arch.gru();
    let head = arch.head();
    let aff = arch.affordance();
    let (e, enc_cache) = enc.forward_unchecked(store, ENCODER, &clip.encoder_input);
    let sample = relax(&e, noise, tau)?;
    let z: Vec<f64> = match anchor {
        Some(a) => (0..e.len()).map(|i| sample.hard[i] + sample.soft[i] - a[i]).collect(),
        None => sample.hard.clone(),
    };
    let steps = arch.horizon - 1;
    let mut h = vec![0.0; arch.hidden];
    let mut caches = Vec::with_capacity(steps);
    let mut action_loss = 0.0;
    let mut correct = 0;
    let mut dlogits = Vec::with_capacity(steps);
    for t in 0..steps {
        let (x, fc) = arch.policy_input(store, &clip.obs[t], &z);
        let (h2, gc) = gru.step_unchecked(store, POLICY_GRU, &x, &h);
        let (logits, hc) = head.forward_unchecked(store, POLICY_HEAD, &h2);
        let (l, dl) = cross_entropy(&logits, clip.actions[t]);
        if argmax(&logits) == clip.actions[t] {
            correct += 1;
        }
        action_loss += l;
        dlogits.push(dl);
        caches.push((fc, gc, hc));
        h = h2;
    }
    let (al, acache) = aff.forward_unchecked(store, AFFORDANCE, &clip.obs[0]);
    let (affordance_loss, dal) = cross_entropy(&al, sample.index);
    let loss = action_loss + affordance_weight * affordance_loss;
    if let Some(g) = grads {
        let mut dh = vec![0.0; arch.hidden];
        let mut dz = vec![0.0; arch.n_subroutines];
        for t in (0..steps).rev() {
            let (fc, gc, hc) = &caches[t];
            let dh_head = head.backward(store, POLICY_HEAD, hc, &dlogits[t], g)?;
            for (a, b) in dh.iter_mut().zip(dh_head) {
                *a += b;
            }
            let (dx, dh_prev) = gru.backward(store, POLICY_GRU, gc, &dh, g)?;
            for (a, b) in dz.iter_mut().zip(&dx[arch.features..]) {
                *a += b;
            }
            arch.policy_input_backward(store, fc, &dx, g)?;
            dh = dh_prev;
        }
        let de = straight_through_backward(&sample.soft, tau, &dz);
        enc.backward(store, ENCODER, &enc_cache, &de, g)?;
        let dal: Vec<f64> = dal.iter().map(|v| v * affordance_weight).collect();
        aff.backward(store, AFFORDANCE, &acache, &dal, g)?;
    }
    Ok(ClipEval {
        loss,
        action_loss,
        affordance_loss,
        z: sample.index,
        correct,
    })
}

/// Soft sample at the current parameters, used as the anchor for gradient
/// checks.
pub fn soft_sample(arch: &SubroutineArch, store: &ParamStore, clip: &PreparedClip, noise: &[f64], tau: f64) -> Result<Vec<f64>> {
    let (e, _) = arch.encoder().forward_unchecked(store, ENCODER, &clip.encoder_input);
    Ok(relax(&e, noise, tau)?.soft)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubroutineHyper {
    pub batch: usize,
    pub lr: f64,
    pub epochs: usize,
    pub tau_start: f64,
    pub tau_end: f64,
    pub affordance_weight: f64,
    pub grad_clip: f64,
}

impl Default for SubroutineHyper {
    fn default() -> Self {
        SubroutineHyper {
            batch: 64,
            lr: 0.001,
            epochs: 20,
            tau_start: 1.0,
            tau_end: 0.5,
            affordance_weight: 1.0,
            grad_clip: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub loss: f64,
    pub action_loss: f64,
    pub affordance_loss: f64,
    pub accuracy: f64,
    pub tau: f64,
    pub z_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubroutineReport {
    pub clips: usize,
    pub epochs: Vec<EpochStats>,
    pub collapse_warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubroutineModel {
    pub arch: SubroutineArch,
    pub params: ParamStore,
}

pub fn tau_at(hyper: &SubroutineHyper, step: usize, total_steps: usize) -> f64 {
    if total_steps <= 1 {
        return hyper.tau_end;
    }
    let f = step as f64 / (total_steps - 1) as f64;
    hyper.tau_start + (hyper.tau_end - hyper.tau_start) * f
}

/// Tracks consecutive epochs in which one latent takes almost every clip.
#[derive(Debug, Clone, Default)]
pub struct CollapseDetector {
    run: usize,
}

impl CollapseDetector {
    /// Returns a warning once the collapsed run reaches [`COLLAPSE_EPOCHS`].
    pub fn observe(&mut self, epoch: usize, z_counts: &[usize]) -> Option<String> {
        let total: usize = z_counts.iter().sum();
        let max = z_counts.iter().copied().max().unwrap_or(0);
        if total > 0 && z_counts.len() > 1 && max as f64 > COLLAPSE_FRACTION * total as f64 {
            self.run += 1;
        } else {
            self.run = 0;
        }
        (self.run == COLLAPSE_EPOCHS).then(|| {
            format!(
                "latent collapse: one subroutine took more than {:.0}% of clips for {} epochs ending at epoch {epoch}",
                COLLAPSE_FRACTION * 100.0,
                COLLAPSE_EPOCHS
            )
        })
    }
}

pub fn train_subroutines(
    clips: &[PseudoLabeledClip],
    arch: &SubroutineArch,
    hyper: &SubroutineHyper,
    seed: u64,
) -> Result<(SubroutineModel, SubroutineReport)> {
    if clips.is_empty() {
        return Err(Error::InvalidArgument("subroutine training needs clips".into()));
    }
    let mut params = arch.init(seed)?;
    let prepared = clips
        .iter()
        .map(|c| PreparedClip::new(arch, c))
        .collect::<Result<Vec<_>>>()?;
    let adam = AdamConfig { lr: hyper.lr, ..AdamConfig::default() };
    let batch = hyper.batch.max(1);
    let batches_per_epoch = prepared.len().div_ceil(batch);
    let total_steps = batches_per_epoch * hyper.epochs;
    let mut rng = rng_from(seed, &[tag("subroutine-batches")]);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut detector = CollapseDetector::default();
    let mut report = SubroutineReport {
        clips: prepared.len(),
        epochs: Vec::with_capacity(hyper.epochs),
        collapse_warning: None,
    };
    let mut step = 0;
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut stats = EpochStats {
            loss: 0.0,
            action_loss: 0.0,
            affordance_loss: 0.0,
            accuracy: 0.0,
            tau: 0.0,
            z_counts: vec![0; arch.n_subroutines],
        };
        let mut correct = 0usize;
        for idx in order.chunks(batch) {
            let tau = tau_at(hyper, step, total_steps);
            let items: Vec<(&PreparedClip, Vec<f64>)> = idx
                .iter()
                .map(|&i| (&prepared[i], gumbel_noise(arch.n_subroutines, &mut rng)))
                .collect();
            let p = &params;
            let (mut grads, evals) = batch_gradient(&items, |(clip, noise), g| {
                clip_loss(arch, p, clip, noise, tau, hyper.affordance_weight, None, Some(g))
            });
            let evals = evals.into_iter().collect::<Result<Vec<_>>>()?;
            if !grads.is_finite() || evals.iter().any(|e| !e.loss.is_finite()) {
                return Err(Error::Numerical(format!("subroutine training diverged in epoch {epoch}")));
            }
            for e in &evals {
                stats.loss += e.loss;
                stats.action_loss += e.action_loss;
                stats.affordance_loss += e.affordance_loss;
                stats.z_counts[e.z] += 1;
                correct += e.correct;
            }
            grads.scale(1.0 / items.len() as f64);
            clip_global_norm(&mut grads, hyper.grad_clip);
            params.accumulate(&grads)?;
            params.adam_step(&adam);
            stats.tau = tau;
            step += 1;
        }
        let n = prepared.len() as f64;
        stats.loss /= n;
        stats.action_loss /= n;
        stats.affordance_loss /= n;
        stats.accuracy = correct as f64 / (n * (arch.horizon - 1) as f64);
        if let Some(w) = detector.observe(epoch, &stats.z_counts) {
            report.collapse_warning.get_or_insert(w);
        }
        report.epochs.push(stats);
    }
    Ok((SubroutineModel { arch: *arch, params }, report))
}

impl SubroutineModel {
    /// Deterministic latent assignment `argmax f(â)`.
    pub fn assign(&self, actions: &[Action]) -> Result<usize> {
        Ok(argmax(&self.arch.encode(&self.params, actions)?))
    }

    /// Teacher-forced per-step action distributions of `π` on a clip under
    /// latent input `z` (any vector of width N).
    pub fn clip_action_probs(&self, clip: &PreparedClip, z: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut h = vec![0.0; self.arch.hidden];
        let mut out = Vec::with_capacity(clip.actions.len());
        for t in 0..clip.actions.len() {
            let (logits, h2) = self.arch.policy_step(&self.params, &clip.obs[t], z, &h)?;
            out.push(softmax(&logits));
            h = h2;
        }
        Ok(out)
    }

    /// Per-step accuracy of `π` given the encoder's latent, and given the
    /// latent marginalized uniformly (probabilities averaged over all z).
    pub fn conditioning_accuracy(&self, clips: &[PreparedClip]) -> Result<(f64, f64)> {
        let n = self.arch.n_subroutines;
        let (mut cond, mut marg, mut total) = (0usize, 0usize, 0usize);
        for clip in clips {
            let (e, _) = self.arch.encoder().forward(&self.params, ENCODER, &clip.encoder_input)?;
            let z = argmax(&e);
            let probs = self.clip_action_probs(clip, &self.arch.one_hot(z))?;
            let mut mean = vec![vec![0.0; Action::COUNT]; clip.actions.len()];
            for k in 0..n {
                for (m, p) in mean.iter_mut().zip(self.clip_action_probs(clip, &self.arch.one_hot(k))?) {
                    for (a, b) in m.iter_mut().zip(p) {
                        *a += b / n as f64;
                    }
                }
            }
            for t in 0..clip.actions.len() {
                cond += usize::from(argmax(&probs[t]) == clip.actions[t]);
                marg += usize::from(argmax(&mean[t]) == clip.actions[t]);
                total += 1;
            }
        }
        let total = total.max(1) as f64;
        Ok((cond as f64 / total, marg as f64 / total))
    }

    /// Fraction of clips where `argmax α(o_1)` equals `argmax f(â)`.
    pub fn affordance_agreement(&self, clips: &[PreparedClip]) -> Result<f64> {
        let mut agree = 0usize;
        for clip in clips {
            let (e, _) = self.arch.encoder().forward(&self.params, ENCODER, &clip.encoder_input)?;
            let (a, _) = self.arch.affordance().forward(&self.params, AFFORDANCE, &clip.obs[0])?;
            agree += usize::from(argmax(&e) == argmax(&a));
        }
        Ok(agree as f64 / clips.len().max(1) as f64)
    }

    pub fn from_params(arch: SubroutineArch, params: ParamStore) -> Result<Self> {
        arch.check(&params)?;
        Ok(SubroutineModel { arch, params })
    }
}
