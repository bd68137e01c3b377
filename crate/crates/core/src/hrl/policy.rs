//! Two-level policy: a meta-controller over observation and goal features
//! picks a subroutine every `interval` steps; the latent-conditioned
//! recurrent policy acts in between.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::explore::Exploration;
use crate::nn::loss::softmax;
use crate::nn::{MlpCache, MlpSpec, ParamStore, Tensor};
use crate::pipeline::inverse::{self, InverseModel};
use crate::pipeline::rollout::{rollout_subroutine, sample_index, RolloutMode};
use crate::pipeline::subroutines::{AFFORDANCE, POLICY_FEAT, POLICY_GRU, POLICY_HEAD};
use crate::pipeline::{SubroutineArch, SubroutineModel};
use crate::rng::{rng_from, tag, Rng};
use crate::sim::{observe, AgentConfig, MazeMap, Pose, Trajectory};

pub const META: &str = "meta";
pub const GOAL_FEATURES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    Vmsr,
    Random,
    EncoderFeatures,
}

impl InitScheme {
    pub const ALL: [InitScheme; 3] = [InitScheme::Vmsr, InitScheme::Random, InitScheme::EncoderFeatures];

    pub fn name(self) -> &'static str {
        match self {
            InitScheme::Vmsr => "vmsr",
            InitScheme::Random => "random",
            InitScheme::EncoderFeatures => "encoder_features",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown init scheme {s:?}")))
    }
}

/// Pretrained models an init scheme may draw from.
#[derive(Debug, Clone, Copy, Default)]
pub struct InitSources<'a> {
    pub subroutines: Option<&'a SubroutineModel>,
    pub inverse: Option<&'a InverseModel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalPolicy {
    /// Sub-policy architecture; `n_subroutines == 0` is a flat policy.
    pub arch: SubroutineArch,
    pub meta_hidden: usize,
    pub interval: usize,
    pub params: ParamStore,
}

impl HierarchicalPolicy {
    pub fn meta_spec(&self) -> MlpSpec {
        meta_spec(&self.arch, self.meta_hidden)
    }

    pub fn n_options(&self) -> usize {
        self.arch.n_subroutines
    }

    pub fn check(&self) -> Result<()> {
        self.meta_spec().check(&self.params, META)?;
        self.arch.check_policy(&self.params)
    }

    /// Meta input `o ⊕ goal`.
    pub fn meta_input(obs: &[f64], goal: &[f64; GOAL_FEATURES]) -> Vec<f64> {
        let mut x = Vec::with_capacity(obs.len() + GOAL_FEATURES);
        x.extend_from_slice(obs);
        x.extend_from_slice(goal);
        x
    }

    /// Subroutine logits and state value.
    pub fn meta_forward(&self, input: &[f64]) -> Result<(Vec<f64>, f64)> {
        let (mut out, _) = self.meta_spec().forward(&self.params, META, input)?;
        let v = out.pop().expect("value output");
        Ok((out, v))
    }

    pub(crate) fn meta_forward_cached(&self, input: &[f64]) -> (Vec<f64>, f64, MlpCache) {
        let (mut out, cache) = self.meta_spec().forward_unchecked(&self.params, META, input);
        let v = out.pop().expect("value output");
        (out, v, cache)
    }

    /// Chains subroutines chosen by the meta-controller with zero goal
    /// features, like affordance-driven exploration.
    pub fn explore(&self, map: &MazeMap, start: Pose, episode_length: usize, agent: &AgentConfig, rng: &mut Rng) -> Result<Exploration> {
        if self.n_options() == 0 {
            return Err(Error::InvalidArgument("a flat policy has no subroutines to chain".into()));
        }
        let mut traj = Trajectory::start(start);
        let mut queries = 0;
        while traj.len() < episode_length {
            let pose = traj.last_pose();
            let obs = observe(&pose, agent, map).to_f64();
            let (logits, _) = self.meta_forward(&Self::meta_input(&obs, &[0.0; GOAL_FEATURES]))?;
            let z = sample_index(&softmax(&logits), rng);
            queries += 1;
            let k = self.interval.min(episode_length - traj.len());
            let part = rollout_subroutine(&self.arch, &self.params, z, map, pose, k, RolloutMode::Sample, agent, rng)?;
            traj.extend(&part);
        }
        Ok(Exploration { trajectory: traj, queries })
    }
}

fn meta_spec(arch: &SubroutineArch, hidden: usize) -> MlpSpec {
    MlpSpec {
        widths: vec![arch.ray_count + GOAL_FEATURES, hidden, arch.n_subroutines + 1],
    }
}

fn fresh(arch: &SubroutineArch, meta_hidden: usize, seed: u64) -> Result<ParamStore> {
    let mut params = arch.init(seed)?.subset("policy.");
    meta_spec(arch, meta_hidden).init(&mut params, META, &mut rng_from(seed, &[tag("meta-init")]));
    Ok(params)
}

/// Copies `src` (shape `[rows, cols]`) into the leading rows and columns of
/// `dst`.
fn copy_block(params: &mut ParamStore, dst: &str, src: &Tensor, rows: usize, cols: usize) -> Result<()> {
    let d = params.get_mut(dst)?;
    let (dr, dc) = match *d.shape() {
        [r, c] => (r, c),
        [r] => (r, 1),
        _ => return Err(Error::Shape(format!("{dst} is not a matrix or vector"))),
    };
    let (sr, sc) = match *src.shape() {
        [r, c] => (r, c),
        [r] => (r, 1),
        _ => return Err(Error::Shape("source is not a matrix or vector".into())),
    };
    if rows > dr || rows > sr || cols > dc || cols > sc {
        return Err(Error::Shape(format!(
            "cannot copy a {rows}×{cols} block from {sr}×{sc} into {dst} {dr}×{dc}"
        )));
    }
    let data = d.data_mut();
    for r in 0..rows {
        for c in 0..cols {
            data[r * dc + c] = src.data()[r * sc + c];
        }
    }
    Ok(())
}

fn mlp_param<'a>(store: &'a ParamStore, prefix: &str, layer: usize, part: &str) -> Result<&'a Tensor> {
    store.get(&format!("{}.{part}", MlpSpec::layer_name(prefix, layer)))
}

/// Builds a policy for the sub-policy architecture `arch` under `scheme`.
///
/// `vmsr` copies the subroutine policy and puts the affordance model in the
/// meta trunk and logits, leaving goal-feature weights and the value row
/// fresh. `encoder_features` copies the observation half of the inverse
/// model's first layer into the meta trunk and the sub-policy feature layer.
pub fn init_hierarchical_policy(
    scheme: InitScheme,
    arch: &SubroutineArch,
    sources: InitSources<'_>,
    interval: usize,
    seed: u64,
) -> Result<HierarchicalPolicy> {
    if interval == 0 {
        return Err(Error::InvalidArgument("meta interval must be positive".into()));
    }
    let meta_hidden = arch.affordance_hidden;
    let mut params = fresh(arch, meta_hidden, seed)?;
    let (n, rays) = (arch.n_subroutines, arch.ray_count);
    match scheme {
        InitScheme::Random => {}
        InitScheme::Vmsr => {
            let model = sources
                .subroutines
                .ok_or_else(|| Error::InvalidArgument("vmsr init needs trained subroutines".into()))?;
            if model.arch != *arch {
                return Err(Error::Shape(format!(
                    "subroutine bundle {:?} does not match policy {:?}",
                    model.arch, arch
                )));
            }
            model.arch.check(&model.params)?;
            for prefix in [POLICY_FEAT, POLICY_GRU, POLICY_HEAD] {
                params.copy_prefix(&model.params, prefix, prefix)?;
            }
            let src = &model.params;
            let l0 = MlpSpec::layer_name(META, 0);
            let l1 = MlpSpec::layer_name(META, 1);
            copy_block(&mut params, &format!("{l0}.w"), mlp_param(src, AFFORDANCE, 0, "w")?, meta_hidden, rays)?;
            copy_block(&mut params, &format!("{l0}.b"), mlp_param(src, AFFORDANCE, 0, "b")?, meta_hidden, 1)?;
            copy_block(&mut params, &format!("{l1}.w"), mlp_param(src, AFFORDANCE, 1, "w")?, n, meta_hidden)?;
            copy_block(&mut params, &format!("{l1}.b"), mlp_param(src, AFFORDANCE, 1, "b")?, n, 1)?;
        }
        InitScheme::EncoderFeatures => {
            let inv = sources
                .inverse
                .ok_or_else(|| Error::InvalidArgument("encoder_features init needs an inverse model".into()))?;
            let (w, b) = (mlp_param(&inv.params, inverse::PREFIX, 0, "w")?, mlp_param(&inv.params, inverse::PREFIX, 0, "b")?);
            if w.shape() != [meta_hidden, 2 * rays] || arch.features != meta_hidden {
                return Err(Error::Shape(format!(
                    "inverse first layer {:?} does not fit trunks of width {meta_hidden} and {} over {rays} rays",
                    w.shape(),
                    arch.features
                )));
            }
            let l0 = MlpSpec::layer_name(META, 0);
            let feat = MlpSpec::layer_name(POLICY_FEAT, 0);
            for dst in [&l0, &feat] {
                copy_block(&mut params, &format!("{dst}.w"), w, meta_hidden, rays)?;
                copy_block(&mut params, &format!("{dst}.b"), b, meta_hidden, 1)?;
            }
        }
    }
    let policy = HierarchicalPolicy {
        arch: *arch,
        meta_hidden,
        interval,
        params,
    };
    policy.check()?;
    Ok(policy)
}

/// Turns a one-subroutine policy into a flat one: the constant latent input
/// is folded into the recurrent input bias and the meta-controller keeps
/// only its value output.
pub fn flatten(policy: &HierarchicalPolicy) -> Result<HierarchicalPolicy> {
    if policy.n_options() != 1 {
        return Err(Error::InvalidArgument(format!(
            "only a one-subroutine policy can be flattened, got {}",
            policy.n_options()
        )));
    }
    policy.check()?;
    let mut arch = policy.arch;
    arch.n_subroutines = 0;
    let mut params = policy.params.clone();
    let wih_name = format!("{POLICY_GRU}.w_ih");
    let wih = policy.params.get(&wih_name)?;
    let (rows, cols) = (wih.shape()[0], wih.shape()[1]);
    let z_col: Vec<f32> = (0..rows).map(|r| wih.data()[r * cols + cols - 1]).collect();
    let kept: Vec<f32> = (0..rows)
        .flat_map(|r| wih.data()[r * cols..r * cols + cols - 1].iter().copied())
        .collect();
    params.insert(wih_name, Tensor::new(vec![rows, cols - 1], kept)?);
    let bih = params.get_mut(&format!("{POLICY_GRU}.b_ih"))?;
    for (b, z) in bih.data_mut().iter_mut().zip(z_col) {
        *b += z;
    }
    let l1 = MlpSpec::layer_name(META, 1);
    let w1 = policy.params.get(&format!("{l1}.w"))?;
    let b1 = policy.params.get(&format!("{l1}.b"))?;
    params.insert(format!("{l1}.w"), Tensor::new(vec![1, w1.shape()[1]], w1.row(1).to_vec())?);
    params.insert(format!("{l1}.b"), Tensor::new(vec![1], vec![b1.data()[1]])?);
    let flat = HierarchicalPolicy {
        arch,
        meta_hidden: policy.meta_hidden,
        interval: policy.interval,
        params,
    };
    flat.check()?;
    Ok(flat)
}
