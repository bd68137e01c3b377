//! One-step inverse dynamics model: which action turned `o_t` into `o_{t+1}`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::interaction::InteractionDataset;
use crate::error::{Error, Result};
use crate::nn::batch::batch_gradient;
use crate::nn::loss::{argmax, cross_entropy};
use crate::nn::{AdamConfig, MlpSpec, ParamStore};
use crate::rng::{rng_from, tag};
use crate::sim::{Action, Observation};

pub const PREFIX: &str = "inverse";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverseHyper {
    pub hidden: Vec<usize>,
    pub batch: usize,
    pub lr: f64,
    pub epochs: usize,
    pub val_fraction: f64,
}

impl Default for InverseHyper {
    fn default() -> Self {
        InverseHyper {
            hidden: vec![64, 64],
            batch: 64,
            lr: 0.001,
            epochs: 30,
            val_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseModel {
    pub spec: MlpSpec,
    pub params: ParamStore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseReport {
    pub train_loss: Vec<f64>,
    pub train_samples: usize,
    pub val_samples: usize,
    pub val_accuracy: f64,
}

impl InverseModel {
    pub fn new(ray_count: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        let mut widths = vec![2 * ray_count];
        widths.extend_from_slice(hidden);
        widths.push(Action::COUNT);
        let spec = MlpSpec::new(widths)?;
        let mut params = ParamStore::new();
        spec.init(&mut params, PREFIX, &mut rng_from(seed, &[tag("inverse-init")]));
        Ok(InverseModel { spec, params })
    }

    /// Rebuilds a model from checkpointed parameters.
    pub fn from_params(params: ParamStore) -> Result<Self> {
        let mut widths = Vec::new();
        let mut l = 0;
        while let Ok(w) = params.get(&format!("{}.w", MlpSpec::layer_name(PREFIX, l))) {
            if l == 0 {
                widths.push(w.shape()[1]);
            }
            widths.push(w.shape()[0]);
            l += 1;
        }
        let spec = MlpSpec::new(widths)?;
        spec.check(&params, PREFIX)?;
        if spec.output_width() != Action::COUNT || spec.input_width() % 2 != 0 {
            return Err(Error::Shape(format!("inverse model widths {:?}", spec.widths)));
        }
        Ok(InverseModel { spec, params: params.subset(PREFIX) })
    }

    pub fn ray_count(&self) -> usize {
        self.spec.input_width() / 2
    }

    pub fn logits(&self, obs: &Observation, next: &Observation) -> Result<Vec<f64>> {
        let mut x = Vec::with_capacity(self.spec.input_width());
        obs.extend_into(&mut x);
        next.extend_into(&mut x);
        Ok(self.spec.forward(&self.params, PREFIX, &x)?.0)
    }

    pub fn predict(&self, obs: &Observation, next: &Observation) -> Result<Action> {
        Ok(Action::ALL[argmax(&self.logits(obs, next)?)])
    }

    /// Fraction of samples whose action is predicted correctly.
    pub fn accuracy(&self, data: &InteractionDataset) -> Result<f64> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let mut correct = 0usize;
        for s in &data.samples {
            if self.predict(&s.obs, &s.next_obs)? == s.action {
                correct += 1;
            }
        }
        Ok(correct as f64 / data.len() as f64)
    }
}

/// Splits by start location: every sample of a start lands on the same side.
pub fn split_by_start(data: &InteractionDataset, val_fraction: f64, seed: u64) -> (InteractionDataset, InteractionDataset) {
    let mut starts: Vec<u32> = data.samples.iter().map(|s| s.start_id).collect();
    starts.dedup();
    starts.sort_unstable();
    starts.dedup();
    starts.shuffle(&mut rng_from(seed, &[tag("inverse-split")]));
    let n_val = ((starts.len() as f64) * val_fraction).round() as usize;
    let val: std::collections::HashSet<u32> = starts[..n_val].iter().copied().collect();
    let (v, t): (Vec<_>, Vec<_>) = data.samples.iter().cloned().partition(|s| val.contains(&s.start_id));
    (InteractionDataset { samples: t }, InteractionDataset { samples: v })
}

pub fn train_inverse_model(
    data: &InteractionDataset,
    ray_count: usize,
    hyper: &InverseHyper,
    seed: u64,
) -> Result<(InverseModel, InverseReport)> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("inverse model needs training data".into()));
    }
    let (train, val) = split_by_start(data, hyper.val_fraction, seed);
    let mut model = InverseModel::new(ray_count, &hyper.hidden, seed)?;
    let inputs: Vec<(Vec<f64>, usize)> = train
        .samples
        .iter()
        .map(|s| {
            let mut x = s.obs.to_f64();
            s.next_obs.extend_into(&mut x);
            (x, s.action.index())
        })
        .collect();
    if inputs.iter().any(|(x, _)| x.len() != model.spec.input_width()) {
        return Err(Error::Shape("observation width differs from the model's ray count".into()));
    }
    let adam = AdamConfig { lr: hyper.lr, ..AdamConfig::default() };
    let mut rng = rng_from(seed, &[tag("inverse-batches")]);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut train_loss = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(hyper.batch.max(1)) {
            let items: Vec<&(Vec<f64>, usize)> = batch.iter().map(|&i| &inputs[i]).collect();
            let spec = &model.spec;
            let params = &model.params;
            let (mut grads, losses) = batch_gradient(&items, |(x, a), g| {
                let (logits, cache) = spec.forward_unchecked(params, PREFIX, x);
                let (loss, dl) = cross_entropy(&logits, *a);
                spec.backward(params, PREFIX, &cache, &dl, g).expect("shapes checked");
                loss
            });
            let batch_loss: f64 = losses.iter().sum();
            if !batch_loss.is_finite() || !grads.is_finite() {
                return Err(Error::Numerical(format!(
                    "inverse model diverged in epoch {epoch} (batch loss {batch_loss})"
                )));
            }
            total += batch_loss;
            grads.scale(1.0 / items.len() as f64);
            model.params.accumulate(&grads)?;
            model.params.adam_step(&adam);
        }
        train_loss.push(total / inputs.len() as f64);
    }
    let val_accuracy = model.accuracy(&val)?;
    Ok((
        model,
        InverseReport {
            train_loss,
            train_samples: train.len(),
            val_samples: val.len(),
            val_accuracy,
        },
    ))
}
