use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Gradients keyed by parameter name, accumulated in `f64`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Grads {
    bufs: BTreeMap<String, Vec<f64>>,
}

impl Grads {
    pub fn new() -> Self {
        Self::default()
    }

    /// Zero-filled buffer for `name`, created on first use.
    pub fn buf(&mut self, name: &str, len: usize) -> &mut Vec<f64> {
        if !self.bufs.contains_key(name) {
            self.bufs.insert(name.to_string(), vec![0.0; len]);
        }
        self.bufs.get_mut(name).expect("inserted above")
    }

    /// Two disjoint buffers at once (weight and bias of one layer).
    pub fn pair(&mut self, a: &str, alen: usize, b: &str, blen: usize) -> (&mut [f64], &mut [f64]) {
        self.buf(a, alen);
        self.buf(b, blen);
        let mut it = self
            .bufs
            .iter_mut()
            .filter(|(k, _)| k.as_str() == a || k.as_str() == b);
        let (k1, v1) = it.next().expect("present");
        let (_, v2) = it.next().expect("present");
        if k1 == a {
            (v1.as_mut_slice(), v2.as_mut_slice())
        } else {
            (v2.as_mut_slice(), v1.as_mut_slice())
        }
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.bufs.get(name).map(|v| v.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<f64>)> {
        self.bufs.iter()
    }

    /// Adds `other` into `self`, name by name.
    pub fn add(&mut self, other: &Grads) {
        for (k, v) in &other.bufs {
            let dst = self.buf(k, v.len());
            for (d, s) in dst.iter_mut().zip(v) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.bufs.values_mut() {
            v.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.bufs
            .values()
            .flat_map(|v| v.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.bufs.values().flat_map(|v| v.iter()).all(|x| x.is_finite())
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&str) -> bool) {
        self.bufs.retain(|k, _| keep(k));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Param {
    value: Tensor,
    grad: Vec<f64>,
    m: Tensor,
    v: Tensor,
}

/// Named parameters with gradient accumulators and Adam state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    params: BTreeMap<String, Param>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        let shape = value.shape().to_vec();
        let n = value.len();
        self.params.insert(
            name.into(),
            Param {
                value,
                grad: vec![0.0; n],
                m: Tensor::zeros(shape.clone()),
                v: Tensor::zeros(shape),
            },
        );
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.params
            .get(name)
            .map(|p| &p.value)
            .ok_or_else(|| Error::Shape(format!("missing parameter {name}")))
    }

    /// Like [`ParamStore::get`] for names a model registered itself.
    pub(crate) fn expect(&self, name: &str) -> &Tensor {
        &self.params[name].value
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.params
            .get_mut(name)
            .map(|p| &mut p.value)
            .ok_or_else(|| Error::Shape(format!("missing parameter {name}")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.params.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.params.iter().map(|(k, p)| (k, &p.value))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn num_values(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params.values_mut() {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// Adds `grads` into the accumulators. Unknown names are an error.
    pub fn accumulate(&mut self, grads: &Grads) -> Result<()> {
        for (name, g) in grads.iter() {
            let p = self
                .params
                .get_mut(name)
                .ok_or_else(|| Error::Shape(format!("gradient for unknown parameter {name}")))?;
            if p.grad.len() != g.len() {
                return Err(Error::Shape(format!(
                    "gradient for {name} has {} values, parameter has {}",
                    g.len(),
                    p.grad.len()
                )));
            }
            for (a, b) in p.grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        Ok(())
    }

    pub fn grad(&self, name: &str) -> Option<&[f64]> {
        self.params.get(name).map(|p| p.grad.as_slice())
    }

    /// One Adam update from the accumulated gradients, which are then cleared.
    pub fn adam_step(&mut self, cfg: &AdamConfig) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for p in self.params.values_mut() {
            let (m, v, val) = (p.m.data_mut(), p.v.data_mut(), p.value.data_mut());
            for i in 0..val.len() {
                let g = p.grad[i];
                let mi = cfg.beta1 * m[i] as f64 + (1.0 - cfg.beta1) * g;
                let vi = cfg.beta2 * v[i] as f64 + (1.0 - cfg.beta2) * g * g;
                m[i] = mi as f32;
                v[i] = vi as f32;
                let update = cfg.lr * (mi / bc1) / ((vi / bc2).sqrt() + cfg.eps);
                val[i] = (val[i] as f64 - update) as f32;
                p.grad[i] = 0.0;
            }
        }
    }

    /// Copies values (not optimizer state) of every parameter under `src_prefix`
    /// in `src` into `dst_prefix` here. Shapes must agree.
    pub fn copy_prefix(&mut self, src: &ParamStore, src_prefix: &str, dst_prefix: &str) -> Result<usize> {
        let mut copied = 0;
        for (name, t) in src.iter() {
            if let Some(rest) = name.strip_prefix(src_prefix) {
                let dst_name = format!("{dst_prefix}{rest}");
                let dst = self.get_mut(&dst_name)?;
                if dst.shape() != t.shape() {
                    return Err(Error::Shape(format!(
                        "cannot copy {name} {:?} into {dst_name} {:?}",
                        t.shape(),
                        dst.shape()
                    )));
                }
                dst.data_mut().copy_from_slice(t.data());
                copied += 1;
            }
        }
        Ok(copied)
    }

    /// Parameters whose name starts with `prefix`, optimizer state reset.
    pub fn subset(&self, prefix: &str) -> ParamStore {
        let mut out = ParamStore::new();
        for (name, t) in self.iter() {
            if name.starts_with(prefix) {
                out.insert(name.clone(), t.clone());
            }
        }
        out
    }

    /// Inserts every parameter of `other`, replacing same-named entries.
    pub fn merge(&mut self, other: &ParamStore) {
        for (name, t) in other.iter() {
            self.insert(name.clone(), t.clone());
        }
    }
}

/// Xavier-uniform weights scaled by `gain`, zero bias.
pub fn init_linear(
    store: &mut ParamStore,
    prefix: &str,
    input: usize,
    output: usize,
    gain: f64,
    rng: &mut crate::rng::Rng,
) {
    let limit = gain * (6.0 / (input + output) as f64).sqrt();
    let w: Vec<f32> = (0..input * output)
        .map(|_| rng.random_range(-limit..=limit) as f32)
        .collect();
    store.insert(
        format!("{prefix}.w"),
        Tensor::new(vec![output, input], w).expect("sized above"),
    );
    store.insert(format!("{prefix}.b"), Tensor::zeros(vec![output]));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(v: f32) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("p", Tensor::new(vec![2], vec![v, v]).unwrap());
        s
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = store_with(0.25);
        s.adam_step(&AdamConfig::default());
        assert_eq!(s.get("p").unwrap().data(), &[0.25, 0.25]);
    }

    #[test]
    fn constant_gradient_moves_by_learning_rate() {
        // With a constant gradient, m̂ = g and v̂ = g², so each step is lr·sign(g).
        let mut s = store_with(0.0);
        let cfg = AdamConfig::default();
        let mut prev = 0.0f64;
        for i in 0..200 {
            let mut g = Grads::new();
            g.buf("p", 2).copy_from_slice(&[0.3, -2.0]);
            s.accumulate(&g).unwrap();
            s.adam_step(&cfg);
            let now = s.get("p").unwrap().data()[0] as f64;
            if i > 100 {
                assert!(((prev - now) - cfg.lr).abs() < 1e-5, "step {}", prev - now);
            }
            prev = now;
        }
        assert!(s.get("p").unwrap().data()[1] > 0.19);
    }

    #[test]
    fn default_learning_rate() {
        assert_eq!(AdamConfig::default().lr, 0.001);
    }

    #[test]
    fn accumulate_rejects_mismatches() {
        let mut s = store_with(0.0);
        let mut g = Grads::new();
        g.buf("p", 3);
        assert!(s.accumulate(&g).is_err());
        let mut g = Grads::new();
        g.buf("q", 2);
        assert!(s.accumulate(&g).is_err());
    }

    #[test]
    fn grads_pair_returns_named_buffers() {
        let mut g = Grads::new();
        let (a, b) = g.pair("z.w", 3, "a.b", 1);
        a[0] = 1.0;
        b[0] = 2.0;
        assert_eq!(g.get("z.w").unwrap(), &[1.0, 0.0, 0.0]);
        assert_eq!(g.get("a.b").unwrap(), &[2.0]);
    }
}
