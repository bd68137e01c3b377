//! Fully connected network: tanh hidden layers, linear output.

use serde::{Deserialize, Serialize};

use super::params::{init_linear, Grads, ParamStore};
use super::tensor::{affine, affine_backward};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Output layers start this much smaller than Xavier so initial logits are
/// close to uniform.
pub const OUTPUT_GAIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Input width, hidden widths, output width.
    pub widths: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input to each layer.
    inputs: Vec<Vec<f64>>,
    /// Post-activation output of each hidden layer.
    hidden: Vec<Vec<f64>>,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "mlp widths must have at least two entries, all positive: {widths:?}"
            )));
        }
        Ok(MlpSpec { widths })
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("validated non-empty")
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn layer_name(prefix: &str, layer: usize) -> String {
        format!("{prefix}.l{layer}")
    }

    pub fn init(&self, store: &mut ParamStore, prefix: &str, rng: &mut Rng) {
        for l in 0..self.layers() {
            let gain = if l + 1 == self.layers() { OUTPUT_GAIN } else { 1.0 };
            init_linear(
                store,
                &Self::layer_name(prefix, l),
                self.widths[l],
                self.widths[l + 1],
                gain,
                rng,
            );
        }
    }

    /// Verifies that `store` holds correctly shaped parameters under `prefix`.
    pub fn check(&self, store: &ParamStore, prefix: &str) -> Result<()> {
        for l in 0..self.layers() {
            let name = Self::layer_name(prefix, l);
            let w = store.get(&format!("{name}.w"))?;
            let b = store.get(&format!("{name}.b"))?;
            if w.shape() != [self.widths[l + 1], self.widths[l]] || b.shape() != [self.widths[l + 1]] {
                return Err(Error::Shape(format!(
                    "{name}: expected [{}, {}], found {:?}",
                    self.widths[l + 1],
                    self.widths[l],
                    w.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn forward(&self, store: &ParamStore, prefix: &str, input: &[f64]) -> Result<(Vec<f64>, MlpCache)> {
        if input.len() != self.input_width() {
            return Err(Error::Shape(format!(
                "mlp {prefix} expects input width {}, got {}",
                self.input_width(),
                input.len()
            )));
        }
        self.check(store, prefix)?;
        Ok(self.forward_unchecked(store, prefix, input))
    }

    pub(crate) fn forward_unchecked(&self, store: &ParamStore, prefix: &str, input: &[f64]) -> (Vec<f64>, MlpCache) {
        let mut inputs = Vec::with_capacity(self.layers());
        let mut hidden = Vec::with_capacity(self.layers() - 1);
        let mut x = input.to_vec();
        for l in 0..self.layers() {
            let name = Self::layer_name(prefix, l);
            let w = store.expect(&format!("{name}.w"));
            let b = store.expect(&format!("{name}.b"));
            let mut y = affine(w, b, &x);
            inputs.push(x);
            if l + 1 < self.layers() {
                y.iter_mut().for_each(|v| *v = v.tanh());
                hidden.push(y.clone());
            }
            x = y;
        }
        (x, MlpCache { inputs, hidden })
    }

    /// Reverse pass: accumulates parameter gradients into `grads` and returns
    /// the gradient with respect to the input.
    pub fn backward(
        &self,
        store: &ParamStore,
        prefix: &str,
        cache: &MlpCache,
        output_grad: &[f64],
        grads: &mut Grads,
    ) -> Result<Vec<f64>> {
        if output_grad.len() != self.output_width() {
            return Err(Error::Shape(format!(
                "mlp {prefix} output gradient width {} != {}",
                output_grad.len(),
                self.output_width()
            )));
        }
        let mut g = output_grad.to_vec();
        for l in (0..self.layers()).rev() {
            if l + 1 < self.layers() {
                for (gi, hi) in g.iter_mut().zip(&cache.hidden[l]) {
                    *gi *= 1.0 - hi * hi;
                }
            }
            let name = Self::layer_name(prefix, l);
            let (wn, bn) = (format!("{name}.w"), format!("{name}.b"));
            let w = store.get(&wn)?;
            let (dw, db) = grads.pair(&wn, w.len(), &bn, self.widths[l + 1]);
            g = affine_backward(w, &cache.inputs[l], &g, dw, db);
        }
        Ok(g)
    }

    /// First hidden activations, used as a feature map.
    pub fn hidden_of(cache: &MlpCache, layer: usize) -> &[f64] {
        &cache.hidden[layer]
    }
}
