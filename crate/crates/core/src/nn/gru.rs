//! Gated recurrent cell. Gate rows are ordered reset, update, candidate:
//!
//! ```text
//! r  = σ(W_ir x + b_ir + W_hr h + b_hr)
//! u  = σ(W_iu x + b_iu + W_hu h + b_hu)
//! n  = tanh(W_in x + b_in + r ⊙ (W_hn h + b_hn))
//! h' = (1 − u) ⊙ n + u ⊙ h
//! ```

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::params::{Grads, ParamStore};
use super::tensor::{dot, Tensor};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GruSpec {
    pub input: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone)]
pub struct GruCache {
    x: Vec<f64>,
    h: Vec<f64>,
    r: Vec<f64>,
    u: Vec<f64>,
    n: Vec<f64>,
    /// `W_hn h + b_hn`, before the reset gate is applied.
    hn: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl GruSpec {
    pub fn new(input: usize, hidden: usize) -> Result<Self> {
        if input == 0 || hidden == 0 {
            return Err(Error::InvalidArgument("gru widths must be positive".into()));
        }
        Ok(GruSpec { input, hidden })
    }

    fn names(prefix: &str) -> [String; 4] {
        [
            format!("{prefix}.w_ih"),
            format!("{prefix}.w_hh"),
            format!("{prefix}.b_ih"),
            format!("{prefix}.b_hh"),
        ]
    }

    /// Uniform(±1/√hidden) weights and biases.
    pub fn init(&self, store: &mut ParamStore, prefix: &str, rng: &mut Rng) {
        let k = 1.0 / (self.hidden as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f32> { (0..n).map(|_| rng.random_range(-k..=k) as f32).collect() };
        let h3 = 3 * self.hidden;
        let [wih, whh, bih, bhh] = Self::names(prefix);
        store.insert(wih, Tensor::new(vec![h3, self.input], draw(h3 * self.input)).expect("sized"));
        store.insert(whh, Tensor::new(vec![h3, self.hidden], draw(h3 * self.hidden)).expect("sized"));
        store.insert(bih, Tensor::new(vec![h3], draw(h3)).expect("sized"));
        store.insert(bhh, Tensor::new(vec![h3], draw(h3)).expect("sized"));
    }

    pub fn check(&self, store: &ParamStore, prefix: &str) -> Result<()> {
        let h3 = 3 * self.hidden;
        let [wih, whh, bih, bhh] = Self::names(prefix);
        let expect: [(&str, Vec<usize>); 4] = [
            (&wih, vec![h3, self.input]),
            (&whh, vec![h3, self.hidden]),
            (&bih, vec![h3]),
            (&bhh, vec![h3]),
        ];
        for (name, shape) in expect {
            let t = store.get(name)?;
            if t.shape() != shape.as_slice() {
                return Err(Error::Shape(format!("{name}: expected {shape:?}, found {:?}", t.shape())));
            }
        }
        Ok(())
    }

    pub fn step(&self, store: &ParamStore, prefix: &str, input: &[f64], hidden: &[f64]) -> Result<(Vec<f64>, GruCache)> {
        if input.len() != self.input || hidden.len() != self.hidden {
            return Err(Error::Shape(format!(
                "gru {prefix} expects input {} and hidden {}, got {} and {}",
                self.input,
                self.hidden,
                input.len(),
                hidden.len()
            )));
        }
        self.check(store, prefix)?;
        Ok(self.step_unchecked(store, prefix, input, hidden))
    }

    pub(crate) fn step_unchecked(&self, store: &ParamStore, prefix: &str, input: &[f64], hidden: &[f64]) -> (Vec<f64>, GruCache) {
        let hd = self.hidden;
        let [wih, whh, bih, bhh] = Self::names(prefix);
        let (wih, whh) = (store.expect(&wih), store.expect(&whh));
        let (bih, bhh) = (store.expect(&bih).data(), store.expect(&bhh).data());
        let gi = |row: usize| dot(wih.row(row), input) + bih[row] as f64;
        let gh = |row: usize| dot(whh.row(row), hidden) + bhh[row] as f64;
        let mut r = vec![0.0; hd];
        let mut u = vec![0.0; hd];
        let mut n = vec![0.0; hd];
        let mut hn = vec![0.0; hd];
        let mut out = vec![0.0; hd];
        for j in 0..hd {
            r[j] = sigmoid(gi(j) + gh(j));
            u[j] = sigmoid(gi(hd + j) + gh(hd + j));
            hn[j] = gh(2 * hd + j);
            n[j] = (gi(2 * hd + j) + r[j] * hn[j]).tanh();
            out[j] = (1.0 - u[j]) * n[j] + u[j] * hidden[j];
        }
        let cache = GruCache {
            x: input.to_vec(),
            h: hidden.to_vec(),
            r,
            u,
            n,
            hn,
        };
        (out, cache)
    }

    /// Reverse pass of one step. Returns `(input_grad, hidden_grad)`.
    pub fn backward(
        &self,
        store: &ParamStore,
        prefix: &str,
        cache: &GruCache,
        out_grad: &[f64],
        grads: &mut Grads,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        if out_grad.len() != self.hidden {
            return Err(Error::Shape(format!(
                "gru {prefix} hidden gradient width {} != {}",
                out_grad.len(),
                self.hidden
            )));
        }
        let hd = self.hidden;
        let mut dgi = vec![0.0; 3 * hd];
        let mut dgh = vec![0.0; 3 * hd];
        let mut dh = vec![0.0; hd];
        for j in 0..hd {
            let (r, u, n, hn) = (cache.r[j], cache.u[j], cache.n[j], cache.hn[j]);
            let g = out_grad[j];
            let dn = g * (1.0 - u);
            let du = g * (cache.h[j] - n);
            dh[j] = g * u;
            let dn_pre = dn * (1.0 - n * n);
            let dr_pre = dn_pre * hn * r * (1.0 - r);
            let du_pre = du * u * (1.0 - u);
            dgi[j] = dr_pre;
            dgh[j] = dr_pre;
            dgi[hd + j] = du_pre;
            dgh[hd + j] = du_pre;
            dgi[2 * hd + j] = dn_pre;
            dgh[2 * hd + j] = dn_pre * r;
        }
        let [wihn, whhn, bihn, bhhn] = Self::names(prefix);
        let wih = store.get(&wihn)?;
        let whh = store.get(&whhn)?;
        let (dw, db) = grads.pair(&wihn, wih.len(), &bihn, 3 * hd);
        let dx = super::tensor::affine_backward(wih, &cache.x, &dgi, dw, db);
        let (dw, db) = grads.pair(&whhn, whh.len(), &bhhn, 3 * hd);
        let dh_rec = super::tensor::affine_backward(whh, &cache.h, &dgh, dw, db);
        for (a, b) in dh.iter_mut().zip(dh_rec) {
            *a += b;
        }
        Ok((dx, dh))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{check_gradients, RELATIVE_TOLERANCE};
    use crate::rng::rng_from;

    #[test]
    fn zero_parameters_keep_zero_state() {
        let spec = GruSpec::new(3, 4).unwrap();
        let mut store = ParamStore::new();
        spec.init(&mut store, "g", &mut rng_from(0, &[]));
        for name in ["g.w_ih", "g.w_hh", "g.b_ih", "g.b_hh"] {
            store.get_mut(name).unwrap().data_mut().fill(0.0);
        }
        let (h, _) = spec.step(&store, "g", &[1.0, 2.0, 3.0], &[0.0; 4]).unwrap();
        assert_eq!(h, vec![0.0; 4]);
    }

    #[test]
    fn hidden_state_stays_in_open_unit_interval() {
        let spec = GruSpec::new(5, 8).unwrap();
        let mut store = ParamStore::new();
        let mut rng = rng_from(3, &[]);
        spec.init(&mut store, "g", &mut rng);
        let mut h = vec![0.0; 8];
        for t in 0..50 {
            let x: Vec<f64> = (0..5).map(|i| ((t * 7 + i) as f64).sin() * 10.0).collect();
            h = spec.step(&store, "g", &x, &h).unwrap().0;
            assert!(h.iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn unrolled_gradients_match_finite_differences() {
        for seed in 0..4u64 {
            let mut rng = rng_from(seed, &[2]);
            let spec = GruSpec::new(rng.random_range(2..5), rng.random_range(2..6)).unwrap();
            let mut store = ParamStore::new();
            spec.init(&mut store, "g", &mut rng);
            let steps = 5;
            let xs: Vec<Vec<f64>> = (0..steps)
                .map(|_| (0..spec.input).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let h0: Vec<f64> = (0..spec.hidden).map(|_| rng.random_range(-0.5..0.5)).collect();
            let target: Vec<f64> = (0..spec.hidden).map(|_| rng.random_range(-1.0..1.0)).collect();
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
            let report = check_gradients(&store, &grads, loss, 1e-3);
            assert!(report.max_rel_error < RELATIVE_TOLERANCE, "{report:?}");
        }
    }
}
