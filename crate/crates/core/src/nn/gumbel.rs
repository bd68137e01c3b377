//! Gumbel-Softmax sampling with the straight-through estimator: the forward
//! value is the hard one-hot of the perturbed argmax, gradients flow through
//! the relaxed sample.

use rand::Rng as _;

use super::loss::{argmax, softmax};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct GumbelSample {
    pub noise: Vec<f64>,
    pub soft: Vec<f64>,
    pub hard: Vec<f64>,
    pub index: usize,
}

pub fn gumbel_noise(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            // U in (0, 1): exclude 0 so the double log stays finite.
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            -(-u.ln()).ln()
        })
        .collect()
}

/// Relaxed and hard samples for fixed noise.
pub fn relax(logits: &[f64], noise: &[f64], temperature: f64) -> Result<GumbelSample> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {temperature}")));
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::Numerical(format!("non-finite logits {logits:?}")));
    }
    let perturbed: Vec<f64> = logits
        .iter()
        .zip(noise)
        .map(|(l, g)| (l + g) / temperature)
        .collect();
    let soft = softmax(&perturbed);
    let index = argmax(&perturbed);
    let mut hard = vec![0.0; logits.len()];
    hard[index] = 1.0;
    Ok(GumbelSample {
        noise: noise.to_vec(),
        soft,
        hard,
        index,
    })
}

pub fn gumbel_softmax(logits: &[f64], temperature: f64, rng: &mut Rng) -> Result<GumbelSample> {
    let noise = gumbel_noise(logits.len(), rng);
    relax(logits, &noise, temperature)
}

/// Maps a gradient on the sample (`∂L/∂z`) to the logits through the soft
/// sample: `∂L/∂l_j = s_j (g_j − Σ_k s_k g_k) / τ`.
pub fn straight_through_backward(soft: &[f64], temperature: f64, sample_grad: &[f64]) -> Vec<f64> {
    let inner: f64 = soft.iter().zip(sample_grad).map(|(s, g)| s * g).sum();
    soft.iter()
        .zip(sample_grad)
        .map(|(s, g)| s * (g - inner) / temperature)
        .collect()
}
