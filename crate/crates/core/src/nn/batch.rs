//! Mini-batch gradient evaluation with a reduction order that does not depend
//! on the number of worker threads.

use rayon::prelude::*;

use super::params::Grads;

/// Items per parallel task. Fixed so the summation tree is fixed.
pub const CHUNK: usize = 8;

/// Runs `f` on every item, each chunk accumulating into its own [`Grads`],
/// then sums chunks in index order. Returns the summed gradient and the
/// per-item results.
pub fn batch_gradient<T, S, F>(items: &[T], f: F) -> (Grads, Vec<S>)
where
    T: Sync,
    S: Send,
    F: Fn(&T, &mut Grads) -> S + Sync,
{
    let parts: Vec<(Grads, Vec<S>)> = items
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = Grads::new();
            let stats = chunk.iter().map(|item| f(item, &mut g)).collect();
            (g, stats)
        })
        .collect();
    let mut total = Grads::new();
    let mut stats = Vec::with_capacity(items.len());
    for (g, s) in parts {
        total.add(&g);
        stats.extend(s);
    }
    (total, stats)
}

/// Rescales `grads` so its global norm is at most `max_norm`.
pub fn clip_global_norm(grads: &mut Grads, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}
