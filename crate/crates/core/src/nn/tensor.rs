use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major `f32` array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Row `r` of a rank-2 tensor.
    pub fn row(&self, r: usize) -> &[f32] {
        let cols = self.shape[1];
        &self.data[r * cols..(r + 1) * cols]
    }
}

#[inline]
pub(crate) fn dot(w: &[f32], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum()
}

/// `y = W x + b` for `W` of shape `[out, in]`.
pub(crate) fn affine(w: &Tensor, b: &Tensor, x: &[f64]) -> Vec<f64> {
    let out = w.shape[0];
    (0..out).map(|r| dot(w.row(r), x) + b.data[r] as f64).collect()
}

/// Accumulates `dW += g ⊗ x`, `db += g` and returns `Wᵀ g`.
pub(crate) fn affine_backward(
    w: &Tensor,
    x: &[f64],
    g: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let cols = w.shape[1];
    let mut dx = vec![0.0; cols];
    for (r, &gr) in g.iter().enumerate() {
        db[r] += gr;
        if gr == 0.0 {
            continue;
        }
        let wrow = w.row(r);
        let dwrow = &mut dw[r * cols..(r + 1) * cols];
        for c in 0..cols {
            dwrow[c] += gr * x[c];
            dx[c] += gr * wrow[c] as f64;
        }
    }
    dx
}
