//! Minimal differentiable kernel: dense layers, a gated recurrent cell,
//! softmax losses, Gumbel-Softmax sampling, Adam and gradient checking.
//! Parameters are stored as `f32`; activations and gradients are `f64`.

pub mod batch;
pub mod checkpoint;
pub mod gradcheck;
pub mod gru;
pub mod gumbel;
pub mod loss;
pub mod mlp;
pub mod params;
pub mod tensor;

pub use gru::{GruCache, GruSpec};
pub use gumbel::{gumbel_softmax, GumbelSample};
pub use loss::{cross_entropy, softmax};
pub use mlp::{MlpCache, MlpSpec};
pub use params::{AdamConfig, Grads, ParamStore};
pub use tensor::Tensor;
