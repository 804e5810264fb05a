//! Layer kinds. Each layer caches what it needs during `forward` and
//! accumulates parameter gradients during `backward`.

mod activation;
mod concat;
mod conv;
mod dense;
mod pool;
mod sequential;

pub use activation::Relu;
pub use concat::{concat_last, split_last};
pub use conv::{Conv1d, Conv2d};
pub use dense::Dense;
pub use pool::{AvgPool1d, AvgPool2d, Flatten};
pub use sequential::Sequential;

use crate::error::Result;
use crate::param::Param;
use crate::tensor::Tensor;

pub trait Layer: Send {
    fn kind(&self) -> &'static str;

    fn forward(&mut self, input: &Tensor) -> Result<Tensor>;

    /// Takes the gradient of the loss w.r.t. this layer's output and returns the
    /// gradient w.r.t. its input. Parameter gradients are accumulated.
    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor>;

    /// Shape propagation without computing anything.
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>>;

    fn params(&self) -> Vec<&Param> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }

    fn named_params(&self, prefix: &str) -> Vec<(String, &Param)> {
        self.params()
            .into_iter()
            .map(|p| (format!("{prefix}.{}", p.name), p))
            .collect()
    }

    fn named_params_mut(&mut self, prefix: &str) -> Vec<(String, &mut Param)> {
        self.params_mut()
            .into_iter()
            .map(|p| (format!("{prefix}.{}", p.name), p))
            .collect()
    }

    /// Drops cached activations.
    fn clear(&mut self) {}
}
