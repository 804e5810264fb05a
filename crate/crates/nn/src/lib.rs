//! Minimal double-precision neural-network kit: tensors, a handful of layer
//! kinds with hand-written backward passes, MSE loss, plain SGD and a binary
//! checkpoint container.

pub mod checkpoint;
pub mod error;
mod gemm;
pub mod layers;
pub mod loss;
pub mod optim;
pub mod param;
pub mod tensor;

pub use checkpoint::Checkpoint;
pub use error::{NnError, Result};
pub use layers::{
    concat_last, split_last, AvgPool1d, AvgPool2d, Conv1d, Conv2d, Dense, Flatten, Layer, Relu,
    Sequential,
};
pub use loss::mse;
pub use optim::{sgd_step, Sgd};
pub use param::{ModelParams, Param, Parameterized};
pub use tensor::Tensor;

/// Deterministic generator used for every seeded initialization.
pub type SeededRng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}
