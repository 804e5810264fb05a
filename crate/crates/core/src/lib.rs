pub mod config;
pub mod error;
pub mod evaluate;
pub mod imaging;
pub mod labels;
pub mod magnify;
pub mod manifest;
pub mod models;
pub mod pipeline;
pub mod ssi;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
