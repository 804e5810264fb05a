use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{NnError, Result};
use crate::tensor::Tensor;

/// A trainable tensor together with its gradient accumulator.
#[derive(Clone, Debug)]
pub struct Param {
    pub name: &'static str,
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(name: &'static str, value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self { name, value, grad }
    }

    pub fn zeros(name: &'static str, shape: &[usize]) -> Self {
        Self::new(name, Tensor::zeros(shape))
    }

    /// He-style uniform initialization: `U(-sqrt(6/fan_in), sqrt(6/fan_in))`.
    pub fn he_uniform<R: Rng + ?Sized>(
        name: &'static str,
        shape: &[usize],
        fan_in: usize,
        rng: &mut R,
    ) -> Self {
        let bound = (6.0 / fan_in.max(1) as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
        Self::new(name, Tensor::new(shape.to_vec(), data).expect("shape product"))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Anything that owns named parameters.
pub trait Parameterized {
    fn named_params(&self) -> Vec<(String, &Param)>;
    fn named_params_mut(&mut self) -> Vec<(String, &mut Param)>;

    fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, p)| p.value.len()).sum()
    }

    fn zero_grad(&mut self) {
        for (_, p) in self.named_params_mut() {
            p.zero_grad();
        }
    }

    /// Copies the current parameter values out.
    fn snapshot(&self, seed: u64) -> ModelParams {
        ModelParams {
            seed,
            tensors: self
                .named_params()
                .into_iter()
                .map(|(n, p)| (n, p.value.clone()))
                .collect(),
        }
    }

    /// Overwrites parameter values from a snapshot; every name must match.
    fn load(&mut self, params: &ModelParams) -> Result<()> {
        let mut targets = self.named_params_mut();
        if targets.len() != params.tensors.len() {
            return Err(NnError::Checkpoint(format!(
                "parameter count mismatch: model has {}, snapshot has {}",
                targets.len(),
                params.tensors.len()
            )));
        }
        for (name, p) in targets.iter_mut() {
            let src = params
                .tensors
                .get(name)
                .ok_or_else(|| NnError::Checkpoint(format!("missing tensor {name}")))?;
            if src.shape() != p.value.shape() {
                return Err(crate::error::shape_err(
                    format!("load {name}"),
                    p.value.shape(),
                    src.shape(),
                ));
            }
            p.value = src.clone();
            p.zero_grad();
        }
        Ok(())
    }
}

/// Detached parameter values keyed by fully qualified name.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub seed: u64,
    pub tensors: BTreeMap<String, Tensor>,
}
