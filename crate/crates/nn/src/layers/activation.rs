use super::Layer;
use crate::error::{shape_err, NnError, Result};
use crate::tensor::Tensor;

#[derive(Debug, Default)]
pub struct Relu {
    input: Option<Tensor>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for Relu {
    fn kind(&self) -> &'static str {
        "relu"
    }

    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let mut out = input.clone();
        out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        self.input = Some(input.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let input = self
            .input
            .as_ref()
            .ok_or_else(|| NnError::NoForward("relu".into()))?;
        if input.shape() != grad_out.shape() {
            return Err(shape_err("relu backward", input.shape(), grad_out.shape()));
        }
        let mut grad = grad_out.clone();
        for (g, &x) in grad.data_mut().iter_mut().zip(input.data()) {
            if x <= 0.0 {
                *g = 0.0;
            }
        }
        Ok(grad)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(input.to_vec())
    }

    fn clear(&mut self) {
        self.input = None;
    }
}
