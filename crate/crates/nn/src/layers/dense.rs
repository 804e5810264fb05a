use rand::Rng;

use super::Layer;
use crate::error::{shape_err, NnError, Result};
use crate::gemm::{gemm, View};
use crate::param::Param;
use crate::tensor::Tensor;

/// Fully connected layer on `[n, in]`, weights stored `[in, out]`.
#[derive(Debug)]
pub struct Dense {
    inputs: usize,
    outputs: usize,
    weight: Param,
    bias: Param,
    input: Option<Tensor>,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Self {
            inputs,
            outputs,
            weight: Param::he_uniform("weight", &[inputs, outputs], inputs, rng),
            bias: Param::zeros("bias", &[outputs]),
            input: None,
        }
    }

    /// `(inputs, outputs)`, i.e. the weight matrix size.
    pub fn dims(&self) -> (usize, usize) {
        (self.inputs, self.outputs)
    }

    pub fn bias_mut(&mut self) -> &mut Tensor {
        &mut self.bias.value
    }
}

impl Layer for Dense {
    fn kind(&self) -> &'static str {
        "dense"
    }

    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let shape = self.output_shape(input.shape())?;
        let n = shape[0];
        let (fi, fo) = (self.inputs, self.outputs);
        let mut out: Vec<f64> = self
            .bias
            .value
            .data()
            .iter()
            .copied()
            .cycle()
            .take(n * fo)
            .collect();
        gemm(
            n,
            fi,
            fo,
            View::rows(input.data(), fi),
            View::rows(self.weight.value.data(), fo),
            1.0,
            &mut out,
        );
        self.input = Some(input.clone());
        Tensor::new(shape, out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let input = self
            .input
            .as_ref()
            .ok_or_else(|| NnError::NoForward("dense".into()))?;
        let n = input.batch();
        let (fi, fo) = (self.inputs, self.outputs);
        if grad_out.shape() != [n, fo] {
            return Err(shape_err("dense backward", &[n, fo], grad_out.shape()));
        }
        let g = grad_out.data();
        gemm(
            fi,
            n,
            fo,
            View::transposed(input.data(), fi),
            View::rows(g, fo),
            1.0,
            self.weight.grad.data_mut(),
        );
        let mut gin = vec![0.0; n * fi];
        gemm(
            n,
            fo,
            fi,
            View::rows(g, fo),
            View::transposed(self.weight.value.data(), fo),
            0.0,
            &mut gin,
        );
        let gb = self.bias.grad.data_mut();
        for row in g.chunks_exact(fo) {
            for (acc, &gv) in gb.iter_mut().zip(row) {
                *acc += gv;
            }
        }
        Tensor::new(vec![n, fi], gin)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input.len() != 2 || input[1] != self.inputs {
            let n = input.first().copied().unwrap_or(0);
            return Err(shape_err("dense input", &[n, self.inputs], input));
        }
        Ok(vec![input[0], self.outputs])
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn clear(&mut self) {
        self.input = None;
    }
}
