use rand::Rng;

use super::Layer;
use crate::error::{shape_err, NnError, Result};
use crate::gemm::{gemm, View};
use crate::param::Param;
use crate::tensor::Tensor;

/// 2-D convolution, stride 1, zero "same" padding, cross-correlation
/// convention. Input `[n, h, w, c_in]`, weights `[k, k, c_in, c_out]`.
#[derive(Debug)]
pub struct Conv2d {
    kernel: usize,
    in_channels: usize,
    out_channels: usize,
    weight: Param,
    bias: Param,
    /// Cached patch matrix from the last forward pass.
    input: Option<Tensor>,
    input_shape: Vec<usize>,
}

impl Conv2d {
    pub fn new<R: Rng + ?Sized>(
        kernel: usize,
        in_channels: usize,
        out_channels: usize,
        rng: &mut R,
    ) -> Self {
        assert!(kernel % 2 == 1, "same padding needs an odd kernel");
        let fan_in = kernel * kernel * in_channels;
        Self {
            kernel,
            in_channels,
            out_channels,
            weight: Param::he_uniform(
                "weight",
                &[kernel, kernel, in_channels, out_channels],
                fan_in,
                rng,
            ),
            bias: Param::zeros("bias", &[out_channels]),
            input: None,
            input_shape: Vec::new(),
        }
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn weight_mut(&mut self) -> &mut Tensor {
        &mut self.weight.value
    }

    pub fn bias_mut(&mut self) -> &mut Tensor {
        &mut self.bias.value
    }

    fn check(&self, shape: &[usize]) -> Result<()> {
        if shape.len() != 4 || shape[3] != self.in_channels {
            let expected = [
                shape.first().copied().unwrap_or(0),
                shape.get(1).copied().unwrap_or(0),
                shape.get(2).copied().unwrap_or(0),
                self.in_channels,
            ];
            return Err(shape_err("conv2d input", &expected, shape));
        }
        Ok(())
    }
}

impl Conv2d {
    /// Patch matrix `[n*h*w, k*k*c_in]`, columns ordered like the weights.
    fn im2col(&self, input: &Tensor) -> Vec<f64> {
        let &[n, h, w, cin] = input.shape() else {
            unreachable!()
        };
        let k = self.kernel;
        if k == 1 {
            return input.data().to_vec();
        }
        let pad = k / 2;
        let kc = k * k * cin;
        let src = input.data();
        let mut cols = vec![0.0; n * h * w * kc];
        for b in 0..n {
            for y in 0..h {
                for x in 0..w {
                    let row = &mut cols[((b * h + y) * w + x) * kc..][..kc];
                    for ky in 0..k {
                        let Some(iy) = (y + ky).checked_sub(pad).filter(|&v| v < h) else {
                            continue;
                        };
                        for kx in 0..k {
                            let Some(ix) = (x + kx).checked_sub(pad).filter(|&v| v < w) else {
                                continue;
                            };
                            let i_at = ((b * h + iy) * w + ix) * cin;
                            row[(ky * k + kx) * cin..][..cin].copy_from_slice(&src[i_at..i_at + cin]);
                        }
                    }
                }
            }
        }
        cols
    }

    /// Scatter-adds patch-matrix gradients back onto the input grid.
    fn col2im(&self, shape: &[usize], gcols: Vec<f64>) -> Vec<f64> {
        let &[n, h, w, cin] = shape else {
            unreachable!()
        };
        let k = self.kernel;
        if k == 1 {
            return gcols;
        }
        let pad = k / 2;
        let kc = k * k * cin;
        let mut gin = vec![0.0; n * h * w * cin];
        for b in 0..n {
            for y in 0..h {
                for x in 0..w {
                    let row = &gcols[((b * h + y) * w + x) * kc..][..kc];
                    for ky in 0..k {
                        let Some(iy) = (y + ky).checked_sub(pad).filter(|&v| v < h) else {
                            continue;
                        };
                        for kx in 0..k {
                            let Some(ix) = (x + kx).checked_sub(pad).filter(|&v| v < w) else {
                                continue;
                            };
                            let i_at = ((b * h + iy) * w + ix) * cin;
                            for (g, &v) in gin[i_at..i_at + cin]
                                .iter_mut()
                                .zip(&row[(ky * k + kx) * cin..][..cin])
                            {
                                *g += v;
                            }
                        }
                    }
                }
            }
        }
        gin
    }
}

impl Layer for Conv2d {
    fn kind(&self) -> &'static str {
        "conv2d"
    }

    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        self.check(input.shape())?;
        let &[n, h, w, cin] = input.shape() else {
            unreachable!()
        };
        let (k, cout) = (self.kernel, self.out_channels);
        let (m, kc) = (n * h * w, k * k * cin);
        let cols = self.im2col(input);
        let mut out: Vec<f64> = self
            .bias
            .value
            .data()
            .iter()
            .copied()
            .cycle()
            .take(m * cout)
            .collect();
        gemm(
            m,
            kc,
            cout,
            View::rows(&cols, kc),
            View::rows(self.weight.value.data(), cout),
            1.0,
            &mut out,
        );
        self.input = Some(Tensor::new(vec![m, kc], cols)?);
        self.input_shape = input.shape().to_vec();
        Tensor::new(vec![n, h, w, cout], out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let cols = self
            .input
            .as_ref()
            .ok_or_else(|| NnError::NoForward("conv2d".into()))?;
        let &[n, h, w, _] = self.input_shape.as_slice() else {
            unreachable!()
        };
        let cout = self.out_channels;
        if grad_out.shape() != [n, h, w, cout] {
            return Err(shape_err("conv2d backward", &[n, h, w, cout], grad_out.shape()));
        }
        let (m, kc) = (cols.shape()[0], cols.shape()[1]);
        let g = grad_out.data();
        gemm(
            kc,
            m,
            cout,
            View::transposed(cols.data(), kc),
            View::rows(g, cout),
            1.0,
            self.weight.grad.data_mut(),
        );
        let mut gcols = vec![0.0; m * kc];
        gemm(
            m,
            cout,
            kc,
            View::rows(g, cout),
            View::transposed(self.weight.value.data(), cout),
            0.0,
            &mut gcols,
        );
        let gb = self.bias.grad.data_mut();
        for pix in g.chunks_exact(cout) {
            for (acc, &gv) in gb.iter_mut().zip(pix) {
                *acc += gv;
            }
        }
        let shape = self.input_shape.clone();
        let gin = self.col2im(&shape, gcols);
        Tensor::new(shape, gin)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.check(input)?;
        Ok(vec![input[0], input[1], input[2], self.out_channels])
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

/// 1-D convolution along the length axis, stride 1, zero "same" padding.
/// Input `[n, length, c_in]`, weights `[k, c_in, c_out]`.
#[derive(Debug)]
pub struct Conv1d {
    kernel: usize,
    in_channels: usize,
    out_channels: usize,
    weight: Param,
    bias: Param,
    input: Option<Tensor>,
}

impl Conv1d {
    pub fn new<R: Rng + ?Sized>(
        kernel: usize,
        in_channels: usize,
        out_channels: usize,
        rng: &mut R,
    ) -> Self {
        assert!(kernel % 2 == 1, "same padding needs an odd kernel");
        Self {
            kernel,
            in_channels,
            out_channels,
            weight: Param::he_uniform(
                "weight",
                &[kernel, in_channels, out_channels],
                kernel * in_channels,
                rng,
            ),
            bias: Param::zeros("bias", &[out_channels]),
            input: None,
        }
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    fn check(&self, shape: &[usize]) -> Result<()> {
        if shape.len() != 3 || shape[2] != self.in_channels {
            let expected = [
                shape.first().copied().unwrap_or(0),
                shape.get(1).copied().unwrap_or(0),
                self.in_channels,
            ];
            return Err(shape_err("conv1d input", &expected, shape));
        }
        Ok(())
    }
}

impl Layer for Conv1d {
    fn kind(&self) -> &'static str {
        "conv1d"
    }

    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        self.check(input.shape())?;
        let &[n, len, cin] = input.shape() else {
            unreachable!()
        };
        let (k, cout) = (self.kernel, self.out_channels);
        let pad = k / 2;
        let weight = self.weight.value.data();
        let src = input.data();
        let mut out = vec![0.0; n * len * cout];
        for b in 0..n {
            for p in 0..len {
                let o_at = (b * len + p) * cout;
                let o = &mut out[o_at..o_at + cout];
                o.copy_from_slice(self.bias.value.data());
                for kk in 0..k {
                    let Some(ip) = (p + kk).checked_sub(pad).filter(|&v| v < len) else {
                        continue;
                    };
                    let i_at = (b * len + ip) * cin;
                    for ci in 0..cin {
                        let v = src[i_at + ci];
                        let row = &weight[(kk * cin + ci) * cout..(kk * cin + ci + 1) * cout];
                        for (acc, &wv) in o.iter_mut().zip(row) {
                            *acc += v * wv;
                        }
                    }
                }
            }
        }
        self.input = Some(input.clone());
        Tensor::new(vec![n, len, cout], out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let input = self
            .input
            .as_ref()
            .ok_or_else(|| NnError::NoForward("conv1d".into()))?;
        let &[n, len, cin] = input.shape() else {
            unreachable!()
        };
        let (k, cout) = (self.kernel, self.out_channels);
        if grad_out.shape() != [n, len, cout] {
            return Err(shape_err("conv1d backward", &[n, len, cout], grad_out.shape()));
        }
        let pad = k / 2;
        let src = input.data();
        let g = grad_out.data();
        let weight = self.weight.value.data();
        let gw = self.weight.grad.data_mut();
        let mut gin = vec![0.0; src.len()];
        for b in 0..n {
            for p in 0..len {
                let gpix = &g[(b * len + p) * cout..(b * len + p + 1) * cout];
                for kk in 0..k {
                    let Some(ip) = (p + kk).checked_sub(pad).filter(|&v| v < len) else {
                        continue;
                    };
                    let i_at = (b * len + ip) * cin;
                    for ci in 0..cin {
                        let v = src[i_at + ci];
                        let w_at = (kk * cin + ci) * cout;
                        let mut acc = 0.0;
                        for co in 0..cout {
                            gw[w_at + co] += v * gpix[co];
                            acc += weight[w_at + co] * gpix[co];
                        }
                        gin[i_at + ci] += acc;
                    }
                }
            }
        }
        let gb = self.bias.grad.data_mut();
        for pix in g.chunks_exact(cout) {
            for (acc, &gv) in gb.iter_mut().zip(pix) {
                *acc += gv;
            }
        }
        Tensor::new(input.shape().to_vec(), gin)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.check(input)?;
        Ok(vec![input[0], input[1], self.out_channels])
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
