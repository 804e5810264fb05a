use super::Layer;
use crate::error::{shape_err, NnError, Result};
use crate::tensor::Tensor;

/// Average over non-overlapping `window_h × window_w` blocks of an NHWC
/// tensor. Trailing rows/columns that do not fill a window are dropped.
#[derive(Debug)]
pub struct AvgPool2d {
    window_h: usize,
    window_w: usize,
    in_shape: Option<Vec<usize>>,
}

impl AvgPool2d {
    pub fn new(window_h: usize, window_w: usize) -> Self {
        assert!(window_h > 0 && window_w > 0);
        Self {
            window_h,
            window_w,
            in_shape: None,
        }
    }

    pub fn square(window: usize) -> Self {
        Self::new(window, window)
    }
}

impl Layer for AvgPool2d {
    fn kind(&self) -> &'static str {
        "avgpool2d"
    }

    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let out_shape = self.output_shape(input.shape())?;
        let &[n, h, w, c] = input.shape() else {
            unreachable!()
        };
        let (oh, ow) = (out_shape[1], out_shape[2]);
        let scale = 1.0 / (self.window_h * self.window_w) as f64;
        let src = input.data();
        let mut out = vec![0.0; n * oh * ow * c];
        for b in 0..n {
            for oy in 0..oh {
                for ox in 0..ow {
                    let o_at = ((b * oh + oy) * ow + ox) * c;
                    for dy in 0..self.window_h {
                        for dx in 0..self.window_w {
                            let (y, x) = (oy * self.window_h + dy, ox * self.window_w + dx);
                            let i_at = ((b * h + y) * w + x) * c;
                            for ch in 0..c {
                                out[o_at + ch] += src[i_at + ch];
                            }
                        }
                    }
                    out[o_at..o_at + c].iter_mut().for_each(|v| *v *= scale);
                }
            }
        }
        self.in_shape = Some(input.shape().to_vec());
        Tensor::new(out_shape, out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let in_shape = self
            .in_shape
            .clone()
            .ok_or_else(|| NnError::NoForward("avgpool2d".into()))?;
        let out_shape = self.output_shape(&in_shape)?;
        if grad_out.shape() != out_shape.as_slice() {
            return Err(shape_err("avgpool2d backward", &out_shape, grad_out.shape()));
        }
        let (n, h, w, c) = (in_shape[0], in_shape[1], in_shape[2], in_shape[3]);
        let (oh, ow) = (out_shape[1], out_shape[2]);
        let scale = 1.0 / (self.window_h * self.window_w) as f64;
        let g = grad_out.data();
        let mut gin = vec![0.0; n * h * w * c];
        for b in 0..n {
            for oy in 0..oh {
                for ox in 0..ow {
                    let o_at = ((b * oh + oy) * ow + ox) * c;
                    for dy in 0..self.window_h {
                        for dx in 0..self.window_w {
                            let (y, x) = (oy * self.window_h + dy, ox * self.window_w + dx);
                            let i_at = ((b * h + y) * w + x) * c;
                            for ch in 0..c {
                                gin[i_at + ch] = g[o_at + ch] * scale;
                            }
                        }
                    }
                }
            }
        }
        Tensor::new(in_shape, gin)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input.len() != 4 || input[1] < self.window_h || input[2] < self.window_w {
            return Err(shape_err(
                "avgpool2d input",
                &[0, self.window_h, self.window_w, 0],
                input,
            ));
        }
        Ok(vec![
            input[0],
            input[1] / self.window_h,
            input[2] / self.window_w,
            input[3],
        ])
    }

    fn clear(&mut self) {
        self.in_shape = None;
    }
}

/// Average over non-overlapping windows along the length axis of
/// `[n, length, channels]`.
#[derive(Debug)]
pub struct AvgPool1d {
    window: usize,
    in_shape: Option<Vec<usize>>,
}

impl AvgPool1d {
    pub fn new(window: usize) -> Self {
        assert!(window > 0);
        Self {
            window,
            in_shape: None,
        }
    }
}

impl Layer for AvgPool1d {
    fn kind(&self) -> &'static str {
        "avgpool1d"
    }

    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let out_shape = self.output_shape(input.shape())?;
        let &[n, len, c] = input.shape() else {
            unreachable!()
        };
        let olen = out_shape[1];
        let scale = 1.0 / self.window as f64;
        let mut out = vec![0.0; n * olen * c];
        for b in 0..n {
            for op in 0..olen {
                for d in 0..self.window {
                    let i_at = (b * len + op * self.window + d) * c;
                    for ch in 0..c {
                        out[(b * olen + op) * c + ch] += input.data()[i_at + ch] * scale;
                    }
                }
            }
        }
        self.in_shape = Some(input.shape().to_vec());
        Tensor::new(out_shape, out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let in_shape = self
            .in_shape
            .clone()
            .ok_or_else(|| NnError::NoForward("avgpool1d".into()))?;
        let out_shape = self.output_shape(&in_shape)?;
        if grad_out.shape() != out_shape.as_slice() {
            return Err(shape_err("avgpool1d backward", &out_shape, grad_out.shape()));
        }
        let (n, len, c) = (in_shape[0], in_shape[1], in_shape[2]);
        let olen = out_shape[1];
        let scale = 1.0 / self.window as f64;
        let mut gin = vec![0.0; n * len * c];
        for b in 0..n {
            for op in 0..olen {
                for d in 0..self.window {
                    let i_at = (b * len + op * self.window + d) * c;
                    for ch in 0..c {
                        gin[i_at + ch] = grad_out.data()[(b * olen + op) * c + ch] * scale;
                    }
                }
            }
        }
        Tensor::new(in_shape, gin)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input.len() != 3 || input[1] < self.window {
            return Err(shape_err("avgpool1d input", &[0, self.window, 0], input));
        }
        Ok(vec![input[0], input[1] / self.window, input[2]])
    }

    fn clear(&mut self) {
        self.in_shape = None;
    }
}

/// Collapses every axis after the batch axis.
#[derive(Debug, Default)]
pub struct Flatten {
    in_shape: Option<Vec<usize>>,
}

impl Flatten {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for Flatten {
    fn kind(&self) -> &'static str {
        "flatten"
    }

    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let shape = self.output_shape(input.shape())?;
        self.in_shape = Some(input.shape().to_vec());
        input.clone().reshape(shape)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let in_shape = self
            .in_shape
            .clone()
            .ok_or_else(|| NnError::NoForward("flatten".into()))?;
        grad_out.clone().reshape(in_shape)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input.is_empty() {
            return Err(shape_err("flatten input", &[0, 0], input));
        }
        Ok(vec![input[0], input[1..].iter().product()])
    }

    fn clear(&mut self) {
        self.in_shape = None;
    }
}
