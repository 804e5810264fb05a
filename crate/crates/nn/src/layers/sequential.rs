use super::Layer;
use crate::error::Result;
use crate::param::Param;
use crate::tensor::Tensor;

/// Layers applied in order. Parameter names are prefixed with the layer index.
#[derive(Default)]
pub struct Sequential {
    layers: Vec<Box<dyn Layer>>,
}

impl Sequential {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, layer: impl Layer + 'static) -> &mut Self {
        self.layers.push(Box::new(layer));
        self
    }

    pub fn with(mut self, layer: impl Layer + 'static) -> Self {
        self.push(layer);
        self
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn layers(&self) -> &[Box<dyn Layer>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Box<dyn Layer>] {
        &mut self.layers
    }

    /// Shape after every layer, starting with the input shape.
    pub fn trace_shapes(&self, input: &[usize]) -> Result<Vec<(&'static str, Vec<usize>)>> {
        let mut shapes = vec![("input", input.to_vec())];
        let mut cur = input.to_vec();
        for layer in &self.layers {
            cur = layer.output_shape(&cur)?;
            shapes.push((layer.kind(), cur.clone()));
        }
        Ok(shapes)
    }
}

impl Layer for Sequential {
    fn kind(&self) -> &'static str {
        "sequential"
    }

    fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let mut iter = self.layers.iter_mut();
        let Some(first) = iter.next() else {
            return Ok(input.clone());
        };
        let mut cur = first.forward(input)?;
        for layer in iter {
            cur = layer.forward(&cur)?;
        }
        Ok(cur)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let mut grad = grad_out.clone();
        for layer in self.layers.iter_mut().rev() {
            grad = layer.backward(&grad)?;
        }
        Ok(grad)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.layers
            .iter()
            .try_fold(input.to_vec(), |cur, layer| layer.output_shape(&cur))
    }

    fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    fn named_params(&self, prefix: &str) -> Vec<(String, &Param)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.named_params(&format!("{prefix}.{i}")))
            .collect()
    }

    fn named_params_mut(&mut self, prefix: &str) -> Vec<(String, &mut Param)> {
        self.layers
            .iter_mut()
            .enumerate()
            .flat_map(|(i, l)| l.named_params_mut(&format!("{prefix}.{i}")))
            .collect()
    }

    fn clear(&mut self) {
        self.layers.iter_mut().for_each(|l| l.clear());
    }
}
