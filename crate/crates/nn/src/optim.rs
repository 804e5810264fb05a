use crate::param::{Param, Parameterized};

/// Plain stochastic gradient descent: `p <- p - lr * grad`, then the
/// gradient is zeroed.
pub fn sgd_step<'a>(params: impl IntoIterator<Item = &'a mut Param>, lr: f64) {
    for p in params {
        for (v, g) in p.value.data_mut().iter_mut().zip(p.grad.data_mut()) {
            *v -= lr * *g;
            *g = 0.0;
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Sgd {
    pub learning_rate: f64,
}

impl Sgd {
    pub fn new(learning_rate: f64) -> Self {
        Self { learning_rate }
    }

    pub fn step<M: Parameterized + ?Sized>(&self, model: &mut M) {
        sgd_step(
            model.named_params_mut().into_iter().map(|(_, p)| p),
            self.learning_rate,
        );
    }
}
