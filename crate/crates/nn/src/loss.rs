use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

/// Mean squared error over all elements and its gradient `2(p - y)/n`.
pub fn mse(pred: &Tensor, target: &[f64]) -> Result<(f64, Tensor)> {
    if pred.len() != target.len() {
        return Err(shape_err("mse target", pred.shape(), &[target.len()]));
    }
    let n = pred.len() as f64;
    let mut grad = pred.clone();
    let mut loss = 0.0;
    for (g, &y) in grad.data_mut().iter_mut().zip(target) {
        let d = *g - y;
        loss += d * d;
        *g = 2.0 * d / n;
    }
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_closed_form() {
        let (loss, grad) = mse(&Tensor::from_vec(vec![3.0]), &[1.0]).unwrap();
        assert_eq!(loss, 4.0);
        assert_eq!(grad.data(), &[4.0]);
    }

    #[test]
    fn zero_at_minimum() {
        let p = Tensor::from_vec(vec![0.5, -2.0, 7.0]);
        let (loss, grad) = mse(&p, &[0.5, -2.0, 7.0]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&g| g == 0.0));
    }
}
