use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

/// Joins tensors along their last axis; all leading dimensions must agree.
pub fn concat_last(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts[0].shape();
    let lead = &first[..first.len() - 1];
    let rows: usize = lead.iter().product();
    let mut widths = Vec::with_capacity(parts.len());
    for t in parts {
        let s = t.shape();
        if s.len() != first.len() || &s[..s.len() - 1] != lead {
            return Err(shape_err("concat", first, s));
        }
        widths.push(s[s.len() - 1]);
    }
    let total: usize = widths.iter().sum();
    let mut data = Vec::with_capacity(rows * total);
    for r in 0..rows {
        for (t, &w) in parts.iter().zip(&widths) {
            data.extend_from_slice(&t.data()[r * w..(r + 1) * w]);
        }
    }
    let mut shape = lead.to_vec();
    shape.push(total);
    Tensor::new(shape, data)
}

/// Inverse of [`concat_last`]: slices the last axis into consecutive widths.
pub fn split_last(t: &Tensor, widths: &[usize]) -> Result<Vec<Tensor>> {
    let s = t.shape();
    let total: usize = widths.iter().sum();
    let last = s[s.len() - 1];
    if last != total {
        let mut expected = s.to_vec();
        *expected.last_mut().unwrap() = total;
        return Err(shape_err("split", &expected, s));
    }
    let rows = t.len() / last;
    let mut out: Vec<Vec<f64>> = widths.iter().map(|w| Vec::with_capacity(rows * w)).collect();
    for r in 0..rows {
        let row = &t.data()[r * last..(r + 1) * last];
        let mut at = 0;
        for (buf, &w) in out.iter_mut().zip(widths) {
            buf.extend_from_slice(&row[at..at + w]);
            at += w;
        }
    }
    out.into_iter()
        .zip(widths)
        .map(|(data, &w)| {
            let mut shape = s[..s.len() - 1].to_vec();
            shape.push(w);
            Tensor::new(shape, data)
        })
        .collect()
}
