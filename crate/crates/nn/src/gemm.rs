//! Row-major matrix products on top of `matrixmultiply`.

/// Matrix view: data plus (row stride, column stride).
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    pub data: &'a [f64],
    pub rs: isize,
    pub cs: isize,
}

impl<'a> View<'a> {
    pub fn rows(data: &'a [f64], cols: usize) -> Self {
        Self { data, rs: cols as isize, cs: 1 }
    }

    /// Transpose of a row-major matrix with `cols` columns.
    pub fn transposed(data: &'a [f64], cols: usize) -> Self {
        Self { data, rs: 1, cs: cols as isize }
    }
}

/// `c = a * b + beta * c` for `a: m x k`, `b: k x n`, row-major `c: m x n`.
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: View, b: View, beta: f64, c: &mut [f64]) {
    assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the strides address `m x k`, `k x n` and `m x n` elements that
    // lie inside the borrowed slices, checked below.
    let last = |v: &View, r: usize, cc: usize| {
        if r == 0 || cc == 0 {
            0
        } else {
            (r as isize - 1) * v.rs + (cc as isize - 1) * v.cs
        }
    };
    assert!((last(&a, m, k) as usize) < a.data.len().max(1) || k == 0);
    assert!((last(&b, k, n) as usize) < b.data.len().max(1) || k == 0);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.rs,
            a.cs,
            b.data.as_ptr(),
            b.rs,
            b.cs,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
