//! Safe wrapper over `matrixmultiply::dgemm` for strided row-major views.

/// A read-only strided view: element `(i, j)` lives at `i * row_stride + j * col_stride`.
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub row_stride: usize,
    pub col_stride: usize,
}

impl<'a> View<'a> {
    pub fn row_major(data: &'a [f64], rows: usize, cols: usize) -> Self {
        Self {
            data,
            rows,
            cols,
            row_stride: cols,
            col_stride: 1,
        }
    }

    pub fn t(self) -> Self {
        Self {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            row_stride: self.col_stride,
            col_stride: self.row_stride,
        }
    }

    fn fits(&self) -> bool {
        if self.rows == 0 || self.cols == 0 {
            return true;
        }
        (self.rows - 1) * self.row_stride + (self.cols - 1) * self.col_stride < self.data.len()
    }
}

/// `c = a * b + beta * c` where `c` is row-major `a.rows x b.cols`.
pub(crate) fn gemm(a: View<'_>, b: View<'_>, beta: f64, c: &mut [f64]) {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    assert!(a.fits() && b.fits(), "strided view exceeds its buffer");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    assert_eq!(c.len(), m * n, "output buffer has wrong size");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|v| *v *= beta);
        return;
    }
    // dgemm is slow on degenerate shapes, which every scalar-output layer hits.
    if n == 1 && a.col_stride == 1 {
        let b_col: Vec<f64> = (0..k).map(|p| b.data[p * b.row_stride]).collect();
        for (i, ci) in c.iter_mut().enumerate() {
            let row = &a.data[i * a.row_stride..i * a.row_stride + k];
            let dot: f64 = row.iter().zip(&b_col).map(|(x, y)| x * y).sum();
            *ci = beta * *ci + dot;
        }
        return;
    }
    if n == 1 && a.row_stride == 1 {
        c.iter_mut().for_each(|v| *v *= beta);
        for p in 0..k {
            let bp = b.data[p * b.row_stride];
            let col = &a.data[p * a.col_stride..p * a.col_stride + m];
            c.iter_mut().zip(col).for_each(|(ci, &x)| *ci += x * bp);
        }
        return;
    }
    if k == 1 && b.col_stride == 1 {
        let brow = &b.data[..n];
        for (i, crow) in c.chunks_exact_mut(n).enumerate() {
            let ai = a.data[i * a.row_stride];
            crow.iter_mut().zip(brow).for_each(|(ci, &x)| *ci = beta * *ci + ai * x);
        }
        return;
    }
    // SAFETY: every index touched by dgemm is bounded by the `fits` checks above
    // and the exact size check on `c`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.row_stride as isize,
            a.col_stride as isize,
            b.data.as_ptr(),
            b.row_stride as isize,
            b.col_stride as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_product_with_transposes() {
        let a: Vec<f64> = (0..6).map(|v| v as f64).collect(); // 2x3
        let b: Vec<f64> = (0..6).map(|v| (v as f64) * 0.5 - 1.0).collect(); // 2x3
        let mut c = vec![1.0; 9];
        // a^T (3x2) * b (2x3)
        gemm(View::row_major(&a, 2, 3).t(), View::row_major(&b, 2, 3), 1.0, &mut c);
        for i in 0..3 {
            for j in 0..3 {
                let expect: f64 = 1.0 + (0..2).map(|r| a[r * 3 + i] * b[r * 3 + j]).sum::<f64>();
                assert!((c[i * 3 + j] - expect).abs() < 1e-12);
            }
        }
    }

    fn naive(a: View<'_>, b: View<'_>, beta: f64, c0: &[f64]) -> Vec<f64> {
        let mut c = c0.to_vec();
        for i in 0..a.rows {
            for j in 0..b.cols {
                let mut acc = 0.0;
                for p in 0..a.cols {
                    acc += a.data[i * a.row_stride + p * a.col_stride]
                        * b.data[p * b.row_stride + j * b.col_stride];
                }
                c[i * b.cols + j] = beta * c[i * b.cols + j] + acc;
            }
        }
        c
    }

    #[test]
    fn degenerate_shapes_match_naive_product() {
        let vals = |n: usize, s: f64| -> Vec<f64> { (0..n).map(|v| ((v * 37 % 11) as f64 - 5.0) * s).collect() };
        // (m, k, n, transpose a, transpose b)
        for &(m, k, n, ta, tb) in &[
            (7, 5, 1, false, false),
            (5, 7, 1, true, false),
            (7, 1, 4, false, true),
            (6, 3, 4, false, false),
            (1, 6, 1, false, false),
        ] {
            let a = vals(m * k, 0.3);
            let b = vals(k * n, -0.7);
            let av = if ta { View::row_major(&a, k, m).t() } else { View::row_major(&a, m, k) };
            let bv = if tb { View::row_major(&b, n, k).t() } else { View::row_major(&b, k, n) };
            for beta in [0.0, 1.0] {
                let c0 = vals(m * n, 0.1);
                let mut c = c0.clone();
                gemm(av, bv, beta, &mut c);
                let want = naive(av, bv, beta, &c0);
                for (x, y) in c.iter().zip(&want) {
                    assert!((x - y).abs() < 1e-12, "{m}x{k}x{n}: {x} vs {y}");
                }
            }
        }
    }
}
