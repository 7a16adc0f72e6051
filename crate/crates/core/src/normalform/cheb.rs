//! Chebyshev-Lobatto grids and the dense operators used on them.
//!
//! Nodes are `cos(pi i/(n-1))`, so index 0 is the right end of the interval.

use std::f64::consts::PI;

use num_complex::Complex64;

pub fn lobatto(n: usize) -> Vec<f64> {
    (0..n).map(|i| (PI * i as f64 / (n - 1) as f64).cos()).collect()
}

pub fn nodes_on(n: usize, (a, b): (f64, f64)) -> Vec<f64> {
    lobatto(n).into_iter().map(|t| 0.5 * (a + b) + 0.5 * (b - a) * t).collect()
}

pub fn to_reference(x: f64, (a, b): (f64, f64)) -> f64 {
    (2.0 * x - a - b) / (b - a)
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn matmul(&self, o: &Mat) -> Mat {
        assert_eq!(self.cols, o.rows);
        let mut m = Mat::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a != 0.0 {
                    for j in 0..o.cols {
                        *m.at(i, j) += a * o.get(k, j);
                    }
                }
            }
        }
        m
    }

    pub fn scaled(mut self, s: f64) -> Mat {
        self.data.iter_mut().for_each(|v| *v *= s);
        self
    }
}

/// Values at `n` nodes to Chebyshev coefficients.
pub fn values_to_coeffs(n: usize) -> Mat {
    let mut m = Mat::zeros(n, n);
    let nm = (n - 1) as f64;
    for k in 0..n {
        for i in 0..n {
            let mut w = 2.0 / nm * (PI * (k * i) as f64 / nm).cos();
            if i == 0 || i == n - 1 {
                w *= 0.5;
            }
            if k == 0 || k == n - 1 {
                w *= 0.5;
            }
            *m.at(k, i) = w;
        }
    }
    m
}

/// Coefficients `0..n_coef` to values at the `n_out` Lobatto nodes.
pub fn coeffs_to_values(n_out: usize, n_coef: usize) -> Mat {
    let mut m = Mat::zeros(n_out, n_coef);
    let nm = (n_out - 1) as f64;
    for i in 0..n_out {
        for k in 0..n_coef {
            *m.at(i, k) = (PI * (k * i) as f64 / nm).cos();
        }
    }
    m
}

/// Resample an `n`-node interpolant onto `m` nodes.
pub fn resample(n: usize, m: usize) -> Mat {
    coeffs_to_values(m, n).matmul(&values_to_coeffs(n))
}

/// Values on `m` nodes back to `n` nodes by truncating the Chebyshev series.
pub fn project(m: usize, n: usize) -> Mat {
    let cm = values_to_coeffs(m);
    let trunc = Mat { rows: n, cols: m, data: cm.data[..n * m].to_vec() };
    coeffs_to_values(n, n).matmul(&trunc)
}

/// Spectral differentiation on `[a, b]`.
pub fn diff(n: usize, (a, b): (f64, f64)) -> Mat {
    let x = lobatto(n);
    let c = |i: usize| if i == 0 || i == n - 1 { 2.0 } else { 1.0 };
    let mut d = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let s = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                *d.at(i, j) = c(i) / c(j) * s / (x[i] - x[j]);
            }
        }
    }
    // negative-sum trick for the diagonal
    for i in 0..n {
        let s: f64 = (0..n).filter(|&j| j != i).map(|j| d.get(i, j)).sum();
        *d.at(i, i) = -s;
    }
    d.scaled(2.0 / (b - a))
}

/// Chebyshev coefficients of the antiderivative (one extra term), constant
/// chosen so the result vanishes at reference point -1.
pub fn integrate_coeffs(c: &[Complex64], half_width: f64) -> Vec<Complex64> {
    let n = c.len();
    let at = |k: usize| if k < n { c[k] } else { Complex64::new(0.0, 0.0) };
    let mut out = vec![Complex64::new(0.0, 0.0); n + 1];
    #[allow(clippy::needless_range_loop)]
    for k in 1..=n {
        let prev = if k == 1 { 2.0 * at(0) } else { at(k - 1) };
        out[k] = (prev - at(k + 1)) / (2.0 * k as f64);
    }
    // value at -1 is sum (-1)^k out[k]
    let v: Complex64 = out.iter().enumerate().skip(1).map(|(k, a)| if k % 2 == 0 { *a } else { -*a }).sum();
    out[0] = -v;
    out.iter_mut().for_each(|a| *a *= half_width);
    out
}

/// Evaluate a Chebyshev series at a (possibly complex) reference point.
pub fn clenshaw(c: &[Complex64], t: Complex64) -> Complex64 {
    let (mut b1, mut b2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    for &ck in c.iter().skip(1).rev() {
        let b0 = ck + 2.0 * t * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    c[0] + t * b1 - b2
}

/// Barycentric weights of the Lobatto interpolant at reference point `t`.
pub fn bary_row(n: usize, t: f64) -> Vec<f64> {
    let x = lobatto(n);
    let w = |j: usize| {
        let s = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
        if j == 0 || j == n - 1 {
            0.5 * s
        } else {
            s
        }
    };
    if let Some(j) = x.iter().position(|&xj| (t - xj).abs() < 1e-15) {
        let mut r = vec![0.0; n];
        r[j] = 1.0;
        return r;
    }
    let terms: Vec<f64> = (0..n).map(|j| w(j) / (t - x[j])).collect();
    let s: f64 = terms.iter().sum();
    terms.into_iter().map(|v| v / s).collect()
}

/// Apply a real `rows x len` matrix along `axis` of a row-major tensor.
pub fn apply_axis(data: &[Complex64], shape: &[usize], axis: usize, m: &Mat) -> (Vec<Complex64>, Vec<usize>) {
    assert_eq!(shape[axis], m.cols);
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let (len, rows) = (m.cols, m.rows);
    let mut out = vec![Complex64::new(0.0, 0.0); outer * rows * inner];
    for o in 0..outer {
        let src = &data[o * len * inner..(o + 1) * len * inner];
        let dst = &mut out[o * rows * inner..(o + 1) * rows * inner];
        for r in 0..rows {
            let drow = &mut dst[r * inner..(r + 1) * inner];
            for k in 0..len {
                let a = m.get(r, k);
                if a == 0.0 {
                    continue;
                }
                let srow = &src[k * inner..(k + 1) * inner];
                for (d, s) in drow.iter_mut().zip(srow) {
                    *d += a * s;
                }
            }
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[axis] = rows;
    (out, new_shape)
}

/// Spectral derivative along `axis`; lines that are exactly constant get an
/// exact zero instead of rounding noise.
pub fn diff_axis(data: &[Complex64], shape: &[usize], axis: usize, d: &Mat) -> Vec<Complex64> {
    let (mut out, _) = apply_axis(data, shape, axis, d);
    let len = shape[axis];
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    for o in 0..outer {
        for i in 0..inner {
            let at = |k: usize| (o * len + k) * inner + i;
            let first = data[at(0)];
            if (1..len).all(|k| data[at(k)] == first) {
                for k in 0..len {
                    out[at(k)] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }
    out
}

/// Apply the same matrix along every axis.
pub fn apply_all(data: &[Complex64], shape: &[usize], m: &Mat) -> Vec<Complex64> {
    let mut cur = data.to_vec();
    let mut sh = shape.to_vec();
    for ax in 0..shape.len() {
        let (v, s) = apply_axis(&cur, &sh, ax, m);
        cur = v;
        sh = s;
    }
    cur
}
