//! Small dense complex matrices.

use num_complex::Complex64 as C64;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub n: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![C64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn pow(&self, k: usize) -> Self {
        let mut r = Self::identity(self.n);
        for _ in 0..k {
            r = &r * self;
        }
        r
    }

    /// Upper part including the diagonal.
    pub fn upper(&self) -> Self {
        Self::from_fn(self.n, |i, j| if j >= i { self[(i, j)] } else { C64::new(0.0, 0.0) })
    }

    /// Strictly lower part.
    pub fn strict_lower(&self) -> Self {
        Self::from_fn(self.n, |i, j| if j < i { self[(i, j)] } else { C64::new(0.0, 0.0) })
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|v| v * s).collect() }
    }

    /// Max |entry| over rows and columns in `lo..hi`.
    pub fn block_max(&self, lo: usize, hi: usize) -> f64 {
        let mut m = 0.0f64;
        for i in lo..hi {
            for j in lo..hi {
                m = m.max(self[(i, j)].norm());
            }
        }
        m
    }

    /// Inverse of a lower-triangular matrix by forward substitution.
    pub fn lower_inverse(&self) -> Self {
        let n = self.n;
        let mut inv = Self::zeros(n);
        for col in 0..n {
            for i in col..n {
                let mut s = if i == col { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                for k in col..i {
                    s -= self[(i, k)] * inv[(k, col)];
                }
                inv[(i, col)] = s / self[(i, i)];
            }
        }
        inv
    }

    /// Inverse of an upper-triangular matrix by back substitution.
    pub fn upper_inverse(&self) -> Self {
        let n = self.n;
        let mut inv = Self::zeros(n);
        for col in 0..n {
            for i in (0..=col).rev() {
                let mut s = if i == col { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                for k in i + 1..=col {
                    s -= self[(i, k)] * inv[(k, col)];
                }
                inv[(i, col)] = s / self[(i, i)];
            }
        }
        inv
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

impl Mul for &CMat {
    type Output = CMat;
    fn mul(self, o: &CMat) -> CMat {
        let n = self.n;
        let mut r = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..n {
                    r.data[i * n + j] += a * o.data[k * n + j];
                }
            }
        }
        r
    }
}

impl Add for &CMat {
    type Output = CMat;
    fn add(self, o: &CMat) -> CMat {
        CMat { n: self.n, data: self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &CMat {
    type Output = CMat;
    fn sub(self, o: &CMat) -> CMat {
        CMat { n: self.n, data: self.data.iter().zip(&o.data).map(|(a, b)| a - b).collect() }
    }
}

/// Least squares min ‖Mc − y‖ via normal equations with partial pivoting; returns (c, residual norm).
pub fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64) {
    let k = rows[0].len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (r, &yi) in rows.iter().zip(y) {
        for i in 0..k {
            for j in 0..k {
                a[i][j] += r[i] * r[j];
            }
            a[i][k] += r[i] * yi;
        }
    }
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        let p = a[col][col];
        if p.abs() < 1e-300 {
            continue;
        }
        for i in 0..k {
            if i != col {
                let f = a[i][col] / p;
                for j in col..=k {
                    a[i][j] -= f * a[col][j];
                }
            }
        }
    }
    let c: Vec<f64> = (0..k).map(|i| if a[i][i].abs() < 1e-300 { 0.0 } else { a[i][k] / a[i][i] }).collect();
    let res = rows
        .iter()
        .zip(y)
        .map(|(r, yi)| {
            let p: f64 = r.iter().zip(&c).map(|(a, b)| a * b).sum();
            (p - yi).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    (c, res)
}
