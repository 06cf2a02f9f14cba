//! Second-order forward jets in two variables: value, gradient and Hessian.

use num_complex::Complex64 as C64;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub v: C64,
    pub d: [C64; 2],
    pub h: [[C64; 2]; 2],
}

const Z: C64 = C64 { re: 0.0, im: 0.0 };

impl Jet2 {
    pub fn constant(v: C64) -> Self {
        Self { v, d: [Z; 2], h: [[Z; 2]; 2] }
    }

    /// The coordinate function number `i` (0 or 1) evaluated at `v`.
    pub fn var(v: C64, i: usize) -> Self {
        let mut d = [Z; 2];
        d[i] = C64::new(1.0, 0.0);
        Self { v, d, h: [[Z; 2]; 2] }
    }

    pub fn vars(a: C64, b: C64) -> (Self, Self) {
        (Self::var(a, 0), Self::var(b, 1))
    }

    /// Composes a scalar function with value f0 and derivatives f1, f2 at `self.v`.
    pub fn chain(self, f0: C64, f1: C64, f2: C64) -> Self {
        let mut h = [[Z; 2]; 2];
        for (i, row) in h.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = f2 * self.d[i] * self.d[j] + f1 * self.h[i][j];
            }
        }
        Self { v: f0, d: [f1 * self.d[0], f1 * self.d[1]], h }
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(self) -> Self {
        let r = self.v.inv();
        self.chain(self.v.ln(), r, -r * r)
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn recip(self) -> Self {
        let r = self.v.inv();
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn powi(self, n: i32) -> Self {
        let nf = n as f64;
        let f0 = self.v.powi(n);
        let f1 = if n == 0 { Z } else { nf * self.v.powi(n - 1) };
        let f2 = if n == 0 || n == 1 { Z } else { nf * (nf - 1.0) * self.v.powi(n - 2) };
        self.chain(f0, f1, f2)
    }

    pub fn scale(self, s: C64) -> Self {
        Self {
            v: self.v * s,
            d: [self.d[0] * s, self.d[1] * s],
            h: [[self.h[0][0] * s, self.h[0][1] * s], [self.h[1][0] * s, self.h[1][1] * s]],
        }
    }

    pub fn value(&self) -> C64 {
        self.v
    }
}

impl From<f64> for Jet2 {
    fn from(x: f64) -> Self {
        Jet2::constant(C64::new(x, 0.0))
    }
}

impl From<C64> for Jet2 {
    fn from(x: C64) -> Self {
        Jet2::constant(x)
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        let mut r = self;
        r.v += o.v;
        for i in 0..2 {
            r.d[i] += o.d[i];
            for j in 0..2 {
                r.h[i][j] += o.h[i][j];
            }
        }
        r
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        self + (-o)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        let mut h = [[Z; 2]; 2];
        for (i, row) in h.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = self.h[i][j] * o.v + self.d[i] * o.d[j] + self.d[j] * o.d[i] + self.v * o.h[i][j];
            }
        }
        Jet2 {
            v: self.v * o.v,
            d: [self.d[0] * o.v + self.v * o.d[0], self.d[1] * o.v + self.v * o.d[1]],
            h,
        }
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet2) -> Jet2 {
        self * o.recip()
    }
}

macro_rules! scalar_ops {
    ($t:ty, $conv:expr) => {
        impl Add<$t> for Jet2 {
            type Output = Jet2;
            fn add(self, o: $t) -> Jet2 {
                let mut r = self;
                r.v += $conv(o);
                r
            }
        }
        impl Sub<$t> for Jet2 {
            type Output = Jet2;
            fn sub(self, o: $t) -> Jet2 {
                let mut r = self;
                r.v -= $conv(o);
                r
            }
        }
        impl Mul<$t> for Jet2 {
            type Output = Jet2;
            fn mul(self, o: $t) -> Jet2 {
                self.scale($conv(o))
            }
        }
        impl Div<$t> for Jet2 {
            type Output = Jet2;
            fn div(self, o: $t) -> Jet2 {
                self.scale($conv(o).inv())
            }
        }
        impl Add<Jet2> for $t {
            type Output = Jet2;
            fn add(self, o: Jet2) -> Jet2 {
                o + self
            }
        }
        impl Sub<Jet2> for $t {
            type Output = Jet2;
            fn sub(self, o: Jet2) -> Jet2 {
                (-o) + self
            }
        }
        impl Mul<Jet2> for $t {
            type Output = Jet2;
            fn mul(self, o: Jet2) -> Jet2 {
                o.scale($conv(self))
            }
        }
        impl Div<Jet2> for $t {
            type Output = Jet2;
            fn div(self, o: Jet2) -> Jet2 {
                o.recip().scale($conv(self))
            }
        }
    };
}

scalar_ops!(f64, |x: f64| C64::new(x, 0.0));
scalar_ops!(C64, |x: C64| x);

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: impl Fn(Jet2, Jet2) -> Jet2, a: C64, b: C64) {
        let (x, y) = Jet2::vars(a, b);
        let j = f(x, y);
        let val = |a: C64, b: C64| f(Jet2::constant(a), Jet2::constant(b)).v;
        let h = 1e-4;
        let e = [C64::new(h, 0.0), C64::new(0.0, 0.0)];
        let g = [C64::new(0.0, 0.0), C64::new(h, 0.0)];
        let dirs = [e, g];
        for i in 0..2 {
            let di = dirs[i];
            let fd = (val(a + di[0], b + di[1]) - val(a - di[0], b - di[1])) / (2.0 * h);
            assert!((fd - j.d[i]).norm() < 1e-7 * (1.0 + fd.norm()), "grad {i}: {fd} vs {}", j.d[i]);
            for k in 0..2 {
                let dk = dirs[k];
                let fd = (val(a + di[0] + dk[0], b + di[1] + dk[1]) - val(a + di[0] - dk[0], b + di[1] - dk[1])
                    - val(a - di[0] + dk[0], b - di[1] + dk[1])
                    + val(a - di[0] - dk[0], b - di[1] - dk[1]))
                    / (4.0 * h * h);
                assert!((fd - j.h[i][k]).norm() < 1e-5 * (1.0 + fd.norm()), "hess {i}{k}: {fd} vs {}", j.h[i][k]);
            }
        }
    }

    #[test]
    fn elementary_functions_against_finite_differences() {
        let a = C64::new(0.7, 0.1);
        let b = C64::new(-0.3, 0.2);
        fd_check(|x, y| x * y.exp() + x.ln() * y, a, b);
        fd_check(|x, y| (x * x + y).sqrt() / (1.0 - y), a, b);
        fd_check(|x, y| x.powi(3) * y.recip() - 2.0 * x, a, b);
    }

    #[test]
    fn hessian_symmetric() {
        let (x, y) = Jet2::vars(C64::new(1.2, 0.0), C64::new(0.4, 0.0));
        let j = (x * y.exp()).ln() * x.sqrt();
        assert!((j.h[0][1] - j.h[1][0]).norm() < 1e-15);
    }
}
