//! Partial derivatives of analytic functions of two complex variables by Cauchy integrals:
//! ∂₁^j ∂₂^k f = j!k!/r^{j+k} · mean of f(z₁ + re^{iθ}, z₂ + re^{iφ}) e^{−ijθ − ikφ}.

use num_complex::Complex64 as C64;
use std::f64::consts::TAU;

pub const NODES: usize = 24;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// All partials up to total order `max_order`, indexed `[j][k]` for ∂₁^j∂₂^k.
pub fn cauchy_partials(f: impl Fn(C64, C64) -> C64, z: [C64; 2], r: f64, max_order: usize) -> Vec<Vec<C64>> {
    let n = NODES;
    let roots: Vec<C64> = (0..n).map(|k| C64::from_polar(1.0, TAU * k as f64 / n as f64)).collect();
    let samples: Vec<Vec<C64>> = roots.iter().map(|a| roots.iter().map(|b| f(z[0] + r * a, z[1] + r * b)).collect()).collect();
    let mut out = vec![vec![C64::default(); max_order + 1]; max_order + 1];
    for j in 0..=max_order {
        for k in 0..=max_order - j {
            let mut s = C64::default();
            for (a, row) in samples.iter().enumerate() {
                for (b, v) in row.iter().enumerate() {
                    s += v * roots[(n - (a * j) % n) % n] * roots[(n - (b * k) % n) % n];
                }
            }
            out[j][k] = s / (n * n) as f64 * factorial(j) * factorial(k) / r.powi((j + k) as i32);
        }
    }
    out
}

/// Derivatives of a one-variable analytic function up to `max_order`.
pub fn cauchy_derivatives(f: impl Fn(C64) -> C64, z: C64, r: f64, max_order: usize) -> Vec<C64> {
    let n = 4 * NODES;
    let roots: Vec<C64> = (0..n).map(|k| C64::from_polar(1.0, TAU * k as f64 / n as f64)).collect();
    let samples: Vec<C64> = roots.iter().map(|a| f(z + r * a)).collect();
    (0..=max_order)
        .map(|j| {
            let s: C64 = samples.iter().enumerate().map(|(a, v)| v * roots[(n - (a * j) % n) % n]).sum();
            s / n as f64 * factorial(j) / r.powi(j as i32)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_product_partials() {
        let z = [C64::new(0.3, 0.1), C64::new(-0.2, 0.0)];
        let d = cauchy_partials(|a, b| (2.0 * a + b).exp() * a.ln(), z, 0.1, 3);
        let e = (2.0 * z[0] + z[1]).exp();
        assert!((d[0][0] - e * z[0].ln()).norm() < 1e-11, "{}", (d[0][0] - e * z[0].ln()).norm());
        assert!((d[0][3] - e * z[0].ln()).norm() < 1e-11);
        let d10 = 2.0 * e * z[0].ln() + e / z[0];
        assert!((d[1][0] - d10).norm() < 1e-12);
        let d21 = 4.0 * e * z[0].ln() + 4.0 * e / z[0] - e / (z[0] * z[0]);
        assert!((d[2][1] - d21).norm() < 1e-10);
    }

    #[test]
    fn one_variable() {
        let d = cauchy_derivatives(|z| z.sin(), C64::new(0.4, 0.0), 0.5, 4);
        assert!((d[3] + C64::new(0.4f64.cos(), 0.0)).norm() < 1e-13);
        assert!((d[4] - C64::new(0.4f64.sin(), 0.0)).norm() < 1e-13);
    }
}
