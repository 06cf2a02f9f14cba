//! Dispersionless layer: the Lax symbol λ(p) = p(p − e^v)/(p − e^{v+w}), its Lax flows,
//! Hamiltonian densities, a method-of-lines integrator and the lattice-to-continuum harness.
//!
//! In the flat chart λ = p + t₁ + t₁e^{t₂}/(p − e^{t₂}), with t₂ = v + w and t₁ = e^v(e^w − 1).

use crate::jet::Jet2;
use crate::lattice::{self, Flow, LatticeError, LatticeState};
use crate::specfun::{gauss_2f1_minus_n_n, SpecfunError};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum HydroError {
    #[error("p = {0} is the pole of λ")]
    PoleHit(C64),
    #[error("residue route {residue} vs closed form {closed}")]
    RouteMismatch { residue: C64, closed: C64 },
    #[error("Lax identity residual {0:e} after projection")]
    ProjectionFailure(f64),
    #[error("gradient catastrophe at t = {time}: max |∂ₓ(v,w)| = {gradient:e}")]
    GradientCatastrophe { time: f64, gradient: f64, last: Box<HydroField> },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    /// Flat coordinates (t₁, t₂).
    T,
    /// (v, w).
    VW,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuliPoint {
    pub chart: Chart,
    pub a: C64,
    pub b: C64,
}

impl ModuliPoint {
    pub fn t(t1: C64, t2: C64) -> Self {
        Self { chart: Chart::T, a: t1, b: t2 }
    }

    pub fn vw(v: C64, w: C64) -> Self {
        Self { chart: Chart::VW, a: v, b: w }
    }

    pub fn real_vw(v: f64, w: f64) -> Self {
        Self::vw(C64::new(v, 0.0), C64::new(w, 0.0))
    }

    pub fn real_t(t1: f64, t2: f64) -> Self {
        Self::t(C64::new(t1, 0.0), C64::new(t2, 0.0))
    }

    pub fn t1t2(&self) -> (C64, C64) {
        match self.chart {
            Chart::T => (self.a, self.b),
            Chart::VW => (self.a.exp() * (self.b.exp() - 1.0), self.a + self.b),
        }
    }

    /// Principal log: v = log(e^{t₂} − t₁), w = t₂ − v.
    pub fn vw_pair(&self) -> (C64, C64) {
        match self.chart {
            Chart::VW => (self.a, self.b),
            Chart::T => {
                let v = (self.b.exp() - self.a).ln();
                (v, self.b - v)
            }
        }
    }

    pub fn to_chart(&self, chart: Chart) -> Self {
        match chart {
            Chart::T => {
                let (t1, t2) = self.t1t2();
                Self::t(t1, t2)
            }
            Chart::VW => {
                let (v, w) = self.vw_pair();
                Self::vw(v, w)
            }
        }
    }

    /// (e^v, e^{v+w}): the zero and the pole of λ away from p = 0.
    pub fn zero_pole(&self) -> (C64, C64) {
        match self.chart {
            Chart::VW => (self.a.exp(), (self.a + self.b).exp()),
            Chart::T => {
                let c = self.b.exp();
                (c - self.a, c)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaxSymbol {
    pub point: ModuliPoint,
}

impl LaxSymbol {
    pub fn new(point: ModuliPoint) -> Self {
        Self { point }
    }

    /// Rational form p(p − e^v)/(p − e^{v+w}).
    pub fn rational(&self, p: C64) -> C64 {
        let (a, b) = self.point.zero_pole();
        p * (p - a) / (p - b)
    }

    /// λ₂ = 1/λ.
    pub fn second(&self, p: C64) -> C64 {
        let (a, b) = self.point.zero_pole();
        (p - b) / (p * (p - a))
    }
}

/// λ(p) = p + e^v(e^w − 1) + e^{2v+w}(e^w − 1)/(p − e^{v+w}).
pub fn lax_eval(sym: &LaxSymbol, p: C64) -> Result<C64, HydroError> {
    let (v, w) = sym.point.vw_pair();
    let pole = (v + w).exp();
    let ew1 = w.exp() - 1.0;
    if ew1 != C64::new(0.0, 0.0) && (p - pole).norm() <= 1e-14 * (1.0 + pole.norm()) {
        return Err(HydroError::PoleHit(p));
    }
    let mut out = p + v.exp() * ew1;
    if ew1 != C64::new(0.0, 0.0) {
        out += (2.0 * v + w).exp() * ew1 / (p - pole);
    }
    Ok(out)
}

fn jet_one() -> Jet2 {
    Jet2::from(1.0)
}

fn series_mul(a: &[Jet2], b: &[Jet2], order: usize) -> Vec<Jet2> {
    let mut out = vec![Jet2::from(0.0); order + 1];
    for (i, x) in a.iter().enumerate().take(order + 1) {
        for (j, y) in b.iter().enumerate().take(order + 1 - i) {
            out[i + j] = out[i + j] + *x * *y;
        }
    }
    out
}

fn series_pow(base: &[Jet2], n: usize, order: usize) -> Vec<Jet2> {
    let mut out = vec![Jet2::from(0.0); order + 1];
    out[0] = jet_one();
    for _ in 0..n {
        out = series_mul(&out, base, order);
    }
    out
}

/// Coefficients in s = 1/p of ((1 − a s)/(1 − b s))ⁿ, so that λⁿ = pⁿ·Σ cₖ s^k at p = ∞
/// when a = e^v, b = e^{v+w}.
pub fn series_at_infinity(a: Jet2, b: Jet2, n: usize, order: usize) -> Vec<Jet2> {
    let mut base = vec![jet_one()];
    let mut bk = jet_one();
    for _ in 1..=order {
        base.push(bk * (b - a));
        bk = bk * b;
    }
    series_pow(&base, n, order)
}

/// Coefficients in p of ((b − p)/(a − p))ⁿ, so that λ⁻ⁿ = p⁻ⁿ·Σ cₖ p^k at p = 0.
pub fn series_at_zero(a: Jet2, b: Jet2, n: usize, order: usize) -> Vec<Jet2> {
    let ra = a.recip();
    let mut base = vec![b * ra];
    let mut rk = ra * ra;
    for _ in 1..=order {
        base.push((b - a) * rk);
        rk = rk * ra;
    }
    series_pow(&base, n, order)
}

fn ab_from_t(t1: Jet2, t2: Jet2) -> (Jet2, Jet2) {
    let b = t2.exp();
    (b - t1, b)
}

/// Density by exact series extraction, as a jet in (t₁, t₂):
/// h⁽¹⁾ₙ = (1/n)[p⁰]λⁿ at ∞, h⁽²⁾ₙ = (1/n)[p⁰]λ⁻ⁿ at 0, and h⁽²⁾₀ = −v.
pub fn density_residue_jet(family: u8, n: usize, t1: Jet2, t2: Jet2) -> Result<Jet2, HydroError> {
    let (a, b) = ab_from_t(t1, t2);
    match (family, n) {
        (2, 0) => Ok(-a.ln()),
        (1, 0) => Err(HydroError::Invalid("h⁽¹⁾₀ is not defined".into())),
        (1, _) => Ok(series_at_infinity(a, b, n, n)[n] / n as f64),
        (2, _) => Ok(series_at_zero(a, b, n, n)[n] / n as f64),
        _ => Err(HydroError::Invalid(format!("family {family}"))),
    }
}

pub fn density_residue(family: u8, n: usize, pt: &ModuliPoint) -> Result<C64, HydroError> {
    let (a, b) = pt.zero_pole();
    let (ja, jb) = (Jet2::from(a), Jet2::from(b));
    match family {
        1 => Ok(series_at_infinity(ja, jb, n, n)[n].v / n as f64),
        2 => Ok(series_at_zero(ja, jb, n, n)[n].v / n as f64),
        _ => Err(HydroError::Invalid(format!("family {family}"))),
    }
}

/// h⁽¹⁾ₙ = ((−1)ⁿe^{nv}/n)·₂F₁(−n,n;1;e^w), h⁽²⁾ₙ = ((−1)ⁿe^{−nv}/n)·₂F₁(n,−n;1;e^w).
pub fn density_closed(family: u8, n: usize, pt: &ModuliPoint) -> Result<C64, HydroError> {
    if n == 0 {
        return Err(HydroError::Invalid("n must be positive".into()));
    }
    let (v, w) = pt.vw_pair();
    let nf = n as f64;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let f = gauss_2f1_minus_n_n(n, w.exp());
    let e = match family {
        1 => (nf * v).exp(),
        2 => (-nf * v).exp(),
        _ => return Err(HydroError::Invalid(format!("family {family}"))),
    };
    Ok(sign * e * f / nf)
}

pub fn density_h(family: u8, n: usize, pt: &ModuliPoint) -> Result<C64, HydroError> {
    if n == 0 || n > 12 {
        return Err(HydroError::Invalid(format!("n = {n} outside 1..=12")));
    }
    let closed = density_closed(family, n, pt)?;
    let residue = density_residue(family, n, pt)?;
    if (residue - closed).norm() > 1e-12 * closed.norm().max(1.0) {
        return Err(HydroError::RouteMismatch { residue, closed });
    }
    Ok(closed)
}

/// Dispersionless AL Hamiltonian density (1 − e^w) cosh v.
pub fn al_density(pt: &ModuliPoint) -> C64 {
    let (v, w) = pt.vw_pair();
    (1.0 - w.exp()) * v.cosh()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HydroFlow {
    /// s⁽ᵏ⁾ₙ: ∂λ = {(λⁿ)₊, λ} for k = 1, {(λ⁻ⁿ)₋, λ} for k = 2.
    Lax { k: u8, n: usize },
    /// ½(s⁽¹⁾₁ + s⁽²⁾₁), the long-wave limit of the lattice AL flow.
    Al,
}

impl HydroFlow {
    fn components(self) -> Vec<(f64, u8, usize)> {
        match self {
            HydroFlow::Lax { k, n } => vec![(1.0, k, n)],
            HydroFlow::Al => vec![(0.5, 1, 1), (0.5, 2, 1)],
        }
    }

    fn validate(self) -> Result<(), HydroError> {
        for (_, k, n) in self.components() {
            if !(k == 1 || k == 2) || n == 0 || n > 6 {
                return Err(HydroError::Invalid(format!("flow ({k},{n})")));
            }
        }
        Ok(())
    }
}

/// Periodic field on x ∈ [0, length) with samples at i·length/N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydroField {
    pub length: f64,
    pub values: Vec<ModuliPoint>,
}

impl HydroField {
    pub fn from_fn(length: f64, n: usize, f: impl Fn(f64) -> ModuliPoint) -> Result<Self, HydroError> {
        if !(length > 0.0) || n < 5 {
            return Err(HydroError::Invalid(format!("grid length {length}, {n} points")));
        }
        let dx = length / n as f64;
        Ok(Self { length, values: (0..n).map(|i| f(i as f64 * dx)).collect() })
    }

    pub fn dx(&self) -> f64 {
        self.length / self.values.len() as f64
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_chart(&self, chart: Chart) -> Self {
        Self { length: self.length, values: self.values.iter().map(|p| p.to_chart(chart)).collect() }
    }

    /// Rows (x, re v, im v, re w, im w).
    pub fn csv_rows(&self) -> Vec<[f64; 5]> {
        let dx = self.dx();
        self.values
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let (v, w) = p.vw_pair();
                [i as f64 * dx, v.re, v.im, w.re, w.im]
            })
            .collect()
    }

    /// Trapezoid (= rectangle, periodic) integral of a density.
    pub fn integral(&self, h: impl Fn(&ModuliPoint) -> C64) -> C64 {
        self.values.iter().map(h).sum::<C64>() * self.dx()
    }

    fn check(&self) -> Result<(), HydroError> {
        if self.values.len() < 5 || !(self.length > 0.0) {
            return Err(HydroError::Invalid("field needs ≥ 5 samples and positive length".into()));
        }
        for p in &self.values {
            let (t1, t2) = p.t1t2();
            let (a, b) = p.zero_pole();
            if t1.norm() < 1e-14 || (a - b).norm() < 1e-14 || !t2.is_finite() {
                return Err(HydroError::Invalid(format!("sample outside the regular domain: t = ({t1}, {t2})")));
            }
        }
        Ok(())
    }
}

/// Fourth-order central derivative on a periodic grid.
pub fn periodic_derivative(f: &[C64], dx: f64) -> Vec<C64> {
    let n = f.len();
    (0..n)
        .map(|i| {
            let at = |k: isize| f[((i as isize + k).rem_euclid(n as isize)) as usize];
            (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * dx)
        })
        .collect()
}

fn vw_derivatives(f: &HydroField) -> (Vec<C64>, Vec<C64>) {
    let (v, w): (Vec<C64>, Vec<C64>) = f.values.iter().map(|p| p.vw_pair()).unzip();
    (periodic_derivative(&v, f.dx()), periodic_derivative(&w, f.dx()))
}

/// (λⁿ)₊ (k = 1) or (λ⁻ⁿ)₋ (k = 2) as exponent → coefficient jets in (a, b) = (e^v, e^{v+w}).
fn projection(k: u8, n: usize, a: Jet2, b: Jet2) -> BTreeMap<i64, Jet2> {
    let mut out = BTreeMap::new();
    if k == 1 {
        for (j, c) in series_at_infinity(a, b, n, n).into_iter().enumerate() {
            out.insert(n as i64 - j as i64, c);
        }
    } else {
        for (j, c) in series_at_zero(a, b, n, n - 1).into_iter().enumerate() {
            out.insert(j as i64 - n as i64, c);
        }
    }
    out
}

/// Solves ∂ₛλ = {P, λ} with {f,g} = p(f_p g_x − f_x g_p) for (∂ₛa, ∂ₛb) at one sample,
/// given a, b and their x-derivatives.
fn lax_rates(k: u8, n: usize, a: C64, b: C64, ax: C64, bx: C64) -> Result<(C64, C64), HydroError> {
    let (ja, jb) = Jet2::vars(a, b);
    let proj = projection(k, n, ja, jb);
    // (p − b)²/p · {P, λ} = P_p·Q₁ − P_x·Q₂ with
    // Q₁ = p²(bₓ − aₓ) + p(b aₓ − a bₓ), Q₂ = p² − 2bp + ab.
    let q1 = [(2i64, bx - ax), (1, b * ax - a * bx)];
    let q2 = [(2i64, C64::new(1.0, 0.0)), (1, -2.0 * b), (0, a * b)];
    let mut r: BTreeMap<i64, C64> = BTreeMap::new();
    for (&e, c) in &proj {
        let cp = c.v * e as f64;
        let cx = c.d[0] * ax + c.d[1] * bx;
        for &(qe, qc) in &q1 {
            *r.entry(e - 1 + qe).or_default() += cp * qc;
        }
        for &(qe, qc) in &q2 {
            *r.entry(e + qe).or_default() -= cx * qc;
        }
    }
    let r1 = r.get(&1).copied().unwrap_or_default();
    let r0 = r.get(&0).copied().unwrap_or_default();
    // −(p − b)aₛ + (p − a)bₛ = r₁p + r₀
    let a_s = (r0 + a * r1) / (b - a);
    let b_s = a_s + r1;

    let lam = |p: C64| p * (p - a) / (p - b);
    let lam_p = |p: C64| (p * p - 2.0 * b * p + a * b) / ((p - b) * (p - b));
    let lam_a = |p: C64| -p / (p - b);
    let lam_b = |p: C64| p * (p - a) / ((p - b) * (p - b));
    let radius = 2.0 * (a.norm() + b.norm()) + 1.0;
    let mut worst = 0.0f64;
    for j in 0..8 {
        let p = C64::from_polar(radius * (1.0 + 0.1 * j as f64), 0.3 + std::f64::consts::TAU * j as f64 / 8.0);
        let (mut pp, mut px) = (C64::default(), C64::default());
        for (&e, c) in &proj {
            pp += c.v * e as f64 * p.powi(e as i32 - 1);
            px += (c.d[0] * ax + c.d[1] * bx) * p.powi(e as i32);
        }
        let lam_x = lam_a(p) * ax + lam_b(p) * bx;
        let lhs = lam_a(p) * a_s + lam_b(p) * b_s;
        let rhs = p * (pp * lam_x - px * lam_p(p));
        let scale = 1.0 + lhs.norm() + rhs.norm() + lam(p).norm() * (ax.norm() + bx.norm());
        worst = worst.max((lhs - rhs).norm() / scale);
    }
    if worst > 1e-9 {
        return Err(HydroError::ProjectionFailure(worst));
    }
    Ok((a_s, b_s))
}

/// Lax-route right-hand side: per-sample (∂ₛv, ∂ₛw).
pub fn hydro_flow_rhs(flow: HydroFlow, f: &HydroField) -> Result<Vec<[C64; 2]>, HydroError> {
    flow.validate()?;
    f.check()?;
    let (vx, wx) = vw_derivatives(f);
    let mut out = vec![[C64::default(); 2]; f.len()];
    for (i, p) in f.values.iter().enumerate() {
        let (a, b) = p.zero_pole();
        let ax = a * vx[i];
        let bx = b * (vx[i] + wx[i]);
        for (weight, k, n) in flow.components() {
            let (a_s, b_s) = lax_rates(k, n, a, b, ax, bx)?;
            out[i][0] += weight * a_s / a;
            out[i][1] += weight * (b_s / b - a_s / a);
        }
    }
    Ok(out)
}

/// Conserved density whose bracket-1 flux ∂ₓ(η∇h) generates the flow: h⁽¹⁾ₙ₊₁ for s⁽¹⁾ₙ
/// and h⁽²⁾ₙ₋₁ for s⁽²⁾ₙ.
pub fn flux_density(flow: HydroFlow, t1: Jet2, t2: Jet2) -> Result<Jet2, HydroError> {
    flow.validate()?;
    let mut h = Jet2::from(0.0);
    for (weight, k, n) in flow.components() {
        let m = if k == 1 { n + 1 } else { n - 1 };
        h = h + density_residue_jet(k, m, t1, t2)? * weight;
    }
    Ok(h)
}

fn flux_and_speed(flow: HydroFlow, t: [C64; 2]) -> Result<([C64; 2], f64), HydroError> {
    let (j1, j2) = Jet2::vars(t[0], t[1]);
    let h = flux_density(flow, j1, j2)?;
    // η∇h = (∂₂h, ∂₁h); its Jacobian is [[h₂₁, h₂₂], [h₁₁, h₁₂]].
    let tr = h.h[1][0] + h.h[0][1];
    let det = h.h[1][0] * h.h[0][1] - h.h[1][1] * h.h[0][0];
    let disc = (0.25 * tr * tr - det).sqrt();
    let speed = (0.5 * tr + disc).norm().max((0.5 * tr - disc).norm());
    Ok(([h.d[1], h.d[0]], speed))
}

fn flux_rhs(flow: HydroFlow, t: &[[C64; 2]], dx: f64) -> Result<(Vec<[C64; 2]>, f64), HydroError> {
    let mut f1 = Vec::with_capacity(t.len());
    let mut f2 = Vec::with_capacity(t.len());
    let mut speed = 0.0f64;
    for &ti in t {
        let (f, s) = flux_and_speed(flow, ti)?;
        f1.push(f[0]);
        f2.push(f[1]);
        speed = speed.max(s);
    }
    let d1 = periodic_derivative(&f1, dx);
    let d2 = periodic_derivative(&f2, dx);
    Ok((d1.into_iter().zip(d2).map(|(a, b)| [a, b]).collect(), speed))
}

/// Flux-form right-hand side in the flat chart: per-sample (∂ₛt₁, ∂ₛt₂).
pub fn hydro_flux_rhs(flow: HydroFlow, f: &HydroField) -> Result<Vec<[C64; 2]>, HydroError> {
    f.check()?;
    let t: Vec<[C64; 2]> = f.values.iter().map(|p| p.t1t2().into()).collect();
    Ok(flux_rhs(flow, &t, f.dx())?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydroRun {
    pub field: HydroField,
    pub steps: usize,
    /// Relative drift of ∫t₁, ∫t₂ and ∫(1 − e^w)cosh v.
    pub drift: [f64; 3],
}

pub const CFL: f64 = 0.2;
pub const GRADIENT_LIMIT: f64 = 1e3;

fn max_gradient(f: &HydroField) -> f64 {
    let (vx, wx) = vw_derivatives(f);
    vx.iter().chain(&wx).map(|z| z.norm()).fold(0.0, f64::max)
}

fn monitors(f: &HydroField) -> [C64; 3] {
    [f.integral(|p| p.t1t2().0), f.integral(|p| p.t1t2().1), f.integral(al_density)]
}

/// RK4 in the flat chart with step min(dt_max, CFL·dx/speed).
pub fn pde_integrate(f: &HydroField, flow: HydroFlow, t_final: f64, dt_max: f64) -> Result<HydroRun, HydroError> {
    flow.validate()?;
    f.check()?;
    if !(dt_max > 0.0) || !(t_final >= 0.0) {
        return Err(HydroError::Invalid(format!("dt = {dt_max}, t_final = {t_final}")));
    }
    let dx = f.dx();
    let chart_out = f.values[0].chart;
    let m0 = monitors(f);
    let mut t: Vec<[C64; 2]> = f.values.iter().map(|p| p.t1t2().into()).collect();
    let to_field = |t: &[[C64; 2]]| HydroField {
        length: f.length,
        values: t.iter().map(|x| ModuliPoint::t(x[0], x[1]).to_chart(chart_out)).collect(),
    };
    let axpy = |t: &[[C64; 2]], k: &[[C64; 2]], h: f64| -> Vec<[C64; 2]> {
        t.iter().zip(k).map(|(a, b)| [a[0] + h * b[0], a[1] + h * b[1]]).collect()
    };
    let mut time = 0.0;
    let mut steps = 0;
    while time < t_final * (1.0 - 1e-14) {
        let (k1, speed) = flux_rhs(flow, &t, dx)?;
        let dt = dt_max.min(CFL * dx / speed.max(1e-300)).min(t_final - time);
        let (k2, _) = flux_rhs(flow, &axpy(&t, &k1, 0.5 * dt), dx)?;
        let (k3, _) = flux_rhs(flow, &axpy(&t, &k2, 0.5 * dt), dx)?;
        let (k4, _) = flux_rhs(flow, &axpy(&t, &k3, dt), dx)?;
        for i in 0..t.len() {
            for c in 0..2 {
                t[i][c] += dt / 6.0 * (k1[i][c] + 2.0 * k2[i][c] + 2.0 * k3[i][c] + k4[i][c]);
            }
        }
        time += dt;
        steps += 1;
        let field = to_field(&t);
        let g = max_gradient(&field);
        if !(g <= GRADIENT_LIMIT) {
            return Err(HydroError::GradientCatastrophe { time, gradient: g, last: Box::new(field) });
        }
    }
    let field = to_field(&t);
    let m1 = monitors(&field);
    let mut drift = [0.0; 3];
    for j in 0..3 {
        drift[j] = (m1[j] - m0[j]).norm() / m0[j].norm().max(f64::MIN_POSITIVE);
    }
    Ok(HydroRun { field, steps, drift })
}

/// Smooth periodic slow profile v = v_amp·sin(2πX/L), w = w_mean + w_amp·cos(2πX/L).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlowProfile {
    pub length: f64,
    pub v_amp: f64,
    pub w_mean: f64,
    pub w_amp: f64,
}

impl Default for SlowProfile {
    fn default() -> Self {
        Self { length: 6.4, v_amp: 0.3, w_mean: 0.6, w_amp: 0.2 }
    }
}

impl SlowProfile {
    pub fn v(&self, x: f64) -> f64 {
        self.v_amp * (std::f64::consts::TAU * x / self.length).sin()
    }

    pub fn w(&self, x: f64) -> f64 {
        self.w_mean + self.w_amp * (std::f64::consts::TAU * x / self.length).cos()
    }

    pub fn field(&self, n: usize) -> Result<HydroField, HydroError> {
        HydroField::from_fn(self.length, n, |x| ModuliPoint::real_vw(self.v(x), self.w(x)))
    }

    /// Sites n = 0..L/ε with w_n = w(εn) and v_n = v(ε(n − ½)), realised as
    /// x_n = ρₙe^{θₙ}, y_n = −ρₙe^{−θₙ}, ρₙ² = e^{wₙ} − 1, θₙ − θₙ₋₁ = vₙ.
    pub fn lattice(&self, eps: f64) -> Result<LatticeState, HydroError> {
        let n = sites(self.length, eps)?;
        let v: Vec<f64> = (0..n).map(|i| self.v(eps * (i as f64 - 0.5))).collect();
        if v.iter().sum::<f64>().abs() > 1e-10 {
            return Err(HydroError::Invalid("v profile must have zero lattice mean".into()));
        }
        let mut theta = vec![0.0; n];
        for i in 1..n {
            theta[i] = theta[i - 1] + v[i];
        }
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for (i, th) in theta.iter().enumerate() {
            let w = self.w(eps * i as f64);
            if !(w > 0.0) {
                return Err(HydroError::Invalid(format!("w = {w} ≤ 0: the limit is not hyperbolic")));
            }
            let rho = (w.exp() - 1.0).sqrt();
            x.push(C64::new(rho * th.exp(), 0.0));
            y.push(C64::new(-rho * (-th).exp(), 0.0));
        }
        Ok(LatticeState::periodic(x, y))
    }
}

fn sites(length: f64, eps: f64) -> Result<usize, HydroError> {
    let n = (length / eps).round();
    if !(eps > 0.0) || (n * eps - length).abs() > 1e-9 * length || n < 8.0 {
        return Err(HydroError::Invalid(format!("length {length} is not a multiple of ε = {eps}")));
    }
    Ok(n as usize)
}

/// (vₙ, wₙ) with wₙ = log(1 − xₙyₙ), vₙ = ½ log(xₙyₙ₋₁/(yₙxₙ₋₁)).
pub fn lattice_vw(s: &LatticeState) -> Vec<(C64, C64)> {
    let n = s.len();
    (0..n)
        .map(|i| {
            let j = (i + n - 1) % n;
            let w = (1.0 - s.x[i] * s.y[i]).ln();
            let v = 0.5 * (s.x[i] * s.y[j] / (s.y[i] * s.x[j])).ln();
            (v, w)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub epsilon: f64,
    pub sup_error: f64,
    /// log₂ of the error ratio against the previous (twice larger) ε.
    pub order_estimate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub slow_time: f64,
    pub grid: usize,
    pub lattice_dt: f64,
    pub hydro_dt: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self { slow_time: 0.25, grid: 512, lattice_dt: 0.005, hydro_dt: 1e-2 }
    }
}

/// Evolves the hydro field once and returns the final slow-time field.
pub fn hydro_reference(profile: &SlowProfile, opts: &CompareOptions) -> Result<HydroField, HydroError> {
    let f = profile.field(opts.grid)?;
    Ok(pde_integrate(&f, HydroFlow::Al, opts.slow_time, opts.hydro_dt)?.field)
}

/// Sup-norm gap between the lattice AL flow at t = T/ε and the hydro field at slow time T.
pub fn continuum_compare(profile: &SlowProfile, eps: f64, reference: &HydroField, opts: &CompareOptions) -> Result<f64, HydroError> {
    let n = sites(profile.length, eps)?;
    let stride = eps / reference.dx();
    let half = (0.5 * stride).round() as usize;
    if (stride - 2.0 * half as f64).abs() > 1e-9 || half == 0 {
        return Err(HydroError::Invalid(format!("ε = {eps} is not an even multiple of the grid spacing")));
    }
    let s0 = profile.lattice(eps)?;
    let t_lat = opts.slow_time / eps;
    let traj = lattice::integrate(&s0, Flow::Al, t_lat, opts.lattice_dt.min(t_lat.max(1e-300)), &[])?;
    let got = lattice_vw(&traj.state);
    let m = reference.len();
    let mut err = 0.0f64;
    for (i, (v, w)) in got.iter().enumerate().take(n) {
        let iw = (2 * half * i) % m;
        let iv = (2 * half * i + m - half) % m;
        let (_, wr) = reference.values[iw].vw_pair();
        let (vr, _) = reference.values[iv].vw_pair();
        for e in [(v - vr).norm(), (w - wr).norm()] {
            if !(e <= err) {
                err = e;
            }
        }
    }
    if !err.is_finite() {
        return Err(HydroError::Invalid(format!("non-finite lattice reconstruction at ε = {eps}")));
    }
    Ok(err)
}

pub fn continuum_sweep(profile: &SlowProfile, eps: &[f64], opts: &CompareOptions) -> Result<Vec<ComparisonEntry>, HydroError> {
    let reference = hydro_reference(profile, opts)?;
    let mut out: Vec<ComparisonEntry> = Vec::new();
    for &e in eps {
        let sup_error = continuum_compare(profile, e, &reference, opts)?;
        let order_estimate = out.last().map(|p| (p.sup_error / sup_error).log2() / (p.epsilon / e).log2());
        out.push(ComparisonEntry { epsilon: e, sup_error, order_estimate });
    }
    Ok(out)
}
