//! The Frobenius structure on the space of symbols λ(p) = p(p − e^v)/(p − e^{v+w}):
//! residue formulas for η, c and the intersection form, the prepotential
//! F₀ = ½t₂t₁² + e^{t₂}t₁ + ½t₁² log t₁, unit and Euler fields, canonical coordinates,
//! the two hydrodynamic Poisson brackets, bi-Hamiltonian recursions and the deformed flat
//! coordinates θ_{α,p}.
//!
//! Tensors are plain arrays in the chart of the point they were computed at; covariant
//! indices unless stated otherwise.

use crate::diff::cauchy_partials;
use crate::hydro::{self, periodic_derivative, Chart, HydroField, HydroFlow, ModuliPoint};
use crate::jet::Jet2;
use crate::linalg::least_squares;
use crate::report::{worst, CheckResult, SuiteReport};
use crate::specfun::{gauss_2f1, humbert_psi2, SeriesControl, SpecfunError};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use thiserror::Error;

pub type Vec2 = [C64; 2];
pub type Mat2 = [[C64; 2]; 2];
pub type Ten3 = [[[C64; 2]; 2]; 2];

#[derive(Debug, Clone, Error)]
pub enum FrobeniusError {
    #[error("critical values collide: |u₁ − u₂| = {0:e}")]
    DegenerateCritical(f64),
    #[error("t₁ = {0} lies on the branch cut of log")]
    BranchCut(C64),
    #[error("{what}: routes differ by {gap:e}")]
    RouteMismatch { what: String, gap: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

pub fn inv2(m: &Mat2) -> Mat2 {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

pub fn det2(m: &Mat2) -> C64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn max_gap2(a: &Mat2, b: &Mat2) -> f64 {
    let mut m = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            m = worst(m, (a[i][j] - b[i][j]).norm());
        }
    }
    m
}

fn max_gap3(a: &Ten3, b: &Ten3) -> f64 {
    let mut m = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                m = worst(m, (a[i][j][k] - b[i][j][k]).norm());
            }
        }
    }
    m
}

/// Symmetric 3-tensor in two dimensions from its values by number of indices equal to 2.
fn sym3(by_count: [C64; 4]) -> Ten3 {
    let mut t = [[[ZERO; 2]; 2]; 2];
    for (i, a) in t.iter_mut().enumerate() {
        for (j, b) in a.iter_mut().enumerate() {
            for (k, e) in b.iter_mut().enumerate() {
                *e = by_count[i + j + k];
            }
        }
    }
    t
}

/// λ, its moduli partials in the point's chart, λ′ and λ″ at fixed p.
#[derive(Debug, Clone, Copy)]
pub struct LambdaAt {
    pub lam: C64,
    pub d: Vec2,
    pub lp: C64,
    pub lpp: C64,
}

pub fn lambda_at(pt: &ModuliPoint, p: C64) -> LambdaAt {
    let (a, b) = pt.zero_pole();
    let pb = p - b;
    let lam = p * (p - a) / pb;
    let lp = (p * p - 2.0 * b * p + a * b) / (pb * pb);
    let lpp = 2.0 * b * (b - a) / (pb * pb * pb);
    let d = match pt.chart {
        Chart::T => [p / pb, (b - a) * b * p / (pb * pb)],
        Chart::VW => {
            let dw = p * (p - a) * b / (pb * pb);
            [-p * a / pb + dw, dw]
        }
    };
    LambdaAt { lam, d, lp, lpp }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Canonical {
    pub u: Vec2,
    pub q: Vec2,
}

/// q₁,₂ = e^{t₂/2}(e^{t₂/2} ± √t₁), u₁,₂ = (e^{t₂/2} ± √t₁)², principal √.
pub fn canonical_coords(pt: &ModuliPoint) -> Canonical {
    let (t1, t2) = pt.t1t2();
    let s = match pt.chart {
        Chart::T => (0.5 * t2).exp(),
        Chart::VW => (0.5 * (pt.a + pt.b)).exp(),
    };
    let r = t1.sqrt();
    Canonical { u: [(s + r) * (s + r), (s - r) * (s - r)], q: [s * (s + r), s * (s - r)] }
}

/// max over both critical points of |λ′(q)| and |λ(q) − u|/max(1,|u|).
pub fn canonical_residual(pt: &ModuliPoint) -> f64 {
    let can = canonical_coords(pt);
    let mut m = 0.0;
    for i in 0..2 {
        let l = lambda_at(pt, can.q[i]);
        m = worst(m, l.lp.norm());
        m = worst(m, (l.lam - can.u[i]).norm() / can.u[i].norm().max(1.0));
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Simple-zero rule Res f/λ′ = f(q)/λ″(q) at the closed-form critical points.
    Critical,
    /// Trapezoid rule on circles of radius 10⁻²|u₁ − u₂|^{1/2} around each critical point.
    Contour,
}

/// Σ_q Res_{p=q} f(p)/(p²λ′(p)) dp.
pub fn residue_sum(pt: &ModuliPoint, route: Route, f: impl Fn(&LambdaAt) -> C64) -> Result<C64, FrobeniusError> {
    let can = canonical_coords(pt);
    let gap = (can.u[0] - can.u[1]).norm();
    if gap < 1e-8 {
        return Err(FrobeniusError::DegenerateCritical(gap));
    }
    let mut s = ZERO;
    for &q in &can.q {
        match route {
            Route::Critical => {
                let l = lambda_at(pt, q);
                s += f(&l) / (q * q * l.lpp);
            }
            Route::Contour => {
                let r = 1e-2 * gap.sqrt();
                let n = 64;
                let mut acc = ZERO;
                for k in 0..n {
                    let e = C64::from_polar(1.0, TAU * k as f64 / n as f64);
                    let p = q + r * e;
                    let l = lambda_at(pt, p);
                    acc += f(&l) / (p * p * l.lp) * r * e;
                }
                s += acc / n as f64;
            }
        }
    }
    Ok(s)
}

/// η_{ij} = Σ Res ∂ᵢλ∂ⱼλ/(p²λ′).
pub fn residue_eta(pt: &ModuliPoint, route: Route) -> Result<Mat2, FrobeniusError> {
    let mut m = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = residue_sum(pt, route, |l| l.d[i] * l.d[j])?;
        }
    }
    Ok(m)
}

/// c_{ijk} = Σ Res ∂ᵢλ∂ⱼλ∂ₖλ/(p²λ′).
pub fn residue_c(pt: &ModuliPoint, route: Route) -> Result<Ten3, FrobeniusError> {
    let mut t = [[[ZERO; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                t[i][j][k] = residue_sum(pt, route, |l| l.d[i] * l.d[j] * l.d[k])?;
            }
        }
    }
    Ok(t)
}

/// Covariant intersection form g_{ij} = Σ Res ∂ᵢλ∂ⱼλ/(λp²λ′) (the λ → log λ substitution).
pub fn residue_g_cov(pt: &ModuliPoint, route: Route) -> Result<Mat2, FrobeniusError> {
    let mut m = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = residue_sum(pt, route, |l| l.d[i] * l.d[j] / l.lam)?;
        }
    }
    Ok(m)
}

/// ∂tᵢ/∂xₐ for x = (v, w).
pub fn jacobian_vw_to_t(v: C64, w: C64) -> Mat2 {
    let t1 = v.exp() * (w.exp() - 1.0);
    [[t1, (v + w).exp()], [c(1.0), c(1.0)]]
}

pub fn pull_back2(m: &Mat2, j: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for i in 0..2 {
                for k in 0..2 {
                    out[a][b] += j[i][a] * j[k][b] * m[i][k];
                }
            }
        }
    }
    out
}

pub fn pull_back3(t: &Ten3, j: &Mat2) -> Ten3 {
    let mut out = [[[ZERO; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for cc in 0..2 {
                for i in 0..2 {
                    for k in 0..2 {
                        for l in 0..2 {
                            out[a][b][cc] += j[i][a] * j[k][b] * j[l][cc] * t[i][k][l];
                        }
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prepotential {
    pub f: C64,
    pub grad: Vec2,
    pub hess: Mat2,
    pub third: Ten3,
}

fn check_branch(t1: C64) -> Result<(), FrobeniusError> {
    if t1.im == 0.0 && t1.re <= 0.0 {
        return Err(FrobeniusError::BranchCut(t1));
    }
    Ok(())
}

pub fn f0_value(t1: C64, t2: C64) -> C64 {
    0.5 * t2 * t1 * t1 + t2.exp() * t1 + 0.5 * t1 * t1 * t1.ln()
}

pub fn f0_gradient(t1: C64, t2: C64) -> Vec2 {
    let e = t2.exp();
    [t2 * t1 + e + t1 * t1.ln() + 0.5 * t1, 0.5 * t1 * t1 + e * t1]
}

/// F₀ and its derivatives up to order three in closed form.
pub fn prepotential_f0(t1: C64, t2: C64) -> Result<Prepotential, FrobeniusError> {
    check_branch(t1)?;
    let e = t2.exp();
    Ok(Prepotential {
        f: f0_value(t1, t2),
        grad: f0_gradient(t1, t2),
        hess: [[t2 + t1.ln() + 1.5, t1 + e], [t1 + e, t1 * e]],
        third: sym3([t1.inv(), c(1.0), e, t1 * e]),
    })
}

/// Cauchy radius keeping log t₁ analytic on the circles.
pub fn safe_radius(t1: C64) -> f64 {
    0.15 * t1.norm().min(1.0)
}

/// Third derivatives of an analytic scalar function by Cauchy integrals.
pub fn third_derivatives(f: impl Fn(C64, C64) -> C64, t: Vec2, r: f64) -> Ten3 {
    let d = cauchy_partials(f, t, r, 3);
    sym3([d[3][0], d[2][1], d[1][2], d[0][3]])
}

/// Cauchy radius keeping the pole t₁ = e^{t₂} of e outside the polydisc.
pub fn unit_radius(t1: C64, t2: C64) -> f64 {
    let e = t2.exp().norm();
    (0.2 * (t1 - t2.exp()).norm() / (1.0 + e)).min(safe_radius(t1))
}

/// e = (t₁∂₁ − ∂₂)/(t₁ − e^{t₂}).
pub fn unit_field(t1: C64, t2: C64) -> Vec2 {
    let d = t1 - t2.exp();
    [t1 / d, -d.inv()]
}

/// E = t₁∂₁ + ∂₂.
pub fn euler_field(t1: C64, _t2: C64) -> Vec2 {
    [t1, c(1.0)]
}

fn unit_jet(t1: Jet2, t2: Jet2) -> [Jet2; 2] {
    let d = t1 - t2.exp();
    [t1 / d, -d.recip()]
}

/// Lie bracket [X, Y] at t with first derivatives by Cauchy integrals.
pub fn lie_bracket(x: impl Fn(C64, C64) -> Vec2, y: impl Fn(C64, C64) -> Vec2, t: Vec2, r: f64) -> Vec2 {
    let grad = |f: &dyn Fn(C64, C64) -> Vec2, i: usize| {
        let d = cauchy_partials(|a, b| f(a, b)[i], t, r, 1);
        [d[1][0], d[0][1]]
    };
    let xv = x(t[0], t[1]);
    let yv = y(t[0], t[1]);
    let mut out = [ZERO; 2];
    for (i, o) in out.iter_mut().enumerate() {
        let dy = grad(&y, i);
        let dx = grad(&x, i);
        *o = xv[0] * dy[0] + xv[1] * dy[1] - yv[0] * dx[0] - yv[1] * dx[1];
    }
    out
}

/// c^k_{ij} = η^{kl}c_{lij}.
pub fn structure_constants(eta: &Mat2, cc: &Ten3) -> Ten3 {
    let ei = inv2(eta);
    let mut out = [[[ZERO; 2]; 2]; 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                for l in 0..2 {
                    out[k][i][j] += ei[k][l] * cc[l][i][j];
                }
            }
        }
    }
    out
}

pub fn product(cup: &Ten3, x: &Vec2, y: &Vec2) -> Vec2 {
    let mut out = [ZERO; 2];
    for (k, o) in out.iter_mut().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                *o += cup[k][i][j] * x[i] * y[j];
            }
        }
    }
    out
}

/// max |c_{ija}η^{ab}c_{bkl} − c_{ika}η^{ab}c_{bjl}|.
pub fn wdvv_residual(eta: &Mat2, cc: &Ten3) -> f64 {
    let ei = inv2(eta);
    let contract = |i: usize, j: usize, k: usize, l: usize| {
        let mut s = ZERO;
        for a in 0..2 {
            for b in 0..2 {
                s += cc[i][j][a] * ei[a][b] * cc[b][k][l];
            }
        }
        s
    };
    let mut m = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    m = worst(m, (contract(i, j, k, l) - contract(i, k, j, l)).norm());
                }
            }
        }
    }
    m
}

pub fn wdvv_check(pt: &ModuliPoint) -> Result<f64, FrobeniusError> {
    Ok(wdvv_residual(&residue_eta(pt, Route::Critical)?, &residue_c(pt, Route::Critical)?))
}

/// Idempotent frame ∂_{uᵢ} in flat coordinates: columns of (∂u/∂t)⁻¹.
pub fn idempotent_frame(pt: &ModuliPoint) -> [Vec2; 2] {
    let (t1, t2) = pt.t1t2();
    let s = (0.5 * t2).exp();
    let r = t1.sqrt();
    let du = [[(s + r) / r, s * (s + r)], [-(s - r) / r, s * (s - r)]];
    let inv = inv2(&du);
    [[inv[0][0], inv[1][0]], [inv[0][1], inv[1][1]]]
}

/// g^{ij} = E^k c_k^{ij} with indices raised by η (T chart).
pub fn intersection_form_euler(pt: &ModuliPoint) -> Result<Mat2, FrobeniusError> {
    let pt = pt.to_chart(Chart::T);
    let eta = residue_eta(&pt, Route::Critical)?;
    let cc = residue_c(&pt, Route::Critical)?;
    let ei = inv2(&eta);
    let e = euler_field(pt.a, pt.b);
    let mut g = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        g[i][j] += e[k] * ei[i][a] * ei[j][b] * cc[k][a][b];
                    }
                }
            }
        }
    }
    Ok(g)
}

/// Contravariant intersection form from the logarithmic residue formula (T chart).
pub fn intersection_form_residue(pt: &ModuliPoint) -> Result<Mat2, FrobeniusError> {
    Ok(inv2(&residue_g_cov(&pt.to_chart(Chart::T), Route::Critical)?))
}

pub fn intersection_form(pt: &ModuliPoint) -> Result<Mat2, FrobeniusError> {
    let a = intersection_form_euler(pt)?;
    let b = intersection_form_residue(pt)?;
    let scale = a.iter().flatten().map(|z| z.norm()).fold(1.0, f64::max);
    let gap = max_gap2(&a, &b) / scale;
    if !(gap < 1e-10) {
        return Err(FrobeniusError::RouteMismatch { what: "intersection form".into(), gap });
    }
    Ok(a)
}

/// Laurent polynomial Σ coef·t₁^i·(e^{t₂})^j with integer coefficients.
pub type Sym = BTreeMap<(i32, i32), i64>;

fn sym(terms: &[((i32, i32), i64)]) -> Sym {
    let mut s = Sym::new();
    for &(k, v) in terms {
        *s.entry(k).or_insert(0) += v;
    }
    s.retain(|_, v| *v != 0);
    s
}

fn sym_mul(a: &Sym, b: &Sym) -> Sym {
    let mut s = Sym::new();
    for (&(i, j), &x) in a {
        for (&(k, l), &y) in b {
            *s.entry((i + k, j + l)).or_insert(0) += x * y;
        }
    }
    s.retain(|_, v| *v != 0);
    s
}

fn sym_add(a: &Sym, b: &Sym) -> Sym {
    let mut s = a.clone();
    for (&k, &v) in b {
        *s.entry(k).or_insert(0) += v;
    }
    s.retain(|_, v| *v != 0);
    s
}

/// g^{ij} = E^k c_k^{ij} computed on exact symbolic third derivatives of F₀.
pub fn symbolic_intersection_form() -> [[Sym; 2]; 2] {
    let third = [sym(&[((-1, 0), 1)]), sym(&[((0, 0), 1)]), sym(&[((0, 1), 1)]), sym(&[((1, 1), 1)])];
    let euler = [sym(&[((1, 0), 1)]), sym(&[((0, 0), 1)])];
    let raise = |i: usize| 1 - i;
    let mut g: [[Sym; 2]; 2] = Default::default();
    for i in 0..2 {
        for j in 0..2 {
            for (k, ek) in euler.iter().enumerate() {
                let cnt = k + raise(i) + raise(j);
                g[i][j] = sym_add(&g[i][j], &sym_mul(ek, &third[cnt]));
            }
        }
    }
    g
}

/// δ′ coefficients of the second bracket: {2t₁e^{t₂}, t₁ + e^{t₂}, 2}.
pub fn printed_bracket2_metric() -> [[Sym; 2]; 2] {
    let g11 = sym(&[((1, 1), 2)]);
    let g12 = sym(&[((1, 0), 1), ((0, 1), 1)]);
    let g22 = sym(&[((0, 0), 2)]);
    [[g11, g12.clone()], [g12, g22]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bracket {
    First,
    Second,
}

/// Contravariant metric of a bracket as jets in (t₁, t₂).
pub fn bracket_metric_jet(b: Bracket, t1: Jet2, t2: Jet2) -> [[Jet2; 2]; 2] {
    match b {
        Bracket::First => [[Jet2::from(0.0), Jet2::from(1.0)], [Jet2::from(1.0), Jet2::from(0.0)]],
        Bracket::Second => {
            let e = t2.exp();
            let off = t1 + e;
            [[t1 * e * 2.0, off], [off, Jet2::from(2.0)]]
        }
    }
}

pub fn bracket_metric(b: Bracket, t1: C64, t2: C64) -> Mat2 {
    let m = bracket_metric_jet(b, Jet2::from(t1), Jet2::from(t2));
    [[m[0][0].v, m[0][1].v], [m[1][0].v, m[1][1].v]]
}

/// Γ^{ij}_k as `[i][j][k]`.
pub fn bracket_gamma(b: Bracket, t1: C64, t2: C64) -> Ten3 {
    let mut g = [[[ZERO; 2]; 2]; 2];
    if b == Bracket::Second {
        let e = t2.exp();
        g[0][0] = [e, t1 * e];
        g[1][0] = [c(1.0), e];
    }
    g
}

/// max |Γ^{ij}_k + Γ^{ji}_k − ∂ₖg^{ij}|.
pub fn gamma_symmetry_residual(b: Bracket, t1: C64, t2: C64) -> f64 {
    let (j1, j2) = Jet2::vars(t1, t2);
    let m = bracket_metric_jet(b, j1, j2);
    let g = bracket_gamma(b, t1, t2);
    let mut r = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                r = worst(r, (g[i][j][k] + g[j][i][k] - m[i][j].d[k]).norm());
            }
        }
    }
    r
}

/// A(h)ⁱₖ = g^{ij}∂ⱼ∂ₖh + Γ^{ij}ₖ∂ⱼh.
pub fn characteristic_matrix(b: Bracket, h: &Jet2, t1: C64, t2: C64) -> Mat2 {
    let g = bracket_metric(b, t1, t2);
    let gam = bracket_gamma(b, t1, t2);
    let mut a = [[ZERO; 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            for j in 0..2 {
                a[i][k] += g[i][j] * h.h[j][k] + gam[i][j][k] * h.d[j];
            }
        }
    }
    a
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// ₂F₁(a, b; 1; ·) composed with a jet, derivatives from d/dx ₂F₁(a,b;c;x) = (ab/c)₂F₁(a+1,b+1;c+1;x).
fn hyp_jet(a: f64, b: f64, x: Jet2) -> Result<Jet2, FrobeniusError> {
    let ctl = SeriesControl::default();
    let f = |k: f64| gauss_2f1(c(a + k), c(b + k), c(1.0 + k), x.v, ctl);
    let f0 = f(0.0)?;
    let f1 = c(a * b) * f(1.0)?;
    let f2 = if a * (a + 1.0) * b * (b + 1.0) == 0.0 { ZERO } else { c(a * (a + 1.0) * b * (b + 1.0) / 2.0) * f(2.0)? };
    Ok(x.chain(f0, f1, f2))
}

/// Closed-form density h⁽ᵅ⁾ₙ as a jet in (t₁, t₂).
pub fn density_jet(family: u8, n: usize, t1: C64, t2: C64) -> Result<Jet2, FrobeniusError> {
    if n == 0 {
        return Err(FrobeniusError::Invalid("n must be positive".into()));
    }
    let (j1, j2) = Jet2::vars(t1, t2);
    let ev = j2.exp() - j1;
    let x = j2.exp() / ev;
    let nf = n as f64;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let f = hyp_jet(-nf, nf, x)?;
    let e = match family {
        1 => ev.powi(n as i32),
        2 => ev.powi(-(n as i32)),
        _ => return Err(FrobeniusError::Invalid(format!("family {family}"))),
    };
    Ok(e * f * (sign / nf))
}

/// θ₁,ₚ for p ≤ 2 as listed:
/// t₂, e^{t₂} + t₁(t₂ + log t₁ − 1), (t₁/4)(2(2e^{t₂} + t₁)log t₁ + t₁(2t₂ − 1) + 4e^{t₂}(t₂ − 1)) + ¼e^{2t₂}.
pub fn theta1_jet(p: usize, t1: Jet2, t2: Jet2) -> Result<Jet2, FrobeniusError> {
    let e = t2.exp();
    let l = t1.ln();
    match p {
        0 => Ok(t2),
        1 => Ok(e + t1 * (t2 + l - 1.0)),
        2 => Ok(t1 / 4.0 * ((e * 2.0 + t1) * l * 2.0 + t1 * (t2 * 2.0 - 1.0) + e * (t2 - 1.0) * 4.0) + e * e / 4.0),
        _ => Err(FrobeniusError::Invalid(format!("θ₁,{p} is only known for p ≤ 2"))),
    }
}

/// θ₂,ₚ = h⁽¹⁾ₚ₊₁/p!.
pub fn theta2_jet(p: usize, t1: C64, t2: C64) -> Result<Jet2, FrobeniusError> {
    Ok(density_jet(1, p + 1, t1, t2)? / factorial(p))
}

pub fn theta_value(alpha: u8, p: usize, t1: C64, t2: C64) -> Result<C64, FrobeniusError> {
    match alpha {
        1 => Ok(theta1_jet(p, Jet2::from(t1), Jet2::from(t2))?.v),
        2 => Ok(hydro::density_closed(1, p + 1, &ModuliPoint::t(t1, t2)).map_err(|e| FrobeniusError::Invalid(e.to_string()))? / factorial(p)),
        _ => Err(FrobeniusError::Invalid(format!("α = {alpha}"))),
    }
}

/// Bracket flow ∂ₛtⁱ = A(h)ⁱₖ∂ₓtᵏ of a hydrodynamic density given as a jet evaluator.
pub fn poisson_flow(b: Bracket, h: impl Fn(C64, C64) -> Jet2, f: &HydroField) -> Vec<Vec2> {
    let t: Vec<Vec2> = f.values.iter().map(|p| p.t1t2().into()).collect();
    let t1x = periodic_derivative(&t.iter().map(|x| x[0]).collect::<Vec<_>>(), f.dx());
    let t2x = periodic_derivative(&t.iter().map(|x| x[1]).collect::<Vec<_>>(), f.dx());
    t.iter()
        .enumerate()
        .map(|(i, x)| {
            let a = characteristic_matrix(b, &h(x[0], x[1]), x[0], x[1]);
            [a[0][0] * t1x[i] + a[0][1] * t2x[i], a[1][0] * t1x[i] + a[1][1] * t2x[i]]
        })
        .collect()
}

/// max |a − s·b| over entries, relative to max(1, max |s·b|).
fn mat_gap(a: &Mat2, b: &Mat2, s: C64) -> f64 {
    let mut m = 0.0;
    let mut scale = 1.0f64;
    for i in 0..2 {
        for j in 0..2 {
            m = worst(m, (a[i][j] - s * b[i][j]).norm());
            scale = scale.max((s * b[i][j]).norm());
        }
    }
    m / scale
}

fn mat_lin(a: &Mat2, b: &Mat2, sb: f64) -> Mat2 {
    let mut m = *a;
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] += sb * b[i][j];
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursionResiduals {
    /// |A₂(h⁽¹⁾ₙ) − A₁(h⁽¹⁾ₙ₊₁)|, relative to the entry size
    pub first: f64,
    /// |A₂(h⁽²⁾ₙ₊₁) − A₁(h⁽²⁾ₙ)|, relative to the entry size
    pub second: f64,
}

pub fn recursion_check(n: usize, points: &[Vec2]) -> Result<RecursionResiduals, FrobeniusError> {
    if n == 0 || n > 5 {
        return Err(FrobeniusError::Invalid(format!("n = {n} outside 1..=5")));
    }
    let mut r = RecursionResiduals { first: 0.0, second: 0.0 };
    for t in points {
        let a = |b: Bracket, fam: u8, m: usize| -> Result<Mat2, FrobeniusError> { Ok(characteristic_matrix(b, &density_jet(fam, m, t[0], t[1])?, t[0], t[1])) };
        r.first = worst(r.first, mat_gap(&a(Bracket::Second, 1, n)?, &a(Bracket::First, 1, n + 1)?, c(1.0)));
        r.second = worst(r.second, mat_gap(&a(Bracket::Second, 2, n + 1)?, &a(Bracket::First, 2, n)?, c(1.0)));
    }
    Ok(r)
}

/// Residual of {·, h̄₂,ₚ₋₁}₂ = (p+1){·, h̄₂,ₚ}₁ with h̄_{α,p} = ∫θ_{α,p+1}.
pub fn levelt_second_family(p: usize, points: &[Vec2]) -> Result<f64, FrobeniusError> {
    let mut r = 0.0;
    for t in points {
        let lhs = characteristic_matrix(Bracket::Second, &theta2_jet(p, t[0], t[1])?, t[0], t[1]);
        let rhs = characteristic_matrix(Bracket::First, &theta2_jet(p + 1, t[0], t[1])?, t[0], t[1]);
        r = worst(r, mat_gap(&lhs, &rhs, c((p + 1) as f64)));
    }
    Ok(r)
}

/// Residual of {·, h̄₁,ₚ₋₁}₂ = 2{·, h̄₂,ₚ₋₁}₁ + p{·, h̄₁,ₚ}₁ (p ≤ 1, as printed).
pub fn levelt_mixed(p: usize, points: &[Vec2]) -> Result<f64, FrobeniusError> {
    let mut r = 0.0;
    for t in points {
        let (j1, j2) = Jet2::vars(t[0], t[1]);
        let lhs = characteristic_matrix(Bracket::Second, &theta1_jet(p, j1, j2)?, t[0], t[1]);
        let a = characteristic_matrix(Bracket::First, &theta2_jet(p, t[0], t[1])?, t[0], t[1]);
        let b = characteristic_matrix(Bracket::First, &theta1_jet(p + 1, j1, j2)?, t[0], t[1]);
        let rhs = mat_lin(&[[ZERO; 2]; 2], &mat_lin(&a, &b, p as f64 / 2.0), 2.0);
        r = worst(r, mat_gap(&lhs, &rhs, c(1.0)));
    }
    Ok(r)
}

/// Residual of ∂_α∂_βθ_{γ,p+1} = c^ε_{αβ}∂_εθ_{γ,p}, derivatives by Cauchy integrals.
pub fn theta_recursion_residual(gamma: u8, p: usize, t: Vec2) -> Result<f64, FrobeniusError> {
    let r = safe_radius(t[0]);
    theta_value(gamma, p + 1, t[0], t[1])?;
    let next = cauchy_partials(|a, b| theta_value(gamma, p + 1, a, b).unwrap_or(C64::new(f64::NAN, 0.0)), t, r, 2);
    let cur = cauchy_partials(|a, b| theta_value(gamma, p, a, b).unwrap_or(C64::new(f64::NAN, 0.0)), t, r, 1);
    let pre = prepotential_f0(t[0], t[1])?;
    let eta = [[c(0.0), c(1.0)], [c(1.0), c(0.0)]];
    let cup = structure_constants(&eta, &pre.third);
    let hess = [[next[2][0], next[1][1]], [next[1][1], next[0][2]]];
    let grad = [cur[1][0], cur[0][1]];
    let mut m = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let rhs = cup[0][a][b] * grad[0] + cup[1][a][b] * grad[1];
            m = worst(m, (hess[a][b] - rhs).norm());
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsiForm {
    /// f(ζ) = (1 − e^w)e^v Ψ₂(1; 1, 2; ζe^v(1 − e^w), −e^{w+v}ζ).
    Printed,
    /// f(ζ) = t₁ Ψ₂(1; 1, 2; ζe^{t₂}, ζt₁).
    Corrected,
}

fn psi_arguments(form: PsiForm, pt: &ModuliPoint) -> (C64, C64, C64) {
    let (v, w) = pt.vw_pair();
    let (t1, t2) = pt.t1t2();
    match form {
        PsiForm::Printed => ((1.0 - w.exp()) * v.exp(), v.exp() * (1.0 - w.exp()), -(w + v).exp()),
        PsiForm::Corrected => (t1, t2.exp(), t1),
    }
}

/// ζ-Taylor coefficients of the generating function, from Ψ₂ values on the circle |ζ| = ½.
pub fn psi2_coefficients(form: PsiForm, pt: &ModuliPoint, p_max: usize) -> Result<Vec<C64>, FrobeniusError> {
    let (pre, x, y) = psi_arguments(form, pt);
    let n = 48;
    let r = 0.5;
    let one = c(1.0);
    let mut vals = Vec::with_capacity(n);
    for k in 0..n {
        let z = C64::from_polar(r, TAU * k as f64 / n as f64);
        vals.push(pre * humbert_psi2(one, one, c(2.0), z * x, z * y, SeriesControl::default())?);
    }
    Ok((0..=p_max)
        .map(|p| {
            let s: C64 = vals.iter().enumerate().map(|(k, v)| v * C64::from_polar(1.0, -TAU * (k * p) as f64 / n as f64)).sum();
            s / n as f64 / r.powi(p as i32)
        })
        .collect())
}

/// Exact anti-diagonal sums Σ_{l+m=p} (1)_p/((1)_l(2)_m l!m!) x^l y^m.
pub fn psi2_coefficients_exact(form: PsiForm, pt: &ModuliPoint, p_max: usize) -> Vec<C64> {
    let (pre, x, y) = psi_arguments(form, pt);
    (0..=p_max)
        .map(|p| {
            let mut s = ZERO;
            for l in 0..=p {
                let m = p - l;
                let coef = factorial(p) / (factorial(l) * factorial(m + 1) * factorial(l) * factorial(m));
                s += coef * x.powu(l as u32) * y.powu(m as u32);
            }
            pre * s
        })
        .collect()
}

/// max_p |coefficient − h⁽¹⁾ₚ₊₁/p!|/max(1, |h⁽¹⁾ₚ₊₁/p!|).
pub fn psi2_gap(form: PsiForm, pt: &ModuliPoint, p_max: usize) -> Result<f64, FrobeniusError> {
    let coeffs = psi2_coefficients(form, pt, p_max)?;
    let (t1, t2) = pt.t1t2();
    let mut m = 0.0;
    for (p, k) in coeffs.iter().enumerate() {
        let want = theta_value(2, p, t1, t2)?;
        m = worst(m, (k - want).norm() / want.norm().max(1.0));
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSeries {
    pub alpha: u8,
    pub coeffs: Vec<C64>,
}

/// θ_{α,p}, p ≤ p_max. For α = 2 the Ψ₂ coefficients of `form` must match h⁽¹⁾ₚ₊₁/p!.
pub fn theta_series(alpha: u8, p_max: usize, pt: &ModuliPoint, form: PsiForm) -> Result<ThetaSeries, FrobeniusError> {
    if p_max > 6 {
        return Err(FrobeniusError::Invalid(format!("p_max = {p_max} > 6")));
    }
    let (t1, t2) = pt.t1t2();
    if alpha == 2 {
        let gap = psi2_gap(form, pt, p_max)?;
        if !(gap < 1e-10) {
            return Err(FrobeniusError::RouteMismatch { what: format!("Ψ₂ coefficients ({form:?})"), gap });
        }
    } else if alpha == 1 {
        check_branch(t1)?;
    }
    let coeffs = (0..=p_max).map(|p| theta_value(alpha, p, t1, t2)).collect::<Result<Vec<_>, _>>()?;
    Ok(ThetaSeries { alpha, coeffs })
}

type Riemann = [[[[C64; 2]; 2]; 2]; 2];

/// R^m_{ijk} of a contravariant metric given as jets (values, first and second derivatives).
pub fn riemann_contravariant(m: &[[Jet2; 2]; 2]) -> Riemann {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let g = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
    // Γ_{l,ij} = ½(∂ᵢG_{lj} + ∂ⱼG_{li} − ∂ₗG_{ij}) and its derivatives.
    let mut gl = [[[ZERO; 2]; 2]; 2];
    let mut dgl = [[[[ZERO; 2]; 2]; 2]; 2];
    for l in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                gl[l][i][j] = 0.5 * (g[l][j].d[i] + g[l][i].d[j] - g[i][j].d[l]);
                for a in 0..2 {
                    dgl[a][l][i][j] = 0.5 * (g[l][j].h[i][a] + g[l][i].h[j][a] - g[i][j].h[l][a]);
                }
            }
        }
    }
    let mut gam = [[[ZERO; 2]; 2]; 2];
    let mut dgam = [[[[ZERO; 2]; 2]; 2]; 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                for l in 0..2 {
                    gam[k][i][j] += m[k][l].v * gl[l][i][j];
                    for a in 0..2 {
                        dgam[a][k][i][j] += m[k][l].d[a] * gl[l][i][j] + m[k][l].v * dgl[a][l][i][j];
                    }
                }
            }
        }
    }
    let mut r = [[[[ZERO; 2]; 2]; 2]; 2];
    for mm in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let mut s = dgam[j][mm][i][k] - dgam[k][mm][i][j];
                    for n in 0..2 {
                        s += gam[mm][j][n] * gam[n][i][k] - gam[mm][k][n] * gam[n][i][j];
                    }
                    r[mm][i][j][k] = s;
                }
            }
        }
    }
    r
}

/// max |R| of g₂ + λg₁ at t.
pub fn pencil_curvature(lambda: f64, t: Vec2) -> f64 {
    let (j1, j2) = Jet2::vars(t[0], t[1]);
    let g1 = bracket_metric_jet(Bracket::First, j1, j2);
    let g2 = bracket_metric_jet(Bracket::Second, j1, j2);
    let mut m = g2;
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = g2[i][j] + g1[i][j] * lambda;
        }
    }
    riemann_contravariant(&m).iter().flatten().flatten().flatten().map(|z| z.norm()).fold(0.0, worst)
}

/// max |Lie_e g₂ − g₁| with (L_X g)^{ij} = Xᵏ∂ₖg^{ij} − g^{kj}∂ₖXⁱ − g^{ik}∂ₖXʲ.
pub fn exactness_deviation(t: Vec2) -> f64 {
    let (j1, j2) = Jet2::vars(t[0], t[1]);
    let g = bracket_metric_jet(Bracket::Second, j1, j2);
    let x = unit_jet(j1, j2);
    let g1 = bracket_metric(Bracket::First, t[0], t[1]);
    let mut m = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let mut s = ZERO;
            for k in 0..2 {
                s += x[k].v * g[i][j].d[k] - g[k][j].v * x[i].d[k] - g[i][k].v * x[j].d[k];
            }
            m = worst(m, (s - g1[i][j]).norm());
        }
    }
    m
}

/// max |∂_α∂_β(e^k∂ₖF₀) − η_{αβ}|.
pub fn unit_flatness_deviation(t: Vec2) -> f64 {
    let (j1, j2) = Jet2::vars(t[0], t[1]);
    let e = j2.exp();
    let f1 = j2 * j1 + e + j1 * j1.ln() + j1 * 0.5;
    let f2 = j1 * j1 * 0.5 + e * j1;
    let u = unit_jet(j1, j2);
    let lef = u[0] * f1 + u[1] * f2;
    let eta = [[0.0, 1.0], [1.0, 0.0]];
    let mut m = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            m = worst(m, (lef.h[a][b] - eta[a][b]).norm());
        }
    }
    m
}

/// Probe grid t₁ ∈ [0.25, 3], t₂ ∈ [−1, 1] (6 × 6).
pub fn momentum_probe_points() -> Vec<Vec2> {
    let mut pts = Vec::with_capacity(36);
    for i in 0..6 {
        for j in 0..6 {
            pts.push([c(0.25 + 2.75 * i as f64 / 5.0), c(-1.0 + 2.0 * j as f64 / 5.0)]);
        }
    }
    pts
}

/// Distance of t₁t₂ from the stored θ_{α,p} (θ₁ for p ≤ 2, θ₂ for p ≤ 6) modulo the Casimirs
/// {1, t₁, t₂}: min over θ of ‖r_θ‖/‖r₀‖, where r_θ is the least-squares residual of
/// t₁t₂ ≈ a + b₁t₁ + b₂t₂ + kθ on the points and r₀ the residual without θ.
pub fn momentum_distance(points: &[Vec2]) -> Result<f64, FrobeniusError> {
    let y: Vec<f64> = points.iter().map(|t| (t[0] * t[1]).re).collect();
    let base: Vec<Vec<f64>> = points.iter().map(|t| vec![1.0, t[0].re, t[1].re]).collect();
    let (_, r0) = least_squares(&base, &y);
    let mut best = f64::INFINITY;
    for (alpha, pmax) in [(1u8, 2usize), (2, 6)] {
        for p in 0..=pmax {
            let mut rows = base.clone();
            for (row, t) in rows.iter_mut().zip(points) {
                row.push(theta_value(alpha, p, t[0], t[1])?.re);
            }
            let (_, res) = least_squares(&rows, &y);
            best = best.min(res / r0);
        }
    }
    Ok(best)
}

/// Test domain for flat-chart checks: real v ∈ [−0.5, 0.5], w ∈ [0.1, 1] (t₁ > 0).
pub fn sample_t_domain<R: Rng>(rng: &mut R) -> ModuliPoint {
    ModuliPoint::real_vw(rng.gen_range(-0.5..0.5), rng.gen_range(0.1..1.0)).to_chart(Chart::T)
}

/// Test domain for density and period checks: real v ∈ [−0.5, 0.5], w ∈ [−2, −0.1].
pub fn sample_negative_w<R: Rng>(rng: &mut R) -> ModuliPoint {
    ModuliPoint::real_vw(rng.gen_range(-0.5..0.5), rng.gen_range(-2.0..-0.1))
}

fn run(report: &mut SuiteReport, name: &str, points: usize, tol: f64, above: bool, f: impl FnOnce() -> Result<f64, FrobeniusError>) {
    match f() {
        Ok(v) if above => report.push(CheckResult::above(name, points, v, tol)),
        Ok(v) => report.push(CheckResult::below(name, points, v, tol)),
        Err(e) => report.push(CheckResult::errored(name, points, tol, e)),
    }
}

/// Full invariant suite on `points` random points drawn from `seed`.
pub fn verify_suite(seed: u64, points: usize) -> SuiteReport {
    let mut report = SuiteReport::new("frobenius", seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<ModuliPoint> = (0..points).map(|_| sample_t_domain(&mut rng)).collect();
    let ts: Vec<Vec2> = pts.iter().map(|p| p.t1t2().into()).collect();
    let n = pts.len();
    let eta_const = [[c(0.0), c(1.0)], [c(1.0), c(0.0)]];

    run(&mut report, "frobenius.eta_antidiagonal", n, 1e-10, false, || {
        pts.iter().try_fold(0.0, |m, p| Ok(worst(m, max_gap2(&residue_eta(p, Route::Critical)?, &eta_const))))
    });
    run(&mut report, "frobenius.eta_contour_route", n, 1e-8, false, || {
        pts.iter().try_fold(0.0, |m, p| Ok(worst(m, max_gap2(&residue_eta(p, Route::Contour)?, &residue_eta(p, Route::Critical)?))))
    });
    run(&mut report, "frobenius.eta_vw_pullback", n, 1e-10, false, || {
        pts.iter().try_fold(0.0, |m, p| {
            let vw = p.to_chart(Chart::VW);
            let j = jacobian_vw_to_t(vw.a, vw.b);
            Ok(worst(m, max_gap2(&pull_back2(&residue_eta(p, Route::Critical)?, &j), &residue_eta(&vw, Route::Critical)?)))
        })
    });
    run(&mut report, "frobenius.c_residue_vs_f0", n, 1e-8, false, || {
        pts.iter().try_fold(0.0, |m, p| {
            let cc = residue_c(p, Route::Critical)?;
            let pre = prepotential_f0(p.a, p.b)?;
            let fd = third_derivatives(f0_value, [p.a, p.b], safe_radius(p.a));
            Ok(worst(worst(m, max_gap3(&cc, &pre.third)), max_gap3(&cc, &fd)))
        })
    });
    run(&mut report, "frobenius.c111_at_t1_2", 1, 1e-12, false, || {
        let cc = residue_c(&ModuliPoint::real_t(2.0, 0.0), Route::Critical)?;
        Ok((cc[0][0][0] - 0.5).norm())
    });
    run(&mut report, "frobenius.idempotents", n, 1e-10, false, || {
        pts.iter().try_fold(0.0, |m, p| {
            let cup = structure_constants(&residue_eta(p, Route::Critical)?, &residue_c(p, Route::Critical)?);
            let fr = idempotent_frame(p);
            let mut r: f64 = m;
            for i in 0..2 {
                for j in 0..2 {
                    let pr = product(&cup, &fr[i], &fr[j]);
                    for k in 0..2 {
                        let want = if i == j { fr[i][k] } else { ZERO };
                        r = worst(r, (pr[k] - want).norm());
                    }
                }
            }
            Ok(r)
        })
    });
    run(&mut report, "frobenius.unit_in_canonical_frame", n, 1e-10, false, || {
        pts.iter().try_fold(0.0, |m, p| {
            let fr = idempotent_frame(p);
            let e = unit_field(p.a, p.b);
            Ok(worst(m, (0..2).map(|k| (fr[0][k] + fr[1][k] - e[k]).norm()).fold(0.0, worst)))
        })
    });
    run(&mut report, "frobenius.unit_axiom", n, 1e-10, false, || {
        pts.iter().try_fold(0.0, |m, p| {
            let cup = structure_constants(&residue_eta(p, Route::Critical)?, &residue_c(p, Route::Critical)?);
            let e = unit_field(p.a, p.b);
            let mut r: f64 = m;
            for x in [[c(1.0), c(0.0)], [c(0.3), c(-1.2)]] {
                let y = product(&cup, &e, &x);
                r = worst(r, (y[0] - x[0]).norm().max((y[1] - x[1]).norm()));
            }
            Ok(r)
        })
    });
    run(&mut report, "frobenius.wdvv", n, 1e-10, false, || pts.iter().try_fold(0.0, |m, p| Ok(worst(m, wdvv_check(p)?))));
    run(&mut report, "frobenius.wdvv_vw_chart", n, 1e-10, false, || pts.iter().try_fold(0.0, |m, p| Ok(worst(m, wdvv_check(&p.to_chart(Chart::VW))?))));
    run(&mut report, "frobenius.canonical_coordinates", n, 1e-12, false, || {
        pts.iter().try_fold(0.0, |m, p| {
            let can = canonical_coords(p);
            let (t1, t2) = (p.a, p.b);
            let prod = (can.u[0] * can.u[1] - (t2.exp() - t1).powi(2)).norm();
            let sum = (can.u[0] + can.u[1] - 2.0 * (t2.exp() + t1)).norm();
            Ok(worst(worst(worst(m, canonical_residual(p)), prod), sum))
        })
    });
    run(&mut report, "frobenius.e_euler_bracket", n, 1e-10, false, || {
        Ok(ts.iter().fold(0.0, |m, t| {
            let e = unit_field(t[0], t[1]);
            let b = lie_bracket(unit_field, euler_field, *t, unit_radius(t[0], t[1]));
            worst(m, (b[0] - e[0]).norm().max((b[1] - e[1]).norm()) / e[0].norm().max(e[1].norm()).max(1.0))
        }))
    });
    run(&mut report, "frobenius.euler_linear", n, 1e-10, false, || {
        Ok(ts.iter().fold(0.0, |m, t| {
            let mut r: f64 = m;
            for i in 0..2 {
                let d = cauchy_partials(|a, b| euler_field(a, b)[i], *t, 0.1, 2);
                r = worst(r, d[2][0].norm().max(d[1][1].norm()).max(d[0][2].norm()));
            }
            r
        }))
    });
    run(&mut report, "frobenius.quasi_homogeneity", n, 1e-9, false, || {
        Ok(ts.iter().fold(0.0, |m, t| {
            let q = |a: C64, b: C64| {
                let g = f0_gradient(a, b);
                a * g[0] + g[1] - 2.0 * f0_value(a, b)
            };
            let d = third_derivatives(q, *t, safe_radius(t[0]));
            worst(m, d.iter().flatten().flatten().map(|z| z.norm()).fold(0.0, worst))
        }))
    });
    run(&mut report, "frobenius.unit_not_flat", 1, 0.01, true, || Ok(unit_flatness_deviation(ts[0])));
    run(&mut report, "frobenius.intersection_routes", n, 1e-10, false, || {
        pts.iter().try_fold(0.0, |m, p| {
            let a = intersection_form_euler(p)?;
            let b = intersection_form_residue(p)?;
            let scale = a.iter().flatten().map(|z| z.norm()).fold(1.0, f64::max);
            Ok(worst(m, max_gap2(&a, &b) / scale))
        })
    });
    run(&mut report, "frobenius.intersection_matches_bracket2", n, 1e-10, false, || {
        pts.iter().try_fold(0.0, |m, p| Ok(worst(m, max_gap2(&intersection_form(p)?, &bracket_metric(Bracket::Second, p.a, p.b)))))
    });
    report.push(CheckResult::below(
        "frobenius.intersection_symbolic",
        1,
        if symbolic_intersection_form() == printed_bracket2_metric() { 0.0 } else { 1.0 },
        0.5,
    ));
    run(&mut report, "frobenius.intersection_vw_constant", n, 1e-10, false, || {
        pts.iter().try_fold(0.0, |m, p| Ok(worst(m, max_gap2(&residue_g_cov(&p.to_chart(Chart::VW), Route::Critical)?, &eta_const))))
    });
    run(&mut report, "frobenius.intersection_determinant", n, 1e-10, false, || {
        pts.iter().try_fold(0.0, |m, p| {
            let can = canonical_coords(p);
            let g = intersection_form(p)?;
            Ok(worst(m, (det2(&g) + can.u[0] * can.u[1]).norm() / (can.u[0] * can.u[1]).norm().max(1.0)))
        })
    });
    run(&mut report, "frobenius.bracket_gamma_symmetry", n, 1e-12, false, || {
        Ok(ts.iter().fold(0.0, |m, t| worst(worst(m, gamma_symmetry_residual(Bracket::First, t[0], t[1])), gamma_symmetry_residual(Bracket::Second, t[0], t[1]))))
    });
    run(&mut report, "frobenius.casimir_t2", 1, 1e-14, false, || {
        let f = HydroField::from_fn(1.0, 32, |x| ModuliPoint::real_vw(0.2 * (TAU * x).sin(), 0.5 + 0.1 * (TAU * x).cos())).map_err(|e| FrobeniusError::Invalid(e.to_string()))?;
        let casimir = |a: C64, b: C64| Jet2::vars(a, b).1;
        let mut m = 0.0;
        for b in [Bracket::First, Bracket::Second] {
            for r in poisson_flow(b, casimir, &f) {
                m = worst(m, r[0].norm().max(r[1].norm()));
            }
        }
        Ok(m)
    });
    run(&mut report, "frobenius.bracket_flows_match_lax_flows", 2, 1e-6, false, || {
        let f = HydroField::from_fn(2.0, 256, |x| ModuliPoint::real_vw(0.25 * (TAU * x / 2.0).sin(), 0.5 + 0.15 * (TAU * x / 2.0).cos()))
            .map_err(|e| FrobeniusError::Invalid(e.to_string()))?;
        let mut m = 0.0;
        let cases = [(Bracket::First, 1u8, 2usize, HydroFlow::Lax { k: 1, n: 1 }), (Bracket::Second, 2, 1, HydroFlow::Lax { k: 2, n: 1 })];
        for (b, fam, nn, flow) in cases {
            let br = poisson_flow(b, |a, t| density_jet(fam, nn, a, t).unwrap_or(Jet2::from(f64::NAN)), &f);
            let lax = hydro::hydro_flow_rhs(flow, &f).map_err(|e| FrobeniusError::Invalid(e.to_string()))?;
            for (i, p) in f.values.iter().enumerate() {
                let (v, w) = p.vw_pair();
                let t1s = v.exp() * (w.exp() - 1.0) * lax[i][0] + (v + w).exp() * lax[i][1];
                let t2s = lax[i][0] + lax[i][1];
                m = worst(m, (t1s - br[i][0]).norm().max((t2s - br[i][1]).norm()));
            }
        }
        Ok(m)
    });
    let rec_pts = &ts[..ts.len().min(50)];
    run(&mut report, "frobenius.recursion_first_family", rec_pts.len(), 1e-10, false, || {
        (1..=5).try_fold(0.0, |m, k| Ok(worst(m, recursion_check(k, rec_pts)?.first)))
    });
    run(&mut report, "frobenius.recursion_second_family", rec_pts.len(), 1e-10, false, || {
        (1..=5).try_fold(0.0, |m, k| Ok(worst(m, recursion_check(k, rec_pts)?.second)))
    });
    run(&mut report, "frobenius.levelt_second_family", rec_pts.len(), 1e-8, false, || {
        (0..=4).try_fold(0.0, |m, p| Ok(worst(m, levelt_second_family(p, rec_pts)?)))
    });
    run(&mut report, "frobenius.levelt_mixed_families", rec_pts.len(), 1e-8, false, || (0..=1).try_fold(0.0, |m, p| Ok(worst(m, levelt_mixed(p, rec_pts)?))));
    run(&mut report, "frobenius.theta_recursion", rec_pts.len(), 1e-8, false, || {
        rec_pts.iter().try_fold(0.0, |m, t| {
            let mut r: f64 = m;
            for p in 0..=1 {
                r = worst(r, theta_recursion_residual(1, p, *t)?);
            }
            for p in 0..=4 {
                r = worst(r, theta_recursion_residual(2, p, *t)?);
            }
            Ok(r)
        })
    });
    let neg: Vec<ModuliPoint> = (0..points.min(20)).map(|_| sample_negative_w(&mut rng)).collect();
    run(&mut report, "frobenius.psi2_printed_form", neg.len(), 1e-10, false, || neg.iter().try_fold(0.0, |m, p| Ok(worst(m, psi2_gap(PsiForm::Printed, p, 6)?))));
    run(&mut report, "frobenius.psi2_corrected_form", neg.len(), 1e-10, false, || neg.iter().try_fold(0.0, |m, p| Ok(worst(m, psi2_gap(PsiForm::Corrected, p, 6)?))));
    let pencil_pts = &ts[..ts.len().min(20)];
    run(&mut report, "frobenius.pencil_flatness", pencil_pts.len() * 3, 1e-6, false, || {
        Ok([0.3, 1.0, 2.7].iter().fold(0.0, |m, &l| pencil_pts.iter().fold(m, |m, t| worst(m, pencil_curvature(l, *t)))))
    });
    run(&mut report, "frobenius.pencil_not_exact", 1, 0.05, true, || Ok(exactness_deviation(ts[0])));
    run(&mut report, "frobenius.momentum_not_a_density", 36, 0.1, true, || momentum_distance(&momentum_probe_points()));
    report.record("unit_field", "e = (t1 d/dt1 - d/dt2)/(t1 - exp t2)");
    report.record("euler_field", "E = t1 d/dt1 + d/dt2");
    report.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt() -> ModuliPoint {
        ModuliPoint::real_t(0.7, 0.3)
    }

    #[test]
    fn eta_is_antidiagonal() {
        let eta = residue_eta(&pt(), Route::Critical).unwrap();
        assert!(max_gap2(&eta, &[[c(0.0), c(1.0)], [c(1.0), c(0.0)]]) < 1e-13);
    }

    #[test]
    fn c_matches_closed_form() {
        let cc = residue_c(&pt(), Route::Critical).unwrap();
        let pre = prepotential_f0(c(0.7), c(0.3)).unwrap();
        assert!(max_gap3(&cc, &pre.third) < 1e-12);
        assert!((pre.third[0][1][1] - 0.3f64.exp()).norm() < 1e-15);
    }

    #[test]
    fn canonical_example() {
        let can = canonical_coords(&ModuliPoint::real_t(4.0, 0.0));
        assert!((can.u[0] - 9.0).norm() < 1e-14 && (can.u[1] - 1.0).norm() < 1e-14);
        let deg = canonical_coords(&ModuliPoint::real_t(0.0, 0.4));
        assert_eq!(deg.u[0], deg.u[1]);
        assert!(matches!(residue_eta(&ModuliPoint::real_t(0.0, 0.4), Route::Critical), Err(FrobeniusError::DegenerateCritical(_))));
    }

    #[test]
    fn branch_cut_rejected() {
        assert!(matches!(prepotential_f0(c(-1.0), c(0.0)), Err(FrobeniusError::BranchCut(_))));
    }

    #[test]
    fn symbolic_metric_matches() {
        assert_eq!(symbolic_intersection_form(), printed_bracket2_metric());
    }

    #[test]
    fn riemann_of_round_sphere() {
        let (a, b) = Jet2::vars(c(0.8), c(0.2));
        let s = a.exp() * 0.5 - (-a).exp() * 0.5;
        let _ = b;
        let sin = {
            let e = (a * C64::new(0.0, 1.0)).exp();
            (e - e.recip()) / C64::new(0.0, 2.0)
        };
        let m = [[Jet2::from(1.0), Jet2::from(0.0)], [Jet2::from(0.0), (sin * sin).recip()]];
        let r = riemann_contravariant(&m);
        assert!((r[0][1][0][1] - 0.8f64.sin().powi(2)).norm() < 1e-12, "{}", r[0][1][0][1]);
        let hyperbolic = [[Jet2::from(1.0), Jet2::from(0.0)], [Jet2::from(0.0), (s * s).recip()]];
        let r = riemann_contravariant(&hyperbolic);
        assert!(r[0][1][0][1].norm() > 0.1);
        let polar = [[Jet2::from(1.0), Jet2::from(0.0)], [Jet2::from(0.0), (a * a).recip()]];
        let r = riemann_contravariant(&polar);
        assert!(r.iter().flatten().flatten().flatten().all(|z| z.norm() < 1e-13));
    }

    #[test]
    fn density_jets_match_series_jets() {
        let (t1, t2) = (c(0.6), c(0.1));
        let (j1, j2) = Jet2::vars(t1, t2);
        for fam in 1..=2u8 {
            for n in 1..=5 {
                let a = density_jet(fam, n, t1, t2).unwrap();
                let b = hydro::density_residue_jet(fam, n, j1, j2).unwrap();
                assert!((a.v - b.v).norm() < 1e-12 * b.v.norm().max(1.0));
                for i in 0..2 {
                    assert!((a.d[i] - b.d[i]).norm() < 1e-12 * b.d[i].norm().max(1.0));
                    for j in 0..2 {
                        assert!((a.h[i][j] - b.h[i][j]).norm() < 1e-12 * b.h[i][j].norm().max(1.0), "{fam} {n} {i}{j} {} {}", a.h[i][j], b.h[i][j]);
                    }
                }
            }
        }
    }

    #[test]
    fn psi2_exact_and_numeric_coefficients_agree() {
        let p = ModuliPoint::real_vw(0.3, -0.7);
        for form in [PsiForm::Printed, PsiForm::Corrected] {
            let a = psi2_coefficients(form, &p, 6).unwrap();
            let b = psi2_coefficients_exact(form, &p, 6);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).norm() < 1e-12);
            }
        }
        assert!(psi2_gap(PsiForm::Corrected, &p, 6).unwrap() < 1e-12);
        assert!(psi2_gap(PsiForm::Printed, &p, 6).unwrap() > 1e-3);
        assert!(matches!(theta_series(2, 6, &p, PsiForm::Printed), Err(FrobeniusError::RouteMismatch { .. })));
        let th = theta_series(2, 6, &p, PsiForm::Corrected).unwrap();
        assert!((th.coeffs[0] - p.t1t2().0).norm() < 1e-14);
    }

    #[test]
    fn theta1_first_coefficient_recursion_by_hand() {
        let r = theta_recursion_residual(1, 0, [c(0.9), c(0.2)]).unwrap();
        assert!(r < 1e-9, "{r}");
    }
}
