//! Ablowitz–Ladik / Toeplitz lattice: states, Lax matrices, the bidiagonal
//! factorization, trace Hamiltonians and their flows, and the semi-infinite reduction.
//!
//! Matrices live on a finite index window. Row/column `r` of a window matrix is
//! site `n_min + r`; a state with `len` sites gives matrices of dimension `len − 1`
//! so every entry (which may read `x_{n+1}` or `y_{m+1}`) is fully determined.

use crate::linalg::CMat;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("window too small: need {need} sites of margin, have {have}")]
    WindowTooSmall { need: usize, have: usize },
    #[error("y vanishes at site {0}")]
    ZeroY(i64),
    #[error("matrix flow leaves the Toeplitz shape: off-structure entry {0:e}")]
    ShapeViolation(f64),
    #[error("1 - x y nearly vanishes at site {site} (t = {time})")]
    BlowUp { site: i64, time: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Boundary {
    Periodic,
    Window { buffer: usize },
    SemiInfinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    pub n_min: i64,
    pub x: Vec<C64>,
    pub y: Vec<C64>,
    pub boundary: Boundary,
    pub time: f64,
}

/// Per-site derivatives; entries outside `interior` are zero and carry no information.
#[derive(Debug, Clone, PartialEq)]
pub struct Rates {
    pub dx: Vec<C64>,
    pub dy: Vec<C64>,
    pub interior: std::ops::Range<usize>,
}

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn random_c<R: Rng>(rng: &mut R, amp: f64) -> C64 {
    C64::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp))
}

impl LatticeState {
    pub fn periodic(x: Vec<C64>, y: Vec<C64>) -> Self {
        assert_eq!(x.len(), y.len());
        Self { n_min: 0, x, y, boundary: Boundary::Periodic, time: 0.0 }
    }

    pub fn window(n_min: i64, x: Vec<C64>, y: Vec<C64>, buffer: usize) -> Self {
        assert_eq!(x.len(), y.len());
        Self { n_min, x, y, boundary: Boundary::Window { buffer }, time: 0.0 }
    }

    pub fn semi_infinite(x: Vec<C64>, y: Vec<C64>) -> Self {
        assert_eq!(x.len(), y.len());
        Self { n_min: 0, x, y, boundary: Boundary::SemiInfinite, time: 0.0 }
    }

    /// Random sites with |Re|, |Im| < amp; y is kept away from zero so that A and B exist.
    pub fn random<R: Rng>(rng: &mut R, len: usize, amp: f64, boundary: Boundary) -> Self {
        let x = (0..len).map(|_| random_c(rng, amp)).collect();
        let y = (0..len)
            .map(|_| {
                let mut z = random_c(rng, amp);
                if z.norm() < 0.2 * amp {
                    z += C64::new(0.3 * amp, 0.0);
                }
                z
            })
            .collect();
        Self { n_min: 0, x, y, boundary, time: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn v(&self, i: usize) -> C64 {
        one() - self.x[i] * self.y[i]
    }

    fn wrap(&self, i: isize) -> usize {
        let n = self.len() as isize;
        i.rem_euclid(n) as usize
    }

    /// Periodic data copied onto a window with `margin` sites on each side of one period.
    /// Window site `u` is periodic site `(u − margin) mod N`.
    pub fn unroll(&self, margin: usize) -> LatticeState {
        let n = self.len();
        let total = n + 2 * margin + 1;
        let idx = |u: usize| self.wrap(u as isize - margin as isize);
        LatticeState {
            n_min: -(margin as i64),
            x: (0..total).map(|u| self.x[idx(u)]).collect(),
            y: (0..total).map(|u| self.y[idx(u)]).collect(),
            boundary: Boundary::Window { buffer: margin },
            time: self.time,
        }
    }

    fn buffer(&self) -> usize {
        match self.boundary {
            Boundary::Window { buffer } => buffer,
            _ => 0,
        }
    }

    fn add_scaled(&self, r: &Rates, h: f64) -> LatticeState {
        let mut s = self.clone();
        for i in r.interior.clone() {
            s.x[i] += r.dx[i] * h;
            s.y[i] += r.dy[i] * h;
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixKind {
    L1,
    L2,
    A,
    B,
    Generic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredMatrix {
    pub n_min: i64,
    pub mat: CMat,
    pub kind: MatrixKind,
    /// Dependence range (in sites) of diagonal entries of powers built from this matrix.
    pub locality: usize,
}

impl StructuredMatrix {
    pub fn n_max(&self) -> i64 {
        self.n_min + self.mat.n as i64 - 1
    }

    /// Entry at absolute indices (n, m).
    pub fn at(&self, n: i64, m: i64) -> C64 {
        self.mat[((n - self.n_min) as usize, (m - self.n_min) as usize)]
    }

    /// Max modulus of entries violating the declared kind's shape.
    pub fn shape_defect(&self, lo: usize, hi: usize) -> f64 {
        let mut d = 0.0f64;
        for i in lo..hi {
            for j in lo..hi {
                let off = match self.kind {
                    MatrixKind::L1 => {
                        if j == i + 1 {
                            (self.mat[(i, j)] - one()).norm()
                        } else if j > i + 1 {
                            self.mat[(i, j)].norm()
                        } else {
                            0.0
                        }
                    }
                    MatrixKind::L2 => {
                        if i > j + 1 {
                            self.mat[(i, j)].norm()
                        } else {
                            0.0
                        }
                    }
                    MatrixKind::A => {
                        if j == i + 1 {
                            (self.mat[(i, j)] - one()).norm()
                        } else if j != i {
                            self.mat[(i, j)].norm()
                        } else {
                            0.0
                        }
                    }
                    MatrixKind::B => {
                        if i == j {
                            (self.mat[(i, j)] - one()).norm()
                        } else if i != j + 1 {
                            self.mat[(i, j)].norm()
                        } else {
                            0.0
                        }
                    }
                    MatrixKind::Generic => 0.0,
                };
                d = d.max(off);
            }
        }
        d
    }
}

/// ẋₙ = ½vₙ(x_{n−1}+x_{n+1}), ẏₙ = −½vₙ(y_{n−1}+y_{n+1}).
pub fn al_rhs(s: &LatticeState) -> Rates {
    let n = s.len();
    let mut dx = vec![zero(); n];
    let mut dy = vec![zero(); n];
    let interior = match s.boundary {
        Boundary::Periodic => 0..n,
        _ => s.buffer().max(1)..n.saturating_sub(s.buffer().max(1)),
    };
    for i in interior.clone() {
        let (l, r) = match s.boundary {
            Boundary::Periodic => (s.wrap(i as isize - 1), s.wrap(i as isize + 1)),
            _ => (i - 1, i + 1),
        };
        let v = s.v(i);
        dx[i] = 0.5 * v * (s.x[l] + s.x[r]);
        dy[i] = -0.5 * v * (s.y[l] + s.y[r]);
    }
    Rates { dx, dy, interior }
}

fn window_state(s: &LatticeState, periodic_margin: usize) -> std::borrow::Cow<'_, LatticeState> {
    match s.boundary {
        Boundary::Periodic => std::borrow::Cow::Owned(s.unroll(periodic_margin)),
        _ => std::borrow::Cow::Borrowed(s),
    }
}

fn l1_entry(s: &LatticeState, n: usize, m: usize) -> C64 {
    if m == n + 1 {
        one()
    } else if m <= n {
        let mut p = -s.x[n + 1] * s.y[m];
        for j in m + 1..=n {
            p *= s.v(j);
        }
        p
    } else {
        zero()
    }
}

fn l2_entry(s: &LatticeState, n: usize, m: usize) -> C64 {
    if m + 1 == n {
        s.v(n)
    } else if m >= n {
        -s.x[n] * s.y[m + 1]
    } else {
        zero()
    }
}

/// Lax matrices on the window of `s`; periodic states are unrolled over three periods.
pub fn build_lax(s: &LatticeState) -> Result<(StructuredMatrix, StructuredMatrix), LatticeError> {
    let w = window_state(s, s.len());
    if w.len() < 3 {
        return Err(LatticeError::WindowTooSmall { need: 3, have: w.len() });
    }
    let d = w.len() - 1;
    let l1 = CMat::from_fn(d, |n, m| l1_entry(&w, n, m));
    let l2 = CMat::from_fn(d, |n, m| l2_entry(&w, n, m));
    Ok((
        StructuredMatrix { n_min: w.n_min, mat: l1, kind: MatrixKind::L1, locality: 1 },
        StructuredMatrix { n_min: w.n_min, mat: l2, kind: MatrixKind::L2, locality: 1 },
    ))
}

/// A = Λ + a, aₙ = −yₙ/y_{n+1};  B = 1 + bΛ⁻¹, bₙ = −vₙy_{n−1}/yₙ.
pub fn build_ab(s: &LatticeState) -> Result<(StructuredMatrix, StructuredMatrix), LatticeError> {
    let w = window_state(s, s.len());
    if let Some(i) = w.y.iter().position(|y| y.norm() == 0.0) {
        return Err(LatticeError::ZeroY(w.n_min + i as i64));
    }
    if w.len() < 3 {
        return Err(LatticeError::WindowTooSmall { need: 3, have: w.len() });
    }
    let d = w.len() - 1;
    let a = CMat::from_fn(d, |n, m| {
        if m == n + 1 {
            one()
        } else if m == n {
            -w.y[n] / w.y[n + 1]
        } else {
            zero()
        }
    });
    let b = CMat::from_fn(d, |n, m| {
        if m == n {
            one()
        } else if m + 1 == n {
            -w.v(n) * w.y[n - 1] / w.y[n]
        } else {
            zero()
        }
    });
    Ok((
        StructuredMatrix { n_min: w.n_min, mat: a, kind: MatrixKind::A, locality: 1 },
        StructuredMatrix { n_min: w.n_min, mat: b, kind: MatrixKind::B, locality: 1 },
    ))
}

/// Sites (x, y) recovered from A and B with the y-scale fixed by y at the first window site = 1.
pub fn state_from_ab(a: &StructuredMatrix, b: &StructuredMatrix) -> LatticeState {
    let d = a.mat.n;
    let mut y = vec![one(); d + 1];
    for n in 0..d {
        y[n + 1] = -y[n] / a.mat[(n, n)];
    }
    let mut x = vec![zero(); d + 1];
    for n in 1..d {
        let v = b.mat[(n, n - 1)] / a.mat[(n - 1, n - 1)];
        x[n] = (one() - v) / y[n];
    }
    LatticeState::window(a.n_min, x, y, 1)
}

/// Interior residuals (‖L₁ − AB⁻¹‖∞, ‖L₂ − BA⁻¹‖∞), skipping `buffer` rows/columns at each edge.
pub fn factorization_residuals(s: &LatticeState, buffer: usize) -> Result<(f64, f64), LatticeError> {
    let (l1, l2) = build_lax(s)?;
    let (a, b) = build_ab(s)?;
    let d = a.mat.n;
    if 2 * buffer >= d {
        return Err(LatticeError::WindowTooSmall { need: 2 * buffer + 1, have: d });
    }
    let binv = b.mat.lower_inverse();
    let ainv = a.mat.upper_inverse();
    let r1 = (&l1.mat - &(&a.mat * &binv)).block_max(buffer, d - buffer);
    let r2 = (&l2.mat - &(&b.mat * &ainv)).block_max(buffer, d - buffer);
    Ok((r1, r2))
}

/// Dressing diagonal ℓ with ℓ_{n+1}/ℓₙ = v_{n+1}, normalized to 1 at site 0 (or the first site if 0 is absent).
pub fn dressing(s: &LatticeState) -> Vec<C64> {
    let n = s.len();
    let mut l = vec![one(); n];
    for i in 1..n {
        l[i] = l[i - 1] * s.v(i);
    }
    let z = (-s.n_min).clamp(0, n as i64 - 1) as usize;
    let l0 = l[z];
    l.iter().map(|v| v / l0).collect()
}

/// ‖ℓ⁻¹L₁ℓ − Λ(1 − x(1−Λ⁻¹)⁻¹y)‖∞ over the interior.
pub fn dressing_check(s: &LatticeState) -> Result<f64, LatticeError> {
    let w = window_state(s, s.len());
    let (l1, _) = build_lax(&w)?;
    let l = dressing(&w);
    let d = l1.mat.n;
    let b = w.buffer().min(d / 2);
    let mut r = 0.0f64;
    for n in b..d - b {
        for m in b..d - b {
            let lhs = l1.mat[(n, m)] * l[m] / l[n];
            let rhs = if m == n + 1 { one() } else { zero() } - if m <= n + 1 { w.x[n + 1] * w.y[m] } else { zero() };
            r = r.max((lhs - rhs).norm());
        }
    }
    Ok(r)
}

fn check_kind(k: u8, i: usize) -> Result<(), LatticeError> {
    if !(k == 1 || k == 2) || i == 0 {
        return Err(LatticeError::Invalid(format!("flow ({k},{i})")));
    }
    Ok(())
}

fn lax_k(w: &LatticeState, k: u8) -> CMat {
    let d = w.len() - 1;
    if k == 1 {
        CMat::from_fn(d, |n, m| l1_entry(w, n, m))
    } else {
        CMat::from_fn(d, |n, m| l2_entry(w, n, m))
    }
}

/// H⁽ᵏ⁾ᵢ = −(1/i) tr Lₖⁱ over one period, or over the interior rows of a window.
pub fn hamiltonian(k: u8, i: usize, s: &LatticeState) -> Result<C64, LatticeError> {
    check_kind(k, i)?;
    let (w, rows) = match s.boundary {
        Boundary::Periodic => {
            let m = 2 * i + 3;
            (s.unroll(m), m..m + s.len())
        }
        _ => {
            let b = s.buffer();
            if b < i + 1 {
                return Err(LatticeError::WindowTooSmall { need: i + 1, have: b });
            }
            (s.clone(), b..s.len() - 1 - b)
        }
    };
    let tr: C64 = rows.map(|r| diag_power(&w, k, i, r)).sum();
    Ok(-tr / i as f64)
}

/// (Lₖⁱ)ᵣᵣ from the block of sites within i − 1 of r: Lₖ moves an index by at most one in one
/// direction, so closed paths of length i never leave it.
fn diag_power(w: &LatticeState, k: u8, i: usize, r: usize) -> C64 {
    let d = w.len() - 1;
    let lo = (r + 1).saturating_sub(i);
    let hi = (r + i).min(d);
    let entry = |n: usize, m: usize| if k == 1 { l1_entry(w, n, m) } else { l2_entry(w, n, m) };
    let block: Vec<Vec<C64>> = (lo..hi).map(|n| (lo..hi).map(|m| entry(n, m)).collect()).collect();
    let mut row = vec![zero(); hi - lo];
    row[r - lo] = one();
    for _ in 0..i {
        let mut next = vec![zero(); hi - lo];
        for (a, ra) in row.iter().enumerate() {
            if *ra != zero() {
                for (b, nb) in next.iter_mut().enumerate() {
                    *nb += ra * block[a][b];
                }
            }
        }
        row = next;
    }
    row[r - lo]
}

/// Partial derivatives of a Lax entry (row `b`, column `a`) with respect to the sites it reads.
fn entry_partials(w: &LatticeState, k: u8, b: usize, a: usize, out: &mut Vec<(usize, C64, C64)>) {
    out.clear();
    if k == 1 {
        if a > b {
            return;
        }
        let xs = w.x[b + 1];
        let ya = w.y[a];
        let vs: Vec<C64> = (a + 1..=b).map(|j| w.v(j)).collect();
        let p: C64 = vs.iter().product();
        out.push((b + 1, -ya * p, zero()));
        out.push((a, zero(), -xs * p));
        for (t, j) in (a + 1..=b).enumerate() {
            let pj: C64 = vs.iter().enumerate().filter(|(u, _)| *u != t).map(|(_, v)| v).product();
            let c = -xs * ya * pj;
            out.push((j, -w.y[j] * c, -w.x[j] * c));
        }
    } else if a + 1 == b {
        out.push((b, -w.y[b], -w.x[b]));
    } else if a >= b {
        out.push((b, -w.y[a + 1], zero()));
        out.push((a + 1, zero(), -w.x[b]));
    }
}

/// (∂H/∂x, ∂H/∂y) per site via δ tr Lⁱ = i tr(Lⁱ⁻¹δL), plus the interior where they are exact.
pub fn ham_gradient(k: u8, i: usize, s: &LatticeState) -> Result<Rates, LatticeError> {
    check_kind(k, i)?;
    let n = s.len();
    let periodic = s.boundary == Boundary::Periodic;
    let (w, rows, margin) = if periodic {
        let m = 2 * i + 3;
        (s.unroll(m), m..m + n, m)
    } else {
        let need = 2 * i + 1;
        if s.buffer() < need {
            return Err(LatticeError::WindowTooSmall { need, have: s.buffer() });
        }
        let d = n - 1;
        (s.clone(), i..d - i, 0)
    };
    let d = w.len() - 1;
    let p = lax_k(&w, k).pow(i - 1);
    let mut gx = vec![zero(); n];
    let mut gy = vec![zero(); n];
    let mut parts = Vec::new();
    for a in rows {
        let (lo, hi) = if k == 1 { (a.saturating_sub(1), a + i - 1) } else { ((a + 1).saturating_sub(i), a + 1) };
        for b in lo..=hi.min(d - 1) {
            let c = p[(a, b)];
            if c.norm() == 0.0 {
                continue;
            }
            entry_partials(&w, k, b, a, &mut parts);
            for &(site, px, py) in &parts {
                let t = if periodic {
                    (site as isize - margin as isize).rem_euclid(n as isize) as usize
                } else {
                    site
                };
                gx[t] -= c * px;
                gy[t] -= c * py;
            }
        }
    }
    let interior = if periodic {
        0..n
    } else {
        let lo = s.buffer().max(2 * i + 1);
        lo..n.saturating_sub(lo + 1)
    };
    for t in 0..n {
        if !interior.contains(&t) {
            gx[t] = zero();
            gy[t] = zero();
        }
    }
    Ok(Rates { dx: gx, dy: gy, interior })
}

/// ∂xₙ/∂s = vₙ ∂H/∂yₙ, ∂yₙ/∂s = −vₙ ∂H/∂xₙ.
pub fn ham_flow_rhs(k: u8, i: usize, s: &LatticeState) -> Result<Rates, LatticeError> {
    let g = ham_gradient(k, i, s)?;
    let mut dx = vec![zero(); s.len()];
    let mut dy = vec![zero(); s.len()];
    for t in g.interior.clone() {
        let v = s.v(t);
        dx[t] = v * g.dy[t];
        dy[t] = -v * g.dx[t];
    }
    Ok(Rates { dx, dy, interior: g.interior })
}

/// Right-hand sides of the bidiagonal flows:
/// k = 1: dA = ((AB⁻¹)ⁱ)₊A − A((B⁻¹A)ⁱ)₊, dB likewise;
/// k = 2: dA = ((BA⁻¹)ⁱ)₋A − A((A⁻¹B)ⁱ)₋, dB likewise.
/// Returns (dA, dB) with entries outside the trusted interior set to zero.
pub fn matrix_flow_rhs(
    k: u8,
    i: usize,
    a: &StructuredMatrix,
    b: &StructuredMatrix,
) -> Result<(StructuredMatrix, StructuredMatrix), LatticeError> {
    check_kind(k, i)?;
    let d = a.mat.n;
    let margin = i + 2;
    if d <= 2 * margin {
        return Err(LatticeError::WindowTooSmall { need: 2 * margin + 1, have: d });
    }
    let ainv = a.mat.upper_inverse();
    let binv = b.mat.lower_inverse();
    let (p, q) = if k == 1 {
        ((&a.mat * &binv).pow(i).upper(), (&binv * &a.mat).pow(i).upper())
    } else {
        ((&b.mat * &ainv).pow(i).strict_lower(), (&ainv * &b.mat).pow(i).strict_lower())
    };
    let da = &(&p * &a.mat) - &(&a.mat * &q);
    let db = &(&p * &b.mat) - &(&b.mat * &q);
    let mut defect = 0.0f64;
    for r in margin..d - margin {
        for c in margin..d - margin {
            let scale = 1.0 + a.mat[(r, r)].norm() + b.mat[(r, r)].norm();
            if c != r {
                defect = defect.max(da[(r, c)].norm() / scale);
            }
            if c + 1 != r {
                defect = defect.max(db[(r, c)].norm() / scale);
            }
        }
    }
    if defect > 1e-10 {
        return Err(LatticeError::ShapeViolation(defect));
    }
    let mask = |m: &CMat| {
        CMat::from_fn(d, |r, c| {
            if (margin..d - margin).contains(&r) && (margin..d - margin).contains(&c) {
                m[(r, c)]
            } else {
                zero()
            }
        })
    };
    Ok((
        StructuredMatrix { n_min: a.n_min, mat: mask(&da), kind: MatrixKind::Generic, locality: i },
        StructuredMatrix { n_min: a.n_min, mat: mask(&db), kind: MatrixKind::Generic, locality: i },
    ))
}

/// Gauge invariants (xₙyₙ, x_{n+1}yₙ) indexed by window row n.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeInvariants {
    pub xy: Vec<C64>,
    pub xy_shift: Vec<C64>,
}

/// Rates of the gauge invariants implied by (dA, dB), via vₙ = bₙ/a_{n−1} and x_{n+1}yₙ = −(1−v_{n+1})aₙ.
/// Entries are meaningful for rows whose neighbours lie in the matrix-flow interior.
pub fn gauge_rates_from_ab(
    a: &StructuredMatrix,
    b: &StructuredMatrix,
    da: &StructuredMatrix,
    db: &StructuredMatrix,
) -> GaugeInvariants {
    let d = a.mat.n;
    let av = |n: usize| a.mat[(n, n)];
    let dav = |n: usize| da.mat[(n, n)];
    let mut dv = vec![zero(); d];
    let mut v = vec![zero(); d];
    for n in 1..d {
        let (an, bn) = (av(n - 1), b.mat[(n, n - 1)]);
        v[n] = bn / an;
        dv[n] = (db.mat[(n, n - 1)] * an - bn * dav(n - 1)) / (an * an);
    }
    let xy = dv.iter().map(|d| -d).collect();
    let mut xy_shift = vec![zero(); d];
    for n in 0..d - 1 {
        xy_shift[n] = dv[n + 1] * av(n) - (one() - v[n + 1]) * dav(n);
    }
    GaugeInvariants { xy, xy_shift }
}

/// Rates of the gauge invariants implied by site rates.
pub fn gauge_rates_from_sites(s: &LatticeState, r: &Rates) -> GaugeInvariants {
    let n = s.len();
    let xy = (0..n).map(|i| r.dx[i] * s.y[i] + s.x[i] * r.dy[i]).collect();
    let xy_shift = (0..n)
        .map(|i| if i + 1 < n { r.dx[i + 1] * s.y[i] + s.x[i + 1] * r.dy[i] } else { zero() })
        .collect();
    GaugeInvariants { xy, xy_shift }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flow {
    /// The AL system, ½(flow(1,1) + flow(2,1)).
    Al,
    Ham { k: u8, i: usize },
}

pub fn flow_rhs(flow: Flow, s: &LatticeState) -> Result<Rates, LatticeError> {
    match flow {
        Flow::Al => Ok(al_rhs(s)),
        Flow::Ham { k, i } => ham_flow_rhs(k, i, s),
    }
}

/// One classical RK4 step.
pub fn rk4_step(flow: Flow, s: &LatticeState, dt: f64) -> Result<LatticeState, LatticeError> {
    let k1 = flow_rhs(flow, s)?;
    let k2 = flow_rhs(flow, &s.add_scaled(&k1, 0.5 * dt))?;
    let k3 = flow_rhs(flow, &s.add_scaled(&k2, 0.5 * dt))?;
    let k4 = flow_rhs(flow, &s.add_scaled(&k3, dt))?;
    let mut out = s.clone();
    for i in k1.interior.clone() {
        out.x[i] += dt / 6.0 * (k1.dx[i] + 2.0 * k2.dx[i] + 2.0 * k3.dx[i] + k4.dx[i]);
        out.y[i] += dt / 6.0 * (k1.dy[i] + 2.0 * k2.dy[i] + 2.0 * k3.dy[i] + k4.dy[i]);
    }
    out.time += dt;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub state: LatticeState,
    pub times: Vec<f64>,
    /// `conserved[j][t]`: j-th monitored Hamiltonian at `times[t]`.
    pub conserved: Vec<Vec<C64>>,
}

impl Trajectory {
    /// max_t |H(t) − H(0)| / |H(0)| for each monitored Hamiltonian.
    pub fn relative_drift(&self) -> Vec<f64> {
        self.conserved
            .iter()
            .map(|h| {
                let h0 = h[0];
                h.iter().map(|v| (v - h0).norm()).fold(0.0, f64::max) / h0.norm().max(f64::MIN_POSITIVE)
            })
            .collect()
    }
}

/// RK4 with fixed `dt` up to `t_final`; `observer` sees every state including the first,
/// monitored Hamiltonians `(k, i)` are recorded every `record_every` steps and at the end.
pub fn integrate_with(
    s: &LatticeState,
    flow: Flow,
    t_final: f64,
    dt: f64,
    monitor: &[(u8, usize)],
    record_every: usize,
    mut observer: impl FnMut(&LatticeState),
) -> Result<Trajectory, LatticeError> {
    if !(dt > 0.0) || t_final < 0.0 {
        return Err(LatticeError::Invalid(format!("dt = {dt}, t_final = {t_final}")));
    }
    let steps = (t_final / dt).round() as usize;
    let mut state = s.clone();
    let mut times = Vec::new();
    let mut conserved = vec![Vec::new(); monitor.len()];
    let record = |st: &LatticeState, times: &mut Vec<f64>, cons: &mut Vec<Vec<C64>>| -> Result<(), LatticeError> {
        times.push(st.time);
        for (j, &(k, i)) in monitor.iter().enumerate() {
            cons[j].push(hamiltonian(k, i, st)?);
        }
        Ok(())
    };
    observer(&state);
    record(&state, &mut times, &mut conserved)?;
    let every = record_every.max(1);
    for step in 1..=steps {
        state = rk4_step(flow, &state, dt)?;
        if let Some(i) = (0..state.len()).find(|&i| state.v(i).norm() < 1e-12) {
            return Err(LatticeError::BlowUp { site: state.n_min + i as i64, time: state.time });
        }
        observer(&state);
        if step % every == 0 || step == steps {
            record(&state, &mut times, &mut conserved)?;
        }
    }
    Ok(Trajectory { state, times, conserved })
}

pub fn integrate(s: &LatticeState, flow: Flow, t_final: f64, dt: f64, monitor: &[(u8, usize)]) -> Result<Trajectory, LatticeError> {
    integrate_with(s, flow, t_final, dt, monitor, 1, |_| {})
}

/// Residual of one step against the 2D-Toda Lax equation for L₁:
/// ‖L₁(s(dt)) − L₁(s) − dt·[(Lₖⁱ)±, L₁]‖ on the interior.
/// For k = 1 the commutator contains sums running to −∞ through L₁'s lower part, so the window
/// value is exact only for data supported inside the window.
pub fn toeplitz_step_defect(s: &LatticeState, k: u8, i: usize, dt: f64) -> Result<f64, LatticeError> {
    let next = rk4_step(Flow::Ham { k, i }, s, dt)?;
    let (l1, l2) = build_lax(s)?;
    let (n1, _) = build_lax(&next)?;
    let proj = if k == 1 { l1.mat.pow(i).upper() } else { l2.mat.pow(i).strict_lower() };
    let comm = &(&proj * &l1.mat) - &(&l1.mat * &proj);
    let pred = &l1.mat + &comm.scale(C64::new(dt, 0.0));
    let d = l1.mat.n;
    let m = s.buffer().max(2 * i + 1) + 2 * i + 2;
    if d <= 2 * m {
        return Err(LatticeError::WindowTooSmall { need: 2 * m + 1, have: d });
    }
    Ok((&n1.mat - &pred).block_max(m, d - m))
}

/// Residuals of the semi-infinite reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiInfiniteResidual {
    /// ‖L₁L̂₂ − 1‖∞ on the protected block.
    pub constraint: f64,
    /// ‖Λ⁻¹Λ − (1 − ℰ)‖∞ for the truncated shifts.
    pub left_inverse: f64,
    /// max |Eₙₘ|.
    pub correction_norm: f64,
    /// ‖L₁L₂ − 1‖∞ on the protected block (uncorrected).
    pub uncorrected: f64,
}

/// Checks L₁L̂₂ = 1 with L̂₂ = L₂ − E, E₀ₘ = (v₀/y₀)y_{m+1}, trimming `i_max + 2` rows/columns.
pub fn semi_infinite_constraint(s: &LatticeState, i_max: usize) -> Result<SemiInfiniteResidual, LatticeError> {
    if s.boundary != Boundary::SemiInfinite {
        return Err(LatticeError::Invalid("semi-infinite state required".into()));
    }
    if s.y[0].norm() == 0.0 {
        return Err(LatticeError::ZeroY(0));
    }
    let (l1, l2) = build_lax(s)?;
    let d = l1.mat.n;
    let k = i_max + 2;
    if d <= k {
        return Err(LatticeError::WindowTooSmall { need: k + 1, have: d });
    }
    let c0 = s.v(0) / s.y[0];
    let e = CMat::from_fn(d, |n, m| if n == 0 { c0 * s.y[m + 1] } else { zero() });
    let hat = &l2.mat - &e;
    let id = CMat::identity(d);
    let constraint = (&(&l1.mat * &hat) - &id).block_max(0, d - k);
    let uncorrected = (&(&l1.mat * &l2.mat) - &id).block_max(0, d - k);
    let shift = CMat::from_fn(d, |n, m| if m == n + 1 { one() } else { zero() });
    let shift_inv = CMat::from_fn(d, |n, m| if n == m + 1 { one() } else { zero() });
    let mut corner = CMat::identity(d);
    corner[(0, 0)] = zero();
    let left_inverse = (&(&shift_inv * &shift) - &corner).block_max(0, d);
    let correction_norm = (0..d).map(|m| e[(0, m)].norm()).fold(0.0, f64::max);
    Ok(SemiInfiniteResidual { constraint, left_inverse, correction_norm, uncorrected })
}

/// max |(L₁L₂ − 1)ₙₘ| over interior entries of a bi-infinite window (data should be localized).
pub fn bi_infinite_l1l2_deviation(s: &LatticeState) -> Result<f64, LatticeError> {
    let (l1, l2) = build_lax(s)?;
    let d = l1.mat.n;
    let b = s.buffer().min(d / 2);
    Ok((&(&l1.mat * &l2.mat) - &CMat::identity(d)).block_max(b, d - b))
}

/// Localized window data: `support` consecutive sites with |x|, |y| in [0.5, 0.9], zero elsewhere.
pub fn localized_window<R: Rng>(rng: &mut R, support: usize, buffer: usize) -> LatticeState {
    let len = support + 2 * buffer + 2;
    let mut x = vec![zero(); len];
    let mut y = vec![zero(); len];
    for i in buffer + 1..buffer + 1 + support {
        x[i] = C64::from_polar(rng.gen_range(0.5..0.9), rng.gen_range(0.0..std::f64::consts::TAU));
        y[i] = C64::from_polar(rng.gen_range(0.5..0.9), rng.gen_range(0.0..std::f64::consts::TAU));
    }
    LatticeState::window(-((buffer + 1) as i64), x, y, buffer)
}

/// max |ω(J·, J·) − ω| for one step on a 2-site periodic system, with J by central differences.
/// ω = Σ dxₖ∧dyₖ/(1 − xₖyₖ) evaluated in holomorphic coordinates (x₀, y₀, x₁, y₁).
pub fn symplectic_defect(flow: Flow, s: &LatticeState, dt: f64) -> Result<f64, LatticeError> {
    if s.len() != 2 || s.boundary != Boundary::Periodic {
        return Err(LatticeError::Invalid("2-site periodic state required".into()));
    }
    let pack = |st: &LatticeState| [st.x[0], st.y[0], st.x[1], st.y[1]];
    let unpack = |z: [C64; 4]| LatticeState::periodic(vec![z[0], z[2]], vec![z[1], z[3]]);
    let omega = |z: [C64; 4]| {
        let mut w = [[zero(); 4]; 4];
        for k in 0..2 {
            let c = one() / (one() - z[2 * k] * z[2 * k + 1]);
            w[2 * k][2 * k + 1] = c;
            w[2 * k + 1][2 * k] = -c;
        }
        w
    };
    let z0 = pack(s);
    let image = |z: [C64; 4]| -> Result<[C64; 4], LatticeError> { Ok(pack(&rk4_step(flow, &unpack(z), dt)?)) };
    let h = 1e-6;
    let mut jac = [[zero(); 4]; 4];
    for c in 0..4 {
        let mut zp = z0;
        let mut zm = z0;
        zp[c] += h;
        zm[c] -= h;
        let (fp, fm) = (image(zp)?, image(zm)?);
        for r in 0..4 {
            jac[r][c] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    let w0 = omega(z0);
    let w1 = omega(image(z0)?);
    let mut defect = 0.0f64;
    for a in 0..4 {
        for b in 0..4 {
            let mut sum = zero();
            for r in 0..4 {
                for c in 0..4 {
                    sum += jac[r][a] * w1[r][c] * jac[c][b];
                }
            }
            defect = defect.max((sum - w0[a][b]).norm());
        }
    }
    Ok(defect)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn al_rhs_examples() {
        let mut s = LatticeState::periodic(vec![c(0.3), c(0.1), c(0.5)], vec![c(0.0), c(0.2), c(0.0)]);
        let r = al_rhs(&s);
        assert!((r.dx[1] - c(0.392)).norm() < 1e-15);
        s.x = vec![c(2.0); 3];
        s.y = vec![c(0.5); 3];
        let r = al_rhs(&s);
        assert!(r.dx.iter().chain(&r.dy).all(|v| v.norm() == 0.0));
        let s = LatticeState::periodic(vec![c(0.7); 4], vec![c(0.0); 4]);
        let r = al_rhs(&s);
        assert!(r.dx.iter().all(|v| (v - c(0.7)).norm() < 1e-15));
    }

    #[test]
    fn zero_data_gives_shifts() {
        let s = LatticeState::window(0, vec![c(0.0); 8], vec![c(0.0); 8], 1);
        let (l1, l2) = build_lax(&s).unwrap();
        for n in 0..7 {
            for m in 0..7 {
                assert_eq!(l1.mat[(n, m)], if m == n + 1 { c(1.0) } else { c(0.0) });
                assert_eq!(l2.mat[(n, m)], if n == m + 1 { c(1.0) } else { c(0.0) });
            }
        }
    }

    #[test]
    fn displayed_layout_on_six_by_six() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = LatticeState::random(&mut rng, 7, 0.6, Boundary::Window { buffer: 0 });
        s.n_min = -2;
        let (l1, l2) = build_lax(&s).unwrap();
        let x = |n: i64| s.x[(n + 2) as usize];
        let y = |n: i64| s.y[(n + 2) as usize];
        let v = |n: i64| c(1.0) - x(n) * y(n);
        // rows 0..2 of the displayed L₁ and L₂
        assert!((l1.at(0, 0) + x(1) * y(0)).norm() < 1e-15);
        assert!((l1.at(0, -1) + v(0) * x(1) * y(-1)).norm() < 1e-15);
        assert!((l1.at(1, -2) + v(-1) * v(0) * v(1) * x(2) * y(-2)).norm() < 1e-15);
        assert_eq!(l1.at(1, 2), c(1.0));
        assert!((l2.at(0, -1) - v(0)).norm() < 1e-15);
        assert!((l2.at(0, 0) + x(0) * y(1)).norm() < 1e-15);
        assert!((l2.at(-1, 3) + x(-1) * y(4)).norm() < 1e-15);
        assert_eq!(l2.at(2, 0), c(0.0));
        assert_eq!(l1.shape_defect(0, 6), 0.0);
        assert_eq!(l2.shape_defect(0, 6), 0.0);
    }

    #[test]
    fn ab_for_trivial_data() {
        let s = LatticeState::window(0, vec![c(0.0); 6], vec![c(1.0); 6], 1);
        let (a, b) = build_ab(&s).unwrap();
        for n in 0..5 {
            for m in 0..5 {
                let ea = if m == n + 1 { c(1.0) } else if m == n { c(-1.0) } else { c(0.0) };
                let eb = if m == n { c(1.0) } else if n == m + 1 { c(-1.0) } else { c(0.0) };
                assert_eq!(a.mat[(n, m)], ea);
                assert_eq!(b.mat[(n, m)], eb);
            }
        }
        let z = LatticeState::window(0, vec![c(0.0); 6], vec![c(1.0), c(0.0), c(1.0), c(1.0), c(1.0), c(1.0)], 1);
        assert!(matches!(build_ab(&z), Err(LatticeError::ZeroY(1))));
    }

    #[test]
    fn factorization_on_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = LatticeState::random(&mut rng, 24, 0.7, Boundary::Window { buffer: 4 });
        let (r1, r2) = factorization_residuals(&s, 4).unwrap();
        assert!(r1 < 1e-12 && r2 < 1e-12, "{r1} {r2}");
    }

    #[test]
    fn ab_round_trip_recovers_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = LatticeState::random(&mut rng, 10, 0.7, Boundary::Window { buffer: 1 });
        let (a, b) = build_ab(&s).unwrap();
        let r = state_from_ab(&a, &b);
        for n in 1..8 {
            assert!((r.x[n] * r.y[n] - s.x[n] * s.y[n]).norm() < 1e-12);
            assert!((r.x[n + 1] * r.y[n] - s.x[n + 1] * s.y[n]).norm() < 1e-12);
        }
    }

    #[test]
    fn dressing_lemma() {
        let s = LatticeState::window(-6, vec![c(0.0); 12], vec![c(0.3); 12], 4);
        assert_eq!(dressing_check(&s).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut s = LatticeState::random(&mut rng, 12, 0.5, Boundary::Window { buffer: 4 });
        s.n_min = -6;
        assert!(dressing_check(&s).unwrap() < 1e-12);
        let l = dressing(&s);
        assert!((l[6] - c(1.0)).norm() < 1e-15);
        for i in 1..12 {
            assert!((l[i] / l[i - 1] - s.v(i)).norm() < 1e-13);
        }
    }

    #[test]
    fn first_hamiltonians_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = LatticeState::random(&mut rng, 7, 0.6, Boundary::Periodic);
        let n = s.len();
        let h11: C64 = (0..n).map(|i| s.x[(i + 1) % n] * s.y[i]).sum();
        let h21: C64 = (0..n).map(|i| s.x[i] * s.y[(i + 1) % n]).sum();
        assert!((hamiltonian(1, 1, &s).unwrap() - h11).norm() < 1e-14);
        assert!((hamiltonian(2, 1, &s).unwrap() - h21).norm() < 1e-14);
        let z = LatticeState::periodic(vec![c(0.0); 5], vec![c(0.0); 5]);
        for k in 1..=2 {
            for i in 1..=4 {
                assert_eq!(hamiltonian(k, i, &z).unwrap(), c(0.0));
            }
        }
    }

    #[test]
    fn trace_of_square_against_dense_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = LatticeState::random(&mut rng, 3, 0.6, Boundary::Periodic);
        // dense oracle on a long unrolled window, middle period only
        let w = s.unroll(12);
        let d = w.len() - 1;
        let l = CMat::from_fn(d, |n, m| l1_entry(&w, n, m));
        let p = &l * &l;
        let tr: C64 = (12..15).map(|r| p[(r, r)]).sum();
        assert!((hamiltonian(1, 2, &s).unwrap() + tr / 2.0).norm() < 1e-13);
    }

    #[test]
    fn banded_diagonal_matches_dense_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = LatticeState::random(&mut rng, 24, 0.7, Boundary::Window { buffer: 4 });
        for k in 1..=2u8 {
            for i in 1..=5 {
                let p = lax_k(&w, k).pow(i);
                for r in 0..w.len() - 1 {
                    assert!((diag_power(&w, k, i, r) - p[(r, r)]).norm() < 1e-13, "k={k} i={i} r={r}");
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = LatticeState::random(&mut rng, 6, 0.5, Boundary::Periodic);
        for k in 1..=2u8 {
            for i in 1..=3 {
                let g = ham_gradient(k, i, &s).unwrap();
                for site in 0..6 {
                    let h = 1e-6;
                    let mut p = s.clone();
                    let mut m = s.clone();
                    p.x[site] += h;
                    m.x[site] -= h;
                    let fd = (hamiltonian(k, i, &p).unwrap() - hamiltonian(k, i, &m).unwrap()) / (2.0 * h);
                    assert!((fd - g.dx[site]).norm() <= 1e-7 * fd.norm().max(1e-3), "k={k} i={i}");
                    let mut p = s.clone();
                    let mut m = s.clone();
                    p.y[site] += h;
                    m.y[site] -= h;
                    let fd = (hamiltonian(k, i, &p).unwrap() - hamiltonian(k, i, &m).unwrap()) / (2.0 * h);
                    assert!((fd - g.dy[site]).norm() <= 1e-7 * fd.norm().max(1e-3), "k={k} i={i}");
                }
            }
        }
    }

    #[test]
    fn al_is_half_sum_of_first_flows() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = LatticeState::random(&mut rng, 9, 0.8, Boundary::Periodic);
        let a = ham_flow_rhs(1, 1, &s).unwrap();
        let b = ham_flow_rhs(2, 1, &s).unwrap();
        let al = al_rhs(&s);
        for i in 0..9 {
            assert!((0.5 * (a.dx[i] + b.dx[i]) - al.dx[i]).norm() < 1e-14);
            assert!((0.5 * (a.dy[i] + b.dy[i]) - al.dy[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn matrix_flow_zero_data() {
        let s = LatticeState::window(0, vec![c(0.0); 16], vec![c(1.0); 16], 4);
        let (a, b) = build_ab(&s).unwrap();
        for k in 1..=2 {
            let (da, db) = matrix_flow_rhs(k, 1, &a, &b).unwrap();
            assert!(da.mat.block_max(0, 15) < 1e-14 && db.mat.block_max(0, 15) < 1e-14);
        }
    }

    #[test]
    fn matrix_flow_i1_k1_diagonal_by_hand() {
        // For i = 1: (AB⁻¹)₊ and (B⁻¹A)₊ are upper parts; the diagonal of dA is
        // aₙ((AB⁻¹)ₙₙ − (B⁻¹A)ₙₙ) with (AB⁻¹)ₙₙ = aₙ − b_{n+1} and (B⁻¹A)ₙₙ = aₙ − bₙ·1.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = LatticeState::random(&mut rng, 14, 0.6, Boundary::Window { buffer: 4 });
        let (a, b) = build_ab(&s).unwrap();
        let (da, _) = matrix_flow_rhs(1, 1, &a, &b).unwrap();
        for n in 4..8 {
            let an = a.mat[(n, n)];
            let x = an - b.mat[(n + 1, n)];
            let y = an - b.mat[(n, n - 1)];
            assert!((da.mat[(n, n)] - an * (x - y)).norm() < 1e-13);
        }
    }

    #[test]
    fn integrator_trivial_and_blowup() {
        let s = LatticeState::periodic(vec![c(0.0); 6], vec![c(0.0); 6]);
        let t = integrate(&s, Flow::Al, 0.1, 0.01, &[]).unwrap();
        assert_eq!(t.state.x, s.x);
        let bad = LatticeState::periodic(vec![c(1.0), c(0.0)], vec![c(1.0 - 1e-13), c(0.0)]);
        assert!(matches!(integrate(&bad, Flow::Al, 0.01, 0.01, &[]), Err(LatticeError::BlowUp { .. })));
    }

    #[test]
    fn semi_infinite_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let s = LatticeState::random(&mut rng, 21, 0.6, Boundary::SemiInfinite);
        let r = semi_infinite_constraint(&s, 1).unwrap();
        assert!(r.constraint < 1e-12 && r.left_inverse == 0.0);
        let mut t = s.clone();
        t.x[0] = one() / t.y[0];
        let r = semi_infinite_constraint(&t, 1).unwrap();
        assert!(r.correction_norm < 1e-15 && r.uncorrected < 1e-12);
    }

    #[test]
    fn bi_infinite_product_is_not_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let s = localized_window(&mut rng, 8, 6);
        assert!(bi_infinite_l1l2_deviation(&s).unwrap() > 0.1);
    }
}
