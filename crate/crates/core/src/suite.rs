//! Lattice and hydro invariant suites, and the combined report over every module.

use crate::hydro::{self, CompareOptions, HydroError, HydroFlow, LaxSymbol, ModuliPoint, SlowProfile};
use crate::lattice::{self, Boundary, Flow, LatticeError, LatticeState};
use crate::report::{worst, CheckResult, SuiteReport};
use crate::{frobenius, mirror, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Display;
use std::ops::Range;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeSuite {
    /// L₁ = AB⁻¹, L₂ = BA⁻¹, dressing and gauge covariance.
    Factorization,
    /// AL as half the sum of the first flows, matrix vs Hamiltonian flows, Toeplitz shape.
    Flows,
    /// Hamiltonians along the AL flow, RK4 order, symplectic defect.
    Conservation,
    /// L₁L̂₂ = 1 on the half line and its bi-infinite negative control.
    SemiInfinite,
    All,
}

impl LatticeSuite {
    pub const NAMES: [&'static str; 5] = ["factorization", "flows", "conservation", "semi_infinite", "all"];

    fn includes(self, other: LatticeSuite) -> bool {
        self == LatticeSuite::All || self == other
    }
}

impl FromStr for LatticeSuite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "factorization" => Ok(Self::Factorization),
            "flows" => Ok(Self::Flows),
            "conservation" => Ok(Self::Conservation),
            "semi_infinite" | "semi-infinite" => Ok(Self::SemiInfinite),
            "all" => Ok(Self::All),
            _ => Err(format!("unknown lattice suite {s:?}; expected one of {}", Self::NAMES.join(", "))),
        }
    }
}

fn run<E: Display>(report: &mut SuiteReport, name: &str, points: usize, tol: f64, above: bool, f: impl FnOnce() -> Result<f64, E>) {
    match f() {
        Ok(v) if above => report.push(CheckResult::above(name, points, v, tol)),
        Ok(v) => report.push(CheckResult::below(name, points, v, tol)),
        Err(e) => report.push(CheckResult::errored(name, points, tol, e)),
    }
}

fn gap(a: &[C64], b: &[C64], range: Range<usize>) -> f64 {
    range.map(|n| (a[n] - b[n]).norm()).fold(0.0, worst)
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn lattice_suite(seed: u64, which: LatticeSuite) -> SuiteReport {
    let mut report = SuiteReport::new("lattice", seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6c61_7474);

    if which.includes(LatticeSuite::Factorization) {
        let windows: Vec<LatticeState> = (0..20)
            .map(|_| {
                let len = rng.gen_range(16..=40);
                LatticeState::random(&mut rng, len, 0.6, Boundary::Window { buffer: 4 })
            })
            .collect();
        run(&mut report, "lattice.factorization", windows.len(), 1e-12, false, || {
            windows.iter().try_fold(0.0, |m, s| {
                let (r1, r2) = lattice::factorization_residuals(s, 4)?;
                Ok::<_, LatticeError>(worst(worst(m, r1), r2))
            })
        });
        run(&mut report, "lattice.dressing", windows.len(), 1e-12, false, || {
            windows.iter().try_fold(0.0, |m, s| Ok::<_, LatticeError>(worst(m, lattice::dressing_check(s)?)))
        });
        run(&mut report, "lattice.ab_round_trip", windows.len(), 1e-12, false, || {
            windows.iter().try_fold(0.0, |m, s| {
                let (a, b) = lattice::build_ab(s)?;
                let back = lattice::state_from_ab(&a, &b);
                let (a2, b2) = lattice::build_ab(&back)?;
                let d = a.mat.n;
                Ok::<_, LatticeError>(worst(worst(m, (&a.mat - &a2.mat).block_max(1, d - 1)), (&b.mat - &b2.mat).block_max(1, d - 1)))
            })
        });
        run(&mut report, "lattice.gauge_covariance", 1, 1e-13, false, || {
            let s = &windows[0];
            let g = C64::new(1.7, -0.4);
            let mut t = s.clone();
            t.x.iter_mut().for_each(|x| *x /= g);
            t.y.iter_mut().for_each(|y| *y *= g);
            let (a, b) = lattice::build_ab(s)?;
            let (ga, gb) = lattice::build_ab(&t)?;
            let d = a.mat.n;
            let mut m = worst((&a.mat - &ga.mat).block_max(0, d), (&b.mat - &gb.mat).block_max(0, d));
            for k in 1..=2 {
                let (da, db) = lattice::matrix_flow_rhs(k, 2, &a, &b)?;
                let (gda, gdb) = lattice::matrix_flow_rhs(k, 2, &ga, &gb)?;
                m = worst(worst(m, (&da.mat - &gda.mat).block_max(0, d)), (&db.mat - &gdb.mat).block_max(0, d));
            }
            Ok::<_, LatticeError>(m)
        });
    }

    if which.includes(LatticeSuite::Flows) {
        let states: Vec<LatticeState> = (0..100)
            .map(|_| {
                let len = rng.gen_range(3..=12);
                LatticeState::random(&mut rng, len, 0.8, Boundary::Periodic)
            })
            .collect();
        run(&mut report, "lattice.al_half_sum_of_first_flows", states.len(), 1e-12, false, || {
            states.iter().try_fold(0.0, |m, s| {
                let a = lattice::ham_flow_rhs(1, 1, s)?;
                let b = lattice::ham_flow_rhs(2, 1, s)?;
                let al = lattice::al_rhs(s);
                let n = s.len();
                let hx: Vec<C64> = (0..n).map(|i| 0.5 * (a.dx[i] + b.dx[i])).collect();
                let hy: Vec<C64> = (0..n).map(|i| 0.5 * (a.dy[i] + b.dy[i])).collect();
                Ok::<_, LatticeError>(worst(worst(m, gap(&hx, &al.dx, 0..n)), gap(&hy, &al.dy, 0..n)))
            })
        });
        run(&mut report, "lattice.al_closed_form", states.len(), 1e-15, false, || {
            states.iter().try_fold(0.0, |m, s| {
                let al = lattice::al_rhs(s);
                let n = s.len();
                let mut e: f64 = 0.0;
                for i in 0..n {
                    let (l, r) = ((i + n - 1) % n, (i + 1) % n);
                    let v = c(1.0) - s.x[i] * s.y[i];
                    e = worst(e, (al.dx[i] - 0.5 * v * (s.x[l] + s.x[r])).norm());
                    e = worst(e, (al.dy[i] + 0.5 * v * (s.y[l] + s.y[r])).norm());
                }
                Ok::<_, LatticeError>(worst(m, e))
            })
        });
        let generic = LatticeState::random(&mut rng, 40, 0.6, Boundary::Window { buffer: 8 });
        run(&mut report, "lattice.matrix_vs_hamiltonian_flows", 6, 1e-10, false, || {
            let (a, b) = lattice::build_ab(&generic)?;
            let mut m: f64 = 0.0;
            for k in 1..=2u8 {
                for i in 1..=3 {
                    let (da, db) = lattice::matrix_flow_rhs(k, i, &a, &b)?;
                    let gm = lattice::gauge_rates_from_ab(&a, &b, &da, &db);
                    let r = lattice::ham_flow_rhs(k, i, &generic)?;
                    let gh = lattice::gauge_rates_from_sites(&generic, &r);
                    m = worst(worst(m, gap(&gm.xy, &gh.xy, 12..28)), gap(&gm.xy_shift, &gh.xy_shift, 12..28));
                }
            }
            Ok::<_, LatticeError>(m)
        });
        let mut local = lattice::localized_window(&mut rng, 8, 24);
        local.boundary = Boundary::Window { buffer: 8 };
        let wide = LatticeState::random(&mut rng, 60, 0.5, Boundary::Window { buffer: 8 });
        run(&mut report, "lattice.toeplitz_step_order", 6, 0.25, false, || {
            let mut m: f64 = 0.0;
            for (k, i) in [(1u8, 1usize), (1, 2), (1, 3), (2, 1), (2, 2), (2, 3)] {
                let s = if k == 1 { &local } else { &wide };
                let e1 = lattice::toeplitz_step_defect(s, k, i, 1e-2)?;
                let e2 = lattice::toeplitz_step_defect(s, k, i, 5e-3)?;
                m = worst(m, ((e1 / e2).log2() - 2.0).abs());
            }
            Ok::<_, LatticeError>(m)
        });
        let small = LatticeState::random(&mut rng, 6, 0.5, Boundary::Periodic);
        run(&mut report, "lattice.gradient_finite_difference", 6, 1e-7, false, || {
            let h = 1e-6;
            let mut m: f64 = 0.0;
            for k in 1..=2u8 {
                for i in 1..=3 {
                    let g = lattice::ham_gradient(k, i, &small)?;
                    for site in 0..small.len() {
                        for part in 0..2 {
                            let (mut p, mut q) = (small.clone(), small.clone());
                            if part == 0 {
                                p.x[site] += h;
                                q.x[site] -= h;
                            } else {
                                p.y[site] += h;
                                q.y[site] -= h;
                            }
                            let fd = (lattice::hamiltonian(k, i, &p)? - lattice::hamiltonian(k, i, &q)?) / (2.0 * h);
                            let an = if part == 0 { g.dx[site] } else { g.dy[site] };
                            m = worst(m, (fd - an).norm() / fd.norm().max(1e-3));
                        }
                    }
                }
            }
            Ok::<_, LatticeError>(m)
        });
    }

    if which.includes(LatticeSuite::Conservation) {
        let s = LatticeState::random(&mut rng, 64, 0.5, Boundary::Periodic);
        let monitor: Vec<(u8, usize)> = (1..=2u8).flat_map(|k| (1..=4).map(move |i| (k, i))).collect();
        run(&mut report, "lattice.al_conservation", monitor.len(), 1e-8, false, || {
            let t = lattice::integrate_with(&s, Flow::Al, 1.0, 1e-3, &monitor, 10, |_| {})?;
            Ok::<_, LatticeError>(t.relative_drift().into_iter().fold(0.0, worst))
        });
        let short = LatticeState::random(&mut rng, 8, 0.4, Boundary::Periodic);
        run(&mut report, "lattice.hamiltonians_commute", 3 * monitor.len(), 1e-8, false, || {
            let mut m: f64 = 0.0;
            for flow in [Flow::Ham { k: 1, i: 2 }, Flow::Ham { k: 2, i: 1 }, Flow::Ham { k: 2, i: 3 }] {
                let t = lattice::integrate(&short, flow, 1.0, 1e-2, &monitor)?;
                m = t.relative_drift().into_iter().fold(m, worst);
            }
            Ok::<_, LatticeError>(m)
        });
        let s12 = LatticeState::random(&mut rng, 12, 0.5, Boundary::Periodic);
        run(&mut report, "lattice.rk4_order", 3, 0.5, false, || {
            let end = |dt: f64| lattice::integrate(&s12, Flow::Al, 1.0, dt, &[]).map(|t| t.state);
            let (a, b, d) = (end(0.1)?, end(0.05)?, end(0.025)?);
            let diff = |p: &LatticeState, q: &LatticeState| {
                let n = p.len();
                worst(gap(&p.x, &q.x, 0..n), gap(&p.y, &q.y, 0..n))
            };
            Ok::<_, LatticeError>(((diff(&a, &b) / diff(&b, &d)).log2() - 4.0).abs())
        });
        let two = LatticeState::periodic(vec![C64::new(0.3, 0.1), C64::new(-0.2, 0.25)], vec![C64::new(0.4, -0.1), C64::new(0.1, 0.2)]);
        run(&mut report, "lattice.symplectic_defect", 2, 1.0, false, || {
            let mut m: f64 = 0.0;
            for flow in [Flow::Al, Flow::Ham { k: 1, i: 2 }] {
                let d = lattice::symplectic_defect(flow, &two, 0.05)?;
                m = worst(m, d / (0.05 * 0.05));
            }
            Ok::<_, LatticeError>(m)
        })
    }

    if which.includes(LatticeSuite::SemiInfinite) {
        let states: Vec<LatticeState> = (0..10).map(|_| LatticeState::random(&mut rng, 20, 0.6, Boundary::SemiInfinite)).collect();
        run(&mut report, "lattice.semi_infinite_constraint", states.len(), 1e-12, false, || {
            states.iter().try_fold(0.0, |m, s| {
                let r = lattice::semi_infinite_constraint(s, 3)?;
                Ok::<_, LatticeError>(worst(worst(m, r.constraint), r.left_inverse))
            })
        });
        let local = lattice::localized_window(&mut rng, 8, 6);
        run(&mut report, "lattice.bi_infinite_negative_control", 1, 0.1, true, || lattice::bi_infinite_l1l2_deviation(&local));
    }
    report.finish()
}

/// Hydro suite; `points` random (v, w) with w < 0 for the density routes.
pub fn hydro_suite(seed: u64, points: usize) -> SuiteReport {
    let mut report = SuiteReport::new("hydro", seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x68_7964_726f);
    let pts: Vec<ModuliPoint> = (0..points).map(|_| ModuliPoint::real_vw(rng.gen_range(-1.0..1.0), rng.gen_range(-2.0..-0.05))).collect();

    run(&mut report, "hydro.density_routes", pts.len(), 1e-12, false, || {
        let mut m: f64 = 0.0;
        for p in &pts {
            for fam in 1..=2u8 {
                for n in 1..=8 {
                    m = worst(m, (hydro::density_residue(fam, n, p)? - hydro::density_closed(fam, n, p)?).norm());
                }
            }
        }
        Ok::<_, HydroError>(m)
    });
    run(&mut report, "hydro.al_density", pts.len(), 1e-12, false, || {
        pts.iter().try_fold(0.0, |m, p| {
            let sum = -0.5 * (hydro::density_h(1, 1, p)? + hydro::density_h(2, 1, p)?);
            Ok::<_, HydroError>(worst(m, (sum - hydro::al_density(p)).norm()))
        })
    });
    run(&mut report, "hydro.chart_round_trip", pts.len(), 1e-14, false, || {
        Ok::<_, HydroError>(pts.iter().fold(0.0, |m, p| {
            let back = p.to_chart(hydro::Chart::T).to_chart(hydro::Chart::VW);
            worst(worst(m, (back.a - p.a).norm()), (back.b - p.b).norm())
        }))
    });
    run(&mut report, "hydro.lax_forms", pts.len(), 1e-13, false, || {
        pts.iter().try_fold(0.0, |m, p| {
            let sym = LaxSymbol::new(*p);
            let mut e = m;
            for q in [C64::new(0.7, 0.3), C64::new(-1.2, 0.5), C64::new(2.5, -1.0)] {
                let r = sym.rational(q);
                e = worst(e, (hydro::lax_eval(&sym, q)? - r).norm() / r.norm().max(1.0));
                e = worst(e, (r * sym.second(q) - 1.0).norm());
            }
            Ok::<_, HydroError>(e)
        })
    });

    let prof = SlowProfile { length: 2.0, v_amp: 0.25, w_mean: 0.5, w_amp: 0.15 };
    let flows = [HydroFlow::Lax { k: 1, n: 1 }, HydroFlow::Lax { k: 1, n: 3 }, HydroFlow::Lax { k: 2, n: 1 }, HydroFlow::Lax { k: 2, n: 2 }, HydroFlow::Al];
    run(&mut report, "hydro.lax_vs_flux_route", flows.len(), 1e-6, false, || {
        let f = prof.field(256)?;
        let mut m: f64 = 0.0;
        for flow in flows {
            let lax = hydro::hydro_flow_rhs(flow, &f)?;
            let flux = hydro::hydro_flux_rhs(flow, &f)?;
            let (mut g, mut size) = (0.0f64, 0.0f64);
            for (i, p) in f.values.iter().enumerate() {
                let (v, w) = p.vw_pair();
                let t1s = v.exp() * (w.exp() - 1.0) * lax[i][0] + (v + w).exp() * lax[i][1];
                let t2s = lax[i][0] + lax[i][1];
                g = worst(worst(g, (t1s - flux[i][0]).norm()), (t2s - flux[i][1]).norm());
                size = size.max(flux[i][0].norm()).max(flux[i][1].norm());
            }
            m = worst(m, g / size.max(1.0));
        }
        Ok::<_, HydroError>(m)
    });
    run(&mut report, "hydro.casimir_drift", 3, 1e-8, false, || {
        let f = prof.field(256)?;
        let r = hydro::pde_integrate(&f, HydroFlow::Al, 0.1, 1e-2)?;
        Ok::<_, HydroError>(r.drift.into_iter().fold(0.0, worst))
    });
    run(&mut report, "hydro.constant_profile_stationary", 1, 1e-10, false, || {
        let flat = SlowProfile { length: 6.4, v_amp: 0.0, w_mean: 0.5, w_amp: 0.0 };
        let r = hydro::continuum_sweep(&flat, &[0.1], &CompareOptions::default())?;
        Ok::<_, HydroError>(r[0].sup_error)
    });
    match hydro::continuum_sweep(&SlowProfile::default(), &[0.1, 0.05], &CompareOptions::default()) {
        Ok(r) => {
            for e in &r {
                report.record(&format!("continuum_sup_error_eps_{}", e.epsilon), format!("{:e}", e.sup_error));
            }
            report.push(CheckResult::below("hydro.continuum_error_ratio", 2, r[1].sup_error / r[0].sup_error, 0.6));
            report.push(CheckResult::above("hydro.continuum_order", 2, r[1].order_estimate.unwrap_or(f64::NAN), 0.7));
        }
        Err(e) => {
            report.push(CheckResult::errored("hydro.continuum_error_ratio", 2, 0.6, &e));
            report.push(CheckResult::errored("hydro.continuum_order", 2, 0.7, e));
        }
    }
    report.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Lattice,
    Hydro,
    Frobenius,
    Mirror,
    All,
}

impl FromStr for Scope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lattice" => Ok(Self::Lattice),
            "hydro" => Ok(Self::Hydro),
            "frobenius" => Ok(Self::Frobenius),
            "mirror" => Ok(Self::Mirror),
            "all" => Ok(Self::All),
            _ => Err(format!("unknown scope {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub scope: Scope,
    pub seed: u64,
    pub points: usize,
    pub pass: bool,
    pub suites: Vec<SuiteReport>,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.suites.iter().flat_map(|s| s.checks.iter()).filter(|c| !c.pass)
    }
}

/// Runs every suite in `scope`; `points` sizes the frobenius and mirror samples,
/// the hydro density sample is fixed at 50.
pub fn verify(scope: Scope, seed: u64, points: usize) -> VerifyReport {
    let mut suites = Vec::new();
    let on = |s: Scope| scope == Scope::All || scope == s;
    if on(Scope::Lattice) {
        suites.push(lattice_suite(seed, LatticeSuite::All));
    }
    if on(Scope::Hydro) {
        suites.push(hydro_suite(seed, 50));
    }
    if on(Scope::Frobenius) {
        suites.push(frobenius::verify_suite(seed, points));
    }
    if on(Scope::Mirror) {
        suites.push(mirror::verify_suite(seed, points));
    }
    let pass = suites.iter().all(SuiteReport::passed);
    VerifyReport { scope, seed, points, pass, suites }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_parse() {
        for n in LatticeSuite::NAMES {
            assert!(n.parse::<LatticeSuite>().is_ok());
        }
        assert!("toda".parse::<LatticeSuite>().is_err());
        assert_eq!("mirror".parse::<Scope>(), Ok(Scope::Mirror));
    }

    #[test]
    fn factorization_suite_passes() {
        let r = lattice_suite(3, LatticeSuite::Factorization);
        assert!(r.passed(), "{:?}", r.checks);
        assert!(r.get("lattice.factorization").is_some());
        assert!(r.get("lattice.al_conservation").is_none());
    }

    #[test]
    fn semi_infinite_suite_passes() {
        let r = lattice_suite(4, LatticeSuite::SemiInfinite);
        assert!(r.passed(), "{:?}", r.checks);
    }
}
