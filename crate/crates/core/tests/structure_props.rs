use alhier::frobenius::{self, Mat2, Route, Ten3};
use alhier::hydro::{self, Chart, LaxSymbol, ModuliPoint};
use alhier::mirror::{self, AffineMap};
use alhier::C64;
use proptest::prelude::*;

fn gap2(a: &Mat2, b: &Mat2) -> f64 {
    (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| (a[i][j] - b[i][j]).norm()).fold(0.0, f64::max)
}

fn gap3(a: &Ten3, b: &Ten3) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                m = m.max((a[i][j][k] - b[i][j][k]).norm());
            }
        }
    }
    m
}

fn flat_point() -> impl Strategy<Value = ModuliPoint> {
    (-0.5f64..0.5, 0.1f64..1.0).prop_map(|(v, w)| ModuliPoint::real_vw(v, w).to_chart(Chart::T))
}

fn mirror_point() -> impl Strategy<Value = ModuliPoint> {
    (-0.5f64..0.5, -2.0f64..-0.1).prop_map(|(v, w)| ModuliPoint::real_vw(v, w))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eta_is_antidiagonal(p in flat_point()) {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let eta = frobenius::residue_eta(&p, Route::Critical).unwrap();
        prop_assert!(gap2(&eta, &[[zero, one], [one, zero]]) < 1e-10);
    }

    #[test]
    fn residue_c_is_third_derivative_of_f0(p in flat_point()) {
        let cc = frobenius::residue_c(&p, Route::Critical).unwrap();
        let f = frobenius::prepotential_f0(p.a, p.b).unwrap();
        prop_assert!(gap3(&cc, &f.third) < 1e-8);
    }

    #[test]
    fn wdvv_holds(p in flat_point()) {
        prop_assert!(frobenius::wdvv_check(&p).unwrap() < 1e-10);
    }

    #[test]
    fn intersection_form_routes_agree(p in flat_point()) {
        let a = frobenius::intersection_form_euler(&p).unwrap();
        let b = frobenius::intersection_form_residue(&p).unwrap();
        prop_assert!(gap2(&a, &b) < 1e-10);
    }

    #[test]
    fn chart_round_trip(p in mirror_point()) {
        let back = p.to_chart(Chart::T).to_chart(Chart::VW);
        prop_assert!((back.a - p.a).norm() < 1e-14 && (back.b - p.b).norm() < 1e-14);
    }

    #[test]
    fn lax_symbols_are_reciprocal(p in mirror_point(), re in -3.0f64..3.0, im in 0.1f64..2.0) {
        let sym = LaxSymbol::new(p);
        let q = C64::new(re, im);
        prop_assert!((sym.rational(q) * sym.second(q) - 1.0).norm() < 1e-12);
        let l = hydro::lax_eval(&sym, q).unwrap();
        prop_assert!((l - sym.rational(q)).norm() < 1e-12 * l.norm().max(1.0));
    }

    #[test]
    fn density_routes_agree(p in mirror_point(), fam in 1u8..=2, n in 1usize..=8) {
        let a = hydro::density_residue(fam, n, &p).unwrap();
        let b = hydro::density_closed(fam, n, &p).unwrap();
        prop_assert!((a - b).norm() < 1e-12 * b.norm().max(1.0));
    }

    #[test]
    fn dual_structure_routes_agree_and_satisfy_wdvv(p in mirror_point()) {
        let a = mirror::dual_c_residue(&p).unwrap();
        let b = mirror::dual_c_transform(&p).unwrap();
        prop_assert!(gap3(&a, &b) < 1e-10);
        prop_assert!(mirror::dual_wdvv(&p).unwrap() < 1e-10);
        let y = [C64::new(0.4, 0.0), C64::new(-1.3, 0.0)];
        let r = mirror::dual_product(&p, mirror::dual_unit(), y).unwrap();
        prop_assert!((r[0] - y[0]).norm() < 1e-12 && (r[1] - y[1]).norm() < 1e-12);
    }

    #[test]
    fn period_routes_agree_inside_the_strip(p in mirror_point(), z in -0.9f64..-0.1) {
        for alpha in 1..=2u8 {
            let k = mirror::twisted_period_contour(alpha, z, &p).unwrap().value;
            let c = mirror::twisted_period_closed(alpha, C64::new(z, 0.0), &p).unwrap().value;
            prop_assert!((k - c).norm() < 1e-6, "alpha {} z {}: {} vs {}", alpha, z, k, c);
        }
    }

    #[test]
    fn corrected_topological_map(p in mirror_point(), z in -0.9f64..-0.1) {
        prop_assert!(mirror::topological_gap(C64::new(z, 0.0), &p, AffineMap::Corrected).unwrap() < 1e-9);
    }
}
