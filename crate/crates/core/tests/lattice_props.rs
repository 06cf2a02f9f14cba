use alhier::lattice::*;
use alhier::C64;
use proptest::prelude::*;

fn site() -> impl Strategy<Value = C64> {
    (-0.6f64..0.6, -0.6f64..0.6).prop_map(|(a, b)| C64::new(a, b))
}

fn nonzero_site() -> impl Strategy<Value = C64> {
    (0.15f64..0.7, 0.0f64..std::f64::consts::TAU).prop_map(|(r, t)| C64::from_polar(r, t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn factorization_holds(x in prop::collection::vec(site(), 20), y in prop::collection::vec(nonzero_site(), 20)) {
        let s = LatticeState::window(-10, x, y, 4);
        let (r1, r2) = factorization_residuals(&s, 4).unwrap();
        prop_assert!(r1 < 1e-12 && r2 < 1e-12);
    }

    #[test]
    fn al_equals_half_sum_of_first_flows(x in prop::collection::vec(site(), 7), y in prop::collection::vec(site(), 7)) {
        let s = LatticeState::periodic(x, y);
        let a = ham_flow_rhs(1, 1, &s).unwrap();
        let b = ham_flow_rhs(2, 1, &s).unwrap();
        let al = al_rhs(&s);
        for i in 0..7 {
            prop_assert!((0.5 * (a.dx[i] + b.dx[i]) - al.dx[i]).norm() < 1e-13);
            prop_assert!((0.5 * (a.dy[i] + b.dy[i]) - al.dy[i]).norm() < 1e-13);
        }
    }

    #[test]
    fn l1_keeps_its_shape(x in prop::collection::vec(site(), 9), y in prop::collection::vec(site(), 9)) {
        let s = LatticeState::window(0, x, y, 1);
        let (l1, l2) = build_lax(&s).unwrap();
        prop_assert_eq!(l1.shape_defect(0, 8), 0.0);
        prop_assert_eq!(l2.shape_defect(0, 8), 0.0);
    }

    #[test]
    fn semi_infinite_constraint_holds(x in prop::collection::vec(site(), 21), y in prop::collection::vec(nonzero_site(), 21)) {
        let s = LatticeState::semi_infinite(x, y);
        let r = semi_infinite_constraint(&s, 1).unwrap();
        prop_assert!(r.constraint < 1e-12);
    }
}
