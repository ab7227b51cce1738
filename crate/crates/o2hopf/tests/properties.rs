//! Property tests for the symmetry actions and closed-form solvers.

use std::f64::consts::PI;

use o2hopf::cli::RunConfig;
use o2hopf::linalg::C64;
use o2hopf::model::{ChannelField, FullField, Grid};
use o2hopf::reduced_o2::{evaluate_truncated, solve_cubic_equilibria, BranchKind, CubicCoefficients, ReducedPoint};
use o2hopf::reduction::{displacement, displacement_quadrature, ReducibleSystem, SyntheticParams, SyntheticSystem};
use proptest::prelude::*;

fn cz(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn nonzero(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo..hi, any::<bool>()).prop_map(|(v, s)| if s { v } else { -v })
}

prop_compose! {
    fn coefficients()(kappa in nonzero(0.3, 2.0), chi in nonzero(0.3, 3.0),
                      lr in nonzero(0.2, 2.0), li in -2.0..2.0f64,
                      gr in nonzero(0.2, 2.0), gi in -2.0..2.0f64) -> CubicCoefficients {
        CubicCoefficients::new(kappa, chi, cz(lr, li), cz(gr, gi)).unwrap()
    }
}

prop_compose! {
    fn point()(a1r in -1.0..1.0f64, a1i in -1.0..1.0f64, a2r in -1.0..1.0f64, a2i in -1.0..1.0f64,
               mu in -2.0..2.0f64, pos in any::<bool>()) -> ReducedPoint {
        ReducedPoint::new(cz(a1r, a1i), cz(a2r, a2i), mu, if pos { 1 } else { -1 })
    }
}

fn field(seed: u64, grid: &Grid) -> ChannelField {
    let mut f = ChannelField::zeros(2, grid);
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    for v in f.data.iter_mut() {
        *v = cz(next(), next());
    }
    f.enforce_reality();
    f
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn truncated_map_commutes_with_rotation(c in coefficients(), p in point(), theta in -PI..PI) {
        let (f1, f2) = evaluate_truncated(&c, &p);
        let (g1, g2) = evaluate_truncated(&c, &p.rotate(theta));
        prop_assert!((g1 - f1 * C64::from_polar(1.0, theta)).norm() < 1e-12);
        prop_assert!((g2 - f2 * C64::from_polar(1.0, -theta)).norm() < 1e-12);
    }

    #[test]
    fn truncated_map_commutes_with_reflection(c in coefficients(), p in point()) {
        let (f1, f2) = evaluate_truncated(&c, &p);
        let (g1, g2) = evaluate_truncated(&c, &p.reflect());
        prop_assert!((g1 - f2).norm() < 1e-14);
        prop_assert!((g2 - f1).norm() < 1e-14);
    }

    #[test]
    fn closed_form_branches_are_zeros(c in coefficients(), pos in any::<bool>(), theta in -PI..PI) {
        let s = if pos { 1 } else { -1 };
        prop_assume!((c.lambda + c.gamma).re.abs() > 0.1 && (c.lambda - c.gamma).norm() > 0.1);
        for b in solve_cubic_equilibria(&c, s).unwrap() {
            // the whole group orbit of a zero is zero
            let p = b.point(s).rotate(theta);
            let (f1, f2) = evaluate_truncated(&c, &p);
            let scale = b.amplitude.powi(3).max(1e-300);
            prop_assert!(f1.norm().max(f2.norm()) <= 1e-12 * scale.max(1.0), "{:?}: {} {}", b.kind, f1, f2);
            if b.kind != BranchKind::Trivial {
                prop_assert!(b.amplitude > 0.0);
            }
        }
    }

    #[test]
    fn channel_rotation_composes(seed in any::<u64>(), a in -PI..PI, b in -PI..PI) {
        let g = Grid::new(4.0, 64, 4, 0.01).unwrap();
        let f = field(seed, &g);
        let lhs = f.rotate(a).rotate(b);
        let rhs = f.rotate(a + b);
        prop_assert!(max_diff(&lhs.data, &rhs.data) < 1e-12);
    }

    #[test]
    fn channel_reflection_is_an_involution(seed in any::<u64>(), theta in -PI..PI) {
        let g = Grid::new(4.0, 64, 4, 0.01).unwrap();
        let f = field(seed, &g);
        let m = [1.0, -1.0];
        prop_assert!(max_diff(&f.reflect(&m).reflect(&m).data, &f.data) < 1e-15);
        // S R(theta) = R(-theta) S
        let lhs = f.rotate(theta).reflect(&m);
        let rhs = f.reflect(&m).rotate(-theta);
        prop_assert!(max_diff(&lhs.data, &rhs.data) < 1e-12);
    }

    #[test]
    fn full_field_round_trip_is_real(seed in any::<u64>(), theta in -PI..PI) {
        let g = Grid::new(4.0, 64, 4, 0.01).unwrap();
        let f = field(seed, &g);
        let full = FullField::from_real(&f);
        prop_assert!(full.reality_defect() < 1e-15);
        prop_assert!(max_diff(&full.to_real().data, &f.data) < 1e-15);
        let m = [1.0, -1.0];
        prop_assert!(full.rotate(theta).reality_defect() < 1e-14);
        prop_assert!(full.reflect(&m).reality_defect() < 1e-15);
        prop_assert!(max_diff(&FullField::from_real(&f.rotate(theta)).data, &full.rotate(theta).data) < 1e-14);
    }

    #[test]
    fn config_round_trips_after_edits(seed in 0..=i64::MAX as u64, threads in 0usize..8, eps in prop::collection::vec(1e-4..1e-1f64, 1..6),
                                      m1 in any::<bool>()) {
        let mut cfg = if m1 { RunConfig::m1() } else { RunConfig::m0() };
        cfg.seed = seed;
        cfg.threads = threads;
        cfg.eps = eps;
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // The direct and the integral form of the center displacement agree on the synthetic system.
    #[test]
    fn displacement_routes_agree(r1 in 0.0..0.1f64, r2 in 0.0..0.1f64, p1 in -PI..PI, p2 in -PI..PI,
                                 y1 in -0.01..0.01f64, eps in -0.02..0.02f64) {
        let params = SyntheticParams::prescribed(1.0, 2.0 * PI, cz(-1.0, 0.3), cz(-2.0, -0.1)).unwrap();
        let sys = SyntheticSystem::new(params, eps);
        let (a1, a2) = (C64::from_polar(r1, p1), C64::from_polar(r2, p2));
        let perp = vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0), cz(y1, 0.0), cz(0.0, 0.0)];
        let t = sys.t_star();
        let d = displacement(&sys, a1, a2, &perp, t).unwrap();
        let q = displacement_quadrature(&sys, a1, a2, &perp, t).unwrap();
        let scale = r1 + r2 + 1e-3;
        prop_assert!((d.d1 - q.d1).norm() <= 1e-7 * scale, "{} vs {}", d.d1, q.d1);
        prop_assert!((d.d2 - q.d2).norm() <= 1e-7 * scale, "{} vs {}", d.d2, q.d2);
    }
}
