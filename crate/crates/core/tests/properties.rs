use ctwork::config::RunConfig;
use ctwork::cylfield::{CylinderGrid, MapField};
use ctwork::decay::{linear_fit, three_interval_bound, xi_of_gamma};
use ctwork::instanton::functional;
use ctwork::la::V4;
use ctwork::triad::{invariant_check, Triad, GOLDEN};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn xi_solves_its_quadratic(gamma in 0.01f64..0.4999) {
        let xi = xi_of_gamma(gamma);
        prop_assert!(xi >= 1.0);
        prop_assert!((xi + 1.0 / xi - 1.0 / gamma).abs() <= 1e-12 / gamma);
    }

    // A ρ^{-k} + B ρ^{k-N} with ρ ≥ ξ(γ) satisfies the hypothesis, so the
    // bound must dominate it.
    #[test]
    fn three_interval_bound_dominates(
        gamma in 0.05f64..0.45,
        stretch in 1.0f64..3.0,
        a in 0.0f64..10.0,
        b in 0.0f64..10.0,
        n in 3usize..64,
    ) {
        let rho = xi_of_gamma(gamma) * stretch;
        let last = (n - 1) as i32;
        let xs: Vec<f64> = (0..n).map(|k| a * rho.powi(-(k as i32)) + b * rho.powi(k as i32 - last)).collect();
        let r = three_interval_bound(&xs, gamma).unwrap();
        prop_assert!(r.holds(), "violations {:?}", r.violations);
        let bound = r.bound.unwrap();
        for (x, c) in xs.iter().zip(&bound) {
            prop_assert!(*x <= c + 1e-12 * c.max(1e-300));
        }
    }

    #[test]
    fn linear_fit_recovers_lines(slope in -5.0f64..5.0, icpt in -5.0f64..5.0, n in 3usize..40) {
        let x: Vec<f64> = (0..n).map(|k| k as f64 * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|x| icpt + slope * x).collect();
        let (b, a, _) = linear_fit(&x, &y);
        prop_assert!((b - slope).abs() < 1e-10 && (a - icpt).abs() < 1e-10);
    }

    // Every row's τ stencil, one-sided ends included, has error h² f''' / 6.
    #[test]
    fn dtau_error_matches_central_on_cubics(c in prop::array::uniform4(-3.0f64..3.0), ntau in 8usize..40) {
        let g = CylinderGrid::new(1.7, ntau, 8).unwrap();
        let f: Vec<f64> = (0..g.len())
            .map(|k| {
                let s = g.tau(k / g.nt);
                c[0] + s * (c[1] + s * (c[2] + s * c[3]))
            })
            .collect();
        let h = g.htau();
        for k in 0..g.len() {
            let s = g.tau(k / g.nt);
            let exact = c[1] + s * (2.0 * c[2] + 3.0 * s * c[3]);
            prop_assert!((g.dtau(&f, k) - exact - h * h * c[3]).abs() < 1e-9);
        }
    }

    #[test]
    fn functional_is_invariant_under_circle_rotation(
        amp in prop::array::uniform3(-0.1f64..0.1),
        shift in 1usize..16,
    ) {
        let t = Triad::ellipsoid(1.0, GOLDEN);
        let g = CylinderGrid::new(1.0, 9, 16).unwrap();
        let tp = 2.0 * std::f64::consts::PI;
        let w = MapField::from_fn(g, &t, |tau, s| {
            let b = (std::f64::consts::PI * tau).sin();
            V4::new(
                (tp * s).cos() + amp[0] * b,
                (tp * s).sin() + amp[1] * b * (tp * s).cos(),
                amp[2] * b * (2.0 * tp * s).sin(),
                0.3 * amp[2] * b,
            )
        });
        let mut r = w.clone();
        for k in 0..g.len() {
            let (i, j) = (k / g.nt, k % g.nt);
            r.nodes[k] = w.nodes[g.idx(i, (j + shift) % g.nt)];
        }
        let (a, b) = (functional(&t, &w), functional(&t, &r));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300), "{a} vs {b}");
    }

    #[test]
    fn map_field_text_round_trips(seed in any::<u64>()) {
        let t = Triad::ellipsoid_perturbed(seed, 1.0, GOLDEN);
        let g = CylinderGrid::new(2.0, 8, 8).unwrap();
        let w = MapField::from_fn(g, &t, |tau, s| V4::new(1.0 + 0.1 * tau, s, 0.2 * s * tau, 0.1));
        let back = MapField::parse(&w.to_text(4)).unwrap();
        prop_assert_eq!(back, w);
    }

    #[test]
    fn invariants_hold_for_any_sampling_seed(seed in any::<u64>()) {
        for t in [Triad::flat(), Triad::ellipsoid(1.0, GOLDEN), Triad::ellipsoid_perturbed(seed, 1.0, GOLDEN)] {
            let r = invariant_check(&t, 4, seed);
            prop_assert!(r.passes(1e-10), "{}: {:?}", t.id(), r);
        }
    }

    #[test]
    fn config_text_round_trips(
        seed in any::<u64>(),
        nt in 8usize..256,
        gamma in 0.01f64..0.49,
        eps in 1e-4f64..0.5,
        kind in prop::sample::select(vec!["trivial", "near-orbit", "oracle"]),
    ) {
        let mut c = RunConfig { seed, grid_nt: nt, gamma, boundary_eps: eps, ..RunConfig::default() };
        c.set("boundary.kind", kind).unwrap();
        let back = RunConfig::parse(&c.to_text()).unwrap();
        prop_assert_eq!(back, c);
    }
}
