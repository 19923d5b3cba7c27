use proptest::prelude::*;

use islm_core::dynamics::{hausdorff, reduced_simulate, signed_area, IntegrateOptions};
use islm_core::geometry::{classify, lm_roots, shift_lm, trace_lm_isocline, Classification, Domain, TraceOptions};
use islm_core::policy::is_shift_equivalence_check;
use islm_core::presets;

fn domain() -> Domain {
    Domain {
        y_min: 0.0,
        y_max: 8.0,
        r_min: -0.1,
        r_max: 0.3,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inflation_shifts_every_root_down(delta in -0.06f64..0.06, y in 0.0f64..8.0) {
        let spec = presets::reference();
        let shifted = shift_lm(&spec, delta, 0.0).unwrap();
        let a = lm_roots(y, &spec, (-0.5, 0.7), 2000).unwrap();
        let b = lm_roots(y, &shifted, (-0.5, 0.7), 2000).unwrap();
        // near a fold the scan may resolve a double root differently
        prop_assume!(a.len() == b.len());
        for (ra, rb) in a.iter().zip(&b) {
            prop_assert!((rb - ra + delta).abs() < 1e-9, "{ra} {rb} {delta}");
        }
    }

    #[test]
    fn money_stock_shift_moves_roots_along_income(d in 0.0f64..0.5, y in 1.0f64..6.0) {
        // E is affine in Y, so adding d to the money stock is the same as
        // lowering income by d / (l_y - m_y)
        let spec = presets::reference();
        let shifted = shift_lm(&spec, 0.0, d).unwrap();
        let dy = d / (spec.money.l_y - spec.money.m_y);
        let a = lm_roots(y + dy, &shifted, (-0.5, 0.7), 2000).unwrap();
        let b = lm_roots(y, &spec, (-0.5, 0.7), 2000).unwrap();
        prop_assume!(a.len() == b.len());
        for (ra, rb) in a.iter().zip(&b) {
            prop_assert!((ra - rb).abs() < 1e-7);
        }
    }

    #[test]
    fn fiscal_shift_matches_closed_form(g in -1.0f64..1.0) {
        let r = is_shift_equivalence_check(&presets::reference(), g, &domain());
        prop_assert!(r.max_error < 1e-12);
        prop_assert!(r.lm_unchanged);
    }

    #[test]
    fn is_curve_decreases(y in 0.0f64..7.9, dy in 0.01f64..0.1) {
        let spec = presets::reference();
        let is = islm_core::geometry::is_curve(&spec, &domain());
        prop_assert!(is.rate(y + dy) < is.rate(y));
    }

    #[test]
    fn rate_slope_matches_difference_quotient(r in -0.1f64..0.3) {
        let spec = presets::twice_bent();
        let h = 1e-6;
        let fd = (spec.money_gap(1.0, r + h) - spec.money_gap(1.0, r - h)) / (2.0 * h);
        prop_assert!((fd - spec.money_gap_dr(r)).abs() < 1e-5 * (1.0 + fd.abs()));
    }

    #[test]
    fn reversing_a_loop_negates_its_area(pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..40)) {
        let fwd: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
        let rev: Vec<[f64; 2]> = fwd.iter().rev().copied().collect();
        let (a, b) = (signed_area(&fwd), signed_area(&rev));
        prop_assert!((a + b).abs() <= 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn hausdorff_is_a_symmetric_distance(
        a in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..30),
        b in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..30),
    ) {
        let a: Vec<[f64; 2]> = a.into_iter().map(|(x, y)| [x, y]).collect();
        let b: Vec<[f64; 2]> = b.into_iter().map(|(x, y)| [x, y]).collect();
        let (ab, ba) = (hausdorff(&a, &b), hausdorff(&b, &a));
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(hausdorff(&a, &a) < 1e-12);
    }

    #[test]
    fn classification_agrees_with_eigenvalues(
        a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, d in -2.0f64..2.0,
    ) {
        let j = [[a, b], [c, d]];
        let (class, eig) = classify(&j);
        let det = a * d - b * c;
        prop_assume!(det.abs() > 1e-6 && (a + d).abs() > 1e-6);
        let disc = (a + d).powi(2) - 4.0 * det;
        prop_assume!(disc.abs() > 1e-6);
        // eigenvalue product and sum reproduce the determinant and trace
        let (p, q) = (eig[0], eig[1]);
        let sum = p[0] + q[0];
        let prod = p[0] * q[0] - p[1] * q[1];
        prop_assert!((sum - (a + d)).abs() < 1e-9);
        prop_assert!((prod - det).abs() < 1e-9);
        let expect = if det < 0.0 {
            Classification::Saddle
        } else {
            match (a + d < 0.0, disc > 0.0) {
                (true, true) => Classification::StableNode,
                (true, false) => Classification::StableFocus,
                (false, true) => Classification::UnstableNode,
                (false, false) => Classification::UnstableFocus,
            }
        };
        prop_assert_eq!(class, expect);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn reduced_time_never_decreases_and_stays_on_the_isocline(y0 in 0.5f64..3.9) {
        let spec = presets::reference();
        let iso = trace_lm_isocline(&spec, &domain(), &TraceOptions::default()).unwrap();
        let traj = reduced_simulate(&spec, &iso, y0, 1, 20_000.0, &IntegrateOptions::default()).unwrap();
        prop_assert!(traj.samples.windows(2).all(|w| w[1].t >= w[0].t));
        for s in &traj.samples {
            prop_assert!(spec.money_gap(s.y, s.r).abs() < 1e-8);
        }
    }
}
