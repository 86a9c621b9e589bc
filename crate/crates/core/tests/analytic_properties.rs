use aoi_harvest::analytic::{
    aoi_maf_wfb, aoi_rr_nofb, baseline_infinite_battery, feedback_gain, optimize_gamma, p_nofb, p_wfb, solve_nofb,
    solve_wfb,
};
use aoi_harvest::model::aoi_area_increment;
use aoi_harvest::{Feedback, RootSolverConfig};
use proptest::prelude::*;

fn cfg() -> RootSolverConfig {
    RootSolverConfig::default()
}

fn q_grid() -> Vec<f64> {
    (0..=18).map(|i| i as f64 * 0.05).collect()
}

#[test]
fn auxiliary_values_strictly_decrease() {
    for q in [0.0, 0.1, 0.3, 0.5, 0.7, 0.9] {
        let mut prev_n = f64::INFINITY;
        let mut prev_w = f64::INFINITY;
        for i in 0..=50_000 {
            let l = i as f64 * 1e-3;
            let n = p_nofb(l, q).unwrap();
            let w = p_wfb(l, q).unwrap();
            assert!(n < prev_n, "p_nofb not decreasing at q={q}, l={l}");
            // Allow rounding-level slack at the breakpoint where the two
            // branches meet.
            assert!(w < prev_w + 1e-12, "p_wfb not decreasing at q={q}, l={l}");
            prev_n = n;
            prev_w = w;
        }
    }
}

#[test]
fn single_source_monotone_in_q() {
    let mut prev_n = 0.0;
    let mut prev_w = 0.0;
    let mut prev_thr = f64::INFINITY;
    for q in q_grid() {
        let n = solve_nofb(q, &cfg()).unwrap();
        let w = solve_wfb(q, &cfg()).unwrap();
        assert!(n.lambda_star >= prev_n);
        assert!(w.lambda_star >= prev_w);
        if q < 0.5 {
            assert!(n.threshold <= prev_thr);
            prev_thr = n.threshold;
        }
        prev_n = n.lambda_star;
        prev_w = w.lambda_star;
    }
}

#[test]
fn bounds_against_baselines_and_greedy() {
    for q in q_grid() {
        let n = solve_nofb(q, &cfg()).unwrap().lambda_star;
        let w = solve_wfb(q, &cfg()).unwrap().lambda_star;
        assert!(n >= baseline_infinite_battery(q, Feedback::NoFeedback).unwrap());
        assert!(w >= baseline_infinite_battery(q, Feedback::WithFeedback).unwrap());
        assert!(n <= 1.0 / (1.0 - q) + 1e-12);
    }
}

#[test]
fn multi_source_reduces_to_single_source() {
    for i in 0..50 {
        let q = i as f64 * 0.01;
        let s = solve_nofb(q, &cfg()).unwrap();
        let v = aoi_rr_nofb(q, 1, s.threshold).unwrap();
        assert!((v - s.lambda_star).abs() <= 1e-8 * s.lambda_star, "q={q}");
    }
    for i in 0..95 {
        let q = i as f64 * 0.01;
        let s = solve_wfb(q, &cfg()).unwrap();
        let v = aoi_maf_wfb(q, 1, s.threshold).unwrap();
        assert!((v - s.lambda_star).abs() <= 1e-8 * s.lambda_star, "q={q}");
    }
}

#[test]
fn feedback_gain_shape() {
    let gains: Vec<(f64, f64)> = q_grid().into_iter().map(|q| (q, feedback_gain(q, &cfg()).unwrap())).collect();
    assert!(gains.iter().all(|&(_, g)| g >= -1e-12));
    let (q_best, _) = gains.iter().copied().fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    assert!((0.25..=0.55).contains(&q_best), "argmax at {q_best}");
}

#[test]
fn optimal_threshold_decreases_with_sources() {
    for fb in Feedback::ALL {
        let mut prev = f64::INFINITY;
        for m in 1..=8 {
            let g = optimize_gamma(0.3, m, fb, &cfg()).unwrap();
            assert!(g.gamma <= prev);
            prev = g.gamma;
        }
    }
}

proptest! {
    #[test]
    fn closed_forms_increase_in_sources(q in 0.0f64..0.95, gamma in 0.0f64..5.0, m in 1usize..50) {
        let a = aoi_rr_nofb(q, m, gamma).unwrap();
        let b = aoi_rr_nofb(q, m + 1, gamma).unwrap();
        prop_assert!(b > a);
        let a = aoi_maf_wfb(q, m, gamma).unwrap();
        let b = aoi_maf_wfb(q, m + 1, gamma).unwrap();
        prop_assert!(b > a);
    }

    #[test]
    fn no_erasure_forms_coincide(m in 1usize..100, gamma in 0.0f64..8.0) {
        let a = aoi_rr_nofb(0.0, m, gamma).unwrap();
        let b = aoi_maf_wfb(0.0, m, gamma).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn optimum_beats_grid_points(q in 0.0f64..0.9, m in 1usize..6, g in 0.0f64..5.0) {
        for fb in Feedback::ALL {
            let opt = optimize_gamma(q, m, fb, &cfg()).unwrap();
            let v = match fb {
                Feedback::NoFeedback => aoi_rr_nofb(q, m, g).unwrap(),
                Feedback::WithFeedback => aoi_maf_wfb(q, m, g).unwrap(),
            };
            prop_assert!(opt.aoi <= v * (1.0 + 1e-12));
        }
    }

    #[test]
    fn area_is_additive_over_partitions(
        a0 in 0.0f64..10.0,
        cuts in prop::collection::vec(0.0f64..1.0, 0..20),
        total in 0.0f64..20.0,
    ) {
        let mut points: Vec<f64> = cuts.iter().map(|c| c * total).collect();
        points.push(0.0);
        points.push(total);
        points.sort_by(f64::total_cmp);
        let pieces: f64 = points
            .windows(2)
            .map(|w| aoi_area_increment(a0 + w[0], w[1] - w[0]).unwrap())
            .sum();
        let whole = aoi_area_increment(a0, total).unwrap();
        prop_assert!((pieces - whole).abs() <= 1e-12 * whole.max(1e-300) + 1e-300);
    }
}
