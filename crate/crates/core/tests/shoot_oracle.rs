//! Shooting oracle and Filippov simulator.

use approx::{assert_abs_diff_eq, assert_relative_eq};
use proptest::prelude::*;
use sigma_mono_core::cases::{CaseParams, CaseStudy};
use sigma_mono_core::series::half_odes;
use sigma_mono_core::shoot::{shoot_half, EPS_EVENT};
use sigma_mono_core::*;

fn params(a: f64, b: f64, c: f64, d: f64) -> CaseParams {
    CaseParams { a, b, c, d }
}

#[test]
fn integrate_to_section_examples() {
    let fold = PlanarField::new(BiPoly::constant(1.0), BiPoly::x());
    let r = integrate_to_section(&fold.negated(), [0.5, 0.0], 1e-12, 100.0).unwrap();
    assert_abs_diff_eq!(r.landing_x, -0.5, epsilon = 1e-10);

    let cusp = CaseStudy::CuspFold2.system(&params(1.0, 0.0, 1.0, 1.0)).upper;
    let r = integrate_to_section(&cusp, [0.01, 0.0], 1e-12, 1e6).unwrap();
    assert_abs_diff_eq!(r.landing_x, -0.01, epsilon = 1e-9);
    assert!(r.flight_time > 0.0 && r.steps > 0);
    assert!(r.event_refinement_error < EPS_EVENT);
}

#[test]
fn start_inside_half_plane() {
    let rot = PlanarField::new(BiPoly::from_terms([(0, 1, -1.0)]), BiPoly::x());
    let r = integrate_to_section(&rot, [0.0, 0.4], 1e-12, 100.0).unwrap();
    assert_abs_diff_eq!(r.landing_x, -0.4, epsilon = 1e-10);
    assert_abs_diff_eq!(r.flight_time, std::f64::consts::FRAC_PI_2, epsilon = 1e-9);
}

#[test]
fn numeric_half_map_examples() {
    let w = CaseStudy::CuspFold2.system(&CaseParams::default());
    for x0 in [1e-3, 0.1, 0.5] {
        assert_abs_diff_eq!(numeric_half_map(&w, x0, Side::Lower, 1e-12).unwrap(), -x0, epsilon = 1e-10);
    }
    let w = CaseStudy::ElementaryDegenerate.system(&params(1.0, 1.0, 0.0, 1.0));
    let x0 = 1e-3;
    assert_relative_eq!(
        numeric_half_map(&w, x0, Side::Upper, 1e-12).unwrap(),
        -std::f64::consts::PI.exp() * x0,
        max_relative = 1e-6
    );
    let w = CaseStudy::Fold2Fold4.system(&params(1.0, -1.0, 1.0, 1.0));
    assert_relative_eq!(numeric_half_map(&w, x0, Side::Upper, 1e-12).unwrap(), -x0, max_relative = 1e-6);
}

#[test]
fn numeric_displacement_examples() {
    let w = CaseStudy::Fold2Fold4.system(&CaseParams::default());
    let num = numeric_displacement(&w, 1e-3, 1e-12).unwrap();
    assert_relative_eq!(num, 4.0 / 3.0 * 1e-6, max_relative = 1e-2);

    // b < 0: stable, so negative in the radial convention
    let w = CaseStudy::CuspFold2.system(&params(1.0, -0.1, 1.0, 1.0));
    let d1 = numeric_displacement(&w, 1e-2, 1e-12).unwrap();
    let d3 = numeric_displacement(&w, 3e-2, 1e-12).unwrap();
    assert!(d1 < 0.0 && d3 < 0.0);
    let ratio = d3 / d1;
    assert!((ratio / 3f64.powf(4.0 / 3.0) - 1.0).abs() < 0.1, "ratio {ratio}");

    let w = CaseStudy::CuspDegenerate.system(&params(1.0, 0.0, 1.0, 1.0));
    assert!(numeric_displacement(&w, 1e-2, 1e-12).unwrap().abs() < 1e-9);
}

#[test]
fn oracle_matches_half_series() {
    for case in CaseStudy::ALL {
        let w = case.system(&CaseParams::default());
        let r = analyze(&w, &AnalysisOptions::default()).unwrap();
        let x0 = 1e-3;
        for (side, series) in [(Side::Upper, &r.upper_series), (Side::Lower, &r.lower_series)] {
            let num = numeric_half_map(&w, x0, side, 1e-12).unwrap();
            let err = (num - series.eval(x0)).abs() / x0;
            assert!(err < 1e-4, "{case} {side:?}: {err:e}");
        }
    }
}

#[test]
fn time_reversal_round_trip() {
    for case in CaseStudy::ALL {
        let w = case.system(&CaseParams::default());
        let x0 = 1e-2;
        let x1 = numeric_half_map(&w, x0, Side::Lower, 1e-12).unwrap();
        let back = integrate_to_section(&w.lower, [x1, 0.0], 1e-12, 1e9).unwrap();
        assert_abs_diff_eq!(back.landing_x, x0, epsilon = 1e-9);
    }
}

#[test]
fn half_odes_and_shots_share_orientation() {
    // the series and the shots must describe the same map
    let w = CaseStudy::Fold2Fold4.system(&CaseParams::default());
    let (up, lo) = half_odes(&w, CaseStudy::Fold2Fold4.expected_weights());
    assert!(!up.time_reversed && lo.time_reversed);
    assert!(shoot_half(&w, 1e-2, Side::Lower, 1e-12).unwrap().flight_time > 0.0);
}

#[test]
fn errors() {
    let w = CaseStudy::Fold2Fold4.system(&CaseParams::default());
    assert!(matches!(numeric_half_map(&w, 1e-7, Side::Upper, 1e-12), Err(Error::BelowCutoff { .. })));
    assert!(matches!(numeric_half_map(&w, -1e-2, Side::Upper, 1e-12), Err(Error::NotInward { .. })));
    let curved =
        PiecewiseField::with_switch(w.upper.clone(), w.lower.clone(), BiPoly::from_terms([(0, 1, 1.0), (2, 0, 1.0)]));
    assert!(matches!(numeric_half_map(&curved, 1e-2, Side::Upper, 1e-12), Err(Error::SwitchNotAxis)));
}

#[test]
fn simulate_unstable_spiral() {
    let w = CaseStudy::Fold2Fold4.system(&CaseParams::default());
    let tr = simulate(&w, [0.05, 0.0], 10.0, 1e-12).unwrap();
    let c = tr.positive_crossings();
    assert!(c.len() >= 3);
    assert!(c.windows(2).all(|p| p[1] > p[0]));
    assert!(c[0] > 0.05);
    let segs: Vec<Segment> = tr.samples.iter().map(|s| s.segment).collect();
    assert!(segs.contains(&Segment::Upper) && segs.contains(&Segment::Lower));
    assert!(!segs.contains(&Segment::Sliding));
}

#[test]
fn simulate_center_closes() {
    let w = CaseStudy::CuspDegenerate.system(&params(1.0, 0.0, 1.0, 1.0));
    let tr = simulate(&w, [0.05, 0.0], 200.0, 1e-12).unwrap();
    let c = tr.positive_crossings();
    assert!(c.len() >= 2);
    assert_abs_diff_eq!(c[0], c[1], epsilon = 1e-7);
    assert_abs_diff_eq!(c[0], 0.05, epsilon = 1e-7);
}

#[test]
fn simulate_sliding_line() {
    let w = PiecewiseField::new(
        PlanarField::new(BiPoly::constant(1.0), BiPoly::constant(-1.0)),
        PlanarField::new(BiPoly::constant(1.0), BiPoly::constant(1.0)),
    );
    let tr = simulate(&w, [0.0, 0.0], 1.5, 1e-10).unwrap();
    assert_eq!(tr.events[0].kind, EventKind::SlideEntry);
    for pair in tr.samples.windows(2) {
        let dt = pair[1].t - pair[0].t;
        if dt > 0.0 {
            assert_abs_diff_eq!((pair[1].x - pair[0].x) / dt, 1.0, epsilon = 1e-9);
        }
        assert!(pair[1].y.abs() < EPS_EVENT);
    }
}

#[test]
fn simulate_sliding_on_curved_switch() {
    // Σ = {y = x^2/2}; upper pushes into Σ, lower pushes out of the lower side
    let w = PiecewiseField::with_switch(
        PlanarField::new(BiPoly::constant(1.0), BiPoly::constant(-1.0)),
        PlanarField::new(BiPoly::constant(0.5), BiPoly::constant(1.0)),
        BiPoly::from_terms([(0, 1, 1.0), (2, 0, -0.5)]),
    );
    let tr = simulate(&w, [0.0, 0.0], 0.5, 1e-10).unwrap();
    let f = &w.switch;
    let (gx, gy) = (f.dx(), f.dy());
    assert!(tr.samples.iter().filter(|s| s.segment == Segment::Sliding).count() > 5);
    for s in tr.samples.iter().filter(|s| s.segment == Segment::Sliding) {
        assert!(f.eval(s.x, s.y).abs() < 1e-10);
        let v = sliding_field(&w, [s.x, s.y]);
        if let Ok(v) = v {
            assert!((gx.eval(s.x, s.y) * v.vx + gy.eval(s.x, s.y) * v.vy).abs() < 1e-9);
        }
    }
}

#[test]
fn simulate_zero_span_and_export() {
    let w = CaseStudy::Fold2Fold4.system(&CaseParams::default());
    let tr = simulate(&w, [0.02, 0.0], 0.0, 1e-12).unwrap();
    assert_eq!(tr.samples.len(), 1);
    let mut buf = Vec::new();
    tr.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("t,x,y,segment\n"));
    assert_eq!(tr.events_json().unwrap(), "[]");
}

#[test]
fn simulate_stops_at_sigma_singular_point() {
    let w = CaseStudy::Fold2Fold4.system(&CaseParams::default());
    let tr = simulate(&w, [0.0, 0.0], 1.0, 1e-12).unwrap();
    assert_eq!(tr.terminated, Termination::SigmaSingular);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn landing_residual_is_small(x0 in 1e-3f64..0.5, b in -1.0f64..1.0) {
        let w = CaseStudy::CuspFold2.system(&params(1.0, b, 1.0, 1.0));
        let r = shoot_half(&w, x0, Side::Upper, 1e-12).unwrap();
        prop_assert!(r.event_refinement_error < EPS_EVENT);
        prop_assert!(r.landing_x < 0.0);
    }

    #[test]
    fn energy_conserved_on_hamiltonian_upper(x0 in 1e-3f64..0.5, a in -2.0f64..2.0) {
        let w = CaseStudy::Fold2Fold4.system(&params(a, -a, 0.0, 1.0));
        let h = hamiltonian_certificate(&w.upper).unwrap();
        let r = shoot_half(&w, x0, Side::Upper, 1e-12).unwrap();
        let h0 = h.eval(x0, 0.0);
        prop_assert!((h.eval(r.landing_x, 0.0) - h0).abs() < 1e-10 * (1.0 + h0.abs()));
    }

    #[test]
    fn reversible_fields_map_to_minus_x0(x0 in 1e-3f64..0.3, k in 0.2f64..3.0) {
        // P even and Q odd in x
        let x = PlanarField::new(
            BiPoly::from_terms([(0, 0, -1.0), (2, 1, k)]),
            BiPoly::from_terms([(1, 0, 1.0), (1, 2, k)]),
        );
        prop_assert!(reversibility_check(&x));
        let r = integrate_to_section(&x, [x0, 0.0], 1e-12, 1e6).unwrap();
        prop_assert!((r.landing_x + x0).abs() < 1e-10);
    }
}
