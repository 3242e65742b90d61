use fwnmpc::guidance::{
    evaluate, lateral_lookahead, longitudinal_setpoint, roll_feedforward, track_error_bound,
    GuidanceConfig,
};
use fwnmpc::path::{closest_point, LegSelection, PathSegment, Vec3};
use proptest::prelude::*;
use std::f64::consts::PI;

#[test]
fn half_blend_of_perpendicular_directions_is_diagonal() {
    let l = lateral_lookahead((1.0, 0.0), (0.0, 7.0), 0.5);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    assert!((l.0 - s).abs() < 1e-15 && (l.1 - s).abs() < 1e-15);
}

#[test]
fn loiter_feedforward_at_cruise_speed() {
    let seg = PathSegment::Loiter {
        c: Vec3::zeros(),
        r_signed: 35.0,
    };
    let phi = roll_feedforward(&seg, 13.5, 0.0, 9.81);
    assert!((phi - (182.25f64 / 343.35).atan()).abs() < 1e-15);
    assert!((phi.to_degrees() - 27.96).abs() < 0.01);
    let ccw = PathSegment::Loiter {
        c: Vec3::zeros(),
        r_signed: -35.0,
    };
    assert_eq!(roll_feedforward(&ccw, 13.5, 0.0, 9.81), -phi);
}

#[test]
fn error_bound_branches_meet_with_equal_slope() {
    for t_b in [0.5, 1.0, 3.0] {
        let h = 1e-7;
        assert_eq!(track_error_bound(1.0, t_b), t_b);
        let left = (track_error_bound(1.0, t_b) - track_error_bound(1.0 - h, t_b)) / h;
        let right = (track_error_bound(1.0 + h, t_b) - track_error_bound(1.0, t_b)) / h;
        assert!((left - t_b).abs() < 1e-6 && (right - t_b).abs() < 1e-6);
    }
}

fn rotate(v: Vec3, a: f64) -> Vec3 {
    let (s, c) = a.sin_cos();
    Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

proptest! {
    #[test]
    fn on_path_and_aligned_means_zero_heading_error(
        chi in -PI..PI,
        gamma in -0.2..0.2f64,
        s in -100.0..100.0f64,
        speed in 5.0..20.0f64,
    ) {
        let b = Vec3::new(10.0, 20.0, -50.0);
        let seg = PathSegment::Line { b, chi_p: chi, gamma_p: gamma };
        let t = Vec3::new(gamma.cos() * chi.cos(), gamma.cos() * chi.sin(), -gamma.sin());
        let r = b + t * s;
        let cp = closest_point(&seg, &r, LegSelection::Nearest);
        let g = evaluate(&cp, &r, &(t * speed), &GuidanceConfig::default(), 0.0);
        prop_assert!(g.eta_lat.abs() < 1e-12);
        prop_assert!(g.e_lat.abs() < 1e-9);
    }

    #[test]
    fn far_off_track_points_straight_at_path(
        chi in -PI..PI,
        offset in prop_oneof![-200.0..-16.0f64, 16.0..200.0f64],
        heading in -PI..PI,
    ) {
        let seg = PathSegment::Line { b: Vec3::zeros(), chi_p: chi, gamma_p: 0.0 };
        let normal = Vec3::new(-chi.sin(), chi.cos(), 0.0);
        let r = normal * offset;
        let v = Vec3::new(15.0 * heading.cos(), 15.0 * heading.sin(), 0.0);
        let cp = closest_point(&seg, &r, LegSelection::Nearest);
        let g = evaluate(&cp, &r, &v, &GuidanceConfig::default(), 0.0);
        prop_assert!(g.e_lat.abs() >= g.e_b_lat);
        let e_bar = (cp.p - r) / (cp.p - r).norm();
        prop_assert!((g.l_hat.0 * e_bar.x + g.l_hat.1 * e_bar.y - 1.0).abs() < 1e-9);
    }

    #[test]
    fn eta_lon_normalized_within_rate_envelope(
        e_lon in -50.0..50.0f64,
        climb in -3.5..1.5f64,
        t_pd in -0.2..0.2f64,
        course in -PI..PI,
    ) {
        let cfg = GuidanceConfig::default();
        let speed = 13.0;
        let horiz = (speed * speed - climb * climb).sqrt();
        let v = Vec3::new(horiz * course.cos(), horiz * course.sin(), climb);
        let lon = longitudinal_setpoint(e_lon, &v, t_pd, &cfg);
        prop_assert!(lon.d_dot_sp >= -cfg.d_dot_clmb - 1e-12 && lon.d_dot_sp <= cfg.d_dot_sink + 1e-12);
        prop_assert!(lon.eta_lon.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn feedforward_continuous_and_vanishing(r in prop_oneof![-150.0..-20.0f64, 20.0..150.0f64], v in 5.0..20.0f64) {
        let seg = PathSegment::Loiter { c: Vec3::zeros(), r_signed: r };
        prop_assert!(roll_feedforward(&seg, v, 1.0, 9.81).abs() < 1e-15);
        let mut prev = roll_feedforward(&seg, v, 0.0, 9.81);
        for i in 1..=1000 {
            let cur = roll_feedforward(&seg, v, i as f64 / 1000.0, 9.81);
            prop_assert!((cur - prev).abs() < 0.01);
            prev = cur;
        }
    }

    #[test]
    fn errors_invariant_under_frame_rotation(
        angle in -PI..PI,
        chi in -PI..PI,
        r in (-80.0..80.0f64, -80.0..80.0f64, -70.0..-30.0f64),
        heading in -PI..PI,
        arc in any::<bool>(),
    ) {
        let cfg = GuidanceConfig::default();
        let r = Vec3::new(r.0, r.1, r.2);
        let v = Vec3::new(14.0 * heading.cos(), 14.0 * heading.sin(), -0.5);
        let make = |a: f64| if arc {
            PathSegment::Arc { c: rotate(Vec3::new(5.0, -3.0, -50.0), a), r_signed: 40.0, chi_p: chi + a, gamma_p: 0.05 }
        } else {
            PathSegment::Line { b: rotate(Vec3::new(5.0, -3.0, -50.0), a), chi_p: chi + a, gamma_p: 0.05 }
        };
        let g0 = {
            let seg = make(0.0);
            evaluate(&closest_point(&seg, &r, LegSelection::Nearest), &r, &v, &cfg, 0.0)
        };
        let g1 = {
            let seg = make(angle);
            let rr = rotate(r, angle);
            evaluate(&closest_point(&seg, &rr, LegSelection::Nearest), &rr, &rotate(v, angle), &cfg, 0.0)
        };
        prop_assert!((g0.e_lat - g1.e_lat).abs() < 1e-9);
        prop_assert!((g0.theta_l_lat - g1.theta_l_lat).abs() < 1e-9);
        let d = (g0.eta_lat - g1.eta_lat).rem_euclid(2.0 * PI);
        prop_assert!(d.min(2.0 * PI - d) < 1e-9);
        prop_assert!((g0.eta_lon - g1.eta_lon).abs() < 1e-9);
    }
}
