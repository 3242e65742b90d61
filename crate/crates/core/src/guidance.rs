//! Look-ahead guidance errors.
//!
//! The lateral error `eta_lat` is the angle from the horizontal ground velocity
//! to a look-ahead direction that blends the path tangent with the direction
//! to the closest point. The longitudinal error `eta_lon` is the normalized
//! difference between a vertical-rate setpoint and the current vertical rate.

use crate::model::wrap_pi;
use crate::path::{path_tangent_2d, ClosestPoint, PathSegment, Vec3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Horizontal ground speeds below this value make the course undefined (m/s).
pub const MIN_GROUND_SPEED: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidanceConfig {
    /// Lateral track-error bound time constant (s).
    pub t_b_lat: f64,
    /// Longitudinal track-error bound time constant (s).
    pub t_b_lon: f64,
    /// Maximum climb rate, positive magnitude (m/s).
    pub d_dot_clmb: f64,
    /// Maximum sink rate, positive magnitude (m/s).
    pub d_dot_sink: f64,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            t_b_lat: 1.0,
            t_b_lon: 1.0,
            d_dot_clmb: 3.5,
            d_dot_sink: 1.5,
        }
    }
}

impl GuidanceConfig {
    pub fn validate(&self) -> Result<(), String> {
        let all = [self.t_b_lat, self.t_b_lon, self.d_dot_clmb, self.d_dot_sink];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err("guidance parameters must be positive".into())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum GuidanceError {
    #[error("horizontal ground speed is zero; course undefined")]
    ZeroGroundSpeed,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GuidanceErrors {
    pub eta_lat: f64,
    pub eta_lon: f64,
    pub e_lat: f64,
    pub e_lon: f64,
    /// Unit look-ahead direction (north, east).
    pub l_hat: (f64, f64),
    pub d_dot_sp: f64,
    pub d_dot_p: f64,
    pub delta_d_dot: f64,
    pub e_b_lat: f64,
    pub e_b_lon: f64,
    pub e_prime_lat: f64,
    pub theta_l_lat: f64,
    pub theta_l_lon: f64,
    /// False when `eta_lat` is a held fallback value.
    pub lat_valid: bool,
}

/// Signed lateral distance from the path; positive when the path lies to the
/// left of the aircraft looking along the tangent.
pub fn lateral_track_error(t_bar: (f64, f64), p: &Vec3, r: &Vec3) -> f64 {
    t_bar.0 * (p.y - r.y) - t_bar.1 * (p.x - r.x)
}

/// Track-error bound, smoothly floored for speeds at or below 1 m/s.
pub fn track_error_bound(v: f64, t_b: f64) -> f64 {
    if v > 1.0 {
        v * t_b
    } else {
        0.5 * t_b * (1.0 + v * v)
    }
}

/// Quadratic look-ahead mapping from a normalized error to [0, 1].
pub fn lookahead_mapping(e_prime: f64) -> f64 {
    let e = e_prime.clamp(0.0, 1.0);
    -e * (e - 2.0)
}

/// Blends tangent and error directions and renormalizes.
///
/// `e_vec` is the horizontal vector from the aircraft to the closest point.
/// A degenerate blend falls back to the tangent.
pub fn lateral_lookahead(t_bar: (f64, f64), e_vec: (f64, f64), theta_l: f64) -> (f64, f64) {
    let e_norm = e_vec.0.hypot(e_vec.1);
    let e_bar = if e_norm > 0.0 {
        (e_vec.0 / e_norm, e_vec.1 / e_norm)
    } else {
        (0.0, 0.0)
    };
    let l = (
        (1.0 - theta_l) * t_bar.0 + theta_l * e_bar.0,
        (1.0 - theta_l) * t_bar.1 + theta_l * e_bar.1,
    );
    let n = l.0.hypot(l.1);
    if n < 1e-12 {
        t_bar
    } else {
        (l.0 / n, l.1 / n)
    }
}

/// Angle from the ground velocity to the look-ahead vector, wrapped to (−π, π].
pub fn eta_lat(l_hat: (f64, f64), v_g_lat: (f64, f64)) -> Result<f64, GuidanceError> {
    if v_g_lat.0.hypot(v_g_lat.1) < MIN_GROUND_SPEED {
        return Err(GuidanceError::ZeroGroundSpeed);
    }
    Ok(wrap_pi(l_hat.1.atan2(l_hat.0) - v_g_lat.1.atan2(v_g_lat.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongitudinalSetpoint {
    pub d_dot_sp: f64,
    pub eta_lon: f64,
    pub d_dot_p: f64,
    pub delta_d_dot: f64,
    pub e_b_lon: f64,
    pub theta_l_lon: f64,
}

/// Vertical-rate setpoint and normalized longitudinal error.
///
/// `e_lon = p_d − r_d` (negative when the path is above), `t_pd` is the down
/// component of the unit path tangent. All rates use NED sign (negative climbs).
pub fn longitudinal_setpoint(
    e_lon: f64,
    v_g: &Vec3,
    t_pd: f64,
    cfg: &GuidanceConfig,
) -> LongitudinalSetpoint {
    let d_dot_p = (v_g.norm() * t_pd).clamp(-cfg.d_dot_clmb, cfg.d_dot_sink);
    let delta_d_dot = if e_lon < 0.0 {
        -cfg.d_dot_clmb - d_dot_p
    } else {
        cfg.d_dot_sink - d_dot_p
    };
    let e_b_lon = track_error_bound(delta_d_dot.abs(), cfg.t_b_lon);
    let theta_l_lon = lookahead_mapping((e_lon / e_b_lon).abs());
    let d_dot_sp = delta_d_dot * theta_l_lon + d_dot_p;
    LongitudinalSetpoint {
        d_dot_sp,
        eta_lon: (d_dot_sp - v_g.z) / (cfg.d_dot_clmb + cfg.d_dot_sink),
        d_dot_p,
        delta_d_dot,
        e_b_lon,
        theta_l_lon,
    }
}

/// Approximate steady roll angle for the active segment, faded out with the
/// normalized lateral error.
pub fn roll_feedforward(seg: &PathSegment, v_g_lat_norm: f64, e_prime_lat: f64, g: f64) -> f64 {
    match seg.signed_radius() {
        None => 0.0,
        Some(r_signed) => {
            let fade = 0.5 * (1.0 + (PI * e_prime_lat.clamp(0.0, 1.0)).cos());
            (v_g_lat_norm * v_g_lat_norm / (g * r_signed)).atan() * fade
        }
    }
}

/// Full guidance evaluation at position `r` with ground velocity `v_g`.
///
/// When the horizontal ground speed vanishes `eta_lat` takes `eta_lat_hold`
/// and `lat_valid` is cleared.
pub fn evaluate(
    cp: &ClosestPoint,
    r: &Vec3,
    v_g: &Vec3,
    cfg: &GuidanceConfig,
    eta_lat_hold: f64,
) -> GuidanceErrors {
    let t_bar = path_tangent_2d(cp);
    let e_lat = lateral_track_error(t_bar, &cp.p, r);
    let v_lat = v_g.x.hypot(v_g.y);
    let e_b_lat = track_error_bound(v_lat, cfg.t_b_lat);
    let e_prime_lat = (e_lat.abs() / e_b_lat).clamp(0.0, 1.0);
    let theta_l_lat = lookahead_mapping(e_prime_lat);
    let l_hat = lateral_lookahead(t_bar, (cp.p.x - r.x, cp.p.y - r.y), theta_l_lat);
    let (eta, lat_valid) = match eta_lat(l_hat, (v_g.x, v_g.y)) {
        Ok(v) => (v, true),
        Err(_) => (eta_lat_hold, false),
    };
    let e_lon = cp.p.z - r.z;
    let lon = longitudinal_setpoint(e_lon, v_g, cp.t_hat.z, cfg);
    GuidanceErrors {
        eta_lat: eta,
        eta_lon: lon.eta_lon,
        e_lat,
        e_lon,
        l_hat,
        d_dot_sp: lon.d_dot_sp,
        d_dot_p: lon.d_dot_p,
        delta_d_dot: lon.delta_d_dot,
        e_b_lat,
        e_b_lon: lon.e_b_lon,
        e_prime_lat,
        theta_l_lat,
        theta_l_lon: lon.theta_l_lon,
        lat_valid,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::{closest_point_line, Vec3};

    #[test]
    fn lateral_error_examples() {
        let p = Vec3::new(3.0, 2.0, 0.0);
        assert_eq!(lateral_track_error((1.0, 0.0), &p, &p), 0.0);
        let r = Vec3::new(3.0, 7.0, 0.0);
        assert_eq!(lateral_track_error((1.0, 0.0), &p, &r), -5.0);
    }

    #[test]
    fn error_bound_branches() {
        assert_eq!(track_error_bound(10.0, 1.0), 10.0);
        assert_eq!(track_error_bound(0.0, 1.0), 0.5);
        assert_eq!(track_error_bound(1.0, 1.0), 1.0);
        assert_eq!(track_error_bound(1.0, 2.5), 2.5);
    }

    #[test]
    fn lookahead_mapping_examples() {
        assert_eq!(lookahead_mapping(0.0), 0.0);
        assert_eq!(lookahead_mapping(1.0), 1.0);
        assert_eq!(lookahead_mapping(0.5), 0.75);
        assert_eq!(lookahead_mapping(3.0), 1.0);
        let mut prev = -1.0;
        for i in 0..=100 {
            let v = lookahead_mapping(i as f64 / 100.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn lookahead_blends() {
        let t = (1.0, 0.0);
        assert_eq!(lateral_lookahead(t, (0.0, 4.0), 0.0), t);
        let l = lateral_lookahead(t, (0.0, 4.0), 1.0);
        assert!((l.0).abs() < 1e-15 && (l.1 - 1.0).abs() < 1e-15);
        let l = lateral_lookahead(t, (0.0, 4.0), 0.5);
        let h = 0.5f64.sqrt();
        assert!((l.0 - h).abs() < 1e-15 && (l.1 - h).abs() < 1e-15);
        // anti-parallel blend at one half collapses; falls back to the tangent
        assert_eq!(lateral_lookahead(t, (-2.0, 0.0), 0.5), t);
    }

    #[test]
    fn eta_lat_examples() {
        assert_eq!(eta_lat((1.0, 0.0), (5.0, 0.0)).unwrap(), 0.0);
        let v = eta_lat((1.0, 0.0), (0.0, 3.0)).unwrap();
        assert!((v + PI / 2.0).abs() < 1e-15);
        let a = 170f64.to_radians();
        let b = -170f64.to_radians();
        let v = eta_lat((a.cos(), a.sin()), (b.cos(), b.sin())).unwrap();
        assert!((v + 20f64.to_radians()).abs() < 1e-12);
        assert_eq!(eta_lat((1.0, 0.0), (0.0, 0.0)), Err(GuidanceError::ZeroGroundSpeed));
    }

    #[test]
    fn longitudinal_examples() {
        let cfg = GuidanceConfig::default();
        let on = longitudinal_setpoint(0.0, &Vec3::new(13.5, 0.0, 0.0), 0.0, &cfg);
        assert_eq!(on.eta_lon, 0.0);
        let far_below = longitudinal_setpoint(-100.0, &Vec3::new(13.5, 0.0, 0.0), 0.0, &cfg);
        assert!((far_below.d_dot_sp + cfg.d_dot_clmb).abs() < 1e-12);
        let far_above = longitudinal_setpoint(100.0, &Vec3::new(13.5, 0.0, 0.0), 0.0, &cfg);
        assert!((far_above.d_dot_sp - cfg.d_dot_sink).abs() < 1e-12);
        // setpoint minus rate equal to 5 maps to one
        let v = Vec3::new(13.0, 0.0, -1.5);
        let s = longitudinal_setpoint(100.0, &v, 0.0, &cfg);
        assert!((s.eta_lon - 3.0 / 5.0).abs() < 1e-12);
        let v = Vec3::new(13.0, 0.0, -3.5);
        let s = longitudinal_setpoint(100.0, &v, 0.0, &cfg);
        assert!((s.eta_lon - 1.0).abs() < 1e-12);
    }

    #[test]
    fn steep_path_rate_is_clamped() {
        let cfg = GuidanceConfig::default();
        let s = longitudinal_setpoint(0.0, &Vec3::new(13.5, 0.0, 0.0), -0.9, &cfg);
        assert_eq!(s.d_dot_p, -cfg.d_dot_clmb);
        let s = longitudinal_setpoint(0.0, &Vec3::new(13.5, 0.0, 0.0), 0.9, &cfg);
        assert_eq!(s.d_dot_p, cfg.d_dot_sink);
    }

    #[test]
    fn roll_feedforward_examples() {
        let line = PathSegment::Line {
            b: Vec3::zeros(),
            chi_p: 0.0,
            gamma_p: 0.0,
        };
        assert_eq!(roll_feedforward(&line, 13.5, 0.0, 9.81), 0.0);
        let arc = PathSegment::Arc {
            c: Vec3::zeros(),
            r_signed: 35.0,
            chi_p: 0.0,
            gamma_p: 0.0,
        };
        let phi = roll_feedforward(&arc, 13.5, 0.0, 9.81);
        assert!((phi - (182.25f64 / 343.35).atan()).abs() < 1e-15);
        assert!((phi - 0.488).abs() < 1e-3);
        assert!(roll_feedforward(&arc, 13.5, 1.0, 9.81).abs() < 1e-15);
        let ccw = PathSegment::Loiter {
            c: Vec3::zeros(),
            r_signed: -35.0,
        };
        assert!((roll_feedforward(&ccw, 13.5, 0.0, 9.81) + phi).abs() < 1e-15);
    }

    #[test]
    fn on_path_aligned_is_zero() {
        let cp = closest_point_line(&Vec3::zeros(), 0.7, 0.0, &Vec3::new(-20.0, -17.0, 0.0));
        let r = cp.p;
        let v = cp.t_hat * 13.5;
        let g = evaluate(&cp, &r, &v, &GuidanceConfig::default(), 0.0);
        assert!(g.eta_lat.abs() < 1e-12);
        assert!(g.eta_lon.abs() < 1e-12);
        assert!(g.lat_valid);
    }

    #[test]
    fn hold_value_used_without_ground_speed() {
        let cp = closest_point_line(&Vec3::zeros(), 0.0, 0.0, &Vec3::zeros());
        let g = evaluate(&cp, &Vec3::zeros(), &Vec3::zeros(), &GuidanceConfig::default(), 0.3);
        assert!(!g.lat_valid);
        assert_eq!(g.eta_lat, 0.3);
    }
}
