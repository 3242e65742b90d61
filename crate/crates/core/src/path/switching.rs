use super::segment::{closest_point_arc, terminal_point, terminal_tangent, LegSelection, PathSegment, Vec3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchConfig {
    /// Acceptance radius around the terminal point (m).
    pub r_acpt: f64,
    /// Acceptance angle between ground velocity and exit tangent (rad).
    pub eta_acpt: f64,
    /// Rate of the switching state while switching (1/s).
    pub rho_sw: f64,
    /// Latch threshold on the switching state.
    pub sw_threshold: f64,
}

impl Default for SwitchConfig {
    fn default() -> Self {
        Self {
            r_acpt: 30.0,
            eta_acpt: 15f64.to_radians(),
            rho_sw: 1.0,
            sw_threshold: 0.5,
        }
    }
}

impl SwitchConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.r_acpt > 0.0) {
            return Err("r_acpt must be positive".into());
        }
        if !(self.eta_acpt > 0.0 && self.eta_acpt < std::f64::consts::FRAC_PI_2) {
            return Err("eta_acpt must lie in (0, π/2)".into());
        }
        if !(self.rho_sw > 0.0) || !self.rho_sw.is_finite() {
            return Err("rho_sw must be positive".into());
        }
        if !(self.sw_threshold >= 0.0 && self.sw_threshold < 1.0) {
            return Err("sw_threshold must lie in [0, 1)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SwitchConditions {
    pub proximity: bool,
    pub bearing: bool,
    pub travel: bool,
}

/// Evaluates the terminal conditions of `seg` and reports whether they are met
/// for that segment type.
///
/// Arcs need all three conditions; lines only the travel condition; loiters
/// never terminate. On helices the proximity test also requires the aircraft to
/// be on the final leg, since successive legs can lie closer together than the
/// acceptance radius.
pub fn switching_conditions(
    seg: &PathSegment,
    r: &Vec3,
    v_g: &Vec3,
    cfg: &SwitchConfig,
) -> (SwitchConditions, bool) {
    let (Some(b), Some(t_b)) = (terminal_point(seg), terminal_tangent(seg)) else {
        return (SwitchConditions::default(), false);
    };
    let rel = r - b;
    let mut proximity = rel.norm() < cfg.r_acpt;
    if proximity {
        if let PathSegment::Arc { .. } = seg {
            let cp = closest_point_arc(seg, r, LegSelection::Nearest);
            if let Some(rem) = cp.remaining {
                proximity = rem.abs() < PI;
            }
        }
    }
    let speed = v_g.norm();
    let bearing = speed > 0.0 && v_g.dot(&t_b) / speed > cfg.eta_acpt.cos();
    let travel = rel.dot(&t_b) > 0.0;
    let conds = SwitchConditions {
        proximity,
        bearing,
        travel,
    };
    let met = match seg {
        PathSegment::Line { .. } => travel,
        PathSegment::Arc { .. } => proximity && bearing && travel,
        PathSegment::Loiter { .. } => false,
    };
    (conds, met)
}

/// Position in a path queue: active segment plus the switching state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SwitchState {
    pub current_index: usize,
    pub x_sw: f64,
}

/// Advances the switching state by one step of `dt`.
///
/// The state integrates at `rho_sw` while the terminal conditions hold or once
/// it has passed the latch threshold. Reaching 1 moves to the next segment and
/// resets the state; on the last segment the index is held.
pub fn advance_switch_state(
    state: SwitchState,
    n_segments: usize,
    met: bool,
    dt: f64,
    cfg: &SwitchConfig,
) -> SwitchState {
    let mut next = state;
    if met || state.x_sw > cfg.sw_threshold {
        next.x_sw += cfg.rho_sw * dt;
    }
    if next.x_sw >= 1.0 {
        next.x_sw = 0.0;
        if next.current_index + 1 < n_segments {
            next.current_index += 1;
        }
    }
    next
}

/// Ordered path segments with the live switching state.
#[derive(Debug, Clone, PartialEq)]
pub struct PathQueue {
    segments: Vec<PathSegment>,
    pub state: SwitchState,
}

impl PathQueue {
    pub fn new(segments: Vec<PathSegment>) -> Result<Self, String> {
        if segments.is_empty() {
            return Err("path queue needs at least one segment".into());
        }
        for (i, s) in segments.iter().enumerate() {
            s.validate().map_err(|e| format!("segment {i}: {e}"))?;
        }
        Ok(Self {
            segments,
            state: SwitchState::default(),
        })
    }

    pub fn segments(&self) -> &[PathSegment] {
        &self.segments
    }

    pub fn current_index(&self) -> usize {
        self.state.current_index
    }

    pub fn current(&self) -> &PathSegment {
        &self.segments[self.state.current_index]
    }

    /// Evaluates the switching conditions for the active segment and steps the
    /// switching state. Returns true when the active segment changed.
    pub fn advance(&mut self, r: &Vec3, v_g: &Vec3, dt: f64, cfg: &SwitchConfig) -> bool {
        let (_, met) = switching_conditions(self.current(), r, v_g, cfg);
        let before = self.state.current_index;
        self.state = advance_switch_state(self.state, self.segments.len(), met, dt, cfg);
        self.state.current_index != before
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::CourseBuilder;

    fn line_north() -> PathSegment {
        PathSegment::Line {
            b: Vec3::zeros(),
            chi_p: 0.0,
            gamma_p: 0.0,
        }
    }

    fn arc_north() -> PathSegment {
        PathSegment::Arc {
            c: Vec3::new(0.0, 35.0, 0.0),
            r_signed: 35.0,
            chi_p: 0.0,
            gamma_p: 0.0,
        }
    }

    #[test]
    fn proximity_within_acceptance_radius() {
        let cfg = SwitchConfig::default();
        let (c, _) = switching_conditions(
            &arc_north(),
            &Vec3::new(-10.0, 0.0, 0.0),
            &Vec3::new(13.0, 0.0, 0.0),
            &cfg,
        );
        assert!(c.proximity);
        assert!(c.bearing);
        assert!(!c.travel);
    }

    #[test]
    fn terminal_point_is_not_travelled_past() {
        let cfg = SwitchConfig::default();
        let (c, met) =
            switching_conditions(&line_north(), &Vec3::zeros(), &Vec3::new(1.0, 0.0, 0.0), &cfg);
        assert!(!c.travel);
        assert!(!met);
        let (_, met) = switching_conditions(
            &line_north(),
            &Vec3::new(0.1, 50.0, 0.0),
            &Vec3::new(-1.0, 0.0, 0.0),
            &cfg,
        );
        assert!(met, "lines only need the travel condition");
    }

    #[test]
    fn zero_ground_speed_fails_bearing() {
        let (c, _) = switching_conditions(
            &arc_north(),
            &Vec3::new(1.0, 0.0, 0.0),
            &Vec3::zeros(),
            &SwitchConfig::default(),
        );
        assert!(!c.bearing);
    }

    #[test]
    fn loiter_never_terminates() {
        let seg = PathSegment::Loiter {
            c: Vec3::zeros(),
            r_signed: 30.0,
        };
        let (_, met) = switching_conditions(
            &seg,
            &Vec3::new(0.0, -30.0, 0.0),
            &Vec3::new(1.0, 0.0, 0.0),
            &SwitchConfig::default(),
        );
        assert!(!met);
    }

    #[test]
    fn helix_earlier_leg_inside_radius_does_not_switch() {
        // 3° descending helix: legs are about 11.5 m apart
        let seg = CourseBuilder::new(Vec3::new(0.0, 0.0, -100.0), 0.0)
            .arc(35.0, -3f64.to_radians(), 4.0 * PI)
            .build()[0];
        let b = terminal_point(&seg).unwrap();
        let leg = 2.0 * PI * 35.0 * 3f64.to_radians().tan();
        let cfg = SwitchConfig::default();
        let r = b + Vec3::new(1.0, 0.0, -leg);
        let (c, met) = switching_conditions(&seg, &r, &Vec3::new(13.0, 0.0, 0.0), &cfg);
        assert!(!c.proximity && !met);
        let (_, met) = switching_conditions(&seg, &(b + Vec3::new(1.0, 0.0, 0.0)), &Vec3::new(13.0, 0.0, 0.0), &cfg);
        assert!(met);
    }

    #[test]
    fn switch_state_accumulates_and_latches() {
        let cfg = SwitchConfig::default();
        let mut s = SwitchState::default();
        s = advance_switch_state(s, 3, false, 0.1, &cfg);
        assert_eq!(s, SwitchState::default());
        for _ in 0..4 {
            s = advance_switch_state(s, 3, true, 0.1, &cfg);
        }
        assert!((s.x_sw - 0.4).abs() < 1e-12);
        s = advance_switch_state(s, 3, true, 0.15, &cfg);
        // above threshold: keeps growing without the conditions
        let mut switched_at = None;
        for k in 0..10 {
            s = advance_switch_state(s, 3, false, 0.1, &cfg);
            if s.current_index == 1 && switched_at.is_none() {
                switched_at = Some(k);
            }
        }
        assert_eq!(switched_at, Some(4));
        assert_eq!(s.current_index, 1);
    }

    #[test]
    fn exhausted_queue_holds_last_segment() {
        let cfg = SwitchConfig::default();
        let mut s = SwitchState {
            current_index: 1,
            x_sw: 0.0,
        };
        for _ in 0..100 {
            s = advance_switch_state(s, 2, true, 0.1, &cfg);
            assert_eq!(s.current_index, 1);
        }
    }
}
