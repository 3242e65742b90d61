use super::shooting::ShootingModel;
use super::{alpha_soft, NmpcError, OcpConfig, References, Weights};
use crate::guidance::{self, GuidanceConfig, GuidanceErrors};
use crate::model::{
    angle_of_attack, kinematics, rk4_step, wrap_pi, AircraftState, ControlInput, ModelParams,
    WindVector, ANGLE_STATE_INDICES, CONTROL_DIM, STATE_DIM,
};
use crate::path::{
    advance_switch_state, closest_point, switching_conditions, LegSelection, PathSegment,
    SwitchConfig, SwitchState, Vec3,
};
use nalgebra::DVector;
use std::f64::consts::PI;

pub const Y_DIM: usize = 7;
pub const Z_DIM: usize = 4;
pub const STAGE_DIM: usize = Y_DIM + Z_DIM;

/// Segment assignment of one horizon node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeTag {
    pub segment: usize,
    /// Helix leg anchor: remaining angle to the arc exit.
    pub remaining: Option<f64>,
}

impl NodeTag {
    fn legs(&self) -> LegSelection {
        match self.remaining {
            Some(psi) => LegSelection::Fixed(psi),
            None => LegSelection::Nearest,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outputs {
    pub y: [f64; Y_DIM],
    pub z: [f64; Z_DIM],
    pub guidance: GuidanceErrors,
    pub phi_ff: f64,
}

fn ground_velocity(state: &AircraftState, wind: &WindVector) -> Vec3 {
    let k = kinematics(state, wind);
    Vec3::new(k[0], k[1], k[2])
}

/// Objective outputs `y` and `z` for one node.
#[allow(clippy::too_many_arguments)]
pub fn build_outputs(
    state: &AircraftState,
    control: &ControlInput,
    seg: &PathSegment,
    legs: LegSelection,
    wind: &WindVector,
    params: &ModelParams,
    guidance_cfg: &GuidanceConfig,
    ocp: &OcpConfig,
) -> Outputs {
    let r = Vec3::new(state.n, state.e, state.d);
    let v_g = ground_velocity(state, wind);
    let cp = closest_point(seg, &r, legs);
    let g = guidance::evaluate(&cp, &r, &v_g, guidance_cfg, 0.0);
    let phi_ff = guidance::roll_feedforward(
        seg,
        v_g.x.hypot(v_g.y),
        g.e_prime_lat,
        params.constants.g,
    );
    let alpha = angle_of_attack(state);
    Outputs {
        y: [
            g.eta_lat,
            g.eta_lon,
            state.v_a,
            state.p,
            state.q,
            state.r,
            alpha_soft(alpha, ocp),
        ],
        z: [
            (control.u_t - state.delta_t) / params.open_loop.tau_t,
            control.u_t,
            control.phi_ref - phi_ff,
            control.theta_ref,
        ],
        guidance: g,
        phi_ff,
    }
}

/// The path-following optimal control problem for one controller step.
#[derive(Debug, Clone)]
pub struct AircraftOcp<'a> {
    pub params: ModelParams,
    pub wind: WindVector,
    pub segments: &'a [PathSegment],
    pub switch_start: SwitchState,
    /// Helix leg of the first node in the previous solve. Bounds the leg of
    /// the first node so that an aircraft that fell behind (for instance by
    /// sinking) never adopts a leg it has already flown.
    pub leg_anchor: Option<NodeTag>,
    pub switch_cfg: SwitchConfig,
    pub guidance: GuidanceConfig,
    pub ocp: OcpConfig,
    pub weights: Weights,
    pub refs: References,
}

impl AircraftOcp<'_> {
    fn outputs(&self, x: &[f64], u: &[f64], tag: &NodeTag) -> Outputs {
        build_outputs(
            &AircraftState::from_array(x),
            &ControlInput::from_array(u),
            &self.segments[tag.segment],
            tag.legs(),
            &self.wind,
            &self.params,
            &self.guidance,
            &self.ocp,
        )
    }

    fn y_ref(&self) -> [f64; Y_DIM] {
        [0.0, 0.0, self.refs.v_a, 0.0, 0.0, 0.0, 0.0]
    }

    fn z_ref(&self) -> [f64; Z_DIM] {
        [0.0, self.refs.u_t_trim, 0.0, self.refs.theta_trim]
    }

    /// Guidance errors at node state `x` on the tagged segment.
    pub fn guidance_at(&self, x: &[f64], tag: &NodeTag) -> GuidanceErrors {
        self.outputs(x, &[0.0; CONTROL_DIM], tag).guidance
    }
}

impl ShootingModel for AircraftOcp<'_> {
    type Tag = NodeTag;

    fn nx(&self) -> usize {
        STATE_DIM
    }
    fn nu(&self) -> usize {
        CONTROL_DIM
    }
    fn ne(&self) -> usize {
        STAGE_DIM
    }
    fn ne_end(&self) -> usize {
        Y_DIM
    }

    fn step(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, NmpcError> {
        let next = rk4_step(
            &AircraftState::from_array(x),
            &ControlInput::from_array(u),
            &self.wind,
            &self.params,
            self.ocp.t_step,
        )?;
        Ok(next.to_array().to_vec())
    }

    fn tag_nodes(&self, xs: &[DVector<f64>]) -> Vec<NodeTag> {
        let mut sw = self.switch_start;
        let mut tags: Vec<NodeTag> = Vec::with_capacity(xs.len());
        for x in xs {
            let state = AircraftState::from_array(x.as_slice());
            let seg = &self.segments[sw.current_index];
            let r = Vec3::new(state.n, state.e, state.d);
            let legs = match tags.last() {
                Some(prev) if prev.segment == sw.current_index => match prev.remaining {
                    Some(psi) => LegSelection::AtMost(psi + PI),
                    None => LegSelection::Nearest,
                },
                Some(_) => LegSelection::Nearest,
                None => match self.leg_anchor {
                    Some(NodeTag {
                        segment,
                        remaining: Some(psi),
                    }) if segment == sw.current_index => LegSelection::AtMost(psi + PI),
                    _ => LegSelection::Nearest,
                },
            };
            let cp = closest_point(seg, &r, legs);
            tags.push(NodeTag {
                segment: sw.current_index,
                remaining: cp.remaining,
            });
            let v_g = ground_velocity(&state, &self.wind);
            let (_, met) = switching_conditions(seg, &r, &v_g, &self.switch_cfg);
            sw = advance_switch_state(sw, self.segments.len(), met, self.ocp.t_step, &self.switch_cfg);
        }
        tags
    }

    fn stage_error(&self, x: &[f64], u: &[f64], tag: &NodeTag) -> Vec<f64> {
        let o = self.outputs(x, u, tag);
        let (yr, zr) = (self.y_ref(), self.z_ref());
        let mut e = Vec::with_capacity(STAGE_DIM);
        e.extend((0..Y_DIM).map(|i| o.y[i] - yr[i]));
        e.extend((0..Z_DIM).map(|i| o.z[i] - zr[i]));
        e
    }

    fn terminal_error(&self, x: &[f64], tag: &NodeTag) -> Vec<f64> {
        let o = self.outputs(x, &[0.0; CONTROL_DIM], tag);
        let yr = self.y_ref();
        (0..Y_DIM).map(|i| o.y[i] - yr[i]).collect()
    }

    fn stage_scale(&self) -> Vec<f64> {
        let w = &self.weights;
        (0..Y_DIM)
            .map(|i| w.q_y[i].sqrt() / w.range_y[i])
            .chain((0..Z_DIM).map(|i| w.r_z[i].sqrt() / w.range_z[i]))
            .collect()
    }

    fn terminal_scale(&self) -> Vec<f64> {
        let w = &self.weights;
        (0..Y_DIM).map(|i| w.p_end[i].sqrt() / w.range_y[i]).collect()
    }

    fn control_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let (lo, hi) = self.ocp.control_bounds();
        (lo.to_vec(), hi.to_vec())
    }

    fn state_diff(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        for i in ANGLE_STATE_INDICES {
            d[i] = wrap_pi(d[i]);
        }
        d
    }

    fn state_add(&self, x: &[f64], dx: &[f64]) -> Vec<f64> {
        let mut s: Vec<f64> = x.iter().zip(dx).map(|(a, b)| a + b).collect();
        for i in ANGLE_STATE_INDICES {
            s[i] = wrap_pi(s[i]);
        }
        s
    }

    fn error_diff(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        d[0] = wrap_pi(d[0]);
        d
    }
}
