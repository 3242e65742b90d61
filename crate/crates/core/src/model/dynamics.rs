use super::{
    AircraftState, ClosedLoopParams, ControlInput, ModelError, ModelParams, OpenLoopParams,
    PhysicalConstants, WindVector, EPS_COS_GAMMA, EPS_PROP,
};

/// Approximate angle of attack, α ≈ θ − γ (sideslip neglected).
pub fn angle_of_attack(state: &AircraftState) -> f64 {
    state.theta - state.gamma
}

/// Closed-loop attitude dynamics: returns d/dt of `[φ, θ, p, q, r]`.
///
/// The whole q̇ row, including the pitch-reference error gain, scales with v_A².
pub fn attitude_dynamics(
    state: &AircraftState,
    input: &ControlInput,
    params: &ClosedLoopParams,
) -> Result<[f64; 5], ModelError> {
    state.check_finite()?;
    if !input.is_finite() {
        return Err(ModelError::NonFiniteInput);
    }
    if state.v_a <= 0.0 {
        return Err(ModelError::NonPositiveAirspeed(state.v_a));
    }
    let AircraftState {
        phi, theta, p, q, r, v_a, ..
    } = *state;
    let alpha = angle_of_attack(state);
    let (sin_phi, cos_phi) = phi.sin_cos();
    Ok([
        p,
        q * cos_phi - r * sin_phi,
        params.l_p * p + params.l_r * r + params.l_ephi * (input.phi_ref - phi),
        v_a * v_a
            * (params.m_0
                + params.m_alpha * alpha
                + params.m_q * q
                + params.m_etheta * (input.theta_ref - theta)),
        params.n_r * r + params.n_phi * phi + params.n_phiref * input.phi_ref,
    ])
}

/// Thrust, drag and lift magnitudes (N).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Forces {
    pub thrust: f64,
    pub drag: f64,
    pub lift: f64,
    /// The propeller free-stream divisor was clamped to [`EPS_PROP`].
    pub prop_clamped: bool,
}

pub fn forces(
    state: &AircraftState,
    params: &OpenLoopParams,
    consts: &PhysicalConstants,
) -> Forces {
    let alpha = angle_of_attack(state);
    let v_prop = state.v_a * alpha.cos();
    let (v_prop, prop_clamped) = if v_prop > EPS_PROP {
        (v_prop, false)
    } else {
        (EPS_PROP, true)
    };
    let qs = consts.qbar_s(state.v_a);
    Forces {
        thrust: params.power(state.delta_t) / v_prop,
        drag: qs * params.drag_coefficient(alpha),
        lift: qs * params.lift_coefficient(alpha),
        prop_clamped,
    }
}

/// Open-loop velocity-axis dynamics: returns d/dt of `[v_A, γ, ξ, δ_T]`.
pub fn velocity_dynamics(
    state: &AircraftState,
    input: &ControlInput,
    params: &OpenLoopParams,
    consts: &PhysicalConstants,
) -> Result<[f64; 4], ModelError> {
    if state.v_a <= 0.0 {
        return Err(ModelError::NonPositiveAirspeed(state.v_a));
    }
    let cos_gamma = state.gamma.cos();
    if cos_gamma.abs() < EPS_COS_GAMMA {
        return Err(ModelError::VerticalFlight(cos_gamma.abs()));
    }
    let f = forces(state, params, consts);
    let alpha = angle_of_attack(state);
    let (sin_a, cos_a) = alpha.sin_cos();
    let (sin_phi, cos_phi) = state.phi.sin_cos();
    let m = consts.m;
    let normal = f.thrust * sin_a + f.lift;
    Ok([
        (f.thrust * cos_a - f.drag) / m - consts.g * state.gamma.sin(),
        (normal * cos_phi - m * consts.g * cos_gamma) / (m * state.v_a),
        sin_phi / (m * state.v_a * cos_gamma) * normal,
        (input.u_t - state.delta_t) / params.tau_t,
    ])
}

/// 3DOF kinematics in wind: returns d/dt of `[n, e, d]`.
pub fn kinematics(state: &AircraftState, wind: &WindVector) -> [f64; 3] {
    let (sin_g, cos_g) = state.gamma.sin_cos();
    let (sin_x, cos_x) = state.xi.sin_cos();
    [
        state.v_a * cos_g * cos_x + wind.w_n,
        state.v_a * cos_g * sin_x + wind.w_e,
        -state.v_a * sin_g + wind.w_d,
    ]
}

/// Body x and z accelerations `(a_x, a_z)` (m/s²).
///
/// The rotation matrix is `[[cos α, sin α], [sin α, −cos α]]`, taken as-is; note
/// its second row is a reflection rather than a proper rotation.
pub fn body_accelerations(
    state: &AircraftState,
    params: &OpenLoopParams,
    consts: &PhysicalConstants,
) -> (f64, f64) {
    let f = forces(state, params, consts);
    let alpha = angle_of_attack(state);
    let (sin_a, cos_a) = alpha.sin_cos();
    let fx = (f.thrust * cos_a - f.drag) / consts.m;
    let fz = (f.thrust * sin_a + f.lift) / consts.m;
    (cos_a * fx + sin_a * fz, sin_a * fx - cos_a * fz)
}

/// Time derivative of the full state, same layout as [`AircraftState`].
pub type StateDerivative = AircraftState;

pub fn full_derivative(
    state: &AircraftState,
    input: &ControlInput,
    wind: &WindVector,
    params: &ModelParams,
) -> Result<StateDerivative, ModelError> {
    let att = attitude_dynamics(state, input, &params.closed_loop)?;
    let vel = velocity_dynamics(state, input, &params.open_loop, &params.constants)?;
    let pos = kinematics(state, wind);
    Ok(AircraftState {
        n: pos[0],
        e: pos[1],
        d: pos[2],
        v_a: vel[0],
        gamma: vel[1],
        xi: vel[2],
        phi: att[0],
        theta: att[1],
        p: att[2],
        q: att[3],
        r: att[4],
        delta_t: vel[3],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::level_trim;

    fn state() -> AircraftState {
        AircraftState {
            v_a: 13.5,
            delta_t: 0.5,
            ..Default::default()
        }
    }

    #[test]
    fn angle_of_attack_examples() {
        let mut s = state();
        s.theta = 0.1;
        s.gamma = 0.02;
        assert!((angle_of_attack(&s) - 0.08).abs() < 1e-15);
        s.theta = 0.0;
        s.gamma = 0.0;
        assert_eq!(angle_of_attack(&s), 0.0);
        s.theta = -0.05;
        s.gamma = 0.05;
        assert!((angle_of_attack(&s) + 0.10).abs() < 1e-15);
    }

    #[test]
    fn attitude_kinematic_rows() {
        let cl = ModelParams::default().closed_loop;
        let mut s = state();
        s.p = 0.2;
        let d = attitude_dynamics(&s, &ControlInput::default(), &cl).unwrap();
        assert_eq!(d[0], 0.2);
        let mut s = state();
        s.q = 0.1;
        s.r = 0.3;
        let d = attitude_dynamics(&s, &ControlInput::default(), &cl).unwrap();
        assert_eq!(d[1], 0.1);
    }

    #[test]
    fn attitude_rejects_non_finite() {
        let cl = ModelParams::default().closed_loop;
        let mut s = state();
        s.q = f64::NAN;
        assert!(attitude_dynamics(&s, &ControlInput::default(), &cl).is_err());
    }

    #[test]
    fn attitude_is_affine_in_references() {
        let cl = ModelParams::default().closed_loop;
        let mut s = state();
        s.phi = 0.2;
        s.theta = 0.05;
        s.p = -0.1;
        s.q = 0.04;
        s.r = 0.1;
        let u0 = ControlInput::new(0.5, 0.0, 0.0);
        let ua = ControlInput::new(0.5, 0.3, -0.1);
        let ub = ControlInput::new(0.5, -0.2, 0.2);
        let uab = ControlInput::new(0.5, 0.1, 0.1);
        let f = |u: &ControlInput| attitude_dynamics(&s, u, &cl).unwrap();
        let (f0, fa, fb, fab) = (f(&u0), f(&ua), f(&ub), f(&uab));
        for i in 0..5 {
            let lhs = fab[i] - f0[i];
            let rhs = (fa[i] - f0[i]) + (fb[i] - f0[i]);
            assert!((lhs - rhs).abs() < 1e-12, "row {i}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn zero_throttle_zero_thrust() {
        let p = ModelParams::default();
        let mut s = state();
        s.delta_t = 0.0;
        assert_eq!(forces(&s, &p.open_loop, &p.constants).thrust, 0.0);
    }

    #[test]
    fn drag_at_zero_alpha_is_constant_term() {
        let p = ModelParams::default();
        let s = state();
        let f = forces(&s, &p.open_loop, &p.constants);
        let expect = 0.5 * 1.225 * 13.5 * 13.5 * 0.47 * p.open_loop.c_d0;
        assert!((f.drag - expect).abs() < 1e-12);
    }

    #[test]
    fn lift_and_drag_scale_with_airspeed_squared() {
        let p = ModelParams::default();
        let mut s = state();
        s.theta = 0.04;
        let f1 = forces(&s, &p.open_loop, &p.constants);
        s.v_a *= 1.7;
        let f2 = forces(&s, &p.open_loop, &p.constants);
        assert!((f2.lift / f1.lift - 1.7 * 1.7).abs() < 1e-12);
        assert!((f2.drag / f1.drag - 1.7 * 1.7).abs() < 1e-12);
    }

    #[test]
    fn propeller_guard_clamps() {
        let p = ModelParams::default();
        let mut s = state();
        s.v_a = 0.5;
        let f = forces(&s, &p.open_loop, &p.constants);
        assert!(f.prop_clamped);
        assert!((f.thrust - p.open_loop.power(0.5) / EPS_PROP).abs() < 1e-12);
    }

    #[test]
    fn velocity_dynamics_examples() {
        let p = ModelParams::default();
        let s = state();
        let d = velocity_dynamics(&s, &ControlInput::new(0.5, 0.0, 0.0), &p.open_loop, &p.constants)
            .unwrap();
        assert_eq!(d[3], 0.0);
        assert_eq!(d[2], 0.0);

        let (trim_state, trim_u) = level_trim(&p, 13.5).unwrap();
        let d = velocity_dynamics(&trim_state, &trim_u, &p.open_loop, &p.constants).unwrap();
        assert!(d[0].abs() < 1e-10 && d[1].abs() < 1e-10, "{d:?}");
    }

    #[test]
    fn vertical_flight_is_an_error() {
        let p = ModelParams::default();
        let mut s = state();
        s.gamma = 1.55;
        assert!(matches!(
            velocity_dynamics(&s, &ControlInput::default(), &p.open_loop, &p.constants),
            Err(ModelError::VerticalFlight(_))
        ));
    }

    #[test]
    fn kinematics_examples() {
        let mut s = state();
        s.v_a = 10.0;
        let k = kinematics(&s, &WindVector::calm());
        assert_eq!(k, [10.0, 0.0, 0.0]);

        s.xi = std::f64::consts::FRAC_PI_2;
        let k = kinematics(&s, &WindVector::new(0.0, -10.0, 0.0));
        assert!(k.iter().all(|v| v.abs() < 1e-12), "{k:?}");

        s.xi = 0.0;
        s.gamma = std::f64::consts::PI / 6.0;
        let k = kinematics(&s, &WindVector::calm());
        assert!((k[0] - 10.0 * 30f64.to_radians().cos()).abs() < 1e-12);
        assert!(k[1].abs() < 1e-12);
        assert!((k[2] + 5.0).abs() < 1e-12);
    }

    #[test]
    fn body_acceleration_examples() {
        let p = ModelParams::default();
        let s = state();
        let f = forces(&s, &p.open_loop, &p.constants);
        let (ax, az) = body_accelerations(&s, &p.open_loop, &p.constants);
        assert!((ax - (f.thrust - f.drag) / p.constants.m).abs() < 1e-12);
        assert!((az + f.lift / p.constants.m).abs() < 1e-12);

        // pick δ_T so that T = D at α = 0
        let mut s = state();
        let drag = forces(&s, &p.open_loop, &p.constants).drag;
        let target_power = drag * s.v_a;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if p.open_loop.power(mid) < target_power {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        s.delta_t = 0.5 * (lo + hi);
        let (ax, _) = body_accelerations(&s, &p.open_loop, &p.constants);
        assert!(ax.abs() < 1e-9, "{ax}");
    }

    proptest::proptest! {
        #[test]
        fn calm_ground_speed_equals_airspeed(v in 1.0f64..30.0, g in -1.4f64..1.4, x in -3.2f64..3.2) {
            let s = AircraftState { v_a: v, gamma: g, xi: x, ..Default::default() };
            let k = kinematics(&s, &WindVector::calm());
            let norm = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
            proptest::prop_assert!((norm - v).abs() <= 4.0 * f64::EPSILON * v);
        }
    }
}
