//! Control-augmented fixed-wing vehicle model.
//!
//! The model is split into three cascaded blocks:
//!
//! * closed-loop attitude dynamics: how roll, pitch and body rates respond to
//!   attitude references with the low-level autopilot in the loop,
//! * open-loop velocity-axis dynamics: airspeed, flight path angle, heading
//!   and the lagged throttle state driven by thrust, lift and drag,
//! * parameterless 3DOF kinematics propagating the NED position in wind.
//!
//! The same [`full_derivative`] and [`rk4_step`] are used by the simulator
//! plant and by the NMPC prediction model.

mod config;
mod dynamics;
mod integrate;
mod trim;

pub use config::{load_model_params, model_params_to_toml, parse_model_params};
pub use dynamics::{
    angle_of_attack, attitude_dynamics, body_accelerations, forces, full_derivative, kinematics,
    velocity_dynamics, Forces, StateDerivative,
};
pub use integrate::{rk4_step, rk4_step_with};
pub use trim::{level_trim, trim_point, TrimPoint};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Minimum propeller free-stream speed used as thrust divisor (m/s).
pub const EPS_PROP: f64 = 1.0;
/// Minimum |cos γ| for which the heading and flight path equations are valid.
pub const EPS_COS_GAMMA: f64 = 0.05;

/// Number of entries in [`AircraftState::to_array`].
pub const STATE_DIM: usize = 12;
/// Number of entries in [`ControlInput::to_array`].
pub const CONTROL_DIM: usize = 3;

/// Indices of the wrapped angle entries in the state array.
pub const ANGLE_STATE_INDICES: [usize; 4] = [4, 5, 6, 7];

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("non-finite state entry `{0}`")]
    NonFiniteState(&'static str),
    #[error("non-finite control input")]
    NonFiniteInput,
    #[error("airspeed must be positive, got {0}")]
    NonPositiveAirspeed(f64),
    #[error("|cos(gamma)| = {0} is below the vertical-flight guard")]
    VerticalFlight(f64),
    #[error("integration step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("trim solve did not converge at v_A = {v_a}, gamma = {gamma}")]
    TrimFailed { v_a: f64, gamma: f64 },
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
}

/// Wraps an angle to the half-open interval (-π, π].
pub fn wrap_pi(angle: f64) -> f64 {
    let r = angle.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Full simulation and prediction state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AircraftState {
    /// North position (m).
    pub n: f64,
    /// East position (m).
    pub e: f64,
    /// Down position (m).
    pub d: f64,
    /// Airspeed (m/s).
    pub v_a: f64,
    /// Air-mass relative flight path angle (rad).
    pub gamma: f64,
    /// Heading of the airspeed vector from North (rad).
    pub xi: f64,
    /// Roll (rad).
    pub phi: f64,
    /// Pitch (rad).
    pub theta: f64,
    /// Body roll rate (rad/s).
    pub p: f64,
    /// Body pitch rate (rad/s).
    pub q: f64,
    /// Body yaw rate (rad/s).
    pub r: f64,
    /// Lagged throttle state in [0, 1].
    pub delta_t: f64,
}

impl AircraftState {
    pub fn to_array(&self) -> [f64; STATE_DIM] {
        [
            self.n, self.e, self.d, self.v_a, self.gamma, self.xi, self.phi, self.theta, self.p,
            self.q, self.r, self.delta_t,
        ]
    }

    pub fn from_array(a: &[f64]) -> Self {
        Self {
            n: a[0],
            e: a[1],
            d: a[2],
            v_a: a[3],
            gamma: a[4],
            xi: a[5],
            phi: a[6],
            theta: a[7],
            p: a[8],
            q: a[9],
            r: a[10],
            delta_t: a[11],
        }
    }

    pub fn position(&self) -> [f64; 3] {
        [self.n, self.e, self.d]
    }

    /// Wraps the stored angles to (-π, π].
    pub fn wrapped(mut self) -> Self {
        self.gamma = wrap_pi(self.gamma);
        self.xi = wrap_pi(self.xi);
        self.phi = wrap_pi(self.phi);
        self.theta = wrap_pi(self.theta);
        self
    }

    pub fn check_finite(&self) -> Result<(), ModelError> {
        const NAMES: [&str; STATE_DIM] = [
            "n", "e", "d", "v_a", "gamma", "xi", "phi", "theta", "p", "q", "r", "delta_t",
        ];
        for (v, name) in self.to_array().iter().zip(NAMES) {
            if !v.is_finite() {
                return Err(ModelError::NonFiniteState(name));
            }
        }
        Ok(())
    }
}

/// High-level control vector `[u_T, φ_ref, θ_ref]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    /// Throttle input in [0, 1].
    pub u_t: f64,
    /// Roll reference (rad).
    pub phi_ref: f64,
    /// Pitch reference (rad).
    pub theta_ref: f64,
}

impl ControlInput {
    pub fn new(u_t: f64, phi_ref: f64, theta_ref: f64) -> Self {
        Self {
            u_t,
            phi_ref,
            theta_ref,
        }
    }

    pub fn to_array(&self) -> [f64; CONTROL_DIM] {
        [self.u_t, self.phi_ref, self.theta_ref]
    }

    pub fn from_array(a: &[f64]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Closed-loop attitude model coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosedLoopParams {
    pub l_p: f64,
    pub l_r: f64,
    pub l_ephi: f64,
    pub m_0: f64,
    pub m_alpha: f64,
    pub m_q: f64,
    pub m_etheta: f64,
    pub n_r: f64,
    pub n_phi: f64,
    pub n_phiref: f64,
}

impl ClosedLoopParams {
    pub const NAMES: [&'static str; 10] = [
        "l_p", "l_r", "l_ephi", "m_0", "m_alpha", "m_q", "m_etheta", "n_r", "n_phi", "n_phiref",
    ];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.l_p,
            self.l_r,
            self.l_ephi,
            self.m_0,
            self.m_alpha,
            self.m_q,
            self.m_etheta,
            self.n_r,
            self.n_phi,
            self.n_phiref,
        ]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            l_p: v[0],
            l_r: v[1],
            l_ephi: v[2],
            m_0: v[3],
            m_alpha: v[4],
            m_q: v[5],
            m_etheta: v[6],
            n_r: v[7],
            n_phi: v[8],
            n_phiref: v[9],
        }
    }

    /// Eigenvalues of the linearized roll/yaw subsystem `[φ, p, r]` at wings level.
    ///
    /// The subsystem is `φ̇ = p`, `ṗ = l_p p + l_r r − l_eφ φ`, `ṙ = n_r r + n_φ φ`.
    pub fn lateral_eigenvalues(&self) -> Vec<nalgebra::Complex<f64>> {
        let a = nalgebra::Matrix3::new(
            0.0, 1.0, 0.0, //
            -self.l_ephi, self.l_p, self.l_r, //
            self.n_phi, 0.0, self.n_r,
        );
        a.complex_eigenvalues().iter().copied().collect()
    }

    /// Eigenvalues of the linearized pitch subsystem `[θ, q]` at airspeed `v_a`,
    /// wings level and constant flight path angle.
    pub fn pitch_eigenvalues(&self, v_a: f64) -> Vec<nalgebra::Complex<f64>> {
        let v2 = v_a * v_a;
        let a = nalgebra::Matrix2::new(
            0.0,
            1.0,
            v2 * (self.m_alpha - self.m_etheta),
            v2 * self.m_q,
        );
        a.complex_eigenvalues().iter().copied().collect()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.l_ephi > 0.0 && self.m_etheta > 0.0) {
            return Err(ModelError::InvalidParams(
                "attitude error gains l_ephi and m_etheta must be positive".into(),
            ));
        }
        if self.to_vec().iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidParams("non-finite closed-loop parameter".into()));
        }
        Ok(())
    }
}

/// Open-loop velocity-axis model coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenLoopParams {
    /// Thrust-power polynomial coefficients (W per unit input).
    pub c_t1: f64,
    pub c_t2: f64,
    pub c_t3: f64,
    /// Throttle lag time constant (s).
    pub tau_t: f64,
    pub c_d0: f64,
    pub c_dalpha: f64,
    pub c_dalpha2: f64,
    pub c_l0: f64,
    pub c_lalpha: f64,
    pub c_lalpha2: f64,
}

impl OpenLoopParams {
    pub const NAMES: [&'static str; 10] = [
        "c_t1", "c_t2", "c_t3", "tau_t", "c_d0", "c_dalpha", "c_dalpha2", "c_l0", "c_lalpha",
        "c_lalpha2",
    ];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.c_t1,
            self.c_t2,
            self.c_t3,
            self.tau_t,
            self.c_d0,
            self.c_dalpha,
            self.c_dalpha2,
            self.c_l0,
            self.c_lalpha,
            self.c_lalpha2,
        ]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            c_t1: v[0],
            c_t2: v[1],
            c_t3: v[2],
            tau_t: v[3],
            c_d0: v[4],
            c_dalpha: v[5],
            c_dalpha2: v[6],
            c_l0: v[7],
            c_lalpha: v[8],
            c_lalpha2: v[9],
        }
    }

    /// Shaft power delivered at throttle state `delta_t` (W).
    pub fn power(&self, delta_t: f64) -> f64 {
        delta_t * (self.c_t1 + delta_t * (self.c_t2 + delta_t * self.c_t3))
    }

    pub fn lift_coefficient(&self, alpha: f64) -> f64 {
        self.c_l0 + self.c_lalpha * alpha + self.c_lalpha2 * alpha * alpha
    }

    pub fn drag_coefficient(&self, alpha: f64) -> f64 {
        self.c_d0 + self.c_dalpha * alpha + self.c_dalpha2 * alpha * alpha
    }

    /// Same coefficients with the thrust polynomial zeroed (dead motor).
    pub fn without_thrust(mut self) -> Self {
        self.c_t1 = 0.0;
        self.c_t2 = 0.0;
        self.c_t3 = 0.0;
        self
    }

    /// Checks the structural invariants over the angle-of-attack envelope `[alpha_lo, alpha_hi]`.
    pub fn validate(&self, alpha_lo: f64, alpha_hi: f64) -> Result<(), ModelError> {
        if self.to_vec().iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidParams("non-finite open-loop parameter".into()));
        }
        if self.tau_t <= 0.0 {
            return Err(ModelError::InvalidParams("tau_t must be positive".into()));
        }
        if self.c_d0 <= 0.0 {
            return Err(ModelError::InvalidParams("c_d0 must be positive".into()));
        }
        if self.c_lalpha <= 0.0 {
            return Err(ModelError::InvalidParams("c_lalpha must be positive".into()));
        }
        // quadratic: minimum is at an endpoint or at the vertex
        let mut probes = vec![alpha_lo, alpha_hi];
        if self.c_dalpha2 != 0.0 {
            let vertex = -self.c_dalpha / (2.0 * self.c_dalpha2);
            if vertex > alpha_lo && vertex < alpha_hi {
                probes.push(vertex);
            }
        }
        if probes.iter().any(|&a| self.drag_coefficient(a) <= 0.0) {
            return Err(ModelError::InvalidParams(
                "drag polynomial must be positive over the alpha envelope".into(),
            ));
        }
        Ok(())
    }
}

/// Physical constants of the airframe and atmosphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConstants {
    /// Mass (kg).
    pub m: f64,
    /// Gravity (m/s²).
    pub g: f64,
    /// Wing area (m²).
    pub s: f64,
    /// Air density (kg/m³).
    pub rho_air: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            m: 2.65,
            g: 9.81,
            s: 0.47,
            rho_air: 1.225,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<(), ModelError> {
        let all = [self.m, self.g, self.s, self.rho_air];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(ModelError::InvalidParams(
                "physical constants must be finite and strictly positive".into(),
            ))
        }
    }

    /// Dynamic pressure times wing area (N per unit coefficient).
    pub fn qbar_s(&self, v_a: f64) -> f64 {
        0.5 * self.rho_air * v_a * v_a * self.s
    }
}

/// Complete parameter set used by plant and prediction model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub closed_loop: ClosedLoopParams,
    pub open_loop: OpenLoopParams,
    pub constants: PhysicalConstants,
}

impl Default for ModelParams {
    /// Nominal parameters for a 2.65 kg, 2.6 m span airframe.
    ///
    /// Level trim at 13.5 m/s sits near u_T ≈ 0.41 and α ≈ 1.6°, and the attitude
    /// loop settles a 10° roll step in about one second.
    fn default() -> Self {
        let closed_loop = ClosedLoopParams {
            l_p: -11.0,
            l_r: 0.5,
            l_ephi: 25.0,
            m_0: 0.000_28,
            m_alpha: -0.01,
            m_q: -0.035,
            m_etheta: 0.088,
            n_r: -3.0,
            n_phi: 1.2,
            n_phiref: 1.0,
        };
        let open_loop = OpenLoopParams {
            c_t1: 30.0,
            c_t2: 40.0,
            c_t3: 40.0,
            tau_t: 0.25,
            c_d0: 0.03,
            c_dalpha: 0.1,
            c_dalpha2: 1.0,
            c_l0: 0.35,
            c_lalpha: 4.5,
            c_lalpha2: -1.0,
        };
        Self {
            closed_loop,
            open_loop,
            constants: PhysicalConstants::default(),
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.closed_loop.validate()?;
        self.open_loop
            .validate((-5.0f64).to_radians(), 10.0f64.to_radians())?;
        self.constants.validate()
    }
}

/// Inertial wind vector (m/s), constant within one prediction horizon.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindVector {
    pub w_n: f64,
    pub w_e: f64,
    pub w_d: f64,
}

impl WindVector {
    pub fn new(w_n: f64, w_e: f64, w_d: f64) -> Self {
        Self { w_n, w_e, w_d }
    }

    pub fn calm() -> Self {
        Self::default()
    }

    pub fn is_finite(&self) -> bool {
        self.w_n.is_finite() && self.w_e.is_finite() && self.w_d.is_finite()
    }
}
