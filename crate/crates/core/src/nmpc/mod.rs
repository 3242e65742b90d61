//! Nonlinear model predictive path-following controller.
//!
//! The optimal control problem penalizes guidance errors, airspeed, body
//! rates, a soft angle-of-attack bound, throttle rate and deviations of the
//! controls from their trim values. It is transcribed by direct multiple
//! shooting ([`shooting`]) and solved in real-time-iteration style by
//! [`NmpcController`].

mod aircraft;
mod controller;
pub mod qp;
pub mod shooting;

pub use aircraft::{build_outputs, AircraftOcp, NodeTag, Outputs, STAGE_DIM, Y_DIM, Z_DIM};
pub use controller::{ControllerStep, NmpcController};

use crate::model::ModelError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NmpcError {
    #[error("non-finite linearization at node {node}")]
    NonFiniteLinearization { node: usize },
    #[error("QP subproblem failed")]
    QpFailed,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Horizon, timing, control bounds and angle-of-attack soft limits. Angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcpConfig {
    pub n: usize,
    pub t_step: f64,
    pub t_iter: f64,
    pub max_sqp_iter: usize,
    /// SQP iterations spent on a cold start.
    pub cold_start_iter: usize,
    pub u_t_min: f64,
    pub u_t_max: f64,
    pub phi_max: f64,
    pub theta_max: f64,
    pub alpha_minus: f64,
    pub alpha_plus: f64,
    pub delta_alpha: f64,
}

impl Default for OcpConfig {
    fn default() -> Self {
        Self {
            n: 70,
            t_step: 0.1,
            t_iter: 0.1,
            max_sqp_iter: 1,
            cold_start_iter: 3,
            u_t_min: 0.0,
            u_t_max: 1.0,
            phi_max: 30f64.to_radians(),
            theta_max: 15f64.to_radians(),
            alpha_minus: -3f64.to_radians(),
            alpha_plus: 8f64.to_radians(),
            delta_alpha: 2f64.to_radians(),
        }
    }
}

impl OcpConfig {
    pub fn validate(&self) -> Result<(), NmpcError> {
        let bad = |m: &str| Err(NmpcError::InvalidConfig(m.into()));
        if self.n < 2 {
            return bad("horizon N must be at least 2");
        }
        if !(self.t_step > 0.0 && self.t_iter > 0.0) {
            return bad("t_step and t_iter must be positive");
        }
        if self.t_iter > self.t_step * self.n as f64 {
            return bad("t_iter exceeds the horizon length");
        }
        if self.max_sqp_iter == 0 {
            return bad("max_sqp_iter must be at least 1");
        }
        if !(0.0 <= self.u_t_min && self.u_t_min < self.u_t_max && self.u_t_max <= 1.0) {
            return bad("throttle bounds must satisfy 0 ≤ min < max ≤ 1");
        }
        if !(self.phi_max > 0.0 && self.theta_max > 0.0) {
            return bad("attitude bounds must be positive");
        }
        if !(self.delta_alpha > 0.0
            && self.alpha_minus + self.delta_alpha < self.alpha_plus - self.delta_alpha)
        {
            return bad("angle-of-attack soft band is empty");
        }
        Ok(())
    }

    pub fn control_bounds(&self) -> ([f64; 3], [f64; 3]) {
        (
            [self.u_t_min, -self.phi_max, -self.theta_max],
            [self.u_t_max, self.phi_max, self.theta_max],
        )
    }
}

/// Index of the throttle input in the control-weight vector.
pub const RZ_THROTTLE: usize = 1;
/// Throttle weight used while the motor is out.
pub const THROTTLE_FAILURE_WEIGHT: f64 = 1e6;

/// Diagonal weights and normalization ranges.
///
/// Output order: `y = [η_lat, η_lon, v_A, p, q, r, α_soft]`,
/// `z = [δ̇_T, u_T, φ_ref − φ_ff, θ_ref]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    pub q_y: [f64; Y_DIM],
    pub r_z: [f64; Z_DIM],
    pub p_end: [f64; Y_DIM],
    pub range_y: [f64; Y_DIM],
    pub range_z: [f64; Z_DIM],
}

impl Default for Weights {
    fn default() -> Self {
        let q_y = [40.0, 60.0, 10.0, 0.5, 0.5, 0.5, 100.0];
        Self {
            q_y,
            r_z: [0.5, 3.0, 0.5, 3.0],
            p_end: [q_y[0], q_y[1], q_y[2], 0.0, 0.0, 0.0, 0.0],
            range_y: [
                std::f64::consts::FRAC_PI_2,
                1.0,
                2.0,
                1.0,
                1.0,
                1.0,
                1.0,
            ],
            range_z: [0.2, 0.5, 30f64.to_radians(), 15f64.to_radians()],
        }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<(), NmpcError> {
        let w = self.q_y.iter().chain(&self.r_z).chain(&self.p_end);
        if w.clone().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(NmpcError::InvalidConfig("weights must be non-negative".into()));
        }
        let ranges = self.range_y.iter().chain(&self.range_z);
        if ranges.clone().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(NmpcError::InvalidConfig(
                "normalization ranges must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Weights with the throttle input pinned by a very large penalty.
pub fn apply_throttle_failure_weight(weights: &Weights) -> Weights {
    let mut w = *weights;
    w.r_z[RZ_THROTTLE] = THROTTLE_FAILURE_WEIGHT;
    w
}

/// Output and control references.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct References {
    pub v_a: f64,
    pub u_t_trim: f64,
    pub theta_trim: f64,
}

impl References {
    /// References from the level trim at airspeed `v_a`.
    pub fn from_trim(params: &crate::model::ModelParams, v_a: f64) -> Result<Self, ModelError> {
        let t = crate::model::trim_point(params, v_a, 0.0)?;
        Ok(Self {
            v_a,
            u_t_trim: t.u_t,
            theta_trim: t.theta_ref,
        })
    }
}

/// Soft angle-of-attack penalty: zero inside the safe band, quadratic in the
/// transition zones, exactly 1 at the hard bounds.
pub fn alpha_soft(alpha: f64, cfg: &OcpConfig) -> f64 {
    let upper = cfg.alpha_plus - cfg.delta_alpha;
    let lower = cfg.alpha_minus + cfg.delta_alpha;
    if alpha > upper {
        let s = (alpha - upper) / cfg.delta_alpha;
        s * s
    } else if alpha < lower {
        let s = (alpha - lower) / cfg.delta_alpha;
        s * s
    } else {
        0.0
    }
}
