use super::{AircraftState, ControlInput, ModelError, ModelParams};
use nalgebra::{Matrix2, Vector2};

/// Steady wings-level flight condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimPoint {
    pub v_a: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub theta: f64,
    pub u_t: f64,
    /// Pitch reference holding q̇ = 0 at this condition.
    pub theta_ref: f64,
}

/// Solves the wings-level force balance at airspeed `v_a` and flight path angle `gamma`.
///
/// Unknowns are α and δ_T (= u_T at steady state); the pitch reference follows
/// from q̇ = 0 with q = 0.
pub fn trim_point(params: &ModelParams, v_a: f64, gamma: f64) -> Result<TrimPoint, ModelError> {
    let ol = &params.open_loop;
    let c = &params.constants;
    let weight = c.m * c.g;
    let qs = c.qbar_s(v_a);
    let residual = |alpha: f64, dt: f64| -> Vector2<f64> {
        let thrust = ol.power(dt) / (v_a * alpha.cos()).max(super::EPS_PROP);
        Vector2::new(
            thrust * alpha.cos() - qs * ol.drag_coefficient(alpha) - weight * gamma.sin(),
            thrust * alpha.sin() + qs * ol.lift_coefficient(alpha) - weight * gamma.cos(),
        )
    };
    let mut x = Vector2::new(0.03, 0.5);
    let mut converged = false;
    for _ in 0..60 {
        let r = residual(x[0], x[1]);
        if r.norm() < 1e-12 {
            converged = true;
            break;
        }
        let h = 1e-7;
        let c0 = (residual(x[0] + h, x[1]) - r) / h;
        let c1 = (residual(x[0], x[1] + h) - r) / h;
        let jac = Matrix2::from_columns(&[c0, c1]);
        let Some(step) = jac.lu().solve(&(-r)) else {
            break;
        };
        x += step;
    }
    let (alpha, u_t) = (x[0], x[1]);
    if !converged || !(0.0..=1.0).contains(&u_t) || !alpha.is_finite() {
        return Err(ModelError::TrimFailed { v_a, gamma });
    }
    let cl = &params.closed_loop;
    let theta = gamma + alpha;
    // q̇ = 0: m_0 + m_α α + m_eθ (θ_ref − θ) = 0
    let theta_ref = theta - (cl.m_0 + cl.m_alpha * alpha) / cl.m_etheta;
    Ok(TrimPoint {
        v_a,
        gamma,
        alpha,
        theta,
        u_t,
        theta_ref,
    })
}

/// Level-flight trim state (heading North, at the origin) and trim controls.
pub fn level_trim(
    params: &ModelParams,
    v_a: f64,
) -> Result<(AircraftState, ControlInput), ModelError> {
    let t = trim_point(params, v_a, 0.0)?;
    Ok((
        AircraftState {
            v_a,
            gamma: 0.0,
            theta: t.theta,
            delta_t: t.u_t,
            ..Default::default()
        },
        ControlInput::new(t.u_t, 0.0, t.theta_ref),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nominal_trim_is_in_design_window() {
        let p = ModelParams::default();
        let t = trim_point(&p, 13.5, 0.0).unwrap();
        assert!(t.u_t > 0.3 && t.u_t < 0.7, "u_t = {}", t.u_t);
        assert!(t.alpha > 0.0 && t.alpha < 5f64.to_radians(), "alpha = {}", t.alpha);
    }

    #[test]
    fn climbing_trim_needs_more_throttle() {
        let p = ModelParams::default();
        let level = trim_point(&p, 13.5, 0.0).unwrap();
        let climb = trim_point(&p, 13.5, 5f64.to_radians()).unwrap();
        assert!(climb.u_t > level.u_t);
    }

    #[test]
    fn impossible_trim_fails() {
        let p = ModelParams::default();
        assert!(trim_point(&p, 13.5, 40f64.to_radians()).is_err());
    }
}
