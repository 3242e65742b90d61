use super::{full_derivative, AircraftState, ControlInput, ModelError, ModelParams, WindVector};

fn axpy(x: &AircraftState, h: f64, k: &AircraftState) -> AircraftState {
    let a = x.to_array();
    let b = k.to_array();
    let mut out = [0.0; super::STATE_DIM];
    for i in 0..out.len() {
        out[i] = a[i] + h * b[i];
    }
    AircraftState::from_array(&out)
}

/// One classical RK4 step of an arbitrary state derivative; angles are wrapped afterwards.
pub fn rk4_step_with<F>(state: &AircraftState, dt: f64, mut f: F) -> Result<AircraftState, ModelError>
where
    F: FnMut(&AircraftState) -> Result<AircraftState, ModelError>,
{
    if !(dt > 0.0) {
        return Err(ModelError::InvalidStep(dt));
    }
    let k1 = f(state)?;
    let k2 = f(&axpy(state, 0.5 * dt, &k1))?;
    let k3 = f(&axpy(state, 0.5 * dt, &k2))?;
    let k4 = f(&axpy(state, dt, &k3))?;
    let (x, k1, k2, k3, k4) = (
        state.to_array(),
        k1.to_array(),
        k2.to_array(),
        k3.to_array(),
        k4.to_array(),
    );
    let mut next = [0.0; super::STATE_DIM];
    for i in 0..next.len() {
        next[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    let next = AircraftState::from_array(&next).wrapped();
    next.check_finite()?;
    Ok(next)
}

/// Classical RK4 step of [`full_derivative`] with zero-order-hold input.
pub fn rk4_step(
    state: &AircraftState,
    input: &ControlInput,
    wind: &WindVector,
    params: &ModelParams,
    dt: f64,
) -> Result<AircraftState, ModelError> {
    rk4_step_with(state, dt, |s| full_derivative(s, input, wind, params))
}
