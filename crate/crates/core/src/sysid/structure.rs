use super::dataset::Dataset;
use super::{NoiseTable, SysidError};
use crate::model::{
    attitude_dynamics, body_accelerations, rk4_step_with, velocity_dynamics, AircraftState,
    ClosedLoopParams, ControlInput, ModelParams, OpenLoopParams, PhysicalConstants,
};
use serde::{Deserialize, Serialize};

/// Samples averaged to estimate the initial state (1 s at 40 Hz).
pub const INIT_WINDOW: usize = 40;

/// Grey-box model structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    /// States φ, θ, p, q, r driven by φ_ref, θ_ref and the logged v_A, γ.
    ClosedLoop,
    /// States v_A, γ, δ_T driven by u_T and the logged φ, θ.
    OpenLoop,
}

impl Structure {
    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            Structure::ClosedLoop => &ClosedLoopParams::NAMES,
            Structure::OpenLoop => &OpenLoopParams::NAMES,
        }
    }

    pub fn output_channels(self) -> &'static [&'static str] {
        match self {
            Structure::ClosedLoop => &["phi", "theta", "p", "q", "r"],
            Structure::OpenLoop => &["v_a", "gamma", "a_x", "a_z"],
        }
    }

    pub fn input_channels(self) -> &'static [&'static str] {
        match self {
            Structure::ClosedLoop => &["phi_ref", "theta_ref", "v_a", "gamma"],
            Structure::OpenLoop => &["phi", "theta", "u_t"],
        }
    }

    /// This structure's parameter vector taken from a full parameter set.
    pub fn extract(self, params: &ModelParams) -> Vec<f64> {
        match self {
            Structure::ClosedLoop => params.closed_loop.to_vec(),
            Structure::OpenLoop => params.open_loop.to_vec(),
        }
    }

    /// `params` with this structure's block replaced by `theta`.
    pub fn apply(self, params: &ModelParams, theta: &[f64]) -> ModelParams {
        let mut out = *params;
        match self {
            Structure::ClosedLoop => out.closed_loop = ClosedLoopParams::from_slice(theta),
            Structure::OpenLoop => out.open_loop = OpenLoopParams::from_slice(theta),
        }
        out
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "cl" | "closed_loop" => Some(Structure::ClosedLoop),
            "ol" | "open_loop" => Some(Structure::OpenLoop),
            _ => None,
        }
    }
}

/// Per-channel weights of the output-error cost.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelWeights(pub Vec<(String, f64)>);

impl ChannelWeights {
    /// Inverse noise variance for each output of `structure`.
    pub fn from_noise(structure: Structure, noise: &NoiseTable) -> Self {
        Self(
            structure
                .output_channels()
                .iter()
                .map(|c| {
                    let s = noise.sigma(c).expect("every output has a noise entry");
                    (c.to_string(), 1.0 / (s * s))
                })
                .collect(),
        )
    }

    pub fn get(&self, channel: &str) -> f64 {
        self.0
            .iter()
            .find(|(c, _)| c == channel)
            .map_or(0.0, |(_, w)| *w)
    }
}

fn window_mean(x: &[f64]) -> f64 {
    let n = x.len().min(INIT_WINDOW);
    x[..n].iter().sum::<f64>() / n as f64
}

/// Initial structure state from the mean over the first [`INIT_WINDOW`] samples.
///
/// For the open-loop structure the throttle state starts at the commanded u_T.
pub fn initial_state(structure: Structure, ds: &Dataset) -> Result<Vec<f64>, SysidError> {
    let names: &[&str] = match structure {
        Structure::ClosedLoop => &["phi", "theta", "p", "q", "r"],
        Structure::OpenLoop => &["v_a", "gamma", "u_t"],
    };
    names
        .iter()
        .map(|n| ds.require(n).map(window_mean))
        .collect()
}

fn cl_step(
    x: &[f64],
    phi_ref: f64,
    theta_ref: f64,
    v_a: f64,
    gamma: f64,
    params: &ClosedLoopParams,
    dt: f64,
) -> Result<[f64; 5], SysidError> {
    let state = AircraftState {
        v_a,
        gamma,
        phi: x[0],
        theta: x[1],
        p: x[2],
        q: x[3],
        r: x[4],
        ..Default::default()
    };
    let input = ControlInput::new(0.0, phi_ref, theta_ref);
    let next = rk4_step_with(&state, dt, |s| {
        let d = attitude_dynamics(s, &input, params)?;
        Ok(AircraftState {
            phi: d[0],
            theta: d[1],
            p: d[2],
            q: d[3],
            r: d[4],
            ..Default::default()
        })
    })?;
    Ok([next.phi, next.theta, next.p, next.q, next.r])
}

fn ol_state(x: &[f64], phi: f64, theta: f64) -> AircraftState {
    AircraftState {
        v_a: x[0],
        gamma: x[1],
        delta_t: x[2],
        phi,
        theta,
        ..Default::default()
    }
}

#[allow(clippy::too_many_arguments)]
fn ol_step(
    x: &[f64],
    phi: f64,
    theta: f64,
    u_t: f64,
    params: &OpenLoopParams,
    consts: &PhysicalConstants,
    dt: f64,
) -> Result<[f64; 3], SysidError> {
    let input = ControlInput::new(u_t, 0.0, 0.0);
    let next = rk4_step_with(&ol_state(x, phi, theta), dt, |s| {
        let d = velocity_dynamics(s, &input, params, consts)?;
        Ok(AircraftState {
            v_a: d[0],
            gamma: d[1],
            delta_t: d[3],
            ..Default::default()
        })
    })?;
    Ok([next.v_a, next.gamma, next.delta_t])
}

/// Simulates a structure over a dataset and returns the predicted outputs in
/// [`Structure::output_channels`] order.
///
/// One RK4 step per sample with all inputs held over the interval. Only the
/// structure's own parameter block is used; `consts` matter for the open-loop
/// structure only.
pub fn simulate_structure(
    structure: Structure,
    theta: &[f64],
    consts: &PhysicalConstants,
    ds: &Dataset,
) -> Result<Vec<Vec<f64>>, SysidError> {
    let names = structure.parameter_names();
    if theta.len() != names.len() {
        return Err(SysidError::Invalid(format!(
            "expected {} parameters, got {}",
            names.len(),
            theta.len()
        )));
    }
    let inputs: Vec<&[f64]> = structure
        .input_channels()
        .iter()
        .map(|c| ds.require(c))
        .collect::<Result<_, _>>()?;
    let dt = ds.dt();
    let n = ds.len();
    let mut x = initial_state(structure, ds)?;
    let mut out = vec![Vec::with_capacity(n); structure.output_channels().len()];
    match structure {
        Structure::ClosedLoop => {
            let p = ClosedLoopParams::from_slice(theta);
            for k in 0..n {
                for (o, v) in out.iter_mut().zip(&x) {
                    o.push(*v);
                }
                if k + 1 < n {
                    x = cl_step(&x, inputs[0][k], inputs[1][k], inputs[2][k], inputs[3][k], &p, dt)?
                        .to_vec();
                }
            }
        }
        Structure::OpenLoop => {
            let p = OpenLoopParams::from_slice(theta);
            for k in 0..n {
                let (phi, th, u) = (inputs[0][k], inputs[1][k], inputs[2][k]);
                let (ax, az) = body_accelerations(&ol_state(&x, phi, th), &p, consts);
                for (o, v) in out.iter_mut().zip([x[0], x[1], ax, az]) {
                    o.push(v);
                }
                if k + 1 < n {
                    x = ol_step(&x, phi, th, u, &p, consts, dt)?.to_vec();
                }
            }
        }
    }
    Ok(out)
}

/// Weighted residuals `√w (ŷ − y)` stacked over datasets, channels and samples.
pub fn residuals(
    structure: Structure,
    theta: &[f64],
    consts: &PhysicalConstants,
    datasets: &[Dataset],
    weights: &ChannelWeights,
) -> Result<Vec<f64>, SysidError> {
    let mut r = Vec::new();
    for ds in datasets {
        let pred = simulate_structure(structure, theta, consts, ds)?;
        for (c, yhat) in structure.output_channels().iter().zip(&pred) {
            let w = weights.get(c).sqrt();
            let y = ds.require(c)?;
            r.extend(yhat.iter().zip(y).map(|(a, b)| w * (a - b)));
        }
    }
    Ok(r)
}

/// Weighted sum of squared output residuals; infinite when the simulation fails.
pub fn output_error_cost(
    structure: Structure,
    theta: &[f64],
    consts: &PhysicalConstants,
    datasets: &[Dataset],
    weights: &ChannelWeights,
) -> f64 {
    match residuals(structure, theta, consts, datasets, weights) {
        Ok(r) => {
            let c: f64 = r.iter().map(|v| v * v).sum();
            if c.is_finite() {
                c
            } else {
                f64::INFINITY
            }
        }
        Err(_) => f64::INFINITY,
    }
}
