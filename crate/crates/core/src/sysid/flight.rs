use super::dataset::Dataset;
use super::structure::{simulate_structure, Structure};
use super::{NoiseTable, SysidError};
use crate::model::{
    body_accelerations, rk4_step, trim_point, AircraftState, ControlInput, ModelParams, WindVector,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Plant integration steps per logged sample.
pub const FLIGHT_SUBSTEPS: usize = 4;

/// Flies the full vehicle model through the commands in `inputs`
/// (`u_t`, `phi_ref`, `theta_ref`) from the trim state at (`v_a`, `gamma`).
///
/// The result carries the commands plus every logged state and the body
/// accelerations.
pub fn simulate_flight(
    params: &ModelParams,
    inputs: &Dataset,
    v_a: f64,
    gamma: f64,
) -> Result<Dataset, SysidError> {
    let trim = trim_point(params, v_a, gamma)?;
    let mut state = AircraftState {
        v_a,
        gamma,
        theta: trim.theta,
        delta_t: trim.u_t,
        ..Default::default()
    };
    let (u_t, phi_ref, theta_ref) = (
        inputs.require("u_t")?,
        inputs.require("phi_ref")?,
        inputs.require("theta_ref")?,
    );
    let n = inputs.len();
    let h = inputs.dt() / FLIGHT_SUBSTEPS as f64;
    const LOGGED: [&str; 10] = [
        "v_a", "gamma", "phi", "theta", "p", "q", "r", "delta_t", "a_x", "a_z",
    ];
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); LOGGED.len()];
    for k in 0..n {
        let (ax, az) = body_accelerations(&state, &params.open_loop, &params.constants);
        let s = &state;
        let row = [s.v_a, s.gamma, s.phi, s.theta, s.p, s.q, s.r, s.delta_t, ax, az];
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
        if k + 1 < n {
            let u = ControlInput::new(u_t[k], phi_ref[k], theta_ref[k]);
            for _ in 0..FLIGHT_SUBSTEPS {
                state = rk4_step(&state, &u, &WindVector::calm(), params, h)?;
            }
        }
    }
    let mut out = Dataset::new(inputs.time().to_vec())?;
    for name in ["phi_ref", "theta_ref", "u_t"] {
        out.set_channel(name, inputs.require(name)?.to_vec())?;
    }
    for (name, c) in LOGGED.iter().zip(cols) {
        out.set_channel(name, c)?;
    }
    Ok(out)
}

/// Copy of `flight` whose outputs for `structure` are replaced by that
/// structure's own simulation with `params`.
///
/// This gives data on which the structure is exact, which is what parameter
/// recovery checks need.
pub fn structure_truth(
    structure: Structure,
    params: &ModelParams,
    flight: &Dataset,
) -> Result<Dataset, SysidError> {
    let pred = simulate_structure(
        structure,
        &structure.extract(params),
        &params.constants,
        flight,
    )?;
    let mut out = flight.clone();
    for (c, y) in structure.output_channels().iter().zip(pred) {
        out.set_channel(c, y)?;
    }
    Ok(out)
}

/// Adds zero-mean Gaussian noise to the listed channels.
pub fn add_noise(
    ds: &Dataset,
    channels: &[&str],
    noise: &NoiseTable,
    seed: u64,
) -> Result<Dataset, SysidError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ds.clone();
    for c in channels {
        let sigma = noise
            .sigma(c)
            .ok_or_else(|| SysidError::Invalid(format!("no noise level for channel {c}")))?;
        let dist = Normal::new(0.0, sigma).map_err(|e| SysidError::Invalid(e.to_string()))?;
        let noisy = ds
            .require(c)?
            .iter()
            .map(|v| v + dist.sample(&mut rng))
            .collect();
        out.set_channel(c, noisy)?;
    }
    Ok(out)
}

/// Seeded shuffle followed by a split with `round(train_fraction · n)`
/// training items.
pub fn split_train_validation<T>(
    mut items: Vec<T>,
    train_fraction: f64,
    seed: u64,
) -> (Vec<T>, Vec<T>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    items.shuffle(&mut rng);
    let n_train = ((items.len() as f64) * train_fraction.clamp(0.0, 1.0)).round() as usize;
    let validation = items.split_off(n_train);
    (items, validation)
}
