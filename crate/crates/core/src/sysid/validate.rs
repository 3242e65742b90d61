use super::dataset::Dataset;
use super::estimate::FitReport;
use super::flight::FLIGHT_SUBSTEPS;
use super::structure::{simulate_structure, INIT_WINDOW};
use super::SysidError;
use crate::model::{
    body_accelerations, rk4_step, AircraftState, ControlInput, ModelParams, PhysicalConstants,
    WindVector,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Per-channel RMSE of a fitted structure on held-out data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub datasets: usize,
    pub samples: usize,
    pub rmse: BTreeMap<String, f64>,
}

pub fn validate(
    report: &FitReport,
    consts: &PhysicalConstants,
    datasets: &[Dataset],
) -> Result<ValidationReport, SysidError> {
    let s = report.structure;
    let theta = report.values()?;
    let channels = s.output_channels();
    let mut sums = vec![0.0; channels.len()];
    let mut samples = 0;
    for ds in datasets {
        let pred = simulate_structure(s, &theta, consts, ds)?;
        for (i, c) in channels.iter().enumerate() {
            sums[i] += pred[i]
                .iter()
                .zip(ds.require(c)?)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>();
        }
        samples += ds.len();
    }
    if samples == 0 {
        return Err(SysidError::Invalid("no validation data".into()));
    }
    Ok(ValidationReport {
        datasets: datasets.len(),
        samples,
        rmse: channels
            .iter()
            .zip(sums)
            .map(|(c, s)| (c.to_string(), (s / samples as f64).sqrt()))
            .collect(),
    })
}

/// Open-loop replay of the full model against a logged flight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    /// False when the simulation left the model's domain before the end.
    pub completed: bool,
    /// Simulated time (s).
    pub duration: f64,
    pub rmse: BTreeMap<String, f64>,
    pub max_abs_error: BTreeMap<String, f64>,
}

impl ReplayReport {
    pub fn max_error(&self, channel: &str) -> f64 {
        self.max_abs_error.get(channel).copied().unwrap_or(f64::NAN)
    }
}

const REPLAY_CHANNELS: [&str; 9] = ["phi", "theta", "p", "q", "r", "v_a", "gamma", "a_x", "a_z"];

/// Flies the full model with `params` from the logged commands alone
/// (`phi_ref`, `theta_ref`, `u_t`) and compares every logged output.
pub fn replay(params: &ModelParams, flight: &Dataset) -> Result<ReplayReport, SysidError> {
    let mean = |c: &str| -> Result<f64, SysidError> {
        let x = flight.require(c)?;
        let n = x.len().min(INIT_WINDOW);
        Ok(x[..n].iter().sum::<f64>() / n as f64)
    };
    let mut state = AircraftState {
        v_a: mean("v_a")?,
        gamma: mean("gamma")?,
        phi: mean("phi")?,
        theta: mean("theta")?,
        p: mean("p")?,
        q: mean("q")?,
        r: mean("r")?,
        delta_t: mean("u_t")?,
        ..Default::default()
    };
    let (u_t, phi_ref, theta_ref) = (
        flight.require("u_t")?,
        flight.require("phi_ref")?,
        flight.require("theta_ref")?,
    );
    let logged: Vec<&[f64]> = REPLAY_CHANNELS
        .iter()
        .map(|c| flight.require(c))
        .collect::<Result<_, _>>()?;
    let h = flight.dt() / FLIGHT_SUBSTEPS as f64;
    let mut sums = [0.0; REPLAY_CHANNELS.len()];
    let mut worst = [0.0f64; REPLAY_CHANNELS.len()];
    let mut done = 0;
    let mut completed = true;
    'outer: for k in 0..flight.len() {
        let (ax, az) = body_accelerations(&state, &params.open_loop, &params.constants);
        let s = &state;
        let pred = [s.phi, s.theta, s.p, s.q, s.r, s.v_a, s.gamma, ax, az];
        for i in 0..pred.len() {
            let e = pred[i] - logged[i][k];
            sums[i] += e * e;
            worst[i] = worst[i].max(e.abs());
        }
        done = k + 1;
        if k + 1 < flight.len() {
            let u = ControlInput::new(u_t[k], phi_ref[k], theta_ref[k]);
            for _ in 0..FLIGHT_SUBSTEPS {
                match rk4_step(&state, &u, &WindVector::calm(), params, h) {
                    Ok(next) => state = next,
                    Err(_) => {
                        completed = false;
                        break 'outer;
                    }
                }
            }
        }
    }
    let to_map = |v: &[f64]| -> BTreeMap<String, f64> {
        REPLAY_CHANNELS
            .iter()
            .zip(v)
            .map(|(c, x)| (c.to_string(), *x))
            .collect()
    };
    let rmse: Vec<f64> = sums.iter().map(|s| (s / done as f64).sqrt()).collect();
    Ok(ReplayReport {
        completed,
        duration: flight.time()[done - 1] - flight.time()[0],
        rmse: to_map(&rmse),
        max_abs_error: to_map(&worst),
    })
}
