//! Grey-box output-error identification on synthetic flight data.
//!
//! The closed-loop attitude block and the open-loop velocity block are
//! estimated separately. Each structure is simulated with the other block's
//! states taken from the log, so a fit of one never touches the parameters of
//! the other.

mod dataset;
mod estimate;
mod flight;
mod maneuver;
mod pipeline;
mod static_fit;
mod structure;
mod validate;

pub use dataset::Dataset;
pub use estimate::{cost_gradient, estimate, perturb, EstimateOptions, FitReport, Termination};
pub use flight::{
    add_noise, simulate_flight, split_train_validation, structure_truth, FLIGHT_SUBSTEPS,
};
pub use maneuver::{
    generate_211, generate_inputs, standard_suite, InputChannel, ManeuverKind, ManeuverSpec,
};
pub use pipeline::{
    fit_both, fly_maneuver, fly_suite, freeform_spec, noisy_flight, structure_data, CombinedFit,
};
pub use static_fit::{fit_static_curves, StaticFit, RATE_THRESHOLD};
pub use structure::{
    initial_state, output_error_cost, residuals, simulate_structure, ChannelWeights, Structure,
    INIT_WINDOW,
};
pub use validate::{replay, validate, ReplayReport, ValidationReport};

use crate::model::ModelError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SysidError {
    #[error("{0}")]
    Invalid(String),
    #[error("dataset has no channel `{0}`")]
    MissingChannel(String),
    #[error("least-squares problem is rank deficient (rank {rank} of {cols})")]
    RankDeficient { rank: usize, cols: usize },
    #[error("not enough quasi-static samples ({0})")]
    TooFewSamples(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Standard deviation of additive output noise per logged channel, in SI units.
///
/// The defaults are the magnitudes of real flight-log residuals, so they double
/// as the channel normalization of the output-error cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseTable {
    pub phi: f64,
    pub theta: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub v_a: f64,
    pub gamma: f64,
    pub a_x: f64,
    pub a_z: f64,
}

impl Default for NoiseTable {
    fn default() -> Self {
        let d = f64::to_radians;
        Self {
            phi: d(1.61),
            theta: d(0.921),
            p: d(5.14),
            q: d(3.39),
            r: d(2.65),
            v_a: 0.424,
            gamma: d(1.68),
            a_x: 0.217,
            a_z: 0.660,
        }
    }
}

impl NoiseTable {
    pub fn sigma(&self, channel: &str) -> Option<f64> {
        Some(match channel {
            "phi" => self.phi,
            "theta" => self.theta,
            "p" => self.p,
            "q" => self.q,
            "r" => self.r,
            "v_a" => self.v_a,
            "gamma" => self.gamma,
            "a_x" => self.a_x,
            "a_z" => self.a_z,
            _ => return None,
        })
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            phi: self.phi * k,
            theta: self.theta * k,
            p: self.p * k,
            q: self.q * k,
            r: self.r * k,
            v_a: self.v_a * k,
            gamma: self.gamma * k,
            a_x: self.a_x * k,
            a_z: self.a_z * k,
        }
    }
}
