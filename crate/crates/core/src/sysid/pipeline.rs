use super::dataset::Dataset;
use super::estimate::{estimate, EstimateOptions, FitReport};
use super::flight::{add_noise, simulate_flight, structure_truth};
use super::maneuver::{generate_211, generate_inputs, InputChannel, ManeuverKind, ManeuverSpec};
use super::structure::{ChannelWeights, Structure};
use super::{NoiseTable, SysidError};
use crate::model::{trim_point, ModelParams};

/// Flies one maneuver through the full model.
pub fn fly_maneuver(params: &ModelParams, spec: &ManeuverSpec) -> Result<Dataset, SysidError> {
    let inputs = match spec.kind {
        ManeuverKind::Dynamic211 => generate_211(spec, params)?,
        _ => generate_inputs(spec, &trim_point(params, spec.v_a, spec.gamma)?)?,
    };
    simulate_flight(params, &inputs, spec.v_a, spec.gamma)
}

pub fn fly_suite(params: &ModelParams, specs: &[ManeuverSpec]) -> Result<Vec<Dataset>, SysidError> {
    specs.iter().map(|s| fly_maneuver(params, s)).collect()
}

/// Training data for one structure: its outputs regenerated with `params`
/// and, when `noise` is given, corrupted with seeded Gaussian noise
/// (dataset `i` uses seed `seed + i`).
pub fn structure_data(
    structure: Structure,
    params: &ModelParams,
    flights: &[Dataset],
    noise: Option<&NoiseTable>,
    seed: u64,
) -> Result<Vec<Dataset>, SysidError> {
    flights
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let clean = structure_truth(structure, params, f)?;
            match noise {
                Some(n) => add_noise(
                    &clean,
                    structure.output_channels(),
                    n,
                    seed.wrapping_add(i as u64),
                ),
                None => Ok(clean),
            }
        })
        .collect()
}

/// Both structures fitted on the same flights, and the combined parameter set.
#[derive(Debug, Clone)]
pub struct CombinedFit {
    pub closed_loop: FitReport,
    pub open_loop: FitReport,
    pub params: ModelParams,
}

/// Fits the closed-loop and open-loop structures starting from `initial`,
/// weighting residuals by the inverse noise variances.
pub fn fit_both(
    initial: &ModelParams,
    cl_data: &[Dataset],
    ol_data: &[Dataset],
    noise: &NoiseTable,
    opts: &EstimateOptions,
) -> Result<CombinedFit, SysidError> {
    let cl = estimate(
        Structure::ClosedLoop,
        initial,
        cl_data,
        &ChannelWeights::from_noise(Structure::ClosedLoop, noise),
        opts,
    )?;
    let ol = estimate(
        Structure::OpenLoop,
        initial,
        ol_data,
        &ChannelWeights::from_noise(Structure::OpenLoop, noise),
        opts,
    )?;
    let params = ol.apply(&cl.apply(initial)?)?;
    Ok(CombinedFit {
        closed_loop: cl,
        open_loop: ol,
        params,
    })
}

/// A long random-step flight on all three inputs around a 14 m/s level trim,
/// used for open-loop replay of identified models.
pub fn freeform_spec(duration: f64, seed: u64) -> ManeuverSpec {
    ManeuverSpec {
        kind: ManeuverKind::Freeform,
        v_a: 14.0,
        gamma: 0.0,
        channels: vec![InputChannel::PhiRef, InputChannel::ThetaRef, InputChannel::UT],
        amplitudes: vec![0.4, 0.08, 0.2],
        pulse_width: 1.0,
        settle_time: 2.0,
        sample_rate: 40.0,
        duration,
        seed,
    }
}

/// Adds noise to every logged output of a full-model flight.
pub fn noisy_flight(flight: &Dataset, noise: &NoiseTable, seed: u64) -> Result<Dataset, SysidError> {
    add_noise(
        flight,
        &["phi", "theta", "p", "q", "r", "v_a", "gamma", "a_x", "a_z"],
        noise,
        seed,
    )
}
