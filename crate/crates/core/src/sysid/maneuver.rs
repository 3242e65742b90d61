use super::dataset::Dataset;
use super::SysidError;
use crate::model::{trim_point, ModelParams, TrimPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManeuverKind {
    /// Constant offsets from trim held for the whole run.
    Static,
    /// Pulses of width 2w, w, w with alternating sign after a settling period.
    Dynamic211,
    /// Random piecewise-constant commands.
    Freeform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputChannel {
    UT,
    PhiRef,
    ThetaRef,
}

impl InputChannel {
    pub fn name(self) -> &'static str {
        match self {
            InputChannel::UT => "u_t",
            InputChannel::PhiRef => "phi_ref",
            InputChannel::ThetaRef => "theta_ref",
        }
    }
}

/// Identification maneuver around a trim condition. Angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManeuverSpec {
    pub kind: ManeuverKind,
    pub v_a: f64,
    pub gamma: f64,
    pub channels: Vec<InputChannel>,
    /// One amplitude per channel, in that channel's units.
    pub amplitudes: Vec<f64>,
    /// Base pulse width w (s); for freeform runs the minimum hold time.
    pub pulse_width: f64,
    /// Trim hold before (and, for 2-1-1 runs, after) the excitation (s).
    pub settle_time: f64,
    pub sample_rate: f64,
    /// Total length for static and freeform runs (s).
    pub duration: f64,
    pub seed: u64,
}

impl ManeuverSpec {
    pub fn doublet_211(
        v_a: f64,
        gamma: f64,
        channels: Vec<InputChannel>,
        amplitudes: Vec<f64>,
    ) -> Self {
        Self {
            kind: ManeuverKind::Dynamic211,
            v_a,
            gamma,
            channels,
            amplitudes,
            pulse_width: 1.0,
            settle_time: 2.0,
            sample_rate: 40.0,
            duration: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SysidError> {
        let bad = |m: &str| Err(SysidError::Invalid(m.into()));
        if self.channels.len() != self.amplitudes.len() {
            return bad("one amplitude per channel required");
        }
        if !(self.sample_rate > 0.0 && self.pulse_width > 0.0 && self.settle_time >= 0.0) {
            return bad("sample rate and pulse width must be positive");
        }
        if self.pulse_width * self.sample_rate < 2.0 {
            return bad("pulse width shorter than two samples");
        }
        if self.kind != ManeuverKind::Dynamic211 && !(self.duration > self.settle_time) {
            return bad("duration must exceed the settling time");
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        match self.kind {
            ManeuverKind::Dynamic211 => 2.0 * self.settle_time + 4.0 * self.pulse_width,
            _ => self.duration,
        }
    }

    /// Edge times of the 2-1-1 pulses.
    pub fn pulse_edges(&self) -> [f64; 4] {
        let t0 = self.settle_time;
        let w = self.pulse_width;
        [t0, t0 + 2.0 * w, t0 + 3.0 * w, t0 + 4.0 * w]
    }
}

/// 2-1-1 pulse value at time `t` for unit amplitude.
fn pulse_211(t: f64, edges: &[f64; 4]) -> f64 {
    if t < edges[0] || t >= edges[3] {
        0.0
    } else if t < edges[1] {
        1.0
    } else if t < edges[2] {
        -1.0
    } else {
        1.0
    }
}

/// Command time series (`u_t`, `phi_ref`, `theta_ref`) for a maneuver about `trim`.
pub fn generate_inputs(spec: &ManeuverSpec, trim: &TrimPoint) -> Result<Dataset, SysidError> {
    spec.validate()?;
    let samples = (spec.total_duration() * spec.sample_rate).round() as usize + 1;
    let mut ds = Dataset::with_rate(samples, spec.sample_rate)?;
    let base = [trim.u_t, 0.0, trim.theta_ref];
    let mut cols: [Vec<f64>; 3] = [
        vec![base[0]; samples],
        vec![base[1]; samples],
        vec![base[2]; samples],
    ];
    let index = |c: InputChannel| match c {
        InputChannel::UT => 0,
        InputChannel::PhiRef => 1,
        InputChannel::ThetaRef => 2,
    };
    let time = ds.time().to_vec();
    match spec.kind {
        ManeuverKind::Dynamic211 => {
            let edges = spec.pulse_edges();
            for (c, a) in spec.channels.iter().zip(&spec.amplitudes) {
                let col = &mut cols[index(*c)];
                for (k, t) in time.iter().enumerate() {
                    // tolerate rounding in the time vector at the edges
                    col[k] += a * pulse_211(t + 1e-9, &edges);
                }
            }
        }
        ManeuverKind::Static => {
            for (c, a) in spec.channels.iter().zip(&spec.amplitudes) {
                for (k, t) in time.iter().enumerate() {
                    if *t >= spec.settle_time {
                        cols[index(*c)][k] += a;
                    }
                }
            }
        }
        ManeuverKind::Freeform => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            for (c, a) in spec.channels.iter().zip(&spec.amplitudes) {
                let col = &mut cols[index(*c)];
                let mut t_next = spec.settle_time;
                let mut level = 0.0;
                for (k, t) in time.iter().enumerate() {
                    if *t >= t_next {
                        level = rng.gen_range(-1.0..=1.0) * a;
                        t_next += rng.gen_range(spec.pulse_width..=3.0 * spec.pulse_width);
                    }
                    col[k] += level;
                }
            }
        }
    }
    for c in &mut cols[0] {
        *c = c.clamp(0.0, 1.0);
    }
    let [u, phi, theta] = cols;
    ds.set_channel("u_t", u)?;
    ds.set_channel("phi_ref", phi)?;
    ds.set_channel("theta_ref", theta)?;
    Ok(ds)
}

/// Airspeed envelope covered by identification data (m/s).
pub const AIRSPEED_ENVELOPE: (f64, f64) = (11.0, 18.0);

/// Fastest closed-loop attitude mode of `params` at airspeed `v_a` (Hz).
fn fastest_mode_hz(params: &ModelParams, v_a: f64) -> f64 {
    let cl = &params.closed_loop;
    cl.lateral_eigenvalues()
        .iter()
        .chain(cl.pitch_eigenvalues(v_a).iter())
        .map(|l| l.norm())
        .fold(0.0, f64::max)
        / (2.0 * std::f64::consts::PI)
}

/// Inputs for a 2-1-1 (or other) maneuver at the trim of `params`.
///
/// Rejects trims outside the airspeed envelope and sample rates below twice
/// the fastest attitude mode.
pub fn generate_211(spec: &ManeuverSpec, params: &ModelParams) -> Result<Dataset, SysidError> {
    let (lo, hi) = AIRSPEED_ENVELOPE;
    if !(lo..=hi).contains(&spec.v_a) {
        return Err(SysidError::Invalid(format!(
            "trim airspeed {} outside [{lo}, {hi}] m/s",
            spec.v_a
        )));
    }
    let f = fastest_mode_hz(params, spec.v_a);
    if spec.sample_rate < 2.0 * f {
        return Err(SysidError::Invalid(format!(
            "sample rate {} Hz below twice the fastest mode ({f:.2} Hz)",
            spec.sample_rate
        )));
    }
    let trim = trim_point(params, spec.v_a, spec.gamma)?;
    generate_inputs(spec, &trim)
}

/// 2-1-1 maneuvers spread over the envelope: roll, pitch and throttle pulses
/// plus a coupled roll/pitch pulse at each trim. Pulse widths follow the
/// speed of the excited mode.
pub fn standard_suite() -> Vec<ManeuverSpec> {
    let d = f64::to_radians;
    let mut out = Vec::new();
    let trims = [
        (d(-4.0), &[15.0, 16.0, 17.0][..]),
        (0.0, &[12.0, 13.0, 14.0, 15.0, 16.0, 17.0][..]),
        (d(4.0), &[12.0, 13.0, 14.0, 15.0][..]),
    ];
    for (gamma, speeds) in trims {
        for &v in speeds {
            for (channels, amps, w) in [
                (vec![InputChannel::PhiRef], vec![d(20.0)], 0.5),
                (vec![InputChannel::ThetaRef], vec![d(5.0)], 0.75),
                (vec![InputChannel::UT], vec![0.2], 1.5),
                (
                    vec![InputChannel::PhiRef, InputChannel::ThetaRef],
                    vec![d(-15.0), d(-4.0)],
                    0.75,
                ),
            ] {
                out.push(ManeuverSpec {
                    pulse_width: w,
                    ..ManeuverSpec::doublet_211(v, gamma, channels, amps)
                });
            }
        }
    }
    out
}
