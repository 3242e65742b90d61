use crate::guidance::GuidanceConfig;
use crate::model::{trim_point, AircraftState, ModelParams, WindVector};
use crate::nmpc::{OcpConfig, Weights};
use crate::path::{CourseBuilder, PathQueue, PathSegment, SwitchConfig, Vec3};
use crate::Error;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Reference airspeed envelope covered by the identified model (m/s).
pub const REFERENCE_ENVELOPE: (f64, f64) = (11.0, 18.0);

/// Upper bound on plant steps per run.
pub const MAX_TICKS: usize = 10_000_000;
/// Upper bound on the prediction horizon length.
pub const MAX_HORIZON: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Plant thrust drops to zero and the controller pins the throttle.
    MotorFailure,
    /// Undoes [`EventKind::MotorFailure`] in plant and controller.
    MotorRestore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// Wind change taking effect at `time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindStep {
    pub time: f64,
    pub wind: WindVector,
}

/// Standard deviations of the state measurement fed to the controller.
/// All zero means the controller sees the true state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasurementNoise {
    /// Position (m).
    pub position: f64,
    /// Airspeed (m/s).
    pub airspeed: f64,
    /// Flight path, heading, roll and pitch angles (rad).
    pub angle: f64,
    /// Body rates (rad/s).
    pub rate: f64,
}

impl MeasurementNoise {
    pub fn is_zero(&self) -> bool {
        self.position == 0.0 && self.airspeed == 0.0 && self.angle == 0.0 && self.rate == 0.0
    }
}

/// Everything needed for one deterministic closed-loop run. Angles in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub duration: f64,
    pub plant_dt: f64,
    /// Start of the window used for settled statistics (s).
    pub settle_time: f64,
    pub seed: u64,
    pub initial: AircraftState,
    pub wind: WindVector,
    pub wind_schedule: Vec<WindStep>,
    pub path: Vec<PathSegment>,
    pub plant: ModelParams,
    pub controller: ModelParams,
    pub ocp: OcpConfig,
    pub weights: Weights,
    pub guidance: GuidanceConfig,
    pub switching: SwitchConfig,
    pub v_a_ref: f64,
    pub events: Vec<Event>,
    pub measurement_noise: MeasurementNoise,
}

impl Scenario {
    /// Plant ticks between controller calls.
    pub fn control_interval(&self) -> usize {
        (self.ocp.t_iter / self.plant_dt).round() as usize
    }

    pub fn ticks(&self) -> usize {
        (self.duration / self.plant_dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration must be positive".into());
        }
        if !(self.plant_dt > 0.0 && self.plant_dt <= self.ocp.t_step) {
            return bad("plant_dt must be positive and no larger than t_step".into());
        }
        let ratio = self.ocp.t_iter / self.plant_dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
            return bad("t_iter must be an integer multiple of plant_dt".into());
        }
        if self.ticks() > MAX_TICKS {
            return bad(format!("more than {MAX_TICKS} plant steps"));
        }
        if self.ocp.n > MAX_HORIZON {
            return bad(format!("horizon longer than {MAX_HORIZON} nodes"));
        }
        if !(self.settle_time >= 0.0) {
            return bad("settle_time must be non-negative".into());
        }
        let (lo, hi) = REFERENCE_ENVELOPE;
        if !(lo..=hi).contains(&self.v_a_ref) {
            return bad(format!("v_a_ref {} outside [{lo}, {hi}] m/s", self.v_a_ref));
        }
        if self.events.windows(2).any(|w| w[1].time < w[0].time) {
            return bad("events must be ordered in time".into());
        }
        if self
            .events
            .iter()
            .any(|e| !(e.time >= 0.0 && e.time <= self.duration))
        {
            return bad("event outside the simulated interval".into());
        }
        if self.wind_schedule.windows(2).any(|w| w[1].time < w[0].time) {
            return bad("wind steps must be ordered in time".into());
        }
        if !self.wind.is_finite() || self.wind_schedule.iter().any(|w| !w.wind.is_finite()) {
            return bad("wind must be finite".into());
        }
        let n = &self.measurement_noise;
        if [n.position, n.airspeed, n.angle, n.rate]
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return bad("measurement noise must be non-negative".into());
        }
        if self.initial.v_a <= 0.0 {
            return bad("initial airspeed must be positive".into());
        }
        self.initial.check_finite()?;
        PathQueue::new(self.path.clone()).map_err(Error::Config)?;
        self.plant.validate()?;
        self.controller.validate()?;
        self.ocp.validate()?;
        self.weights.validate()?;
        self.guidance.validate().map_err(Error::Config)?;
        self.switching.validate().map_err(Error::Config)?;
        Ok(())
    }

    /// Wind in effect at time `t`.
    pub fn wind_at(&self, t: f64) -> WindVector {
        self.wind_schedule
            .iter()
            .rev()
            .find(|s| s.time <= t + 1e-9)
            .map_or(self.wind, |s| s.wind)
    }
}

/// Names of the built-in scenarios.
pub const BUILTIN_SCENARIOS: [&str; 7] = [
    "helix",
    "helix-wind",
    "helix-course",
    "dubins",
    "dubins-wind",
    "motor-failure",
    "trim-line",
];

pub fn builtin_scenario(name: &str) -> Option<Scenario> {
    Some(match name {
        "helix" => scenario_helix(WindVector::calm()),
        "helix-wind" => {
            let mut s = scenario_helix(WindVector::new(0.0, 5.0, 0.0));
            s.name = name.into();
            s.description.push_str(" Constant 5 m/s wind from the west.");
            s
        }
        "helix-course" => scenario_helix_course(),
        "dubins" => scenario_dubins_course(WindVector::calm()),
        "dubins-wind" => {
            let mut s = scenario_dubins_course(dubins_wind());
            s.name = name.into();
            s.description
                .push_str(" Constant 5 m/s wind from the south-west.");
            s
        }
        "motor-failure" => scenario_motor_failure(),
        "trim-line" => scenario_trim_line(),
        _ => return None,
    })
}

fn dubins_wind() -> WindVector {
    let dir = PI / 4.0;
    WindVector::new(5.0 * dir.cos(), 5.0 * dir.sin(), 0.0)
}

fn base(name: &str, description: &str, path: Vec<PathSegment>, start: Vec3, course: f64) -> Scenario {
    let params = ModelParams::default();
    let v_a = 13.5;
    let trim = trim_point(&params, v_a, 0.0).expect("nominal trim exists");
    Scenario {
        name: name.into(),
        description: description.into(),
        duration: 90.0,
        plant_dt: 0.01,
        settle_time: 30.0,
        seed: 0,
        initial: AircraftState {
            n: start.x,
            e: start.y,
            d: start.z,
            v_a,
            xi: course,
            theta: trim.theta,
            delta_t: trim.u_t,
            ..Default::default()
        },
        wind: WindVector::calm(),
        wind_schedule: Vec::new(),
        path,
        plant: params,
        controller: params,
        ocp: OcpConfig::default(),
        weights: Weights::default(),
        guidance: GuidanceConfig::default(),
        switching: SwitchConfig::default(),
        v_a_ref: v_a,
        events: Vec::new(),
        measurement_noise: MeasurementNoise::default(),
    }
}

/// Ascending helix of 35 m radius at 8 degrees, five turns, then a loiter.
pub fn scenario_helix(wind: WindVector) -> Scenario {
    let start = Vec3::new(0.0, 0.0, -50.0);
    let path = CourseBuilder::new(start, 0.0)
        .arc(35.0, 8f64.to_radians(), 10.0 * PI)
        .loiter(35.0);
    let mut s = base(
        "helix",
        "Ascending helix, 35 m radius, 8 degree incline, five turns.",
        path,
        start,
        0.0,
    );
    s.duration = 80.0;
    s.wind = wind;
    s
}

/// Climbing helix, a wide level arc on top and a shallow descending helix
/// into a loiter.
pub fn scenario_helix_course() -> Scenario {
    let d = f64::to_radians;
    let start = Vec3::new(0.0, 0.0, -50.0);
    let path = CourseBuilder::new(start, 0.0)
        .arc(35.0, d(8.0), 4.0 * PI)
        .arc(80.0, 0.0, PI)
        .arc(35.0, d(-3.0), 4.0 * PI)
        .loiter(35.0);
    let mut s = base(
        "helix-course",
        "Helix climb at 8 degrees, level 80 m arc, helix descent at 3 degrees, loiter.",
        path,
        start,
        0.0,
    );
    s.duration = 110.0;
    s
}

/// Closed circuit of straight legs joined by 90 degree turns, flown twice.
pub fn scenario_dubins_course(wind: WindVector) -> Scenario {
    let d = f64::to_radians;
    let start = Vec3::new(0.0, 0.0, -60.0);
    let mut b = CourseBuilder::new(start, 0.0);
    for lap in 0..2 {
        let climb = if lap == 0 { d(2.0) } else { 0.0 };
        b = b
            .line(climb, 250.0)
            .arc(70.0, 0.0, PI / 2.0)
            .line(0.0, 200.0)
            .arc(70.0, 0.0, PI / 2.0)
            .line(-climb, 250.0)
            .arc(70.0, 0.0, PI / 2.0)
            .line(0.0, 200.0)
            .arc(70.0, 0.0, PI / 2.0);
    }
    let path = b.line(0.0, 400.0).build();
    let mut s = base(
        "dubins",
        "Rectangular course of lines joined by 90 degree arcs of 70 m radius, two laps.",
        path,
        start,
        0.0,
    );
    s.duration = 260.0;
    s.wind = wind;
    s
}

/// Climb on a helix toward a loiter with the motor cut at 15.5 s and
/// restored at 34 s.
pub fn scenario_motor_failure() -> Scenario {
    let d = f64::to_radians;
    let start = Vec3::new(0.0, 0.0, -40.0);
    let path = CourseBuilder::new(start, 0.0)
        .arc(-60.0, d(4.0), 6.0 * PI)
        .loiter(-60.0);
    let mut s = base(
        "motor-failure",
        "Helix climb to a loiter circle; motor cut at 15.5 s and restored at 34 s.",
        path,
        start,
        0.0,
    );
    s.duration = 60.0;
    s.settle_time = 10.0;
    s.ocp.n = 40;
    s.ocp.t_iter = 0.05;
    s.events = vec![
        Event {
            time: 15.5,
            kind: EventKind::MotorFailure,
        },
        Event {
            time: 34.0,
            kind: EventKind::MotorRestore,
        },
    ];
    s
}

/// Straight level line started exactly on the path at trim.
pub fn scenario_trim_line() -> Scenario {
    let start = Vec3::new(0.0, 0.0, -50.0);
    let path = CourseBuilder::new(start, 0.0).line(0.0, 2000.0).build();
    let mut s = base(
        "trim-line",
        "Level straight line started on the path at trim.",
        path,
        start,
        0.0,
    );
    s.duration = 20.0;
    s.settle_time = 0.0;
    s
}
