use super::scenario::{EventKind, MeasurementNoise, Scenario};
use crate::guidance::{evaluate, GuidanceErrors};
use crate::model::{angle_of_attack, kinematics, rk4_step, AircraftState, ControlInput, WindVector};
use crate::nmpc::shooting::IterationStats;
use crate::nmpc::{alpha_soft, NmpcController, References};
use crate::path::{closest_point, LegSelection, PathQueue, Vec3};
use crate::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::time::Duration;

/// Diagnostics of one controller call.
#[derive(Debug, Clone)]
pub struct SolverRecord {
    pub cold_start: bool,
    pub degraded: bool,
    pub objective: f64,
    pub iterations: Vec<IterationStats>,
    pub wall_time: Duration,
    pub error: Option<String>,
}

impl SolverRecord {
    pub fn last(&self) -> Option<&IterationStats> {
        self.iterations.last()
    }
}

/// One plant tick. `control` is the input held over the following tick.
#[derive(Debug, Clone)]
pub struct LogRecord {
    pub t: f64,
    pub state: AircraftState,
    pub control: ControlInput,
    pub wind: WindVector,
    pub segment: usize,
    pub x_sw: f64,
    pub switch_met: bool,
    pub guidance: GuidanceErrors,
    pub alpha: f64,
    pub alpha_soft: f64,
    pub motor_failed: bool,
    pub solver: Option<SolverRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub t: f64,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppliedEvent {
    pub t: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone)]
pub struct SimLog {
    pub scenario: String,
    pub plant_dt: f64,
    pub settle_time: f64,
    pub records: Vec<LogRecord>,
    pub transitions: Vec<Transition>,
    pub events: Vec<AppliedEvent>,
    /// Set when the plant left its valid domain and the run stopped early.
    pub terminated: Option<String>,
}

impl SimLog {
    pub fn completed(&self) -> bool {
        self.terminated.is_none()
    }

    pub fn solver_records(&self) -> impl Iterator<Item = (f64, &SolverRecord)> {
        self.records
            .iter()
            .filter_map(|r| r.solver.as_ref().map(|s| (r.t, s)))
    }
}

struct Sensor {
    rng: ChaCha8Rng,
    noise: MeasurementNoise,
}

impl Sensor {
    fn measure(&mut self, x: &AircraftState) -> AircraftState {
        if self.noise.is_zero() {
            return *x;
        }
        let mut draw = |sigma: f64| {
            if sigma > 0.0 {
                Normal::new(0.0, sigma).map_or(0.0, |d| d.sample(&mut self.rng))
            } else {
                0.0
            }
        };
        let n = self.noise;
        let mut m = *x;
        m.n += draw(n.position);
        m.e += draw(n.position);
        m.d += draw(n.position);
        m.v_a = (m.v_a + draw(n.airspeed)).max(0.1);
        m.gamma += draw(n.angle);
        m.xi += draw(n.angle);
        m.phi += draw(n.angle);
        m.theta += draw(n.angle);
        m.p += draw(n.rate);
        m.q += draw(n.rate);
        m.r += draw(n.rate);
        m.wrapped()
    }
}

/// Guidance errors of the plant with respect to the active segment, keeping
/// track of the helix leg so an already flown leg is never selected again.
struct GuidanceTracker {
    remaining: Option<f64>,
    eta_hold: f64,
}

impl GuidanceTracker {
    fn evaluate(&mut self, s: &Scenario, queue: &PathQueue, r: &Vec3, v_g: &Vec3) -> GuidanceErrors {
        let legs = self
            .remaining
            .map_or(LegSelection::Nearest, |psi| LegSelection::AtMost(psi + 0.5));
        let cp = closest_point(queue.current(), r, legs);
        self.remaining = cp.remaining;
        let g = evaluate(&cp, r, v_g, &s.guidance, self.eta_hold);
        self.eta_hold = g.eta_lat;
        g
    }
}

/// Runs the closed loop to the end of the scenario or until the plant fails.
///
/// The plant integrates with `plant_dt`; the controller is called every
/// `t_iter` and its first control is held in between. Events and wind steps
/// take effect on the first tick at or after their time.
pub fn run(s: &Scenario) -> Result<SimLog, Error> {
    s.validate()?;
    let refs = References::from_trim(&s.controller, s.v_a_ref)?;
    let mut controller = NmpcController::new(
        s.ocp,
        s.weights,
        s.controller,
        s.guidance,
        s.switching,
        refs,
    )?;
    let mut queue = PathQueue::new(s.path.clone()).map_err(Error::Config)?;
    let mut plant = s.plant;
    let mut state = s.initial;
    let mut control = ControlInput::new(refs.u_t_trim, 0.0, refs.theta_trim);
    let mut sensor = Sensor {
        rng: ChaCha8Rng::seed_from_u64(s.seed),
        noise: s.measurement_noise,
    };
    let mut tracker = GuidanceTracker {
        remaining: None,
        eta_hold: 0.0,
    };
    let dt = s.plant_dt;
    let ticks = s.ticks();
    let interval = s.control_interval();
    let mut log = SimLog {
        scenario: s.name.clone(),
        plant_dt: dt,
        settle_time: s.settle_time,
        records: Vec::with_capacity(ticks + 1),
        transitions: Vec::new(),
        events: Vec::new(),
        terminated: None,
    };
    let mut next_event = 0;
    let mut motor_failed = false;

    for k in 0..=ticks {
        let t = k as f64 * dt;
        while next_event < s.events.len() && s.events[next_event].time <= t + 0.5 * dt {
            let kind = s.events[next_event].kind;
            motor_failed = kind == EventKind::MotorFailure;
            plant.open_loop = if motor_failed {
                s.plant.open_loop.without_thrust()
            } else {
                s.plant.open_loop
            };
            controller.set_throttle_failure(motor_failed);
            log.events.push(AppliedEvent { t, kind });
            next_event += 1;
        }
        let wind = s.wind_at(t);
        let r = Vec3::new(state.n, state.e, state.d);
        let v_g = Vec3::from(kinematics(&state, &wind));

        let solver = if k < ticks && k % interval == 0 {
            let step = controller.step(&sensor.measure(&state), &queue, &wind);
            control = step.control;
            Some(SolverRecord {
                cold_start: step.cold_start,
                degraded: step.degraded,
                objective: step.objective,
                iterations: step.iterations,
                wall_time: step.wall_time,
                error: step.error.map(|e| e.to_string()),
            })
        } else {
            None
        };

        let (_, met) = crate::path::switching_conditions(queue.current(), &r, &v_g, &s.switching);
        let guidance = tracker.evaluate(s, &queue, &r, &v_g);
        let alpha = angle_of_attack(&state);
        log.records.push(LogRecord {
            t,
            state,
            control,
            wind,
            segment: queue.current_index(),
            x_sw: queue.state.x_sw,
            switch_met: met,
            guidance,
            alpha,
            alpha_soft: alpha_soft(alpha, &s.ocp),
            motor_failed,
            solver,
        });
        if k == ticks {
            break;
        }

        state = match rk4_step(&state, &control, &wind, &plant, dt) {
            Ok(next) => next,
            Err(e) => {
                log.terminated = Some(format!("plant failure at t = {t:.2} s: {e}"));
                break;
            }
        };
        let r = Vec3::new(state.n, state.e, state.d);
        let v_g = Vec3::from(kinematics(&state, &wind));
        let from = queue.current_index();
        if queue.advance(&r, &v_g, dt, &s.switching) {
            tracker.remaining = None;
            log.transitions.push(Transition {
                t: t + dt,
                from,
                to: queue.current_index(),
            });
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::{scenario_trim_line, Event};

    #[test]
    fn trim_line_stays_on_path() {
        let mut s = scenario_trim_line();
        s.duration = 5.0;
        let log = run(&s).unwrap();
        assert!(log.completed());
        assert_eq!(log.records.len(), 501);
        let calls = log.solver_records().count();
        assert_eq!(calls, 50);
        let worst = log
            .records
            .iter()
            .map(|r| r.guidance.e_lat.abs().max(r.guidance.e_lon.abs()))
            .fold(0.0, f64::max);
        assert!(worst < 0.05, "{worst}");
    }

    #[test]
    fn events_fire_on_the_tick() {
        let mut s = scenario_trim_line();
        s.duration = 1.0;
        s.events = vec![
            Event {
                time: 0.3,
                kind: EventKind::MotorFailure,
            },
            Event {
                time: 0.7,
                kind: EventKind::MotorRestore,
            },
        ];
        let log = run(&s).unwrap();
        assert_eq!(log.events.len(), 2);
        assert!((log.events[0].t - 0.3).abs() < 1e-9);
        assert!(!log.records[29].motor_failed && log.records[30].motor_failed);
        assert!(log.records[69].motor_failed && !log.records[70].motor_failed);
    }

    #[test]
    fn run_is_deterministic_with_noise() {
        let mut s = scenario_trim_line();
        s.duration = 1.0;
        s.seed = 9;
        s.measurement_noise.position = 0.5;
        let a = run(&s).unwrap();
        let b = run(&s).unwrap();
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.state, y.state);
            assert_eq!(x.control, y.control);
        }
    }
}
