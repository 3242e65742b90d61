use super::aircraft::{AircraftOcp, NodeTag};
use super::qp::BoundState;
use super::shooting::{sqp_iterate, IterationStats, ShootingModel, SqpOptions, Trajectory};
use super::{apply_throttle_failure_weight, NmpcError, OcpConfig, References, Weights};
use crate::guidance::GuidanceConfig;
use crate::model::{AircraftState, ControlInput, ModelParams, WindVector};
use crate::path::{PathQueue, SwitchConfig};
use nalgebra::DVector;
use std::time::{Duration, Instant};

/// Result of one controller call.
#[derive(Debug, Clone)]
pub struct ControllerStep {
    pub control: ControlInput,
    /// Set when the solver failed and the previous control was repeated.
    pub degraded: bool,
    pub cold_start: bool,
    /// Objective after the last SQP iteration.
    pub objective: f64,
    pub iterations: Vec<IterationStats>,
    pub wall_time: Duration,
    pub error: Option<NmpcError>,
}

impl ControllerStep {
    pub fn kkt_residual(&self) -> f64 {
        self.iterations.last().map_or(f64::NAN, |s| s.qp_kkt)
    }
    pub fn active_count(&self) -> usize {
        self.iterations.last().map_or(0, |s| s.active_count)
    }
}

/// Real-time NMPC session holding the warm-start trajectory.
#[derive(Debug, Clone)]
pub struct NmpcController {
    ocp: OcpConfig,
    weights: Weights,
    saved_weights: Option<Weights>,
    params: ModelParams,
    nominal_params: ModelParams,
    guidance: GuidanceConfig,
    switch_cfg: SwitchConfig,
    refs: References,
    pub options: SqpOptions,
    traj: Option<Trajectory>,
    leg_anchor: Option<NodeTag>,
    working_set: Vec<BoundState>,
    last_control: ControlInput,
}

impl NmpcController {
    pub fn new(
        ocp: OcpConfig,
        weights: Weights,
        params: ModelParams,
        guidance: GuidanceConfig,
        switch_cfg: SwitchConfig,
        refs: References,
    ) -> Result<Self, NmpcError> {
        ocp.validate()?;
        weights.validate()?;
        params.validate()?;
        guidance.validate().map_err(NmpcError::InvalidConfig)?;
        switch_cfg.validate().map_err(NmpcError::InvalidConfig)?;
        Ok(Self {
            ocp,
            weights,
            saved_weights: None,
            params,
            nominal_params: params,
            guidance,
            switch_cfg,
            refs,
            options: SqpOptions::default(),
            traj: None,
            leg_anchor: None,
            working_set: Vec::new(),
            last_control: ControlInput::new(refs.u_t_trim, 0.0, refs.theta_trim),
        })
    }

    pub fn config(&self) -> &OcpConfig {
        &self.ocp
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn references(&self) -> &References {
        &self.refs
    }

    /// Current warm-start trajectory, if any.
    pub fn solution(&self) -> Option<&Trajectory> {
        self.traj.as_ref()
    }

    pub fn reset(&mut self) {
        self.traj = None;
        self.working_set.clear();
    }

    /// Enters or leaves the motor-failure mode.
    ///
    /// Entering saves the weights, pins the throttle with a very large weight
    /// and removes thrust from the prediction model. Leaving restores both
    /// exactly.
    pub fn set_throttle_failure(&mut self, failed: bool) {
        if failed && self.saved_weights.is_none() {
            self.saved_weights = Some(self.weights);
            self.weights = apply_throttle_failure_weight(&self.weights);
            self.params.open_loop = self.nominal_params.open_loop.without_thrust();
        } else if !failed {
            if let Some(w) = self.saved_weights.take() {
                self.weights = w;
            }
            self.params = self.nominal_params;
        }
    }

    pub fn throttle_failed(&self) -> bool {
        self.saved_weights.is_some()
    }

    fn problem<'a>(&self, queue: &'a PathQueue, wind: &WindVector) -> AircraftOcp<'a> {
        AircraftOcp {
            params: self.params,
            wind: *wind,
            segments: queue.segments(),
            switch_start: queue.state,
            leg_anchor: self.leg_anchor,
            switch_cfg: self.switch_cfg,
            guidance: self.guidance,
            ocp: self.ocp,
            weights: self.weights,
            refs: self.refs,
        }
    }

    fn cold_start(&self, problem: &AircraftOcp, x: &AircraftState) -> Trajectory {
        let n = self.ocp.n;
        let xv = DVector::from_vec(x.to_array().to_vec());
        let mut phi_seed = 0.0;
        let tag = problem.tag_nodes(std::slice::from_ref(&xv))[0];
        let eta = problem.guidance_at(xv.as_slice(), &tag).eta_lat;
        if eta.abs() > 170f64.to_radians() {
            // flying against the path: commit to a turn instead of sitting on
            // the ±π discontinuity
            phi_seed = eta.signum() * 0.5 * self.ocp.phi_max;
        }
        let u = DVector::from_vec(vec![self.refs.u_t_trim, phi_seed, self.refs.theta_trim]);
        Trajectory {
            xs: vec![xv; n + 1],
            us: vec![u; n],
        }
    }

    /// Shifts the previous solution forward by one controller period.
    fn shift(&self, problem: &AircraftOcp, traj: Trajectory) -> Trajectory {
        let s = self.ocp.t_iter / self.ocp.t_step;
        let interp_nodes = |nodes: &[DVector<f64>], angular: bool| -> Vec<DVector<f64>> {
            let last = nodes.len() - 1;
            (0..nodes.len())
                .map(|j| {
                    let pos = j as f64 + s;
                    let i0 = pos.floor() as usize;
                    if i0 >= last {
                        return nodes[last].clone();
                    }
                    let frac = pos - i0 as f64;
                    let (a, b) = (nodes[i0].as_slice(), nodes[i0 + 1].as_slice());
                    if frac == 0.0 {
                        return nodes[i0].clone();
                    }
                    if angular {
                        let d = problem.state_diff(b, a);
                        let scaled: Vec<f64> = d.iter().map(|v| v * frac).collect();
                        DVector::from_vec(problem.state_add(a, &scaled))
                    } else {
                        DVector::from_fn(a.len(), |k, _| a[k] + frac * (b[k] - a[k]))
                    }
                })
                .collect()
        };
        Trajectory {
            xs: interp_nodes(&traj.xs, true),
            us: interp_nodes(&traj.us, false),
        }
    }

    /// Runs one controller period for the measured state.
    pub fn step(
        &mut self,
        measured: &AircraftState,
        queue: &PathQueue,
        wind: &WindVector,
    ) -> ControllerStep {
        let start = Instant::now();
        let problem = self.problem(queue, wind);
        let (mut traj, cold_start) = match self.traj.take() {
            Some(t) if t.horizon() == self.ocp.n => (self.shift(&problem, t), false),
            _ => {
                self.working_set.clear();
                (self.cold_start(&problem, measured), true)
            }
        };
        let x0 = DVector::from_vec(measured.to_array().to_vec());
        let n_iter = if cold_start {
            self.ocp.cold_start_iter.max(self.ocp.max_sqp_iter)
        } else {
            self.ocp.max_sqp_iter
        };
        let mut iterations = Vec::with_capacity(n_iter);
        let mut failure = None;
        for _ in 0..n_iter {
            match sqp_iterate(&problem, &x0, &mut traj, &mut self.working_set, &self.options) {
                Ok(stats) => iterations.push(stats),
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        let first = ControlInput::from_array(traj.us[0].as_slice());
        if failure.is_some() || !first.is_finite() {
            self.reset();
            return ControllerStep {
                control: self.last_control,
                degraded: true,
                cold_start,
                objective: f64::NAN,
                iterations,
                wall_time: start.elapsed(),
                error: failure,
            };
        }
        let (lo, hi) = self.ocp.control_bounds();
        let control = ControlInput::new(
            first.u_t.clamp(lo[0], hi[0]),
            first.phi_ref.clamp(lo[1], hi[1]),
            first.theta_ref.clamp(lo[2], hi[2]),
        );
        let objective = iterations.last().map_or(f64::NAN, |s| s.objective_after);
        self.leg_anchor = problem.tag_nodes(std::slice::from_ref(&x0)).first().copied();
        self.traj = Some(traj);
        self.last_control = control;
        ControllerStep {
            control,
            degraded: false,
            cold_start,
            objective,
            iterations,
            wall_time: start.elapsed(),
            error: None,
        }
    }
}
