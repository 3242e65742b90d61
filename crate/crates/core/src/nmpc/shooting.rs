//! Generic direct multiple shooting with a Gauss-Newton SQP step.
//!
//! A [`ShootingModel`] supplies the discrete dynamics of one shooting interval,
//! per-node error vectors and their weights. The SQP step linearizes every
//! interval by finite differences, condenses the state deviations into a
//! control-only least-squares problem (keeping the shooting gaps), solves the
//! resulting box QP and applies the step with a backtracking safeguard on the
//! objective of the simulated trajectory.

use super::qp::{solve_box_qp, BoundState, QpStatus};
use super::NmpcError;
use nalgebra::{DMatrix, DVector};

pub trait ShootingModel {
    /// Discrete per-node information frozen during linearization.
    type Tag: Clone;

    fn nx(&self) -> usize;
    fn nu(&self) -> usize;
    /// Length of the stage error vector.
    fn ne(&self) -> usize;
    /// Length of the terminal error vector.
    fn ne_end(&self) -> usize;

    /// State after one shooting interval.
    fn step(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, NmpcError>;

    /// Per-node tags for nodes `0..=N`.
    fn tag_nodes(&self, xs: &[DVector<f64>]) -> Vec<Self::Tag>;

    /// Stage error (output minus reference), unweighted.
    fn stage_error(&self, x: &[f64], u: &[f64], tag: &Self::Tag) -> Vec<f64>;
    fn terminal_error(&self, x: &[f64], tag: &Self::Tag) -> Vec<f64>;

    /// Residual scaling: the objective is Σ (scale_i · error_i)².
    fn stage_scale(&self) -> Vec<f64>;
    fn terminal_scale(&self) -> Vec<f64>;

    fn control_bounds(&self) -> (Vec<f64>, Vec<f64>);

    /// `a ⊖ b`; override for states living on a manifold (wrapped angles).
    fn state_diff(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }
    /// `x ⊕ dx`.
    fn state_add(&self, x: &[f64], dx: &[f64]) -> Vec<f64> {
        x.iter().zip(dx).map(|(a, b)| a + b).collect()
    }
    /// Difference of two error vectors; override to wrap angular errors.
    fn error_diff(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub xs: Vec<DVector<f64>>,
    pub us: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.us.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqpOptions {
    pub max_halvings: usize,
    /// Tikhonov term added to the condensed Hessian.
    pub regularization: f64,
    pub qp_max_iter: usize,
    /// Relative finite-difference step.
    pub fd_step: f64,
}

impl Default for SqpOptions {
    fn default() -> Self {
        Self {
            max_halvings: 4,
            regularization: 1e-8,
            qp_max_iter: 2000,
            fd_step: 1.5e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationStats {
    /// Objective of the simulated trajectory before the step.
    pub objective_before: f64,
    /// Objective of the simulated trajectory after the (possibly shortened) step.
    pub objective_after: f64,
    /// Accepted step length in (0, 1], or 0 when every trial was rejected.
    pub alpha: f64,
    /// Infinity norm of the full QP control step.
    pub step_norm: f64,
    pub qp_iterations: usize,
    pub qp_status: QpStatus,
    pub qp_kkt: f64,
    pub active_count: usize,
}

/// Forward-difference Jacobians of one interval: (A, B).
pub fn interval_jacobians<M: ShootingModel>(
    model: &M,
    x: &[f64],
    u: &[f64],
    fd_step: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>), NmpcError> {
    let nx = model.nx();
    let nu = model.nu();
    let f0 = model.step(x, u)?;
    let mut a = DMatrix::zeros(nx, nx);
    let mut b = DMatrix::zeros(nx, nu);
    let mut xp = x.to_vec();
    for i in 0..nx {
        let h = fd_step * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        let f = model.step(&xp, u)?;
        let df = model.state_diff(&f, &f0);
        for r in 0..nx {
            a[(r, i)] = df[r] / h;
        }
        xp[i] = x[i];
    }
    let mut up = u.to_vec();
    for j in 0..nu {
        let h = fd_step * u[j].abs().max(1.0);
        up[j] = u[j] + h;
        let f = model.step(x, &up)?;
        let df = model.state_diff(&f, &f0);
        for r in 0..nx {
            b[(r, j)] = df[r] / h;
        }
        up[j] = u[j];
    }
    Ok((a, b))
}

/// Simulates `us` from `x0`; returns all nodes.
pub fn rollout<M: ShootingModel>(
    model: &M,
    x0: &DVector<f64>,
    us: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>, NmpcError> {
    let mut xs = Vec::with_capacity(us.len() + 1);
    xs.push(x0.clone());
    for u in us {
        let next = model.step(xs.last().unwrap().as_slice(), u.as_slice())?;
        xs.push(DVector::from_vec(next));
    }
    Ok(xs)
}

fn weighted_sq(err: &[f64], scale: &[f64]) -> f64 {
    err.iter().zip(scale).map(|(e, s)| (e * s) * (e * s)).sum()
}

/// Objective of a node trajectory with the given tags.
pub fn trajectory_objective<M: ShootingModel>(
    model: &M,
    xs: &[DVector<f64>],
    us: &[DVector<f64>],
    tags: &[M::Tag],
) -> f64 {
    let ss = model.stage_scale();
    let ts = model.terminal_scale();
    let mut total = 0.0;
    for k in 0..us.len() {
        total += weighted_sq(
            &model.stage_error(xs[k].as_slice(), us[k].as_slice(), &tags[k]),
            &ss,
        );
    }
    let n = us.len();
    total + weighted_sq(&model.terminal_error(xs[n].as_slice(), &tags[n]), &ts)
}

/// Objective of the trajectory simulated from `x0` under `us`, with tags
/// assigned along that simulation. Non-finite simulations give +∞.
pub fn simulated_objective<M: ShootingModel>(
    model: &M,
    x0: &DVector<f64>,
    us: &[DVector<f64>],
) -> f64 {
    match rollout(model, x0, us) {
        Ok(xs) => {
            let tags = model.tag_nodes(&xs);
            let j = trajectory_objective(model, &xs, us, &tags);
            if j.is_finite() {
                j
            } else {
                f64::INFINITY
            }
        }
        Err(_) => f64::INFINITY,
    }
}

/// Residual vector and its Jacobians with respect to state and control.
fn residual_linearization<M: ShootingModel>(
    model: &M,
    x: &[f64],
    u: Option<&[f64]>,
    tag: &M::Tag,
    fd_step: f64,
) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
    let eval = |x: &[f64], u: Option<&[f64]>| match u {
        Some(u) => model.stage_error(x, u, tag),
        None => model.terminal_error(x, tag),
    };
    let scale = if u.is_some() {
        model.stage_scale()
    } else {
        model.terminal_scale()
    };
    let e0 = eval(x, u);
    let ne = e0.len();
    let r0 = DVector::from_fn(ne, |i, _| scale[i] * e0[i]);
    let nx = model.nx();
    let mut c = DMatrix::zeros(ne, nx);
    let mut xp = x.to_vec();
    for i in 0..nx {
        let h = fd_step * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        let de = model.error_diff(&eval(&xp, u), &e0);
        for r in 0..ne {
            c[(r, i)] = scale[r] * de[r] / h;
        }
        xp[i] = x[i];
    }
    let mut d = DMatrix::zeros(ne, model.nu());
    if let Some(u) = u {
        let mut up = u.to_vec();
        for j in 0..u.len() {
            let h = fd_step * u[j].abs().max(1.0);
            up[j] = u[j] + h;
            let de = model.error_diff(&eval(x, Some(&up)), &e0);
            for r in 0..ne {
                d[(r, j)] = scale[r] * de[r] / h;
            }
            up[j] = u[j];
        }
    }
    (r0, c, d)
}

/// Condensed Gauss-Newton QP data: minimize ½‖r + J Δu‖² over the stacked controls.
pub struct CondensedQp {
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
    /// State deviation maps Δx_k = G_k Δu + h_k.
    pub g_maps: Vec<DMatrix<f64>>,
    pub h_offsets: Vec<DVector<f64>>,
}

pub fn condense<M: ShootingModel>(
    model: &M,
    x0: &DVector<f64>,
    traj: &Trajectory,
    tags: &[M::Tag],
    opts: &SqpOptions,
) -> Result<CondensedQp, NmpcError> {
    let n = traj.horizon();
    let nx = model.nx();
    let nu = model.nu();
    let nv = n * nu;

    let mut g_maps = Vec::with_capacity(n + 1);
    let mut h_offsets = Vec::with_capacity(n + 1);
    g_maps.push(DMatrix::zeros(nx, nv));
    h_offsets.push(DVector::from_vec(
        model.state_diff(x0.as_slice(), traj.xs[0].as_slice()),
    ));

    let ne = model.ne();
    let rows = n * ne + model.ne_end();
    let mut jac = DMatrix::zeros(rows, nv);
    let mut res = DVector::zeros(rows);

    for k in 0..n {
        let xk = traj.xs[k].as_slice();
        let uk = traj.us[k].as_slice();
        let (a, b) = interval_jacobians(model, xk, uk, opts.fd_step)?;
        let fk = model.step(xk, uk)?;
        let gap = DVector::from_vec(model.state_diff(&fk, traj.xs[k + 1].as_slice()));
        if a.iter().chain(b.iter()).chain(gap.iter()).any(|v| !v.is_finite()) {
            return Err(NmpcError::NonFiniteLinearization { node: k });
        }

        let (r, c, d) = residual_linearization(model, xk, Some(uk), &tags[k], opts.fd_step);
        if r.iter().chain(c.iter()).chain(d.iter()).any(|v| !v.is_finite()) {
            return Err(NmpcError::NonFiniteLinearization { node: k });
        }
        let row0 = k * ne;
        let cg = &c * &g_maps[k];
        jac.view_mut((row0, 0), (ne, nv)).copy_from(&cg);
        {
            let mut blk = jac.view_mut((row0, k * nu), (ne, nu));
            blk += &d;
        }
        res.rows_mut(row0, ne).copy_from(&(r + &c * &h_offsets[k]));

        let mut g_next = &a * &g_maps[k];
        {
            let mut blk = g_next.view_mut((0, k * nu), (nx, nu));
            blk += &b;
        }
        let h_next = &a * &h_offsets[k] + gap;
        g_maps.push(g_next);
        h_offsets.push(h_next);
    }
    let (r, c, _) = residual_linearization(model, traj.xs[n].as_slice(), None, &tags[n], opts.fd_step);
    if r.iter().chain(c.iter()).any(|v| !v.is_finite()) {
        return Err(NmpcError::NonFiniteLinearization { node: n });
    }
    let row0 = n * ne;
    let ne_end = model.ne_end();
    jac.view_mut((row0, 0), (ne_end, nv))
        .copy_from(&(&c * &g_maps[n]));
    res.rows_mut(row0, ne_end)
        .copy_from(&(r + &c * &h_offsets[n]));

    let jt = jac.transpose();
    let mut hessian = &jt * &jac;
    for i in 0..nv {
        hessian[(i, i)] += opts.regularization;
    }
    let gradient = &jt * &res;
    Ok(CondensedQp {
        hessian,
        gradient,
        g_maps,
        h_offsets,
    })
}

/// One Gauss-Newton SQP iteration on `traj` in place.
///
/// The step is accepted when the simulated objective does not increase;
/// otherwise it is halved up to `max_halvings` times, and rejected (α = 0) if
/// no trial succeeds.
pub fn sqp_iterate<M: ShootingModel>(
    model: &M,
    x0: &DVector<f64>,
    traj: &mut Trajectory,
    working_set: &mut Vec<BoundState>,
    opts: &SqpOptions,
) -> Result<IterationStats, NmpcError> {
    let n = traj.horizon();
    if n < 1 || traj.xs.len() != n + 1 {
        return Err(NmpcError::InvalidConfig("trajectory needs N ≥ 1 and N+1 nodes".into()));
    }
    let nu = model.nu();
    let tags = model.tag_nodes(&traj.xs);
    let qp = condense(model, x0, traj, &tags, opts)?;

    let (lo, hi) = model.control_bounds();
    let nv = n * nu;
    let mut lb = DVector::zeros(nv);
    let mut ub = DVector::zeros(nv);
    for k in 0..n {
        for j in 0..nu {
            let u = traj.us[k][j];
            lb[k * nu + j] = (lo[j] - u).min(0.0);
            ub[k * nu + j] = (hi[j] - u).max(0.0);
        }
    }
    let warm = (working_set.len() == nv).then_some(working_set.as_slice());
    let sol = solve_box_qp(&qp.hessian, &qp.gradient, &lb, &ub, warm, opts.qp_max_iter);
    if sol.status == QpStatus::NotConvex || sol.x.iter().any(|v| !v.is_finite()) {
        return Err(NmpcError::QpFailed);
    }
    *working_set = sol.working_set.clone();
    let du = sol.x;

    let before = simulated_objective(model, x0, &traj.us);
    let trial_controls = |alpha: f64| -> Vec<DVector<f64>> {
        (0..n)
            .map(|k| {
                let mut u = traj.us[k].clone();
                for j in 0..nu {
                    u[j] = (u[j] + alpha * du[k * nu + j]).clamp(lo[j], hi[j]);
                }
                u
            })
            .collect()
    };
    let mut alpha = 1.0;
    let mut accepted = None;
    for _ in 0..=opts.max_halvings {
        let us = trial_controls(alpha);
        let j = simulated_objective(model, x0, &us);
        if j <= before {
            accepted = Some((us, j));
            break;
        }
        alpha *= 0.5;
    }
    let (alpha, after) = match accepted {
        Some((us, j)) => {
            for k in 0..=n {
                let dx = alpha
                    * (&qp.g_maps[k] * &du + &qp.h_offsets[k]);
                traj.xs[k] = DVector::from_vec(model.state_add(traj.xs[k].as_slice(), dx.as_slice()));
            }
            traj.us = us;
            (alpha, j)
        }
        None => (0.0, before),
    };
    Ok(IterationStats {
        objective_before: before,
        objective_after: after,
        alpha,
        step_norm: du.amax(),
        qp_iterations: sol.iterations,
        qp_status: sol.status,
        qp_kkt: sol.kkt_residual,
        active_count: sol.working_set.iter().filter(|s| **s != BoundState::Free).count(),
    })
}
