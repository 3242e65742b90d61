use super::dataset::Dataset;
use super::structure::{residuals, simulate_structure, ChannelWeights, Structure};
use super::SysidError;
use crate::model::{ModelParams, PhysicalConstants};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub max_iterations: usize,
    pub gradient_tol: f64,
    pub step_tol: f64,
    pub lambda_init: f64,
    /// Relative central-difference step in scaled parameters.
    pub fd_step: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tol: 1e-8,
            step_tol: 1e-10,
            lambda_init: 1e-3,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Gradient,
    Step,
    /// No damping level produced a descent step; the iterate is a numerical
    /// minimum.
    NoProgress,
    MaxIterations,
    /// The cost at the initial point was not finite.
    Diverged,
}

/// Outcome of one estimation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub structure: Structure,
    pub converged: bool,
    pub failed: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub initial_cost: f64,
    pub cost: f64,
    /// Number of stacked residuals.
    pub residual_count: usize,
    /// Residual variance estimate σ̂² = cost / (m − n).
    pub residual_variance: f64,
    /// Gauss-Newton covariance σ̂² (JᵀJ)⁻¹, rows in parameter order.
    pub covariance: Vec<Vec<f64>>,
    pub parameters: BTreeMap<String, f64>,
    pub initial: BTreeMap<String, f64>,
    pub std_dev: BTreeMap<String, f64>,
    /// Unweighted per-channel RMSE on the training data.
    pub rmse: BTreeMap<String, f64>,
}

impl FitReport {
    /// Parameter vector in structure order.
    pub fn values(&self) -> Result<Vec<f64>, SysidError> {
        self.structure
            .parameter_names()
            .iter()
            .map(|n| {
                self.parameters
                    .get(*n)
                    .copied()
                    .ok_or_else(|| SysidError::Invalid(format!("report lacks parameter {n}")))
            })
            .collect()
    }

    /// Relative one-sigma uncertainty of parameter `name`.
    pub fn relative_std(&self, name: &str) -> Option<f64> {
        let v = self.parameters.get(name)?;
        let s = self.std_dev.get(name)?;
        Some(s / v.abs())
    }

    /// `base` with this report's parameter block substituted.
    pub fn apply(&self, base: &ModelParams) -> Result<ModelParams, SysidError> {
        Ok(self.structure.apply(base, &self.values()?))
    }

    pub fn to_toml(&self) -> Result<String, crate::Error> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self, crate::Error> {
        Ok(toml::from_str(text)?)
    }
}

/// Multiplies every parameter by `1 ± fraction` with a seeded random sign.
pub fn perturb(values: &[f64], fraction: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    values
        .iter()
        .map(|v| {
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            v * (1.0 + sign * fraction)
        })
        .collect()
}

struct Problem<'a> {
    structure: Structure,
    consts: &'a PhysicalConstants,
    datasets: &'a [Dataset],
    weights: &'a ChannelWeights,
    scale: Vec<f64>,
}

impl Problem<'_> {
    fn unscale(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.scale).map(|(a, s)| a * s).collect()
    }

    fn residuals(&self, z: &[f64]) -> Option<DVector<f64>> {
        let r = residuals(
            self.structure,
            &self.unscale(z),
            self.consts,
            self.datasets,
            self.weights,
        )
        .ok()?;
        r.iter().all(|v| v.is_finite()).then(|| DVector::from_vec(r))
    }

    /// Central-difference Jacobian of the residuals in scaled parameters.
    fn jacobian(&self, z: &[f64], m: usize, h_rel: f64) -> Option<DMatrix<f64>> {
        let mut jac = DMatrix::zeros(m, z.len());
        for j in 0..z.len() {
            let h = h_rel * z[j].abs().max(1.0);
            let mut zp = z.to_vec();
            let mut zm = z.to_vec();
            zp[j] += h;
            zm[j] -= h;
            let col = (self.residuals(&zp)? - self.residuals(&zm)?) / (2.0 * h);
            jac.set_column(j, &col);
        }
        Some(jac)
    }
}

fn scale_of(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|v| if v.abs() > 1e-12 { v.abs() } else { 1.0 })
        .collect()
}

/// Gradient of the output-error cost with respect to the unscaled parameters,
/// computed the way the estimator does it: `2 Jᵀ r` with a central-difference
/// Jacobian.
pub fn cost_gradient(
    structure: Structure,
    theta: &[f64],
    consts: &PhysicalConstants,
    datasets: &[Dataset],
    weights: &ChannelWeights,
) -> Result<Vec<f64>, SysidError> {
    let prob = Problem {
        structure,
        consts,
        datasets,
        weights,
        scale: scale_of(theta),
    };
    let z: Vec<f64> = theta.iter().zip(&prob.scale).map(|(t, s)| t / s).collect();
    let bad = || SysidError::Invalid("simulation failed".into());
    let r = prob.residuals(&z).ok_or_else(bad)?;
    let jac = prob
        .jacobian(&z, r.len(), EstimateOptions::default().fd_step)
        .ok_or_else(bad)?;
    let g = jac.transpose() * r * 2.0;
    Ok(g.iter().zip(&prob.scale).map(|(g, s)| g / s).collect())
}

fn named(structure: Structure, v: &[f64]) -> BTreeMap<String, f64> {
    structure
        .parameter_names()
        .iter()
        .zip(v)
        .map(|(n, x)| (n.to_string(), *x))
        .collect()
}

/// Levenberg-Marquardt output-error estimation of one structure.
///
/// Only the structure's own parameter block of `initial` is read; its
/// physical constants are used by the open-loop structure.
pub fn estimate(
    structure: Structure,
    initial: &ModelParams,
    datasets: &[Dataset],
    weights: &ChannelWeights,
    opts: &EstimateOptions,
) -> Result<FitReport, SysidError> {
    if datasets.is_empty() {
        return Err(SysidError::Invalid("no training data".into()));
    }
    let theta0 = structure.extract(initial);
    let consts = &initial.constants;
    let prob = Problem {
        structure,
        consts,
        datasets,
        weights,
        scale: scale_of(&theta0),
    };
    let n = theta0.len();
    let mut z: Vec<f64> = theta0.iter().zip(&prob.scale).map(|(t, s)| t / s).collect();

    let Some(mut r) = prob.residuals(&z) else {
        return Ok(FitReport {
            structure,
            converged: false,
            failed: true,
            termination: Termination::Diverged,
            iterations: 0,
            initial_cost: f64::INFINITY,
            cost: f64::INFINITY,
            residual_count: 0,
            residual_variance: f64::NAN,
            covariance: vec![vec![f64::NAN; n]; n],
            parameters: named(structure, &theta0),
            initial: named(structure, &theta0),
            std_dev: named(structure, &vec![f64::NAN; n]),
            rmse: BTreeMap::new(),
        });
    };
    let m = r.len();
    let initial_cost = r.norm_squared();
    let mut cost = initial_cost;
    let mut lambda = opts.lambda_init;
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;
    let mut jac = prob
        .jacobian(&z, m, opts.fd_step)
        .ok_or_else(|| SysidError::Invalid("simulation failed near the initial point".into()))?;

    loop {
        let g = jac.transpose() * &r * 2.0;
        if g.amax() < opts.gradient_tol {
            termination = Termination::Gradient;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let rhs = -(&g * 0.5);
        let mut accepted = None;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for i in 0..n {
                let d = jtj[(i, i)];
                a[(i, i)] += lambda * if d > 0.0 { d } else { 1.0 };
            }
            if let Some(chol) = a.cholesky() {
                let step = chol.solve(&rhs);
                let z_new: Vec<f64> = z.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                if let Some(r_new) = prob.residuals(&z_new) {
                    let c_new = r_new.norm_squared();
                    if c_new < cost {
                        accepted = Some((z_new, r_new, c_new, step.norm()));
                        lambda = (lambda / 10.0).max(1e-12);
                        break;
                    }
                }
            }
            lambda *= 10.0;
        }
        let Some((z_new, r_new, c_new, step_norm)) = accepted else {
            termination = Termination::NoProgress;
            break;
        };
        let z_norm = z_new.iter().map(|v| v * v).sum::<f64>().sqrt();
        z = z_new;
        r = r_new;
        cost = c_new;
        if step_norm <= opts.step_tol * (1.0 + z_norm) {
            termination = Termination::Step;
            break;
        }
        match prob.jacobian(&z, m, opts.fd_step) {
            Some(j) => jac = j,
            None => {
                termination = Termination::NoProgress;
                break;
            }
        }
    }

    let theta = prob.unscale(&z);
    let dof = m.saturating_sub(n).max(1) as f64;
    let variance = cost / dof;
    let jtj = jac.transpose() * &jac;
    let cov_z = jtj
        .clone()
        .try_inverse()
        .unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
    let covariance: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| variance * cov_z[(i, j)] * prob.scale[i] * prob.scale[j])
                .collect()
        })
        .collect();
    let std: Vec<f64> = (0..n).map(|i| covariance[i][i].max(0.0).sqrt()).collect();

    let channels = structure.output_channels();
    let mut sums = vec![0.0; channels.len()];
    let mut count = 0usize;
    for ds in datasets {
        let pred = simulate_structure(structure, &theta, consts, ds)?;
        for (i, c) in channels.iter().enumerate() {
            let y = ds.require(c)?;
            sums[i] += pred[i].iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        count += ds.len();
    }
    let rmse = channels
        .iter()
        .zip(&sums)
        .map(|(c, s)| (c.to_string(), (s / count as f64).sqrt()))
        .collect();

    Ok(FitReport {
        structure,
        converged: matches!(
            termination,
            Termination::Gradient | Termination::Step | Termination::NoProgress
        ),
        failed: false,
        termination,
        iterations,
        initial_cost,
        cost,
        residual_count: m,
        residual_variance: variance,
        covariance,
        parameters: named(structure, &theta),
        initial: named(structure, &theta0),
        std_dev: named(structure, &std),
        rmse,
    })
}
