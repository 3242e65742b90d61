//! Initial guess of the thrust, lift and drag polynomials from quasi-static
//! samples.
//!
//! Undoing the body-axis rotation of the measured accelerations gives the
//! specific forces along and normal to the air-relative velocity:
//!
//! ```text
//! m f_x = P(δ)/v − q̄S C_D(α)
//! m f_z = P(δ) tan α / v + q̄S C_L(α)
//! ```
//!
//! Both are linear in the nine polynomial coefficients, so one joint linear
//! least-squares problem recovers all of them.

use super::dataset::Dataset;
use super::SysidError;
use crate::model::{OpenLoopParams, PhysicalConstants};
use nalgebra::{DMatrix, DVector};

/// Body-rate threshold for quasi-static samples (rad/s).
pub const RATE_THRESHOLD: f64 = 1.0 * std::f64::consts::PI / 180.0;

const RANK_TOL: f64 = 1e-9;

/// Fitted coefficients, ordered as in [`OpenLoopParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticFit {
    pub c_t: [f64; 3],
    pub c_d: [f64; 3],
    pub c_l: [f64; 3],
    /// Samples that passed the rate filter.
    pub samples_used: usize,
    /// Root-mean-square force-equation residual (m/s²).
    pub rms_residual: f64,
}

impl StaticFit {
    /// `base` with the nine fitted coefficients substituted; τ_T is kept.
    pub fn apply(&self, base: &OpenLoopParams) -> OpenLoopParams {
        OpenLoopParams {
            c_t1: self.c_t[0],
            c_t2: self.c_t[1],
            c_t3: self.c_t[2],
            c_d0: self.c_d[0],
            c_dalpha: self.c_d[1],
            c_dalpha2: self.c_d[2],
            c_l0: self.c_l[0],
            c_lalpha: self.c_l[1],
            c_lalpha2: self.c_l[2],
            ..*base
        }
    }
}

pub fn fit_static_curves(
    datasets: &[Dataset],
    consts: &PhysicalConstants,
) -> Result<StaticFit, SysidError> {
    let mut rows: Vec<[f64; 9]> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for ds in datasets {
        let ch = |n: &str| ds.require(n);
        let (v, gamma, theta) = (ch("v_a")?, ch("gamma")?, ch("theta")?);
        let (p, q, r) = (ch("p")?, ch("q")?, ch("r")?);
        let (ax, az) = (ch("a_x")?, ch("a_z")?);
        let delta = match ds.channel("delta_t") {
            Some(d) => d,
            None => ch("u_t")?,
        };
        for k in 0..ds.len() {
            if p[k].abs() >= RATE_THRESHOLD
                || q[k].abs() >= RATE_THRESHOLD
                || r[k].abs() >= RATE_THRESHOLD
            {
                continue;
            }
            let alpha = theta[k] - gamma[k];
            let (s, c) = alpha.sin_cos();
            let fx = c * ax[k] + s * az[k];
            let fz = s * ax[k] - c * az[k];
            let qs = consts.qbar_s(v[k]) / consts.m;
            let d = delta[k];
            let pw = [d / v[k], d * d / v[k], d * d * d / v[k]].map(|x| x / consts.m);
            let poly = [1.0, alpha, alpha * alpha];
            rows.push([
                pw[0],
                pw[1],
                pw[2],
                -qs * poly[0],
                -qs * poly[1],
                -qs * poly[2],
                0.0,
                0.0,
                0.0,
            ]);
            rhs.push(fx);
            let t = alpha.tan();
            rows.push([
                pw[0] * t,
                pw[1] * t,
                pw[2] * t,
                0.0,
                0.0,
                0.0,
                qs * poly[0],
                qs * poly[1],
                qs * poly[2],
            ]);
            rhs.push(fz);
        }
    }
    let samples_used = rows.len() / 2;
    if samples_used < 5 {
        return Err(SysidError::TooFewSamples(samples_used));
    }
    let mut a = DMatrix::from_fn(rows.len(), 9, |i, j| rows[i][j]);
    let b = DVector::from_vec(rhs);
    // column equilibration so the rank test is scale-free
    let norms: Vec<f64> = (0..9).map(|j| a.column(j).norm()).collect();
    for (j, n) in norms.iter().enumerate() {
        if *n > 0.0 {
            a.column_mut(j).scale_mut(1.0 / n);
        }
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > RANK_TOL * smax)
        .count();
    if rank < 9 {
        return Err(SysidError::RankDeficient { rank, cols: 9 });
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| SysidError::Invalid(e.to_string()))?;
    let coef: Vec<f64> = (0..9)
        .map(|j| if norms[j] > 0.0 { x[j] / norms[j] } else { 0.0 })
        .collect();
    let res = &a * &x - &b;
    Ok(StaticFit {
        c_t: [coef[0], coef[1], coef[2]],
        c_d: [coef[3], coef[4], coef[5]],
        c_l: [coef[6], coef[7], coef[8]],
        samples_used,
        rms_residual: (res.norm_squared() / b.len() as f64).sqrt(),
    })
}
