//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use fwnmpc::guidance::GuidanceConfig;
use fwnmpc::model::{rk4_step, AircraftState, ControlInput, ModelParams, WindVector};
use fwnmpc::nmpc::shooting::{interval_jacobians, ShootingModel};
use fwnmpc::nmpc::{AircraftOcp, OcpConfig, References, Weights};
use fwnmpc::path::{PathSegment, SwitchConfig, SwitchState, Vec3};
use rand::Rng;
use std::f64::consts::{FRAC_PI_2, TAU};

/// Random state and control inside the flight envelope.
pub fn envelope_sample<R: Rng>(rng: &mut R) -> (AircraftState, ControlInput) {
    let d = f64::to_radians;
    let gamma = rng.gen_range(d(-8.0)..d(8.0));
    let alpha = rng.gen_range(d(-2.0)..d(7.0));
    let state = AircraftState {
        n: rng.gen_range(-200.0..200.0),
        e: rng.gen_range(-200.0..200.0),
        d: rng.gen_range(-120.0..-20.0),
        v_a: rng.gen_range(11.0..18.0),
        gamma,
        xi: rng.gen_range(-3.1..3.1),
        phi: rng.gen_range(-0.5..0.5),
        theta: gamma + alpha,
        p: rng.gen_range(-0.5..0.5),
        q: rng.gen_range(-0.3..0.3),
        r: rng.gen_range(-0.3..0.3),
        delta_t: rng.gen_range(0.1..0.9),
    };
    let u = ControlInput::new(
        rng.gen_range(0.0..1.0),
        rng.gen_range(-0.5..0.5),
        rng.gen_range(-0.25..0.25),
    );
    (state, u)
}

pub fn with_ocp<T>(segments: &[PathSegment], f: impl FnOnce(&AircraftOcp) -> T) -> T {
    let params = ModelParams::default();
    let ocp = AircraftOcp {
        params,
        wind: WindVector::new(1.0, -2.0, 0.0),
        segments,
        switch_start: SwitchState::default(),
        leg_anchor: None,
        switch_cfg: SwitchConfig::default(),
        guidance: GuidanceConfig::default(),
        ocp: OcpConfig::default(),
        weights: Weights::default(),
        refs: References::from_trim(&params, 13.5).unwrap(),
    };
    f(&ocp)
}

/// Largest deviation of the solver's interval sensitivities from central
/// differences, relative to the largest entry (floored at 1).
pub fn jacobian_deviation(ocp: &AircraftOcp, x: &AircraftState, u: &ControlInput) -> f64 {
    let xa = x.to_array();
    let ua = u.to_array();
    let (a, b) = interval_jacobians(ocp, &xa, &ua, 1.5e-8).unwrap();
    let h = 1e-5;
    let central = |dx: &[f64], du: &[f64]| -> Vec<f64> {
        let xp: Vec<f64> = xa.iter().zip(dx).map(|(v, d)| v + d).collect();
        let xm: Vec<f64> = xa.iter().zip(dx).map(|(v, d)| v - d).collect();
        let up: Vec<f64> = ua.iter().zip(du).map(|(v, d)| v + d).collect();
        let um: Vec<f64> = ua.iter().zip(du).map(|(v, d)| v - d).collect();
        let fp = ocp.step(&xp, &up).unwrap();
        let fm = ocp.step(&xm, &um).unwrap();
        ocp.state_diff(&fp, &fm)
    };
    let nx = xa.len();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for i in 0..nx + ua.len() {
        let mut dx = vec![0.0; nx];
        let mut du = vec![0.0; ua.len()];
        let step = if i < nx {
            let s = h * xa[i].abs().max(1.0);
            dx[i] = s;
            s
        } else {
            let s = h * ua[i - nx].abs().max(1.0);
            du[i - nx] = s;
            s
        };
        let col = central(&dx, &du);
        for r in 0..nx {
            let cd = col[r] / (2.0 * step);
            let fd = if i < nx { a[(r, i)] } else { b[(r, i - nx)] };
            worst = worst.max((fd - cd).abs());
            scale = scale.max(cd.abs());
        }
    }
    worst / scale
}

/// Observed order of the plant integrator from three step halvings on a
/// 5 s turning climb, at steps around the plant rate where the error is in
/// its asymptotic regime.
pub fn rk4_observed_order() -> f64 {
    let params = ModelParams::default();
    let x0 = AircraftState {
        v_a: 13.5,
        theta: 0.04,
        delta_t: 0.45,
        ..Default::default()
    };
    let u = ControlInput::new(0.7, 0.35, 0.08);
    let fly = |dt: f64| -> [f64; 12] {
        let steps = (5.0 / dt).round() as usize;
        let mut x = x0;
        for _ in 0..steps {
            x = rk4_step(&x, &u, &WindVector::calm(), &params, dt).unwrap();
        }
        x.to_array()
    };
    let (a, b, c) = (fly(0.025), fly(0.0125), fly(0.00625));
    let norm = |p: &[f64; 12], q: &[f64; 12]| {
        p.iter()
            .zip(q)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    (norm(&a, &b) / norm(&b, &c)).log2()
}

/// Minimizer inside `[lo, hi]`: bisection on the sign change of `slope` when
/// the bracket contains one, golden-section search on `f` otherwise.
pub fn refine_min(f: impl Fn(f64) -> f64, slope: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    if !(slope(lo) < 0.0 && slope(hi) > 0.0) {
        return golden_min(f, lo, hi);
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if slope(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if f(m1) < f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    0.5 * (lo + hi)
}

/// Closest point on a helix arc found by walking the curve backwards from its
/// exit point: grid plus golden-section search for the horizontal distance on
/// every leg, then the leg whose altitude is nearest. At least `legs` legs
/// either side of the exit are searched, more when the query point is further
/// away in altitude.
pub fn brute_force_arc_point(seg: &PathSegment, r: &Vec3, legs: i32) -> Vec3 {
    let PathSegment::Arc {
        c,
        r_signed,
        chi_p,
        gamma_p,
    } = *seg
    else {
        panic!("arc expected");
    };
    let radius = r_signed.abs();
    let sigma = r_signed.signum();
    let exit_angle = chi_p - sigma * FRAC_PI_2;
    let point = |s: f64| -> Vec3 {
        // s is the angle still to travel before the exit
        let beta = exit_angle - sigma * s;
        Vec3::new(
            c.x + radius * beta.cos(),
            c.y + radius * beta.sin(),
            c.z + s * radius * gamma_p.tan(),
        )
    };
    let horiz = |s: f64| {
        let p = point(s);
        (p.x - r.x).hypot(p.y - r.y)
    };
    // derivative of half the squared horizontal distance
    let slope = |s: f64| {
        let beta = exit_angle - sigma * s;
        let p = point(s);
        (p.x - r.x) * sigma * radius * beta.sin() - (p.y - r.y) * sigma * radius * beta.cos()
    };
    let leg_height = (TAU * radius * gamma_p.tan()).abs();
    let legs = if leg_height > 0.0 {
        legs.max(((r.z - c.z).abs() / leg_height).ceil() as i32 + 2)
    } else {
        legs
    };
    let mut best: Option<Vec3> = None;
    for k in -legs..legs {
        let lo = TAU * k as f64;
        let grid = 720;
        let (mut s_best, mut d_best) = (lo, f64::INFINITY);
        for i in 0..=grid {
            let s = lo + TAU * i as f64 / grid as f64;
            let d = horiz(s);
            if d < d_best {
                d_best = d;
                s_best = s;
            }
        }
        let step = TAU / grid as f64;
        let s = refine_min(horiz, slope, s_best - step, s_best + step);
        let p = point(s);
        if best.is_none_or(|b: Vec3| (p.z - r.z).abs() < (b.z - r.z).abs()) {
            best = Some(p);
        }
    }
    best.unwrap()
}
