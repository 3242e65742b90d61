//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use fwnmpc::guidance::track_error_bound;
use fwnmpc::model::ModelParams;
use fwnmpc::nmpc::{alpha_soft, OcpConfig};
use fwnmpc::path::{closest_point, CourseBuilder, LegSelection, PathSegment, Vec3};
use fwnmpc::sim::{
    builtin_scenario, error_stats, run, settled_error_stats, timing_stats, write_csv, EventKind,
    Scenario, SimLog, BUILTIN_SCENARIOS,
};
use fwnmpc::sysid::{
    fit_both, fly_maneuver, fly_suite, freeform_spec, noisy_flight, perturb, replay,
    split_train_validation, standard_suite, structure_data, validate, EstimateOptions, NoiseTable,
    Structure,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Runs {
    logs: BTreeMap<String, (Scenario, SimLog, f64)>,
}

impl Runs {
    fn new() -> Self {
        let mut logs = BTreeMap::new();
        for name in BUILTIN_SCENARIOS {
            let s = builtin_scenario(name).unwrap();
            let t0 = Instant::now();
            let log = run(&s).unwrap();
            logs.insert(name.to_string(), (s, log, t0.elapsed().as_secs_f64()));
        }
        Runs { logs }
    }

    fn get(&self, name: &str) -> &(Scenario, SimLog, f64) {
        &self.logs[name]
    }
}

fn criterion_1(runs: &Runs) -> Outcome {
    let (s, log, wall) = runs.get("helix");
    let st = settled_error_stats(log, s.v_a_ref).ok_or("no settled samples")?;
    check(
        log.completed()
            && s.ocp.n == 70
            && st.max_abs_e_lat <= 2.0
            && st.max_abs_e_lon <= 0.5
            && st.rmse_v_a <= 0.5
            && *wall < 60.0,
        format!(
            "helix: max|e_lat| {:.3} m, max|e_lon| {:.3} m, v_A RMSE {:.3} m/s, wall {:.1} s",
            st.max_abs_e_lat, st.max_abs_e_lon, st.rmse_v_a, wall
        ),
    )
}

fn criterion_2(runs: &Runs) -> Outcome {
    let (s, log, _) = runs.get("dubins-wind");
    let wind = s.wind.w_n.hypot(s.wind.w_e);
    // straight legs while the aircraft has not yet reached the terminal point
    let on_line = |r: &fwnmpc::sim::LogRecord| {
        s.path[r.segment].is_line() && r.x_sw == 0.0 && !r.switch_met
    };
    let st = error_stats(log, s.settle_time, s.v_a_ref, on_line).ok_or("no line samples")?;
    let last = s.path.len() - 1;
    let mut ordered = log.transitions.len() == last;
    let mut by_conditions = true;
    for (i, tr) in log.transitions.iter().enumerate() {
        ordered &= tr.from == i && tr.to == i + 1;
        let window = 1.0 / s.switching.rho_sw + 2.0 * s.plant_dt;
        by_conditions &= log
            .records
            .iter()
            .any(|r| r.segment == tr.from && r.switch_met && r.t > tr.t - window && r.t < tr.t);
    }
    check(
        log.completed() && (wind - 5.0).abs() < 1e-9 && st.max_abs_e_lat <= 1.0 && ordered && by_conditions,
        format!(
            "dubins, {wind} m/s wind: straight max|e_lat| {:.3} m over {} samples, {} of {} transitions in order, all via terminal conditions: {}",
            st.max_abs_e_lat,
            st.samples,
            log.transitions.len(),
            last,
            by_conditions
        ),
    )
}

fn criterion_3(runs: &Runs) -> Outcome {
    let (s, log, _) = runs.get("motor-failure");
    let fail = s.events.iter().find(|e| e.kind == EventKind::MotorFailure).unwrap().time;
    let restore = s.events.iter().find(|e| e.kind == EventKind::MotorRestore).unwrap().time;
    let during = log
        .records
        .iter()
        .filter(|r| r.motor_failed)
        .map(|r| r.guidance.e_lat.abs())
        .fold(0.0, f64::max);
    let lo = s.ocp.alpha_minus - s.ocp.delta_alpha;
    let hi = s.ocp.alpha_plus + s.ocp.delta_alpha;
    let (a_min, a_max) = log
        .records
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), r| (a.min(r.alpha), b.max(r.alpha)));
    let recovery = |from: f64, until: f64| -> f64 {
        let window: Vec<_> = log.records.iter().filter(|r| r.t >= from && r.t < until).collect();
        let last_out = window
            .iter()
            .rev()
            .find(|r| (r.state.v_a - s.v_a_ref).abs() > 1.0)
            .map_or(from, |r| r.t + s.plant_dt);
        last_out - from
    };
    let rec_fail = recovery(fail, restore);
    let rec_restore = recovery(restore, s.duration + 1.0);
    check(
        log.completed()
            && s.ocp.n == 40
            && (s.ocp.t_iter - 0.05).abs() < 1e-12
            && during <= 1.0
            && a_min >= lo
            && a_max <= hi
            && rec_fail <= 10.0
            && rec_restore <= 10.0,
        format!(
            "motor failure: max|e_lat| during failure {:.3} m, alpha in [{:.2}, {:.2}] deg, airspeed within 1 m/s after {:.2} s (failure) and {:.2} s (restore)",
            during,
            a_min.to_degrees(),
            a_max.to_degrees(),
            rec_fail,
            rec_restore
        ),
    )
}

fn criterion_4(runs: &Runs) -> Outcome {
    let mean = |name: &str| {
        let (s, log, _) = runs.get(name);
        (s.ocp.n, timing_stats(log, false).unwrap().mean_ms)
    };
    let (n70, t70) = mean("helix");
    let (n40, t40) = mean("motor-failure");
    check(
        n70 == 70 && n40 == 40 && t70 < 100.0 && t40 < 50.0,
        format!("mean controller step: N={n70} {t70:.2} ms, N={n40} {t40:.2} ms"),
    )
}

fn criterion_5() -> Outcome {
    let truth = ModelParams::default();
    let specs = standard_suite();
    let flights = fly_suite(&truth, &specs).map_err(|e| e.to_string())?;
    let (train, held_out) = split_train_validation(flights, 0.7, 11);
    let opts = EstimateOptions::default();
    let noise = NoiseTable::default();
    let perturbed = |seed: u64| -> ModelParams {
        let mut p = truth;
        for s in [Structure::ClosedLoop, Structure::OpenLoop] {
            p = s.apply(&p, &perturb(&s.extract(&truth), 0.2, seed));
        }
        p
    };
    let rel_err = |name: &str, v: f64, s: Structure| -> f64 {
        let i = s.parameter_names().iter().position(|n| *n == name).unwrap();
        let t = s.extract(&truth)[i];
        ((v - t) / t).abs()
    };
    let data = |s: Structure, noise: Option<&NoiseTable>, seed: u64| {
        structure_data(s, &truth, &train, noise, seed).unwrap()
    };

    // noiseless recovery
    let (cl0, ol0) = (
        data(Structure::ClosedLoop, None, 0),
        data(Structure::OpenLoop, None, 0),
    );
    let fit = fit_both(&perturbed(1), &cl0, &ol0, &noise, &opts).map_err(|e| e.to_string())?;
    let mut worst_clean: f64 = 0.0;
    for r in [&fit.closed_loop, &fit.open_loop] {
        for (n, v) in &r.parameters {
            worst_clean = worst_clean.max(rel_err(n, *v, r.structure));
        }
    }

    // noisy recovery over ten seeds
    let mut worst_noisy: f64 = 0.0;
    let mut identified = BTreeMap::<String, usize>::new();
    let mut first_fit = None;
    for seed in 0..10u64 {
        let cl = data(Structure::ClosedLoop, Some(&noise), 1000 + 100 * seed);
        let ol = data(Structure::OpenLoop, Some(&noise), 5000 + 100 * seed);
        let fit = fit_both(&perturbed(100 + seed), &cl, &ol, &noise, &opts)
            .map_err(|e| e.to_string())?;
        for r in [&fit.closed_loop, &fit.open_loop] {
            if !r.converged {
                return Err(format!("noisy fit did not converge for seed {seed}"));
            }
            for (n, v) in &r.parameters {
                // identifiable: three standard deviations inside the 5 % band
                if r.relative_std(n).is_some_and(|s| 3.0 * s <= 0.05) {
                    worst_noisy = worst_noisy.max(rel_err(n, *v, r.structure));
                    *identified.entry(n.clone()).or_default() += 1;
                }
            }
        }
        if first_fit.is_none() {
            first_fit = Some(fit);
        }
    }
    let fit = first_fit.unwrap();

    // held-out validation and 60 s replay of the combined model
    let cl_val = structure_data(Structure::ClosedLoop, &truth, &held_out, Some(&noise), 9000)
        .map_err(|e| e.to_string())?;
    let val = validate(&fit.closed_loop, &truth.constants, &cl_val).map_err(|e| e.to_string())?;
    let val_ok = val
        .rmse
        .iter()
        .all(|(c, e)| *e <= 1.5 * noise.sigma(c).unwrap());
    let flight = fly_maneuver(&truth, &freeform_spec(62.0, 77)).map_err(|e| e.to_string())?;
    let logged = noisy_flight(&flight, &noise, 78).map_err(|e| e.to_string())?;
    let rep = replay(&fit.params, &logged).map_err(|e| e.to_string())?;
    let bounded = rep.completed
        && rep.duration >= 60.0
        && rep
            .rmse
            .iter()
            .all(|(c, e)| *e <= 1.5 * noise.sigma(c).unwrap());
    let ids: Vec<String> = identified.iter().map(|(k, v)| format!("{k}:{v}")).collect();
    check(
        worst_clean <= 1e-3 && worst_noisy <= 0.05 && !identified.is_empty() && val_ok && bounded,
        format!(
            "sysid: noiseless max rel err {:.2e}, noisy max rel err {:.2}% over identifiable [{}], validation within 1.5 sigma: {}, replay {:.1} s bounded: {} (v_A RMSE {:.3} m/s, phi RMSE {:.2} deg)",
            worst_clean,
            100.0 * worst_noisy,
            ids.join(" "),
            val_ok,
            rep.duration,
            bounded,
            rep.rmse["v_a"],
            rep.rmse["phi"].to_degrees()
        ),
    )
}

fn criterion_6(runs: &Runs) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let order = common::rk4_observed_order();

    let path = CourseBuilder::new(Vec3::new(0.0, 0.0, -50.0), 0.0)
        .line(0.0, 300.0)
        .build();
    let jac = common::with_ocp(&path, |ocp| {
        (0..100)
            .map(|_| {
                let (x, u) = common::envelope_sample(&mut rng);
                common::jacobian_deviation(ocp, &x, &u)
            })
            .fold(0.0, f64::max)
    });

    let mut gn_ok = true;
    let mut bounds_ok = true;
    let mut iterations = 0;
    for name in ["helix", "dubins-wind", "motor-failure"] {
        let (s, log, _) = runs.get(name);
        let (lo, hi) = s.ocp.control_bounds();
        for (_, sv) in log.solver_records() {
            for it in &sv.iterations {
                iterations += 1;
                gn_ok &= it.objective_after <= it.objective_before;
            }
        }
        for r in &log.records {
            let u = r.control.to_array();
            bounds_ok &= (0..3).all(|i| u[i] >= lo[i] && u[i] <= hi[i]);
        }
    }

    let t_b = 1.7;
    let below = track_error_bound(1.0 - 1e-12, t_b);
    let e_b_ok = track_error_bound(1.0, t_b) == t_b
        && (below - t_b).abs() < 1e-11
        && track_error_bound(1.0 + 1e-12, t_b) - t_b < 1e-11;

    let cfg = OcpConfig::default();
    let soft_ok = (alpha_soft(cfg.alpha_plus, &cfg) - 1.0).abs() < 1e-12
        && (alpha_soft(cfg.alpha_minus, &cfg) - 1.0).abs() < 1e-12
        && [
            cfg.alpha_plus - cfg.delta_alpha,
            cfg.alpha_minus + cfg.delta_alpha,
            cfg.alpha_plus,
            cfg.alpha_minus,
        ]
        .iter()
        .all(|&a| (alpha_soft(a + 1e-9, &cfg) - alpha_soft(a - 1e-9, &cfg)).abs() < 1e-6);

    let mut cp_err: f64 = 0.0;
    let sign = |rng: &mut ChaCha8Rng| if rng.gen::<bool>() { 1.0 } else { -1.0 };
    for i in 0..1000 {
        let r_signed = rng.gen_range(20.0..120.0) * sign(&mut rng);
        // every tenth arc is flat, the rest climb or descend at 0.5 to 14 deg
        let gamma_p = if i % 10 == 0 {
            0.0
        } else {
            rng.gen_range(0.01..0.25) * sign(&mut rng)
        };
        let c = Vec3::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), -60.0);
        let seg = PathSegment::Arc {
            c,
            r_signed,
            chi_p: rng.gen_range(-3.1..3.1),
            gamma_p,
        };
        let angle: f64 = rng.gen_range(-3.2..3.2);
        let dist = r_signed.abs() * rng.gen_range(0.3..1.7);
        let r = Vec3::new(
            c.x + dist * angle.cos(),
            c.y + dist * angle.sin(),
            rng.gen_range(-200.0..80.0),
        );
        let got = closest_point(&seg, &r, LegSelection::Nearest).p;
        let want = common::brute_force_arc_point(&seg, &r, 2);
        cp_err = cp_err.max((got - want).norm());
    }

    check(
        (3.8..=4.2).contains(&order)
            && jac <= 1e-4
            && gn_ok
            && bounds_ok
            && e_b_ok
            && soft_ok
            && cp_err <= 1e-6,
        format!(
            "RK4 order {order:.3}; Jacobian deviation {jac:.2e}; objective non-increasing on {iterations} iterations: {gn_ok}; controls in bounds: {bounds_ok}; e_b continuity: {e_b_ok}; alpha_soft: {soft_ok}; closest point max error {cp_err:.2e} m"
        ),
    )
}

fn csv_bytes(log: &SimLog) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(log, &mut buf, false).unwrap();
    buf
}

fn criterion_7(runs: &Runs) -> Outcome {
    let first: BTreeMap<&str, Vec<u8>> = BUILTIN_SCENARIOS
        .iter()
        .map(|n| (*n, csv_bytes(&runs.get(n).1)))
        .collect();
    // second pass: every scenario on its own thread, concurrently
    let second: BTreeMap<&str, Vec<u8>> = std::thread::scope(|scope| {
        let handles: Vec<_> = BUILTIN_SCENARIOS
            .iter()
            .map(|n| {
                let s = runs.get(n).0.clone();
                (*n, scope.spawn(move || csv_bytes(&run(&s).unwrap())))
            })
            .collect();
        handles
            .into_iter()
            .map(|(n, h)| (n, h.join().unwrap()))
            .collect()
    });
    // third pass on a single worker thread, in reverse order
    let third: BTreeMap<&str, Vec<u8>> = std::thread::spawn(|| {
        BUILTIN_SCENARIOS
            .iter()
            .rev()
            .map(|n| (*n, csv_bytes(&run(&builtin_scenario(n).unwrap()).unwrap())))
            .collect()
    })
    .join()
    .unwrap();
    let differing: Vec<&str> = BUILTIN_SCENARIOS
        .iter()
        .copied()
        .filter(|n| first[n] != second[n] || first[n] != third[n])
        .collect();
    let bytes: usize = first.values().map(Vec::len).sum();
    check(
        differing.is_empty(),
        format!(
            "{} scenarios, {} CSV bytes, identical across sequential, concurrent and single-worker runs; differing: {:?}",
            BUILTIN_SCENARIOS.len(),
            bytes,
            differing
        ),
    )
}

fn report(n: usize, advisory: bool, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let note = if advisory { " (advisory)" } else { "" };
    match outcome {
        Ok(detail) => {
            println!("PASS criterion {n}{note}: {detail}");
            true
        }
        Err(detail) => {
            println!("FAIL criterion {n}{note}: {detail}");
            advisory
        }
    }
}

fn main() {
    let runs = Runs::new();
    let mut ok = true;
    ok &= report(1, false, || criterion_1(&runs));
    ok &= report(2, false, || criterion_2(&runs));
    ok &= report(3, false, || criterion_3(&runs));
    ok &= report(4, true, || criterion_4(&runs));
    ok &= report(5, false, criterion_5);
    ok &= report(6, false, || criterion_6(&runs));
    ok &= report(7, false, || criterion_7(&runs));
    if !ok {
        std::process::exit(1);
    }
}
