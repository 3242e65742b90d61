use super::run::{LogRecord, SimLog};
use super::scenario::EventKind;
use crate::Error;
use serde::Serialize;
use std::io::Write;

/// Tracking statistics over a window of the log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorStats {
    pub samples: usize,
    pub max_abs_e_lat: f64,
    pub max_abs_e_lon: f64,
    pub rms_e_lat: f64,
    pub rms_e_lon: f64,
    /// RMSE of the airspeed against `v_ref`.
    pub rmse_v_a: f64,
}

/// Statistics over records with `t >= from` that satisfy `keep`.
pub fn error_stats<F>(log: &SimLog, from: f64, v_ref: f64, keep: F) -> Option<ErrorStats>
where
    F: Fn(&LogRecord) -> bool,
{
    let mut s = ErrorStats {
        samples: 0,
        max_abs_e_lat: 0.0,
        max_abs_e_lon: 0.0,
        rms_e_lat: 0.0,
        rms_e_lon: 0.0,
        rmse_v_a: 0.0,
    };
    for r in log.records.iter().filter(|r| r.t >= from - 1e-9 && keep(r)) {
        let g = &r.guidance;
        s.samples += 1;
        s.max_abs_e_lat = s.max_abs_e_lat.max(g.e_lat.abs());
        s.max_abs_e_lon = s.max_abs_e_lon.max(g.e_lon.abs());
        s.rms_e_lat += g.e_lat * g.e_lat;
        s.rms_e_lon += g.e_lon * g.e_lon;
        s.rmse_v_a += (r.state.v_a - v_ref).powi(2);
    }
    if s.samples == 0 {
        return None;
    }
    let n = s.samples as f64;
    s.rms_e_lat = (s.rms_e_lat / n).sqrt();
    s.rms_e_lon = (s.rms_e_lon / n).sqrt();
    s.rmse_v_a = (s.rmse_v_a / n).sqrt();
    Some(s)
}

/// Statistics after the scenario's settling time.
pub fn settled_error_stats(log: &SimLog, v_ref: f64) -> Option<ErrorStats> {
    error_stats(log, log.settle_time, v_ref, |_| true)
}

/// Controller wall-time distribution (milliseconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingStats {
    pub calls: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

/// Timing of warm-started calls; cold starts are excluded when `warm_only`.
pub fn timing_stats(log: &SimLog, warm_only: bool) -> Option<TimingStats> {
    let mut ms: Vec<f64> = log
        .solver_records()
        .filter(|(_, s)| !(warm_only && s.cold_start))
        .map(|(_, s)| s.wall_time.as_secs_f64() * 1e3)
        .collect();
    if ms.is_empty() {
        return None;
    }
    ms.sort_by(f64::total_cmp);
    Some(TimingStats {
        calls: ms.len(),
        mean_ms: ms.iter().sum::<f64>() / ms.len() as f64,
        p50_ms: percentile(&ms, 0.5),
        p95_ms: percentile(&ms, 0.95),
        p99_ms: percentile(&ms, 0.99),
        max_ms: ms[ms.len() - 1],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TimelineEntry {
    pub t: f64,
    pub what: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverSummary {
    pub calls: usize,
    pub cold_starts: usize,
    pub degraded: usize,
    pub max_alpha_soft: f64,
}

/// Summary written next to the CSV log.
#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub scenario: String,
    pub completed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub termination: Option<String>,
    pub simulated_time: f64,
    pub settle_time: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub settled: Option<ErrorStats>,
    pub solver: SolverSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingStats>,
    pub timeline: Vec<TimelineEntry>,
}

impl SimReport {
    /// Builds the report; wall-clock timing is only included when `timing` is set
    /// so that reports stay reproducible by default.
    pub fn new(log: &SimLog, v_ref: f64, timing: bool) -> Self {
        let mut timeline: Vec<TimelineEntry> = log
            .events
            .iter()
            .map(|e| TimelineEntry {
                t: e.t,
                what: match e.kind {
                    EventKind::MotorFailure => "motor failure".into(),
                    EventKind::MotorRestore => "motor restored".into(),
                },
            })
            .chain(log.transitions.iter().map(|tr| TimelineEntry {
                t: tr.t,
                what: format!("segment {} -> {}", tr.from, tr.to),
            }))
            .collect();
        timeline.sort_by(|a, b| a.t.total_cmp(&b.t));
        let solver = SolverSummary {
            calls: log.solver_records().count(),
            cold_starts: log.solver_records().filter(|(_, s)| s.cold_start).count(),
            degraded: log.solver_records().filter(|(_, s)| s.degraded).count(),
            max_alpha_soft: log.records.iter().map(|r| r.alpha_soft).fold(0.0, f64::max),
        };
        SimReport {
            scenario: log.scenario.clone(),
            completed: log.completed(),
            termination: log.terminated.clone(),
            simulated_time: log.records.last().map_or(0.0, |r| r.t),
            settle_time: log.settle_time,
            settled: settled_error_stats(log, v_ref),
            solver,
            timing: if timing { timing_stats(log, true) } else { None },
            timeline,
        }
    }

    pub fn to_toml(&self) -> Result<String, Error> {
        Ok(toml::to_string(self)?)
    }
}

/// Column names of the CSV log, without the optional wall-time column.
pub const CSV_HEADER: [&str; 40] = [
    "t",
    "n",
    "e",
    "d",
    "v_a",
    "gamma",
    "xi",
    "phi",
    "theta",
    "p",
    "q",
    "r",
    "delta_t",
    "u_t",
    "phi_ref",
    "theta_ref",
    "w_n",
    "w_e",
    "w_d",
    "segment",
    "x_sw",
    "switch_met",
    "e_lat",
    "e_lon",
    "eta_lat",
    "eta_lon",
    "alpha",
    "alpha_soft",
    "motor_failed",
    "solver_call",
    "cold_start",
    "degraded",
    "objective",
    "sqp_iterations",
    "qp_iterations",
    "qp_status",
    "qp_kkt",
    "active_set",
    "step_length",
    "step_norm",
];

/// Writes one CSV row per plant tick. Solver columns are empty between
/// controller calls. `wall_time` appends a `wall_time_ms` column, which makes
/// the output machine dependent.
pub fn write_csv<W: Write>(log: &SimLog, out: W, wall_time: bool) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = CSV_HEADER.to_vec();
    if wall_time {
        header.push("wall_time_ms");
    }
    w.write_record(&header)?;
    let b = |v: bool| if v { "1".to_string() } else { "0".to_string() };
    for r in &log.records {
        let s = &r.state;
        let g = &r.guidance;
        let mut row: Vec<String> = [
            r.t, s.n, s.e, s.d, s.v_a, s.gamma, s.xi, s.phi, s.theta, s.p, s.q, s.r, s.delta_t,
            r.control.u_t, r.control.phi_ref, r.control.theta_ref, r.wind.w_n, r.wind.w_e,
            r.wind.w_d,
        ]
        .iter()
        .map(|v| v.to_string())
        .collect();
        row.push(r.segment.to_string());
        row.push(r.x_sw.to_string());
        row.push(b(r.switch_met));
        for v in [g.e_lat, g.e_lon, g.eta_lat, g.eta_lon, r.alpha, r.alpha_soft] {
            row.push(v.to_string());
        }
        row.push(b(r.motor_failed));
        match &r.solver {
            Some(sv) => {
                row.push("1".into());
                row.push(b(sv.cold_start));
                row.push(b(sv.degraded));
                row.push(sv.objective.to_string());
                row.push(sv.iterations.len().to_string());
                match sv.last() {
                    Some(it) => {
                        row.push(it.qp_iterations.to_string());
                        row.push(format!("{:?}", it.qp_status));
                        row.push(it.qp_kkt.to_string());
                        row.push(it.active_count.to_string());
                        row.push(it.alpha.to_string());
                        row.push(it.step_norm.to_string());
                    }
                    None => row.extend(std::iter::repeat_n(String::new(), 6)),
                }
                if wall_time {
                    row.push((sv.wall_time.as_secs_f64() * 1e3).to_string());
                }
            }
            None => {
                row.push("0".into());
                let blanks = CSV_HEADER.len() - row.len() + usize::from(wall_time);
                row.extend(std::iter::repeat_n(String::new(), blanks));
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::Config(format!("csv flush failed: {e}")))?;
    Ok(())
}
