//! TOML scenario files.
//!
//! Angles are written in degrees with a `_deg` suffix; everything else is SI.
//! Most tables are optional and fall back to the nominal configuration. The
//! path is given either as builder legs from a start pose or as explicit
//! segments:
//!
//! ```toml
//! name = "square"
//! duration = 60.0
//! v_a_ref = 13.5
//!
//! [path]
//! start = [0.0, 0.0, -50.0]
//! course_deg = 0.0
//! legs = [
//!   { type = "line", length = 200.0, gamma_deg = 0.0 },
//!   { type = "arc", radius = 60.0, turn_deg = 90.0, gamma_deg = 0.0 },
//!   { type = "loiter", radius = 60.0 },
//! ]
//!
//! [wind]
//! w_n = 0.0
//! w_e = 3.0
//! w_d = 0.0
//! ```

use super::scenario::{Event, MeasurementNoise, Scenario, WindStep};
use crate::guidance::GuidanceConfig;
use crate::model::{trim_point, AircraftState, ModelParams, WindVector};
use crate::nmpc::{OcpConfig, Weights};
use crate::path::{CourseBuilder, PathSegment, SwitchConfig, Vec3};
use crate::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub duration: f64,
    #[serde(default = "default_plant_dt")]
    pub plant_dt: f64,
    #[serde(default)]
    pub settle_time: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_v_a_ref")]
    pub v_a_ref: f64,
    #[serde(default)]
    pub initial: InitialFile,
    #[serde(default)]
    pub wind: WindVector,
    #[serde(default)]
    pub wind_schedule: Vec<WindStep>,
    pub path: PathFile,
    #[serde(default)]
    pub plant: Option<ModelParams>,
    /// Prediction model; the plant parameters when absent.
    #[serde(default)]
    pub controller: Option<ModelParams>,
    #[serde(default)]
    pub ocp: OcpFile,
    #[serde(default)]
    pub weights: Option<Weights>,
    #[serde(default)]
    pub guidance: Option<GuidanceConfig>,
    #[serde(default)]
    pub switching: SwitchFile,
    #[serde(default)]
    pub events: Vec<Event>,
    #[serde(default)]
    pub measurement_noise: MeasurementNoise,
}

fn default_plant_dt() -> f64 {
    0.01
}

fn default_v_a_ref() -> f64 {
    13.5
}

/// Initial state. Missing position and heading come from the path start,
/// missing airspeed from `v_a_ref`, and missing pitch and throttle from the
/// level trim at that airspeed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialFile {
    pub n: Option<f64>,
    pub e: Option<f64>,
    pub d: Option<f64>,
    pub v_a: Option<f64>,
    pub gamma_deg: Option<f64>,
    pub xi_deg: Option<f64>,
    pub phi_deg: Option<f64>,
    pub theta_deg: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub r: Option<f64>,
    pub delta_t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathFile {
    pub start: Option<[f64; 3]>,
    pub course_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub legs: Vec<LegFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<SegmentFile>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LegFile {
    Line {
        length: f64,
        #[serde(default)]
        gamma_deg: f64,
    },
    Arc {
        /// Signed radius; positive turns clockwise seen from above.
        radius: f64,
        turn_deg: f64,
        #[serde(default)]
        gamma_deg: f64,
    },
    Loiter {
        radius: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SegmentFile {
    Line {
        b: [f64; 3],
        chi_deg: f64,
        gamma_deg: f64,
    },
    Arc {
        c: [f64; 3],
        radius: f64,
        chi_deg: f64,
        gamma_deg: f64,
    },
    Loiter {
        c: [f64; 3],
        radius: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcpFile {
    pub n: Option<usize>,
    pub t_step: Option<f64>,
    pub t_iter: Option<f64>,
    pub max_sqp_iter: Option<usize>,
    pub cold_start_iter: Option<usize>,
    pub u_t_min: Option<f64>,
    pub u_t_max: Option<f64>,
    pub phi_max_deg: Option<f64>,
    pub theta_max_deg: Option<f64>,
    pub alpha_minus_deg: Option<f64>,
    pub alpha_plus_deg: Option<f64>,
    pub delta_alpha_deg: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchFile {
    pub r_acpt: Option<f64>,
    pub eta_acpt_deg: Option<f64>,
    pub rho_sw: Option<f64>,
    pub sw_threshold: Option<f64>,
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn a3(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

impl OcpFile {
    fn resolve(&self) -> OcpConfig {
        let d = OcpConfig::default();
        let rad = |v: Option<f64>, fallback: f64| v.map_or(fallback, f64::to_radians);
        OcpConfig {
            n: self.n.unwrap_or(d.n),
            t_step: self.t_step.unwrap_or(d.t_step),
            t_iter: self.t_iter.unwrap_or(d.t_iter),
            max_sqp_iter: self.max_sqp_iter.unwrap_or(d.max_sqp_iter),
            cold_start_iter: self.cold_start_iter.unwrap_or(d.cold_start_iter),
            u_t_min: self.u_t_min.unwrap_or(d.u_t_min),
            u_t_max: self.u_t_max.unwrap_or(d.u_t_max),
            phi_max: rad(self.phi_max_deg, d.phi_max),
            theta_max: rad(self.theta_max_deg, d.theta_max),
            alpha_minus: rad(self.alpha_minus_deg, d.alpha_minus),
            alpha_plus: rad(self.alpha_plus_deg, d.alpha_plus),
            delta_alpha: rad(self.delta_alpha_deg, d.delta_alpha),
        }
    }

    fn from_config(c: &OcpConfig) -> Self {
        OcpFile {
            n: Some(c.n),
            t_step: Some(c.t_step),
            t_iter: Some(c.t_iter),
            max_sqp_iter: Some(c.max_sqp_iter),
            cold_start_iter: Some(c.cold_start_iter),
            u_t_min: Some(c.u_t_min),
            u_t_max: Some(c.u_t_max),
            phi_max_deg: Some(c.phi_max.to_degrees()),
            theta_max_deg: Some(c.theta_max.to_degrees()),
            alpha_minus_deg: Some(c.alpha_minus.to_degrees()),
            alpha_plus_deg: Some(c.alpha_plus.to_degrees()),
            delta_alpha_deg: Some(c.delta_alpha.to_degrees()),
        }
    }
}

impl SwitchFile {
    fn resolve(&self) -> SwitchConfig {
        let d = SwitchConfig::default();
        SwitchConfig {
            r_acpt: self.r_acpt.unwrap_or(d.r_acpt),
            eta_acpt: self.eta_acpt_deg.map_or(d.eta_acpt, f64::to_radians),
            rho_sw: self.rho_sw.unwrap_or(d.rho_sw),
            sw_threshold: self.sw_threshold.unwrap_or(d.sw_threshold),
        }
    }
}

impl PathFile {
    /// Segments plus the start pose, if one is defined.
    fn resolve(&self) -> Result<(Vec<PathSegment>, Option<(Vec3, f64)>), Error> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        match (self.legs.is_empty(), self.segments.is_empty()) {
            (false, false) => return bad("path takes either legs or segments, not both"),
            (true, true) => return bad("path is empty"),
            _ => {}
        }
        let start = match (self.start, self.course_deg) {
            (Some(p), Some(c)) => Some((v3(p), c.to_radians())),
            (None, None) => None,
            _ => return bad("path start and course_deg must be given together"),
        };
        if self.segments.is_empty() {
            let Some((p0, chi0)) = start else {
                return bad("legs need a start position and course_deg");
            };
            let mut b = CourseBuilder::new(p0, chi0);
            let last = self.legs.len() - 1;
            for (i, leg) in self.legs.iter().enumerate() {
                b = match *leg {
                    LegFile::Line { length, gamma_deg } => {
                        if !(length > 0.0 && length.is_finite()) {
                            return bad("line length must be positive");
                        }
                        b.line(gamma_deg.to_radians(), length)
                    }
                    LegFile::Arc {
                        radius,
                        turn_deg,
                        gamma_deg,
                    } => {
                        if !(turn_deg > 0.0 && turn_deg.is_finite()) {
                            return bad("arc turn_deg must be positive");
                        }
                        if !(radius != 0.0 && radius.is_finite()) {
                            return bad("arc radius must be nonzero");
                        }
                        b.arc(radius, gamma_deg.to_radians(), turn_deg.to_radians())
                    }
                    LegFile::Loiter { radius } => {
                        if i != last {
                            return bad("a loiter must be the last leg");
                        }
                        return Ok((b.loiter(radius), start));
                    }
                };
            }
            return Ok((b.build(), start));
        }
        let segs = self
            .segments
            .iter()
            .map(|s| match *s {
                SegmentFile::Line {
                    b,
                    chi_deg,
                    gamma_deg,
                } => PathSegment::Line {
                    b: v3(b),
                    chi_p: chi_deg.to_radians(),
                    gamma_p: gamma_deg.to_radians(),
                },
                SegmentFile::Arc {
                    c,
                    radius,
                    chi_deg,
                    gamma_deg,
                } => PathSegment::Arc {
                    c: v3(c),
                    r_signed: radius,
                    chi_p: chi_deg.to_radians(),
                    gamma_p: gamma_deg.to_radians(),
                },
                SegmentFile::Loiter { c, radius } => PathSegment::Loiter {
                    c: v3(c),
                    r_signed: radius,
                },
            })
            .collect();
        Ok((segs, start))
    }
}

fn segment_file(s: &PathSegment) -> SegmentFile {
    match *s {
        PathSegment::Line { b, chi_p, gamma_p } => SegmentFile::Line {
            b: a3(&b),
            chi_deg: chi_p.to_degrees(),
            gamma_deg: gamma_p.to_degrees(),
        },
        PathSegment::Arc {
            c,
            r_signed,
            chi_p,
            gamma_p,
        } => SegmentFile::Arc {
            c: a3(&c),
            radius: r_signed,
            chi_deg: chi_p.to_degrees(),
            gamma_deg: gamma_p.to_degrees(),
        },
        PathSegment::Loiter { c, r_signed } => SegmentFile::Loiter {
            c: a3(&c),
            radius: r_signed,
        },
    }
}

impl ScenarioFile {
    pub fn resolve(&self) -> Result<Scenario, Error> {
        let (path, start) = self.path.resolve()?;
        let plant = self.plant.unwrap_or_default();
        let controller = self.controller.unwrap_or(plant);
        let i = &self.initial;
        let v_a = i.v_a.unwrap_or(self.v_a_ref);
        let gamma = i.gamma_deg.unwrap_or(0.0).to_radians();
        let need_trim = i.theta_deg.is_none() || i.delta_t.is_none();
        let trim = if need_trim {
            Some(trim_point(&plant, v_a, gamma)?)
        } else {
            None
        };
        let pos = |v: Option<f64>, k: usize| -> Result<f64, Error> {
            v.or(start.map(|(p, _)| p[k])).ok_or_else(|| {
                Error::Config("initial position needed when the path has no start".into())
            })
        };
        let initial = AircraftState {
            n: pos(i.n, 0)?,
            e: pos(i.e, 1)?,
            d: pos(i.d, 2)?,
            v_a,
            gamma,
            xi: match (i.xi_deg, start) {
                (Some(x), _) => x.to_radians(),
                (None, Some((_, chi))) => chi,
                (None, None) => {
                    return Err(Error::Config(
                        "initial xi_deg needed when the path has no start".into(),
                    ))
                }
            },
            phi: i.phi_deg.unwrap_or(0.0).to_radians(),
            theta: match (i.theta_deg, trim) {
                (Some(t), _) => t.to_radians(),
                (None, Some(t)) => t.theta,
                (None, None) => unreachable!("trim computed when pitch is missing"),
            },
            p: i.p.unwrap_or(0.0),
            q: i.q.unwrap_or(0.0),
            r: i.r.unwrap_or(0.0),
            delta_t: match (i.delta_t, trim) {
                (Some(d), _) => d,
                (None, Some(t)) => t.u_t,
                (None, None) => unreachable!("trim computed when throttle is missing"),
            },
        };
        let s = Scenario {
            name: self.name.clone(),
            description: self.description.clone(),
            duration: self.duration,
            plant_dt: self.plant_dt,
            settle_time: self.settle_time,
            seed: self.seed,
            initial,
            wind: self.wind,
            wind_schedule: self.wind_schedule.clone(),
            path,
            plant,
            controller,
            ocp: self.ocp.resolve(),
            weights: self.weights.unwrap_or_default(),
            guidance: self.guidance.unwrap_or_default(),
            switching: self.switching.resolve(),
            v_a_ref: self.v_a_ref,
            events: self.events.clone(),
            measurement_noise: self.measurement_noise,
        };
        s.validate()?;
        Ok(s)
    }

    /// Fully explicit file for `s`, with the path written as segments.
    pub fn from_scenario(s: &Scenario) -> Self {
        let x = &s.initial;
        ScenarioFile {
            name: s.name.clone(),
            description: s.description.clone(),
            duration: s.duration,
            plant_dt: s.plant_dt,
            settle_time: s.settle_time,
            seed: s.seed,
            v_a_ref: s.v_a_ref,
            initial: InitialFile {
                n: Some(x.n),
                e: Some(x.e),
                d: Some(x.d),
                v_a: Some(x.v_a),
                gamma_deg: Some(x.gamma.to_degrees()),
                xi_deg: Some(x.xi.to_degrees()),
                phi_deg: Some(x.phi.to_degrees()),
                theta_deg: Some(x.theta.to_degrees()),
                p: Some(x.p),
                q: Some(x.q),
                r: Some(x.r),
                delta_t: Some(x.delta_t),
            },
            wind: s.wind,
            wind_schedule: s.wind_schedule.clone(),
            path: PathFile {
                start: None,
                course_deg: None,
                legs: Vec::new(),
                segments: s.path.iter().map(segment_file).collect(),
            },
            plant: Some(s.plant),
            controller: Some(s.controller),
            ocp: OcpFile::from_config(&s.ocp),
            weights: Some(s.weights),
            guidance: Some(s.guidance),
            switching: SwitchFile {
                r_acpt: Some(s.switching.r_acpt),
                eta_acpt_deg: Some(s.switching.eta_acpt.to_degrees()),
                rho_sw: Some(s.switching.rho_sw),
                sw_threshold: Some(s.switching.sw_threshold),
            },
            events: s.events.clone(),
            measurement_noise: s.measurement_noise,
        }
    }
}

/// Parses and validates a scenario file.
pub fn parse_scenario(text: &str) -> Result<Scenario, Error> {
    let file: ScenarioFile = toml::from_str(text)?;
    file.resolve()
}

pub fn load_scenario(path: &std::path::Path) -> Result<Scenario, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text)
}

/// Serializes `s` so that [`parse_scenario`] reproduces it up to degree
/// conversion rounding.
pub fn scenario_to_toml(s: &Scenario) -> Result<String, Error> {
    Ok(toml::to_string(&ScenarioFile::from_scenario(s))?)
}
