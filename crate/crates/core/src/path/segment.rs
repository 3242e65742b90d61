use std::f64::consts::{FRAC_PI_2, TAU};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Lateral distance from the arc axis below which the closest point is undefined (m).
pub const EPS_AXIS: f64 = 0.1;

/// Below this |tan Γ| an arc is treated as flat (no helix legs).
const FLAT_TAN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathSegment {
    /// Straight line ending at `b` with exit course `chi_p` and elevation `gamma_p`.
    Line { b: Vec3, chi_p: f64, gamma_p: f64 },
    /// Helix arc around center `c` (at terminal altitude) exiting with course `chi_p`.
    Arc {
        c: Vec3,
        r_signed: f64,
        chi_p: f64,
        gamma_p: f64,
    },
    /// Unlimited constant-altitude loiter circle.
    Loiter { c: Vec3, r_signed: f64 },
}

impl PathSegment {
    pub fn is_line(&self) -> bool {
        matches!(self, PathSegment::Line { .. })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PathSegment::Line { .. } => "line",
            PathSegment::Arc { .. } => "arc",
            PathSegment::Loiter { .. } => "loiter",
        }
    }

    /// Elevation angle of the segment (zero for loiters).
    pub fn elevation(&self) -> f64 {
        match *self {
            PathSegment::Line { gamma_p, .. } | PathSegment::Arc { gamma_p, .. } => gamma_p,
            PathSegment::Loiter { .. } => 0.0,
        }
    }

    /// Signed radius for arcs and loiters.
    pub fn signed_radius(&self) -> Option<f64> {
        match *self {
            PathSegment::Arc { r_signed, .. } | PathSegment::Loiter { r_signed, .. } => {
                Some(r_signed)
            }
            PathSegment::Line { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let finite = |v: &Vec3| v.iter().all(|x| x.is_finite());
        match *self {
            PathSegment::Line { b, chi_p, gamma_p } => {
                if !finite(&b) || !chi_p.is_finite() {
                    return Err("line parameters must be finite".into());
                }
                check_elevation(gamma_p)
            }
            PathSegment::Arc {
                c,
                r_signed,
                chi_p,
                gamma_p,
            } => {
                if !finite(&c) || !chi_p.is_finite() || !r_signed.is_finite() {
                    return Err("arc parameters must be finite".into());
                }
                if r_signed.abs() <= 0.0 {
                    return Err("arc radius must be nonzero".into());
                }
                check_elevation(gamma_p)
            }
            PathSegment::Loiter { c, r_signed } => {
                if !finite(&c) || !r_signed.is_finite() || r_signed.abs() <= 0.0 {
                    return Err("loiter needs a finite center and nonzero radius".into());
                }
                Ok(())
            }
        }
    }
}

fn check_elevation(gamma_p: f64) -> Result<(), String> {
    if gamma_p.is_finite() && gamma_p.abs() < FRAC_PI_2 {
        Ok(())
    } else {
        Err(format!("elevation angle {gamma_p} must satisfy |Γ| < π/2"))
    }
}

/// Unit direction with course `chi` and elevation `gamma` (positive climbs).
fn direction(chi: f64, gamma: f64) -> Vec3 {
    let (sg, cg) = gamma.sin_cos();
    let (sc, cc) = chi.sin_cos();
    Vec3::new(cg * cc, cg * sc, -sg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPoint {
    /// Point on the path (m, NED).
    pub p: Vec3,
    /// Unit path tangent at `p`.
    pub t_hat: Vec3,
    /// False for degenerate geometry (on the arc axis).
    pub valid: bool,
    /// Unwrapped angle still to travel to the arc exit point, including whole legs (rad).
    /// `None` for lines, loiters and flat arcs.
    pub remaining: Option<f64>,
}

/// How the helix leg is chosen for arc closest points.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LegSelection {
    /// Nearest leg by rounding the altitude offset.
    #[default]
    Nearest,
    /// Nearest leg, but never one with more remaining angle than the bound
    /// (refuses legs already flown).
    AtMost(f64),
    /// The leg whose remaining angle is closest to the given value.
    Fixed(f64),
}

/// Orthogonal projection onto the infinite line through `b`.
pub fn closest_point_line(b: &Vec3, chi_p: f64, gamma_p: f64, r: &Vec3) -> ClosestPoint {
    let t = direction(chi_p, gamma_p);
    let p = b + t * (r - b).dot(&t);
    ClosestPoint {
        p,
        t_hat: t,
        valid: true,
        remaining: None,
    }
}

fn turn_sign(r_signed: f64) -> f64 {
    if r_signed >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Approximate closest point on an arc (helix) or loiter.
///
/// The lateral part is the radial projection onto the circle. For arcs the
/// down component adds the altitude change over the angular distance still to
/// travel to the exit point plus a whole number of helix legs.
pub fn closest_point_arc(seg: &PathSegment, r: &Vec3, legs: LegSelection) -> ClosestPoint {
    let (c, r_signed, chi_p, gamma_p, helix) = match *seg {
        PathSegment::Arc {
            c,
            r_signed,
            chi_p,
            gamma_p,
        } => (c, r_signed, chi_p, gamma_p, true),
        PathSegment::Loiter { c, r_signed } => (c, r_signed, 0.0, 0.0, false),
        PathSegment::Line { b, chi_p, gamma_p } => {
            return closest_point_line(&b, chi_p, gamma_p, r)
        }
    };
    let radius = r_signed.abs();
    let sigma = turn_sign(r_signed);
    let dn = r.x - c.x;
    let de = r.y - c.y;
    let lateral = dn.hypot(de);
    if lateral < EPS_AXIS {
        return ClosestPoint {
            p: *r,
            t_hat: direction(chi_p, gamma_p),
            valid: false,
            remaining: None,
        };
    }
    let beta = de.atan2(dn);
    let course = beta + sigma * FRAC_PI_2;
    let t_hat = direction(course, gamma_p);
    let p_n = c.x + radius * beta.cos();
    let p_e = c.y + radius * beta.sin();

    let tan_g = gamma_p.tan();
    if !helix || tan_g.abs() < FLAT_TAN {
        return ClosestPoint {
            p: Vec3::new(p_n, p_e, c.z),
            t_hat,
            valid: true,
            remaining: None,
        };
    }
    let beta_b = chi_p - sigma * FRAC_PI_2;
    let delta_chi = if sigma > 0.0 {
        (beta_b - beta).rem_euclid(TAU)
    } else {
        (beta - beta_b).rem_euclid(TAU)
    };
    let pitch = radius * tan_g;
    let leg_height = TAU * pitch;
    let b_d = c.z;
    let nearest = {
        let k = ((r.z - (b_d + delta_chi * pitch)) / leg_height).round();
        delta_chi + TAU * k
    };
    let remaining = match legs {
        LegSelection::Nearest => nearest,
        LegSelection::AtMost(bound) => {
            if nearest <= bound {
                nearest
            } else {
                delta_chi + TAU * ((bound - delta_chi) / TAU).floor()
            }
        }
        LegSelection::Fixed(reference) => {
            delta_chi + TAU * ((reference - delta_chi) / TAU).round()
        }
    };
    ClosestPoint {
        p: Vec3::new(p_n, p_e, b_d + remaining * pitch),
        t_hat,
        valid: true,
        remaining: Some(remaining),
    }
}

/// Closest point on any segment type.
pub fn closest_point(seg: &PathSegment, r: &Vec3, legs: LegSelection) -> ClosestPoint {
    match seg {
        PathSegment::Line { b, chi_p, gamma_p } => closest_point_line(b, *chi_p, *gamma_p, r),
        _ => closest_point_arc(seg, r, legs),
    }
}

/// Horizontal unit tangent `(t̄_n, t̄_e)`.
pub fn path_tangent_2d(cp: &ClosestPoint) -> (f64, f64) {
    let norm = cp.t_hat.x.hypot(cp.t_hat.y);
    (cp.t_hat.x / norm, cp.t_hat.y / norm)
}

/// Terminal point `b` of a line or arc; loiters never end.
pub fn terminal_point(seg: &PathSegment) -> Option<Vec3> {
    match *seg {
        PathSegment::Line { b, .. } => Some(b),
        PathSegment::Arc {
            c, r_signed, chi_p, ..
        } => {
            let beta_b = chi_p - turn_sign(r_signed) * FRAC_PI_2;
            let radius = r_signed.abs();
            Some(Vec3::new(
                c.x + radius * beta_b.cos(),
                c.y + radius * beta_b.sin(),
                c.z,
            ))
        }
        PathSegment::Loiter { .. } => None,
    }
}

/// Unit tangent at the terminal point.
pub fn terminal_tangent(seg: &PathSegment) -> Option<Vec3> {
    match *seg {
        PathSegment::Line { chi_p, gamma_p, .. } | PathSegment::Arc { chi_p, gamma_p, .. } => {
            Some(direction(chi_p, gamma_p))
        }
        PathSegment::Loiter { .. } => None,
    }
}

#[cfg(test)]
/// Course of the horizontal tangent, wrapped.
pub(crate) fn tangent_course(cp: &ClosestPoint) -> f64 {
    crate::model::wrap_pi(cp.t_hat.y.atan2(cp.t_hat.x))
}
