use super::segment::{PathSegment, Vec3};
use crate::model::wrap_pi;
use std::f64::consts::FRAC_PI_2;

/// Chains lines and arcs from a start pose so consecutive segments join with
/// matching position and course.
#[derive(Debug, Clone)]
pub struct CourseBuilder {
    pos: Vec3,
    course: f64,
    segments: Vec<PathSegment>,
}

impl CourseBuilder {
    pub fn new(start: Vec3, course: f64) -> Self {
        Self {
            pos: start,
            course: wrap_pi(course),
            segments: Vec::new(),
        }
    }

    pub fn position(&self) -> Vec3 {
        self.pos
    }

    pub fn course(&self) -> f64 {
        self.course
    }

    /// Straight line of horizontal length `length` with elevation `gamma`.
    pub fn line(mut self, gamma: f64, length: f64) -> Self {
        let (sc, cc) = self.course.sin_cos();
        let b = self.pos + Vec3::new(cc * length, sc * length, -gamma.tan() * length);
        self.segments.push(PathSegment::Line {
            b,
            chi_p: self.course,
            gamma_p: gamma,
        });
        self.pos = b;
        self
    }

    fn center(&self, r_signed: f64) -> Vec3 {
        let side = self.course + r_signed.signum() * FRAC_PI_2;
        let radius = r_signed.abs();
        Vec3::new(
            self.pos.x + radius * side.cos(),
            self.pos.y + radius * side.sin(),
            self.pos.z,
        )
    }

    /// Arc turning through `turn` radians (positive, may exceed 2π for helices).
    pub fn arc(mut self, r_signed: f64, gamma: f64, turn: f64) -> Self {
        let sigma = r_signed.signum();
        let radius = r_signed.abs();
        let mut c = self.center(r_signed);
        c.z = self.pos.z - turn * radius * gamma.tan();
        let chi_exit = wrap_pi(self.course + sigma * turn);
        let beta_b = chi_exit - sigma * FRAC_PI_2;
        self.pos = Vec3::new(
            c.x + radius * beta_b.cos(),
            c.y + radius * beta_b.sin(),
            c.z,
        );
        self.course = chi_exit;
        self.segments.push(PathSegment::Arc {
            c,
            r_signed,
            chi_p: chi_exit,
            gamma_p: gamma,
        });
        self
    }

    /// Closes the course with an unlimited loiter tangent to the current pose.
    pub fn loiter(mut self, r_signed: f64) -> Vec<PathSegment> {
        let c = self.center(r_signed);
        self.segments.push(PathSegment::Loiter { c, r_signed });
        self.segments
    }

    pub fn build(self) -> Vec<PathSegment> {
        self.segments
    }
}
