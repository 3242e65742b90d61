//! Time-independent 3D path primitives, closest points and segment switching.
//!
//! Segments follow NED conventions. Arc and loiter radii carry the turn
//! direction in their sign: positive is clockwise seen from above.

mod builder;
mod segment;
mod switching;

pub use builder::CourseBuilder;
pub use segment::{
    closest_point, closest_point_arc, closest_point_line, path_tangent_2d, terminal_point,
    terminal_tangent, ClosestPoint, LegSelection, PathSegment, Vec3, EPS_AXIS,
};
pub use switching::{
    advance_switch_state, switching_conditions, PathQueue, SwitchConditions, SwitchConfig,
    SwitchState,
};
