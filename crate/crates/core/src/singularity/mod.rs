//! Continuous-model AtRT for nicely multi-bang attenuations (strictly nested
//! convex sets) and the tools that read their boundaries off the sinogram.
//!
//! `R_a f` is smooth except on rays tangent to a boundary, where `dR/ds`
//! blows up like `|s - s*|^{-1/2}`, on rays through a corner, where it jumps,
//! and on rays containing a flat piece of boundary, where `R` itself jumps.

mod oracle;
mod quad;
mod recover;
mod scan;
mod shapes;

pub use oracle::{analytic_atrt, upstream_integral, LineProfile, QUAD_TOL};
pub use quad::{gk15, integrate};
pub use recover::{
    convex_hull, fit_circle, peel, recover_nested_boundaries, singular_offsets, singular_points,
    RecoveredSet, SingularPoint, MIN_POINTS_PER_SET,
};
pub use scan::{
    classify_ray, default_half_width, detect_flat_segment, domega_scan, ds_scan, dyadic_offsets,
    extrapolate_to_zero, fit_exponent, locate_corner_point, locate_tangency_point,
    measure_corner_jump, measure_tangent_coefficient, omega_limit, one_sided_limit,
    predict_corner_jump, predict_tangent_coefficient, DerivativeScan, RayClass, ScanAxis, Side,
    EXPONENT_TOL, LADDER_LEN, SMALLEST_OFFSET,
};
pub use shapes::{ConvexShape, NestedConvexPhantom, NESTING_MARGIN};
