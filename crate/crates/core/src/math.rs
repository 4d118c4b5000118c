// Float functions that are not available in `core`.
pub(crate) use libm::{atan2, cos, exp, expm1, floor, log, sin, sinh, sqrt};
