//! Certification of collision-free piecewise-polynomial motion plans for
//! algebraic kinematic chains by sums-of-squares feasibility.

// `!(x >= y)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod checker;
pub mod conic;
pub mod geometry;
pub mod kinematics;
pub mod plan;
pub mod polynomial;
pub mod scene;
pub mod soscert;
