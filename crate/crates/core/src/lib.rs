pub mod approx;
pub mod convex;
pub mod duality;
pub mod error;
pub mod expr;
pub mod farkas;
pub mod feasibility;
pub mod fm;
pub mod io;
pub mod model;
pub mod recession;
pub mod scalar;
