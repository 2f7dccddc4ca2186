//! Interval certificates of infeasibility for quadratic constraint
//! satisfaction problems, and box pruning built on them.

pub mod certificate;
pub mod exclusion;
pub mod interval;
pub mod model;
pub mod random;
pub mod report;
pub mod solver;
pub mod startpoint;
