//! Numerical thresholds shared across modules.

/// Smallest Gram eigenvalue accepted as PSD.
pub const EIG_TOL: f64 = 1e-7;
/// Relative coefficient residual accepted when validating a certificate.
pub const RES_TOL: f64 = 1e-7;
/// Feasibility margins at or below minus this value mean "not SOS".
pub const NOT_SOS_MARGIN: f64 = 1e-6;
/// Interior-point stopping tolerance.
pub const SOLVER_TOL: f64 = 1e-8;
/// Row-dependence threshold in presolve.
pub const PRESOLVE_TOL: f64 = 1e-10;
