//! Calibrated sign conventions. Both constants are pinned by tests and must
//! not be changed independently of them.

/// Sign relating the raw winding integral `W+ - W-` of the e-component to
/// the analytic index. Calibrated on the Toeplitz operator
/// `M_{e^{ix}} P+ + P-`, whose analytic index is `-1`.
pub const ORIENTATION_SIGN: i64 = -1;

/// Sign relating orbit labels of the direct density computation to the
/// labels used by the closed-form pole and interior densities:
/// `density_mu(g * ORBIT_LABEL_SIGN)` is proportional to `density_closed_form(g)`.
/// Calibrated by matching the far ends of an interior trajectory against
/// the pole trajectories.
pub const ORBIT_LABEL_SIGN: i64 = -1;

/// Tolerance on the inverse residual accepted by the e-component form.
pub const E_COMPONENT_RESIDUAL_TOL: f64 = 1e-8;

/// Largest distance from an integer accepted when snapping a winding.
pub const SNAP_TOL: f64 = 1e-6;
