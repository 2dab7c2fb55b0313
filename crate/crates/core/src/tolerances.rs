//! Default numeric tolerances.
//!
//! Inequality checks of the form `E >= c` pass when
//! `E - c >= -tol * max(1, |c|)`: absolute slack near zero thresholds,
//! relative slack for large ones. The constants below are the defaults wired
//! into the library; entry points that take an explicit `tol` accept
//! overrides.

/// Pointwise candidate conditions evaluated with analytic derivatives are
/// exact up to a few ulps, so the default slack is tight.
pub const CONDITION_TOL: f64 = 1e-12;

/// Per-node chain inequality margin, relative to the node scale.
pub const NODE_MARGIN_TOL: f64 = 1e-12;

/// Admissibility of externally supplied node functionals.
pub const ADMISSIBILITY_TOL: f64 = 1e-9;

/// Agreement required between the coefficient-product and the
/// average-increment formulas for the pairing sum.
pub const CROSS_CHECK_REL_TOL: f64 = 1e-10;

/// Telescoping identity: the summed chain must equal the aggregate of
/// per-node margins to this relative accuracy.
pub const TELESCOPE_REL_TOL: f64 = 1e-10;

/// Coefficient expansion followed by reconstruction, absolute per value.
pub const ROUND_TRIP_TOL: f64 = 1e-12;

/// Norm identity between leaf values and coefficients, relative.
pub const PARSEVAL_REL_TOL: f64 = 1e-10;

/// Atom profiles: pointwise bound slack and mean-zero slack.
pub const ATOM_TOL: f64 = 1e-12;

/// Certification recomputes every reported quantity from scratch and
/// requires agreement to this relative accuracy.
pub const CERTIFY_REL_TOL: f64 = 1e-9;

/// Slack on the proven pairing bound sqrt(2)/4; observed ratios may exceed
/// it only by rounding noise.
pub const RATIO_CEILING_SLACK: f64 = 1e-9;

/// A node counts as "tight" when its chain margin is below this fraction of
/// the node scale. Diagnostic only.
pub const TIGHT_NODE_REL: f64 = 1e-6;
