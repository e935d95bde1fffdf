//! Numerical tolerances and iteration budgets used across the crate.
//!
//! Everything tunable lives here so a bound used by a solver and the test
//! that checks it can never drift apart silently.

/// Relative residual target for both Krylov solvers. Tight enough that
/// discretization error dominates algebraic error at every level the test
/// suite touches (discretization floors are around 1e-6).
pub const KRYLOV_RTOL: f64 = 1e-10;

/// Iteration budget for a Krylov solve on an `n` by `n` system. Unpreconditioned
/// CG needs O(1/h) ~ O(sqrt(n)) iterations on these meshes, so ten times the
/// dimension only trips on genuinely broken systems.
pub fn krylov_max_iter(n: usize) -> usize {
    10 * n.max(8)
}

/// Relative bound on the Neumann compatibility defect |sum rhs + flux total|.
/// Discretely compatible data defects scale like O(h), under 0.07 from level 3
/// up; incompatible data (for example a constant nonzero flux with no source)
/// lands at order one.
pub const COMPAT_REL: f64 = 0.2;

/// Below this l1 magnitude a Neumann right-hand side is indistinguishable
/// from accumulated rounding of a zero source, so the compatibility check
/// does not apply. Cancellation noise from unit-scale cell data reaches
/// about 1e-15 on the finer meshes; physically meaningful data sits well
/// above 1e-10.
pub const NEUMANN_SCALE_FLOOR: f64 = 1e-13;

/// Absolute bound on the mass-weighted mean of a mean-zero Neumann solution.
/// The post-projection subtracts the weighted mean exactly, so only float
/// roundoff of order machine epsilon times the field scale remains.
pub const MEAN_ZERO_ABS: f64 = 1e-12;

/// Stopping threshold for the gauge fixed point: the max-norm change of the
/// multiplier plus the H1 change of the stream correction. Well below the
/// O(h) discretization floor of the factorization residual it feeds.
pub const FIXED_POINT_TOL: f64 = 1e-8;

/// Fixed-point iteration cap. Contractive data settles in a handful of
/// steps; forty means the contraction factor would exceed roughly 0.65
/// before this ever fires on data worth iterating on.
pub const FIXED_POINT_MAX_ITER: usize = 40;

/// A consecutive-step ratio above this flags a non-contracting iteration.
pub const CONTRACTION_RATIO: f64 = 0.9;

/// Default smallness threshold for the gauge diagnostics: the Dirichlet
/// energy budget and the multiplier band half-width both use 1/100.
pub const SMALLNESS_EPS: f64 = 0.01;

/// The gauge multiplier and its inverse must stay inside [1/10, 10] in sup
/// norm for the factorization estimates to mean anything.
pub const GAUGE_BAND: (f64, f64) = (0.1, 10.0);

/// Oscillation fits only use radii at least this many max edge lengths, so
/// each probed ball holds enough vertices to resolve an oscillation.
pub const OSC_MIN_RADIUS_FACTOR: f64 = 4.0;

/// Log-log fits with R^2 below this are flagged inconclusive rather than
/// reported as exponents.
pub const FIT_R2_MIN: f64 = 0.98;

/// Reported exponents are clipped here: piecewise linear fields cannot
/// oscillate slower than Lipschitz, so anything past 1 is fit noise.
pub const ALPHA_CAP: f64 = 1.05;

/// Smallest admissible half-extent of the periodic grid. The disk has
/// radius 1; a box below [-2, 2]^2 visibly contaminates transforms through
/// periodic wraparound.
pub const GRID_MIN_HALF_EXTENT: f64 = 2.0;

/// Riesz transforms of real input must come back real; the imaginary residue
/// is asserted below this relative level, then dropped.
pub const IMAG_RESIDUE_REL: f64 = 1e-10;
