//! Pinned tolerances and budgets of the acceptance criteria.

/// Partial-trace identity, relative to `1 + |value|`.
pub const PARTIAL_TRACE_REL: f64 = 1e-10;
pub const PARTIAL_TRACE_PAIRS: usize = 50;
pub const PARTIAL_TRACE_SECONDS: f64 = 10.0;

/// Coherent exactness of the potential and of the field energy.
pub const COHERENT_SUP: f64 = 1e-6;
pub const COHERENT_ENERGY: f64 = 1e-6;
pub const COHERENT_EPS: [f64; 4] = [1.0, 0.5, 0.25, 0.125];
pub const COHERENT_SECONDS: f64 = 30.0;

/// Coherent overlap against the closed form.
pub const OVERLAP_ABS: f64 = 1e-6;
pub const OVERLAP_EPS: [f64; 2] = [1.0, 0.25];
pub const OVERLAP_SECONDS: f64 = 10.0;

/// Fitted decay slope must reach this fraction of `−D`.
pub const MIXTURE_SLOPE_FRACTION: f64 = 0.9;
pub const MIXTURE_EPS: [f64; 4] = [0.5, 0.25, 0.125, 0.0625];
pub const MIXTURE_SECONDS: f64 = 120.0;

/// Richardson-extrapolated gap relative to the spectral gap of `H₀`.
pub const GSE_RICHARDSON_REL: f64 = 5e-2;
pub const GSE_EPS: [f64; 4] = [1.0, 0.5, 0.25, 0.125];
pub const GSE_SECONDS: f64 = 600.0;

/// Per-halving reduction of the trap resolvent distance.
pub const TRAP_RESOLVENT_RATIO: f64 = 1.5;
pub const TRAP_REPRODUCTION_SUP: f64 = 1e-6;
pub const TRAP_INTERIOR_FRACTION: f64 = 0.8;
pub const TRAP_EPS: [f64; 3] = [0.4, 0.2, 0.1];
pub const TRAP_SECONDS: f64 = 180.0;

pub const INEQUALITY_SAMPLES: usize = 200;
pub const INEQUALITY_SECONDS: f64 = 60.0;

/// Lanczos against dense diagonalization, dimensions up to this size.
pub const LANCZOS_DENSE_ABS: f64 = 1e-8;
pub const LANCZOS_DENSE_MAX_DIM: usize = 400;
/// Alternating minimization against the brute-force grid.
pub const BRUTE_FORCE_ABS: f64 = 1e-3;
pub const BRUTE_FORCE_POINTS: usize = 21;
pub const SOLVER_SECONDS: f64 = 300.0;

/// Second moment `∫ y² φ(y) dy` of the normalized one-dimensional bump.
pub const BUMP_SECOND_MOMENT_1D: f64 = 0.158_113_636_263_798_23;
/// Per-axis second moment of the normalized radial bump in the plane.
pub const BUMP_SECOND_MOMENT_2D: f64 = 0.130_655_601_710_279_32;
