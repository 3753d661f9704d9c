//! Spectral asymptotics of `-y'' = λ ρ y`, `y(0) = y(1) = 0`, where the
//! weight `ρ` is the distributional derivative of a self-similar function.
//!
//! * [`selfsim`] builds the self-similar primitive `P` from IFS data and
//!   derives its moments, spectral order and arithmetic type.
//! * [`renewal`] solves the discrete, lattice and non-arithmetic renewal
//!   systems that govern the counting function, with their limit formulas.
//! * [`spectral`] discretizes the pencil `A + λB` exactly on the IFS mesh
//!   and counts eigenvalues by Sturm sequences.
//! * [`asympt`] extracts the amplitude `ind(λ) / |λ|^{D/2}`.

// `!(x > 0.0)` guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asympt;
pub mod renewal;
pub mod selfsim;
pub mod spectral;

pub use asympt::{
    estimate_constant_s, estimate_periodic_s, period_doubling_check, AmplitudeEstimate,
    AsymptError, BinStats, PeriodDoublingReport,
};
pub use renewal::{
    discrete_limits, eta_bound, nonarithmetic_limit, periodic_limit_s, solve_discrete,
    solve_lattice, solve_nonarithmetic, Forcing, Interpolation, MarchOptions, Profile,
    RenewalCoefficients, RenewalError, RenewalSolution,
};
pub use selfsim::{
    cell_moments, compute_meta, refine, validate_params, CellData, Classification, SelfSimError,
    SelfSimilarParams, SimilarityMeta,
};
pub use spectral::{
    assemble_pencil, converged_eigenvalues, counting_series, eigenvalues, inertia,
    ConvergencePolicy, CountingSeries, Pencil, Side, SpectralError,
};
