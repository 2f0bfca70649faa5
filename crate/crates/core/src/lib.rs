//! Implicit finite-difference solver for the Korteweg-de Vries equation
//! `u_t + u u_x + u_xxx = 0` on a periodic or truncated line grid.

pub mod diagnostics;
pub mod error;
pub mod exact_solutions;
pub mod grid_ops;
pub mod kdv_scheme;
pub mod linalg_banded;

pub use diagnostics::{
    check_interpolant_bounds, convergence_table, interpolant_l2_squared, kato_budget,
    relative_error, sampled_space_time_difference, weighted_energy, ConvergenceRow,
    InterpolantReport, KatoAccumulator, LedgerSummary, StepDiagnostics, TimeSampler,
};
pub use error::{KdvError, Result};
pub use exact_solutions::{l2_singular_init, one_soliton, two_soliton, TwoSolitonParams};
pub use grid_ops::{Boundary, Grid, GridFunction, Norms, WeightFunction};
pub use kdv_scheme::{
    run, run_with_observer, DtRule, RunOutput, SchemeConfig, Snapshot, StepView, TimeStep,
    Trajectory,
};
pub use linalg_banded::{BandedOperator, Factorization};
