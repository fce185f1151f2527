//! Numerical stability toolkit for the mixed cubic-quadratic-additive
//! functional equation
//!
//! ```text
//! f(x + ky) + f(x - ky) = k²f(x + y) + k²f(x - y) + 2(1 - k²)f(x)
//! ```
//!
//! with values in a finite-dimensional ℓ_p space (0 < p ≤ 1).
//!
//! The crate is organised bottom-up:
//!
//! * [`quasinorm`]: the p-normed codomain and its inequalities.
//! * [`equations`]: residual operators, parity split, batch verification.
//! * [`approximants`]: direct-method limits recovering the additive,
//!   quadratic and cubic parts of an approximate solution.
//! * [`bounds`]: the ψ̃ series, stability bounds and closed-form constants.
//! * [`harness`]: perturbed test functions, θ calibration, experiments and
//!   CSV/JSON reports.
//!
//! Everything numeric is generic over [`Scalar`]. Use [`f64`] for quick
//! checks and [`DoubleDouble`] when limits have to be taken through many
//! dilations; the expanding additive iteration cancels the cubic part of `f`
//! at arguments of size `2ⁿ|x|`, which wipes out all f64 digits long before
//! the sequence settles.

pub mod approximants;
pub mod bounds;
pub mod equations;
pub mod error;
pub mod harness;
pub mod quasinorm;
pub mod scalar;

pub use approximants::{
    decompose_full, decompose_odd, iterate_additive, iterate_cubic, iterate_quadratic,
    take_limit, ConvergenceDiagnostics, DecompositionResult, DiagnosticsSummary, Direction,
    Directions, IterKind, IterationSpec, LimitControl, OddDecomposition, RecoveredComponent,
};
pub use bounds::{
    bound_table, corollary_constant, cross_check, full_bound_power, psi_tilde, psi_tilde_numeric,
    psi_tilde_term, select_direction, stability_bound, BoundContext, BoundKind, BoundTable,
    ConstantKind, CrossCheck, PhiForm, PowerBound, SeriesKind, SeriesValue,
};
pub use equations::{
    additive_residual, biadditive_form, difference_operator, mixed_fourth_residual, parity_split, residual,
    verify_equation, verify_solution, EquationKind, EquationParams, FunctionHandle,
    SolutionReport,
};
pub use error::{Error, Result};
pub use harness::{
    calibrate_theta, emit_report, make_test_function, render_report, run_decomposition,
    run_experiment, write_decomposition, write_report, ComponentDiagnostics, DecompositionReport,
    ExperimentConfig, GridSpec, NoiseKind, NoiseSpec, PhiTemplate, ReportFormat, ReportRow,
    StabilityReport,
};
pub use quasinorm::{modulus_of_concavity, power_sum_residual, CodomainVector, PNormSpace};
pub use scalar::Scalar;

/// 106-bit double-double scalar.
pub type DoubleDouble = twofloat::TwoFloat;

pub type PNormSpaceF64 = PNormSpace<f64>;
pub type PNormSpaceDD = PNormSpace<DoubleDouble>;
pub type VectorF64 = CodomainVector<f64>;
pub type VectorDD = CodomainVector<DoubleDouble>;
pub type FunctionF64 = FunctionHandle<f64>;
pub type FunctionDD = FunctionHandle<DoubleDouble>;
pub type DecompositionF64 = DecompositionResult<f64>;
pub type DecompositionDD = DecompositionResult<DoubleDouble>;
pub type BoundContextF64 = BoundContext<f64>;
pub type BoundContextDD = BoundContext<DoubleDouble>;
