//! Truncated Euler–Maruyama schemes for neutral stochastic differential delay
//! equations (NSDDEs)
//!
//! ```text
//! d[X(t) - D(X(t-τ))] = b(X(t), X(t-τ)) dt + σ(X(t), X(t-τ)) dW(t)
//! d[X(t) - D(X(t-τ))] = b(X(t), X(t-τ)) dt + ∫ h(X(t), X(t-τ), u) Ñ(du, dt)
//! ```
//!
//! The drift, diffusion and jump coefficients are evaluated at states radially
//! projected onto a ball whose radius shrinks with the step size, which keeps
//! every coefficient bounded by a gauge `g(Δ)` even when `b` grows
//! superlinearly.
//!
//! Module map:
//!
//! - [`model`]: coefficient sets, the built-in example models, and
//!   numerical audits of the coefficient assumptions.
//! - [`truncation`]: bound functions, gauges and truncated coefficients.
//! - [`noise`]: seeded Brownian grids with exact coarsening, Poisson jumps.
//! - [`scheme`]: the Brownian-driven stepper and path simulation.
//! - [`jump_scheme`]: the jump-driven stepper with its compensator.
//! - [`experiment`]: coupled strong-error studies and rate fitting.

pub mod error;
pub mod experiment;
pub mod jump_scheme;
pub mod model;
pub mod noise;
pub mod scheme;
pub mod truncation;

pub(crate) mod linalg;

pub use error::{Error, Result};
pub use experiment::{
    bootstrap_slope_ci, fit_rate, strong_error_study, terminal_moment, ConvergenceReport, Driver,
    ErrorMode, GaugeForm, LevelSummary, RateFit, RateSummary, StudyConfig,
};
pub use jump_scheme::{
    compensator, simulate_jump, simulate_jump_untruncated, step_jump, CompensatorOracle,
};
pub use model::{
    audit_assumption, empirical_kappa, make_additive_jump, make_additive_noise, make_example_a,
    make_example_b, make_jump_example, AssumptionId, AssumptionParams, AuditReport, CoefficientSet,
    InitialSegment, SampleBox,
};
pub use noise::{
    coarsen, sample_brownian, sample_brownian_steps, sample_jumps, stream_seed, BrownianGrid,
    JumpRealization, MarkDistribution, MarkMeasure,
};
pub use scheme::{simulate, simulate_untruncated, step, DelayState, PathRecord, TimeGrid};
pub use truncation::{
    invert_bound, power_gauge, table_gauge, truncate_point, truncated_coefficients, BoundFunction,
    GaugeMode, GaugeValue, TruncatedCoefficients, TruncationRule,
};
