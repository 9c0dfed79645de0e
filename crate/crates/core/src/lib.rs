//! A numerical laboratory for decision rules in constrained stochastic
//! optimization: sample-average and shrinkage estimators over compact
//! feasible regions, their Monte Carlo risk functions, and the moment and
//! prior-scan diagnostics that probe when one rule can or cannot dominate
//! another.
//!
//! The crate is organized along the pipeline:
//!
//! * [`geometry`] — feasible regions (box, ball, vertex polytope), linear
//!   minimization, projection, and the box face decomposition.
//! * [`stochastics`] — Gaussian models, sampling through the triangular
//!   factor, conjugate posterior/marginal formulas, and reproducible
//!   counter-based random substreams.
//! * [`rules`] — the estimators: sample-average rules for linear and
//!   quadratic objectives, Bayes rules, James-Stein variants, constants.
//! * [`risk`] — optimality-gap losses, seeded Monte Carlo risk estimates,
//!   a deterministic one-dimensional quadrature oracle, and paired rule
//!   comparisons with common random numbers.
//! * [`analysis`] — risk-gap moments at the origin, Hessian-trace and
//!   finite-difference curvature diagnostics, prior-mass ratio scans with
//!   fitted decay slopes, and consistency-rate fits.
//!
//! Everything is deterministic given a seed: replications draw from
//! per-index substreams and reductions run in replication order, so results
//! are independent of thread count.

pub mod analysis;
pub mod geometry;
pub mod risk;
pub mod rules;
pub mod stochastics;

pub use analysis::{
    analytic_hessian_at_zero, blyth_denominator, blyth_numerator, blyth_scan, consistency_slope,
    f_value, fd_hessian_at_zero, g_matrix_at_zero, hessian_trace_at_zero, AnalysisError,
    BlythReport, ConsistencyReport, Estimate, FdHessian, GMatrixEstimate,
};
pub use geometry::{FaceLabel, FaceSignature, FeasibleRegion, GeometryError};
pub use risk::{
    compare_rules, estimate_risk, estimate_risk_with, loss, risk_quadrature_1d, ComparisonRow,
    ObjectiveKind, RiskError, RiskEstimate, RuleComparison, Verdict,
};
pub use rules::{DecisionRule, RuleError};
pub use stochastics::{
    draw_gaussian, draw_samples, marginal_of_mean, posterior_params, GaussianModel, Sample,
    StochasticsError, StreamFactory,
};
