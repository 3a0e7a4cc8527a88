//! Severity-weighted multiple hypothesis testing.
//!
//! Hypotheses are scored by the generalized local fdr, which discounts the
//! local fdr by the posterior mean cost of missing each signal. Thresholding
//! those scores controls the severity-weighted marginal FDR (mFDR*) while
//! minimizing the weighted marginal false non-discovery rate (mFNR*).
//!
//! The crate provides the scoring pipeline, the data-driven step-up rule, an
//! analytic oracle for two-point alternatives, Monte Carlo oracles, and the
//! simulation studies used to compare against unweighted competitors.

pub mod analytic_oracle;
pub mod cli;
pub mod error;
pub mod error_rates;
pub mod experiments;
pub mod model;
pub mod normal;
pub mod posterior;
pub mod procedures;
pub mod quadrature;

pub use error::{Error, Result};
pub use model::{sample, severity, AlternativeSpec, SeveritySpec, SimulatedSample, TwoGroupsModel};
pub use posterior::{DecisionVector, PosteriorScores};
