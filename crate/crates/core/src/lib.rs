#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Sparse autoregressive modelling with the weighted Lasso.
//!
//! The crate is organised along the pipeline it implements:
//!
//! * [`ar_process`]: causal AR(p) models, their MA(∞) weights and
//!   autocovariances, seeded Gaussian simulation.
//! * [`design`]: the lagged regression `(y, X)` and its Gram matrix.
//! * [`lasso`]: weighted-ℓ1 least squares by coordinate descent, KKT
//!   certification and warm-started solution paths.
//! * [`selection`]: K-fold cross-validation, support extraction and the
//!   Yule–Walker/AIC baseline.
//! * [`theory`]: numeric evaluators for the consistency conditions and
//!   probability bounds.
//! * [`experiments`]: the Monte-Carlo selection study and report output.
//! * [`io`]: model, series, fit and path file formats.

pub mod ar_process;
pub mod design;
pub mod error;
pub mod experiments;
pub mod io;
pub mod lasso;
pub mod selection;
pub mod theory;

pub use ar_process::{
    autocovariance, check_causality, ma_coefficients, simulate, toeplitz_gamma, ArModel,
    AutocovSequence, Causality, MaExpansion, TimeSeries,
};
pub use design::{build_design, build_design_with, gram, gram_deviation, DesignMode, LagDesign};
pub use error::{Error, Result};
pub use experiments::{emit_report, paper_model, run_monte_carlo, McConfig, McReport};
pub use lasso::{
    fit, lambda_max, objective, soft_threshold, solution_path, verify_kkt, LassoFit,
    PenaltyConfig, SolutionPath, SolverOptions,
};
pub use selection::{cross_validate, selected_support, yule_walker, CvResult, YwFit};
