//! Robust structured regression with the L2E criterion, plus transfer
//! learning from contaminated source cohorts.
//!
//! The crate is organised bottom-up:
//!
//! - [`l2e`]: the Gaussian L2E loss, case weights, proximal maps, the
//!   block-alternating penalized solver and cross-validation.
//! - [`density`]: Gaussian kernel density estimates over case weights and
//!   the Hellinger distance between two estimates.
//! - [`selection`]: pseudo-importance weights and accept/reject sampling of
//!   source observations.
//! - [`transfer`]: the full pipeline (per-source detection and selection,
//!   co-learning, de-biasing).
//! - [`simulate`]: synthetic generators, metrics and the experiment runner.
//! - [`io`]: CSV ingestion and tabular output.

pub mod data;
pub mod density;
pub mod error;
pub mod io;
pub mod l2e;
pub mod rng;
pub mod selection;
pub mod simulate;
pub mod transfer;

pub use data::Dataset;
pub use error::{Error, Result};
pub use l2e::{
    case_weights, cross_validate, default_lambda_grid, fit_cv, fit_structured_l2e, l2e_gradient,
    l2e_loss, prox_group_lasso, prox_lasso, CvResult, FitResult, Groups, Init, Penalty,
    PenaltySpec, SolverOptions,
};
pub use transfer::{co_learn, debias, detect_and_select, pooled_l2e, target_l2e, trans_l2e, TransferConfig, TransferResult};
pub use selection::{importance_weights, select_source, ImportanceWeights, SelectionConfig, SelectionReport};

