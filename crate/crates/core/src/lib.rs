//! File-backed penalized linear mixed models.
//!
//! The pipeline mirrors the command-line workflow:
//!
//! 1. [`ingest`] turns PLINK triplets or delimited text into on-disk
//!    [`store::FileMatrix`] stores, imputing and filtering genotype columns.
//! 2. [`design`] aligns outcomes, attaches unpenalized covariates and
//!    standardizes the predictors.
//! 3. [`decomp`] builds the relatedness matrix, its eigendecomposition, the
//!    variance ratio and the rotated (decorrelated) problem.
//! 4. [`path`] fits lasso, MCP or SCAD regularization paths on the rotated
//!    problem and maps coefficients back to the original scale.
//! 5. [`inference`] cross-validates the whole procedure and predicts, either
//!    from fixed effects alone or with the best linear unbiased predictor.

pub mod decomp;
pub mod design;
pub mod error;
pub mod inference;
pub mod ingest;
pub mod path;
pub mod resources;
pub mod sim;
pub mod store;
pub mod timing;

pub use error::{Error, Result};
