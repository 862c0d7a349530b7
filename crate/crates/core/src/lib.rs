//! Joint sparse factorization of multiple data views measured on known
//! subgroups, with simultaneous prediction of a continuous or multiclass
//! outcome.
//!
//! Each view `X^{d,s}` of subgroup `s` is approximated by `Z^s B^{d,s T}`
//! where the loadings split as `B^{d,s} = G^d * Xi^{d,s}` (element-wise):
//! `G^d` carries structure shared by all subgroups and `Xi^{d,s}` the
//! subgroup deviations. Row-block penalties on both select variables that
//! matter for every subgroup or only for some. The outcome is tied to the
//! scores through a shared coefficient matrix `Theta`.
//!
//! The main entry points are [`solver::fit`], [`selection::search_lambda`],
//! [`prediction::predict`] and [`simulation::generate_dataset`].

pub mod data_model;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod penalty;
pub mod prediction;
pub mod selection;
pub mod simulation;
pub mod solver;

pub use data_model::{
    standardize, FactorModel, FitStatus, Hyperparameters, Matrix, MultiViewDataset, Outcome, OutcomeKind,
    Ridge, SelectionReport, Standardizer, ZERO_TOL,
};
pub use error::{HipError, Result};
pub use solver::{fit, FitOptions, InnerOptimizer};
