//! Global energy-efficiency maximization for RIS-aided multi-user uplinks.
//!
//! The crate jointly optimizes user transmit powers, the reflection
//! coefficients of a reconfigurable intelligent surface (RIS) subject to a
//! global reflected-power budget, and the linear receive filters at a
//! multi-antenna base station. Two sequential methods are provided:
//!
//! * [`algorithms::algorithm_one`] alternates MMSE filter updates, a
//!   sequential convex approximation of the reflection subproblem, and
//!   sequential fractional programming for the powers.
//! * [`algorithms::algorithm_two`] embeds the MMSE filters into the objective
//!   and handles the reflection subproblem through a sequential semidefinite
//!   relaxation followed by Gaussian randomization.
//!
//! [`scenario`] draws reproducible channel realizations, [`metrics`] is the
//! exact objective everything is audited against, and [`harness`] runs
//! seeded Monte Carlo experiments and writes CSV.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod linalg;
pub mod metrics;
pub mod scenario;
pub mod surrogates;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
