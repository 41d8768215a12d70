//! Absorbing high-Q cavity: resonances, generalized input-output couplings,
//! time-dependent extraction of the cavity state, and Wigner-function maps
//! from the intracavity state to the outgoing wave packet.

// negated comparisons double as NaN rejection in input checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod layered_optics;
pub mod extraction;
pub mod resonances;
pub mod states_wigner;
pub mod cli_runner;

pub use error::{CavityError, Result};
pub use num_complex::Complex64;
