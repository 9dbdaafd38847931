//! Entropy methods for linear and porous-media diffusions with a
//! confinement potential: discrete weighted operators, the spectral
//! criterion `λ₁`, flows, closed-form constants and verification.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod error;
pub mod flows;
pub mod functionals;
pub mod grid;
pub mod linalg;
pub mod potential;
pub mod spectrum;
pub mod trace;
pub mod verify;

pub use error::{Error, Result};
pub use flows::{FlowConfig, FlowKind, InitialData, TimeScheme};
pub use grid::{Field, Grid, GridKind, GridSpec};
pub use potential::{Family, Potential};
pub use trace::{Column, Trace, TraceRow};
pub use verify::Verdict;
