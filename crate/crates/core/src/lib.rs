//! Hybrid proximal extragradient (HPE) methods with degenerate preconditioners
//! and relative-error inexact resolvents.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: counted linear maps, resumable conjugate gradients, power iteration.
//! * [`operators`]: proximal maps and the refinable least-squares resolvent.
//! * [`hpe`]: the preconditioned HPE core, its reduced form and the audit of
//!   the fundamental estimates.
//! * [`methods`]: inexact Douglas-Rachford (Eckstein-Yao), inexact
//!   Chambolle-Pock, inexact Davis-Yin and the baselines.
//! * [`problems`]: seeded TV and Huber-ℓ₁ test instances.
//! * [`harness`]: named experiments, CSV traces and audits.

// `!(a <= b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod hpe;
pub mod linalg;
pub mod methods;
pub mod operators;
pub mod problems;

pub use error::{Error, Result};
