//! Simulator for reconfigurable intelligent computational surfaces (RICS).
//!
//! Two surface designs are modeled end to end:
//!
//! * **Sensing design**: the surface reflects user traffic towards the base
//!   station while a handful of semi-active elements capture I/Q samples. A
//!   trained diffractive network classifies which users are on the air, and
//!   the base station uses that to allocate TDMA slots
//!   ([`throughput`]).
//! * **Secrecy design**: every element splits incident power between a
//!   reflected beam for the legitimate receiver and a refracted beam that an
//!   analog operator turns into interference for an eavesdropper
//!   ([`secrecy`]).

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analog;
pub mod config;
pub mod error;
pub mod geometry;
pub mod onn;
pub mod par;
pub mod rng;
pub mod secrecy;
pub mod signal;
pub mod surface;
pub mod synth;
pub mod throughput;

pub use error::{Error, Result};
pub use num_complex;
