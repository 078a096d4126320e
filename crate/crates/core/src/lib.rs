//! Model of a four-dimensional time-bin/phase BB84 link.
//!
//! The crate covers the full chain from state preparation to secret key:
//!
//! * [`states`]: the eight protocol states over four time bins (and the
//!   two-dimensional comparison protocol) and their overlaps.
//! * [`txpattern`]: compilation of symbol sequences into master/slave laser
//!   drive timelines and the inverse decoder.
//! * [`receiver`]: amplitude propagation through Bob's unbalanced
//!   interferometers, post-selection and sifting.
//! * [`channel`]: analytic gains and error rates for weak coherent pulses
//!   over fiber.
//! * [`finite_key`]: one-decoy bounds, phase-error estimate and key length.
//! * [`montecarlo`]: pulse-level stochastic simulation with photon-number
//!   bookkeeping.
//! * [`optimizer`]: derivative-free maximisation of the key rate.
//!
//! The crate is `no_std` and only needs an allocator.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` style guards are intentional: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod channel;
mod error;
pub mod finite_key;
pub mod montecarlo;
pub mod optimizer;
pub mod receiver;
pub mod states;
pub mod txpattern;

pub use error::{Error, Result};
pub use states::{Basis, Dimension, StateVector, Symbol, TimeBin};
