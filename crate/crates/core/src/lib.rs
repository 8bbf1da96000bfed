//! Travelling pulses of a FitzHugh-Nagumo type reaction-diffusion-mechanics
//! model: construction, essential and point spectrum, Melnikov predictions
//! and direct simulation.

// `!(x > 0.0)` guards are meant to reject NaN; quadrature nodes keep their published digits.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod config;
pub mod contour;
pub mod error;
pub mod essential;
pub mod evans;
pub mod hermite;
pub mod io;
pub mod melnikov;
pub mod model;
pub mod ode;
pub mod pdesim;
pub mod pulse;
pub mod quad;

pub use error::{Error, Result};
pub use model::{ModelParams, SlowFastState};
