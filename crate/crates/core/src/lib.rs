//! Synthesis of continuous-time recurrent networks from trained
//! feedforward approximations of vector fields.
//!
//! A three-layer net `q ↦ A σ(Bq + θ)` fit to a field `F` is recast as a
//! leaky recurrent network with weights `[[0, A], [0, BA]]` whose output
//! units follow the flow of `F`. Forced systems merge an unforced network
//! with a network generating the forcing signal.
//!
//! Modules follow the pipeline: [`systems`] and [`dataset`] produce
//! training data, [`ffnet`] fits it, [`synthesis`] builds the recurrent
//! networks, [`integrate`] runs both systems and [`analysis`] compares them.
//! [`pipeline`] wires the stages together and writes run artifacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod dataset;
pub mod error;
pub mod ffnet;
pub mod integrate;
pub mod io;
pub mod linalg;
pub mod par;
pub mod pipeline;
pub mod recipes;
pub mod synthesis;
pub mod systems;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use ffnet::{Activation, FfNet};
pub use synthesis::{ForcedRnn, SynthRnn};
pub use systems::{Domain, VectorField};
