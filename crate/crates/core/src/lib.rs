//! Autonomous time-delay Boolean network reservoir computing.
//!
//! The crate is organised around the life cycle of one reservoir:
//!
//! - [`network`] draws a random network from hyperparameters and derives each
//!   node's truth table.
//! - [`sim`] integrates the Glass-model dynamics of that network, either with a
//!   fixed-step reference engine or an event-driven engine.
//! - [`io`] covers the synchronous layers around the reservoir: fixed-point
//!   input encoding, ridge-regression readout training and closed-loop
//!   prediction.
//! - [`mackey_glass`] produces the chaotic training signal.
//! - [`analysis`] holds metrics and experiments (NRMSE, fading-memory decay
//!   time, hyperparameter sweeps, spectra, delay embeddings).
//! - [`hdl`] compiles a network into Verilog.
//! - [`experiment`] ties the pieces together into the prediction pipeline used
//!   by the command-line tool and the acceptance suite.

pub mod analysis;
pub mod error;
pub mod experiment;
pub mod hdl;
pub mod io;
pub mod mackey_glass;
pub mod network;
pub mod sim;

pub use error::{Error, Result};
