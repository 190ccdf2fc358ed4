//! Spiking-neural-network decision feedback equalization.
//!
//! The crate is organised along the receive chain:
//!
//! - [`link`]: bit source, Gray mapping, FIR channels and AWGN.
//! - [`encoding`]: ternary spike encoding of received samples and one-hot
//!   encoding of fed-back decisions.
//! - [`snn`]: discrete-time LIF/LI simulation, surrogate-gradient BPTT, Adam
//!   and the checkpoint container.
//! - [`equalizers`]: the SNN-DFE, ANN-DFE baselines and the classical ZF,
//!   LMMSE, MMSE-DFE and BCJR references.
//! - [`harness`]: experiment configuration, training, BER sweeps and result
//!   files behind the `spikeq` CLI.

pub mod encoding;
pub mod equalizers;
mod error;
pub mod harness;
pub mod link;
pub mod rng;
pub mod snn;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
