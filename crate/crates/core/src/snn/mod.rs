//! Discrete-time spiking network engine.
//!
//! Layers of LIF (spiking) or LI (non-spiking readout) neurons are simulated
//! with a fixed step for `steps` iterations per input frame. The forward pass
//! can record an [`UnrolledTape`] which [`Network::backward`] differentiates
//! in reverse, replacing the Heaviside derivative with a fast-sigmoid
//! surrogate.

mod adam;
mod backward;
pub mod checkpoint;
mod loss;
mod network;
mod neuron;

pub use adam::Adam;
pub use backward::Gradients;
pub use loss::{loss_softmax_ce, softmax, softmax_ce_batch};
pub use network::{decide, LayerParams, Network, Stimulus, UnrolledTape};
pub use neuron::{
    li_step, lif_step, CellKind, Dynamics, LayerState, LifParams, MembraneForm, ResetMode,
    SpikeFn, SurrogateSpec,
};
