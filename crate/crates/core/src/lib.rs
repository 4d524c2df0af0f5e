//! Diffusion-based counterfactual and model-level explanations for graph
//! neural networks.
//!
//! The crate is organized bottom-up:
//!
//! * [`tensor`]: dense tensors, reverse-mode autodiff, Adam, checkpoints.
//! * [`graph`]: graph model, synthetic generators, subgraphs, dataset files.
//! * [`diffusion`]: discrete edge-flip forward process.
//! * [`gcn`]: the target classifier being explained.
//! * [`ppgn`]: the noise-conditioned denoiser.
//! * [`train`]: distribution and counterfactual losses, explainer training.
//! * [`explain`]: counterfactual explanations at a controlled modification ratio.
//! * [`sampler`]: classifier-guided reverse sampling for model-level explanations.
//! * [`metrics`]: CF-ACC, fidelity, AUC, MMD, robustness and the random baseline.

pub mod diffusion;
pub mod error;
pub mod exec;
pub mod explain;
pub mod gcn;
pub mod graph;
pub mod metrics;
mod nn;
pub mod ppgn;
pub mod rng;
pub mod sampler;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use exec::Exec;
