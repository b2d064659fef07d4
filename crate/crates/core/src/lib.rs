//! Community detection in networks with continuous vertex attributes.
//!
//! The model is a stochastic block model whose vertices also carry a scalar
//! attribute drawn from a per-community Gaussian. Inference runs belief
//! propagation for the labels and expectation-maximization for the
//! parameters; see [`detect`].

pub mod attr;
pub mod baselines;
pub mod bp;
pub mod em;
mod error;
pub mod experiment;
pub mod generate;
pub mod graph;
pub mod io;
pub mod kmeans;
pub mod matrix;
pub mod metrics;
pub mod seeds;

pub use attr::ModelParams;
pub use bp::{BpConfig, BpState, Marginals, Schedule};
pub use em::{detect, DetectConfig, DetectionResult};
pub use error::{Error, Result};
pub use graph::{AttributedNetwork, GroundTruth};
pub use matrix::SquareMatrix;
