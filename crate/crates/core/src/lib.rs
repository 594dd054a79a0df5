//! Network-wide traffic speed forecasting with a traffic graph
//! convolutional LSTM.
//!
//! The crate builds the road-network matrices (adjacency, k-hop
//! neighborhoods, shortest-path distances, free-flow reachability, and the
//! Hadamard support masks), runs a masked graph convolution into a modified
//! LSTM cell with a neighborhood cell-state gate, and trains the whole thing
//! with RMSProp under weight-sparsity and feature-consistency penalties.
//! Vanilla-LSTM and localized-spectral baselines share the training loop,
//! metrics, and checkpoint format.
//!
//! All numeric code is generic over the [`Scalar`] floating-point type; the
//! aliases below pin the default double-precision build used by the CLI.

pub mod activation;
pub mod baselines;
pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod gradsuite;
pub mod graph;
pub mod lstm;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod param;
pub mod scalar;
pub mod tgc;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default double-precision dense matrix.
pub type Mat = matrix::DenseMatrix<f64>;
/// Default double-precision traffic graph.
pub type Graph = graph::TrafficGraph<f64>;
/// Default double-precision speed dataset.
pub type Dataset = data::SpeedDataset<f64>;
/// Default double-precision forecaster.
pub type Forecaster = model::Model<f64>;
/// Default double-precision training configuration.
pub type Config = training::TrainConfig<f64>;
