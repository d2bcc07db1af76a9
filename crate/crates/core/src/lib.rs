//! Contrastive graph-autoencoder anomaly detection on heterogeneous graphs.
//!
//! Nodes of one scored type are embedded by per-meta-path GCN encoders,
//! reconstructed by attribute and structure decoders, and contrasted
//! against sampled meta-path instances by a bilinear discriminator. The
//! anomaly score mixes reconstruction error with the discriminator's
//! confusion between positive and negative instances.

pub mod error;
pub mod evaluation;
pub mod hetgraph;
pub mod injector;
pub mod linalg;
pub mod model;
pub mod neural;
pub mod pipeline;
pub mod sampler;

pub use error::{Error, Result};
