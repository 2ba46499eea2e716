//! Place recognition for forward-looking sonar.
//!
//! The crate covers the whole workflow: a planar raycast simulator that
//! produces grid-sampled scans around underwater assets ([`simgen`]), image
//! enhancement ([`enhance`]), field-of-view overlap ground truth
//! ([`geometry`]), compact descriptors from a small convolutional encoder
//! followed by a frozen random Gaussian projection ([`descriptor`]),
//! triplet-loss training with online mining ([`training`]) and retrieval
//! metrics ([`eval`]). [`pipeline`] chains them from a single run config.

pub mod descriptor;
pub mod enhance;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod registry;
pub mod rng;
pub mod simgen;
pub mod training;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    wrap_angle, DatasetManifest, Descriptor, Pose2D, Role, ScanRecord, SonarConfig, SonarImage,
    DESCRIPTOR_DIM,
};
