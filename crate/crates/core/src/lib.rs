//! Minimum-spanning-tree regularization of point clouds.
//!
//! Maximizing the length of a cloud's minimum spanning tree while holding the
//! points near the unit sphere spreads them uniformly and counteracts
//! dimensional collapse. This crate provides the MST machinery, the losses and
//! their exact subgradients, a full-batch descent engine, a uniformity metric,
//! a collapse-sensitivity scan and an MST-growth intrinsic-dimension estimator.

pub mod descent;
pub mod dim_estimator;
pub mod error;
pub mod generators;
pub mod io;
pub mod mst;
pub mod point_cloud;
pub mod presets;
pub mod regularizers;
pub mod stats;
pub mod uniformity;
pub mod verify;

pub use error::{Result, TregError};
pub use mst::{brute_force_mst, kruskal_mst, mst_length_gradient, prim_mst, Mst, MstEdge, MstGradient};
pub use point_cloud::{center_of_mass, pairwise_distances, DistanceMatrix, Gradient, PointCloud};
pub use regularizers::{LossReport, LossWeights};
