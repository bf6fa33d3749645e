//! Spectral graph convolution for signed directed graphs.
//!
//! The library builds the complex Hermitian adjacency matrix and magnetic
//! Laplacian of a signed directed graph, verifies their spectral properties
//! numerically, and trains a spectral convolution model for link sign
//! prediction on edge-list datasets.

pub mod cli;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod spectral;
