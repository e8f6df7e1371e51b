//! Hypergraph p-Laplacian interpolation on point clouds.
//!
//! Build an ε-ball or k-NN hypergraph over a point cloud, then fill in
//! unlabeled vertex values by minimizing
//! `Σ_k max_{i,j in e_k} w_ij |u_i - u_j|^p` subject to `u = y` on the labeled
//! vertices. The minimization runs a stochastic primal-dual hybrid gradient
//! method whose dual step is an exact prox of the conjugate of the edge-wise
//! max penalty. The pairwise graph p-Laplacian is supported through the same
//! machinery by treating each graph edge as a two-vertex hyperedge.

pub mod energy;
pub mod error;
pub mod geometry;
pub mod hypergraph;
pub mod inpaint;
pub mod interp;
pub mod prox;
pub mod solver;
pub mod ssl;

pub use error::{Error, Result};
pub use geometry::{LabelConstraints, NeighborIndex, PointCloud};
pub use hypergraph::{GraphSpec, Hyperedge, Hypergraph, HypergraphKind, Method, PairRule, WeightScheme};
