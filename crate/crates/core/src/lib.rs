//! Robust synchronization of rotations over SO(d).
//!
//! Given noisy measurements `R_ij ≈ R_iᵀ R_j` of the ratios between unknown
//! rotations `R_1, …, R_n`, this crate estimates the rotations (up to one
//! global rotation) with three relaxations:
//!
//! * [`spectral::solve_eig`]: the smallest eigenvectors of the graph
//!   connection Laplacian,
//! * [`adm::solve_sdp_ls`]: the least-squares semidefinite relaxation,
//! * [`adm::solve_lud`]: the least unsquared deviations (LUD) relaxation,
//!   `min Σ‖G_ij − R_ij‖` over PSD Gram matrices with identity diagonal
//!   blocks, which tolerates a large fraction of outlier measurements.
//!
//! Both semidefinite programs are solved by an alternating-direction
//! augmented-Lagrangian method on the dual. The [`measurements`] module
//! generates synthetic instances under the outlier and perturbation models,
//! [`evaluate`] rounds Gram matrices to rotations and scores them, and
//! [`experiments`] drives the parameter sweeps used by the `rotsync` CLI.

pub mod adm;
pub mod error;
pub mod evaluate;
pub mod experiments;
pub mod linalg;
pub mod measurements;
pub mod rng;
pub mod so_group;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use measurements::MeasurementGraph;
pub use so_group::Rotation;
