//! Volumetric instance-segmentation toolkit.
//!
//! The crate covers the desk-scale algorithmic core of an XXL-CT
//! instance-segmentation workflow:
//!
//! - [`volume`] — dense label/scalar volumes, raw+sidecar file I/O,
//!   connected components, per-label binary morphology, axis slicing and
//!   blockwise tiling.
//! - [`preprocess`] — total-variation denoising and the label-to-3-class
//!   (background / object / border) transform.
//! - [`fusion`] — fuses per-slice 2D instance maps from three orthogonal
//!   plane stacks into one 3D instance labelling by matching shared line
//!   segments across planes.
//! - [`instancer`] — marker-based watershed that turns a 3-class map into
//!   instances, flooding object and border voxels by geodesic distance.
//! - [`eval`] — the segment correlation matrix (reference x detected IoU
//!   with prescribed orderings), main-diagonal statistics, and CSV /
//!   heatmap exports.
//! - [`phantom`] — deterministic synthetic ground-truth volumes (sheets,
//!   pipes, rivets, brackets) with analytic voxel counts, noisy scalar
//!   renderings and derived slice stacks, used as test oracles.
//!
//! All operations are pure functions of their inputs: identical inputs
//! produce identical outputs regardless of thread count.

pub mod error;
pub mod eval;
pub mod fusion;
pub mod instancer;
pub mod phantom;
pub mod preprocess;
pub mod volume;

pub use error::{Error, Result};
