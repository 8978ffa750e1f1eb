//! Deterministic pseudo-labelling pipeline for LiDAR sequences.
//!
//! The pipeline turns sequences of point clouds with per-frame ego poses into
//! high-quality stationary-object pseudo-labels:
//!
//! 1. [`aggregate`] — project every frame into the global frame, concatenate,
//!    voxel-downsample, and re-localize per frame (full-sequence aggregation).
//! 2. [`qst`] — score each tracked object's stationarity by point-weighted
//!    footprint overlap and build quasi-stationary training labels.
//! 3. [`scp`] — cluster per-frame predictions in the global frame, drop
//!    low-support clusters, fuse the rest, and back-project per frame.
//! 4. [`fuse`] — beta-calibrate scores and merge stationary boxes with a
//!    per-frame detector's output into the final pseudo-label set.
//!
//! [`sim`] provides a synthetic scene and detector simulator with exact ground
//! truth, [`eval`] the matching metrics, and [`io`] the versioned on-disk
//! formats tying the stages together.

pub mod aggregate;
pub mod eval;
pub mod fuse;
pub mod geom;
pub mod io;
pub mod qst;
pub mod scp;
pub mod sim;
