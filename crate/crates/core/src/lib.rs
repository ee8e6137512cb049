//! Vehicle segmentation and tracking from sparse multi-layer 2D LIDAR scans.
//!
//! The processing pipeline runs in four stages per scan:
//!
//! 1. **Segmentation** — range-adaptive breakpoint detection per layer plus
//!    cross-layer merging splits a scan into candidate object segments.
//! 2. **T-linkage clustering** — agglomerative preference-based clustering
//!    removes outliers and recovers the line structures (one side or an
//!    L-shape) of each segment; the dominant cluster gives the heading.
//! 3. **Rectangle fitting** — oriented rectangles are fitted under area,
//!    closeness and variance search criteria plus the T-linkage heading, and
//!    the candidate with the lowest residual-variance cost wins.
//! 4. **Tracking** — detections are assigned to tracks with a gated Hungarian
//!    solver and each track runs a bank of Kalman filters (stationary,
//!    constant-velocity, constant-acceleration) fused by multiple-model
//!    association, tracking the vehicle's nearest corner.
//!
//! A ray-casting scan simulator ([`sim`]) and an evaluation harness ([`eval`])
//! close the loop for experiments without sensor hardware.

pub mod association;
pub mod config;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod rectfit;
pub mod segmentation;
pub mod sim;
pub mod tlinkage;
pub mod tracking;

pub use error::{Error, Result};
pub use geometry::{Line2, OrientedRect, Point2};
pub use segmentation::{Scan, ScanPoint, Segment};
