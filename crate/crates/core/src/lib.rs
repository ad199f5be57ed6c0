//! Simulated multi-view recognition of tabletop clutter with
//! uncertainty-driven push exploration.
//!
//! The pipeline per exploration step:
//!
//! 1. render every camera of the [`geometry::ViewSet`] against the
//!    [`scene::SceneState`],
//! 2. run the segmentation oracle ([`perception`]) on each view,
//! 3. lift masks to point-cloud partitions and merge them across views
//!    ([`recognition`]),
//! 4. build the top-down uncertainty field ([`uncertainty`]),
//! 5. plan a push ([`planner`]) and execute it ([`pushsim`]).
//!
//! [`harness`] drives episodes and benchmarks on top of these stages.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod perception;
pub mod planner;
pub mod pushsim;
pub mod recognition;
pub mod scene;
pub mod seed;
pub mod uncertainty;

pub use error::{Error, Result};
