//! Core library: geometry, frames of reference, panel placement strategies,
//! scenario files, a simulated searcher and trial metrics.

// `!(x > 0.0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod designspace;
pub mod frames;
pub mod geometry;
pub mod metrics;
pub mod placement;
pub mod scenario;
pub mod session;

pub use agent::{AgentParams, GazeSample, GazeTarget, OpenEvent, ScanPolicy};
pub use designspace::{EntityRef, SpatialLayout, XrObject};
pub use frames::{FrameOfReference, SceneState};
pub use geometry::{FovSpec, Pose, Rotation, Vec3};
pub use metrics::{Format, SessionSummary, TrialMetrics};
pub use placement::{PlacementParams, Strategy, StrategyConfig};
pub use scenario::{parse_scenario, Category, Context, Scenario};
pub use session::{run_batch, run_session, RunOptions, SessionResult};
