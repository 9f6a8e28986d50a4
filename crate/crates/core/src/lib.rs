//! Proactive conflict avoidance for a mobile robot sharing space with
//! pedestrians, together with the deterministic planar simulator it runs in.
//!
//! Each control tick runs the same pipeline: a lidar scan is fused into a
//! truncated signed distance grid that labels returns intruding into
//! long-free space as dynamic ([`detect`]); dynamic points are clustered and
//! tracked with a constant-velocity Kalman filter ([`track`]); tracks are
//! swept along their predicted motion into a robot-centered potential map
//! ([`field`]); a reachable avoidance point is chosen from that map
//! ([`avoid`]); and a conflict state machine decides whether to navigate,
//! yield, or return to the saved task ([`pilot`]). [`runner`] wires these
//! to [`world`] and produces replayable traces.

pub mod avoid;
pub mod detect;
pub mod field;
pub mod geometry;
pub mod metrics;
pub mod pilot;
pub mod render;
pub mod runner;
pub mod scenario;
pub mod trace;
pub mod track;
pub mod world;
