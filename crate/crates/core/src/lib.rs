//! Scene model, pixel-centric renderer, depth-based frame warping and the
//! memory-centric streaming renderer.

pub mod camera;
pub mod frame;
pub mod geom;
pub mod render;
pub mod scene;
pub mod streaming;
pub mod trace;
pub mod warp;

pub use camera::{CameraError, CameraPose, Intrinsics, RigidTransform, Trajectory};
pub use frame::{Frame, INFINITE_DEPTH};
pub use scene::{SceneKind, SceneRep};
