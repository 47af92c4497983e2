//! Reference/target frame runtime: predicts off-trajectory reference poses,
//! decides per target whether warping is safe, and simulates the resulting
//! task timeline on the device renderers and the offload link.

pub mod latency;
pub mod predictor;
pub mod schedule;
pub mod task;
pub mod timeline;

pub use latency::{FixedLatency, LatencyModel, RemoteConfig};
pub use predictor::{predict_reference_pose, predict_reference_pose_with_lead, PredictorState};
pub use schedule::{plan_references, schedule, schedule_timing, FrameOutcome, FrameRenderer, RuntimeConfig, RuntimeMode, ScheduleOutput, SceneRenderer};
pub use task::{RenderTask, Resource, TaskKind};
pub use timeline::{simulate, Timeline, TimelineEvent};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuntimeError {
    #[error("runtime: direction prediction needs at least 2 poses, have {have}")]
    InsufficientHistory { have: usize },
    #[error("runtime: {0}")]
    Config(String),
    #[error("runtime: {0}")]
    Schedule(String),
}
