use nerfstream_core::camera::Trajectory;
use nerfstream_core::render::{render_frame_with, RenderOptions};
use nerfstream_core::warp::{fill_disoccluded, warp_with_probe, OccupancyProbe, PixelSource};
use nerfstream_core::{CameraPose, Frame, Intrinsics, SceneRep};

use crate::latency::{LatencyModel, RemoteConfig, PS_PER_SECOND};
use crate::predictor::{predict_reference_pose_with_lead, PredictorState, HISTORY_LEN};
use crate::task::{RenderTask, Resource, TaskKind};
use crate::timeline::{simulate, Timeline};
use crate::RuntimeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuntimeMode {
    Local,
    /// References rendered off-device and sent over the link.
    Remote,
}

impl std::str::FromStr for RuntimeMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "local" => Ok(Self::Local),
            "remote" => Ok(Self::Remote),
            _ => Err(format!("unknown runtime mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuntimeConfig {
    /// Targets served by one reference.
    pub window: usize,
    /// A target whose largest warp angle reaches this (radians) is fully
    /// rendered instead.
    pub phi: f64,
    pub mode: RuntimeMode,
    pub remote: RemoteConfig,
    pub ridge: f64,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self { window: 6, phi: 4f64.to_radians(), mode: RuntimeMode::Local, remote: RemoteConfig::default(), ridge: 1e-3 }
    }
}

impl RuntimeConfig {
    pub fn validate(&self) -> Result<(), RuntimeError> {
        if self.window == 0 {
            return Err(RuntimeError::Config("warping window must be at least 1".into()));
        }
        if !(self.phi >= 0.0) {
            return Err(RuntimeError::Config(format!("angle threshold {} must be >= 0", self.phi)));
        }
        if !(self.remote.bandwidth_bytes_per_s > 0.0) || !(self.remote.energy_nj_per_byte >= 0.0) {
            return Err(RuntimeError::Config("remote bandwidth must be > 0 and per-byte energy >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetRender {
    pub frame: Frame,
    pub max_warp_angle: f64,
    pub warped_pixels: usize,
    pub rendered_pixels: usize,
}

pub trait FrameRenderer {
    fn size(&self) -> (usize, usize);
    fn full(&self, pose: &CameraPose) -> Frame;
    fn target(&self, reference: &Frame, ref_pose: &CameraPose, tgt_pose: &CameraPose) -> TargetRender;
}

/// Renders with the pixel-centric renderer and fills disocclusions sparsely.
pub struct SceneRenderer<'a> {
    pub scene: &'a SceneRep,
    pub intr: Intrinsics,
    pub opts: RenderOptions,
    probe: OccupancyProbe,
}

impl<'a> SceneRenderer<'a> {
    pub fn new(scene: &'a SceneRep, intr: Intrinsics, opts: RenderOptions) -> Self {
        Self { scene, intr, opts, probe: OccupancyProbe::new(scene) }
    }
}

impl FrameRenderer for SceneRenderer<'_> {
    fn size(&self) -> (usize, usize) {
        (self.intr.width, self.intr.height)
    }

    fn full(&self, pose: &CameraPose) -> Frame {
        render_frame_with(pose, &self.intr, self.scene, &self.opts)
    }

    fn target(&self, reference: &Frame, ref_pose: &CameraPose, tgt_pose: &CameraPose) -> TargetRender {
        let w = warp_with_probe(reference, ref_pose, tgt_pose, &self.intr, Some(&self.probe));
        let filled = fill_disoccluded(&w, tgt_pose, &self.intr, self.scene, &self.opts);
        TargetRender {
            max_warp_angle: w.max_warp_angle(),
            warped_pixels: filled.count(PixelSource::WarpCopy),
            rendered_pixels: filled.count(PixelSource::SparseNerf),
            frame: filled.frame,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePlan {
    pub window: usize,
    /// Frame whose arrival triggers the render.
    pub dispatch_frame: usize,
    pub pose: CameraPose,
}

/// Frames `window * N + 1 ..= window * N + N` of `n` frames; frame 0 is the
/// bootstrap render.
pub fn window_frames(window: usize, n_window: usize, n_frames: usize) -> std::ops::Range<usize> {
    let start = window * n_window + 1;
    start..(start + n_window).min(n_frames)
}

pub fn window_count(n_window: usize, n_frames: usize) -> usize {
    n_frames.saturating_sub(1).div_ceil(n_window)
}

/// Window 0's reference is requested as soon as two poses exist; window
/// `k + 1`'s when window `k` starts, so it renders while window `k` warps.
/// Each is aimed at the middle of its window using only poses seen so far.
pub fn plan_references(traj: &Trajectory, cfg: &RuntimeConfig) -> Result<Vec<ReferencePlan>, RuntimeError> {
    cfg.validate()?;
    let n = traj.len();
    if n < 2 {
        return Err(RuntimeError::Config("trajectory needs at least two poses".into()));
    }
    let big_n = cfg.window;
    (0..window_count(big_n, n))
        .map(|k| {
            let d = if k == 0 { 1 } else { (k - 1) * big_n + 1 };
            let mut state = PredictorState::new(cfg.ridge);
            for i in d.saturating_sub(HISTORY_LEN - 1)..=d {
                state.push(*traj.pose(i));
            }
            let (t1, t2) = (traj.pose(d - 1), traj.pose(d));
            let center = (k * big_n + 1) as f64 + (big_n - 1) as f64 / 2.0;
            let pose = predict_reference_pose_with_lead(t1, t2, t2.timestamp - t1.timestamp, center - d as f64, &state)?;
            Ok(ReferencePlan { window: k, dispatch_frame: d, pose })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameOutcome {
    pub frame: usize,
    pub kind: TaskKind,
    pub window: Option<usize>,
    /// Largest warp angle from the window's reference; NaN if never warped.
    pub theta: f64,
    pub warped_pixels: usize,
    pub rendered_pixels: usize,
    pub pixels: usize,
}

impl FrameOutcome {
    pub fn warped_fraction(&self) -> f64 {
        self.warped_pixels as f64 / self.pixels as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleOutput {
    pub frames: Vec<Frame>,
    pub outcomes: Vec<FrameOutcome>,
    pub references: Vec<ReferencePlan>,
    pub tasks: Vec<RenderTask>,
    pub timeline: Timeline,
}

impl ScheduleOutput {
    pub fn fallback_count(&self) -> usize {
        self.outcomes.iter().filter(|o| o.kind == TaskKind::FallbackFull).count()
    }

    pub fn mean_warped_fraction(&self) -> f64 {
        self.outcomes.iter().map(FrameOutcome::warped_fraction).sum::<f64>() / self.outcomes.len() as f64
    }
}

fn arrival_ps(traj: &Trajectory, i: usize) -> u64 {
    ((traj.pose(i).timestamp - traj.pose(0).timestamp) * PS_PER_SECOND).round() as u64
}

struct TaskList<'l, L> {
    tasks: Vec<RenderTask>,
    latency: &'l L,
}

impl<L: LatencyModel> TaskList<'_, L> {
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        kind: TaskKind,
        resource: Resource,
        pose: CameraPose,
        frame: Option<usize>,
        window: Option<usize>,
        depends_on: Option<usize>,
        enqueue_ps: u64,
        rendered_pixels: usize,
    ) -> usize {
        let id = self.tasks.len();
        self.tasks.push(RenderTask {
            id,
            kind,
            pose,
            frame,
            window,
            depends_on,
            enqueue_ps,
            resource,
            duration_ps: self.latency.latency_ps(kind, rendered_pixels),
            energy_nj: self.latency.energy_nj(kind, rendered_pixels),
            rendered_pixels,
        });
        id
    }
}

pub fn schedule<R: FrameRenderer, L: LatencyModel>(
    traj: &Trajectory,
    cfg: &RuntimeConfig,
    renderer: &R,
    latency: &L,
) -> Result<ScheduleOutput, RuntimeError> {
    let references = plan_references(traj, cfg)?;
    let n = traj.len();
    let (w, h) = renderer.size();
    let pixels = w * h;
    let mut list = TaskList { tasks: Vec::new(), latency };
    let mut frames = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);

    let first = *traj.pose(0);
    list.push(TaskKind::FallbackFull, Resource::NerfRenderer, first, Some(0), None, None, 0, pixels);
    frames.push(renderer.full(&first));
    outcomes.push(FrameOutcome { frame: 0, kind: TaskKind::FallbackFull, window: None, theta: f64::NAN, warped_pixels: 0, rendered_pixels: pixels, pixels });

    for r in &references {
        let enqueue = arrival_ps(traj, r.dispatch_frame);
        let reference = renderer.full(&r.pose);
        let ref_task = match cfg.mode {
            RuntimeMode::Local => list.push(TaskKind::Reference, Resource::NerfRenderer, r.pose, None, Some(r.window), None, enqueue, pixels),
            RuntimeMode::Remote => {
                let id = list.push(TaskKind::Reference, Resource::RemoteRenderer, r.pose, None, Some(r.window), None, enqueue, pixels);
                list.tasks[id].duration_ps = cfg.remote.render_ps;
                list.tasks[id].energy_nj = 0.0;
                let bytes = cfg.remote.frame_bytes(w, h);
                let tx = list.push(TaskKind::Transfer, Resource::WirelessLink, r.pose, None, Some(r.window), Some(id), enqueue, 0);
                list.tasks[tx].duration_ps = cfg.remote.transfer_ps(bytes);
                list.tasks[tx].energy_nj = cfg.remote.transfer_nj(bytes);
                tx
            }
        };
        for j in window_frames(r.window, cfg.window, n) {
            let pose = *traj.pose(j);
            let arrive = arrival_ps(traj, j);
            let t = renderer.target(&reference, &r.pose, &pose);
            // the warp angle is known once the target is warped
            if t.max_warp_angle >= cfg.phi {
                list.push(TaskKind::FallbackFull, Resource::NerfRenderer, pose, Some(j), Some(r.window), None, arrive, pixels);
                frames.push(renderer.full(&pose));
                outcomes.push(FrameOutcome {
                    frame: j,
                    kind: TaskKind::FallbackFull,
                    window: Some(r.window),
                    theta: t.max_warp_angle,
                    warped_pixels: 0,
                    rendered_pixels: pixels,
                    pixels,
                });
            } else {
                list.push(TaskKind::Target, Resource::SparseRenderer, pose, Some(j), Some(r.window), Some(ref_task), arrive, t.rendered_pixels);
                outcomes.push(FrameOutcome {
                    frame: j,
                    kind: TaskKind::Target,
                    window: Some(r.window),
                    theta: t.max_warp_angle,
                    warped_pixels: t.warped_pixels,
                    rendered_pixels: t.rendered_pixels,
                    pixels,
                });
                frames.push(t.frame);
            }
        }
    }
    let timeline = simulate(&list.tasks)?;
    Ok(ScheduleOutput { frames, outcomes, references, tasks: list.tasks, timeline })
}

/// Timing only: every target renders `rendered_pixels` and none falls back.
pub fn schedule_timing<L: LatencyModel>(
    traj: &Trajectory,
    cfg: &RuntimeConfig,
    size: (usize, usize),
    rendered_pixels: usize,
    latency: &L,
) -> Result<Timeline, RuntimeError> {
    struct Blank((usize, usize), usize);
    impl FrameRenderer for Blank {
        fn size(&self) -> (usize, usize) {
            self.0
        }
        fn full(&self, _: &CameraPose) -> Frame {
            Frame::empty(0, 0)
        }
        fn target(&self, _: &Frame, _: &CameraPose, _: &CameraPose) -> TargetRender {
            TargetRender { frame: Frame::empty(0, 0), max_warp_angle: 0.0, warped_pixels: 0, rendered_pixels: self.1 }
        }
    }
    let cfg = RuntimeConfig { phi: f64::INFINITY, ..*cfg };
    Ok(schedule(traj, &cfg, &Blank(size, rendered_pixels), latency)?.timeline)
}
