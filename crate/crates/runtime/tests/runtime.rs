use nerfstream_core::camera::{generate_orbit_trajectory, CameraPose, Intrinsics, Trajectory};
use nerfstream_core::geom::{angle_between, Vec3};
use nerfstream_core::render::{render_frame_with, RenderOptions};
use nerfstream_core::scene::{generate_scene, SceneKind, ScenePlan, SizeClass};
use nerfstream_runtime::timeline::concurrent;
use nerfstream_runtime::*;
use proptest::prelude::*;

const FPS: f64 = 30.0;

/// Camera moving along x while its forward vector turns about `axis` at
/// `omega` radians per frame.
fn turning(n: usize, omega: f64, axis: Vec3) -> Vec<CameraPose> {
    let axis = nalgebra::Unit::new_normalize(axis);
    let base = Vec3::new(0.2, -0.1, 1.0).normalize();
    (0..n)
        .map(|i| {
            let rot = nalgebra::Rotation3::from_axis_angle(&axis, omega * i as f64);
            CameraPose::from_forward(Vec3::new(0.01 * i as f64, 0.0, 0.0), rot * base, Vec3::y(), i as f64 / FPS)
        })
        .collect()
}

fn true_direction(i: usize, omega: f64, axis: Vec3) -> Vec3 {
    let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), omega * i as f64);
    rot * Vec3::new(0.2, -0.1, 1.0).normalize()
}

#[test]
fn predictor_tracks_slow_rotation() {
    let poses = turning(5, 0.002, Vec3::y());
    let d = PredictorState::from_poses(&poses).predict_direction().unwrap();
    assert!(angle_between(&d, &true_direction(5, 0.002, Vec3::y())) < 0.01);
}

proptest! {
    #[test]
    fn predictor_error_below_bound(omega in 0.0f64..0.01, ax in -1.0f64..1.0, ay in 0.2f64..1.0, az in -1.0f64..1.0, start in 0usize..50) {
        let axis = Vec3::new(ax, ay, az);
        let poses = turning(start + 5, omega, axis);
        let d = PredictorState::from_poses(&poses[start..]).predict_direction().unwrap();
        prop_assert!(angle_between(&d, &true_direction(start + 5, omega, axis)) < 0.01);
    }
}

fn straight(n: usize) -> Trajectory {
    let poses = (0..n).map(|i| CameraPose::from_forward(Vec3::new(0.01 * i as f64, 0.0, -3.0), Vec3::z(), Vec3::y(), i as f64 / FPS)).collect();
    Trajectory::from_poses(poses).unwrap()
}

const MS: u64 = 1_000_000_000;

#[test]
fn reference_count_for_nine_frames() {
    let cfg = RuntimeConfig { window: 4, ..Default::default() };
    let tl = schedule_timing(&straight(9), &cfg, (16, 16), 0, &FixedLatency::uniform(8 * MS, 2 * MS)).unwrap();
    assert_eq!(tl.count(TaskKind::Reference), 2);
    assert_eq!(tl.count(TaskKind::FallbackFull), 1);
    assert_eq!(tl.count(TaskKind::Target), 8);
    assert_eq!(tl.frames[0].kind, TaskKind::FallbackFull);
}

#[test]
fn next_reference_overlaps_current_window() {
    let cfg = RuntimeConfig { window: 16, ..Default::default() };
    let target = 5 * MS;
    let tl = schedule_timing(&straight(1 + 16 * 4), &cfg, (32, 32), 0, &FixedLatency::uniform(4 * target, target)).unwrap();
    assert!(tl.dependency_violations().is_empty());
    assert!(tl.exclusivity_violations().is_empty());
    let refs: Vec<&TimelineEvent> = tl.events.iter().filter(|e| e.kind == TaskKind::Reference).collect();
    assert_eq!(refs.len(), 4);
    for k in 0..refs.len() - 1 {
        let window_k: Vec<&TimelineEvent> = tl.events.iter().filter(|e| e.kind == TaskKind::Target && e.depends_on == Some(refs[k].task_id)).collect();
        assert_eq!(window_k.len(), 16);
        assert!(window_k.iter().any(|t| concurrent(refs[k + 1], t)), "reference {} does not overlap window {k}", k + 1);
        for t in &window_k {
            assert!(t.start_ps >= refs[k].end_ps);
        }
    }
}

#[test]
fn remote_transfer_arithmetic() {
    let cfg = RuntimeConfig { window: 4, mode: RuntimeMode::Remote, ..Default::default() };
    let tl = schedule_timing(&straight(9), &cfg, (16, 16), 0, &FixedLatency::uniform(8 * MS, 2 * MS)).unwrap();
    let tx: Vec<&TimelineEvent> = tl.events.iter().filter(|e| e.kind == TaskKind::Transfer).collect();
    assert_eq!(tx.len(), 2);
    for t in tx {
        assert_eq!(t.resource, Resource::WirelessLink);
        assert_eq!(t.end_ps - t.start_ps, 76_800_000);
        assert_eq!(t.energy_nj, 76_800.0);
    }
    assert!(tl.events.iter().all(|e| e.kind != TaskKind::Reference || e.resource == Resource::RemoteRenderer));
    assert!(tl.dependency_violations().is_empty());
}

fn target_times(tl: &Timeline) -> Vec<(usize, u64, u64)> {
    tl.frames.iter().map(|f| (f.frame, tl.event(f.task_id).unwrap().start_ps, f.finish_ps)).collect()
}

#[test]
fn unbounded_link_matches_local_with_remote_latency() {
    let remote_ps = 3 * MS;
    let remote = RemoteConfig { bandwidth_bytes_per_s: f64::INFINITY, render_ps: remote_ps, ..Default::default() };
    let traj = straight(1 + 16 * 3);
    let r = schedule_timing(&traj, &RuntimeConfig { window: 16, mode: RuntimeMode::Remote, remote, ..Default::default() }, (16, 16), 0, &FixedLatency::uniform(20 * MS, 2 * MS)).unwrap();
    // local renderer whose references take the remote time; the bootstrap
    // frame is the only full render and runs first in both
    let mut local_lat = FixedLatency::uniform(remote_ps, 2 * MS);
    local_lat.full_ps = remote_ps;
    let l = schedule_timing(&traj, &RuntimeConfig { window: 16, ..Default::default() }, (16, 16), 0, &local_lat).unwrap();
    // local references share the renderer with the bootstrap, so compare
    // once the bootstrap is out of the way
    let (rt, lt) = (target_times(&r), target_times(&l));
    assert_eq!(rt.len(), lt.len());
    for ((_, rs, re), (_, ls, le)) in rt.iter().zip(&lt).skip(17) {
        assert_eq!((rs, re), (ls, le));
    }
}

#[test]
fn faster_remote_shortens_makespan() {
    let traj = straight(1 + 16 * 4);
    let lat = FixedLatency::uniform(400 * MS, 10 * MS);
    let local = schedule_timing(&traj, &RuntimeConfig { window: 16, ..Default::default() }, (16, 16), 0, &lat).unwrap();
    let remote = RemoteConfig { render_ps: 40 * MS, ..Default::default() };
    let r = schedule_timing(&traj, &RuntimeConfig { window: 16, mode: RuntimeMode::Remote, remote, ..Default::default() }, (16, 16), 0, &lat).unwrap();
    assert!(r.makespan_ps() < local.makespan_ps());
}

proptest! {
    #[test]
    fn timelines_respect_dependencies_and_resources(
        n in 2usize..60,
        window in 1usize..20,
        full in 1u64..200,
        target in 1u64..50,
        remote in any::<bool>(),
    ) {
        let cfg = RuntimeConfig { window, mode: if remote { RuntimeMode::Remote } else { RuntimeMode::Local }, ..Default::default() };
        let tl = schedule_timing(&straight(n), &cfg, (8, 8), 0, &FixedLatency::uniform(full * MS, target * MS)).unwrap();
        prop_assert!(tl.dependency_violations().is_empty());
        prop_assert!(tl.exclusivity_violations().is_empty());
        prop_assert_eq!(tl.frames.len(), n);
        for r in tl.events.iter().filter(|e| matches!(e.kind, TaskKind::Reference | TaskKind::Transfer)) {
            let served = tl.events.iter().filter(|e| e.depends_on == Some(r.task_id) && e.kind == TaskKind::Target).count();
            prop_assert!(served <= window);
        }
        let again = schedule_timing(&straight(n), &cfg, (8, 8), 0, &FixedLatency::uniform(full * MS, target * MS)).unwrap();
        prop_assert_eq!(tl, again);
    }
}

fn tiny_run(phi: f64, window: usize) -> (ScheduleOutput, Trajectory, nerfstream_core::SceneRep) {
    let scene = generate_scene(&ScenePlan::new(SceneKind::Structured, 0, SizeClass::Tiny));
    let traj = generate_orbit_trajectory(Vec3::zeros(), 2.5, FPS, 0.3, 13).unwrap();
    let renderer = SceneRenderer::new(&scene, Intrinsics::square(16), RenderOptions::default());
    let out = schedule(&traj, &RuntimeConfig { window, phi, ..Default::default() }, &renderer, &FixedLatency::uniform(8 * MS, 2 * MS)).unwrap();
    (out, traj, scene)
}

#[test]
fn zero_threshold_renders_everything() {
    let (out, traj, scene) = tiny_run(0.0, 4);
    assert_eq!(out.fallback_count(), traj.len());
    for (i, f) in out.frames.iter().enumerate() {
        assert_eq!(f, &render_frame_with(traj.pose(i), &Intrinsics::square(16), &scene, &RenderOptions::default()));
    }
}

#[test]
fn warped_pixels_grow_with_threshold() {
    let runs: Vec<ScheduleOutput> = [1.0f64, 2.0, 4.0, 8.0].iter().map(|d| tiny_run(d.to_radians(), 4).0).collect();
    for w in runs.windows(2) {
        for (a, b) in w[0].outcomes.iter().zip(&w[1].outcomes) {
            assert!(b.warped_pixels >= a.warped_pixels);
        }
        assert!(w[1].fallback_count() <= w[0].fallback_count());
    }
    assert!(runs[3].fallback_count() < runs[3].outcomes.len());
}
