use std::collections::{BTreeSet, HashMap, HashSet};

use nerfstream_core::camera::{generate_orbit_trajectory, CameraPose, Intrinsics};
use nerfstream_core::geom::Vec3;
use nerfstream_core::render::{gather_plan, index_rays, render_frame, sample_structured, Ray, RenderOptions};
use nerfstream_core::scene::{generate_clustered_cloud, generate_scene, GridLevel, Mlp, SceneKind, SceneRep, ScenePlan, SizeClass, VoxelGrid};
use nerfstream_core::streaming::*;
use nerfstream_core::trace::MemKind;
use nerfstream_core::Frame;
use proptest::prelude::*;

fn pose_at(angle: f64) -> CameraPose {
    let eye = Vec3::new(angle.sin(), 0.3, -angle.cos()) * 2.5;
    CameraPose::look_at(eye, Vec3::zeros(), Vec3::y(), 0.0)
}

fn max_diff(a: &Frame, b: &Frame) -> f32 {
    a.color.iter().zip(&b.color).flat_map(|(x, y)| (0..3).map(move |c| (x[c] - y[c]).abs())).fold(0.0, f32::max)
}

fn assert_same(a: &Frame, b: &Frame) {
    assert!(max_diff(a, b) <= 1e-4);
    assert_eq!(a.color, b.color, "streaming should reproduce the accumulation order exactly");
    assert_eq!(a.depth, b.depth);
}

fn tiny(kind: SceneKind, seed: u64) -> SceneRep {
    generate_scene(&ScenePlan::new(kind, seed, SizeClass::Tiny))
}

#[test]
fn structured_stream_matches_pixel_centric() {
    let intr = Intrinsics::square(16);
    for seed in 0..2 {
        let scene = tiny(SceneKind::Structured, seed);
        let pose = pose_at(0.4 * seed as f64);
        let reference = render_frame(&pose, &intr, &scene);
        for order in [VisitOrder::FrontToBack, VisitOrder::Dram] {
            let opts = StreamOptions { order, ..Default::default() };
            let out = stream_render_frame(&pose, &intr, &scene, &opts).unwrap();
            assert_same(&out.frame, &reference);
        }
    }
}

#[test]
fn unstructured_stream_through_merged_octree_matches() {
    let intr = Intrinsics::square(16);
    for seed in 0..2 {
        let scene = tiny(SceneKind::Unstructured, seed);
        let pose = pose_at(1.0 + seed as f64);
        let reference = render_frame(&pose, &intr, &scene);
        for order in [VisitOrder::FrontToBack, VisitOrder::Dram] {
            let opts = StreamOptions { order, ..Default::default() };
            let out = stream_render_frame(&pose, &intr, &scene, &opts).unwrap();
            assert_same(&out.frame, &reference);
        }
    }
}

#[test]
fn hierarchical_grid_streams_with_and_without_reverted_levels() {
    let intr = Intrinsics::square(16);
    let mut plan = ScenePlan::new(SceneKind::Structured, 3, SizeClass::Tiny);
    plan.levels = 3;
    let scene = generate_scene(&plan);
    let grid = scene.as_grid().unwrap();
    let pose = pose_at(0.7);
    let reference = render_frame(&pose, &intr, &scene);
    let cap = DEFAULT_CAPACITY;
    let bases = level_bases(grid);
    let streamed = |l: usize| LevelPlan::Streamed(build_level_mvoxels(grid, l, cap, bases[l]).unwrap());
    let layouts = [
        vec![streamed(0), streamed(1), streamed(2)],
        vec![LevelPlan::Reverted, streamed(1), LevelPlan::Reverted],
        vec![LevelPlan::Reverted, LevelPlan::Reverted, LevelPlan::Reverted],
    ];
    for plans in layouts {
        let reverted = plans.iter().filter(|p| matches!(p, LevelPlan::Reverted)).count();
        let layout = BlockLayout::grid(grid, plans);
        let out = stream_render(&pose, &intr, &scene, &layout, &StreamOptions::default());
        assert_same(&out.frame, &reference);
        assert_eq!(out.reverted_reads, reverted * 8 * out.samples_computed);
    }
}

#[test]
fn each_touched_block_is_read_once_and_streams() {
    let intr = Intrinsics::square(32);
    for kind in [SceneKind::Structured, SceneKind::Unstructured] {
        let scene = tiny(kind, 1);
        let pose = pose_at(0.3);
        let opts = StreamOptions::default();
        let (layout, _) = prepare_layout(&scene, &pose, &intr, &opts).unwrap();
        let out = stream_render(&pose, &intr, &scene, &layout, &opts);
        let mut heads: HashMap<u64, usize> = HashMap::new();
        for e in out.trace.events.iter().filter(|e| e.kind == MemKind::DramRandom) {
            *heads.entry(e.address).or_default() += 1;
        }
        assert_eq!(heads.len(), out.loads.len());
        for l in &out.loads {
            assert_eq!(heads.get(&l.base), Some(&1), "block {} base {}", l.block, l.base);
        }
        let loaded: HashSet<usize> = out.loads.iter().map(|l| l.block).collect();
        assert_eq!(loaded.len(), out.loads.len());
        let dram: u64 = out.trace.bytes_of(MemKind::DramRandom) + out.trace.bytes_of(MemKind::DramStream);
        assert_eq!(dram, out.loads.iter().map(|l| l.bytes).sum::<u64>());
        assert!(out.trace.streaming_fraction() >= 0.99, "{kind:?}: {}", out.trace.streaming_fraction());
    }
}

#[test]
fn baseline_trace_renders_the_same_frame_with_random_gathers() {
    let intr = Intrinsics::square(16);
    for kind in [SceneKind::Structured, SceneKind::Unstructured] {
        let scene = tiny(kind, 2);
        let pose = pose_at(0.2);
        let base = render_frame_traced(&pose, &intr, &scene, &RenderOptions::default());
        assert_eq!(base.frame, render_frame(&pose, &intr, &scene));
        assert!(base.trace.streaming_fraction() < 0.13);
        assert_eq!(base.trace.count_of(MemKind::DramRandom) as usize, base.gathers);
        let out = stream_render_frame(&pose, &intr, &scene, &StreamOptions::default()).unwrap();
        assert_eq!(out.samples_computed, base.samples_computed);
    }
}

#[test]
fn terminated_rays_are_not_served_later() {
    let intr = Intrinsics::square(32);
    for kind in [SceneKind::Structured, SceneKind::Unstructured] {
        let scene = tiny(kind, 4);
        let pose = pose_at(2.0);
        let out = stream_render_frame(&pose, &intr, &scene, &StreamOptions::default()).unwrap();
        let mut terminated = 0;
        for (t, last) in out.ray_terminated_at.iter().zip(&out.ray_last_load) {
            if let Some(t) = t {
                terminated += 1;
                assert!(last.unwrap() <= *t);
            }
        }
        assert!(terminated > 0);
    }
}

fn toy_grid(dims: &[usize], channels: usize) -> VoxelGrid {
    let levels = dims
        .iter()
        .map(|&n| GridLevel {
            dims: [n; 3],
            cell_size: 2.0 / (n - 1) as f64,
            origin: Vec3::repeat(-1.0),
            features: (0..n * n * n * channels).map(|i| (i % 7) as f32 * 0.1).collect(),
        })
        .collect();
    VoxelGrid { channels, levels, mlp: Mlp::zeros(channels, 4) }
}

fn ray(o: Vec3, d: Vec3) -> Ray {
    Ray { origin: o, direction: d.normalize(), pixel: (0, 0), z_per_t: 1.0 }
}

#[test]
fn ray_along_x_lands_in_two_mvoxels() {
    // 16 vertices per axis with room for 8^3 blocks: 2 blocks along x
    let grid = toy_grid(&[16], 4);
    let scene = SceneRep::Structured(grid.clone());
    let mv = build_mvoxels(&grid, 8 * 8 * 8 * 8).unwrap();
    assert_eq!(mv.side, 8);
    let layout = BlockLayout::grid(&grid, vec![LevelPlan::Streamed(mv.clone())]);
    let r = ray(Vec3::new(-3.0, -0.7, -0.6), Vec3::x());
    let rit = build_rit(&[r], &scene, &layout, &RenderOptions::default());
    let occupied: BTreeSet<usize> = rit.touched_blocks().collect();
    // oracle: block of every corner vertex, from coordinates alone
    let (samples, _) = sample_structured(&r, 0, &grid, RenderOptions::default().samples_per_ray);
    let mut expect = BTreeSet::new();
    for s in &samples {
        let g = (s.position - grid.levels[0].origin) / grid.levels[0].cell_size;
        let cell = [g.x.floor().min(14.0), g.y.floor().min(14.0), g.z.floor().min(14.0)].map(|c| c as usize);
        for k in 0..8 {
            let v = [cell[0] + (k & 1), cell[1] + ((k >> 1) & 1), cell[2] + ((k >> 2) & 1)];
            expect.insert(v[0] / 8 + 2 * (v[1] / 8 + 2 * (v[2] / 8)));
        }
    }
    assert_eq!(expect, BTreeSet::from([0, 1]));
    assert_eq!(occupied, expect);
    let straddling = rit.entries[0].iter().filter(|a| rit.entries[1].iter().any(|b| b.sample == a.sample)).count();
    assert!(straddling > 0);
    assert!(build_rit(&[], &scene, &layout, &RenderOptions::default()).entries.iter().all(Vec::is_empty));
}

#[test]
fn rit_requirements_equal_pixel_centric_gathering() {
    let intr = Intrinsics::square(12);
    let mut plan = ScenePlan::new(SceneKind::Structured, 8, SizeClass::Tiny);
    plan.levels = 2;
    let scene = generate_scene(&plan);
    let grid = scene.as_grid().unwrap();
    let pose = pose_at(0.5);
    let rays = index_rays(&pose, &intr);
    let opts = RenderOptions::default();
    let bases = level_bases(grid);
    let plans: Vec<LevelPlan> = (0..2).map(|l| LevelPlan::Streamed(build_level_mvoxels(grid, l, 8192, bases[l]).unwrap())).collect();
    let layout = BlockLayout::grid(grid, plans);
    let rit = build_rit(&rays, &scene, &layout, &opts);

    let mut expect: Vec<(usize, usize, usize, usize)> = Vec::new();
    for (r, ray) in rays.iter().enumerate() {
        let (samples, _) = sample_structured(ray, r, grid, opts.samples_per_ray);
        for (si, s) in samples.iter().enumerate() {
            for (l, g) in gather_plan(grid, &s.position).iter().enumerate() {
                for &v in &g.corners {
                    expect.push((r, si, l, v));
                }
            }
        }
    }
    let mut got = Vec::new();
    for (b, items) in rit.entries.iter().enumerate() {
        let (l, local_block) = layout.locate(b);
        let BlockLayout::Grid { levels, .. } = &layout else { unreachable!() };
        let LevelPlan::Streamed(mv) = &levels[l] else { unreachable!() };
        let lv = &grid.levels[l];
        for it in items {
            for rd in &it.reads {
                let c = mv.vertex_of(local_block, rd.local as usize);
                got.push((it.ray as usize, it.sample as usize, l, lv.vertex_id(c[0], c[1], c[2])));
            }
        }
        // per-ray order inside a block is near to far
        for w in items.windows(2) {
            if w[0].ray == w[1].ray {
                assert!(w[0].sample < w[1].sample);
            }
        }
    }
    expect.sort_unstable();
    got.sort_unstable();
    assert_eq!(got, expect);
}

#[test]
fn mvoxel_bytes_are_conserved_across_levels() {
    let mut plan = ScenePlan::new(SceneKind::Structured, 1, SizeClass::Tiny);
    plan.levels = 3;
    let scene = generate_scene(&plan);
    let grid = scene.as_grid().unwrap();
    let bases = level_bases(grid);
    let total: u64 = (0..3).map(|l| build_level_mvoxels(grid, l, DEFAULT_CAPACITY, bases[l]).unwrap().total_bytes()).sum();
    assert_eq!(total, grid.feature_bytes() as u64);
}

#[test]
fn level_partition_follows_utilization() {
    let opts = RenderOptions::default();
    // one coarse level, fully covered by a fan of rays
    let coarse = toy_grid(&[3], 4);
    let rays: Vec<Ray> = (0..9)
        .flat_map(|i| (0..9).map(move |j| ray(Vec3::new(-0.9 + 0.225 * i as f64, -0.9 + 0.225 * j as f64, -3.0), Vec3::z())))
        .collect();
    let (plans, stats) = partition_levels(&coarse, &rays, &opts, DEFAULT_CAPACITY, 0.05).unwrap();
    assert!(matches!(plans[0], LevelPlan::Streamed(_)));
    assert_eq!(stats[0].utilization, 1.0);

    // a single ray through a large fine level touches about 1% of what it loads
    let fine = toy_grid(&[3, 65], 4);
    let one = [ray(Vec3::new(-3.0, 0.01, 0.02), Vec3::x())];
    let (plans, stats) = partition_levels(&fine, &one, &opts, DEFAULT_CAPACITY, 0.05).unwrap();
    assert!(stats[1].utilization < 0.05, "{:?}", stats[1]);
    assert!(matches!(plans[1], LevelPlan::Reverted));
    assert!(matches!(plans[0], LevelPlan::Streamed(_)));

    // mixed four-level grid against a set-based recount
    let mixed = toy_grid(&[3, 9, 17, 65], 4);
    let fan: Vec<Ray> = (0..4).map(|i| ray(Vec3::new(-3.0, -0.5 + 0.3 * i as f64, 0.1), Vec3::new(1.0, 0.05, 0.02))).collect();
    let (plans, stats) = partition_levels(&mixed, &fan, &opts, DEFAULT_CAPACITY, 0.05).unwrap();
    for (l, level) in mixed.levels.iter().enumerate() {
        let side = mvoxel_side(4, level.dims, DEFAULT_CAPACITY).unwrap();
        let mut touched = HashSet::new();
        for (r, ry) in fan.iter().enumerate() {
            for s in sample_structured(ry, r, &mixed, opts.samples_per_ray).0 {
                let (cell, _) = level.locate(&s.position);
                for k in 0..8 {
                    touched.insert([cell[0] + (k & 1), cell[1] + ((k >> 1) & 1), cell[2] + ((k >> 2) & 1)]);
                }
            }
        }
        let blocks: HashSet<[usize; 3]> = touched.iter().map(|v| v.map(|c| c / side)).collect();
        let loaded: usize = blocks
            .iter()
            .map(|b| (0..3).map(|a| side.min(level.dims[a] - b[a] * side)).product::<usize>())
            .sum();
        let util = touched.len() as f64 / loaded as f64;
        assert_eq!(stats[l].touched, touched.len());
        assert_eq!(stats[l].loaded, loaded);
        assert_eq!(matches!(plans[l], LevelPlan::Streamed(_)), util >= 0.05, "level {l}: {util}");
    }
    assert!(stats.iter().any(|s| s.streamed) && stats.iter().any(|s| !s.streamed));
}

#[test]
fn merging_raises_points_per_leaf_on_clustered_cloud() {
    let cloud = generate_clustered_cloud(11, 4096, 4);
    let merged = merge_octree(&cloud, DEFAULT_CAPACITY / 8).unwrap();
    assert!(merged.mean_points_per_leaf() > merged.uniform_mean_points_per_leaf());
    assert!(merged.leaves.iter().all(|l| l.bytes <= merged.capacity));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn random_views_stream_identically(angle in 0.0f64..6.28, seed in 0u64..4, unstructured in any::<bool>()) {
        let intr = Intrinsics::square(12);
        let kind = if unstructured { SceneKind::Unstructured } else { SceneKind::Structured };
        let scene = tiny(kind, seed);
        let pose = pose_at(angle);
        let out = stream_render_frame(&pose, &intr, &scene, &StreamOptions::default()).unwrap();
        let reference = render_frame(&pose, &intr, &scene);
        prop_assert_eq!(out.frame.color, reference.color);
    }
}

#[test]
fn orbit_trajectory_frames_stream_identically() {
    let intr = Intrinsics::square(16);
    let scene = tiny(SceneKind::Structured, 9);
    let traj = generate_orbit_trajectory(Vec3::zeros(), 2.5, 30.0, 3.0, 3).unwrap();
    for pose in traj.poses() {
        let out = stream_render_frame(pose, &intr, &scene, &StreamOptions::default()).unwrap();
        assert_same(&out.frame, &render_frame(pose, &intr, &scene));
    }
}
